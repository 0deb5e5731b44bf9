"""Synthetic tissue generation: layouts, rendering, patches, datasets."""

import json

import numpy as np
import pytest

from stainlab.colorspace import ConcentrationMap, compose, default_stain_matrix
from stainlab.errors import InvalidArgumentError
from stainlab.tissue import (
    MARKERS,
    Cell,
    FovSpec,
    build_dataset,
    extract_patches,
    generate_layout,
    load_dataset,
    render,
    split_counts,
)


def _spec(**kw) -> FovSpec:
    base = dict(width=96, height=96, cell_density=1500.0, seed=7)
    base.update(kw)
    return FovSpec(**base)


class TestLayout:
    def test_deterministic_given_seed(self):
        a = generate_layout(_spec())
        b = generate_layout(_spec())
        assert a.to_dict() == b.to_dict()

    def test_zero_density_is_empty(self):
        layout = generate_layout(_spec(cell_density=0.0))
        assert layout.cells == ()

    def test_expected_cell_count_scales_with_density(self):
        # Poisson mean = density * area / 1e6; average over seeds should
        # land near it.
        spec = _spec(width=256, height=256, cell_density=800.0)
        expected = 800.0 * 256 * 256 / 1e6
        counts = [
            len(generate_layout(FovSpec(**{**spec.__dict__, "seed": s})).cells)
            for s in range(30)
        ]
        assert np.mean(counts) == pytest.approx(expected, rel=0.15)

    def test_expression_frequency_tracks_probs(self):
        spec = _spec(width=512, height=512, cell_density=2000.0,
                     colocalization_probs=(0.2, 0.55, 0.9))
        layout = generate_layout(spec)
        assert len(layout.cells) > 200
        for marker, prob in zip(MARKERS, spec.colocalization_probs):
            freq = np.mean([c.expression[marker] > 0 for c in layout.cells])
            assert freq == pytest.approx(prob, abs=0.08)

    def test_some_cells_carry_multiple_markers(self):
        layout = generate_layout(_spec(width=256, height=256, cell_density=2000.0))
        n_multi = sum(
            1 for c in layout.cells
            if sum(level > 0 for level in c.expression.values()) >= 2
        )
        assert n_multi > 0

    def test_cell_validation(self):
        with pytest.raises(InvalidArgumentError):
            Cell(center=(0, 0), nucleus_radius=5, membrane_radius=4,
                 membrane_thickness=1, expression={}, hematoxylin_level=1.0)
        with pytest.raises(InvalidArgumentError):
            Cell(center=(0, 0), nucleus_radius=5, membrane_radius=8,
                 membrane_thickness=1, expression={"m1": 1.5},
                 hematoxylin_level=1.0)

    def test_spec_validation(self):
        with pytest.raises(InvalidArgumentError):
            FovSpec(width=0, height=10)
        with pytest.raises(InvalidArgumentError):
            _spec(cell_density=-1.0)
        with pytest.raises(InvalidArgumentError):
            _spec(colocalization_probs=(0.5, 0.5, 1.5))
        with pytest.raises(InvalidArgumentError):
            _spec(noise_sigma=-0.1)


class TestRender:
    def test_matches_compose_with_zero_noise(self):
        # Forward-model oracle: the renderer must be compose() applied to
        # its own ground-truth concentrations, byte for byte.
        spec = _spec(noise_sigma=0.0)
        layout = generate_layout(spec)
        stains = default_stain_matrix()
        img, conc = render(layout, MARKERS, stains, spec)
        assert np.array_equal(img, compose(conc, stains))

    def test_deterministic_bytes(self):
        spec = _spec()
        a, _ = render(generate_layout(spec), MARKERS, spec=spec)
        b, _ = render(generate_layout(spec), MARKERS, spec=spec)
        assert np.array_equal(a, b)

    def test_marker_channels_agree_across_arms(self):
        # The singleplex arm must see exactly the concentrations the triplex
        # arm saw for the shared marker; texture is keyed off geometry, not
        # marker selection.
        spec = _spec(noise_sigma=0.0)
        layout = generate_layout(spec)
        stains = default_stain_matrix()
        _, conc_tri = render(layout, MARKERS, stains, spec)
        for marker in MARKERS:
            _, conc_single = render(layout, (marker,), stains, spec)
            plane = stains.index({"m1": "Tamra", "m2": "QM-Dabsyl", "m3": "Green"}[marker])
            hema = stains.index("Hematoxylin")
            assert np.array_equal(conc_tri.values[..., plane],
                                  conc_single.values[..., plane])
            assert np.array_equal(conc_tri.values[..., hema],
                                  conc_single.values[..., hema])

    def test_unselected_markers_are_absent(self):
        spec = _spec(noise_sigma=0.0)
        layout = generate_layout(spec)
        stains = default_stain_matrix()
        _, conc = render(layout, ("m1",), stains, spec)
        assert np.all(conc.values[..., stains.index("QM-Dabsyl")] == 0)
        assert np.all(conc.values[..., stains.index("Green")] == 0)

    def test_noise_differs_between_arms(self):
        # Aligned renders must not share a noise field, or the evaluation
        # pairs would be correlated through the background.
        spec = _spec(noise_sigma=0.05)
        layout = generate_layout(spec)
        tri, _ = render(layout, MARKERS, spec=spec)
        single, _ = render(layout, ("m1",), spec=spec)
        background = np.all(np.stack([tri, single]) > 250, axis=(0, 3))
        assert background.any()
        diff = tri.astype(int) - single.astype(int)
        assert np.abs(diff[background]).max() > 0

    def test_unknown_marker_rejected(self):
        layout = generate_layout(_spec())
        with pytest.raises(InvalidArgumentError):
            render(layout, ("m1", "m9"))

    def test_empty_selection_rejected(self):
        layout = generate_layout(_spec())
        with pytest.raises(InvalidArgumentError):
            render(layout, ())

    def test_concentrations_nonnegative(self):
        spec = _spec()
        _, conc = render(generate_layout(spec), MARKERS, spec=spec)
        assert isinstance(conc, ConcentrationMap)
        assert conc.values.min() >= 0.0


class TestPatches:
    def test_split_counts_exact(self):
        assert split_counts(30) == (24, 3, 3)
        assert split_counts(10) == (8, 1, 1)
        assert split_counts(0) == (0, 0, 0)

    def test_split_counts_sum(self):
        for n in range(0, 50):
            assert sum(split_counts(n)) == n

    def test_origins_in_bounds(self):
        ps = extract_patches(100, 80, count=40, size=32, seed=1)
        for p in ps.patches:
            x, y = p.origin
            assert 0 <= x <= 100 - 32
            assert 0 <= y <= 80 - 32

    def test_deterministic(self):
        a = extract_patches(100, 100, count=12, size=32, seed=5)
        b = extract_patches(100, 100, count=12, size=32, seed=5)
        assert a == b

    def test_oversize_patch_rejected(self):
        with pytest.raises(InvalidArgumentError):
            extract_patches(64, 64, count=5, size=128)


class TestDataset:
    def test_manifest_and_pairs_byte_identical(self, micro_dataset, tmp_path):
        spec = FovSpec(width=128, height=128, cell_density=2000.0, seed=3)
        build_dataset(spec, tmp_path, n_fovs=1, patch_count=10, patch_size=32)
        for name in ("manifest.jsonl", "eval_pairs.jsonl", "config.json"):
            assert (tmp_path / name).read_bytes() == (micro_dataset / name).read_bytes()

    def test_eval_pairs_carry_val_and_test(self, micro_index):
        splits = {p["split"] for p in micro_index.eval_pairs}
        assert splits == {"val", "test"}

    def test_eval_pair_files_exist(self, micro_index):
        for pair in micro_index.eval_pairs:
            assert (micro_index.root / pair["triplex_path"]).exists()
            assert (micro_index.root / pair["singleplex_path"]).exists()
            assert (micro_index.root / pair["conc_path"]).exists()

    def test_arm_patch_counts(self, micro_index):
        # one triplex arm + three singleplex arms, 10 patches each
        assert len(micro_index.records) == 40
        assert len(micro_index.patch_paths("triplex")) == 10
        for m in MARKERS:
            assert len(micro_index.patch_paths("singleplex", marker=m)) == 10

    def test_split_filter(self, micro_index):
        train = micro_index.patch_paths("triplex", split="train")
        val = micro_index.patch_paths("triplex", split="val")
        test = micro_index.patch_paths("triplex", split="test")
        assert (len(train), len(test), len(val)) == (8, 1, 1)

    def test_config_records_settings(self, micro_index):
        cfg = micro_index.config
        assert cfg["spec"]["cell_density"] == 2000.0
        assert cfg["patch_size"] == 32
        assert cfg["eval_splits"] == ["test", "val"] or cfg["eval_splits"] == ["val", "test"]

    def test_load_dataset_round_trip(self, micro_dataset):
        idx = load_dataset(micro_dataset)
        reloaded = json.loads((micro_dataset / "config.json").read_text())
        assert idx.config == reloaded

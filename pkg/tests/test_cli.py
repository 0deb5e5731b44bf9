"""Command-line surface: exit codes, option resolution, artifacts.

Every test drives cli.main() in-process, so return codes and console
output are asserted exactly as a shell user would see them.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from stainlab.autodiff import load_checkpoint
from stainlab.cli import main
from stainlab.colorspace import rgb_to_od
from stainlab.gan import load_generator, translate_image
from stainlab.imgio import load_rgb
from stainlab.service import StudyStore, build_study
from stainlab.tissue import load_dataset
from stainlab.unmix import BACKGROUND_OD

FAST_SYNTH = ["--fovs", "1", "--patch-count", "6", "--patch-size", "32",
              "--density", "2500"]


def _tissue_patch(dataset_root: Path) -> Path:
    """First triplex training patch that actually contains tissue."""
    ds = load_dataset(dataset_root)
    for path in ds.patch_paths("triplex", split="train"):
        if (rgb_to_od(load_rgb(path)) >= BACKGROUND_OD).any():
            return path
    raise AssertionError("dataset has no tissue-bearing triplex patch")


@pytest.fixture(scope="module")
def short_models(gan_dataset, tmp_path_factory) -> Path:
    """Two training steps on one marker, via the stain-name alias."""
    out = tmp_path_factory.mktemp("cli_models")
    rc = main([
        "train", "--data", str(gan_dataset), "--stain", "Tamra",
        "--steps", "2", "--log-every", "1", "--seed", "0", "--out", str(out),
    ])
    assert rc == 0
    return out


class TestExitCodes:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "stainlab" in capsys.readouterr().out

    def test_train_without_data_is_config_error(self, capsys):
        assert main(["train", "--stain", "m1"]) == 2
        assert "error" in capsys.readouterr().err

    def test_unknown_stain_is_config_error(self, gan_dataset, capsys):
        rc = main(["train", "--data", str(gan_dataset), "--stain", "m9",
                   "--steps", "1"])
        assert rc == 2
        assert "m9" in capsys.readouterr().err

    def test_missing_input_is_io_error(self, tmp_path, capsys):
        rc = main(["unmix", str(tmp_path / "nope.png"), "--method", "linear",
                   "--stain", "m1", "--out", str(tmp_path / "out")])
        assert rc == 3
        capsys.readouterr()

    def test_missing_checkpoint_is_not_ready(self, gan_dataset, tmp_path, capsys):
        patch = _tissue_patch(gan_dataset)
        rc = main(["unmix", str(patch), "--method", "gan", "--stain", "m1",
                   "--model", str(tmp_path / "absent.ckpt"),
                   "--out", str(tmp_path / "out")])
        assert rc == 5
        assert "not ready" in capsys.readouterr().err

    def test_eval_without_models_is_not_ready(self, gan_dataset, tmp_path, capsys):
        rc = main(["eval", "--data", str(gan_dataset),
                   "--model-dir", str(tmp_path / "empty"),
                   "--out", str(tmp_path / "ev")])
        assert rc == 5
        capsys.readouterr()

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergent_lr_maps_to_exit_4(self, gan_dataset, tmp_path, capsys):
        # lr 1e20 drives the first update to overflow, so step two sees
        # non-finite losses and the loop aborts with the divergence error
        rc = main(["train", "--data", str(gan_dataset), "--stain", "m1",
                   "--steps", "5", "--lr", "1e20",
                   "--out", str(tmp_path / "tr")])
        assert rc == 4
        assert "diverged" in capsys.readouterr().err

    def test_config_file_with_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        rc = main(["synth", "--config", str(cfg), "--out", str(tmp_path / "d")])
        assert rc == 2
        assert "bogus" in capsys.readouterr().err

    def test_config_file_with_invalid_json(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("not json {")
        rc = main(["synth", "--config", str(cfg), "--out", str(tmp_path / "d")])
        assert rc == 2
        capsys.readouterr()


class TestSynthCli:
    def test_deterministic_across_runs(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["synth", "--out", str(out), "--seed", "7"] + FAST_SYNTH) == 0
        capsys.readouterr()
        for name in ("manifest.jsonl", "eval_pairs.jsonl", "config.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_resolved_echo_names_sources(self, tmp_path, capsys):
        rc = main(["synth", "--out", str(tmp_path / "d"), "--seed", "7"] + FAST_SYNTH)
        assert rc == 0
        out = capsys.readouterr().out
        line = next(l for l in out.splitlines() if l.startswith("resolved:"))
        assert "seed=7(flag)" in line
        assert "noise_sigma=0.02(default)" in line
        assert "fovs=1(flag)" in line
        # 6 crops per arm, four arms (triplex + three singleplexes)
        assert "dataset:" in out and "24 patches" in out

    def test_profile_fills_unset_scale_options(self, tmp_path, capsys):
        rc = main(["synth", "--out", str(tmp_path / "d"), "--fovs", "1",
                   "--patch-count", "4", "--patch-size", "32"])
        assert rc == 0
        line = next(l for l in capsys.readouterr().out.splitlines()
                    if l.startswith("resolved:"))
        # fovs came from the flag, the other scale knobs from the profile
        assert "fovs=1(flag)" in line
        assert "patch_count=4(flag)" in line

    def test_resolved_config_recorded(self, tmp_path, capsys):
        out = tmp_path / "d"
        assert main(["synth", "--out", str(out), "--seed", "3"] + FAST_SYNTH) == 0
        capsys.readouterr()
        doc = json.loads((out / "resolved_config.json").read_text())
        assert doc["command"] == "synth"
        assert doc["seed"] == 3
        assert doc["density"] == 2500.0

    def test_env_out_supplies_default_dir(self, tmp_path, capsys, monkeypatch):
        target = tmp_path / "from_env"
        monkeypatch.setenv("STAINLAB_OUT", str(target))
        assert main(["synth", "--seed", "1"] + FAST_SYNTH) == 0
        capsys.readouterr()
        assert (target / "manifest.jsonl").exists()


class TestTrainCli:
    def test_stain_alias_selects_marker_file(self, short_models):
        assert (short_models / "model_m1.ckpt").exists()
        assert not (short_models / "model_m2.ckpt").exists()

    def test_metrics_streamed_per_step(self, short_models):
        lines = [json.loads(l) for l in
                 (short_models / "metrics_m1.jsonl").read_text().splitlines()]
        assert [l["step"] for l in lines] == [1, 2]
        assert all(np.isfinite(l["loss_cycle_fwd"]) for l in lines)

    def test_resolved_config_recorded(self, short_models):
        doc = json.loads((short_models / "resolved_config.json").read_text())
        assert doc["command"] == "train"
        assert doc["steps"] == 2

    def test_checkpoint_round_trips_through_inference(self, short_models, gan_dataset):
        arrays, meta = load_checkpoint(short_models / "model_m1.ckpt")
        assert meta["config"]["steps"] == 2
        gen, domain = load_generator(arrays, meta, "G")
        img = load_rgb(_tissue_patch(gan_dataset))
        out = translate_image(gen, img, domain=domain, patch_size=48)
        assert out.shape == img.shape
        assert out.dtype == np.uint8


class TestUnmixCli:
    def test_gan_method_writes_reconstruction(self, gan_dataset, short_models,
                                              tmp_path, capsys):
        patch = _tissue_patch(gan_dataset)
        out = tmp_path / "out"
        rc = main(["unmix", str(patch), "--method", "gan", "--stain", "m1",
                   "--model-dir", str(short_models), "--tile", "48",
                   "--out", str(out)])
        assert rc == 0
        assert "m1_gan.png" in capsys.readouterr().out
        img = load_rgb(out / "m1_gan.png")
        assert img.shape == load_rgb(patch).shape

    def test_nmf_method_writes_all_markers(self, gan_dataset, tmp_path, capsys):
        patch = _tissue_patch(gan_dataset)
        out = tmp_path / "out"
        rc = main(["unmix", str(patch), "--method", "nmf", "--all-stains",
                   "--out", str(out)])
        assert rc == 0
        capsys.readouterr()
        for marker in ("m1", "m2", "m3"):
            assert (out / f"{marker}_nmf.png").exists()
        sidecar = json.loads((out / "nmf_concentrations.json").read_text())
        assert len(sidecar["planes"]) == 4
        assert (out / "nmf_concentrations.bin").exists()

    def test_linear_method_writes_map_and_image(self, gan_dataset, tmp_path, capsys):
        patch = _tissue_patch(gan_dataset)
        out = tmp_path / "out"
        rc = main(["unmix", str(patch), "--method", "linear", "--stain", "Green",
                   "--out", str(out)])
        assert rc == 0
        capsys.readouterr()
        assert (out / "m3_linear.png").exists()
        sidecar = json.loads((out / "m3_linear_concentrations.json").read_text())
        assert sidecar["planes"] == ["Green", "Hematoxylin"]


def _study_with_session(tmp_path: Path, complete: bool) -> Path:
    rng = np.random.default_rng(0)
    entries = [
        {
            "adjacent": rng.integers(0, 256, (8, 8, 3), dtype=np.uint8),
            "synthetic": rng.integers(0, 256, (8, 8, 3), dtype=np.uint8),
            "assay": "cMET-PDL1-EGFR",
            "stain": "Tamra",
            "fov": fov,
        }
        for fov in (0, 1)
    ]
    study = build_study(tmp_path / "study", entries)
    store = StudyStore(study)
    doc = store.create_session("r1", "cMET-PDL1-EGFR", "Tamra", seed=0)
    half = {"no_stain": 50, "weak": 25, "strong_moderate": 25}
    for idx, pair in enumerate(doc["pairs"]):
        store.append_score(doc["id"], {
            "submission_id": f"s{idx}", "pair": pair["pair"],
            "left": dict(half), "right": dict(half), "submitted_at": None,
        })
        doc["cursor"] += 1
    if complete:
        doc["status"] = "complete"
    store.save_session(doc)
    return study


class TestConsensusCli:
    def test_no_sessions_is_not_ready(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        study = build_study(tmp_path / "study", [{
            "adjacent": rng.integers(0, 256, (8, 8, 3), dtype=np.uint8),
            "synthetic": rng.integers(0, 256, (8, 8, 3), dtype=np.uint8),
            "assay": "cMET-PDL1-EGFR", "stain": "Tamra", "fov": 0,
        }])
        assert main(["consensus", "--study", str(study)]) == 5
        capsys.readouterr()

    def test_bad_category_is_config_error(self, tmp_path, capsys):
        study = _study_with_session(tmp_path, complete=True)
        rc = main(["consensus", "--study", str(study), "--category", "vivid"])
        assert rc == 2
        capsys.readouterr()

    def test_open_scored_session_blocks(self, tmp_path, capsys):
        study = _study_with_session(tmp_path, complete=False)
        assert main(["consensus", "--study", str(study)]) == 5
        assert "unblind" in capsys.readouterr().err

    def test_complete_session_reports(self, tmp_path, capsys):
        study = _study_with_session(tmp_path, complete=True)
        assert main(["consensus", "--study", str(study)]) == 0
        rows = json.loads(capsys.readouterr().out)
        # two pairs x two arms, one reading each
        assert len(rows) == 4
        arms = {row["arm"] for row in rows}
        assert arms == {"adjacent", "synthetic"}
        assert all(row["median"] == 25.0 for row in rows)

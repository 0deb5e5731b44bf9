"""Procedural tissue-like fields of view with membrane co-localization.

Cells are nucleus disks (counterstain) surrounded by membrane annuli that
carry any subset of the three markers, so overlapping membranes mix up to
three chromogens plus hematoxylin at the same pixels.  Rendering goes through
the same Beer-Lambert forward model as :func:`stainlab.colorspace.compose`,
which makes every generated image come with exact concentration ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .colorspace import (
    HEMATOXYLIN,
    OD_MAX,
    ConcentrationMap,
    StainMatrix,
    default_stain_matrix,
    od_to_rgb,
)
from .errors import InvalidArgumentError
from .imgio import save_concentration_map, save_rgb

MARKERS = ("m1", "m2", "m3")
MARKER_STAINS = {"m1": "Tamra", "m2": "QM-Dabsyl", "m3": "Green"}

# Peak OD contributions: three fully-expressed markers stay below OD_MAX.
MEMBRANE_SCALE = 1.2
NUCLEUS_SCALE = 0.8

# Stained structures get smoothstep boundaries this many pixels wide plus
# per-cell amplitude modulation, so pooled intensity histograms come out
# broad and smooth the way defocused real chromogens do instead of piling
# up at a handful of exact level*scale products.
EDGE_SOFTNESS = 1.5

SPLIT_RATIO = (0.8, 0.1, 0.1)
SPLIT_NAMES = ("train", "test", "val")


@dataclass(frozen=True)
class Cell:
    center: tuple[float, float]  # (x, y) pixels
    nucleus_radius: float
    membrane_radius: float
    membrane_thickness: float
    expression: dict[str, float]  # marker -> level in [0, 1]; 0 = not expressed
    hematoxylin_level: float

    def __post_init__(self):
        if not self.nucleus_radius > 0:
            raise InvalidArgumentError("nucleus radius must be positive")
        if not self.membrane_radius > self.nucleus_radius:
            raise InvalidArgumentError("membrane radius must exceed nucleus radius")
        for marker, level in self.expression.items():
            if not 0.0 <= level <= 1.0:
                raise InvalidArgumentError(f"expression {marker}={level} outside [0, 1]")


@dataclass(frozen=True)
class CellLayout:
    width: int
    height: int
    cells: tuple[Cell, ...]

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "cells": [
                {
                    "center": list(c.center),
                    "nucleus_radius": c.nucleus_radius,
                    "membrane_radius": c.membrane_radius,
                    "membrane_thickness": c.membrane_thickness,
                    "expression": {m: c.expression[m] for m in MARKERS},
                    "hematoxylin_level": c.hematoxylin_level,
                }
                for c in self.cells
            ],
        }


@dataclass(frozen=True)
class FovSpec:
    """Field-of-view generation settings (defaults follow the source assay
    protocol: 1586x1540 FOVs)."""

    width: int = 1586
    height: int = 1540
    # Dense enough that 64px training patches are mostly tissue.  Sparse
    # fields leave the adversarial game dominated by background, and a
    # blank output becomes the safe move.
    cell_density: float = 1800.0  # cells per megapixel
    colocalization_probs: tuple[float, float, float] = (0.55, 0.55, 0.55)
    seed: int = 0
    noise_sigma: float = 0.02  # OD-domain gaussian noise

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidArgumentError("FOV dimensions must be >= 1")
        if self.cell_density < 0:
            raise InvalidArgumentError("cell density must be >= 0")
        if len(self.colocalization_probs) != 3 or any(
            not 0.0 <= p <= 1.0 for p in self.colocalization_probs
        ):
            raise InvalidArgumentError("colocalization probs must be three values in [0, 1]")
        if self.noise_sigma < 0:
            raise InvalidArgumentError("noise sigma must be >= 0")


@dataclass(frozen=True)
class Patch:
    origin: tuple[int, int]  # (x, y)
    split: str


@dataclass(frozen=True)
class PatchSet:
    fov: str
    size: int
    patches: tuple[Patch, ...]


def _derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence(list(keys)).generate_state(1)[0])


def split_counts(count: int, ratio: Sequence[float] = SPLIT_RATIO) -> tuple[int, ...]:
    """Exact split sizes by largest-remainder rounding (ties resolved in
    ratio order), so counts always sum to ``count``."""
    if count < 0:
        raise InvalidArgumentError("count must be >= 0")
    quotas = [count * r for r in ratio]
    base = [int(np.floor(q)) for q in quotas]
    remainder = count - sum(base)
    fractions = sorted(
        range(len(ratio)), key=lambda i: (-(quotas[i] - base[i]), i)
    )
    for i in fractions[:remainder]:
        base[i] += 1
    return tuple(base)


def generate_layout(spec: FovSpec) -> CellLayout:
    """Draw a random cell layout; deterministic given ``spec.seed``."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    expected = spec.cell_density * spec.width * spec.height / 1e6
    n_cells = int(rng.poisson(expected)) if expected > 0 else 0
    cells = []
    for _ in range(n_cells):
        cx = float(rng.uniform(0, spec.width))
        cy = float(rng.uniform(0, spec.height))
        nucleus = float(rng.uniform(4.0, 7.0))
        membrane = nucleus + float(rng.uniform(2.5, 5.5))
        thickness = float(rng.uniform(1.5, 2.75))
        expression = {}
        for marker, prob in zip(MARKERS, spec.colocalization_probs):
            expressed = rng.random() < prob
            level = float(rng.uniform(0.3, 1.0)) if expressed else 0.0
            expression[marker] = level
        hema = float(rng.uniform(0.6, 1.0))
        cells.append(
            Cell(
                center=(cx, cy),
                nucleus_radius=nucleus,
                membrane_radius=membrane,
                membrane_thickness=thickness,
                expression=expression,
                hematoxylin_level=hema,
            )
        )
    return CellLayout(width=spec.width, height=spec.height, cells=tuple(cells))


def _smoothstep(x: np.ndarray) -> np.ndarray:
    s = np.clip(x, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def _cell_texture_rng(cell: Cell) -> np.random.Generator:
    # Texture parameters must agree between the triplex render and every
    # singleplex render of the same layout, so they are keyed off the cell
    # geometry alone, never off the marker selection.
    key = [
        int(round(cell.center[0] * 8191.0)),
        int(round(cell.center[1] * 8191.0)),
        int(round(cell.nucleus_radius * 1024.0)),
        int(round(cell.membrane_radius * 1024.0)),
    ]
    return np.random.default_rng(np.random.SeedSequence(key))


def _rasterize(layout: CellLayout, markers: Sequence[str], stains: StainMatrix) -> np.ndarray:
    conc = np.zeros((layout.height, layout.width, len(stains)))
    marker_planes = {m: stains.index(MARKER_STAINS[m]) for m in markers}
    hema_plane = stains.index(HEMATOXYLIN)
    for cell in layout.cells:
        cx, cy = cell.center
        radius = cell.membrane_radius
        x0 = max(int(np.floor(cx - radius - 2)), 0)
        x1 = min(int(np.ceil(cx + radius + 3)), layout.width)
        y0 = max(int(np.floor(cy - radius - 2)), 0)
        y1 = min(int(np.ceil(cy + radius + 3)), layout.height)
        if x0 >= x1 or y0 >= y1:
            continue
        tex = _cell_texture_rng(cell)
        # draw in canonical order for every marker so singleplex renders see
        # the same values the triplex render saw
        phases = {m: tex.uniform(0.0, 2.0 * np.pi) for m in MARKERS}
        amps = {m: tex.uniform(0.1, 0.35) for m in MARKERS}
        rim = tex.uniform(-0.35, 0.35)
        yy, xx = np.ogrid[y0:y1, x0:x1]
        dist = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
        theta = np.arctan2(yy - cy, xx - cx)
        nucleus = _smoothstep((cell.nucleus_radius - dist) / EDGE_SOFTNESS + 0.5)
        profile = 1.0 + rim * (2.0 * (dist / cell.nucleus_radius) ** 2 - 1.0)
        conc[y0:y1, x0:x1, hema_plane] += (
            nucleus * profile * (NUCLEUS_SCALE * cell.hematoxylin_level)
        )
        half = cell.membrane_thickness / 2.0
        band = _smoothstep((half - np.abs(dist - (radius - half))) / EDGE_SOFTNESS + 0.5)
        for marker, plane in marker_planes.items():
            level = cell.expression[marker]
            if level > 0:
                polarity = 1.0 + amps[marker] * np.cos(theta - phases[marker])
                conc[y0:y1, x0:x1, plane] += band * polarity * (MEMBRANE_SCALE * level)
    return conc


def render(
    layout: CellLayout,
    markers: Sequence[str],
    stains: StainMatrix | None = None,
    spec: FovSpec | None = None,
    hematoxylin_only: bool = False,
) -> tuple[np.ndarray, ConcentrationMap]:
    """Render selected markers (plus the hematoxylin counterstain) to an RGB
    image and its ground-truth concentration map.

    Overlapping membranes add in OD.  Seeded gaussian noise of
    ``spec.noise_sigma`` is applied in OD space before conversion, salted by
    the marker selection so aligned singleplex/triplex renders of one layout
    get independent noise.
    """
    markers = tuple(markers)
    if not markers and not hematoxylin_only:
        raise InvalidArgumentError("select at least one marker or pass hematoxylin_only=True")
    unknown = [m for m in markers if m not in MARKERS]
    if unknown:
        raise InvalidArgumentError(f"unknown markers {unknown}; valid: {list(MARKERS)}")
    if stains is None:
        stains = default_stain_matrix()
    if spec is None:
        spec = FovSpec(width=layout.width, height=layout.height)

    conc = _rasterize(layout, markers, stains)
    od = conc @ stains.matrix
    if spec.noise_sigma > 0:
        salt = [spec.seed, 7] + sorted(MARKERS.index(m) for m in markers)
        noise_rng = np.random.default_rng(np.random.SeedSequence(salt))
        od = od + noise_rng.normal(0.0, spec.noise_sigma, size=od.shape)
    od = np.clip(od, 0.0, OD_MAX)
    return od_to_rgb(od), ConcentrationMap(conc, stains.names)


def extract_patches(
    width: int,
    height: int,
    count: int = 30,
    size: int = 256,
    seed: int = 0,
    fov: str = "fov0",
    ratio: Sequence[float] = SPLIT_RATIO,
) -> PatchSet:
    """Seeded uniform-random patch origins (overlaps allowed) with an exact
    train/test/val split."""
    if size > min(width, height):
        raise InvalidArgumentError(
            f"patch size {size} exceeds FOV dimensions {width}x{height}"
        )
    if count < 0:
        raise InvalidArgumentError("count must be >= 0")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    xs = rng.integers(0, width - size + 1, size=count)
    ys = rng.integers(0, height - size + 1, size=count)
    counts = split_counts(count, ratio)
    splits = [name for name, n in zip(SPLIT_NAMES, counts) for _ in range(n)]
    patches = tuple(
        Patch(origin=(int(x), int(y)), split=s) for x, y, s in zip(xs, ys, splits)
    )
    return PatchSet(fov=fov, size=size, patches=patches)


def _crop(img: np.ndarray, origin: tuple[int, int], size: int) -> np.ndarray:
    x, y = origin
    return img[y : y + size, x : x + size]


@dataclass
class DatasetPaths:
    root: Path
    manifest: Path
    eval_pairs: Path
    config: Path


def build_dataset(
    spec: FovSpec,
    out_dir: str | Path,
    stains: StainMatrix | None = None,
    n_fovs: int = 10,
    markers: Sequence[str] = MARKERS,
    patch_count: int = 30,
    patch_size: int = 256,
    eval_splits: Sequence[str] = ("val", "test"),
    assay: str = "cMET-PDL1-EGFR",
) -> DatasetPaths:
    """Generate the full training/evaluation dataset under ``out_dir``.

    Arms: one triplex arm plus one singleplex arm per marker, each arm built
    from independently seeded layouts (the translation model trains unpaired).
    Pixel-aligned singleplex renders and ground-truth concentrations are
    emitted only for the ``eval_splits`` patches of the triplex arm, under
    ``eval/`` (val pairs drive checkpoint selection during training, test
    pairs are for reporting).

    Deterministic given ``spec.seed``: rerunning with the same settings
    produces byte-identical manifests.
    """
    if stains is None:
        stains = default_stain_matrix()
    markers = tuple(markers)
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)

    arms: list[tuple[str, str | None]] = [("triplex", None)]
    arms += [("singleplex", m) for m in markers]

    records: list[dict] = []
    pair_records: list[dict] = []
    for arm_idx, (arm, marker) in enumerate(arms):
        arm_dir = f"{arm}_{marker}" if marker else arm
        selected = markers if marker is None else (marker,)
        for fov_idx in range(n_fovs):
            fov_seed = _derive_seed(spec.seed, arm_idx, fov_idx)
            fov_spec = replace(spec, seed=fov_seed)
            layout = generate_layout(fov_spec)
            img, conc = render(layout, selected, stains, fov_spec)
            patch_seed = _derive_seed(spec.seed, arm_idx, fov_idx, 101)
            patch_set = extract_patches(
                spec.width, spec.height, patch_count, patch_size, patch_seed,
                fov=f"fov{fov_idx:02d}",
            )
            for p_idx, patch in enumerate(patch_set.patches):
                rel = f"images/{arm_dir}/fov{fov_idx:02d}_p{p_idx:02d}.png"
                save_rgb(root / rel, _crop(img, patch.origin, patch_size))
                records.append(
                    {
                        "arm": arm,
                        "marker": marker,
                        "path": rel,
                        "split": patch.split,
                        "fov": fov_idx,
                        "origin": list(patch.origin),
                    }
                )
            if marker is None:
                # Full triplex FOV for whole-image unmixing demos.
                save_rgb(root / f"images/triplex/fov{fov_idx:02d}_full.png", img)
                pair_records.extend(
                    _emit_eval_pairs(
                        root, layout, conc, stains, fov_spec, fov_idx,
                        patch_set, patch_size, markers, eval_splits,
                    )
                )

    manifest = root / "manifest.jsonl"
    with manifest.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    eval_pairs = root / "eval_pairs.jsonl"
    with eval_pairs.open("w") as fh:
        for rec in pair_records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

    config = root / "config.json"
    config.write_text(
        json.dumps(
            {
                "assay": assay,
                "spec": {
                    "width": spec.width,
                    "height": spec.height,
                    "cell_density": spec.cell_density,
                    "colocalization_probs": list(spec.colocalization_probs),
                    "seed": spec.seed,
                    "noise_sigma": spec.noise_sigma,
                },
                "n_fovs": n_fovs,
                "markers": list(markers),
                "patch_count": patch_count,
                "patch_size": patch_size,
                "eval_splits": list(eval_splits),
                "stains": json.loads(stains.to_json()),
            },
            indent=2,
            sort_keys=True,
        )
    )
    return DatasetPaths(root=root, manifest=manifest, eval_pairs=eval_pairs, config=config)


def _emit_eval_pairs(
    root: Path,
    layout: CellLayout,
    triplex_conc: ConcentrationMap,
    stains: StainMatrix,
    fov_spec: FovSpec,
    fov_idx: int,
    patch_set: PatchSet,
    patch_size: int,
    markers: Sequence[str],
    eval_splits: Sequence[str],
) -> list[dict]:
    eval_patches = [
        (i, p) for i, p in enumerate(patch_set.patches) if p.split in eval_splits
    ]
    if not eval_patches:
        return []
    out = []
    singles = {m: render(layout, (m,), stains, fov_spec)[0] for m in markers}
    for p_idx, patch in eval_patches:
        conc_rel = f"eval/conc/fov{fov_idx:02d}_p{p_idx:02d}"
        crop_conc = ConcentrationMap(
            _crop(triplex_conc.values, patch.origin, patch_size), triplex_conc.names
        )
        save_concentration_map(root / conc_rel, crop_conc)
        for m in markers:
            single_rel = f"eval/{m}/fov{fov_idx:02d}_p{p_idx:02d}_single.png"
            save_rgb(root / single_rel, _crop(singles[m], patch.origin, patch_size))
            out.append(
                {
                    "marker": m,
                    "stain": MARKER_STAINS[m],
                    "fov": fov_idx,
                    "origin": list(patch.origin),
                    "split": patch.split,
                    "triplex_path": f"images/triplex/fov{fov_idx:02d}_p{p_idx:02d}.png",
                    "singleplex_path": single_rel,
                    "conc_path": conc_rel + ".json",
                }
            )
    return out


@dataclass
class DatasetIndex:
    """Loaded view of a generated dataset directory."""

    root: Path
    records: list[dict]
    eval_pairs: list[dict]
    config: dict

    def patch_paths(self, arm: str, marker: str | None = None, split: str | None = None) -> list[Path]:
        out = []
        for rec in self.records:
            if rec["arm"] != arm:
                continue
            if marker is not None and rec["marker"] != marker:
                continue
            if split is not None and rec["split"] != split:
                continue
            out.append(self.root / rec["path"])
        return out


def load_dataset(root: str | Path) -> DatasetIndex:
    root = Path(root)
    manifest = root / "manifest.jsonl"
    if not manifest.exists():
        raise InvalidArgumentError(f"no manifest.jsonl under {root}")
    records = [json.loads(line) for line in manifest.read_text().splitlines() if line]
    pairs_path = root / "eval_pairs.jsonl"
    pairs = (
        [json.loads(line) for line in pairs_path.read_text().splitlines() if line]
        if pairs_path.exists()
        else []
    )
    config = json.loads((root / "config.json").read_text()) if (root / "config.json").exists() else {}
    return DatasetIndex(root=root, records=records, eval_pairs=pairs, config=config)

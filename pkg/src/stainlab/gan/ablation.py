"""Domain ablation: does training in optical density beat raw RGB?

Runs the same translation training twice, once per input domain, then
scores both on the held-out aligned pairs.  OD is the package default; this
keeps the evidence for that choice reproducible.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..colorspace import StainMatrix, default_stain_matrix, rgb_to_od
from ..errors import InvalidArgumentError
from ..evaluate import l1_distance, sharpness, translation_score
from ..imgio import load_rgb
from ..tissue import MARKER_STAINS, DatasetIndex
from ..unmix import BACKGROUND_OD
from .inference import to_domain, translate_patch
from .training import CycleGanConfig, save_state, train

ARMS = ("od", "rgb")


def _training_arrays(
    dataset: DatasetIndex, marker: str, domain: str
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    source = [
        to_domain(load_rgb(p), domain)
        for p in dataset.patch_paths("triplex", split="train")
    ]
    target = [
        to_domain(load_rgb(p), domain)
        for p in dataset.patch_paths("singleplex", marker=marker, split="train")
    ]
    if not source or not target:
        raise InvalidArgumentError(
            f"dataset has no training patches for marker {marker}"
        )
    return source, target


def _eval_pairs(dataset: DatasetIndex, marker: str, limit: int | None):
    pairs = [
        p for p in dataset.eval_pairs
        if p["marker"] == marker and p.get("split", "test") != "val"
    ]
    if not pairs:
        raise InvalidArgumentError(f"dataset has no eval pairs for marker {marker}")
    return pairs[:limit] if limit else pairs


def run_ablation(
    dataset: DatasetIndex,
    marker: str,
    cfg: CycleGanConfig,
    out_dir: str | Path,
    max_pairs: int | None = None,
) -> dict:
    """Train od and rgb arms with identical settings, score each on the
    aligned eval pairs, and write report.json under out_dir."""
    if marker not in MARKER_STAINS:
        raise InvalidArgumentError(f"unknown marker {marker!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stains = (
        StainMatrix.from_json(json.dumps(dataset.config["stains"]))
        if dataset.config.get("stains")
        else default_stain_matrix()
    )
    stain_name = MARKER_STAINS[marker]
    stain = stains.rows[stains.index(stain_name)]
    pairs = _eval_pairs(dataset, marker, max_pairs)
    references = []
    triplex = []
    for pair in pairs:
        tri = load_rgb(dataset.root / pair["triplex_path"])
        # skip background-only crops; they carry nothing to score
        if not (rgb_to_od(tri) >= BACKGROUND_OD).any():
            continue
        triplex.append(tri)
        references.append(load_rgb(dataset.root / pair["singleplex_path"]))
    if not references:
        raise InvalidArgumentError(
            f"all eval pairs for marker {marker} are background-only"
        )

    arms: dict[str, dict] = {}
    for domain in ARMS:
        arm_cfg = replace(cfg, domain=domain)
        source, target = _training_arrays(dataset, marker, domain)
        state = train(
            arm_cfg, source, target,
            metrics_path=out_dir / f"metrics_{domain}.jsonl",
        )
        save_state(state, out_dir / f"model_{domain}.ckpt")
        translated = [translate_patch(state.G, img, domain) for img in triplex]
        corr = translation_score(translated, references, stain)
        arms[domain] = {
            "histogram_correlation": corr,
            "l1": float(np.mean([l1_distance(t, r) for t, r in zip(translated, references)])),
            "sharpness": float(np.mean([sharpness(t) for t in translated])),
            "reference_sharpness": float(np.mean([sharpness(r) for r in references])),
        }

    od_arm, rgb_arm = arms["od"], arms["rgb"]
    corr_delta = (
        od_arm["histogram_correlation"] - rgb_arm["histogram_correlation"]
        if od_arm["histogram_correlation"] is not None
        and rgb_arm["histogram_correlation"] is not None
        else None
    )
    report = {
        "marker": marker,
        "stain": stain_name,
        "steps": cfg.steps,
        "seed": cfg.seed,
        "n_eval_pairs": len(references),
        "arms": arms,
        # Directional deltas, recorded rather than thresholded: short runs
        # are noisy, so the sign is an observation about this run only.
        "observation": {
            "od_minus_rgb_correlation": corr_delta,
            "od_minus_rgb_sharpness": od_arm["sharpness"] - rgb_arm["sharpness"],
            "od_minus_rgb_l1": od_arm["l1"] - rgb_arm["l1"],
        },
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return report

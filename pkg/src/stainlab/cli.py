"""Command-line entry points.

    stainlab synth      generate the synthetic triplex/singleplex dataset
    stainlab train      fit translation models on one or all marker arms
    stainlab unmix      produce singleplex reconstructions for an image
    stainlab eval       score trained models against ground truth
    stainlab ablate     OD-domain vs RGB-domain training comparison
    stainlab serve      run the blinded review service
    stainlab consensus  offline consensus report for a review study

Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 training
divergence, 5 resource not ready.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .colorspace import default_stain_matrix, rgb_to_od
from .config import echo_resolved, resolve_options, scale_profile, write_resolved
from .errors import (
    InvalidArgumentError,
    NotReadyError,
    StainlabError,
    TrainingDivergedError,
)
from .evaluate import REFERENCE_SCORES, translation_score
from .gan import (
    CycleGanConfig,
    load_generator,
    run_ablation,
    save_state,
    to_domain,
    train,
    translate_image,
)
from .imgio import load_rgb, save_concentration_map, save_rgb
from .tissue import MARKER_STAINS, MARKERS, FovSpec, build_dataset, load_dataset
from .unmix import (
    BACKGROUND_OD,
    NmfConfig,
    deconvolve_linear,
    nmf_unmix,
    reconstruct_singleplex,
)
from .autodiff import load_checkpoint

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DIVERGED = 4
EXIT_NOT_READY = 5

_MARKER_BY_STAIN = {v.lower(): k for k, v in MARKER_STAINS.items()}


def _resolve_marker(value: str) -> str:
    """Accept marker ids (m1) or stain names (Tamra), case-insensitive."""
    low = value.lower()
    if low in MARKERS:
        return low
    if low in _MARKER_BY_STAIN:
        return _MARKER_BY_STAIN[low]
    raise InvalidArgumentError(
        f"unknown stain/marker {value!r}; expected one of "
        f"{list(MARKERS)} or {list(MARKER_STAINS.values())}"
    )


def _markers_from_args(args) -> list[str]:
    if getattr(args, "all_stains", False):
        return list(MARKERS)
    if getattr(args, "stain", None):
        return [_resolve_marker(args.stain)]
    raise InvalidArgumentError("pass --stain NAME or --all-stains")


def _cli_values(args, keys) -> dict:
    ns = vars(args)
    return {k: ns.get(k) for k in keys}


def _resolve(args, defaults: dict) -> tuple[dict, dict]:
    values, sources = resolve_options(
        _cli_values(args, defaults), defaults, getattr(args, "config", None)
    )
    return values, sources


# ---------------------------------------------------------------- synth --


def cmd_synth(args) -> int:
    defaults = {
        "seed": 0,
        "out": "stainlab_out/dataset",
        "paper_scale": False,
        "fovs": None,
        "patch_size": None,
        "patch_count": None,
        "density": 1800.0,
        "noise_sigma": 0.02,
        "assay": "cMET-PDL1-EGFR",
    }
    values, sources = _resolve(args, defaults)
    profile = scale_profile(values["paper_scale"])
    for key, pkey in (("fovs", "n_fovs"), ("patch_size", "patch_size"),
                      ("patch_count", "patch_count")):
        if values[key] is None:
            values[key] = profile[pkey]
            sources[key] = "profile"
    print(echo_resolved(values, sources))

    spec = FovSpec(
        width=profile["fov_width"],
        height=profile["fov_height"],
        cell_density=float(values["density"]),
        seed=int(values["seed"]),
        noise_sigma=float(values["noise_sigma"]),
    )
    paths = build_dataset(
        spec,
        values["out"],
        n_fovs=int(values["fovs"]),
        patch_count=int(values["patch_count"]),
        patch_size=int(values["patch_size"]),
        assay=values["assay"],
    )
    write_resolved(values["out"], "synth", values)
    n_patches = sum(1 for _ in paths.manifest.open())
    n_pairs = sum(1 for _ in paths.eval_pairs.open())
    print(f"dataset: {paths.root} ({n_patches} patches, {n_pairs} eval pairs)")
    return EXIT_OK


# ---------------------------------------------------------------- train --


def _val_score_fn(dataset, marker: str, cfg: CycleGanConfig):
    """Score G on the dataset's val pairs; None when the dataset has none."""
    stains = default_stain_matrix()
    vec = stains.rows[stains.index(MARKER_STAINS[marker])]
    tris, reals = [], []
    for pair in dataset.eval_pairs:
        if pair["marker"] != marker or pair.get("split") != "val":
            continue
        triplex = load_rgb(dataset.root / pair["triplex_path"])
        if not (rgb_to_od(triplex) >= BACKGROUND_OD).any():
            continue
        tris.append(triplex)
        reals.append(load_rgb(dataset.root / pair["singleplex_path"]))
    if not tris:
        return None

    def score(gen) -> float:
        fakes = [translate_image(gen, t, domain=cfg.domain) for t in tris]
        try:
            return translation_score(fakes, reals, vec)
        except StainlabError:
            return -1.0

    return score


def _train_one(dataset, marker: str, cfg: CycleGanConfig, out_dir: Path) -> dict:
    source_paths = dataset.patch_paths("triplex", split="train")
    target_paths = dataset.patch_paths("singleplex", marker=marker, split="train")
    if not source_paths or not target_paths:
        raise NotReadyError(
            f"dataset {dataset.root} lacks training patches for {marker}; "
            "run stainlab synth first"
        )
    source = [to_domain(load_rgb(p), cfg.domain) for p in source_paths]
    target = [to_domain(load_rgb(p), cfg.domain) for p in target_paths]
    metrics_path = out_dir / f"metrics_{marker}.jsonl"
    state = train(
        cfg, source, target,
        metrics_path=metrics_path,
        val_score=_val_score_fn(dataset, marker, cfg),
    )
    ckpt = save_state(state, out_dir / f"model_{marker}.ckpt")
    last = state.history[-1]
    cyc = last["loss_cycle_fwd"] + last["loss_cycle_bwd"]
    selected = (
        f", selected step {state.best_step} (val {state.best_val:.4f})"
        if state.best_step is not None
        else ""
    )
    print(
        f"{marker} ({MARKER_STAINS[marker]}): {cfg.steps} steps, "
        f"final cycle loss {cyc:.3f}{selected}, checkpoint {ckpt}"
    )
    return last


def cmd_train(args) -> int:
    defaults = {
        "seed": 0,
        "out": "stainlab_out/train",
        "data": None,
        "paper_scale": False,
        "steps": None,
        "domain": "od",
        "lr": 2e-4,
        "lambda_cycle": 10.0,
        "lambda_identity": 0.0,
        "log_every": 10,
        "init": "default",
    }
    values, sources = _resolve(args, defaults)
    if values["steps"] is None:
        values["steps"] = scale_profile(values["paper_scale"])["steps"]
        sources["steps"] = "profile"
    if not values["data"]:
        raise InvalidArgumentError("pass --data DIR pointing at a synth dataset")
    print(echo_resolved(values, sources))

    dataset = load_dataset(values["data"])
    out_dir = Path(values["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved(out_dir, "train", values)
    markers = _markers_from_args(args)
    for idx, marker in enumerate(markers):
        cfg = CycleGanConfig(
            steps=int(values["steps"]),
            lr=float(values["lr"]),
            lambda_cycle=float(values["lambda_cycle"]),
            lambda_identity=float(values["lambda_identity"]),
            seed=int(values["seed"]) + idx,
            domain=values["domain"],
            log_every=int(values["log_every"]),
            init=values["init"],
        )
        _train_one(dataset, marker, cfg, out_dir)
    return EXIT_OK


# ---------------------------------------------------------------- unmix --


def _load_gan(model_path: Path):
    arrays, meta = load_checkpoint(model_path)
    return load_generator(arrays, meta, "G")


def _gan_model_path(args, marker: str) -> Path:
    if getattr(args, "model", None):
        return Path(args.model)
    if getattr(args, "model_dir", None):
        return Path(args.model_dir) / f"model_{marker}.ckpt"
    raise InvalidArgumentError("gan method needs --model FILE or --model-dir DIR")


def cmd_unmix(args) -> int:
    out_dir = Path(args.out or "stainlab_out/unmix")
    out_dir.mkdir(parents=True, exist_ok=True)
    img = load_rgb(args.input)
    markers = _markers_from_args(args)
    stains = default_stain_matrix()
    written: list[Path] = []

    if args.method == "gan":
        for marker in markers:
            path = _gan_model_path(args, marker)
            if not path.exists():
                raise NotReadyError(f"checkpoint {path} does not exist; train first")
            gen, domain = _load_gan(path)
            out = translate_image(gen, img, domain=domain, patch_size=args.tile)
            dest = out_dir / f"{marker}_gan.png"
            save_rgb(dest, out)
            written.append(dest)
    elif args.method == "nmf":
        od = rgb_to_od(img)
        result = nmf_unmix(
            od,
            NmfConfig(stain_count=4, seed=args.seed or 0, fixed_basis=["Hematoxylin"]),
        )
        for marker in markers:
            stain = MARKER_STAINS[marker]
            single = reconstruct_singleplex(
                result.conc, stain, "Hematoxylin", result.basis
            )
            dest = out_dir / f"{marker}_nmf.png"
            save_rgb(dest, single)
            written.append(dest)
        save_concentration_map(out_dir / "nmf_concentrations", result.conc)
        written.append(out_dir / "nmf_concentrations.json")
    elif args.method == "linear":
        od = rgb_to_od(img)
        for marker in markers:
            stain = MARKER_STAINS[marker]
            pair = stains.subset([stain, "Hematoxylin"])
            conc = deconvolve_linear(od, pair)
            single = reconstruct_singleplex(conc, stain, "Hematoxylin", pair)
            dest = out_dir / f"{marker}_linear.png"
            save_rgb(dest, single)
            written.append(dest)
            save_concentration_map(out_dir / f"{marker}_linear_concentrations", conc)
            written.append(out_dir / f"{marker}_linear_concentrations.json")
    else:
        raise InvalidArgumentError(f"unknown method {args.method!r}")

    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


# ----------------------------------------------------------------- eval --


def _nmf_singleplex(img: np.ndarray, marker: str, seed: int) -> np.ndarray:
    od = rgb_to_od(img)
    result = nmf_unmix(
        od, NmfConfig(stain_count=4, seed=seed, fixed_basis=["Hematoxylin"])
    )
    return reconstruct_singleplex(
        result.conc, MARKER_STAINS[marker], "Hematoxylin", result.basis
    )


def cmd_eval(args) -> int:
    dataset = load_dataset(args.data)
    if not dataset.eval_pairs:
        raise NotReadyError(f"dataset {dataset.root} has no eval pairs")
    out_dir = Path(args.out or "stainlab_out/eval")
    out_dir.mkdir(parents=True, exist_ok=True)
    stains = default_stain_matrix()
    assay = dataset.config.get("assay", "cMET-PDL1-EGFR")
    reference = REFERENCE_SCORES.get(assay, {})
    seed = args.seed or 0

    scores: dict[str, dict] = {}
    study_entries: list[dict] = []
    for marker in MARKERS:
        stain_name = MARKER_STAINS[marker]
        # Val pairs belong to checkpoint selection during training; scoring
        # them here would leak the selection signal into the report.
        pairs = [
            p for p in dataset.eval_pairs
            if p["marker"] == marker and p.get("split", "test") != "val"
        ]
        if args.max_pairs:
            pairs = pairs[: args.max_pairs]
        if not pairs:
            raise NotReadyError(f"no eval pairs for {marker} in {dataset.root}")
        model_path = Path(args.model_dir) / f"model_{marker}.ckpt"
        if not model_path.exists():
            raise NotReadyError(f"checkpoint {model_path} does not exist; train first")
        gen, domain = _load_gan(model_path)
        refs, gans, nmfs = [], [], []
        seen_fovs: set[int] = set()
        skipped = 0
        for pair in pairs:
            triplex = load_rgb(dataset.root / pair["triplex_path"])
            real = load_rgb(dataset.root / pair["singleplex_path"])
            # Background-only crops happen at desk-scale cell density; they
            # carry no signal to score and NMF refuses to factor them.
            if not (rgb_to_od(triplex) >= BACKGROUND_OD).any():
                skipped += 1
                continue
            gan_img = translate_image(gen, triplex, domain=domain)
            nmf_img = _nmf_singleplex(triplex, marker, seed)
            refs.append(real)
            gans.append(gan_img)
            nmfs.append(nmf_img)
            # One review pair per FOV, matching the reader protocol.
            if args.study_out and pair["fov"] not in seen_fovs:
                seen_fovs.add(pair["fov"])
                study_entries.append(
                    {
                        "adjacent": real,
                        "synthetic": gan_img,
                        "assay": assay,
                        "stain": stain_name,
                        "fov": pair["fov"],
                    }
                )
        if not refs:
            raise NotReadyError(f"all eval pairs for {marker} are background-only")
        vec = stains.rows[stains.index(stain_name)]
        corr_gan = translation_score(gans, refs, vec)
        corr_nmf = translation_score(nmfs, refs, vec)
        scores[stain_name] = {
            "gan": corr_gan,
            "nmf": corr_nmf,
            "n_pairs": len(refs),
            "n_skipped": skipped,
            "reference": {
                "gan": reference.get("cyclegan", {}).get(stain_name),
                "nmf": reference.get("nmf", {}).get(stain_name),
            },
        }
        print(
            f"{stain_name:12s} gan={_fmt(corr_gan)} nmf={_fmt(corr_nmf)} "
            f"(published gan={_fmt(scores[stain_name]['reference']['gan'])} "
            f"nmf={_fmt(scores[stain_name]['reference']['nmf'])})"
        )

    doc = {"assay": assay, "stains": scores}
    (out_dir / "scores.json").write_text(json.dumps(doc, indent=2, sort_keys=True))
    print(f"wrote {out_dir / 'scores.json'}")
    if args.study_out:
        from .service import build_study

        study = build_study(args.study_out, study_entries)
        print(f"wrote blinded study {study} ({len(study_entries)} pairs)")
    return EXIT_OK


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.4f}"


# --------------------------------------------------------------- ablate --


def cmd_ablate(args) -> int:
    dataset = load_dataset(args.data)
    marker = _resolve_marker(args.stain or "m3")
    out_dir = Path(args.out or "stainlab_out/ablation")
    cfg = CycleGanConfig(steps=args.steps, seed=args.seed or 0)
    report = run_ablation(dataset, marker, cfg, out_dir, max_pairs=args.max_pairs)
    for arm, metrics in report["arms"].items():
        print(
            f"{arm}: corr={_fmt(metrics['histogram_correlation'])} "
            f"l1={metrics['l1']:.4f} sharpness={metrics['sharpness']:.3f}"
        )
    print(f"wrote {out_dir / 'report.json'}")
    return EXIT_OK


# ---------------------------------------------------------------- serve --


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.study, frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# ------------------------------------------------------------ consensus --


def cmd_consensus(args) -> int:
    from .service import CATEGORIES, StudyStore

    if args.category not in CATEGORIES:
        raise InvalidArgumentError(
            f"category must be one of {list(CATEGORIES)}, got {args.category!r}"
        )
    store = StudyStore(args.study)
    blocking = store.referenced_open_sessions()
    if blocking:
        raise NotReadyError(
            f"scored sessions still open: {sorted(blocking)}; "
            "consensus would unblind early"
        )
    if not store.complete_sessions():
        raise NotReadyError("no complete sessions yet")
    rows = store.consensus(args.category)
    print(json.dumps(rows, indent=2, sort_keys=True))
    return EXIT_OK


# ----------------------------------------------------------------- main --


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stainlab",
        description="Singleplex reconstruction from triplex brightfield IHC.",
    )
    parser.add_argument("--version", action="version", version=f"stainlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file of option overrides")
        p.add_argument("--seed", type=int, help="master RNG seed")
        p.add_argument("--out", help="output directory (default honors STAINLAB_OUT)")

    p = sub.add_parser("synth", help="generate the synthetic dataset")
    common(p)
    p.add_argument("--paper-scale", action="store_true", default=None,
                   help="full 1586x1540 FOVs with 256px patches (slow)")
    p.add_argument("--fovs", type=int, help="fields of view per arm")
    p.add_argument("--patch-size", type=int, dest="patch_size")
    p.add_argument("--patch-count", type=int, dest="patch_count")
    p.add_argument("--density", type=float, help="cells per megapixel")
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--assay", help="assay label recorded in the dataset")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train translation models")
    common(p)
    p.add_argument("--data", help="dataset directory from stainlab synth")
    p.add_argument("--stain", help="marker id (m1-m3) or stain name")
    p.add_argument("--all-stains", action="store_true",
                   help="train every marker arm sequentially")
    p.add_argument("--paper-scale", action="store_true", default=None)
    p.add_argument("--steps", type=int)
    p.add_argument("--domain", choices=["od", "rgb"])
    p.add_argument("--lr", type=float)
    p.add_argument("--lambda-cycle", type=float, dest="lambda_cycle")
    p.add_argument("--lambda-identity", type=float, dest="lambda_identity")
    p.add_argument("--log-every", type=int, dest="log_every")
    p.add_argument("--init", choices=["default", "identity"],
                   help="identity zeroes the generator heads at start")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("unmix", help="reconstruct singleplexes from an image")
    common(p)
    p.add_argument("input", help="RGB image to unmix")
    p.add_argument("--method", choices=["gan", "nmf", "linear"], default="gan")
    p.add_argument("--stain", help="marker id or stain name to reconstruct")
    p.add_argument("--all-stains", action="store_true")
    p.add_argument("--model", help="generator checkpoint (gan)")
    p.add_argument("--model-dir", dest="model_dir",
                   help="directory holding model_<marker>.ckpt files")
    p.add_argument("--tile", type=int, default=256, help="tile size for inference")
    p.set_defaults(func=cmd_unmix)

    p = sub.add_parser("eval", help="score models against ground truth")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model-dir", dest="model_dir", required=True)
    p.add_argument("--max-pairs", type=int, dest="max_pairs")
    p.add_argument("--study-out", dest="study_out",
                   help="also emit a blinded review study directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="OD vs RGB training-domain ablation")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--stain", help="marker to ablate (default m3/Green)")
    p.add_argument("--steps", type=int, default=120)
    p.add_argument("--max-pairs", type=int, dest="max_pairs")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("serve", help="run the blinded review service")
    p.add_argument("--study", required=True, help="study directory from eval --study-out")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--frontend", help="static frontend directory to mount at /")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("consensus", help="offline consensus report")
    p.add_argument("--study", required=True)
    p.add_argument("--category", default="strong_moderate",
                   help="score category to aggregate")
    p.set_defaults(func=cmd_consensus)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TrainingDivergedError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except NotReadyError as exc:
        print(f"error: not ready: {exc}", file=sys.stderr)
        return EXIT_NOT_READY
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StainlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

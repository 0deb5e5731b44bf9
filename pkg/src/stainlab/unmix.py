"""Baseline color unmixers: linear deconvolution and multiplicative-update NMF.

Linear deconvolution inverts the Beer-Lambert mixing matrix per pixel and is
exact for up to three linearly independent stains.  The NMF path factors the
foreground OD pixels as ``V ~ W @ H`` with nonnegative concentrations ``W``
and basis rows ``H``, and handles four stains at the cost of relying on the
image's stain statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .colorspace import (
    ConcentrationMap,
    StainMatrix,
    StainVector,
    compose,
    default_stain_matrix,
)
from .errors import (
    DegenerateInputError,
    IllConditionedError,
    InvalidArgumentError,
    UnsupportedStainCountError,
)

# Pixels whose OD is below this in every channel are treated as glass/background
# and excluded from NMF fitting; they dominate slides and drag the factorization.
BACKGROUND_OD = 0.08

_EPS = 1e-12


def deconvolve_linear(
    od: np.ndarray,
    stains: StainMatrix,
    clamp_negative: bool = True,
    cond_bound: float = 1e6,
) -> ConcentrationMap:
    """Per-pixel least-squares inversion of the stain mixing matrix.

    Solves ``od ~ M.T @ c`` for each pixel (exact inverse when the matrix has
    three rows).  Negative solutions are clamped to zero by default because
    concentrations are physical quantities.

    Raises ``UnsupportedStainCountError`` for more than three rows and
    ``IllConditionedError`` when the matrix condition number exceeds
    ``cond_bound``.
    """
    if len(stains) > 3:
        raise UnsupportedStainCountError(
            f"linear deconvolution handles at most 3 stains, got {len(stains)}"
        )
    arr = np.asarray(od, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidArgumentError(f"expected (H, W, 3) OD array, got {arr.shape}")

    m = stains.matrix  # (S, 3)
    cond = float(np.linalg.cond(m))
    if not np.isfinite(cond) or cond > cond_bound:
        raise IllConditionedError(
            f"stain matrix condition number {cond:.3g} exceeds bound {cond_bound:.3g}"
        )

    # pinv(M.T) maps od (3,) -> least-squares concentrations (S,)
    solver = np.linalg.pinv(m.T)  # (S, 3)
    conc = arr @ solver.T
    if clamp_negative:
        conc = np.maximum(conc, 0.0)
    return ConcentrationMap(conc, stains.names)


@dataclass
class NmfConfig:
    """Settings for multiplicative-update NMF.

    ``fixed_basis`` freezes rows at known vectors while the rest stay free;
    when it covers every row only concentrations update.  Pass a StainMatrix
    for explicit vectors, or just stain names to pin those rows at their
    reference directions.  ``reference_basis`` seeds the initialization
    (defaults to the package reference stains) so the factorization lands in
    the expected stain order.
    """

    stain_count: int = 4
    max_iters: int = 500
    tolerance: float = 0.0
    seed: int = 0
    fixed_basis: StainMatrix | Sequence[str] | None = None
    reference_basis: StainMatrix | None = None
    background_od: float = BACKGROUND_OD

    def __post_init__(self):
        if not 1 <= self.stain_count <= 4:
            raise InvalidArgumentError(f"stain_count must be 1-4, got {self.stain_count}")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if self.tolerance < 0:
            raise InvalidArgumentError("tolerance must be >= 0")


@dataclass
class NmfResult:
    basis: StainMatrix
    conc: ConcentrationMap
    objective_history: list[float] = field(default_factory=list)


def _resolve_reference(cfg: NmfConfig) -> StainMatrix:
    ref = cfg.reference_basis if cfg.reference_basis is not None else default_stain_matrix()
    if len(ref) < cfg.stain_count:
        raise InvalidArgumentError(
            f"reference basis has {len(ref)} rows, need {cfg.stain_count}"
        )
    return StainMatrix(tuple(ref.rows[: cfg.stain_count]))


def nmf_unmix(od: np.ndarray, cfg: NmfConfig) -> NmfResult:
    """Factor an OD image into nonnegative stain basis and concentrations.

    Lee-Seung multiplicative updates on the Frobenius objective
    ``||V - W H||_F`` over foreground pixels; stops at ``max_iters`` or when
    the relative objective change drops below ``tolerance``.  Background
    pixels receive zero concentration.  Deterministic given ``cfg.seed``.
    """
    arr = np.asarray(od, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidArgumentError(f"expected (H, W, 3) OD array, got {arr.shape}")
    height, width = arr.shape[:2]
    s = cfg.stain_count

    flat = arr.reshape(-1, 3)
    foreground = np.any(flat >= cfg.background_od, axis=1)
    v = flat[foreground]
    if v.size == 0:
        raise DegenerateInputError("image has no foreground signal to factor")

    reference = _resolve_reference(cfg)
    ref_matrix = reference.matrix  # (S, 3)

    fixed_rows: dict[int, np.ndarray] = {}
    if cfg.fixed_basis is not None:
        if isinstance(cfg.fixed_basis, StainMatrix):
            pinned = [(r.name, r.od) for r in cfg.fixed_basis.rows]
        else:
            pinned = [
                (name, reference.rows[reference.index(name)].od)
                for name in cfg.fixed_basis
            ]
        for name, vec in pinned:
            fixed_rows[reference.index(name)] = vec

    rng = np.random.default_rng(cfg.seed)
    h = ref_matrix + rng.uniform(0.0, 0.05, size=(s, 3))
    for idx, vec in fixed_rows.items():
        h[idx] = vec
    w = rng.uniform(0.0, 1.0, size=(v.shape[0], s))
    w[w == 0.0] = _EPS  # uniform draw is [0,1); keep strictly positive

    free = np.array([i not in fixed_rows for i in range(s)], dtype=bool)
    history: list[float] = []
    prev = None
    for _ in range(cfg.max_iters):
        if free.any():
            numer = w.T @ v  # (S, 3)
            denom = (w.T @ w) @ h + _EPS
            h_new = h * numer / denom
            h[free] = h_new[free]
        w *= (v @ h.T) / (w @ (h @ h.T) + _EPS)

        objective = float(np.linalg.norm(v - w @ h))
        history.append(objective)
        if prev is not None and cfg.tolerance > 0:
            rel = (prev - objective) / max(prev, _EPS)
            if abs(rel) < cfg.tolerance:
                break
        prev = objective

    # Resolve the scale ambiguity: unit-norm basis rows, concentrations rescaled.
    norms = np.linalg.norm(h, axis=1)
    for i in range(s):
        if norms[i] > _EPS:
            h[i] /= norms[i]
            w[:, i] *= norms[i]
        else:
            h[i] = ref_matrix[i]  # collapsed row: keep the reference direction
            w[:, i] = 0.0
    for idx, vec in fixed_rows.items():
        h[idx] = vec

    conc = np.zeros((height * width, s))
    conc[foreground] = w
    basis = StainMatrix(
        tuple(StainVector(name, h[i]) for i, name in enumerate(reference.names))
    )
    return NmfResult(
        basis=basis,
        conc=ConcentrationMap(conc.reshape(height, width, s), reference.names),
        objective_history=history,
    )


def reconstruct_singleplex(
    conc: ConcentrationMap,
    stain: str,
    counterstain: str,
    stains: StainMatrix,
    background: Sequence[float] = (255.0, 255.0, 255.0),
) -> np.ndarray:
    """Render the synthetic singleplex for one stain: keep only the named
    stain plane plus the counterstain plane and push them back through the
    forward model."""
    kept = conc.keep_only([stain, counterstain])
    return compose(kept, stains, background)

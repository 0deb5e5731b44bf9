"""Transmitted-light RGB <-> optical density conversion and Beer-Lambert mixing.

Absorbances of co-localized stains add linearly in optical density (OD),
``od = -log10(I / I0)``, which is the domain every unmixer in this package
works in.  A stain is characterized by its unit-norm OD absorption direction;
a pixel's OD is the concentration-weighted sum of the stain vectors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError

# Transmitted intensity is clamped half a quantization step above zero before
# the log, so OD stays bounded and the transform is invertible within 8-bit
# rounding.  OD_MAX is the density of that clamp against a 255 background.
MIN_TRANSMITTED = 0.5
OD_MAX = float(-np.log10(MIN_TRANSMITTED / 255.0))  # 2.70757...

DEFAULT_BACKGROUND = (255.0, 255.0, 255.0)

TAMRA = "Tamra"
QM_DABSYL = "QM-Dabsyl"
GREEN = "Green"
HEMATOXYLIN = "Hematoxylin"
STAIN_NAMES = (TAMRA, QM_DABSYL, GREEN, HEMATOXYLIN)

# Placeholder absorption directions (no published measurements exist for the
# chromogen analogues): purple, yellow and green chromogens plus the standard
# hematoxylin direction.  Mutually well-conditioned; swap in calibrated
# vectors via stain-matrix JSON when available.
_REFERENCE_OD = {
    TAMRA: (0.580, 0.680, 0.450),
    QM_DABSYL: (0.100, 0.300, 0.950),
    GREEN: (0.620, 0.180, 0.760),
    HEMATOXYLIN: (0.650, 0.704, 0.286),
}


@dataclass(frozen=True)
class StainVector:
    """A stain's unit-norm OD absorption direction."""

    name: str
    od: np.ndarray

    def __post_init__(self):
        od = np.asarray(self.od, dtype=np.float64)
        if od.shape != (3,):
            raise InvalidArgumentError(f"stain vector must have 3 components, got {od.shape}")
        if np.any(od < 0):
            raise InvalidArgumentError(f"stain vector {self.name!r} has negative components")
        norm = float(np.linalg.norm(od))
        if abs(norm - 1.0) > 1e-9:
            raise InvalidArgumentError(
                f"stain vector {self.name!r} is not unit norm (|v| = {norm!r}); "
                "use normalize_stain_vector()"
            )
        object.__setattr__(self, "od", od)


def normalize_stain_vector(v: Sequence[float], name: str = "stain") -> StainVector:
    """Scale a raw nonnegative absorption triple to unit Euclidean norm."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (3,):
        raise InvalidArgumentError(f"expected 3 components, got shape {arr.shape}")
    if np.any(arr < 0):
        raise InvalidArgumentError("absorption components must be nonnegative")
    norm = float(np.linalg.norm(arr))
    if norm <= 0.0 or not np.isfinite(norm):
        raise InvalidArgumentError("cannot normalize a zero-length stain vector")
    return StainVector(name, arr / norm)


@dataclass(frozen=True)
class StainMatrix:
    """Ordered stack of stain vectors; rows of the OD mixing matrix."""

    rows: tuple[StainVector, ...]

    def __post_init__(self):
        rows = tuple(self.rows)
        if not 1 <= len(rows) <= 4:
            raise InvalidArgumentError(f"stain matrix needs 1-4 rows, got {len(rows)}")
        names = [r.name for r in rows]
        if len(set(names)) != len(names):
            raise InvalidArgumentError(f"duplicate stain names: {names}")
        object.__setattr__(self, "rows", rows)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.rows)

    @property
    def matrix(self) -> np.ndarray:
        """(n_stains, 3) float64 array of unit row vectors."""
        return np.stack([r.od for r in self.rows])

    def __len__(self) -> int:
        return len(self.rows)

    def index(self, name: str) -> int:
        """Row index for a stain name (case-insensitive)."""
        lowered = [n.lower() for n in self.names]
        try:
            return lowered.index(name.lower())
        except ValueError:
            raise InvalidArgumentError(
                f"unknown stain {name!r}; have {list(self.names)}"
            ) from None

    def subset(self, names: Sequence[str]) -> "StainMatrix":
        return StainMatrix(tuple(self.rows[self.index(n)] for n in names))

    def to_json(self) -> str:
        doc = {"stains": [{"name": r.name, "od": [float(x) for x in r.od]} for r in self.rows]}
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "StainMatrix":
        doc = json.loads(text)
        try:
            rows = tuple(
                normalize_stain_vector(entry["od"], entry["name"]) for entry in doc["stains"]
            )
        except (KeyError, TypeError) as exc:
            raise InvalidArgumentError(f"malformed stain matrix document: {exc}") from exc
        return cls(rows)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "StainMatrix":
        return cls.from_json(Path(path).read_text())


def default_stain_matrix() -> StainMatrix:
    """The four reference stains: Tamra, QM-Dabsyl, Green, Hematoxylin."""
    return StainMatrix(
        tuple(normalize_stain_vector(_REFERENCE_OD[n], n) for n in STAIN_NAMES)
    )


@dataclass(frozen=True)
class ConcentrationMap:
    """Per-pixel nonnegative stain amounts, one plane per stain row.

    ``values`` has shape (H, W, n_stains), aligned with ``names``.
    """

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3 or values.shape[2] != len(self.names):
            raise InvalidArgumentError(
                f"concentration array shape {values.shape} does not match "
                f"{len(self.names)} plane names"
            )
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise InvalidArgumentError("concentration map must be at least 1x1")
        low = float(values.min()) if values.size else 0.0
        if low < -1e-9:
            raise InvalidArgumentError(
                f"concentrations must be nonnegative (min {low:.3g})"
            )
        if low < 0:
            # tolerate least-squares dust, keep the invariant exact
            values = np.maximum(values, 0.0)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def plane(self, name: str) -> np.ndarray:
        lowered = [n.lower() for n in self.names]
        try:
            idx = lowered.index(name.lower())
        except ValueError:
            raise InvalidArgumentError(
                f"unknown plane {name!r}; have {list(self.names)}"
            ) from None
        return self.values[:, :, idx]

    def keep_only(self, names: Sequence[str]) -> "ConcentrationMap":
        """Copy with every plane not in ``names`` zeroed (plane order kept)."""
        keep = {n.lower() for n in names}
        unknown = keep - {n.lower() for n in self.names}
        if unknown:
            raise InvalidArgumentError(f"unknown plane(s) {sorted(unknown)}")
        values = self.values.copy()
        for i, n in enumerate(self.names):
            if n.lower() not in keep:
                values[:, :, i] = 0.0
        return ConcentrationMap(values, self.names)


def _check_background(background: Sequence[float]) -> np.ndarray:
    bg = np.asarray(background, dtype=np.float64)
    if bg.shape != (3,):
        raise InvalidArgumentError(f"background must have 3 components, got {bg.shape}")
    if np.any(bg <= 0) or np.any(bg > 255):
        raise InvalidArgumentError(f"background components must lie in (0, 255], got {bg}")
    return bg


def _check_rgb(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim < 1 or arr.shape[-1] != 3 or arr.size == 0:
        raise InvalidArgumentError(f"expected (..., 3) RGB array, got shape {arr.shape}")
    if np.any(arr < 0) or np.any(arr > 255):
        raise InvalidArgumentError("RGB values must lie in [0, 255]")
    return arr


def rgb_to_od(img: np.ndarray, background: Sequence[float] = DEFAULT_BACKGROUND) -> np.ndarray:
    """Convert 8-bit transmitted-light RGB to optical density.

    Per channel ``od = -log10(clamp(I, 0.5, 255) / background)``, floored at
    zero so brighter-than-background pixels map to zero density.  Output is
    float64 with values in [0, OD_MAX].
    """
    arr = _check_rgb(img)
    bg = _check_background(background)
    transmitted = np.clip(arr.astype(np.float64), MIN_TRANSMITTED, 255.0)
    od = -np.log10(transmitted / bg)
    return np.maximum(od, 0.0)


def od_to_rgb(od: np.ndarray, background: Sequence[float] = DEFAULT_BACKGROUND) -> np.ndarray:
    """Invert :func:`rgb_to_od`: ``I = round(background * 10**-od)``, uint8."""
    arr = np.asarray(od, dtype=np.float64)
    if arr.ndim < 1 or arr.shape[-1] != 3 or arr.size == 0:
        raise InvalidArgumentError(f"expected (..., 3) OD array, got shape {arr.shape}")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("OD values must be finite and nonnegative")
    bg = _check_background(background)
    intensity = np.rint(bg * np.power(10.0, -arr))
    return np.clip(intensity, 0, 255).astype(np.uint8)


def compose_od(conc: ConcentrationMap, stains: StainMatrix) -> np.ndarray:
    """Beer-Lambert forward model in OD: concentration-weighted sum of stain
    vectors, clamped to [0, OD_MAX]."""
    if len(conc.names) != len(stains):
        raise InvalidArgumentError(
            f"{len(conc.names)} concentration planes vs {len(stains)} stain rows"
        )
    if tuple(n.lower() for n in conc.names) != tuple(n.lower() for n in stains.names):
        raise InvalidArgumentError(
            f"plane names {conc.names} do not match stain rows {stains.names}"
        )
    od = conc.values @ stains.matrix
    return np.clip(od, 0.0, OD_MAX)


def compose(
    conc: ConcentrationMap,
    stains: StainMatrix,
    background: Sequence[float] = DEFAULT_BACKGROUND,
) -> np.ndarray:
    """Render stain concentrations to an 8-bit RGB image."""
    return od_to_rgb(compose_od(conc, stains), background)

"""Image and concentration-map persistence.

Images travel as 8-bit RGB PNG.  Concentration maps are stored as raw
little-endian float32 planes next to a JSON sidecar describing layout:
``{"planes": [...], "width": W, "height": H, "dtype": "float32"}``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .colorspace import ConcentrationMap
from .errors import InvalidArgumentError


def load_rgb(path: str | Path) -> np.ndarray:
    """Read a PNG (or any PIL-supported image) as (H, W, 3) uint8."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def save_rgb(path: str | Path, img: np.ndarray) -> None:
    arr = np.asarray(img)
    if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidArgumentError(f"expected (H, W, 3) uint8 image, got {arr.dtype} {arr.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def save_concentration_map(base_path: str | Path, conc: ConcentrationMap) -> tuple[Path, Path]:
    """Write ``<base>.bin`` (plane-major float32) and ``<base>.json`` sidecar."""
    base = Path(base_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    bin_path = base.with_suffix(".bin")
    json_path = base.with_suffix(".json")
    planes = np.ascontiguousarray(conc.values.transpose(2, 0, 1).astype("<f4"))
    bin_path.write_bytes(planes.tobytes())
    sidecar = {
        "planes": list(conc.names),
        "width": conc.width,
        "height": conc.height,
        "dtype": "float32",
    }
    json_path.write_text(json.dumps(sidecar, sort_keys=True))
    return bin_path, json_path


def load_concentration_map(base_path: str | Path) -> ConcentrationMap:
    base = Path(base_path)
    if base.suffix == ".json":
        base = base.with_suffix("")
    sidecar = json.loads(base.with_suffix(".json").read_text())
    names = tuple(sidecar["planes"])
    width, height = int(sidecar["width"]), int(sidecar["height"])
    raw = np.frombuffer(base.with_suffix(".bin").read_bytes(), dtype="<f4")
    expected = len(names) * width * height
    if raw.size != expected:
        raise InvalidArgumentError(
            f"concentration data has {raw.size} values, sidecar implies {expected}"
        )
    planes = raw.reshape(len(names), height, width)
    return ConcentrationMap(planes.transpose(1, 2, 0).astype(np.float64), names)


def triptych(panels: list[np.ndarray], gap: int = 8) -> np.ndarray:
    """Stack images horizontally with white separators (the side-by-side
    triplex | synthetic | reference layout used in reports)."""
    if not panels:
        raise InvalidArgumentError("triptych needs at least one panel")
    height = max(p.shape[0] for p in panels)
    pieces = []
    for i, panel in enumerate(panels):
        if panel.ndim != 3 or panel.shape[2] != 3:
            raise InvalidArgumentError(f"panel {i} is not an RGB image: {panel.shape}")
        padded = np.full((height, panel.shape[1], 3), 255, dtype=np.uint8)
        padded[: panel.shape[0]] = panel
        pieces.append(padded)
        if i != len(panels) - 1:
            pieces.append(np.full((height, gap, 3), 255, dtype=np.uint8))
    return np.concatenate(pieces, axis=1)

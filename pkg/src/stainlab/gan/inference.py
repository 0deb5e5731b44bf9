"""Applying trained generators to images of arbitrary size.

Domain transforms map uint8 RGB into the [0, 1] network space either
through optical density (od, the default: OD / OD_MAX) or plain intensity
scaling (rgb).  Whole images run as overlapping tiles with feathered
blending so seams do not show.
"""

from __future__ import annotations

import numpy as np

from ..colorspace import OD_MAX, od_to_rgb, rgb_to_od
from ..errors import InvalidArgumentError
from ..autodiff import Tensor, no_grad
from .networks import DOWNSCALE_FACTOR, Generator


def to_domain(img: np.ndarray, domain: str = "od") -> np.ndarray:
    """uint8 RGB (H, W, 3) -> float32 (H, W, 3) in [0, 1]."""
    if domain == "od":
        arr = rgb_to_od(img) / OD_MAX
    elif domain == "rgb":
        arr = np.asarray(img, dtype=np.float64) / 255.0
    else:
        raise InvalidArgumentError(f"unknown domain {domain!r}")
    return np.clip(arr, 0.0, 1.0).astype(np.float32)


def from_domain(arr: np.ndarray, domain: str = "od") -> np.ndarray:
    """float (H, W, 3) in [0, 1] -> uint8 RGB."""
    arr = np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0)
    if domain == "od":
        return od_to_rgb(arr * OD_MAX)
    if domain == "rgb":
        return np.rint(arr * 255.0).astype(np.uint8)
    raise InvalidArgumentError(f"unknown domain {domain!r}")


def _pad_to_multiple(arr: np.ndarray, multiple: int) -> tuple[np.ndarray, int, int]:
    h, w = arr.shape[:2]
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph or pw:
        arr = np.pad(arr, ((0, ph), (0, pw), (0, 0)), mode="reflect")
    return arr, h, w


def _forward(gen: Generator, arr: np.ndarray) -> np.ndarray:
    """(H, W, 3) float in, (H, W, 3) float out; pads to the network's
    stride granularity."""
    padded, h, w = _pad_to_multiple(arr, DOWNSCALE_FACTOR)
    with no_grad():
        x = Tensor(padded.transpose(2, 0, 1)[None].astype(np.float32))
        y = gen(x)
    return y.data[0].transpose(1, 2, 0)[:h, :w]


def translate_patch(gen: Generator, img: np.ndarray, domain: str = "od") -> np.ndarray:
    """Translate one uint8 RGB patch in a single forward pass."""
    return from_domain(_forward(gen, to_domain(img, domain)), domain)


def _feather_window(size: int, overlap: int) -> np.ndarray:
    """1-D blending weights: linear ramps over the overlap region, floored
    at 1/overlap so every pixel keeps nonzero weight."""
    w = np.ones(size)
    if overlap > 0:
        ramp = (np.arange(1, overlap + 1)) / overlap
        n = min(overlap, size)
        w[:n] = np.minimum(w[:n], ramp[:n])
        w[-n:] = np.minimum(w[-n:], ramp[:n][::-1])
        w = np.maximum(w, 1.0 / overlap)
    return w


def translate_image(
    gen: Generator,
    img: np.ndarray,
    domain: str = "od",
    patch_size: int = 256,
    overlap: int = 32,
) -> np.ndarray:
    """Translate an arbitrary-size uint8 RGB image tile by tile.

    Tiles of patch_size advance by patch_size - overlap; contributions are
    feather-blended and renormalized by the accumulated weights.
    """
    if patch_size % DOWNSCALE_FACTOR:
        raise InvalidArgumentError(
            f"patch_size must be a multiple of {DOWNSCALE_FACTOR}"
        )
    if not 0 <= overlap < patch_size:
        raise InvalidArgumentError("overlap must satisfy 0 <= overlap < patch_size")
    arr = to_domain(img, domain)
    h, w = arr.shape[:2]
    if h <= patch_size and w <= patch_size:
        return from_domain(_forward(gen, arr), domain)

    # Clamp tile origins so edge tiles stay full size (image may still be
    # smaller than a tile along one axis; pad just that axis).
    arr, h, w = _pad_to_multiple(arr, DOWNSCALE_FACTOR)
    ph, pw = arr.shape[:2]
    stride = patch_size - overlap
    xs = sorted({min(x, max(pw - patch_size, 0)) for x in range(0, pw, stride)})
    ys = sorted({min(y, max(ph - patch_size, 0)) for y in range(0, ph, stride)})
    win = _feather_window(patch_size, overlap)
    win2d = np.minimum.outer(win, win)[:, :, None]
    acc = np.zeros((ph, pw, 3))
    weight = np.zeros((ph, pw, 1))
    for y in ys:
        for x in xs:
            tile = arr[y : y + patch_size, x : x + patch_size]
            out = _forward(gen, tile)
            th, tw = out.shape[:2]
            acc[y : y + th, x : x + tw] += out * win2d[:th, :tw]
            weight[y : y + th, x : x + tw] += win2d[:th, :tw]
    blended = acc / weight
    return from_domain(blended[:h, :w], domain)

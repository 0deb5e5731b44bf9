"""Finite-difference verification of backward passes.

Central differences with h=1e-4 need float64 parameters to resolve the
analytic gradients to the tolerances used here; callers are expected to
build their test graphs in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import InvalidArgumentError
from .tensor import Tensor


@dataclass
class GradCheckReport:
    ok: bool
    max_abs_err: float
    max_rel_err: float
    n_checked: int
    failures: list[tuple[str, int, float, float]] = field(default_factory=list)
    # failures rows: (param name/index, flat element index, analytic, numeric)


def gradient_check(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-4,
    rel_tol: float = 1e-4,
    abs_tol: float = 1e-6,
) -> GradCheckReport:
    """Compare analytic gradients of ``fn()`` against central differences.

    ``fn`` must rebuild the graph from the live ``params`` storage on every
    call and return a scalar tensor.  Every element of every parameter is
    perturbed, so keep the tensors small.
    """
    params = list(params)
    if not params:
        raise InvalidArgumentError("gradient_check needs at least one parameter")
    for p in params:
        if p.dtype != np.float64:
            raise InvalidArgumentError(
                "gradient_check requires float64 parameters "
                f"(got {p.dtype}); build the test graph in float64"
            )
        p.grad = None

    loss = fn()
    if loss.data.size != 1:
        raise InvalidArgumentError("fn must return a scalar loss")
    loss.backward()
    analytic = [
        (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for p in params
    ]

    max_abs = 0.0
    max_rel = 0.0
    n = 0
    failures: list[tuple[str, int, float, float]] = []
    for idx, p in enumerate(params):
        name = getattr(p, "name", "") or f"param{idx}"
        flat = p.data.reshape(-1)
        a_flat = analytic[idx].reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            f_plus = float(fn().data)
            flat[k] = orig - h
            f_minus = float(fn().data)
            flat[k] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(a_flat[k])
            abs_err = abs(a - numeric)
            denom = max(abs(a), abs(numeric))
            rel_err = abs_err / denom if denom > 0 else 0.0
            max_abs = max(max_abs, abs_err)
            max_rel = max(max_rel, rel_err)
            n += 1
            if abs_err > abs_tol and rel_err > rel_tol:
                failures.append((name, k, a, numeric))
    return GradCheckReport(
        ok=not failures,
        max_abs_err=max_abs,
        max_rel_err=max_rel,
        n_checked=n,
        failures=failures,
    )

"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import warnings
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..exceptions import NumericError
from .core import Tensor


def grad_check(
    f: Callable[..., Tensor],
    inputs: Union[Tensor, Sequence[Tensor]],
    h: float = 1e-6,
    max_coords: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Compare backward() against central differences of ``f``.

    ``f`` is called with no arguments when ``inputs`` are parameters it closes
    over, otherwise with the input tensors.  Returns the largest
    ``|analytic - numeric| / max(1, |analytic|)`` across the checked
    coordinates (all of them unless ``max_coords`` samples a subset per
    tensor).  Non-finite evaluations give ``inf``.
    """
    single = isinstance(inputs, Tensor)
    tensors = [inputs] if single else list(inputs)
    rng = rng if rng is not None else np.random.default_rng(0)

    def evaluate() -> float:
        try:
            out = f(*tensors) if _takes_args(f, len(tensors)) else f()
        except NumericError:
            return float("nan")
        return float(out.data.reshape(-1)[0])

    for t in tensors:
        t.grad = None
    try:
        loss = f(*tensors) if _takes_args(f, len(tensors)) else f()
        loss.backward()
    except NumericError as exc:
        warnings.warn(f"grad_check: non-finite forward ({exc})", RuntimeWarning)
        return float("inf")

    worst = 0.0
    for t in tensors:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        for k in coords:
            orig = flat[k]
            flat[k] = orig + h
            up = evaluate()
            flat[k] = orig - h
            down = evaluate()
            flat[k] = orig
            numeric = (up - down) / (2 * h)
            if not np.isfinite(numeric):
                warnings.warn("grad_check: non-finite intermediate value", RuntimeWarning)
                return float("inf")
            a = float(analytic.reshape(-1)[k])
            worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
    return worst


def _takes_args(f: Callable, n: int) -> bool:
    import inspect

    try:
        params = inspect.signature(f).parameters.values()
    except (TypeError, ValueError):
        return True
    positional = [
        p for p in params if p.kind in (p.POSITIONAL_ONLY, p.POSITIONAL_OR_KEYWORD, p.VAR_POSITIONAL)
    ]
    return bool(positional)

"""Parameter initialisation."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..exceptions import ContractError
from .core import Tensor, get_default_dtype


def he_init(shape: Sequence[int], fan_in: int, rng: np.random.Generator, dtype=None) -> Tensor:
    """Trainable tensor of normal draws with standard deviation ``sqrt(2 / fan_in)``."""
    if fan_in < 1:
        raise ContractError(f"fan_in must be >= 1, got {fan_in}")
    values = rng.standard_normal(tuple(shape)) * np.sqrt(2.0 / fan_in)
    return Tensor(values, requires_grad=True, dtype=dtype or get_default_dtype())


def zeros(shape: Sequence[int], dtype=None) -> Tensor:
    return Tensor(np.zeros(tuple(shape)), requires_grad=True, dtype=dtype or get_default_dtype())


def ones(shape: Sequence[int], dtype=None) -> Tensor:
    return Tensor(np.ones(tuple(shape)), requires_grad=True, dtype=dtype or get_default_dtype())

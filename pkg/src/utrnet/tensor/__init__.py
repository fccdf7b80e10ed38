"""Dense tensors with reverse-mode automatic differentiation."""

from . import nn, ops
from .core import (
    Tensor,
    as_tensor,
    finite_checks,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
    precision,
    set_default_dtype,
    tape,
)
from .gradcheck import grad_check
from .ops import (
    adaptive_avg_pool_height,
    batch_norm,
    concat_channels,
    conv2d,
    log_softmax,
    max_pool2d,
    upsample_bilinear,
)

__all__ = [
    "Tensor",
    "adaptive_avg_pool_height",
    "as_tensor",
    "batch_norm",
    "concat_channels",
    "conv2d",
    "finite_checks",
    "get_default_dtype",
    "grad_check",
    "is_grad_enabled",
    "log_softmax",
    "max_pool2d",
    "nn",
    "no_grad",
    "ops",
    "precision",
    "set_default_dtype",
    "tape",
    "upsample_bilinear",
]

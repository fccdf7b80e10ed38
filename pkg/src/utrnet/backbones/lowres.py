"""Conventional stride-reducing CNN used as the low-resolution baseline.

Pools height by 16 and width by 4 (2x2, 2x2, 2x1, 2x1) with no upsampling, the
usual shape of VGG-style text recognisers.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..exceptions import ContractError, DimensionError
from ..tensor import Tensor, ops
from ..tensor.nn import ConvBNReLU, Module

LOWRES_PRESETS = {
    "tiny": (16, 32, 64, 128),
    "micro": (2, 3, 3, 4),
    "full": (64, 128, 256, 512),
}
_POOLS = ((2, 2), (2, 2), (2, 1), (2, 1))


class LowResBackbone(Module):
    width_reduction = 4
    height_multiple = 16
    width_multiple = 4

    def __init__(self, widths: Sequence[int] = LOWRES_PRESETS["tiny"], in_channels: int = 1, rng=None):
        widths = tuple(int(w) for w in widths)
        if len(widths) != 4:
            raise ContractError(f"need 4 widths, got {widths}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.widths = widths
        self.blocks = []
        cin = in_channels
        for k, w in enumerate(widths):
            self.blocks.append(ConvBNReLU(cin, w, rng=rng))
            if k >= 2:
                self.blocks.append(ConvBNReLU(w, w, rng=rng))
            cin = w
        self.out_channels = widths[-1]

    def forward(self, image: Tensor) -> Tensor:
        h, w = image.shape[2:]
        if h % self.height_multiple or w % self.width_multiple:
            raise DimensionError(f"image extents {h}x{w} must be multiples of 16x4")
        x = image
        blocks = iter(self.blocks)
        for k, pool in enumerate(_POOLS):
            x = next(blocks)(x)
            if k >= 2:
                x = next(blocks)(x)
            x = ops.max_pool2d(x, pool)
        return x

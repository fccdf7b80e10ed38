"""Encoder-decoder feature extractor with skip connections (the small model).

Five resolution levels r = 1..5.  Going down, each level applies two
conv-norm-relu blocks (giving the skip map M_r) and a 2x2 max-pool.  Going up,
the coarser map is upsampled bilinearly, concatenated with M_r and passed
through two more conv-norm-relu blocks, so the output returns to the input
resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from ..exceptions import ContractError, DimensionError
from ..tensor import Tensor, ops
from ..tensor.nn import ConvBNReLU, Module

UNET_PRESETS = {
    "tiny": (16, 32, 64, 96, 128),
    "micro": (2, 3, 3, 4, 4),
    "full": (64, 128, 256, 384, 512),
}


@dataclass
class PyramidState:
    """Per-level feature maps: encoder outputs M_1..M_5 and decoder outputs F_1..F_5."""

    down_maps: List[Tensor] = field(default_factory=list)
    up_maps: List[Tensor] = field(default_factory=list)


class EncoderBlock(Module):
    def __init__(self, in_channels: int, out_channels: int, rng=None, pool: bool = True):
        self.conv1 = ConvBNReLU(in_channels, out_channels, rng=rng)
        self.conv2 = ConvBNReLU(out_channels, out_channels, rng=rng)
        self.pool = pool

    def features(self, x: Tensor) -> Tensor:
        return self.conv2(self.conv1(x))

    def encode_step(self, x: Tensor) -> Tensor:
        """Two conv blocks then 2x2 max-pool; halves both spatial extents."""
        if x.shape[2] % 2 or x.shape[3] % 2:
            raise DimensionError(f"encode_step needs even spatial extents, got {x.shape[2:]}")
        return ops.max_pool2d(self.features(x), (2, 2))

    forward = encode_step


class DecoderBlock(Module):
    def __init__(self, coarse_channels: int, skip_channels: int, out_channels: int, rng=None):
        self.conv1 = ConvBNReLU(coarse_channels + skip_channels, out_channels, rng=rng)
        self.conv2 = ConvBNReLU(out_channels, out_channels, rng=rng)

    def decode_step(self, coarse: Tensor, skip: Tensor) -> Tensor:
        """Upsample ``coarse`` by 2, concatenate the skip map, two conv blocks."""
        want = (2 * coarse.shape[2], 2 * coarse.shape[3])
        if tuple(skip.shape[2:]) != want or skip.shape[0] != coarse.shape[0]:
            raise DimensionError(
                f"decode_step: skip map {skip.shape} does not match upsampled {coarse.shape[:2] + want}"
            )
        merged = ops.concat_channels(ops.upsample_bilinear(coarse, 2), skip)
        return self.conv2(self.conv1(merged))

    forward = decode_step


class UNetBackbone(Module):
    """Full-resolution feature map from a 1-channel line image."""

    width_reduction = 1

    def __init__(self, widths: Sequence[int] = UNET_PRESETS["tiny"], in_channels: int = 1, rng=None):
        widths = tuple(int(w) for w in widths)
        if len(widths) != 5:
            raise ContractError(f"the encoder-decoder uses 5 levels, got widths {widths}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.widths = widths
        self.levels = len(widths)
        self.encoders = []
        cin = in_channels
        for w in widths:
            self.encoders.append(EncoderBlock(cin, w, rng=rng))
            cin = w
        # decoders[k] produces F_{k+1}, consuming F_{k+2} and M_{k+1}
        self.decoders = [
            DecoderBlock(widths[k + 1], widths[k], widths[k], rng=rng) for k in range(self.levels - 1)
        ]
        self.out_channels = widths[0]

    @property
    def height_multiple(self) -> int:
        return 2 ** (self.levels - 1)

    width_multiple = height_multiple

    def _check(self, image: Tensor) -> None:
        if image.ndim != 4:
            raise DimensionError(f"expected (N, C, H, W) image batch, got {image.shape}")
        m = self.height_multiple
        h, w = image.shape[2:]
        if h % m or w % m:
            raise DimensionError(
                f"image extents {h}x{w} must be multiples of {m}; resize the height "
                f"and right-pad the width to the next multiple of {m}"
            )

    def pyramid(self, image: Tensor) -> PyramidState:
        self._check(image)
        state = PyramidState()
        x = image
        for r, enc in enumerate(self.encoders):
            m = enc.features(x)
            state.down_maps.append(m)
            if r < self.levels - 1:
                x = ops.max_pool2d(m, (2, 2))
        f = state.down_maps[-1]
        ups = [f]
        for k in reversed(range(self.levels - 1)):
            f = self.decoders[k].decode_step(f, state.down_maps[k])
            ups.append(f)
        state.up_maps = ups[::-1]
        return state

    def forward(self, image: Tensor) -> Tensor:
        return self.pyramid(image).up_maps[0]

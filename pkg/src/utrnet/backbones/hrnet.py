"""Parallel multi-resolution feature extractor (the large model).

A stride-1 stem feeds four stages.  Stage I holds I parallel streams, stream r
at 1/2^(r-1) of the input resolution, each refined by residual blocks.  After
each stage the streams are fused: output stream r is the relu of the sum over
input streams i of a transform f_ir that is the identity when i == r, a chain
of strided 3x3 convolutions when i < r, and a 1x1 convolution followed by
bilinear upsampling when i > r.  Stages 1-3 emit one extra (coarser) stream;
stage 4 keeps four.  The head upsamples every stream to full resolution and
concatenates them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from ..exceptions import ContractError, DimensionError
from ..tensor import Tensor, ops
from ..tensor.nn import ConvBNReLU, Module

HRNET_PRESETS = {
    "tiny": (16, 32, 64, 128),
    "micro": (2, 2, 3, 3),
    "full": (64, 128, 256, 512),
}
NUM_STAGES = 4


@dataclass
class ResolutionStream:
    r: int
    tensor: Tensor


class BasicBlock(Module):
    """Two 3x3 conv-norm layers with an identity shortcut."""

    def __init__(self, channels: int, rng=None):
        self.conv1 = ConvBNReLU(channels, channels, rng=rng)
        self.conv2 = ConvBNReLU(channels, channels, rng=rng, activate=False)

    def forward(self, x: Tensor) -> Tensor:
        return ops.relu(ops.add(self.conv2(self.conv1(x)), x))


class Transform(Module):
    """The transform f_ir from stream ``i`` to resolution ``r`` (1-based)."""

    def __init__(self, i: int, r: int, widths: Sequence[int], rng=None):
        if not (1 <= i <= len(widths) and 1 <= r <= len(widths)):
            raise ContractError(f"invalid stream indices i={i}, r={r} for {len(widths)} streams")
        self.i, self.r = i, r
        self.steps: List[ConvBNReLU] = []
        self.project = None
        if i < r:
            cin = widths[i - 1]
            for k in range(r - i):
                last = k == r - i - 1
                cout = widths[r - 1] if last else cin
                self.steps.append(ConvBNReLU(cin, cout, stride=2, rng=rng, activate=not last))
        elif i > r:
            self.project = ConvBNReLU(widths[i - 1], widths[r - 1], rng=rng, kernel_size=1, activate=False)

    def forward(self, x: Tensor) -> Tensor:
        if self.i == self.r:
            return x
        if self.i < self.r:
            for step in self.steps:
                x = step(x)
            return x
        return ops.upsample_bilinear(self.project(x), 2 ** (self.i - self.r))


class Fusion(Module):
    def __init__(self, n_in: int, n_out: int, widths: Sequence[int], rng=None):
        self.n_in, self.n_out = n_in, n_out
        # transforms[r - 1][i - 1] is f_ir
        self.transforms = [
            _ModuleList([Transform(i, r, widths, rng=rng) for i in range(1, n_in + 1)])
            for r in range(1, n_out + 1)
        ]

    def terms(self, streams: Sequence[Tensor], r: int) -> List[Tensor]:
        """The individual summands f_ir(R_i) for output stream ``r``."""
        return [self.transforms[r - 1].items[i](s) for i, s in enumerate(streams)]

    def forward(self, streams: Sequence[Tensor]) -> List[Tensor]:
        if len(streams) != self.n_in:
            raise DimensionError(f"fusion expects {self.n_in} streams, got {len(streams)}")
        _check_resolutions(streams)
        outputs = []
        for r in range(1, self.n_out + 1):
            terms = self.terms(streams, r)
            total = terms[0]
            for t in terms[1:]:
                total = ops.add(total, t)
            outputs.append(ops.relu(total))
        return outputs


class _ModuleList(Module):
    def __init__(self, items):
        self.items = list(items)


def _check_resolutions(streams: Sequence[Tensor]) -> None:
    h, w = streams[0].shape[2:]
    for idx, s in enumerate(streams):
        scale = 2**idx
        if s.shape[2] * scale != h or s.shape[3] * scale != w:
            raise DimensionError(
                f"stream {idx + 1} has extents {s.shape[2:]}, expected {(h // scale, w // scale)}"
            )


class Stage(Module):
    def __init__(self, index: int, widths: Sequence[int], blocks: int = 2, rng=None):
        self.index = index
        self.branches = [
            _ModuleList([BasicBlock(widths[r], rng=rng) for _ in range(blocks)]) for r in range(index)
        ]
        n_out = index + 1 if index < NUM_STAGES else index
        self.fusion = Fusion(index, n_out, widths, rng=rng)

    def refine(self, streams: Sequence[Tensor]) -> List[Tensor]:
        out = []
        for branch, x in zip(self.branches, streams):
            for block in branch.items:
                x = block(x)
            out.append(x)
        return out

    def forward(self, streams: Sequence[Tensor]) -> List[Tensor]:
        if len(streams) != self.index:
            raise DimensionError(f"stage {self.index} consumes {self.index} streams, got {len(streams)}")
        return self.fusion(self.refine(streams))


def fuse_streams(fusion: Fusion, streams: Sequence[ResolutionStream]) -> List[ResolutionStream]:
    """Apply a stage's fusion to indexed streams, validating indices."""
    for k, s in enumerate(streams):
        if s.r != k + 1:
            raise DimensionError(f"stream at position {k} carries index {s.r}")
    outs = fusion([s.tensor for s in streams])
    return [ResolutionStream(r + 1, t) for r, t in enumerate(outs)]


class HRNetBackbone(Module):
    width_reduction = 1
    height_multiple = 2 ** (NUM_STAGES - 1)
    width_multiple = height_multiple

    def __init__(self, widths: Sequence[int] = HRNET_PRESETS["tiny"], in_channels: int = 1,
                 blocks: int = 2, rng=None):
        widths = tuple(int(w) for w in widths)
        if len(widths) != NUM_STAGES:
            raise ContractError(f"need {NUM_STAGES} stream widths, got {widths}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.widths = widths
        self.stem1 = ConvBNReLU(in_channels, widths[0], rng=rng)
        self.stem2 = ConvBNReLU(widths[0], widths[0], rng=rng)
        self.stages = [Stage(i, widths, blocks, rng=rng) for i in range(1, NUM_STAGES + 1)]
        self.out_channels = sum(widths)

    def _check(self, image: Tensor) -> None:
        if image.ndim != 4:
            raise DimensionError(f"expected (N, C, H, W) image batch, got {image.shape}")
        h, w = image.shape[2:]
        m = self.height_multiple
        if h % m or w % m:
            raise DimensionError(
                f"image extents {h}x{w} must be multiples of {m}; resize or pad to a multiple of {m}"
            )

    def stage_streams(self, image: Tensor) -> List[List[Tensor]]:
        """Streams entering each stage, followed by the final fused streams."""
        self._check(image)
        streams = [self.stem2(self.stem1(image))]
        history = [streams]
        for stage in self.stages:
            streams = stage(streams)
            history.append(streams)
        return history

    def head(self, streams: Sequence[Tensor]) -> Tensor:
        maps = [s if r == 0 else ops.upsample_bilinear(s, 2**r) for r, s in enumerate(streams)]
        return ops.concat(maps, axis=1)

    def forward(self, image: Tensor) -> Tensor:
        return self.head(self.stage_streams(image)[-1])

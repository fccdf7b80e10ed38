"""Sequence stage: feature map -> time steps -> DBiLSTM -> per-step class scores.

Sequences are time-major tensors ``(T, N, D)``.  Batches of padded lines carry
an integer ``lengths`` array; positions past a line's length are ignored by
the backward LSTM direction and by CTC.
"""

from __future__ import annotations

import warnings
from typing import Optional, Sequence

import numpy as np

from .exceptions import ContractError
from .tensor import Tensor, ops
from .tensor.nn import LSTM, Linear, Module


def collapse_height(features: Tensor) -> Tensor:
    """``(N, C, H, W)`` feature map -> ``(W, N, C)`` sequence (mean over height)."""
    pooled = ops.adaptive_avg_pool_height(features)
    n, c, _, w = pooled.shape
    return ops.transpose(ops.reshape(pooled, (n, c, w)), (2, 0, 1))


def temporal_dropout_mask(
    steps: int,
    batch: int,
    passes: int,
    drop_fraction: float,
    rng: np.random.Generator,
    lengths: Optional[Sequence[int]] = None,
    dtype=np.float32,
) -> np.ndarray:
    """Average of ``passes`` masks; each zeroes ``floor(L * drop_fraction)`` of a
    line's L steps (uniform, without replacement) and scales survivors by
    ``1 / (1 - drop_fraction)``.  Shape ``(T, N, 1)``."""
    if passes < 1:
        raise ContractError(f"passes must be >= 1, got {passes}")
    if not 0.0 <= drop_fraction < 1.0:
        raise ContractError(f"drop_fraction must lie in [0, 1), got {drop_fraction}")
    lengths = [steps] * batch if lengths is None else [int(v) for v in lengths]
    keep_scale = 1.0 / (1.0 - drop_fraction)
    mask = np.zeros((steps, batch), dtype=np.float64)
    for _ in range(passes):
        one = np.full((steps, batch), keep_scale)
        for n, length in enumerate(lengths):
            k = int(np.floor(length * drop_fraction))
            if k:
                one[rng.choice(length, size=k, replace=False), n] = 0.0
        mask += one
    return (mask / passes).astype(dtype)[:, :, None]


def temporal_dropout(
    seq: Tensor,
    passes: int = 5,
    drop_fraction: float = 0.5,
    training: bool = True,
    rng: Optional[np.random.Generator] = None,
    lengths: Optional[Sequence[int]] = None,
) -> Tensor:
    """Drop whole time steps, averaged over parallel masks; identity in eval mode."""
    if passes < 1:
        raise ContractError(f"passes must be >= 1, got {passes}")
    if not training or drop_fraction == 0.0:
        return seq
    steps, batch = seq.shape[0], seq.shape[1]
    if min(lengths if lengths is not None else [steps]) < 2:
        warnings.warn("temporal dropout on a sequence shorter than 2 steps; skipped", RuntimeWarning)
        return seq
    rng = rng if rng is not None else np.random.default_rng()
    mask = temporal_dropout_mask(steps, batch, passes, drop_fraction, rng, lengths, seq.dtype)
    return ops.apply_mask(seq, np.broadcast_to(mask, seq.shape))


class BiLSTMLayer(Module):
    """Forward and backward LSTMs whose states are merged per step by a linear map."""

    def __init__(self, input_size: int, hidden_size: int, output_size: Optional[int] = None, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.forward_lstm = LSTM(input_size, hidden_size, rng=rng)
        self.backward_lstm = LSTM(input_size, hidden_size, rng=rng)
        self.combine = Linear(2 * hidden_size, output_size or hidden_size, rng=rng)

    def forward(self, seq: Tensor, lengths: Optional[Sequence[int]] = None) -> Tensor:
        h_fwd = self.forward_lstm(seq)
        reversed_in = ops.reverse_sequences(seq, lengths)
        h_bwd = ops.reverse_sequences(self.backward_lstm(reversed_in), lengths)
        return self.combine(ops.concat([h_fwd, h_bwd], axis=2))


class DBiLSTM(Module):
    """Two stacked bidirectional layers."""

    def __init__(self, input_size: int, hidden_size: int, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.layer1 = BiLSTMLayer(input_size, hidden_size, rng=rng)
        self.layer2 = BiLSTMLayer(hidden_size, hidden_size, rng=rng)

    def forward(self, seq: Tensor, lengths: Optional[Sequence[int]] = None) -> Tensor:
        return self.layer2(self.layer1(seq, lengths), lengths)


class Classifier(Module):
    """Per-step linear map to K characters plus the blank (last index), then log-softmax."""

    def __init__(self, hidden_size: int, num_chars: int, rng=None):
        self.num_chars = num_chars
        self.proj = Linear(hidden_size, num_chars + 1, rng=rng)

    def forward(self, seq: Tensor) -> Tensor:
        return ops.log_softmax(self.proj(seq))


class SequenceHead(Module):
    def __init__(
        self,
        feature_channels: int,
        num_chars: int,
        hidden_size: int = 32,
        dropout_passes: int = 5,
        drop_fraction: float = 0.5,
        rng=None,
    ):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.dropout_passes = dropout_passes
        self.drop_fraction = drop_fraction
        self.rnn = DBiLSTM(feature_channels, hidden_size, rng=rng)
        self.classifier = Classifier(hidden_size, num_chars, rng=rng)

    def forward(
        self,
        features: Tensor,
        lengths: Optional[Sequence[int]] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        seq = collapse_height(features)
        seq = temporal_dropout(
            seq, self.dropout_passes, self.drop_fraction, self.training, rng, lengths
        )
        return self.classifier(self.rnn(seq, lengths))

import math

import numpy as np
import pytest

from utrnet.exceptions import ContractError
from utrnet.seqhead import (
    BiLSTMLayer,
    SequenceHead,
    collapse_height,
    temporal_dropout,
    temporal_dropout_mask,
)
from utrnet.tensor import Tensor, ops, precision


def scalar_lstm(x, wi, wh, b):
    """Per-unit loops with math.exp / math.tanh; gate order i, f, g, o."""
    T, N, D = x.shape
    H = wh.shape[0]
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    out = np.zeros((T, N, H))
    for n in range(N):
        h = [0.0] * H
        c = [0.0] * H
        for t in range(T):
            z = [b[k] + sum(x[t, n, d] * wi[d, k] for d in range(D)) + sum(h[j] * wh[j, k] for j in range(H))
                 for k in range(4 * H)]
            new_h = []
            for u in range(H):
                i, f = sig(z[u]), sig(z[H + u])
                g, o = math.tanh(z[2 * H + u]), sig(z[3 * H + u])
                c[u] = f * c[u] + i * g
                new_h.append(o * math.tanh(c[u]))
            h = new_h
            out[t, n] = h
    return out


def test_lstm_matches_scalar_oracle():
    rng = np.random.default_rng(0)
    x, wi, wh, b = rng.normal(size=(5, 2, 3)), rng.normal(size=(3, 8)), rng.normal(size=(2, 8)), rng.normal(size=8)
    with precision("float64"):
        got = ops.lstm(Tensor(x), Tensor(wi), Tensor(wh), Tensor(b)).data
    np.testing.assert_allclose(got, scalar_lstm(x, wi, wh, b), rtol=1e-12, atol=1e-14)


def test_bilstm_reversal_symmetry():
    rng = np.random.default_rng(1)
    with precision("float64"):
        layer = BiLSTMLayer(3, 4, output_size=5, rng=np.random.default_rng(2))
        mirror = BiLSTMLayer(3, 4, output_size=5, rng=np.random.default_rng(3))
        for a, b in (("forward_lstm", "backward_lstm"), ("backward_lstm", "forward_lstm")):
            for p in ("w_input", "w_hidden", "bias"):
                getattr(getattr(mirror, a), p).data[...] = getattr(getattr(layer, b), p).data
        w = layer.combine.weight.data
        mirror.combine.weight.data[...] = np.concatenate([w[4:], w[:4]], axis=0)
        mirror.combine.bias.data[...] = layer.combine.bias.data
        x = rng.normal(size=(6, 2, 3))
        out = layer(Tensor(x)).data
        flipped = mirror(Tensor(x[::-1].copy())).data
    np.testing.assert_allclose(flipped[::-1], out, rtol=1e-12, atol=1e-14)


def test_bilstm_respects_lengths():
    # steps past a line's length must not influence its valid outputs
    rng = np.random.default_rng(4)
    with precision("float64"):
        layer = BiLSTMLayer(2, 3, rng=np.random.default_rng(0))
        x = rng.normal(size=(6, 1, 2))
        padded = x.copy()
        padded[4:] = rng.normal(size=(2, 1, 2))
        a = layer(Tensor(x[:4].copy()), [4]).data
        b = layer(Tensor(padded), [4]).data[:4]
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_collapse_height_layout():
    x = np.arange(2 * 3 * 4 * 5, dtype=np.float64).reshape(2, 3, 4, 5)
    seq = collapse_height(Tensor(x, dtype=np.float64)).data
    assert seq.shape == (5, 2, 3)
    np.testing.assert_allclose(seq[2, 1, 0], x[1, 0, :, 2].mean())


def test_dropout_eval_is_identity():
    x = Tensor(np.random.default_rng(0).random((7, 2, 3)))
    out = temporal_dropout(x, training=False, rng=np.random.default_rng(0))
    assert np.array_equal(out.data, x.data)


def test_dropout_zero_fraction_is_identity():
    x = Tensor(np.random.default_rng(0).random((7, 2, 3)))
    for passes in (1, 5):
        out = temporal_dropout(x, passes=passes, drop_fraction=0.0, rng=np.random.default_rng(0))
        assert np.array_equal(out.data, x.data)


def test_dropout_single_pass_zeroes_half():
    x = np.ones((4, 1, 3))
    out = temporal_dropout(Tensor(x, dtype=np.float64), passes=1, rng=np.random.default_rng(7)).data
    zeroed = np.all(out == 0, axis=(1, 2))
    assert zeroed.sum() == 2
    np.testing.assert_array_equal(out[~zeroed], 2.0)


def test_dropout_mask_per_line_length():
    mask = temporal_dropout_mask(10, 2, 1, 0.5, np.random.default_rng(0), lengths=[10, 4])
    assert (mask[:, 0, 0] == 0).sum() == 5
    assert (mask[:4, 1, 0] == 0).sum() == 2


def test_dropout_short_sequence_warns():
    x = Tensor(np.ones((1, 1, 2)))
    with pytest.warns(RuntimeWarning):
        out = temporal_dropout(x, rng=np.random.default_rng(0))
    assert np.array_equal(out.data, x.data)


def test_dropout_rejects_bad_arguments():
    with pytest.raises(ContractError):
        temporal_dropout(Tensor(np.ones((4, 1, 1))), passes=0)
    with pytest.raises(ContractError):
        temporal_dropout_mask(4, 1, 1, 1.0, np.random.default_rng(0))


def test_dropout_monte_carlo_mean():
    rng = np.random.default_rng(11)
    x = rng.random((6, 2, 3)) + 0.5
    acc = np.zeros_like(x)
    for _ in range(2000):
        acc += temporal_dropout(Tensor(x, dtype=np.float64), passes=5, rng=rng).data
    np.testing.assert_allclose(acc / 2000, x, rtol=0.03)


def test_sequence_head_output_is_log_distribution():
    rng = np.random.default_rng(0)
    with precision("float64"):
        head = SequenceHead(4, 6, hidden_size=5, rng=rng).eval()
        lp = head(Tensor(rng.random((2, 4, 3, 7)))).data
    assert lp.shape == (7, 2, 7)
    np.testing.assert_allclose(np.exp(lp).sum(axis=-1), 1.0, rtol=1e-12)

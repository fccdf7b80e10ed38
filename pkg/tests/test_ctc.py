import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_ctc_loss, labeling_probs, random_log_probs
from utrnet.ctc import (
    InfeasibleAlignmentWarning,
    beam_decode,
    ctc_batch,
    ctc_grad,
    ctc_loss,
    ctc_loss_tensor,
    greedy_decode,
    min_frames,
    prefix_beam_search,
)
from utrnet.exceptions import ContractError, NumericError
from utrnet.tensor import Tensor, grad_check, ops, precision


def test_loss_matches_enumeration_small():
    rng = np.random.default_rng(0)
    for _ in range(30):
        t, c = int(rng.integers(1, 5)), int(rng.integers(2, 4))
        lp = random_log_probs(rng, t, c)
        target = list(rng.integers(0, c - 1, size=int(rng.integers(0, 3))))
        want = brute_ctc_loss(lp, target)
        if math.isinf(want):
            with pytest.warns(InfeasibleAlignmentWarning):
                assert math.isinf(ctc_loss(lp, target))
        else:
            assert ctc_loss(lp, target) == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_single_path_gradient():
    lp = np.log(np.array([[0.7, 0.3]]))
    np.testing.assert_allclose(ctc_grad(lp, [0]), [[-1.0, 0.0]])
    assert ctc_loss(lp, [0]) == pytest.approx(-math.log(0.7))


def test_all_blank_target():
    lp = np.log(np.full((3, 3), 1 / 3))
    assert ctc_loss(lp, []) == pytest.approx(-3 * math.log(1 / 3))


def test_repeats_need_a_separating_blank():
    assert min_frames([1, 1]) == 3
    lp = np.log(np.full((2, 3), 1 / 3))
    with pytest.warns(InfeasibleAlignmentWarning):
        assert math.isinf(ctc_loss(lp, [1, 1]))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    lp = random_log_probs(rng, 6, 4)
    target = [0, 2, 2]
    g = ctc_grad(lp, target)
    h = 1e-6
    num = np.zeros_like(lp)
    for idx in np.ndindex(lp.shape):
        up, down = lp.copy(), lp.copy()
        up[idx] += h
        down[idx] -= h
        num[idx] = (ctc_loss(up, target) - ctc_loss(down, target)) / (2 * h)
    np.testing.assert_allclose(g, num, atol=1e-7)


def test_batched_with_lengths_matches_individual():
    rng = np.random.default_rng(5)
    t_max, c = 7, 5
    lens = [7, 4, 5]
    targets = [[0, 1, 3], [2], [1, 1]]
    lp = np.stack([random_log_probs(rng, t_max, c) for _ in lens], axis=1)
    losses, grads = ctc_batch(lp, targets, lens)
    for i, (length, tgt) in enumerate(zip(lens, targets)):
        assert losses[i] == pytest.approx(ctc_loss(lp[:length, i], tgt), rel=1e-12)
        np.testing.assert_allclose(grads[:length, i], ctc_grad(lp[:length, i], tgt), atol=1e-12)
        assert np.all(grads[length:, i] == 0)


def test_loss_tensor_backprop_through_log_softmax():
    rng = np.random.default_rng(7)
    with precision("float64"):
        logits = Tensor(rng.normal(size=(5, 2, 4)), requires_grad=True)
        targets = [[0, 1], [2]]
        err = grad_check(lambda z: ctc_loss_tensor(ops.log_softmax(z), targets, [5, 3]), [logits])
    assert err < 1e-7


def test_loss_tensor_names_infeasible_positions():
    lp = Tensor(np.log(np.full((2, 3, 3), 1 / 3)))
    with pytest.raises(NumericError, match=r"\[1\]"):
        ctc_loss_tensor(lp, [[0], [0, 1, 0], []])


def test_bad_target_index():
    with pytest.raises(ContractError):
        ctc_loss(np.log(np.full((3, 3), 1 / 3)), [2])


def test_greedy_collapses_repeats_and_blanks():
    classes = [0, 0, 2, 0, 1, 1, 2, 2]
    lp = np.log(np.full((len(classes), 3), 0.01))
    lp[np.arange(len(classes)), classes] = np.log(0.98)
    assert greedy_decode(lp) == [0, 0, 1]


def brute_best(lp):
    table = labeling_probs(lp)
    best = max(table.values())
    return sorted(k for k, v in table.items() if v == best)[0], math.log(best)


def test_beam_exhaustive_matches_enumeration():
    rng = np.random.default_rng(9)
    for _ in range(200):
        t, c = int(rng.integers(1, 4)), int(rng.integers(2, 4))
        lp = random_log_probs(rng, t, c)
        labels, score = prefix_beam_search(lp, beam_width=64)
        want, want_score = brute_best(lp)
        assert tuple(labels) == want
        assert score == pytest.approx(want_score, rel=1e-12)


def test_beam_rejects_zero_width():
    with pytest.raises(ContractError):
        beam_decode(np.zeros((2, 3)), 0)


@settings(max_examples=60, deadline=None, derandomize=True)
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(2, 4))
def test_exhaustive_beam_dominates_narrow_beams(seed, t, c):
    lp = random_log_probs(np.random.default_rng(seed), t, c)
    # c ** t bounds the number of distinct prefixes, so this beam never prunes
    best = prefix_beam_search(lp, c**t)[1]
    for width in (1, 2, 4):
        assert best >= prefix_beam_search(lp, width)[1] - 1e-12

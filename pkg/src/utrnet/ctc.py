"""Connectionist temporal classification: loss, gradient and decoding.

Log-probability matrices are ``(T, K + 1)`` with the blank at index ``K``
(the last class).  All lattice arithmetic stays in the log domain.

Gradients are taken with respect to the log-probabilities themselves, with no
row-normalisation constraint: for a single-path lattice the gradient is -1 at
each emitted class and 0 elsewhere.  Chaining through ``log_softmax`` turns
this into the usual softmax-minus-posterior gradient on the logits.
"""

from __future__ import annotations

import warnings
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ContractError, NumericError
from .tensor import Tensor
from .tensor.core import make_result

NEG_INF = -np.inf


class InfeasibleAlignmentWarning(RuntimeWarning):
    """No frame-level path can produce the target in the given number of steps."""


def min_frames(target: Sequence[int]) -> int:
    """Fewest time steps that can emit ``target`` (repeats need a blank between)."""
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def _check_target(target: Sequence[int], num_classes: int) -> None:
    blank = num_classes - 1
    for c in target:
        if not 0 <= c < blank:
            raise ContractError(f"target index {c} outside 0..{blank - 1} (blank is {blank})")


def ctc_batch(
    log_probs: np.ndarray,
    targets: Sequence[Sequence[int]],
    input_lengths: Optional[Sequence[int]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-sample negative log-likelihoods and their gradients.

    ``log_probs`` is ``(T, N, C)``.  Returns ``(losses[N], grads[T, N, C])``;
    infeasible samples get ``+inf`` loss and zero gradient.
    """
    log_probs = np.asarray(log_probs)
    t_max, n, c = log_probs.shape
    blank = c - 1
    if len(targets) != n:
        raise ContractError(f"{len(targets)} targets for a batch of {n}")
    lengths = np.full(n, t_max) if input_lengths is None else np.asarray(input_lengths, dtype=int)
    if lengths.shape != (n,) or (lengths < 1).any() or (lengths > t_max).any():
        raise ContractError(f"input lengths {lengths.tolist()} must lie in 1..{t_max}")
    for tgt in targets:
        _check_target(tgt, c)

    label_lens = np.array([len(tgt) for tgt in targets])
    s_max = 2 * int(label_lens.max(initial=0)) + 1
    ext = np.full((n, s_max), blank, dtype=int)
    for i, tgt in enumerate(targets):
        ext[i, 1 : 2 * len(tgt) : 2] = tgt
    s_len = 2 * label_lens + 1
    s_idx = np.arange(s_max)
    valid = s_idx[None, :] < s_len[:, None]
    skip = np.zeros((n, s_max), dtype=bool)
    skip[:, 2:] = (s_idx[2:] % 2 == 1)[None, :] & (ext[:, 2:] != ext[:, :-2])
    skip &= valid

    rows = np.arange(n)[:, None]
    emit = log_probs[:, rows, ext].astype(np.float64)  # (T, N, S)
    emit = np.where(valid[None], emit, NEG_INF)

    alpha = np.full((t_max, n, s_max), NEG_INF)
    alpha[0, :, 0] = emit[0, :, 0]
    has_label = label_lens > 0
    if s_max > 1:
        alpha[0, has_label, 1] = emit[0, has_label, 1]
    for t in range(1, t_max):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[:, 1:] = np.logaddexp(acc[:, 1:], prev[:, :-1])
        acc[:, 2:] = np.where(skip[:, 2:], np.logaddexp(acc[:, 2:], prev[:, :-2]), acc[:, 2:])
        alpha[t] = acc + emit[t]

    beta = np.full((t_max, n, s_max), NEG_INF)
    last = lengths - 1
    for t in reversed(range(t_max)):
        if t + 1 < t_max:
            nxt = beta[t + 1]
            acc = nxt.copy()
            acc[:, :-1] = np.logaddexp(acc[:, :-1], nxt[:, 1:])
            acc[:, :-2] = np.where(skip[:, 2:], np.logaddexp(acc[:, :-2], nxt[:, 2:]), acc[:, :-2])
            beta[t] = acc + emit[t]
        ends = np.nonzero(last == t)[0]
        for i in ends:
            beta[t, i, :] = NEG_INF
            beta[t, i, s_len[i] - 1] = emit[t, i, s_len[i] - 1]
            if label_lens[i] > 0:
                beta[t, i, s_len[i] - 2] = emit[t, i, s_len[i] - 2]
        beyond = last < t
        beta[t, beyond, :] = NEG_INF

    final = alpha[last, np.arange(n)]  # (N, S)
    log_like = final[np.arange(n), s_len - 1]
    two = s_len >= 2
    log_like[two] = np.logaddexp(log_like[two], final[two, s_len[two] - 2])
    losses = -log_like

    grads = np.zeros((t_max, n, c), dtype=np.float64)
    feasible = np.isfinite(log_like)
    if feasible.any():
        with np.errstate(invalid="ignore"):
            occ = np.exp(alpha + beta - emit - log_like[None, :, None])
        occ = np.where(np.isfinite(occ), occ, 0.0)
        occ[:, ~feasible] = 0.0
        steps = np.arange(t_max)[:, None]
        occ[steps >= lengths[None, :]] = 0.0
        onehot = np.zeros((n, s_max, c))
        onehot[rows, s_idx[None, :], ext] = valid
        grads = -np.einsum("tns,nsc->tnc", occ, onehot)
    return losses, grads.astype(log_probs.dtype)


def ctc_loss(log_probs: np.ndarray, target: Sequence[int]) -> float:
    """Negative log-likelihood of ``target`` under a ``(T, K + 1)`` matrix.

    Returns ``inf`` (with an :class:`InfeasibleAlignmentWarning`) when the
    target cannot be aligned in ``T`` steps.
    """
    log_probs = np.asarray(log_probs)
    if log_probs.ndim != 2:
        raise ContractError(f"expected (T, K+1) log-probabilities, got {log_probs.shape}")
    if min_frames(target) > log_probs.shape[0]:
        warnings.warn(
            f"no feasible alignment: target needs {min_frames(target)} steps, have {log_probs.shape[0]}",
            InfeasibleAlignmentWarning,
        )
        return float("inf")
    losses, _ = ctc_batch(log_probs[:, None, :], [list(target)])
    return float(losses[0])


def ctc_grad(log_probs: np.ndarray, target: Sequence[int]) -> np.ndarray:
    """Gradient of :func:`ctc_loss` with respect to ``log_probs``."""
    log_probs = np.asarray(log_probs)
    if min_frames(target) > log_probs.shape[0]:
        raise NumericError("no feasible alignment; gradient undefined")
    _, grads = ctc_batch(log_probs[:, None, :], [list(target)])
    return grads[:, 0, :]


def ctc_loss_tensor(
    log_probs: Tensor,
    targets: Sequence[Sequence[int]],
    input_lengths: Optional[Sequence[int]] = None,
) -> Tensor:
    """Mean CTC loss over a ``(T, N, C)`` batch as a differentiable scalar.

    Raises :class:`NumericError` naming the offending batch positions when any
    sample has no feasible alignment.
    """
    losses, grads = ctc_batch(log_probs.data, targets, input_lengths)
    bad = np.nonzero(~np.isfinite(losses))[0]
    if bad.size:
        raise NumericError(f"non-finite CTC loss at batch positions {bad.tolist()}")
    n = len(targets)
    value = np.asarray(losses.mean(), dtype=log_probs.dtype)
    return make_result(value, (log_probs,), lambda g: (grads * (g / n),), "ctc_loss")


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------

def greedy_decode(log_probs: np.ndarray, blank: Optional[int] = None) -> List[int]:
    """Best path: per-step argmax, merge repeats, then drop blanks."""
    log_probs = np.asarray(log_probs)
    blank = log_probs.shape[-1] - 1 if blank is None else blank
    best = log_probs.argmax(axis=-1)
    out: List[int] = []
    prev = None
    for k in best.tolist():
        if k != prev and k != blank:
            out.append(k)
        prev = k
    return out


def beam_decode(log_probs: np.ndarray, beam_width: int = 8) -> List[int]:
    """Prefix beam search over collapsed labelings.

    Each surviving prefix tracks the log-probability of ending in blank and in
    non-blank.  With a beam at least as large as the number of reachable
    prefixes the search is exhaustive.  A width of 1 need not match
    :func:`greedy_decode`.
    """
    return prefix_beam_search(log_probs, beam_width)[0]


def prefix_beam_search(log_probs: np.ndarray, beam_width: int) -> Tuple[List[int], float]:
    if beam_width < 1:
        raise ContractError(f"beam_width must be >= 1, got {beam_width}")
    log_probs = np.asarray(log_probs, dtype=np.float64)
    t_max, c = log_probs.shape
    blank = c - 1
    beams: Dict[tuple, Tuple[float, float]] = {(): (0.0, NEG_INF)}
    for t in range(t_max):
        lp = log_probs[t]
        nxt: Dict[tuple, List[float]] = defaultdict(lambda: [NEG_INF, NEG_INF])
        for prefix, (p_b, p_nb) in beams.items():
            entry = nxt[prefix]
            entry[0] = np.logaddexp(entry[0], np.logaddexp(p_b, p_nb) + lp[blank])
            for k in range(blank):
                p = lp[k]
                ext = prefix + (k,)
                if prefix and prefix[-1] == k:
                    entry[1] = np.logaddexp(entry[1], p_nb + p)
                    nxt[ext][1] = np.logaddexp(nxt[ext][1], p_b + p)
                else:
                    nxt[ext][1] = np.logaddexp(nxt[ext][1], np.logaddexp(p_b, p_nb) + p)
        ranked = sorted(nxt.items(), key=lambda kv: (-np.logaddexp(*kv[1]), kv[0]))
        beams = {k: (v[0], v[1]) for k, v in ranked[:beam_width]}
    best, (p_b, p_nb) = min(beams.items(), key=lambda kv: (-np.logaddexp(*kv[1]), kv[0]))
    return list(best), float(np.logaddexp(p_b, p_nb))

"""AdaDelta and global-norm gradient clipping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from ..tensor import Tensor


@dataclass
class AdaDeltaState:
    square_avg: np.ndarray  # running E[g^2]
    acc_delta: np.ndarray  # running E[dx^2]
    rho: float = 0.95
    eps: float = 1e-6

    @classmethod
    def zeros_like(cls, param: np.ndarray, rho: float = 0.95, eps: float = 1e-6) -> "AdaDeltaState":
        return cls(np.zeros_like(param), np.zeros_like(param), rho, eps)


def adadelta_step(param: np.ndarray, grad: np.ndarray, state: AdaDeltaState, lr: float = 1.0) -> None:
    """One in-place AdaDelta update of ``param``.

    E[g^2] <- rho E[g^2] + (1 - rho) g^2
    dx     <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
    E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
    param  <- param + lr * dx
    """
    rho, eps = state.rho, state.eps
    state.square_avg *= rho
    state.square_avg += (1 - rho) * grad * grad
    delta = -np.sqrt(state.acc_delta + eps) / np.sqrt(state.square_avg + eps) * grad
    state.acc_delta *= rho
    state.acc_delta += (1 - rho) * delta * delta
    param += lr * delta


class AdaDelta:
    def __init__(self, params: Sequence[Tensor], lr: float = 1.0, rho: float = 0.95, eps: float = 1e-6):
        self.params = list(params)
        self.lr = lr
        self.states: List[AdaDeltaState] = [AdaDeltaState.zeros_like(p.data, rho, eps) for p in self.params]

    def step(self) -> None:
        for p, state in zip(self.params, self.states):
            if p.grad is not None:
                adadelta_step(p.data, p.grad, state, self.lr)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def global_norm(params: Sequence[Tensor]) -> float:
    return float(np.sqrt(sum(float(np.sum(p.grad.astype(np.float64) ** 2)) for p in params if p.grad is not None)))


def clip_gradients(params: Sequence[Tensor], magnitude: float = 5.0) -> float:
    """Scale all gradients so their joint L2 norm is at most ``magnitude``.

    Returns the norm before clipping.
    """
    norm = global_norm(params)
    if norm > magnitude:
        factor = magnitude / norm
        for p in params:
            if p.grad is not None:
                p.grad *= p.grad.dtype.type(factor)
    return norm

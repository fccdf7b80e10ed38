"""Module containers and the layers the networks are assembled from."""

from __future__ import annotations

from collections import OrderedDict
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from ..exceptions import CheckpointError
from .initializers import he_init, ones, zeros
from . import ops
from .core import Tensor, get_default_dtype


class Module:
    """Base class: parameters are trainable Tensor attributes, buffers are
    numpy array attributes, and children are Module attributes or lists of
    Modules.  Attribute insertion order fixes the parameter order."""

    training: bool = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def _children(self) -> Iterator[Tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
        for name, child in self._children():
            yield from child.named_parameters(prefix + name + ".")

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, value in vars(self).items():
            if isinstance(value, np.ndarray):
                yield prefix + name, value
        for name, child in self._children():
            yield from child.named_buffers(prefix + name + ".")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self._children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def astype(self, dtype) -> "Module":
        """Convert parameters and buffers in place (precision modes)."""
        dtype = np.dtype(dtype)
        for _, p in self.named_parameters():
            p.data = p.data.astype(dtype)
            p.grad = None
        for module in self.modules():
            for name, value in list(vars(module).items()):
                if isinstance(value, np.ndarray):
                    setattr(module, name, value.astype(dtype))
        return self

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, child in self._children():
            yield from child.modules()

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        state: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for name, p in self.named_parameters():
            state[name] = p.data
        for name, b in self.named_buffers():
            state[name] = b
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        own = self.state_dict()
        missing = set(own) - set(state)
        extra = set(state) - set(own)
        if missing or extra:
            raise CheckpointError(
                f"state mismatch: missing {sorted(missing)[:5]}, unexpected {sorted(extra)[:5]}"
            )
        for name, value in state.items():
            if own[name].shape != value.shape:
                raise CheckpointError(f"shape mismatch for {name}: {own[name].shape} vs {value.shape}")
            own[name][...] = value


class Conv2d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int = 3,
        stride: int = 1,
        padding: Optional[int] = None,
        bias: bool = True,
        rng: Optional[np.random.Generator] = None,
    ):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = he_init((out_channels, in_channels, kernel_size, kernel_size), fan_in, rng)
        self.bias = zeros((out_channels,)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class BatchNorm2d(Module):
    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.momentum = momentum
        self.eps = eps
        self.gamma = ones((channels,))
        self.beta = zeros((channels,))
        self.running_mean = np.zeros(channels, dtype=get_default_dtype())
        self.running_var = np.ones(channels, dtype=get_default_dtype())

    def forward(self, x: Tensor) -> Tensor:
        return ops.batch_norm(
            x,
            self.gamma,
            self.beta,
            self.running_mean,
            self.running_var,
            self.training,
            self.momentum,
            self.eps,
        )


class ConvBNReLU(Module):
    """3x3 convolution, batch norm, relu."""

    def __init__(self, in_channels, out_channels, stride=1, rng=None, kernel_size=3, activate=True):
        self.conv = Conv2d(in_channels, out_channels, kernel_size, stride, bias=False, rng=rng)
        self.norm = BatchNorm2d(out_channels)
        self.activate = activate

    def forward(self, x: Tensor) -> Tensor:
        y = self.norm(self.conv(x))
        return ops.relu(y) if self.activate else y


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weight = he_init((in_features, out_features), in_features, rng)
        self.bias = zeros((out_features,))

    def forward(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class LSTM(Module):
    """Single-direction LSTM over a time-major ``(T, N, D)`` sequence."""

    def __init__(self, input_size: int, hidden_size: int, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.hidden_size = hidden_size
        self.w_input = he_init((input_size, 4 * hidden_size), input_size, rng)
        self.w_hidden = he_init((hidden_size, 4 * hidden_size), hidden_size, rng)
        self.bias = zeros((4 * hidden_size,))

    def forward(self, x: Tensor) -> Tensor:
        return ops.lstm(x, self.w_input, self.w_hidden, self.bias)

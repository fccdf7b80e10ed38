"""Full recognition network: backbone -> sequence head -> per-step log-probabilities."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .backbones import build_backbone
from .data import output_lengths
from .tensor import Tensor
from .tensor.nn import Module
from .seqhead import SequenceHead


@dataclass
class ModelConfig:
    backbone: str = "unet"
    preset: str = "tiny"
    widths: Optional[Tuple[int, ...]] = None
    hidden_size: int = 32
    dropout_passes: int = 5
    drop_fraction: float = 0.5
    height: int = 32
    rtl: bool = True
    seed: int = 0

    def to_dict(self) -> Dict:
        d = asdict(self)
        d["widths"] = list(self.widths) if self.widths is not None else None
        return d

    @classmethod
    def from_dict(cls, d: Dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in d.items() if k in known}
        if kwargs.get("widths") is not None:
            kwargs["widths"] = tuple(kwargs["widths"])
        return cls(**kwargs)


class UTRNet(Module):
    def __init__(self, config: ModelConfig, num_chars: int):
        rng = np.random.default_rng(config.seed)
        self.config = config
        self.num_chars = num_chars
        self.backbone = build_backbone(config.backbone, config.preset, config.widths, rng=rng)
        self.head = SequenceHead(
            self.backbone.out_channels,
            num_chars,
            hidden_size=config.hidden_size,
            dropout_passes=config.dropout_passes,
            drop_fraction=config.drop_fraction,
            rng=rng,
        )

    @property
    def width_multiple(self) -> int:
        return self.backbone.width_multiple

    def sequence_lengths(self, widths: Sequence[int]) -> np.ndarray:
        return output_lengths(widths, self.backbone.width_reduction)

    def forward(
        self,
        images: Tensor,
        widths: Optional[Sequence[int]] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[Tensor, np.ndarray]:
        """``(N, 1, H, W)`` batch -> ``((T, N, K + 1)`` log-probs, per-line lengths)."""
        if widths is None:
            widths = [images.shape[3]] * images.shape[0]
        lengths = self.sequence_lengths(widths)
        features = self.backbone(images)
        return self.head(features, lengths, rng), lengths


def build_model(config: ModelConfig, num_chars: int) -> UTRNet:
    return UTRNet(config, num_chars)

"""Feature extractors selectable by name: ``unet``, ``hrnet``, ``lowres-baseline``."""

from typing import Optional, Sequence

import numpy as np

from ..exceptions import ContractError

from .hrnet import HRNET_PRESETS, HRNetBackbone, ResolutionStream, fuse_streams
from .lowres import LOWRES_PRESETS, LowResBackbone
from .unet import UNET_PRESETS, PyramidState, UNetBackbone

BACKBONES = {
    "unet": (UNetBackbone, UNET_PRESETS),
    "hrnet": (HRNetBackbone, HRNET_PRESETS),
    "lowres-baseline": (LowResBackbone, LOWRES_PRESETS),
}


def build_backbone(
    name: str,
    preset: str = "tiny",
    widths: Optional[Sequence[int]] = None,
    rng: Optional[np.random.Generator] = None,
):
    try:
        cls, presets = BACKBONES[name]
    except KeyError:
        raise ContractError(f"unknown backbone {name!r}; choose from {sorted(BACKBONES)}") from None
    if widths is None:
        try:
            widths = presets[preset]
        except KeyError:
            raise ContractError(f"unknown preset {preset!r}; choose from {sorted(presets)}") from None
    return cls(widths, rng=rng)


__all__ = [
    "BACKBONES",
    "HRNetBackbone",
    "LowResBackbone",
    "PyramidState",
    "ResolutionStream",
    "UNetBackbone",
    "build_backbone",
    "fuse_streams",
]

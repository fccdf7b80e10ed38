"""Image augmentation for line images (values in [0, 1], dark ink on light).

Sub-transforms run in a fixed order: geometric (resize, stretch, rotation,
translation), then noise (gaussian, salt-and-pepper), then border crop, then
contrast stretching.  Each enabled transform draws its parameters from the
supplied generator, so a seed fixes the result.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np
from PIL import Image

from ..exceptions import ContractError

Range = Tuple[float, float]


@dataclass
class AugmentationConfig:
    resize: bool = False
    resize_range: Range = (0.8, 1.2)
    stretch: bool = False
    stretch_range: Range = (0.8, 1.2)
    rotation: bool = False
    rotation_range: Range = (-3.0, 3.0)
    translation: bool = False
    translation_range: Range = (-2.0, 2.0)
    gaussian_noise: bool = False
    noise_sigma_range: Range = (0.0, 0.08)
    salt_pepper: bool = False
    salt_pepper_range: Range = (0.0, 0.02)
    border_crop: bool = False
    border_crop_range: Range = (0.0, 2.0)
    contrast: bool = False

    def __post_init__(self):
        for name, value in asdict(self).items():
            if name.endswith("_range"):
                lo, hi = value
                if lo > hi:
                    raise ContractError(f"{name} must be a closed interval lo <= hi, got {value}")

    @classmethod
    def all_on(cls) -> "AugmentationConfig":
        return cls(resize=True, stretch=True, rotation=True, translation=True,
                   gaussian_noise=True, salt_pepper=True, border_crop=True, contrast=True)

    @property
    def any_enabled(self) -> bool:
        return any(v for v in asdict(self).values() if isinstance(v, bool))


def _pil_resize(img: np.ndarray, height: int, width: int) -> np.ndarray:
    pil = Image.fromarray(img.astype(np.float32), mode="F")
    return np.asarray(pil.resize((max(1, width), max(1, height)), Image.BILINEAR), dtype=np.float64)


def _background(img: np.ndarray) -> float:
    return float(np.median(np.concatenate([img[0], img[-1], img[:, 0], img[:, -1]])))


def rotate(img: np.ndarray, degrees: float, fill: float) -> np.ndarray:
    if degrees == 0:
        return img
    pil = Image.fromarray(img.astype(np.float32), mode="F")
    return np.asarray(pil.rotate(degrees, resample=Image.BILINEAR, expand=True, fillcolor=fill), dtype=np.float64)


def translate(img: np.ndarray, dx: int, dy: int, fill: float) -> np.ndarray:
    out = np.full_like(img, fill)
    h, w = img.shape
    src = img[max(0, -dy) : h - max(0, dy), max(0, -dx) : w - max(0, dx)]
    out[max(0, dy) : max(0, dy) + src.shape[0], max(0, dx) : max(0, dx) + src.shape[1]] = src
    return out


def contrast_stretch(img: np.ndarray) -> np.ndarray:
    lo, hi = float(img.min()), float(img.max())
    if hi <= lo:
        return img
    return (img - lo) / (hi - lo)


def augment(image: np.ndarray, cfg: AugmentationConfig, rng: np.random.Generator) -> np.ndarray:
    """Apply the enabled sub-transforms; accepts ``(H, W)`` or ``(1, H, W)``."""
    arr = np.asarray(image, dtype=np.float64)
    squeeze = arr.ndim == 3
    img = arr[0] if squeeze else arr
    if not cfg.any_enabled:
        return np.asarray(image).copy()
    fill = _background(img)

    if cfg.resize:
        s = rng.uniform(*cfg.resize_range)
        img = _pil_resize(img, int(round(img.shape[0] * s)), int(round(img.shape[1] * s)))
    if cfg.stretch:
        s = rng.uniform(*cfg.stretch_range)
        img = _pil_resize(img, img.shape[0], int(round(img.shape[1] * s)))
    if cfg.rotation:
        img = rotate(img, rng.uniform(*cfg.rotation_range), fill)
    if cfg.translation:
        dx, dy = (int(round(rng.uniform(*cfg.translation_range))) for _ in range(2))
        img = translate(img, dx, dy, fill)

    if cfg.gaussian_noise:
        img = img + rng.normal(0.0, rng.uniform(*cfg.noise_sigma_range), img.shape)
    if cfg.salt_pepper:
        amount = rng.uniform(*cfg.salt_pepper_range)
        hit = rng.random(img.shape)
        img = np.where(hit < amount / 2, 0.0, np.where(hit > 1 - amount / 2, 1.0, img))

    if cfg.border_crop:
        lo, hi = cfg.border_crop_range
        t, b, l, r = (int(rng.integers(int(lo), int(hi) + 1)) for _ in range(4))
        if img.shape[0] - t - b >= 8 and img.shape[1] - l - r >= 8:
            img = img[t : img.shape[0] - b, l : img.shape[1] - r]

    if cfg.contrast:
        img = contrast_stretch(img)

    img = np.clip(img, 0.0, 1.0).astype(np.float32)
    return img[None] if squeeze else img

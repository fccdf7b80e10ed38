"""Compose glyph bitmaps into a text-line image."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from PIL import Image

from ..exceptions import ContractError, DataValidationError
from .atlas import SPACE, GlyphAtlas


@dataclass
class LineSpec:
    text: str
    atlas_id: str = "desk"
    size_scale: float = 1.0
    ink_color: Tuple[int, int, int] = (0, 0, 0)
    background_color: Tuple[int, int, int] = (255, 255, 255)
    overlap: float = 0.0
    height: int = 32
    margin: int = 0

    def __post_init__(self):
        if not self.text:
            raise ContractError("line text must be non-empty")
        if not 0.0 < self.size_scale <= 1.0:
            raise ContractError(f"size_scale must lie in (0, 1], got {self.size_scale}")
        if self.overlap < 0:
            raise ContractError(f"overlap must be >= 0, got {self.overlap}")


def gray(rgb: Tuple[int, int, int]) -> float:
    """Luma of an 8-bit RGB colour, scaled to [0, 1]."""
    r, g, b = rgb
    return (0.299 * r + 0.587 * g + 0.114 * b) / 255.0


def positional_variants(text: str) -> List[str]:
    """Isolated/initial/medial/final per character from its in-word neighbours."""
    out = []
    for k, ch in enumerate(text):
        if ch == SPACE:
            out.append("space")
            continue
        joins_prev = k > 0 and text[k - 1] != SPACE
        joins_next = k + 1 < len(text) and text[k + 1] != SPACE
        out.append(
            {(False, False): "isolated", (False, True): "initial",
             (True, True): "medial", (True, False): "final"}[(joins_prev, joins_next)]
        )
    return out


def layout(text: str, atlas: GlyphAtlas, overlap: float) -> Tuple[List[int], int]:
    """Right-edge offsets (measured from the line's right end) and total width.

    Text runs right to left.  Inside a word each glyph starts
    ``round(overlap * advance)`` pixels before the previous glyph ends, so
    ink from neighbours may intersect; spaces never overlap.
    """
    offsets = []
    cursor = 0
    advances = [atlas.space_advance if ch == SPACE else atlas.glyphs[ch].advance for ch in text]
    for k, ch in enumerate(text):
        offsets.append(cursor)
        cursor += advances[k]
        if k + 1 < len(text) and ch != SPACE and text[k + 1] != SPACE:
            limit = atlas.glyphs[ch].max_overlap
            if overlap > limit + 1e-12:
                raise ContractError(f"overlap {overlap} exceeds the permitted {limit} for {ch!r}")
            cursor -= int(round(overlap * advances[k]))
    return offsets, cursor


def render_ink(text: str, atlas: GlyphAtlas, overlap: float = 0.0) -> np.ndarray:
    missing = sorted({ch for ch in text if ch != SPACE and ch not in atlas.glyphs})
    if missing:
        raise DataValidationError(f"characters missing from atlas {atlas.name!r}: {missing}")
    offsets, width = layout(text, atlas, overlap)
    ink = np.zeros((atlas.em_height, width))
    for ch, variant, off in zip(text, positional_variants(text), offsets):
        if ch == SPACE:
            continue
        bmp = atlas.glyphs[ch].bitmap(variant)
        right = width - off
        region = ink[:, right - bmp.shape[1] : right]
        np.maximum(region, bmp, out=region)
    return ink


def _resize(arr: np.ndarray, height: int, width: int) -> np.ndarray:
    img = Image.fromarray(arr.astype(np.float32), mode="F")
    return np.asarray(img.resize((width, height), Image.BILINEAR), dtype=np.float64)


def render_line(spec: LineSpec, atlas: GlyphAtlas) -> Tuple[np.ndarray, str]:
    """Render ``spec.text``; returns a ``(1, H, W)`` float image in [0, 1] and the text.

    Pixel value is the background grey blended towards the ink grey by the ink
    coverage, so by default ink is dark on a light background.
    """
    ink = render_ink(spec.text, atlas, spec.overlap)
    em = atlas.em_height
    if spec.size_scale != 1.0:
        h = max(1, int(round(em * spec.size_scale)))
        w = max(1, int(round(ink.shape[1] * spec.size_scale)))
        small = np.clip(_resize(ink, h, w), 0.0, 1.0)
        ink = np.zeros((em, w))
        top = (em - h) // 2
        ink[top : top + h] = small
    if spec.margin:
        ink = np.pad(ink, ((0, 0), (spec.margin, spec.margin)))
    if spec.height != em:
        w = max(1, int(round(ink.shape[1] * spec.height / em)))
        ink = np.clip(_resize(ink, spec.height, w), 0.0, 1.0)
    bg, fg = gray(spec.background_color), gray(spec.ink_color)
    image = bg + (fg - bg) * ink
    return image[None].astype(np.float32), spec.text

"""Glyph atlases: pre-shaped bitmaps plus metrics.

The built-in desk atlas is a synthetic alphabet designed around the property
that matters for recognition here: groups of characters that share one base
stroke shape and differ only in the number and placement of small dots.  It
has six such families of three members (no dot, one dot, two dots, all above
or all below the body) and six base shapes that belong to a single character,
plus the word separator.  Every character has isolated, initial, medial and
final forms; joined forms carry baseline connectors so consecutive glyphs in a
word touch.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from PIL import Image, ImageDraw

from ..exceptions import DataValidationError

VARIANTS = ("isolated", "initial", "medial", "final")
SPACE = " "

EM_HEIGHT = 32
GLYPH_WIDTH = 16
SPACE_WIDTH = 8
BASELINE = 20
DOT_SIZE = 3

# Stroke programs on a GLYPH_WIDTH x EM_HEIGHT grid: ("line", points) or ("ellipse", box).
_BASE_SHAPES: Dict[str, List[tuple]] = {
    "bowl": [("line", [(2, 12), (3, 19), (8, 21), (13, 19), (14, 12)])],
    "tooth": [("line", [(2, 13), (2, 20), (14, 20)]), ("line", [(8, 20), (8, 14)]), ("line", [(14, 20), (14, 13)])],
    "loop": [("ellipse", (4, 12, 12, 20))],
    "hook": [("line", [(13, 10), (5, 12), (3, 17), (7, 21), (14, 20)])],
    "wave": [("line", [(2, 18), (5, 13), (8, 18), (11, 13), (14, 18)])],
    "seat": [("line", [(2, 14), (2, 21), (14, 21), (14, 16)])],
    "bar": [("line", [(8, 5), (8, 21)])],
    "zig": [("line", [(2, 9), (13, 13), (2, 17), (13, 21)])],
    "cross": [("line", [(3, 10), (13, 21)]), ("line", [(13, 10), (3, 21)])],
    "hat": [("line", [(2, 21), (8, 9), (14, 21)])],
    "spiral": [("ellipse", (3, 9, 13, 18)), ("line", [(13, 14), (13, 24)])],
    "box": [("line", [(3, 11), (13, 11), (13, 21), (3, 21), (3, 11)])],
}
_FAMILY_SHAPES = ("bowl", "tooth", "loop", "hook", "wave", "seat")
_UNIQUE_SHAPES = ("bar", "zig", "cross", "hat", "spiral", "box")


@dataclass
class GlyphSpec:
    char: str
    base_shape: str
    dot_count: int = 0
    dot_placement: str = "none"
    bitmaps: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    max_overlap: float = 0.4

    @property
    def advance(self) -> int:
        return int(self.bitmaps["isolated"].shape[1])

    def bitmap(self, variant: str) -> np.ndarray:
        return self.bitmaps.get(variant, self.bitmaps["isolated"])


@dataclass
class GlyphAtlas:
    """Character -> glyph mapping sharing one em height."""

    glyphs: Dict[str, GlyphSpec]
    em_height: int = EM_HEIGHT
    baseline: int = BASELINE
    space_advance: int = SPACE_WIDTH
    name: str = "desk"

    def __post_init__(self):
        for spec in self.glyphs.values():
            if "isolated" not in spec.bitmaps:
                raise DataValidationError(f"glyph {spec.char!r} lacks an isolated form")
            for variant, bmp in spec.bitmaps.items():
                if bmp.shape[0] != self.em_height:
                    raise DataValidationError(
                        f"glyph {spec.char!r} ({variant}) has height {bmp.shape[0]}, atlas em is {self.em_height}"
                    )

    @property
    def charset(self) -> List[str]:
        """Characters in atlas order, followed by the separator."""
        return list(self.glyphs) + [SPACE]

    def families(self) -> Dict[str, List[str]]:
        out: Dict[str, List[str]] = {}
        for spec in self.glyphs.values():
            out.setdefault(spec.base_shape, []).append(spec.char)
        return out

    def dot_distinguished(self) -> List[str]:
        """Characters sharing their base shape with another character."""
        return [c for members in self.families().values() if len(members) > 1 for c in members]

    def shape_unique(self) -> List[str]:
        return [c for members in self.families().values() if len(members) == 1 for c in members]

    def save(self, directory) -> None:
        """Write ``atlas.tsv`` plus one PNG per glyph form."""
        directory = Path(directory)
        (directory / "glyphs").mkdir(parents=True, exist_ok=True)
        rows = []
        for k, spec in enumerate(self.glyphs.values()):
            for variant, bmp in spec.bitmaps.items():
                rel = f"glyphs/{k:03d}_{variant}.png"
                Image.fromarray(np.round(255 * (1 - bmp)).astype(np.uint8), "L").save(directory / rel)
                rows.append([spec.char, spec.base_shape, str(spec.dot_count), spec.dot_placement,
                             variant, rel, f"{spec.max_overlap}"])
        with open(directory / "atlas.tsv", "w", encoding="utf-8", newline="") as fh:
            fh.write(f"#em_height={self.em_height}\tbaseline={self.baseline}\tspace={self.space_advance}\n")
            csv.writer(fh, delimiter="\t", lineterminator="\n").writerows(rows)

    @classmethod
    def load(cls, directory) -> "GlyphAtlas":
        """Load an externally prepared atlas written in the :meth:`save` layout.

        Bitmaps are dark-ink-on-light PNGs; ink is ``1 - pixel / 255``.
        """
        directory = Path(directory)
        path = directory / "atlas.tsv"
        if not path.exists():
            raise DataValidationError(f"missing atlas index {path}")
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().lstrip("#").strip().split("\t")
            meta = dict(item.split("=", 1) for item in header)
            glyphs: Dict[str, GlyphSpec] = {}
            for row in csv.reader(fh, delimiter="\t"):
                char, base, dots, place, variant, rel, overlap = row
                img = np.asarray(Image.open(directory / rel).convert("L"), dtype=np.float64)
                spec = glyphs.setdefault(char, GlyphSpec(char, base, int(dots), place, {}, float(overlap)))
                spec.bitmaps[variant] = 1.0 - img / 255.0
        return cls(
            glyphs,
            em_height=int(meta["em_height"]),
            baseline=int(meta["baseline"]),
            space_advance=int(meta["space"]),
            name=directory.name,
        )


def _draw_strokes(draw: ImageDraw.ImageDraw, strokes: List[tuple]) -> None:
    for kind, geom in strokes:
        if kind == "line":
            draw.line(geom, fill=255, width=2)
        else:
            draw.ellipse(geom, outline=255, width=2)


def _dot_boxes(count: int, placement: str) -> List[Tuple[int, int]]:
    if count == 0:
        return []
    top = 2 if placement == "above" else EM_HEIGHT - 2 - DOT_SIZE - 2
    centre = GLYPH_WIDTH // 2
    if count == 1:
        xs = [centre - 1]
    elif count == 2:
        xs = [centre - 5, centre + 3]
    else:
        xs = [centre - 5, centre - 1, centre + 3]
    return [(x, top) for x in xs]


def render_glyph(base_shape: str, dot_count: int, placement: str, variant: str) -> np.ndarray:
    """Binary ink bitmap (EM_HEIGHT x GLYPH_WIDTH) for one glyph form."""
    img = Image.new("L", (GLYPH_WIDTH, EM_HEIGHT), 0)
    draw = ImageDraw.Draw(img)
    _draw_strokes(draw, _BASE_SHAPES[base_shape])
    # in right-to-left text the following letter sits on the left
    if variant in ("initial", "medial"):
        draw.line([(0, BASELINE), (3, BASELINE)], fill=255, width=2)
    if variant in ("final", "medial"):
        draw.line([(GLYPH_WIDTH - 4, BASELINE), (GLYPH_WIDTH - 1, BASELINE)], fill=255, width=2)
    ink = (np.asarray(img) > 127).astype(np.float64)
    for x, y in _dot_boxes(dot_count, placement):
        ink[y : y + DOT_SIZE, x : x + DOT_SIZE] = 1.0
    return ink


def desk_atlas() -> GlyphAtlas:
    """The 24-character dot-family alphabet (``a``..``x``) plus space."""
    letters = iter("abcdefghijklmnopqrstuvwx")
    glyphs: Dict[str, GlyphSpec] = {}
    for k, shape in enumerate(_FAMILY_SHAPES):
        placement = "above" if k % 2 == 0 else "below"
        for dots in (0, 1, 2):
            ch = next(letters)
            place = placement if dots else "none"
            bitmaps = {v: render_glyph(shape, dots, place, v) for v in VARIANTS}
            glyphs[ch] = GlyphSpec(ch, shape, dots, place, bitmaps)
    for shape in _UNIQUE_SHAPES:
        ch = next(letters)
        glyphs[ch] = GlyphSpec(ch, shape, 0, "none", {v: render_glyph(shape, 0, "none", v) for v in VARIANTS})
    return GlyphAtlas(glyphs)

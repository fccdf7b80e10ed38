"""Procedural synthetic text-line generator."""

from .atlas import SPACE, VARIANTS, GlyphAtlas, GlyphSpec, desk_atlas, render_glyph
from .augment import AugmentationConfig, augment, contrast_stretch
from .dataset import SynthConfig, build_vocab, generate_dataset, plan_texts, sample_text
from .render import LineSpec, layout, positional_variants, render_ink, render_line

__all__ = [
    "SPACE",
    "VARIANTS",
    "AugmentationConfig",
    "GlyphAtlas",
    "GlyphSpec",
    "LineSpec",
    "SynthConfig",
    "augment",
    "build_vocab",
    "contrast_stretch",
    "desk_atlas",
    "generate_dataset",
    "layout",
    "plan_texts",
    "positional_variants",
    "render_glyph",
    "render_ink",
    "render_line",
    "sample_text",
]

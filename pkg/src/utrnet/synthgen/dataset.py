"""Text sampling and on-disk dataset generation.

Layout written (and read back by :func:`utrnet.data.load_dataset`)::

    images/000000.png   8-bit grayscale PNG per line
    labels.tsv          "<relative image path>\\t<transcript>" per line, UTF-8
    charset.txt         one character per line; line order = class index
    meta.toml           flat ``key = value`` echo of the generation config
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from PIL import Image

from ..exceptions import ContractError
from .atlas import SPACE, GlyphAtlas, desk_atlas
from .augment import AugmentationConfig, augment
from .render import LineSpec, render_line


@dataclass
class SynthConfig:
    vocab_size: int = 200
    min_word_len: int = 2
    max_word_len: int = 4
    min_words: int = 1
    max_words: int = 3
    overlap_range: tuple = (0.0, 0.25)
    size_scale_range: tuple = (1.0, 1.0)
    ink_gray_range: tuple = (0, 40)
    background_gray_range: tuple = (215, 255)
    height: int = 32
    margin: int = 4
    vocab_seed: int = 1234
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)

    def flat(self) -> Dict[str, object]:
        out: Dict[str, object] = {}
        for key, value in asdict(self).items():
            if isinstance(value, dict):
                for k2, v2 in value.items():
                    out[f"augmentation.{k2}"] = v2
            else:
                out[key] = value
        return out


def build_vocab(
    charset: Sequence[str], size: int, min_len: int, max_len: int, rng: np.random.Generator
) -> List[str]:
    """Random words over ``charset``; the first words guarantee every character occurs."""
    chars = [c for c in charset if c != SPACE]
    if not chars:
        raise ContractError("cannot build a vocabulary from an empty charset")
    words: List[str] = []
    for c in chars:
        length = int(rng.integers(min_len, max_len + 1))
        word = list(rng.choice(chars, size=length))
        word[int(rng.integers(length))] = c
        words.append("".join(word))
    while len(words) < size:
        length = int(rng.integers(min_len, max_len + 1))
        words.append("".join(rng.choice(chars, size=length)))
    return words[: max(size, len(chars))]


def sample_text(
    vocab: Sequence[str],
    min_words: int,
    max_words: int,
    rng: np.random.Generator,
    weights: Optional[Sequence[float]] = None,
) -> str:
    """Draw ``min_words..max_words`` words (uniform unless ``weights`` given), space-joined."""
    if not vocab:
        raise ContractError("vocabulary is empty")
    if min_words < 1 or max_words < min_words:
        raise ContractError(f"bad word count range {min_words}..{max_words}")
    p = None
    if weights is not None:
        p = np.asarray(weights, dtype=np.float64)
        p = p / p.sum()
    count = int(rng.integers(min_words, max_words + 1))
    picks = rng.choice(len(vocab), size=count, p=p)
    return SPACE.join(vocab[i] for i in picks)


def sample_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator per (seed, sample, stream); order of generation is irrelevant."""
    return np.random.default_rng(np.random.SeedSequence([seed, index, stream]))


def plan_texts(n: int, cfg: SynthConfig, atlas: GlyphAtlas, seed: int) -> List[str]:
    """Sample ``n`` line texts, then append words so every character occurs."""
    vocab = build_vocab(
        atlas.charset, cfg.vocab_size, cfg.min_word_len, cfg.max_word_len,
        np.random.default_rng(cfg.vocab_seed),
    )
    texts = [sample_text(vocab, cfg.min_words, cfg.max_words, sample_rng(seed, i)) for i in range(n)]
    seen = set("".join(texts))
    missing = [c for c in atlas.charset if c != SPACE and c not in seen]
    for k, c in enumerate(missing):
        if c in seen:
            continue
        word = next(w for w in vocab if c in w)
        j = k % n
        texts[j] = texts[j] + SPACE + word
        seen.update(word)
    return texts


def make_sample(text: str, cfg: SynthConfig, atlas: GlyphAtlas, rng: np.random.Generator) -> np.ndarray:
    ink = int(rng.integers(cfg.ink_gray_range[0], cfg.ink_gray_range[1] + 1))
    bg = int(rng.integers(cfg.background_gray_range[0], cfg.background_gray_range[1] + 1))
    spec = LineSpec(
        text=text,
        atlas_id=atlas.name,
        size_scale=float(rng.uniform(*cfg.size_scale_range)),
        ink_color=(ink, ink, ink),
        background_color=(bg, bg, bg),
        overlap=float(rng.uniform(*cfg.overlap_range)),
        height=cfg.height,
        margin=cfg.margin,
    )
    image, _ = render_line(spec, atlas)
    if cfg.augmentation.any_enabled:
        image = augment(image, cfg.augmentation, rng)
    return image[0]


def generate_dataset(
    out_dir,
    n: int = 512,
    config: Optional[SynthConfig] = None,
    seed: int = 0,
    atlas: Optional[GlyphAtlas] = None,
) -> Path:
    """Write ``n`` rendered lines in the dataset layout; returns the directory."""
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")
    cfg = config or SynthConfig()
    atlas = atlas or desk_atlas()
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    texts = plan_texts(n, cfg, atlas, seed)
    rows = []
    for i, text in enumerate(texts):
        image = make_sample(text, cfg, atlas, sample_rng(seed, i, 1))
        rel = f"images/{i:06d}.png"
        pixels = np.round(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)
        Image.fromarray(pixels, mode="L").save(out / rel, format="PNG")
        rows.append(f"{rel}\t{text}\n")
    with open(out / "labels.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(rows)
    with open(out / "charset.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{c}\n" for c in atlas.charset)
    meta = {"n": n, "seed": seed, "atlas": atlas.name, **cfg.flat()}
    with open(out / "meta.toml", "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{k} = {_toml_value(v)}\n" for k, v in meta.items())
    return out


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return '"' + str(v).replace('"', '\\"') + '"'

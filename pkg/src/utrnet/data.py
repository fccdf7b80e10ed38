"""Dataset ingestion, charsets and batch preparation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from PIL import Image

from .exceptions import DataValidationError


class CharSet:
    """Ordered unique characters; class ``i`` is ``chars[i]`` and the CTC blank is ``len(chars)``."""

    def __init__(self, chars: Sequence[str]):
        chars = list(chars)
        seen = set()
        for c in chars:
            if len(c) != 1:
                raise DataValidationError(f"charset entries must be single characters, got {c!r}")
            if c in seen:
                raise DataValidationError(f"duplicate charset entry {c!r}")
            seen.add(c)
        self.chars = chars
        self._index = {c: i for i, c in enumerate(chars)}

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "CharSet":
        return cls(sorted(set("".join(texts))))

    @classmethod
    def load(cls, path) -> "CharSet":
        text = Path(path).read_text(encoding="utf-8")
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines)

    def save(self, path) -> None:
        Path(path).write_text("".join(f"{c}\n" for c in self.chars), encoding="utf-8")

    @property
    def blank(self) -> int:
        return len(self.chars)

    @property
    def num_classes(self) -> int:
        return len(self.chars) + 1

    def __len__(self) -> int:
        return len(self.chars)

    def __contains__(self, ch) -> bool:
        return ch in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, CharSet) and self.chars == other.chars

    def __repr__(self) -> str:
        return f"CharSet({''.join(self.chars)!r})"

    def encode(self, text: str) -> List[int]:
        try:
            return [self._index[c] for c in text]
        except KeyError as exc:
            raise DataValidationError(f"character {exc.args[0]!r} is not in the charset") from None

    def decode(self, indices: Iterable[int]) -> str:
        return "".join(self.chars[i] for i in indices)


@dataclass
class Sample:
    path: str
    image: np.ndarray  # (H, W) float in [0, 1], dark ink on light background
    transcript: str


def read_image(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.float32) / 255.0


def load_dataset(directory) -> Tuple[List[Sample], CharSet]:
    """Read ``labels.tsv`` + ``charset.txt`` + images, validating every row.

    All violations are collected and reported together with their line numbers.
    """
    root = Path(directory)
    labels, charset_path = root / "labels.tsv", root / "charset.txt"
    for p in (labels, charset_path):
        if not p.exists():
            raise DataValidationError(f"missing {p.name} in {root}")
    charset = CharSet.load(charset_path)
    samples: List[Sample] = []
    problems: List[str] = []
    with open(labels, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                problems.append(f"labels.tsv:{lineno}: expected '<path>\\t<transcript>'")
                continue
            rel, text = parts
            bad = sorted({c for c in text if c not in charset})
            if bad:
                problems.append(f"labels.tsv:{lineno}: characters {bad} not in charset.txt")
                continue
            img_path = root / rel
            if not img_path.exists():
                problems.append(f"labels.tsv:{lineno}: image not found: {rel}")
                continue
            image = read_image(img_path)
            if image.shape[0] < 8 or image.shape[1] < 8:
                problems.append(f"labels.tsv:{lineno}: image {rel} is smaller than 8x8")
                continue
            samples.append(Sample(rel, image, text))
    if problems:
        raise DataValidationError("; ".join(problems))
    if not samples:
        raise DataValidationError(f"no samples in {labels}")
    return samples, charset


def resize_to_height(image: np.ndarray, height: int) -> np.ndarray:
    """Aspect-preserving resize of a ``(H, W)`` image."""
    h, w = image.shape
    if h == height:
        return np.asarray(image, dtype=np.float32)
    width = max(1, int(round(w * height / h)))
    pil = Image.fromarray(np.asarray(image, dtype=np.float32), mode="F")
    return np.asarray(pil.resize((width, height), Image.BILINEAR), dtype=np.float32)


def to_network_input(image: np.ndarray, height: int, rtl: bool) -> np.ndarray:
    """Resize, flip right-to-left lines so reading order runs left to right,
    and invert so background is 0 and ink is positive."""
    x = resize_to_height(image, height)
    if rtl:
        x = x[:, ::-1]
    return np.ascontiguousarray(1.0 - x, dtype=np.float32)


def pad_batch(
    images: Sequence[np.ndarray], width_multiple: int, dtype=np.float32
) -> Tuple[np.ndarray, np.ndarray]:
    """Right-pad prepared images with zeros to a common width (a multiple of
    ``width_multiple``); returns ``(N, 1, H, W)`` and the true widths."""
    widths = np.array([im.shape[1] for im in images])
    height = images[0].shape[0]
    target = int(np.ceil(widths.max() / width_multiple) * width_multiple)
    batch = np.zeros((len(images), 1, height, target), dtype=dtype)
    for i, im in enumerate(images):
        batch[i, 0, :, : im.shape[1]] = im
    return batch, widths


def output_lengths(widths: Sequence[int], reduction: int) -> np.ndarray:
    return np.maximum(1, -(-np.asarray(widths) // reduction))

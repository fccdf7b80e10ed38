"""Input checks shared by the estimator and the command line."""

from __future__ import annotations

from typing import List, Sequence

import numpy as np

from .data import CharSet
from .exceptions import DataValidationError


def check_images(X) -> List[np.ndarray]:
    """Coerce a sequence of grayscale line images to float32 ``(H, W)`` arrays in [0, 1].

    A single 2-D array is not accepted as a batch, since its rows would be
    silently taken as separate one-pixel-high images.
    """
    if isinstance(X, np.ndarray) and X.ndim == 2:
        raise DataValidationError("expected a sequence of 2-D images, got a single 2-D array; wrap it in a list")
    try:
        items = list(X)
    except TypeError:
        raise DataValidationError(f"expected a sequence of images, got {type(X).__name__}") from None
    if not items:
        raise DataValidationError("no images given")
    out = []
    for i, img in enumerate(items):
        arr = np.asarray(img)
        if arr.ndim == 3 and arr.shape[0] == 1:
            arr = arr[0]
        if arr.ndim != 2:
            raise DataValidationError(f"image {i}: expected 2-D grayscale, got shape {arr.shape}")
        if arr.shape[0] < 8 or arr.shape[1] < 8:
            raise DataValidationError(f"image {i}: {arr.shape} is smaller than 8x8")
        if not np.issubdtype(arr.dtype, np.number):
            raise DataValidationError(f"image {i}: non-numeric dtype {arr.dtype}")
        arr = arr.astype(np.float32)
        if np.issubdtype(np.asarray(img).dtype, np.integer):
            arr = arr / 255.0
        if not np.all(np.isfinite(arr)):
            raise DataValidationError(f"image {i}: contains NaN or inf")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise DataValidationError(f"image {i}: float pixel values must lie in [0, 1]")
        out.append(arr)
    return out


def check_transcripts(y, n: int) -> List[str]:
    texts = list(y)
    if len(texts) != n:
        raise DataValidationError(f"got {n} images but {len(texts)} transcripts")
    for i, t in enumerate(texts):
        if not isinstance(t, str):
            raise DataValidationError(f"transcript {i}: expected str, got {type(t).__name__}")
        if not t:
            raise DataValidationError(f"transcript {i}: empty")
    return texts


def check_charset_covers(charset: CharSet, texts: Sequence[str]) -> None:
    missing = sorted({c for t in texts for c in t if c not in charset})
    if missing:
        raise DataValidationError(f"characters {missing} are not in the charset")

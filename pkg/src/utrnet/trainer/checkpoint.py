"""Binary checkpoint format (all integers little-endian).

    magic       8 bytes  b"UTRNCKPT"
    version     u16
    reserved    u16      0
    charset     u32 count, then count x u32 codepoints
    config      u32 byte length, then UTF-8 JSON (sorted keys)
    shape table u32 entries, then per entry:
                u16 name length, UTF-8 name, u8 dtype (1 = f32, 2 = f64),
                u8 ndim, ndim x u32 extents
    payload     raw little-endian arrays in table order
    crc32       u32 over every preceding byte
"""

from __future__ import annotations

import io
import json
import struct
import zlib
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from ..data import CharSet
from ..exceptions import CheckpointError
from ..model import ModelConfig, UTRNet, build_model

MAGIC = b"UTRNCKPT"
FORMAT_VERSION = 1
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 1, np.dtype("float64"): 2}


def save_checkpoint(path, model: UTRNet, charset: CharSet, extra: Optional[Dict] = None) -> None:
    meta = {
        "model": model.config.to_dict(),
        "blank_index": charset.blank,
        "num_classes": charset.num_classes,
        "format_version": FORMAT_VERSION,
    }
    if extra:
        meta["extra"] = extra
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HH", FORMAT_VERSION, 0))
    buf.write(struct.pack("<I", len(charset)))
    buf.write(struct.pack(f"<{len(charset)}I", *(ord(c) for c in charset.chars)))
    blob = json.dumps(meta, sort_keys=True, ensure_ascii=False).encode("utf-8")
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    state = model.state_dict()
    buf.write(struct.pack("<I", len(state)))
    for name, arr in state.items():
        code = _CODES[np.dtype(arr.dtype)]
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<BB", code, arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    for arr in state.values():
        buf.write(np.ascontiguousarray(arr, dtype=_DTYPES[_CODES[np.dtype(arr.dtype)]]).tobytes())
    body = buf.getvalue()
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("checkpoint truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_checkpoint(path) -> Tuple[CharSet, Dict, Dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 8 or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic bytes)")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise CheckpointError(f"{path}: checksum mismatch, file is corrupted or was modified")
    r = _Reader(body)
    r.take(len(MAGIC))
    version, _ = r.unpack("<HH")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version}, this build reads {FORMAT_VERSION}")
    (count,) = r.unpack("<I")
    charset = CharSet([chr(c) for c in r.unpack(f"<{count}I")])
    (size,) = r.unpack("<I")
    meta = json.loads(r.take(size).decode("utf-8"))
    if meta.get("blank_index") != charset.blank:
        raise CheckpointError(f"{path}: blank index {meta.get('blank_index')} inconsistent with charset")
    (entries,) = r.unpack("<I")
    table = []
    for _ in range(entries):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        code, ndim = r.unpack("<BB")
        if code not in _DTYPES:
            raise CheckpointError(f"{path}: unknown dtype code {code} for {name}")
        shape = r.unpack(f"<{ndim}I") if ndim else ()
        table.append((name, _DTYPES[code], shape))
    state: Dict[str, np.ndarray] = {}
    for name, dtype, shape in table:
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
        state[name] = np.frombuffer(r.take(nbytes), dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))
    if r.pos != len(body):
        raise CheckpointError(f"{path}: trailing bytes after payload")
    return charset, meta, state


def load_checkpoint(path, charset: Optional[CharSet] = None) -> Tuple[UTRNet, CharSet, Dict]:
    """Rebuild the model; refuses when ``charset`` is given and differs."""
    stored, meta, state = read_checkpoint(path)
    if charset is not None and charset != stored:
        raise CheckpointError(
            f"{path}: checkpoint charset {''.join(stored.chars)!r} differs from {''.join(charset.chars)!r}"
        )
    model = build_model(ModelConfig.from_dict(meta["model"]), len(stored))
    dtype = next(iter(state.values())).dtype
    model.astype(dtype)
    model.load_state_dict(state)
    model.eval()
    return model, stored, meta

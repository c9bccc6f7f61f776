"""FGRID / PGM raster I/O, CSV histograms and atomic writes."""

from __future__ import annotations

import hashlib
import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .field import ScalarField

FGRID_MAGIC = b"FGRD"
_HEADER = struct.Struct("<4sIId")


class FormatError(ValueError):
    pass


def encode_fgrid(field: ScalarField) -> bytes:
    header = _HEADER.pack(FGRID_MAGIC, field.width, field.height, float(field.spacing))
    return header + np.ascontiguousarray(field.values, dtype="<f4").tobytes()


def decode_fgrid(data: bytes) -> ScalarField:
    if len(data) < _HEADER.size or data[:4] != FGRID_MAGIC:
        raise FormatError("not an FGRID file")
    _, w, h, spacing = _HEADER.unpack_from(data)
    body = data[_HEADER.size:]
    if len(body) != 4 * w * h:
        raise FormatError(f"FGRID body has {len(body)} bytes, expected {4 * w * h}")
    values = np.frombuffer(body, dtype="<f4").reshape(h, w).astype(np.float64)
    return ScalarField(values, spacing)


def encode_pgm(values: np.ndarray) -> bytes:
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    pix = np.rint(v * 255).astype(np.uint8)
    h, w = pix.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes()


def decode_pgm(data: bytes) -> ScalarField:
    if not data.startswith(b"P5"):
        raise FormatError("not a binary (P5) PGM file")
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(int(data[start:pos]))
    w, h, maxval = tokens
    if maxval != 255:
        raise FormatError("only 8-bit PGM is supported")
    pos += 1
    pix = np.frombuffer(data[pos:pos + w * h], dtype=np.uint8)
    if pix.size != w * h:
        raise FormatError("truncated PGM")
    return ScalarField(pix.reshape(h, w).astype(np.float64) / 255.0)


def read_field(path) -> ScalarField:
    """Read FGRID or PGM, detected by magic bytes."""
    data = Path(path).read_bytes()
    if data[:4] == FGRID_MAGIC:
        return decode_fgrid(data)
    if data[:2] == b"P5":
        return decode_pgm(data)
    raise FormatError(f"{path}: unrecognised raster format")


def atomic_write(path, data: bytes | str):
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_field(path, field: ScalarField):
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        atomic_write(path, encode_pgm(field.values))
    else:
        atomic_write(path, encode_fgrid(field))


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def histogram_csv(edges: np.ndarray, counts: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write("bin_low,bin_high,count\n")
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        buf.write(f"{lo:.17g},{hi:.17g},{int(c)}\n")
    return buf.getvalue()


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()

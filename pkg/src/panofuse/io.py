"""Grid file formats.

Raw format: a 16-byte header (magic ``PNF1`` then height, width and
channel count as little-endian u32) followed by the row-major float64
payload, little-endian. The format is lossless and round-trips
bit-identically.

Pixmap format: binary P5/P6 after mapping each channel linearly from its
own [min, max] to [0, 255]; a flat channel maps to 0. One channel writes
P5, three write P6, and any other channel count writes a P5 of the
per-cell channel mean.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grids import validate_grid

RAW_MAGIC = b"PNF1"
_HEADER = struct.Struct("<4sIII")


def grid_to_bytes(grid) -> bytes:
    g = validate_grid(grid)
    h, w, c = g.shape
    header = _HEADER.pack(RAW_MAGIC, h, w, c)
    return header + np.ascontiguousarray(g, dtype="<f8").tobytes()


def grid_from_bytes(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise ValueError("raw grid payload shorter than its header")
    magic, h, w, c = _HEADER.unpack_from(data)
    if magic != RAW_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {RAW_MAGIC!r}")
    expected = _HEADER.size + h * w * c * 8
    if len(data) != expected:
        raise ValueError(f"raw grid payload is {len(data)} bytes, expected {expected}")
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    return flat.reshape(h, w, c).astype(np.float64)


def write_raw_grid(grid, path) -> Path:
    path = Path(path)
    try:
        path.write_bytes(grid_to_bytes(grid))
    except OSError as exc:
        raise OSError(f"failed writing raw grid to {path}: {exc}") from exc
    return path


def read_raw_grid(path) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OSError(f"failed reading raw grid from {path}: {exc}") from exc
    return grid_from_bytes(data)


def _scale_channel(values: np.ndarray) -> np.ndarray:
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.zeros(values.shape, dtype=np.uint8)
    scaled = np.rint((values - lo) / (hi - lo) * 255.0)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def pixmap_bytes(grid) -> tuple[bytes, str]:
    """8-bit pixmap payload and its suffix ('pgm' or 'ppm')."""
    g = validate_grid(grid)
    h, w, c = g.shape
    if c not in (1, 3):
        g = g.mean(axis=2, keepdims=True)
        c = 1
    pixels = np.stack([_scale_channel(g[:, :, i]) for i in range(c)], axis=2)
    if c == 1:
        header = f"P5\n{w} {h}\n255\n".encode("ascii")
        return header + pixels[:, :, 0].tobytes(), "pgm"
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    return header + pixels.tobytes(), "ppm"


def write_pixmap(grid, path_stem) -> Path:
    """Write the pixmap next to ``path_stem`` with the proper suffix."""
    payload, suffix = pixmap_bytes(grid)
    path = Path(str(path_stem) + "." + suffix)
    try:
        path.write_bytes(payload)
    except OSError as exc:
        raise OSError(f"failed writing pixmap to {path}: {exc}") from exc
    return path

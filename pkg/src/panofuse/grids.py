"""Latent grid helpers.

A latent grid is a C-contiguous float64 numpy array of shape
(height, width, channels). Operations across the engine validate
finiteness at their boundaries and never mutate their inputs.
"""

from __future__ import annotations

import numpy as np

_SEED_MASK = 0xFFFFFFFFFFFFFFFF


def validate_grid(values, *, name: str = "grid") -> np.ndarray:
    """Coerce to a float64 (h, w, c) array, rejecting NaN/Inf and empty grids."""
    out = np.ascontiguousarray(values, dtype=np.float64)
    if out.ndim != 3:
        raise ValueError(f"{name} must have shape (height, width, channels), got {out.shape}")
    if out.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.isfinite(out).all():
        raise ValueError(f"{name} contains non-finite values")
    return out


def require_same_shape(a: np.ndarray, b: np.ndarray, *, names=("first", "second")) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {names[0]} {a.shape} vs {names[1]} {b.shape}")


def gaussian_field(seed: int, height: int, width: int, channels: int) -> np.ndarray:
    """Standard-normal field from a counter-based generator.

    Cells are filled in row-major order from a Philox stream keyed by
    ``seed``, so every value is a pure function of (seed, cell index).
    The result does not depend on worker count or draw batching.
    """
    if height < 1 or width < 1 or channels < 1:
        raise ValueError("field dimensions must be positive")
    gen = np.random.Generator(np.random.Philox(key=seed & _SEED_MASK))
    return gen.standard_normal((height, width, channels), dtype=np.float64)

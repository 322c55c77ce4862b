"""Sliding-window crop plans over the panoramic latent.

Tiling is horizontal only: every window spans rows [0, crop_h) and the
windows of one plan are ordered by strictly increasing column offset.
Overlap masks are stride-defined: on a crop of width ``w`` sampled at view
stride ``s_v``, the left mask covers columns [0, w - s_v) and the right
mask covers columns [s_v, w), which makes the right mask of a window and
the left mask of its neighbor one stride over select the same panorama
columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WEIGHTINGS = ("uniform", "gaussian")


@dataclass(frozen=True)
class CropWindow:
    """One crop window: offset, size, overlap masks, and composition weight.

    ``index`` is the 1-based position of the window inside its plan. The
    masks are all-zero on a side with no neighbor (the first window's left,
    the last window's right) and zero everywhere when the stride equals the
    crop width.
    """

    index: int
    x_offset: int
    crop_h: int
    crop_w: int
    left_mask: np.ndarray
    right_mask: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("window index is 1-based")
        if self.x_offset < 0:
            raise ValueError("x_offset must be nonnegative")
        shape = (self.crop_h, self.crop_w)
        for name in ("left_mask", "right_mask", "weight"):
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} shape {arr.shape} does not match crop {shape}")
            arr.setflags(write=False)
        if not (self.weight > 0.0).any():
            raise ValueError("weight must be strictly positive on at least one cell")


@dataclass(frozen=True)
class TilePlan:
    """Ordered crop windows for one sampling mode."""

    mode_k: int
    windows: tuple[CropWindow, ...]
    s_v: int
    s_r: int
    r: int


def _gaussian_weight(crop_h: int, crop_w: int) -> np.ndarray:
    ys = np.arange(crop_h, dtype=np.float64) - (crop_h - 1) / 2.0
    xs = np.arange(crop_w, dtype=np.float64) - (crop_w - 1) / 2.0
    wy = np.exp(-0.5 * (ys / max(crop_h / 4.0, 0.5)) ** 2)
    wx = np.exp(-0.5 * (xs / max(crop_w / 4.0, 0.5)) ** 2)
    return np.outer(wy, wx)


def build_tile_plan(
    pano_w: int,
    pano_h: int,
    crop_w: int,
    crop_h: int,
    s_v: int,
    mode_k: int = 0,
    s_r: int = 1,
    r: int = 1,
    *,
    weighting: str = "uniform",
) -> TilePlan:
    """Window layout for sampling mode ``mode_k`` of ``r`` interleaved modes.

    Base offsets are ``mode_k * s_r + j * s_v`` clipped to
    [0, pano_w - crop_w]. Shifted modes leave a margin at the panorama
    edges, so a window clamped to offset 0 is prepended when mode_k > 0 and
    a window clamped to the right edge is appended when the base offsets
    stop short of it; duplicate offsets collapse. Mode 0 with r = 1 is the
    plain fixed sliding window.
    """
    if crop_w < 1 or crop_h < 1:
        raise ValueError("crop dimensions must be positive")
    if crop_w > pano_w or crop_h > pano_h:
        raise ValueError("crop larger than panorama")
    if not 1 <= s_v <= crop_w:
        raise ValueError("view stride must lie in [1, crop width]")
    if s_r < 1:
        raise ValueError("cross stride must be positive")
    if r < 1:
        raise ValueError("interleave count must be positive")
    if not 0 <= mode_k < r:
        raise ValueError("sampling mode must lie in [0, interleave count)")
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}")

    last = pano_w - crop_w
    offsets = list(range(mode_k * s_r, last + 1, s_v))
    if mode_k > 0:
        offsets.insert(0, 0)
    if not offsets or offsets[-1] != last:
        offsets.append(last)
    offsets = sorted(set(offsets))

    overlap = crop_w - s_v
    weight = np.ones((crop_h, crop_w)) if weighting == "uniform" else _gaussian_weight(crop_h, crop_w)
    windows = []
    for pos, x in enumerate(offsets):
        left = np.zeros((crop_h, crop_w), dtype=np.uint8)
        right = np.zeros((crop_h, crop_w), dtype=np.uint8)
        if pos > 0:
            left[:, :overlap] = 1
        if pos < len(offsets) - 1:
            right[:, s_v:] = 1
        windows.append(
            CropWindow(
                index=pos + 1,
                x_offset=x,
                crop_h=crop_h,
                crop_w=crop_w,
                left_mask=left,
                right_mask=right,
                weight=weight.copy(),
            )
        )
    return TilePlan(mode_k=mode_k, windows=tuple(windows), s_v=s_v, s_r=s_r, r=r)


def crop(z_pano: np.ndarray, win: CropWindow) -> np.ndarray:
    """Copy of the window's sub-grid; the panorama is never touched."""
    z = np.asarray(z_pano, dtype=np.float64)
    if z.ndim != 3:
        raise ValueError("panorama must have shape (height, width, channels)")
    if win.crop_h > z.shape[0] or win.x_offset + win.crop_w > z.shape[1]:
        raise ValueError(
            f"window at offset {win.x_offset} size {win.crop_h}x{win.crop_w} "
            f"does not fit panorama {z.shape[0]}x{z.shape[1]}"
        )
    return z[: win.crop_h, win.x_offset : win.x_offset + win.crop_w, :].copy()


def paste(z_pano: np.ndarray, win: CropWindow, values: np.ndarray) -> np.ndarray:
    """New panorama with the window region replaced by ``values``."""
    z = np.asarray(z_pano, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if v.shape[:2] != (win.crop_h, win.crop_w):
        raise ValueError("values do not match the window size")
    if win.crop_h > z.shape[0] or win.x_offset + win.crop_w > z.shape[1]:
        raise ValueError("window out of bounds")
    out = z.copy()
    out[: win.crop_h, win.x_offset : win.x_offset + win.crop_w, :] = v
    return out


def mode_for_timestep(t: int, r: int) -> int:
    """Sampling mode cycling with period r: ``t mod r``; r = 1 disables interleaving."""
    if r < 1:
        raise ValueError("interleave count must be positive")
    if t < 0:
        raise ValueError("timestep must be nonnegative")
    return t % r

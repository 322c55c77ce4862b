"""Noise schedule and the deterministic per-step denoising update.

All schedule arithmetic runs in 64-bit floats; acceptance tolerances are
tighter than a float32 noise floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import require_same_shape, validate_grid

_PRODUCT_RTOL = 1e-12


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step noise rates and cumulative signal levels.

    ``betas[i]`` is the noise rate of step i + 1 (steps are 1-based).
    ``alpha_bars`` carries one extra leading entry: index 0 holds the clean
    boundary value 1.0, and ``alpha_bars[t]`` for t >= 1 is the running
    product of (1 - beta_i) over i <= t. The sequence is strictly
    decreasing, so the final step always lands on the fully denoised
    sample.
    """

    betas: np.ndarray
    alpha_bars: np.ndarray
    num_steps: int

    def __post_init__(self):
        if self.num_steps < 1:
            raise ValueError("num_steps must be at least 1")
        betas = np.ascontiguousarray(self.betas, dtype=np.float64)
        bars = np.ascontiguousarray(self.alpha_bars, dtype=np.float64)
        if betas.shape != (self.num_steps,):
            raise ValueError(f"betas must have shape ({self.num_steps},), got {betas.shape}")
        if bars.shape != (self.num_steps + 1,):
            raise ValueError(f"alpha_bars must have shape ({self.num_steps + 1},), got {bars.shape}")
        if not ((betas > 0.0) & (betas < 1.0)).all():
            raise ValueError("every beta must lie in the open interval (0, 1)")
        if bars[0] != 1.0:
            raise ValueError("alpha_bars[0] must be exactly 1.0 (clean boundary)")
        if not ((bars > 0.0) & (bars <= 1.0)).all():
            raise ValueError("alpha_bars entries must lie in (0, 1]")
        if not (np.diff(bars) < 0.0).all():
            raise ValueError("alpha_bars must be strictly decreasing")
        if not np.allclose(bars[1:], np.cumprod(1.0 - betas), rtol=_PRODUCT_RTOL, atol=0.0):
            raise ValueError("alpha_bars inconsistent with the running product of (1 - beta)")
        betas.setflags(write=False)
        bars.setflags(write=False)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alpha_bars", bars)


def build_linear_schedule(num_steps: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Schedule with betas linearly interpolated from beta_start to beta_end inclusive.

    Requires 0 < beta_start <= beta_end < 1 and num_steps >= 1.
    """
    if num_steps < 1:
        raise ValueError("num_steps must be at least 1")
    if not (0.0 < beta_start < 1.0 and 0.0 < beta_end < 1.0):
        raise ValueError("beta_start and beta_end must lie in the open interval (0, 1)")
    if beta_start > beta_end:
        raise ValueError("beta_start must not exceed beta_end")
    betas = np.linspace(beta_start, beta_end, num_steps, dtype=np.float64)
    alpha_bars = np.concatenate(([1.0], np.cumprod(1.0 - betas)))
    return NoiseSchedule(betas=betas, alpha_bars=alpha_bars, num_steps=num_steps)


def ddim_step(z_t, eps_hat, t: int, sched) -> np.ndarray:
    """One deterministic denoising step from timestep t to t - 1.

    Returns, elementwise::

        sqrt(abar[t-1] / abar[t]) * z_t
        + (sqrt(1/abar[t-1] - 1) - sqrt(1/abar[t] - 1)) * eps_hat

    The update is affine in (z_t, eps_hat); with equal consecutive
    alpha_bars both coefficients collapse to 1 and 0 and the step is the
    identity.
    """
    z = validate_grid(z_t, name="z_t")
    eps = validate_grid(eps_hat, name="eps_hat")
    require_same_shape(z, eps, names=("z_t", "eps_hat"))
    if not 1 <= t <= sched.num_steps:
        raise ValueError(f"timestep {t} outside [1, {sched.num_steps}]")
    a_prev = float(sched.alpha_bars[t - 1])
    a_t = float(sched.alpha_bars[t])
    scale = math.sqrt(a_prev / a_t)
    drift = math.sqrt(1.0 / a_prev - 1.0) - math.sqrt(1.0 / a_t - 1.0)
    return scale * z + drift * eps

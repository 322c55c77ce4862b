"""Per-crop noise predictors.

The engine separates noise prediction from the denoising update: a
denoiser returns an estimate of the noise present in a crop, and the
schedule module turns that estimate into the next latent. Synthetic
denoisers make full trajectories analytically checkable without any
learned model:

- ``exact_noise``: the unique noise making the crop an exact forward
  diffusion of a procedural target sampled at absolute panorama
  coordinates; full trajectories converge to the target.
- ``crop_anchored``: same formula with the target sampled in crop-local
  coordinates, so overlapping crops disagree. This is the seam generator
  used to exercise fusion.
- ``constant``: an all-constant prediction, for linearity and plumbing
  tests.
- ``external``: forwards the call to a host-installed dispatcher (see
  ``install_external_dispatcher``); calls are serialized.

Every synthetic denoiser is a pure function of its declared inputs. The
``condition`` token carries no semantics here and is threaded through for
external denoisers only.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

from .grids import _SEED_MASK, validate_grid

DENOISER_KINDS = ("exact_noise", "crop_anchored", "constant", "external")

PATTERN_KINDS = ("constant", "horizontal-ramp", "checkerboard", "smooth-noise")


@dataclass(frozen=True)
class DenoiserSpec:
    """Identifies a denoiser implementation and its parameters.

    ``target`` names a procedural pattern plus parameters (required for the
    pattern-anchored kinds). ``simulated_cost`` adds an artificial delay of
    that many seconds per call so timing sweeps can model an expensive
    model without one.
    """

    kind: str
    target: Optional[Mapping] = None
    condition: str = ""
    simulated_cost: float = 0.0

    def __post_init__(self):
        if self.kind not in DENOISER_KINDS:
            raise ValueError(f"unknown denoiser kind {self.kind!r}")
        if self.simulated_cost < 0.0:
            raise ValueError("simulated_cost must be nonnegative")
        if self.kind in ("exact_noise", "crop_anchored"):
            if self.target is None or "pattern" not in self.target:
                raise ValueError(f"{self.kind} requires a target with a 'pattern' key")
        if self.target is not None:
            object.__setattr__(self, "target", dict(self.target))


def _reject_extras(kind: str, params: dict) -> None:
    if params:
        raise ValueError(f"unknown {kind} pattern parameters: {sorted(params)}")


def sample_pattern(target: Mapping, x_offset: int, shape: tuple[int, int, int]) -> np.ndarray:
    """Evaluate a procedural target at absolute panorama coordinates.

    Deterministic in (target parameters, absolute coordinates): the same
    inputs always produce bit-identical output, and overlapping windows
    agree on shared columns.
    """
    h, w, c = shape
    if h < 1 or w < 1 or c < 1:
        raise ValueError("pattern shape must be positive")
    params = dict(target)
    kind = params.pop("pattern", None)
    if kind == "constant":
        value = float(params.pop("value", 0.0))
        _reject_extras(kind, params)
        return np.full(shape, value, dtype=np.float64)
    if kind == "horizontal-ramp":
        slope = float(params.pop("slope", 1.0))
        _reject_extras(kind, params)
        cols = slope * (x_offset + np.arange(w, dtype=np.float64))
        return np.broadcast_to(cols[None, :, None], shape).copy()
    if kind == "checkerboard":
        cell = int(params.pop("cell", 4))
        low = float(params.pop("low", 0.0))
        high = float(params.pop("high", 1.0))
        _reject_extras(kind, params)
        if cell < 1:
            raise ValueError("checkerboard cell size must be positive")
        xs = (x_offset + np.arange(w)) // cell
        ys = np.arange(h) // cell
        parity = (ys[:, None] + xs[None, :]) % 2
        plane = np.where(parity == 1, high, low).astype(np.float64)
        return np.broadcast_to(plane[:, :, None], shape).copy()
    if kind == "smooth-noise":
        seed = int(params.pop("seed", 0))
        components = int(params.pop("components", 8))
        amplitude = float(params.pop("amplitude", 1.0))
        _reject_extras(kind, params)
        if components < 1:
            raise ValueError("smooth-noise needs at least one component")
        gen = np.random.Generator(np.random.Philox(key=seed & _SEED_MASK))
        amps = gen.normal(size=components) * (amplitude / math.sqrt(components))
        fx = gen.uniform(-0.35, 0.35, size=components)
        fy = gen.uniform(-0.35, 0.35, size=components)
        phase = gen.uniform(0.0, 2.0 * math.pi, size=components)
        chroma = gen.uniform(0.0, 2.0 * math.pi, size=components)
        xs = (x_offset + np.arange(w, dtype=np.float64))[None, :, None]
        ys = np.arange(h, dtype=np.float64)[:, None, None]
        chs = np.arange(c, dtype=np.float64)[None, None, :]
        out = np.zeros(shape, dtype=np.float64)
        for j in range(components):
            out += amps[j] * np.cos(fx[j] * xs + fy[j] * ys + chroma[j] * chs + phase[j])
        return out
    raise ValueError(f"unknown pattern {kind!r}")


# Host-installed route for the `external` denoiser kind. A dispatcher is a
# callable (z_t, t, x_offset, condition) -> eps_hat; calls are serialized
# through a single lock so host code never sees concurrent invocations.
_dispatch_lock = threading.Lock()
_external_dispatcher: Optional[Callable] = None


def install_external_dispatcher(fn: Callable) -> None:
    """Route ``external`` denoiser calls through ``fn``. One dispatcher at a time."""
    global _external_dispatcher
    with _dispatch_lock:
        if _external_dispatcher is not None:
            raise RuntimeError("an external dispatcher is already installed")
        _external_dispatcher = fn


def uninstall_external_dispatcher() -> None:
    """Remove the installed dispatcher; safe to call when none is installed."""
    global _external_dispatcher
    with _dispatch_lock:
        _external_dispatcher = None


def has_external_dispatcher() -> bool:
    return _external_dispatcher is not None


def predict_noise(spec: DenoiserSpec, z_t, t: int, x_offset: int, sched) -> np.ndarray:
    """Noise estimate for one crop of the panorama at column ``x_offset``."""
    z = validate_grid(z_t, name="z_t")
    if not 1 <= t <= sched.num_steps:
        raise ValueError(f"timestep {t} outside [1, {sched.num_steps}]")
    if spec.simulated_cost > 0.0:
        time.sleep(spec.simulated_cost)

    if spec.kind == "constant":
        value = 0.0 if spec.target is None else float(spec.target.get("value", 0.0))
        return np.full_like(z, value)

    if spec.kind in ("exact_noise", "crop_anchored"):
        offset = x_offset if spec.kind == "exact_noise" else 0
        target = sample_pattern(spec.target, offset, z.shape)
        a_t = float(sched.alpha_bars[t])
        signal = math.sqrt(a_t) * target
        remainder = 1.0 - a_t
        if remainder <= 0.0:
            # No noise left to attribute; only an exact match has an answer.
            if np.array_equal(z, signal):
                return np.zeros_like(z)
            raise ValueError("alpha_bar is 1 but the crop deviates from the target")
        return (z - signal) / math.sqrt(remainder)

    if spec.kind == "external":
        fn = _external_dispatcher
        if fn is None:
            raise RuntimeError("external denoiser invoked but no dispatcher is installed")
        with _dispatch_lock:
            reply = fn(z, t, x_offset, spec.condition)
        out = np.asarray(reply, dtype=np.float64)
        if out.shape != z.shape:
            raise ValueError(f"external reply shape {out.shape} does not match request {z.shape}")
        return validate_grid(out, name="external reply")

    raise ValueError(f"unknown denoiser kind {spec.kind!r}")

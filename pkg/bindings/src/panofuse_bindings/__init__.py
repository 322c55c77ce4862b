"""Host-side boundary for driving the engine with an external denoiser.

A host registers a callback and every ``external`` denoiser call is routed
to it as an :class:`ExternalCallFrame`. Crop latents cross the boundary as
contiguous row-major float64 buffers with the shape carried explicitly on
the frame; no serialization framework is involved, so a host can hand the
buffers straight to its own ML runtime. The callback either fills
``frame.reply`` in place or returns an array of the request shape.

Callbacks are never invoked concurrently: the engine serializes dispatch
and disables its internal crop parallelism for external runs, and
invocation order within a timestep is ascending crop index. A callback
exception aborts the run as a ``panofuse.DenoiserError`` carrying the crop
index and timestep.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from panofuse import (
    generate_panorama,
    grid_to_bytes,
    install_external_dispatcher,
    uninstall_external_dispatcher,
)
from panofuse.config import ConfigError, config_from_json

__all__ = [
    "DenoiserHandle",
    "ExternalCallFrame",
    "HostRunResult",
    "RegistrationError",
    "ShapeMismatchError",
    "register_external_denoiser",
    "run_config_from_host",
]


class RegistrationError(RuntimeError):
    """A denoiser callback is already registered."""


class ShapeMismatchError(ValueError):
    """Callback reply does not match the request shape."""

    def __init__(self, expected, received):
        self.expected = tuple(expected)
        self.received = tuple(received)
        super().__init__(f"reply shape {self.received} does not match request {self.expected}")


@dataclass(frozen=True)
class ExternalCallFrame:
    """One denoiser call crossing the boundary.

    ``request`` and ``reply`` are flat float64 memoryviews of identical
    length over row-major (height, width, channels) data; ``request`` is
    read-only. ``request_array``/``reply_array`` expose them as numpy
    views without copying.
    """

    shape: tuple[int, int, int]
    timestep: int
    x_offset: int
    condition: str
    request: memoryview
    reply: memoryview

    def request_array(self) -> np.ndarray:
        return np.frombuffer(self.request, dtype=np.float64).reshape(self.shape)

    def reply_array(self) -> np.ndarray:
        return np.frombuffer(self.reply, dtype=np.float64).reshape(self.shape)


class DenoiserHandle:
    """Owns one registration; unregister explicitly or via ``with``."""

    def __init__(self):
        self._active = True

    @property
    def active(self) -> bool:
        return self._active

    def unregister(self) -> None:
        if self._active:
            uninstall_external_dispatcher()
            self._active = False

    def __enter__(self) -> "DenoiserHandle":
        return self

    def __exit__(self, *exc_info) -> None:
        self.unregister()


def _flat_view(arr: np.ndarray) -> memoryview:
    return memoryview(arr).cast("B").cast("d")


def register_external_denoiser(callback: Callable[[ExternalCallFrame], Optional[np.ndarray]]) -> DenoiserHandle:
    """Route ``external`` denoiser calls through ``callback``.

    Only one callback can be registered at a time; registering twice
    raises :class:`RegistrationError`. The returned handle unregisters the
    callback.
    """

    def dispatch(z_t: np.ndarray, t: int, x_offset: int, condition: str) -> np.ndarray:
        request = z_t.copy()
        request.setflags(write=False)
        reply = np.zeros_like(z_t)
        frame = ExternalCallFrame(
            shape=tuple(z_t.shape),
            timestep=t,
            x_offset=x_offset,
            condition=condition,
            request=_flat_view(request),
            reply=_flat_view(reply),
        )
        result = callback(frame)
        if result is None:
            return reply
        out = np.asarray(result, dtype=np.float64)
        if out.shape != z_t.shape:
            raise ShapeMismatchError(z_t.shape, out.shape)
        return out

    try:
        install_external_dispatcher(dispatch)
    except RuntimeError as exc:
        raise RegistrationError(str(exc)) from exc
    return DenoiserHandle()


@dataclass(frozen=True)
class HostRunResult:
    """Raw-format grid bytes plus the CSV reports of one run."""

    raw_grid: bytes
    seam_csv: str
    timing_csv: str


def run_config_from_host(config_doc) -> HostRunResult:
    """Run a panorama generation for the host and hand back the artifacts.

    ``config_doc`` is a JSON document (string, bytes or mapping) whose
    denoiser kind must be ``external``; validation problems surface as
    ``panofuse.ConfigError`` with field-level messages in ``errors``.
    """
    cfg = config_from_json(config_doc)
    if cfg.denoiser.kind != "external":
        raise ConfigError(["denoiser.kind: host-driven runs must use the 'external' denoiser"])
    grid, seam, timing = generate_panorama(cfg)
    return HostRunResult(
        raw_grid=grid_to_bytes(grid),
        seam_csv=seam.to_csv(),
        timing_csv=timing.to_csv(),
    )

"""End-to-end panorama and twin-pair generation.

Each timestep selects the window layout for the current sampling mode,
denoises every crop independently (optionally on a thread pool), runs the
fusion sweep while the fusion window is open, and composes the crops back
into the panorama by weighted mean. Initial noise is drawn once over the
whole panorama from a counter-based generator and cropped per window, so
overlapping crops share their overlap noise and output bits never depend
on the worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .config import RunConfig
from .denoiser import predict_noise
from .fusion import fuse_crop_pair, fuse_weighted_average, twin_fusion_sweep
from .grids import gaussian_field
from .io import write_pixmap, write_raw_grid
from .metrics import RunTiming, SeamReport, seam_report
from .schedule import build_linear_schedule, ddim_step
from .tiler import CropWindow, TilePlan, build_tile_plan, crop, mode_for_timestep

# Called after the fusion sweep of every step with the timestep label of the
# state the swept crops are about to become (T-1 down to 0).
PanoramaTrace = Callable[[int, TilePlan, Sequence[np.ndarray]], None]
TwinTrace = Callable[[int, np.ndarray, np.ndarray, np.ndarray], None]


class DenoiserError(RuntimeError):
    """Denoiser failure annotated with its crop index and timestep."""

    def __init__(self, crop_index: int, timestep: int, message: str):
        super().__init__(f"denoiser failed at crop {crop_index}, timestep {timestep}: {message}")
        self.crop_index = crop_index
        self.timestep = timestep


def _predict(spec, values, t, win: CropWindow, sched) -> np.ndarray:
    try:
        return predict_noise(spec, values, t, win.x_offset, sched)
    except Exception as exc:
        raise DenoiserError(win.index, t, str(exc)) from exc


def _denoise_all(pool, spec, crops, t, windows, sched) -> list[np.ndarray]:
    if pool is None:
        return [_predict(spec, v, t, w, sched) for v, w in zip(crops, windows)]
    futures = [pool.submit(_predict, spec, v, t, w, sched) for v, w in zip(crops, windows)]
    return [f.result() for f in futures]


def generate_panorama(
    cfg: RunConfig,
    trace: Optional[PanoramaTrace] = None,
) -> tuple[np.ndarray, SeamReport, RunTiming]:
    """Run the full denoising loop and return (grid, seam report, timing).

    Output is bit-identical for identical (config, seed) regardless of
    ``parallel_workers``: noise is drawn up front in row-major order, per
    crop work is pure, and composition reduces in fixed window order.
    Under the fixed-reference fusion variant a shadow unfused trajectory is
    advanced alongside to provide the constant reference crops; its
    denoiser calls are counted in the timing.
    """
    cfg = cfg.resolved()
    if cfg.mode != "panorama":
        raise ValueError(f"generate_panorama requires mode 'panorama', got {cfg.mode!r}")
    sched = build_linear_schedule(cfg.schedule.num_steps, cfg.schedule.beta_start, cfg.schedule.beta_end)
    plans = [
        build_tile_plan(
            cfg.pano_width, cfg.pano_height, cfg.crop_width, cfg.crop_height,
            cfg.view_stride, k, cfg.cross_stride, cfg.interleave,
            weighting=cfg.fusion.weighting,
        )
        for k in range(cfg.interleave)
    ]
    shape = (cfg.pano_height, cfg.pano_width, cfg.channels)
    z = gaussian_field(cfg.seed, *shape)
    shadow = cfg.fusion.variant == "twin_fixed_reference"
    z_ref = z.copy() if shadow else None

    workers = cfg.parallel_workers if cfg.denoiser.kind != "external" else 1
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    step_seconds: list[float] = []
    crop_counts: list[int] = []
    try:
        for t in range(sched.num_steps, 0, -1):
            start = time.perf_counter()
            plan = plans[mode_for_timestep(t, cfg.interleave)]
            windows = plan.windows
            crops = [crop(z, w) for w in windows]
            eps = _denoise_all(pool, cfg.denoiser, crops, t, windows, sched)
            denoised = [ddim_step(c, e, t, sched) for c, e in zip(crops, eps)]
            calls = len(windows)

            fixed_refs = None
            if shadow:
                ref_crops = [crop(z_ref, w) for w in windows]
                ref_eps = _denoise_all(pool, cfg.denoiser, ref_crops, t, windows, sched)
                fixed_refs = [ddim_step(c, e, t, sched) for c, e in zip(ref_crops, ref_eps)]
                z_ref = fuse_weighted_average(list(zip(windows, fixed_refs)), shape)
                calls += len(windows)

            swept = twin_fusion_sweep(denoised, plan, cfg.fusion, t, fixed_refs)
            z = fuse_weighted_average(list(zip(windows, swept)), shape)
            if trace is not None:
                trace(t - 1, plan, swept)
            step_seconds.append(time.perf_counter() - start)
            crop_counts.append(calls)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    timing = RunTiming(
        step_seconds=tuple(step_seconds),
        step_crop_counts=tuple(crop_counts),
        denoiser_calls=sum(crop_counts),
        total_seconds=float(sum(step_seconds)),
    )
    return z, seam_report(z, [plans[0]]), timing


def generate_twin_pair(
    cfg: RunConfig,
    trace: Optional[TwinTrace] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generate (first, second raw, second fused) crops with shared overlap noise.

    The two crops start from a common noise field sampled one view stride
    apart, so the right overlap of the first equals the left overlap of the
    second bit-for-bit. The first and the raw second denoise independently;
    the fused second is re-aligned against the first's trajectory after
    every step while the fusion window is open. Under the fixed-reference
    variant the alignment anchor is the raw second trajectory instead of
    the fused crop's own prediction.
    """
    cfg = cfg.resolved()
    if cfg.mode != "twin_pair":
        raise ValueError(f"generate_twin_pair requires mode 'twin_pair', got {cfg.mode!r}")
    if cfg.view_stride >= cfg.crop_width:
        raise ValueError("view stride leaves no shared region between the twin crops")
    sched = build_linear_schedule(cfg.schedule.num_steps, cfg.schedule.beta_start, cfg.schedule.beta_end)
    plan = build_tile_plan(
        cfg.crop_width + cfg.view_stride, cfg.crop_height,
        cfg.crop_width, cfg.crop_height, cfg.view_stride,
        weighting=cfg.fusion.weighting,
    )
    first_win, second_win = plan.windows
    field = gaussian_field(cfg.seed, cfg.crop_height, cfg.crop_width + cfg.view_stride, cfg.channels)
    z1 = crop(field, first_win)
    z_raw = crop(field, second_win)
    z_star = z_raw.copy()

    fusion = cfg.fusion
    for t in range(sched.num_steps, 0, -1):
        z1 = ddim_step(z1, _predict(cfg.denoiser, z1, t, first_win, sched), t, sched)
        z_raw = ddim_step(z_raw, _predict(cfg.denoiser, z_raw, t, second_win, sched), t, sched)
        stepped = ddim_step(z_star, _predict(cfg.denoiser, z_star, t, second_win, sched), t, sched)
        if fusion.variant != "baseline" and t > fusion.tau:
            anchor = z_raw if fusion.variant == "twin_fixed_reference" else stepped
            z_star = fuse_crop_pair(z1, anchor, second_win, fusion.lam)
        else:
            z_star = stepped
        if trace is not None:
            trace(t - 1, z1, z_raw, z_star)
    return z1, z_raw, z_star


def write_outputs(
    grid,
    out_dir,
    stem: str = "panorama",
    *,
    seam: Optional[SeamReport] = None,
    timing: Optional[RunTiming] = None,
) -> list[Path]:
    """Write the raw grid, its pixmap, and any provided CSV reports."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        write_raw_grid(grid, out_dir / f"{stem}.pnf"),
        write_pixmap(grid, out_dir / stem),
    ]
    for name, report in (("seam", seam), ("timing", timing)):
        if report is None:
            continue
        path = out_dir / f"{stem}_{name}.csv"
        try:
            path.write_text(report.to_csv())
        except OSError as exc:
            raise OSError(f"failed writing {name} report to {path}: {exc}") from exc
        paths.append(path)
    return paths

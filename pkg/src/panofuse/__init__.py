"""Deterministic crop-wise latent fusion engine for panoramic diffusion sampling."""

from .config import ConfigError, RunConfig, ScheduleConfig, config_from_json, config_to_json
from .denoiser import (
    DenoiserSpec,
    has_external_dispatcher,
    install_external_dispatcher,
    predict_noise,
    sample_pattern,
    uninstall_external_dispatcher,
)
from .fusion import (
    FusionConfig,
    fuse_crop_pair,
    fuse_weighted_average,
    twin_fusion_sweep,
)
from .grids import gaussian_field, validate_grid
from .io import (
    grid_from_bytes,
    grid_to_bytes,
    pixmap_bytes,
    read_raw_grid,
    write_pixmap,
    write_raw_grid,
)
from .metrics import RunTiming, SeamReport, overlap_residual, seam_report, time_run
from .pipeline import DenoiserError, generate_panorama, generate_twin_pair, write_outputs
from .schedule import NoiseSchedule, build_linear_schedule, ddim_step
from .tiler import CropWindow, TilePlan, build_tile_plan, crop, mode_for_timestep, paste

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CropWindow",
    "DenoiserError",
    "DenoiserSpec",
    "FusionConfig",
    "NoiseSchedule",
    "RunConfig",
    "RunTiming",
    "ScheduleConfig",
    "SeamReport",
    "TilePlan",
    "build_linear_schedule",
    "build_tile_plan",
    "config_from_json",
    "config_to_json",
    "crop",
    "ddim_step",
    "fuse_crop_pair",
    "fuse_weighted_average",
    "gaussian_field",
    "generate_panorama",
    "generate_twin_pair",
    "grid_from_bytes",
    "grid_to_bytes",
    "has_external_dispatcher",
    "install_external_dispatcher",
    "mode_for_timestep",
    "overlap_residual",
    "paste",
    "pixmap_bytes",
    "predict_noise",
    "read_raw_grid",
    "sample_pattern",
    "seam_report",
    "time_run",
    "twin_fusion_sweep",
    "uninstall_external_dispatcher",
    "validate_grid",
    "write_outputs",
    "write_pixmap",
    "write_raw_grid",
]

"""Run configuration and its JSON form.

The JSON document mirrors RunConfig field for field (nested ``schedule``,
``fusion`` and ``denoiser`` objects included); unknown keys are rejected
at every level. The fusion factor is spelled ``lambda`` in JSON and ``lam``
on the dataclass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from .denoiser import DenoiserSpec
from .fusion import FusionConfig

MODES = ("panorama", "twin_pair")


class ConfigError(ValueError):
    """Configuration rejected; ``errors`` lists field-level messages."""

    def __init__(self, errors):
        self.errors = [str(e) for e in errors]
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ScheduleConfig:
    num_steps: int = 50
    beta_start: float = 0.00085
    beta_end: float = 0.012


def _default_denoiser() -> DenoiserSpec:
    return DenoiserSpec(kind="exact_noise", target={"pattern": "smooth-noise", "seed": 7})


@dataclass(frozen=True)
class RunConfig:
    """Everything one generation run needs, with reproducible defaults.

    Dimensions and strides are in latent-grid units. ``interleave`` is the
    number of staggered window layouts cycled across timesteps; 1 disables
    interleaving. An unset fusion ``tau`` resolves to half the step count.
    """

    pano_height: int = 64
    pano_width: int = 256
    channels: int = 4
    crop_height: int = 64
    crop_width: int = 64
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    view_stride: int = 16
    cross_stride: int = 8
    interleave: int = 2
    fusion: FusionConfig = field(default_factory=FusionConfig)
    denoiser: DenoiserSpec = field(default_factory=_default_denoiser)
    seed: int = 0
    mode: str = "panorama"
    parallel_workers: int = 1
    out_dir: Optional[str] = None

    def resolved(self) -> "RunConfig":
        """Validated copy with defaults filled in; raises ConfigError."""
        errors = []
        for name in ("pano_height", "pano_width", "channels", "crop_height", "crop_width"):
            if getattr(self, name) < 1:
                errors.append(f"{name}: must be positive")
        if self.crop_width > self.pano_width:
            errors.append("crop_width: must not exceed pano_width")
        if self.crop_height > self.pano_height:
            errors.append("crop_height: must not exceed pano_height")
        if self.mode == "panorama" and self.crop_height != self.pano_height:
            errors.append("crop_height: tiling is horizontal only; crop height must equal panorama height")
        if not 1 <= self.view_stride <= self.crop_width:
            errors.append("view_stride: must lie in [1, crop_width]")
        if self.cross_stride < 1:
            errors.append("cross_stride: must be positive")
        elif self.cross_stride > self.view_stride:
            errors.append("cross_stride: must not exceed view_stride")
        if self.interleave < 1:
            errors.append("interleave: must be positive")
        sched = self.schedule
        if sched.num_steps < 1:
            errors.append("schedule.num_steps: must be positive")
        if not (0.0 < sched.beta_start < 1.0 and 0.0 < sched.beta_end < 1.0):
            errors.append("schedule.beta_start/beta_end: must lie in (0, 1)")
        elif sched.beta_start > sched.beta_end:
            errors.append("schedule.beta_start: must not exceed beta_end")
        fusion = self.fusion
        if fusion.tau is None:
            fusion = replace(fusion, tau=sched.num_steps // 2)
        if fusion.tau > sched.num_steps:
            errors.append("fusion.tau: must not exceed schedule.num_steps")
        if self.mode not in MODES:
            errors.append(f"mode: must be one of {MODES}")
        if self.parallel_workers < 1:
            errors.append("parallel_workers: must be positive")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            errors.append("seed: must be an integer")
        if errors:
            raise ConfigError(errors)
        return replace(self, fusion=fusion)


def _as_int(value, path: str, errors: list) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        errors.append(f"{path}: expected an integer")
        return 0
    return value


def _as_float(value, path: str, errors: list) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{path}: expected a number")
        return 0.0
    return float(value)


def _as_str(value, path: str, errors: list) -> str:
    if not isinstance(value, str):
        errors.append(f"{path}: expected a string")
        return ""
    return value


def _check_keys(doc: Mapping, allowed, path: str, errors: list) -> None:
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        errors.append(f"{path}: unknown keys {unknown}")


_TOP_KEYS = (
    "pano_height", "pano_width", "channels", "crop_height", "crop_width",
    "schedule", "view_stride", "cross_stride", "interleave", "fusion",
    "denoiser", "seed", "mode", "parallel_workers", "out_dir",
)
_SCHEDULE_KEYS = ("num_steps", "beta_start", "beta_end")
_FUSION_KEYS = ("variant", "lambda", "tau", "weighting", "neighbor_mode")
_DENOISER_KEYS = ("kind", "target", "condition", "simulated_cost")


def config_from_json(doc) -> RunConfig:
    """Parse a JSON document (string, bytes or mapping) into a RunConfig."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"document: invalid JSON ({exc})"]) from exc
    if not isinstance(doc, Mapping):
        raise ConfigError(["document: expected a JSON object"])

    errors: list = []
    _check_keys(doc, _TOP_KEYS, "document", errors)
    base = RunConfig()
    kwargs = {}

    for name in ("pano_height", "pano_width", "channels", "crop_height", "crop_width",
                 "view_stride", "cross_stride", "interleave", "seed", "parallel_workers"):
        if name in doc:
            kwargs[name] = _as_int(doc[name], name, errors)
    if "mode" in doc:
        kwargs["mode"] = _as_str(doc["mode"], "mode", errors)
    if "out_dir" in doc:
        if doc["out_dir"] is not None and not isinstance(doc["out_dir"], str):
            errors.append("out_dir: expected a string or null")
        else:
            kwargs["out_dir"] = doc["out_dir"]

    if "schedule" in doc:
        sub = doc["schedule"]
        if not isinstance(sub, Mapping):
            errors.append("schedule: expected an object")
        else:
            _check_keys(sub, _SCHEDULE_KEYS, "schedule", errors)
            skw = {}
            if "num_steps" in sub:
                skw["num_steps"] = _as_int(sub["num_steps"], "schedule.num_steps", errors)
            for name in ("beta_start", "beta_end"):
                if name in sub:
                    skw[name] = _as_float(sub[name], f"schedule.{name}", errors)
            kwargs["schedule"] = replace(base.schedule, **skw)

    if "fusion" in doc:
        sub = doc["fusion"]
        if not isinstance(sub, Mapping):
            errors.append("fusion: expected an object")
        else:
            _check_keys(sub, _FUSION_KEYS, "fusion", errors)
            fkw = {}
            if "variant" in sub:
                fkw["variant"] = _as_str(sub["variant"], "fusion.variant", errors)
            if "lambda" in sub:
                fkw["lam"] = _as_float(sub["lambda"], "fusion.lambda", errors)
            if "tau" in sub and sub["tau"] is not None:
                fkw["tau"] = _as_int(sub["tau"], "fusion.tau", errors)
            if "weighting" in sub:
                fkw["weighting"] = _as_str(sub["weighting"], "fusion.weighting", errors)
            if "neighbor_mode" in sub:
                fkw["neighbor_mode"] = _as_str(sub["neighbor_mode"], "fusion.neighbor_mode", errors)
            if not errors:
                try:
                    kwargs["fusion"] = replace(base.fusion, **fkw)
                except ValueError as exc:
                    errors.append(f"fusion: {exc}")

    if "denoiser" in doc:
        sub = doc["denoiser"]
        if not isinstance(sub, Mapping):
            errors.append("denoiser: expected an object")
        else:
            _check_keys(sub, _DENOISER_KEYS, "denoiser", errors)
            dkw = {"kind": _as_str(sub.get("kind", ""), "denoiser.kind", errors)}
            if "target" in sub and sub["target"] is not None:
                if not isinstance(sub["target"], Mapping):
                    errors.append("denoiser.target: expected an object")
                else:
                    dkw["target"] = dict(sub["target"])
            if "condition" in sub:
                dkw["condition"] = _as_str(sub["condition"], "denoiser.condition", errors)
            if "simulated_cost" in sub:
                dkw["simulated_cost"] = _as_float(sub["simulated_cost"], "denoiser.simulated_cost", errors)
            if not errors:
                try:
                    kwargs["denoiser"] = DenoiserSpec(**dkw)
                except ValueError as exc:
                    errors.append(f"denoiser: {exc}")

    if errors:
        raise ConfigError(errors)
    return replace(base, **kwargs)


def config_to_json(cfg: RunConfig, *, indent: int = 2) -> str:
    doc = {
        "pano_height": cfg.pano_height,
        "pano_width": cfg.pano_width,
        "channels": cfg.channels,
        "crop_height": cfg.crop_height,
        "crop_width": cfg.crop_width,
        "schedule": {
            "num_steps": cfg.schedule.num_steps,
            "beta_start": cfg.schedule.beta_start,
            "beta_end": cfg.schedule.beta_end,
        },
        "view_stride": cfg.view_stride,
        "cross_stride": cfg.cross_stride,
        "interleave": cfg.interleave,
        "fusion": {
            "variant": cfg.fusion.variant,
            "lambda": cfg.fusion.lam,
            "tau": cfg.fusion.tau,
            "weighting": cfg.fusion.weighting,
            "neighbor_mode": cfg.fusion.neighbor_mode,
        },
        "denoiser": {
            "kind": cfg.denoiser.kind,
            "target": dict(cfg.denoiser.target) if cfg.denoiser.target is not None else None,
            "condition": cfg.denoiser.condition,
            "simulated_cost": cfg.denoiser.simulated_cost,
        },
        "seed": cfg.seed,
        "mode": cfg.mode,
        "parallel_workers": cfg.parallel_workers,
        "out_dir": cfg.out_dir,
    }
    return json.dumps(doc, indent=indent)

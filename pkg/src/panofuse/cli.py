"""Command-line front end: panorama, twin, ablate and bench subcommands."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, config_from_json
from .metrics import overlap_residual, time_run
from .pipeline import generate_panorama, generate_twin_pair, write_outputs
from .io import write_pixmap, write_raw_grid

BENCH_CSV_HEADER = "view_stride,windows,denoiser_calls,median_seconds,seam_ratio"
ABLATE_CSV_HEADER = (
    "param,value,seam_ratio,boundary_discontinuity,background_discontinuity,"
    "overlap_residual_at_tau,denoiser_calls,total_seconds"
)

_ABLATE_PARAMS = ("lambda", "tau", "view-stride", "cross-stride")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out-dir", type=Path)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--lambda", dest="lam", type=float)
    parser.add_argument("--tau", type=int)
    parser.add_argument("--view-stride", type=int)
    parser.add_argument("--cross-stride", type=int)
    parser.add_argument("--interleave", type=int)
    parser.add_argument("--variant", choices=("baseline", "twin", "twin_fixed_reference"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panofuse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("panorama", help="generate one panorama")
    _add_common(p)

    p = sub.add_parser("twin", help="generate a twin crop pair")
    _add_common(p)

    p = sub.add_parser("ablate", help="sweep one parameter and emit a CSV of proxies")
    _add_common(p)
    p.add_argument("--param", choices=_ABLATE_PARAMS, default="lambda")
    p.add_argument("--values", help="comma-separated sweep values (defaults per parameter)")

    p = sub.add_parser("bench", help="view-stride timing sweep")
    _add_common(p)
    p.add_argument("--view-strides", default="4,8,16,24,32,40,48")
    p.add_argument("--repetitions", type=int, default=3)
    return parser


def _load_config(args) -> RunConfig:
    if args.config is not None:
        cfg = config_from_json(Path(args.config).read_text())
    else:
        cfg = RunConfig()
    fusion = cfg.fusion
    if args.lam is not None:
        fusion = replace(fusion, lam=args.lam)
    if args.tau is not None:
        fusion = replace(fusion, tau=args.tau)
    if args.variant is not None:
        fusion = replace(fusion, variant=args.variant)
    cfg = replace(cfg, fusion=fusion)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.workers is not None:
        cfg = replace(cfg, parallel_workers=args.workers)
    if args.view_stride is not None:
        cfg = replace(cfg, view_stride=args.view_stride)
    if args.cross_stride is not None:
        cfg = replace(cfg, cross_stride=args.cross_stride)
    if args.interleave is not None:
        cfg = replace(cfg, interleave=args.interleave)
    if args.out_dir is not None:
        cfg = replace(cfg, out_dir=str(args.out_dir))
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    return Path(cfg.out_dir) if cfg.out_dir else Path("out")


class _ResidualAtTau:
    """Trace recorder capturing the overlap residual of the state labeled tau."""

    def __init__(self, tau: int):
        self.tau = tau
        self.value = float("nan")

    def __call__(self, t, plan, crops):
        if t == self.tau:
            self.value = overlap_residual(crops, plan)


def cmd_panorama(args) -> int:
    cfg = _load_config(args)
    grid, seam, timing = generate_panorama(cfg)
    paths = write_outputs(grid, _out_dir(cfg), "panorama", seam=seam, timing=timing)
    for p in paths:
        print(f"wrote {p}")
    print(
        f"seam_ratio={seam.seam_ratio:.6g} denoiser_calls={timing.denoiser_calls} "
        f"total_seconds={timing.total_seconds:.3f}"
    )
    return 0


def cmd_twin(args) -> int:
    cfg = replace(_load_config(args), mode="twin_pair")
    first, second_raw, second_fused = generate_twin_pair(cfg)
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    for stem, grid in (
        ("twin_first", first),
        ("twin_second_raw", second_raw),
        ("twin_second_fused", second_fused),
    ):
        print(f"wrote {write_raw_grid(grid, out / (stem + '.pnf'))}")
        print(f"wrote {write_pixmap(grid, out / stem)}")
    ow = cfg.crop_width - cfg.view_stride
    gap_raw = float(np.sqrt(np.mean((second_raw[:, :ow] - first[:, cfg.view_stride:]) ** 2)))
    gap_fused = float(np.sqrt(np.mean((second_fused[:, :ow] - first[:, cfg.view_stride:]) ** 2)))
    print(f"overlap_rms_raw={gap_raw:.6g} overlap_rms_fused={gap_fused:.6g}")
    return 0


_DEFAULT_GRIDS = {
    "lambda": lambda cfg: [0.1, 1.0, 10.0, 80.0, 100.0],
    "tau": lambda cfg: sorted({0, cfg.schedule.num_steps // 4, cfg.schedule.num_steps // 2,
                               3 * cfg.schedule.num_steps // 4, cfg.schedule.num_steps}),
    "view-stride": lambda cfg: [v for v in (4, 8, 16, 24, 32, 40, 48) if v <= cfg.crop_width],
    "cross-stride": lambda cfg: sorted({max(1, cfg.view_stride // d) for d in (1, 2, 3, 5, 7, cfg.view_stride)}),
}


def _apply_param(cfg: RunConfig, param: str, value: float) -> RunConfig:
    if param == "lambda":
        return replace(cfg, fusion=replace(cfg.fusion, lam=float(value)))
    if param == "tau":
        return replace(cfg, fusion=replace(cfg.fusion, tau=int(value)))
    if param == "view-stride":
        sv = int(value)
        return replace(cfg, view_stride=sv, cross_stride=min(cfg.cross_stride, sv))
    if param == "cross-stride":
        return replace(cfg, cross_stride=int(value))
    raise ValueError(f"unknown ablation parameter {param!r}")


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    if args.values:
        values = [float(v) for v in args.values.split(",")]
    else:
        values = _DEFAULT_GRIDS[args.param](cfg)
    rows = [ABLATE_CSV_HEADER]
    for value in values:
        run_cfg = _apply_param(cfg, args.param, value).resolved()
        recorder = _ResidualAtTau(run_cfg.fusion.tau)
        _, seam, timing = generate_panorama(run_cfg, trace=recorder)
        row = (
            f"{args.param},{value:g},{seam.seam_ratio:.9g},{seam.boundary_discontinuity:.9g},"
            f"{seam.background_discontinuity:.9g},{recorder.value:.9g},"
            f"{timing.denoiser_calls},{timing.total_seconds:.6f}"
        )
        rows.append(row)
        print(row)
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "ablate.csv"
    path.write_text("\n".join(rows) + "\n")
    print(f"wrote {path}")
    return 0


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    strides = [int(v) for v in args.view_strides.split(",")]
    rows = [BENCH_CSV_HEADER]
    for sv in strides:
        run_cfg = replace(cfg, view_stride=sv, cross_stride=min(cfg.cross_stride, sv)).resolved()
        seams = []

        def run_once():
            _, seam, timing = generate_panorama(run_cfg)
            seams.append(seam)
            return timing

        timing = time_run(run_once, args.repetitions)
        windows = timing.step_crop_counts[0]
        row = (
            f"{sv},{windows},{timing.denoiser_calls},{timing.total_seconds:.6f},"
            f"{seams[-1].seam_ratio:.9g}"
        )
        rows.append(row)
        print(row)
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "bench.csv"
    path.write_text("\n".join(rows) + "\n")
    print(f"wrote {path}")
    return 0


_COMMANDS = {
    "panorama": cmd_panorama,
    "twin": cmd_twin,
    "ablate": cmd_ablate,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        for message in exc.errors:
            print(f"config error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

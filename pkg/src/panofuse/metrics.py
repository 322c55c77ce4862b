"""Seam and timing proxies.

These substitute for learned perceptual metrics at desk scale: the seam
ratio compares column-difference magnitudes at crop boundaries against the
rest of the image, and the overlap residual is the summed squared
disagreement between neighboring crops on their shared columns. Neither is
equivalent to a perceptual score; they are cheap, hermetic proxies for
coherence at crop intersections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grids import validate_grid
from .tiler import TilePlan

SEAM_CSV_HEADER = "boundary_discontinuity,background_discontinuity,seam_ratio,boundary_columns"
TIMING_CSV_HEADER = "timestep,seconds,crops"


@dataclass(frozen=True)
class SeamReport:
    """Boundary vs background discontinuity summary.

    ``boundary_columns`` lists the interior crop edges; column differences
    within one column of an edge count as boundary. A perfectly flat
    panorama (or one with no interior edges) reports a ratio of 1 by
    convention.
    """

    boundary_columns: tuple[int, ...]
    boundary_discontinuity: float
    background_discontinuity: float
    seam_ratio: float

    def to_csv(self) -> str:
        cols = "|".join(str(c) for c in self.boundary_columns)
        return (
            SEAM_CSV_HEADER + "\n"
            f"{self.boundary_discontinuity:.17g},{self.background_discontinuity:.17g},"
            f"{self.seam_ratio:.17g},{cols}\n"
        )


@dataclass(frozen=True)
class RunTiming:
    """Wall clock and denoiser call accounting for one run.

    Entries are in loop order: the first belongs to the highest timestep.
    ``step_crop_counts`` counts denoiser invocations per step, and the
    total call count always equals their sum.
    """

    step_seconds: tuple[float, ...]
    step_crop_counts: tuple[int, ...]
    denoiser_calls: int
    total_seconds: float

    def __post_init__(self):
        if len(self.step_seconds) != len(self.step_crop_counts):
            raise ValueError("per-step lists must have equal length")
        if self.denoiser_calls != sum(self.step_crop_counts):
            raise ValueError("denoiser_calls must equal the sum of per-step crop counts")

    def to_csv(self) -> str:
        steps = len(self.step_seconds)
        lines = [TIMING_CSV_HEADER]
        for i, (secs, crops) in enumerate(zip(self.step_seconds, self.step_crop_counts)):
            lines.append(f"{steps - i},{secs:.9f},{crops}")
        return "\n".join(lines) + "\n"


def seam_report(z_pano, plans: Sequence[TilePlan]) -> SeamReport:
    """Discontinuity at crop boundaries relative to the rest of the panorama.

    Boundary columns come from the crop edges of the mode-0 plan (first
    plan if no mode 0 is present). Differences are mean absolute
    adjacent-column gaps over all rows and channels.
    """
    z = validate_grid(z_pano, name="panorama")
    width = z.shape[1]
    if width < 2:
        raise ValueError("panorama must be at least 2 columns wide")
    plans = list(plans)
    if not plans:
        raise ValueError("at least one tile plan is required")
    plan = next((p for p in plans if p.mode_k == 0), plans[0])

    edges = sorted(
        {w.x_offset for w in plan.windows if w.x_offset > 0}
        | {w.x_offset + w.crop_w for w in plan.windows if w.x_offset + w.crop_w < width}
    )
    diffs = np.abs(np.diff(z, axis=1)).mean(axis=(0, 2))
    if not edges:
        return SeamReport((), 0.0, float(diffs.mean()), 1.0)

    is_boundary = np.zeros(width - 1, dtype=bool)
    for e in edges:
        # The gap of edge e sits between columns e-1 and e; allow +-1 column
        # of averaging blur on either side.
        is_boundary[max(e - 2, 0) : min(e + 1, width - 1)] = True
    boundary = float(diffs[is_boundary].mean()) if is_boundary.any() else 0.0
    background = float(diffs[~is_boundary].mean()) if (~is_boundary).any() else 0.0
    if background > 0.0:
        ratio = boundary / background
    elif boundary == 0.0:
        ratio = 1.0
    else:
        ratio = math.inf
    return SeamReport(tuple(edges), boundary, background, ratio)


def overlap_residual(crops: Sequence[np.ndarray], plan: TilePlan) -> float:
    """Summed squared disagreement between neighbors on their shared columns.

    For each crop after the first, its left-mask columns are compared
    against the neighbor's right-mask columns in mask space (a shift of one
    view stride), matching the alignment the fusion sweep optimizes.
    """
    crops = list(crops)
    if len(crops) != len(plan.windows):
        raise ValueError(f"{len(crops)} crops for {len(plan.windows)} windows")
    total = 0.0
    for i in range(1, len(crops)):
        win = plan.windows[i]
        ow = int(np.count_nonzero(win.left_mask[0]))
        if ow == 0:
            continue
        shift = win.crop_w - ow
        d = np.asarray(crops[i - 1])[:, shift:, :] - np.asarray(crops[i])[:, :ow, :]
        total += float(np.sum(d * d))
    return total


def time_run(run: Callable[[], RunTiming], repetitions: int) -> RunTiming:
    """Median-of-repetitions timing for a pipeline invocation.

    ``run`` executes the pipeline once and returns its RunTiming. Call
    counts must be identical across repetitions (the pipelines here are
    deterministic); wall-clock figures are element-wise medians.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    results = [run() for _ in range(repetitions)]
    counts = results[0].step_crop_counts
    for r in results[1:]:
        if r.step_crop_counts != counts:
            raise ValueError("call counts differ across repetitions")
    step_seconds = tuple(
        float(v) for v in np.median([r.step_seconds for r in results], axis=0)
    )
    total = float(np.median([r.total_seconds for r in results]))
    return RunTiming(step_seconds, counts, results[0].denoiser_calls, total)

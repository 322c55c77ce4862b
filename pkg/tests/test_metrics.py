import numpy as np
import pytest

from panofuse import (
    RunTiming,
    build_tile_plan,
    overlap_residual,
    seam_report,
    time_run,
)


def plan_8_wide():
    # Two windows at offsets 0 and 4; the only interior edge is column 4.
    return build_tile_plan(8, 1, 4, 1, 4)


def test_constant_panorama_ratio_is_one():
    report = seam_report(np.zeros((2, 8, 1)), [plan_8_wide()])
    assert report.background_discontinuity == 0.0
    assert report.seam_ratio == 1.0


def test_linear_ramp_ratio_is_one():
    z = np.arange(8.0)[None, :, None] * 0.3
    report = seam_report(z, [plan_8_wide()])
    assert report.seam_ratio == pytest.approx(1.0, abs=1e-9)


def test_step_at_boundary_hand_computation():
    plan = plan_8_wide()
    slope = 0.01
    z = (slope * np.arange(8.0))[None, :, None].copy()
    z[:, 4:, :] += 1.0  # unit step in the gap between columns 3 and 4

    report = seam_report(z, [plan])
    assert report.boundary_columns == (4,)

    # Direct recomputation: gaps are slope everywhere except 1 + slope at
    # index 3; boundary gap indices for edge 4 are {2, 3, 4}.
    gaps = [abs(z[0, c + 1, 0] - z[0, c, 0]) for c in range(7)]
    boundary_idx = {2, 3, 4}
    boundary = sum(gaps[i] for i in boundary_idx) / 3
    background = sum(gaps[i] for i in range(7) if i not in boundary_idx) / 4
    assert report.boundary_discontinuity == pytest.approx(boundary, rel=1e-12)
    assert report.background_discontinuity == pytest.approx(background, rel=1e-12)
    assert report.seam_ratio == pytest.approx(boundary / background, rel=1e-12)
    assert report.seam_ratio == pytest.approx((1.0 + 3 * slope) / (3 * slope), rel=1e-9)


def test_seam_report_without_interior_edges():
    plan = build_tile_plan(8, 1, 8, 1, 8)
    z = np.arange(8.0)[None, :, None]
    report = seam_report(z, [plan])
    assert report.boundary_columns == ()
    assert report.seam_ratio == 1.0


def test_seam_report_rejects_thin_panorama():
    with pytest.raises(ValueError):
        seam_report(np.zeros((1, 1, 1)), [plan_8_wide()])


def test_overlap_residual_values():
    plan = build_tile_plan(8, 1, 4, 1, 2)
    assert len(plan.windows) == 3
    a, b, c = (np.zeros((1, 4, 1)) for _ in range(3))
    assert overlap_residual([a, b, c], plan) == 0.0
    b2 = b.copy()
    b2[:, :2, :] = 1.0  # differs from a's right overlap on 2 cells
    assert overlap_residual([a, b2, c], plan) == pytest.approx(2.0)


def test_timing_invariant_and_csv():
    timing = RunTiming((0.5, 0.25), (3, 2), 5, 0.75)
    lines = timing.to_csv().strip().splitlines()
    assert lines[0] == "timestep,seconds,crops"
    assert lines[1].startswith("2,0.5") and lines[1].endswith(",3")
    with pytest.raises(ValueError):
        RunTiming((0.5,), (3,), 4, 0.5)


def make_run(totals):
    values = iter(totals)

    def run():
        v = next(values)
        return RunTiming((v,), (2,), 2, v)

    return run


def test_time_run_median_and_single_repetition():
    merged = time_run(make_run([0.4, 0.1, 0.9]), 3)
    assert merged.total_seconds == 0.4
    assert merged.denoiser_calls == 2

    single = time_run(make_run([0.7]), 1)
    assert single.total_seconds == 0.7
    with pytest.raises(ValueError):
        time_run(make_run([0.7]), 0)


def test_time_run_rejects_inconsistent_counts():
    counts = iter([(2,), (3,)])

    def run():
        c = next(counts)
        return RunTiming((0.1,), c, c[0], 0.1)

    with pytest.raises(ValueError):
        time_run(run, 2)

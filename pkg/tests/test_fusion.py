import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from panofuse import (
    DenoiserSpec,
    FusionConfig,
    build_linear_schedule,
    build_tile_plan,
    crop,
    ddim_step,
    fuse_crop_pair,
    fuse_weighted_average,
    overlap_residual,
    predict_noise,
    twin_fusion_sweep,
)


def gradient_descent_minimizer(neighbor_vals, self_vals, lam, iters=90):
    """Iterative minimizer of (n - v)^2 + lam (f - v)^2 per cell.

    Step size 0.25 / (1 + lam) halves the error each iteration, so 90
    iterations reach float precision without touching the closed form.
    """
    v = np.zeros_like(self_vals)
    step = 0.25 / (1.0 + lam)
    for _ in range(iters):
        v = v - step * (2.0 * (v - neighbor_vals) + 2.0 * lam * (v - self_vals))
    return v


def two_windows(crop_w=8, s_v=4, crop_h=8):
    plan = build_tile_plan(crop_w + s_v, crop_h, crop_w, crop_h, s_v)
    assert len(plan.windows) == 2
    return plan


def test_scalar_overlap_blend():
    plan = two_windows(crop_w=2, s_v=1, crop_h=1)
    win = plan.windows[1]
    neighbor = np.array([[[1.0], [2.0]]])
    self_d = np.array([[[4.0], [4.0]]])
    fused = fuse_crop_pair(neighbor, self_d, win, 1.0)
    assert fused[0, 0, 0] == 3.0
    assert fused[0, 1, 0] == 4.0


def test_lambda_limits():
    plan = two_windows()
    win = plan.windows[1]
    rng = np.random.default_rng(1)
    neighbor = rng.normal(size=(8, 8, 2))
    self_d = rng.normal(size=(8, 8, 2))
    ow = 4

    copied = fuse_crop_pair(neighbor, self_d, win, 0.0)
    assert np.array_equal(copied[:, :ow, :], neighbor[:, 4:, :])
    assert np.array_equal(copied[:, ow:, :], self_d[:, ow:, :])

    heavy = fuse_crop_pair(neighbor, self_d, win, 1e6)
    assert np.abs(heavy - self_d).max() < 1e-5


def test_matches_quadratic_oracle_at_spot_lambdas():
    plan = two_windows()
    win = plan.windows[1]
    rng = np.random.default_rng(7)
    for lam in (0.1, 1.0, 80.0):
        neighbor = rng.normal(size=(8, 8, 2))
        self_d = rng.normal(size=(8, 8, 2))
        fused = fuse_crop_pair(neighbor, self_d, win, lam)
        oracle = gradient_descent_minimizer(neighbor[:, 4:, :], self_d[:, :4, :], lam)
        assert np.abs(fused[:, :4, :] - oracle).max() < 1e-8
        assert np.array_equal(fused[:, 4:, :], self_d[:, 4:, :])


@settings(max_examples=60, deadline=None)
@given(lam=st.floats(0.0, 100.0), seed=st.integers(0, 2**31))
def test_oracle_equivalence_property(lam, seed):
    plan = two_windows(crop_w=6, s_v=2, crop_h=3)
    win = plan.windows[1]
    rng = np.random.default_rng(seed)
    neighbor = rng.normal(size=(3, 6, 1))
    self_d = rng.normal(size=(3, 6, 1))
    fused = fuse_crop_pair(neighbor, self_d, win, lam)
    oracle = gradient_descent_minimizer(neighbor[:, 2:, :], self_d[:, :4, :], lam)
    assert np.abs(fused[:, :4, :] - oracle).max() < 1e-10
    # Fusion only writes inside the left overlap.
    assert np.array_equal(fused[:, 4:, :], self_d[:, 4:, :])


@pytest.mark.parametrize("lam", [0.0, 0.5, 1.0, 10.0])
def test_residual_contraction_factor(lam):
    plan = two_windows()
    win = plan.windows[1]
    rng = np.random.default_rng(int(lam * 10) + 3)
    neighbor = rng.normal(size=(8, 8, 2))
    self_d = rng.normal(size=(8, 8, 2))
    pre = overlap_residual([neighbor, self_d], plan)
    fused = fuse_crop_pair(neighbor, self_d, win, lam)
    post = overlap_residual([neighbor, fused], plan)
    factor = (lam / (1.0 + lam)) ** 2
    assert abs(post - factor * pre) <= 1e-8 * max(1.0, pre)


def test_fuse_rejects_bad_inputs():
    plan = two_windows()
    first, second = plan.windows
    grid = np.zeros((8, 8, 1))
    with pytest.raises(ValueError):
        fuse_crop_pair(grid, grid, second, -0.5)
    with pytest.raises(ValueError):
        fuse_crop_pair(grid, grid, first, 1.0)  # leading crop has no left overlap
    with pytest.raises(ValueError):
        fuse_crop_pair(grid, np.zeros((8, 7, 1)), second, 1.0)


def test_weighted_average_identity_paste():
    plan = build_tile_plan(8, 2, 8, 2, 8)
    rng = np.random.default_rng(4)
    grid = rng.normal(size=(2, 8, 3))
    out = fuse_weighted_average([(plan.windows[0], grid)], (2, 8, 3))
    assert np.array_equal(out, grid)


def test_weighted_average_uniform_mean():
    plan = build_tile_plan(6, 1, 4, 1, 2)
    a = np.full((1, 4, 1), 1.0)
    b = np.full((1, 4, 1), 3.0)
    out = fuse_weighted_average(list(zip(plan.windows, [a, b])), (1, 6, 1))
    assert np.array_equal(out[0, :, 0], [1.0, 1.0, 2.0, 2.0, 3.0, 3.0])


def test_weighted_average_gaussian_matches_accumulation_oracle():
    plan = build_tile_plan(8, 1, 4, 1, 2, weighting="gaussian")
    rng = np.random.default_rng(8)
    crops = [rng.normal(size=(1, 4, 1)) for _ in plan.windows]
    out = fuse_weighted_average(list(zip(plan.windows, crops)), (1, 8, 1))

    num = np.zeros((1, 8, 1))
    den = np.zeros((1, 8, 1))
    for win, values in zip(plan.windows, crops):
        for row in range(1):
            for col in range(4):
                for ch in range(1):
                    num[row, win.x_offset + col, ch] += win.weight[row, col] * values[row, col, ch]
                    den[row, win.x_offset + col, ch] += win.weight[row, col]
    assert np.abs(out - num / den).max() < 1e-12


def test_weighted_average_coverage_violation():
    plan = build_tile_plan(8, 1, 4, 1, 2)
    with pytest.raises(ValueError):
        fuse_weighted_average([(plan.windows[0], np.zeros((1, 4, 1)))], (1, 8, 1))


def test_weighted_average_stays_within_bounds():
    plan = build_tile_plan(10, 2, 4, 2, 2, weighting="gaussian")
    rng = np.random.default_rng(12)
    crops = [rng.normal(size=(2, 4, 2)) for _ in plan.windows]
    out = fuse_weighted_average(list(zip(plan.windows, crops)), (2, 10, 2))
    lo = np.full((2, 10, 2), np.inf)
    hi = np.full((2, 10, 2), -np.inf)
    for win, values in zip(plan.windows, crops):
        cols = slice(win.x_offset, win.x_offset + 4)
        lo[:, cols, :] = np.minimum(lo[:, cols, :], values)
        hi[:, cols, :] = np.maximum(hi[:, cols, :], values)
    assert (out >= lo - 1e-12).all() and (out <= hi + 1e-12).all()


def test_sweep_baseline_and_closed_window_are_identity():
    plan = build_tile_plan(16, 2, 8, 2, 4)
    rng = np.random.default_rng(6)
    crops = [rng.normal(size=(2, 8, 1)) for _ in plan.windows]
    base = twin_fusion_sweep(crops, plan, FusionConfig(variant="baseline"), t=40)
    assert all(np.array_equal(a, b) for a, b in zip(base, crops))
    closed = twin_fusion_sweep(crops, plan, FusionConfig(variant="twin", tau=25), t=25)
    assert all(np.array_equal(a, b) for a, b in zip(closed, crops))


def test_sweep_contracts_first_pair_residual():
    # Denoised crops from a crop-anchored ramp disagree on every overlap;
    # after one sweep at lam=1 the first pair's matching term drops by the
    # exact closed-form factor 0.25.
    sched = build_linear_schedule(10, 0.05, 0.3)
    spec = DenoiserSpec(kind="crop_anchored", target={"pattern": "horizontal-ramp", "slope": 0.5})
    plan = build_tile_plan(24, 4, 8, 4, 8 - 3)
    assert len(plan.windows) >= 3
    rng = np.random.default_rng(13)
    pano = rng.normal(size=(4, 24, 1))
    t = 5
    denoised = [
        ddim_step(crop(pano, w), predict_noise(spec, crop(pano, w), t, w.x_offset, sched), t, sched)
        for w in plan.windows
    ]
    cfg = FusionConfig(variant="twin", lam=1.0, tau=2)
    swept = twin_fusion_sweep(denoised, plan, cfg, t)

    pair_plan = build_tile_plan(8 + 5, 4, 8, 4, 5)
    pre = overlap_residual(denoised[:2], pair_plan)
    post = overlap_residual(swept[:2], pair_plan)
    assert pre > 0
    assert abs(post - 0.25 * pre) <= 1e-8 * pre


def test_sweep_fixed_reference_requires_refs():
    plan = build_tile_plan(16, 2, 8, 2, 4)
    crops = [np.zeros((2, 8, 1)) for _ in plan.windows]
    cfg = FusionConfig(variant="twin_fixed_reference", tau=0)
    with pytest.raises(ValueError):
        twin_fusion_sweep(crops, plan, cfg, t=5)
    refs = [np.ones((2, 8, 1)) for _ in plan.windows]
    out = twin_fusion_sweep(crops, plan, cfg, t=5, fixed_refs=refs)
    # Anchored cells follow the reference where no neighbor pulls them.
    assert np.array_equal(out[1][:, 4:, :], refs[1][:, 4:, :])


def test_fusion_config_validation():
    with pytest.raises(ValueError):
        FusionConfig(variant="mosaic")
    with pytest.raises(ValueError):
        FusionConfig(lam=-1.0)
    with pytest.raises(ValueError):
        FusionConfig(weighting="hann")
    with pytest.raises(ValueError):
        FusionConfig(neighbor_mode="center")

import numpy as np
import pytest
from scipy import stats

from aether3d.geometry import Box, VoxelGrid
from aether3d.density import (
    DensityModel,
    SampleSet,
    TruncatedGaussianSpec,
    UniformDensity,
    default_bandwidth_grid,
    fit_kde,
    integrated_squared_error,
    kde_evaluate,
    load_samples_csv,
    loocv_score,
    mise,
    model_from_json,
    model_to_json,
    sample_truncated_gaussian,
    select_bandwidth,
)

TABLE_BOX = Box((0, 0, 0), (3000.0, 3000.0, 3000.0))
TABLE_TRUTH = TruncatedGaussianSpec(mean=(1000, 1000, 1000), std=(600, 600, 600), box=TABLE_BOX)


def test_single_kernel_value_at_its_center():
    box = Box((-50, -50, -50), (50, 50, 50))
    model = fit_kde(SampleSet(np.zeros((1, 3))), (1.0, 1.0, 1.0), box)
    expect = model.normalization * (2 * np.pi) ** -1.5
    assert kde_evaluate(model, (0.0, 0.0, 0.0)) == pytest.approx(expect, rel=1e-12)
    assert model.normalization == pytest.approx(1.0, abs=1e-12)  # kernel fully inside


def test_density_vanishes_far_from_samples():
    box = Box((-1000, -1000, -1000), (1000, 1000, 1000))
    model = fit_kde(SampleSet(np.zeros((1, 3))), (100.0, 100.0, 100.0), box)
    # 10+ standard deviations out
    assert kde_evaluate(model, (900.0, 900.0, 900.0)) < 1e-30


def test_density_integrates_to_one_on_grid():
    samples = sample_truncated_gaussian(TABLE_TRUTH, 30, rng=42)
    model = fit_kde(samples, (7e4, 7e4, 7e4), TABLE_BOX)
    grid = VoxelGrid(box=TABLE_BOX, shape=(48, 48, 48))
    assert grid.integrate(model.grid_pdf(grid)) == pytest.approx(1.0, abs=1e-3)
    assert np.all(model.grid_pdf(grid) >= 0.0)


def test_grid_pdf_matches_pointwise_evaluation():
    samples = sample_truncated_gaussian(TABLE_TRUTH, 12, rng=1)
    model = fit_kde(samples, (5e4, 8e4, 1.2e5), TABLE_BOX)
    grid = VoxelGrid(box=TABLE_BOX, shape=(6, 5, 4))
    assert np.allclose(model.grid_pdf(grid), kde_evaluate(model, grid.centers), rtol=1e-12)


def test_loocv_symmetric_for_coincident_samples():
    pts = np.array([[10.0, 20.0, 30.0], [10.0, 20.0, 30.0]])
    score = loocv_score(SampleSet(pts), (50.0, 50.0, 50.0))
    assert np.isfinite(score)
    # hold-out symmetry: reversing the samples changes nothing
    assert score == loocv_score(SampleSet(pts[::-1].copy()), (50.0, 50.0, 50.0))


def test_loocv_tiny_bandwidth_rejected():
    pts = np.array([[0.0, 0.0, 0.0], [500.0, 0.0, 0.0], [0.0, 700.0, 0.0]])
    assert loocv_score(SampleSet(pts), (1e-6, 1e-6, 1e-6)) == np.inf


def test_loocv_permutation_invariant():
    rng = np.random.default_rng(9)
    pts = rng.uniform(0, 3000, size=(25, 3))
    h = (4e4, 6e4, 9e4)
    base = loocv_score(SampleSet(pts), h)
    for _ in range(5):
        shuffled = rng.permutation(pts)
        assert loocv_score(SampleSet(shuffled), h) == pytest.approx(base, rel=1e-12)


def test_loocv_requires_two_samples():
    with pytest.raises(ValueError):
        loocv_score(SampleSet(np.zeros((1, 3))), (1.0, 1.0, 1.0))


def test_select_bandwidth_single_candidate():
    samples = sample_truncated_gaussian(TABLE_TRUTH, 10, rng=2)
    model = select_bandwidth(samples, [(5e4, 5e4, 5e4)], TABLE_BOX)
    assert np.allclose(model.bandwidths, 5e4)


def test_select_bandwidth_prefers_matched_scale():
    # tight cluster in a huge box: the oversized candidate scores worse
    rng = np.random.default_rng(3)
    pts = 1500.0 + rng.normal(0.0, 30.0, size=(40, 3))
    samples = SampleSet(pts)
    good = np.array([900.0] * 3)       # about the cluster variance
    bad = np.array([90000.0] * 3)
    model = select_bandwidth(samples, [bad, good], TABLE_BOX)
    assert np.allclose(model.bandwidths, good)
    # oracle: direct score comparison
    assert loocv_score(samples, good) < loocv_score(samples, bad)


def test_select_bandwidth_tie_keeps_first():
    samples = sample_truncated_gaussian(TABLE_TRUTH, 10, rng=4)
    h = np.array([6e4, 6e4, 6e4])
    model = select_bandwidth(samples, [h, h.copy()], TABLE_BOX)
    assert model.bandwidths is not None
    with pytest.raises(ValueError):
        select_bandwidth(samples, [], TABLE_BOX)


def test_default_bandwidth_grid_span():
    grid = default_bandwidth_grid()
    assert len(grid) == 15
    assert grid[0][0] == pytest.approx(1e2)
    assert grid[-1][0] == pytest.approx(1e6)


def test_sampler_is_deterministic_and_in_box():
    a = sample_truncated_gaussian(TABLE_TRUTH, 500, rng=123)
    b = sample_truncated_gaussian(TABLE_TRUTH, 500, rng=123)
    assert np.array_equal(a.points, b.points)
    assert np.all(TABLE_BOX.contains(a.points))


def test_sampler_degenerate_std_collapses_to_mean():
    spec = TruncatedGaussianSpec(mean=(1000, 1200, 900), std=(1e-12, 1e-12, 1e-12), box=TABLE_BOX)
    samples = sample_truncated_gaussian(spec, 50, rng=0)
    assert np.allclose(samples.points, [1000, 1200, 900], atol=1e-6)


def test_sampler_moments_match_truncated_normal():
    """Closed-form truncated-normal moments as the oracle (scipy)."""
    samples = sample_truncated_gaussian(TABLE_TRUTH, 100_000, rng=77)
    for axis in range(3):
        a = (0.0 - 1000.0) / 600.0
        b = (3000.0 - 1000.0) / 600.0
        expect = stats.truncnorm.mean(a, b, loc=1000.0, scale=600.0)
        spread = stats.truncnorm.std(a, b, loc=1000.0, scale=600.0)
        se = spread / np.sqrt(len(samples))
        assert abs(samples.points[:, axis].mean() - expect) < 3 * se


def test_truncated_gaussian_pdf_normalizes():
    grid = VoxelGrid(box=TABLE_BOX, shape=(40, 40, 40))
    assert grid.integrate(TABLE_TRUTH.grid_pdf(grid)) == pytest.approx(1.0, abs=1e-3)
    outside = TABLE_TRUTH.pdf(np.array([[-10.0, 0.0, 0.0]]))
    assert outside[0] == 0.0


def test_drifted_mean_shift():
    spec = TruncatedGaussianSpec(mean=(1000, 1000, 1000), std=(600, 600, 600),
                                 box=TABLE_BOX, drift_rate=10.0)
    moved = spec.drifted(15.0)
    assert np.allclose(moved.mean, 1150.0)
    assert np.allclose(spec.mean, 1000.0)  # original untouched


def test_mise_zero_for_exact_match():
    assert mise(TABLE_TRUTH, TABLE_TRUTH, mc_points=2000, rng=1) == 0.0
    grid = VoxelGrid(box=TABLE_BOX, shape=(10, 10, 10))
    assert integrated_squared_error(TABLE_TRUTH, TABLE_TRUTH, grid) == 0.0


def test_mise_monte_carlo_agrees_with_quadrature():
    samples = sample_truncated_gaussian(TABLE_TRUTH, 30, rng=8)
    model = fit_kde(samples, (1e5, 1e5, 1e5), TABLE_BOX)
    grid = VoxelGrid(box=TABLE_BOX, shape=(32, 32, 32))
    quad = integrated_squared_error(model, TABLE_TRUTH, grid)
    mc = mise(model, TABLE_TRUTH, mc_points=60_000, rng=5)
    assert mc == pytest.approx(quad, rel=0.15)
    assert quad > 0


def test_uniform_density_pdf():
    box = Box((0, 0, 0), (10.0, 10.0, 10.0))
    uni = UniformDensity(box)
    assert uni.pdf((5.0, 5.0, 5.0)) == pytest.approx(1e-3)
    grid = VoxelGrid(box=box, shape=(2, 2, 2))
    assert grid.integrate(uni.grid_pdf(grid)) == pytest.approx(1.0)


def test_fit_rejects_bad_inputs():
    samples = SampleSet(np.array([[100.0, 100.0, 100.0]]))
    with pytest.raises(ValueError):
        fit_kde(samples, (0.0, 1.0, 1.0), TABLE_BOX)
    outside = SampleSet(np.array([[-5.0, 0.0, 0.0]]))
    with pytest.raises(ValueError, match="inside the domain"):
        fit_kde(outside, (1.0, 1.0, 1.0), TABLE_BOX)


def test_model_json_roundtrip():
    samples = sample_truncated_gaussian(TABLE_TRUTH, 8, rng=6)
    model = fit_kde(samples, (3e4, 4e4, 5e4), TABLE_BOX)
    clone = model_from_json(model_to_json(model))
    pts = np.array([[1000.0, 900.0, 1100.0], [200.0, 2500.0, 700.0]])
    assert np.allclose(clone.pdf(pts), model.pdf(pts), rtol=1e-12)


def test_sample_csv_ingest(tmp_path):
    path = tmp_path / "samples.csv"
    path.write_text("x,y,z\n1.0,2.0,3.0\n4.0,5.0,6.0\n")
    samples = load_samples_csv(path)
    assert samples.points.shape == (2, 3)
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="x,y,z"):
        load_samples_csv(bad)

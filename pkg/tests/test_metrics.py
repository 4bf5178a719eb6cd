"""Tests for profile metrics, distribution summaries, and set evaluation."""

import numpy as np
import pytest

from backwater.data import ParameterRanges, generate
from backwater.metrics import (
    ProfileMetrics,
    UndefinedMetricError,
    evaluate_set,
    nmae,
    nnse,
    nse,
    per_station_mae,
    read_metrics_csv,
    summarize,
    write_metrics_csv,
)
from backwater.solver import GridSpec

RANGES = ParameterRanges(
    s=(1e-3, 5e-3, 2),
    b=(8.0, 20.0, 2),
    n=(0.015, 0.03, 2),
    zd=(1.5, 3.0, 2),
    Q=(30.0, 120.0, 2),
)


@pytest.fixture(scope="module")
def tiny_ds():
    return generate(RANGES, GridSpec(10.0, 200.0), seed=7)


def oracle(tiny_ds):
    """Exact predictor: looks the true profile up by scenario."""
    table = {p.scenario: p.depths for p in tiny_ds.profiles}
    return lambda scen, grid: table[scen]


# ---------------------------------------------------------------- #
#  NMAE
# ---------------------------------------------------------------- #


def test_nmae_identities():
    true = np.linspace(1.0, 3.0, 50)
    assert nmae(true, true, 2.0) == 0.0
    assert nmae(true + 0.2, true, 2.0) == pytest.approx(0.1, rel=1e-12)


def test_nmae_matches_independent_recomputation():
    rng = np.random.default_rng(0)
    true = rng.uniform(0.5, 5.0, 73)
    pred = true + rng.normal(0.0, 0.4, 73)
    expected = float(sum(abs(a - b) for a, b in zip(pred, true)) / (73 * 2.7))
    assert nmae(pred, true, 2.7) == pytest.approx(expected, rel=1e-12)


def test_nmae_detects_translation():
    rng = np.random.default_rng(1)
    true = rng.uniform(0.5, 5.0, 40)
    assert nmae(true + 0.35, true, 1.4) == pytest.approx(0.35 / 1.4, rel=1e-12)


def test_nmae_validation():
    with pytest.raises(ValueError):
        nmae(np.ones(3), np.ones(4), 1.0)
    with pytest.raises(ValueError):
        nmae(np.ones(3), np.ones(3), 0.0)


# ---------------------------------------------------------------- #
#  NSE / NNSE
# ---------------------------------------------------------------- #


def test_nnse_identities():
    rng = np.random.default_rng(2)
    true = rng.uniform(0.5, 5.0, 60)
    assert nnse(true, true) == 1.0
    mean_pred = np.full_like(true, true.mean())
    assert nnse(mean_pred, true) == pytest.approx(0.5, abs=1e-12)


def test_nnse_stays_positive_for_terrible_predictions():
    true = np.linspace(1.0, 2.0, 30)
    value = nnse(true + 1e6, true)
    assert 0.0 < value < 1e-6


def test_nnse_increases_with_nse():
    true = np.linspace(1.0, 2.0, 30)
    nnse_values = [nnse(true + delta, true) for delta in (0.5, 0.2, 0.05, 0.0)]
    nse_values = [nse(true + delta, true) for delta in (0.5, 0.2, 0.05, 0.0)]
    assert nse_values == sorted(nse_values)
    assert nnse_values == sorted(nnse_values)
    assert nnse_values[-1] == 1.0


def test_nnse_undefined_for_constant_profile():
    with pytest.raises(UndefinedMetricError):
        nnse(np.ones(10), np.full(10, 2.0))


# ---------------------------------------------------------------- #
#  Summaries
# ---------------------------------------------------------------- #


def test_summarize_single_value():
    s = summarize([3.2])
    assert (s.mean, s.p10, s.p25, s.p50, s.p75, s.p90) == (3.2,) * 6
    assert s.skewness == 0.0
    np.testing.assert_array_equal(s.cdf_values, [3.2])
    np.testing.assert_array_equal(s.cdf_freq, [1.0])


def test_summarize_percentile_convention():
    s = summarize(np.arange(1, 101, dtype=float))
    assert s.p50 == pytest.approx(50.5, rel=1e-12)
    assert s.p25 == pytest.approx(np.percentile(np.arange(1, 101), 25), rel=1e-12)
    assert s.mean == pytest.approx(50.5, rel=1e-12)


def test_summarize_cdf_monotone_to_one():
    rng = np.random.default_rng(3)
    s = summarize(rng.uniform(0.0, 1.0, 257))
    assert np.all(np.diff(s.cdf_values) >= 0.0)
    assert np.all(np.diff(s.cdf_freq) > 0.0)
    assert s.cdf_freq[-1] == 1.0
    assert s.cdf_values[-1] == s.cdf_values.max()


def test_summarize_skewness_signs():
    assert summarize([1.0, 2.0, 3.0]).skewness == pytest.approx(0.0, abs=1e-12)
    assert summarize([1.0, 1.0, 1.0, 10.0]).skewness > 0.0


def test_summarize_empty_errors():
    with pytest.raises(ValueError):
        summarize([])


# ---------------------------------------------------------------- #
#  Set evaluation
# ---------------------------------------------------------------- #


def test_evaluate_set_perfect_oracle(tiny_ds):
    out = evaluate_set(oracle(tiny_ds), tiny_ds.profiles, split="test")
    assert out.nmae_summary.mean == 0.0
    assert out.nnse_summary.mean == 1.0
    assert out.excluded == 0
    assert len(out.records) == len(tiny_ds.profiles)
    assert {r.split for r in out.records} == {"test"}


def test_evaluate_set_mean_predictor_baseline(tiny_ds):
    table = {p.scenario: np.full_like(p.depths, p.depths.mean()) for p in tiny_ds.profiles}
    out = evaluate_set(lambda scen, grid: table[scen], tiny_ds.profiles)
    assert out.nnse_summary.mean == pytest.approx(0.5, abs=1e-12)


def test_evaluate_set_counts_exclusions(tiny_ds):
    # a constant-depth fake makes its own metrics undefined
    from backwater.solver import WaterProfile

    flat = WaterProfile(
        tiny_ds.profiles[0].scenario,
        tiny_ds.profiles[0].grid,
        np.full(tiny_ds.grid.n_points, 2.0),
    )
    profiles = list(tiny_ds.profiles) + [flat]
    table = {p.scenario: p.depths for p in tiny_ds.profiles}
    out = evaluate_set(
        lambda scen, grid: table.get(scen, np.ones(grid.n_points)), profiles
    )
    assert out.excluded == 1
    assert len(out.records) == len(tiny_ds.profiles)


def test_evaluate_set_ids_and_regimes(tiny_ds):
    ids = [10 * i for i in range(len(tiny_ds.profiles))]
    out = evaluate_set(oracle(tiny_ds), tiny_ds.profiles, ids=ids)
    assert [r.profile_id for r in out.records] == ids
    assert all(r.regime == p.regime for r, p in zip(out.records, tiny_ds.profiles))


def test_per_station_mae_curve(tiny_ds):
    ramp = np.linspace(0.0, 0.5, tiny_ds.grid.n_points)
    table = {p.scenario: p.depths + ramp for p in tiny_ds.profiles}
    curve = per_station_mae(lambda scen, grid: table[scen], tiny_ds.profiles)
    np.testing.assert_allclose(curve, ramp, atol=1e-12)


# ---------------------------------------------------------------- #
#  CSV round trip
# ---------------------------------------------------------------- #


def test_metrics_csv_round_trip(tmp_path, tiny_ds):
    rng = np.random.default_rng(4)
    table = {p.scenario: p.depths + rng.normal(0.0, 0.1, p.depths.size) for p in tiny_ds.profiles}
    out = evaluate_set(lambda scen, grid: table[scen], tiny_ds.profiles, split="val")
    path = tmp_path / "metrics.csv"
    write_metrics_csv(out.records, path)
    loaded = read_metrics_csv(path)
    assert loaded == out.records
    # summaries recomputed from the file match the originals exactly
    assert summarize([r.nmae for r in loaded]).mean == out.nmae_summary.mean
    assert summarize([r.nnse for r in loaded]).p90 == out.nnse_summary.p90


def test_metrics_csv_header_guard(tmp_path):
    path = tmp_path / "metrics.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="header"):
        read_metrics_csv(path)

"""Tests for the upstream marching profile solver and jump placement."""

import numpy as np
import pytest

from backwater.hydraulics import (
    ChannelScenario,
    InsufficientEnergyError,
    conjugate_depth,
    critical_depth,
    friction_slope,
    froude,
    momentum_function,
    normal_depth,
    specific_energy,
    weir_depth,
)
from backwater.solver import (
    GridSpec,
    WaterProfile,
    classify_regime,
    solve_profile,
    step_upstream,
)

MILD = ChannelScenario(s=1e-3, b=10.0, n=0.02, z_d=3.0, Q=44.29)
STEEP = ChannelScenario(s=0.02, b=5.0, n=0.01, z_d=1.0, Q=10.0)
GRID = GridSpec(dx=10.0, length=1000.0)


# ---------------------------------------------------------------- #
#  Grid arithmetic
# ---------------------------------------------------------------- #


def test_grid_point_count_and_stations():
    assert GridSpec(dx=10.0, length=5000.0).n_points == 501
    assert GRID.n_points == 101
    assert GRID.stations[0] == 0.0
    assert GRID.stations[-1] == 1000.0
    with pytest.raises(ValueError):
        GridSpec(dx=0.0, length=100.0)
    with pytest.raises(ValueError):
        GridSpec(dx=10.0, length=5.0)


# ---------------------------------------------------------------- #
#  Regime classification
# ---------------------------------------------------------------- #


def test_classify_regime_limits():
    # Nearly flat bed: enormous normal depth, hence subcritical.
    assert classify_regime(ChannelScenario(1e-5, 10.0, 0.02, 3.0, 44.29)) == "subcritical"
    # Steep and smooth: tiny normal depth, hence mixed.
    assert classify_regime(ChannelScenario(0.05, 10.0, 0.01, 3.0, 44.29)) == "mixed"


def test_classify_regime_against_brute_force_scans():
    scen = ChannelScenario(s=0.005, b=10.0, n=0.015, z_d=1.0, Q=50.0)
    grid = np.linspace(0.01, 20.0, 2_000_001)
    h_n_scan = grid[np.argmin(np.abs(friction_slope(grid, scen.Q, scen.b, scen.n) - scen.s))]
    h_c_scan = grid[np.argmin(np.abs(froude(grid, scen.Q, scen.b) - 1.0))]
    assert h_n_scan < h_c_scan  # steep channel
    assert classify_regime(scen) == "mixed"
    assert normal_depth(scen) == pytest.approx(h_n_scan, abs=2e-5)
    assert critical_depth(scen.Q, scen.b) == pytest.approx(h_c_scan, abs=2e-5)


# ---------------------------------------------------------------- #
#  Single energy step
# ---------------------------------------------------------------- #


def test_uniform_flow_is_a_fixed_point():
    h_n = normal_depth(MILD)
    assert step_upstream(h_n, MILD, 10.0) == pytest.approx(h_n, abs=1e-9)


def test_backwater_decays_upstream():
    # M1 curve: above normal depth on a mild slope, depth drops upstream.
    h = weir_depth(MILD)
    assert h > normal_depth(MILD)
    assert step_upstream(h, MILD, 10.0) < h


def test_step_against_refined_integrator():
    # Oracle: 1000 substeps of dx/1000 from the same starting depth.
    h_ref = weir_depth(MILD)
    for _ in range(1000):
        h_ref = step_upstream(h_ref, MILD, 0.01)
    coarse = step_upstream(weir_depth(MILD), MILD, 10.0)
    # First-order local truncation at this scale is ~2.5e-6 m.
    assert coarse == pytest.approx(h_ref, abs=1e-5)


def test_step_across_critical_raises():
    # A depth barely above critical on a steep channel cannot sustain a
    # subcritical step of this size.
    h_c = critical_depth(STEEP.Q, STEEP.b)
    with pytest.raises(InsufficientEnergyError):
        step_upstream(h_c * 1.0001, STEEP, 10.0)


# ---------------------------------------------------------------- #
#  Full profiles
# ---------------------------------------------------------------- #


def test_mild_profile_shape_and_boundary():
    prof = solve_profile(MILD, GRID)
    assert prof.regime == "subcritical"
    assert prof.jump_index is None
    assert prof.depths[0] == weir_depth(MILD)  # exact boundary condition
    assert np.all(np.diff(prof.depths) < 0.0)  # monotone decay toward h_n
    assert np.all(prof.depths > normal_depth(MILD))
    assert np.all(prof.depths > critical_depth(MILD.Q, MILD.b))


def test_discrete_energy_balance_is_exact():
    prof = solve_profile(MILD, GRID)
    E = specific_energy(prof.depths, MILD.Q, MILD.b)
    J = friction_slope(prof.depths, MILD.Q, MILD.b, MILD.n)
    residual = (E[1:] - E[:-1]) / GRID.dx - (J[:-1] - MILD.s)
    assert np.max(np.abs(residual)) <= 1e-12


def test_steep_profile_has_jump_with_momentum_bracket():
    prof = solve_profile(STEEP, GRID)
    assert prof.regime == "mixed"
    j = prof.jump_index
    assert j is not None and 1 <= j < GRID.n_points
    h_n = normal_depth(STEEP)
    assert np.all(prof.depths[j:] == h_n)  # uniform supercritical reach

    # Conjugate crossing brackets the normal depth within one station.
    h_down = prof.depths[j - 1]
    h_next = step_upstream(h_down, STEEP, GRID.dx)
    assert conjugate_depth(h_down, STEEP.Q, STEEP.b) < h_n
    assert conjugate_depth(h_next, STEEP.Q, STEEP.b) >= h_n

    # Momentum balance across the jump holds to the one-station bound.
    m_gap = abs(momentum_function(h_n, STEEP.Q, STEEP.b)
                - momentum_function(h_down, STEEP.Q, STEEP.b))
    m_step = abs(momentum_function(h_next, STEEP.Q, STEEP.b)
                 - momentum_function(h_down, STEEP.Q, STEEP.b))
    assert m_gap <= m_step


def test_jump_is_the_only_discontinuity():
    prof = solve_profile(STEEP, GRID)
    j = prof.jump_index
    gaps = np.abs(np.diff(prof.depths))
    assert np.argmax(gaps) == j - 1
    # Away from the jump the profile varies smoothly (well under the jump gap).
    others = np.delete(gaps, j - 1)
    assert np.max(others) < gaps[j - 1] / 3.0


def test_first_order_convergence_under_dx_refinement():
    scenarios = [
        MILD,
        ChannelScenario(s=2e-3, b=20.0, n=0.03, z_d=2.0, Q=100.0),
        ChannelScenario(s=5e-4, b=30.0, n=0.015, z_d=4.0, Q=200.0),
    ]
    for scen in scenarios:
        coarse = solve_profile(scen, GridSpec(10.0, 1000.0)).depths
        mid = solve_profile(scen, GridSpec(1.0, 1000.0)).depths
        fine = solve_profile(scen, GridSpec(0.1, 1000.0)).depths
        err_coarse = np.max(np.abs(coarse - mid[::10]))
        err_mid = np.max(np.abs(mid - fine[::10]))
        # First order: error shrinks ~10x per 10x dx refinement.
        assert 5.0 < err_coarse / err_mid < 20.0
        assert err_coarse < 0.01


def test_profiles_are_deterministic():
    a = solve_profile(STEEP, GRID)
    b = solve_profile(STEEP, GRID)
    assert np.array_equal(a.depths, b.depths)
    assert a.jump_index == b.jump_index


def test_water_profile_validation():
    with pytest.raises(ValueError):
        WaterProfile(MILD, GRID, np.ones(7))
    with pytest.raises(ValueError):
        WaterProfile(MILD, GRID, np.ones(GRID.n_points), regime="mixed")

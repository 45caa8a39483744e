import math

import numpy as np
import pytest

from conftest import make_single_block_grid
from uavlos.env import GridParams, Uav, UserInBuildingError, UserMotion, sample_grid_anchored
from uavlos.oracle import (
    TrialStats,
    coverage_time,
    is_los,
    los_intervals,
    los_time,
    los_time_sampled,
    monte_carlo_expected_los,
    monte_carlo_static_los,
)

# Shared hand geometry: one block [8,12] x [16,24], platform at (20, 40, 50),
# user line y = 0.  Rays from the platform through the corners hit y = 0 at
#   (8, 24) -> x = 20 - 12 * 40/16  = -10
#   (12,16) -> x = 20 -  8 * 40/24  = 20/3
# so a tall block shadows exactly x in (-10, 20/3).
UAV = Uav(20.0, 40.0, 50.0)
WALK = UserMotion(-15.0, 0.0, 1.0, 25.0)


def test_is_los_hand_cases():
    tall = make_single_block_grid(1000.0)
    assert is_los(tall, (-12.0, 0.0), UAV)  # before the shadow
    assert not is_los(tall, (0.0, 0.0), UAV)  # inside it
    assert is_los(tall, (8.0, 0.0), UAV)  # past it
    # entry by the bottom face is at link fraction 16/40 = 0.4, so the link
    # clears any block below 50 * 0.4 = 20 everywhere in the shadow
    assert is_los(make_single_block_grid(18.0), (0.0, 0.0), UAV)
    with pytest.raises(UserInBuildingError):
        is_los(tall, (10.0, 20.0), UAV)


def test_intervals_tall_block():
    # always blocked while crossing: clear outside t in (5, 15 + 20/3)
    g = make_single_block_grid(1000.0)
    iv = los_intervals(g, WALK, UAV)
    assert len(iv) == 2
    assert iv[0][0] == 0.0 and math.isclose(iv[0][1], 5.0, abs_tol=2e-5)
    assert math.isclose(iv[1][0], 15.0 + 20.0 / 3.0, abs_tol=2e-5)
    assert iv[1][1] == WALK.duration
    assert math.isclose(los_time(g, WALK, UAV), 25.0 - 50.0 / 3.0, abs_tol=5e-5)


def test_intervals_height_threshold():
    # H = 21: west-wall entry fraction (8 - x)/(20 - x) decays through
    # 21/50 = 0.42 at x = -20/29, where the block starts winning; it keeps
    # blocking until the link passes the south-east corner at x = 20/3
    g = make_single_block_grid(21.0)
    iv = los_intervals(g, WALK, UAV)
    t_on = 15.0 - 20.0 / 29.0
    t_off = 15.0 + 20.0 / 3.0
    assert len(iv) == 2
    assert math.isclose(iv[0][1], t_on, abs_tol=2e-5)
    assert math.isclose(iv[1][0], t_off, abs_tol=2e-5)
    assert math.isclose(los_time(g, WALK, UAV), 25.0 - (t_off - t_on), abs_tol=5e-5)


def test_intervals_low_block_never_blocks():
    g = make_single_block_grid(18.0)
    assert los_intervals(g, WALK, UAV) == [(0.0, 25.0)]
    assert los_time(g, WALK, UAV) == 25.0


def test_intervals_static_user():
    g = make_single_block_grid(1000.0)
    blocked = UserMotion(0.0, 0.0, 0.0, 9.0)
    clear = UserMotion(-12.0, 0.0, 0.0, 9.0)
    assert los_intervals(g, blocked, UAV) == []
    assert los_intervals(g, clear, UAV) == [(0.0, 9.0)]


def test_los_time_matches_dense_sampling():
    params = GridParams(45.0, 13.0, 8.0)
    m = UserMotion(0.0, 0.0, 15.0, 10.0)
    u = Uav(120.0, 90.0, 100.0)
    for seed in range(3):
        g = sample_grid_anchored(params, seed, 0.0, 13.0)
        exact = los_time(g, m, u)
        approx = los_time_sampled(g, m, u, samples=4096)
        assert abs(exact - approx) < 0.05


def test_los_time_frozen_urban_seed():
    params = GridParams(45.0, 13.0, 8.0)
    g = sample_grid_anchored(params, 7, 0.0, 13.0)
    t = los_time(g, UserMotion(0.0, 0.0, 15.0, 10.0), Uav(120.0, 90.0, 100.0))
    assert math.isclose(t, 9.374757008746045, abs_tol=1e-9)


def test_los_time_empty_grid_is_full_epoch():
    # street fraction so close to 1 that no building band fits the region
    wide = GridParams(20.0, 1e6, 8.0)
    m = UserMotion(0.0, 0.0, 15.0, 10.0)
    for seed in range(4):
        g = sample_grid_anchored(wide, seed, 0.0, wide.mu_s)
        assert los_time(g, m, Uav(70.0, 45.0, 100.0)) == 10.0


# -- coverage window ----------------------------------------------------------


def test_coverage_unlimited_range():
    assert coverage_time(UserMotion(0.0, 0.0, 15.0, 10.0), Uav(500.0, 0.0, 100.0)) == 10.0


def test_coverage_platform_out_of_reach():
    # range shorter than the platform height: the sphere never meets ground
    assert coverage_time(UserMotion(0.0, 0.0, 1.0, 10.0), Uav(0.0, 0.0, 80.0, 50.0)) == 0.0


def test_coverage_starts_outside():
    # start distance sqrt(900 + 1600 + 900) ~ 58.3 exceeds the 50 m range
    u = Uav(30.0, 40.0, 30.0, link_range=50.0)
    assert coverage_time(UserMotion(0.0, 0.0, 1.0, 60.0), u) == 0.0


def test_coverage_exit_time_exact():
    # exit when (x - 30)^2 + 40^2 + 30^2 = 60^2, walking +x from 0 at 1 m/s
    u = Uav(30.0, 40.0, 30.0, link_range=60.0)
    t = coverage_time(UserMotion(0.0, 0.0, 1.0, 100.0), u)
    assert math.isclose(t, 30.0 + math.sqrt(60.0**2 - 40.0**2 - 30.0**2), rel_tol=1e-12)


def test_coverage_clamped_to_duration():
    u = Uav(30.0, 40.0, 30.0, link_range=60.0)
    assert coverage_time(UserMotion(0.0, 0.0, 1.0, 20.0), u) == 20.0
    assert coverage_time(UserMotion(0.0, 0.0, 0.0, 20.0), u) == 20.0


# -- trial statistics ---------------------------------------------------------


def test_trial_stats_hand_values():
    s = TrialStats([1.0, 2.0, 3.0, 4.0])
    assert s.n == 4
    assert s.mean == 2.5
    expect_se = math.sqrt(5.0 / 3.0) / 2.0
    assert math.isclose(s.stderr, expect_se, rel_tol=1e-12)
    lo, hi = s.ci95()
    assert math.isclose(lo, 2.5 - 1.96 * expect_se)
    assert math.isclose(hi, 2.5 + 1.96 * expect_se)


def test_trial_stats_degenerate():
    assert math.isnan(TrialStats([3.0]).stderr)


# -- grid-ensemble estimators -------------------------------------------------


def test_mc_expected_los_deterministic(urban):
    m = UserMotion(0.0, 0.0, 15.0, 10.0)
    u = Uav(70.0, 45.0, 100.0)
    a = monte_carlo_expected_los(urban, m, u, trials=50, seed=3)
    b = monte_carlo_expected_los(urban, m, u, trials=50, seed=3)
    assert np.array_equal(a.values, b.values)
    c = monte_carlo_expected_los(urban, m, u, trials=50, seed=4)
    assert not np.array_equal(a.values, c.values)
    assert all(0.0 <= v <= 10.0 for v in a.values)


def test_mc_contact_conditioning_lowers_clear_probability(urban):
    # guaranteeing a building column at the first crossing can only add a
    # potential blocker; at a shallow viewing angle the effect is large
    u = Uav(120.0, 90.0, 60.0)
    cond = monte_carlo_static_los(urban, (0.0, 0.0), u, trials=500, seed=11)
    raw = monte_carlo_static_los(urban, (0.0, 0.0), u, trials=500, seed=11,
                                 require_contact=False)
    assert cond.mean < raw.mean
    assert set(cond.values) <= {0.0, 1.0}


def test_mc_static_deterministic(urban):
    u = Uav(70.0, 45.0, 70.0)
    a = monte_carlo_static_los(urban, (0.0, 0.0), u, trials=200, seed=5)
    b = monte_carlo_static_los(urban, (0.0, 0.0), u, trials=200, seed=5)
    assert np.array_equal(a.values, b.values)
    assert 0.0 <= a.mean <= 1.0

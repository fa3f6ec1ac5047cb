"""Empirical statistics read off traces, and the delay-decay diagnostics."""

import numpy as np
import pytest

from delaytree.errors import ArgumentError
from delaytree.estimators import (
    RootTrajectory,
    degree_hist,
    delay_condition_scan,
    extended_fringe_census,
    floor_reach_mean,
    fringe_census,
    geometric_grid,
    leaf_clt_statistic,
    random_centering_diagnostic,
    random_centering_rate,
    root_trajectory,
)
from delaytree.growth import grow, trace_from_parents
from delaytree.kernels import (
    AffineKernel,
    ConstantDelay,
    GrowthConfig,
    InversePowerDelay,
    QuantileTableDelay,
    Uniform01Delay,
    ZeroDelay,
)

AFF = AffineKernel(0.0)

PATH4 = trace_from_parents([0, 0, 1, 2, 3], AFF)
STAR4 = trace_from_parents([0, 0, 1, 1, 1], AFF)


# ---------------------------------------------------------------------------
# degree histogram
# ---------------------------------------------------------------------------


def test_degree_hist_hand_trees():
    h = degree_hist(PATH4)
    assert h.count(1) == 2 and h.count(2) == 2 and h.count(3) == 0
    assert h.max_degree() == 2
    assert h.probs().sum() == pytest.approx(1.0)
    s = degree_hist(STAR4)
    assert s.count(1) == 3 and s.count(3) == 1
    assert s.max_degree() == 3
    with pytest.raises(ArgumentError):
        h.count(-1)


def test_degree_sum_closes_on_grown_trees():
    tr = grow(GrowthConfig(AFF, Uniform01Delay(beta=0.5), 3000, seed=17))
    h = degree_hist(tr)
    ks = np.arange(len(h.counts))
    assert int((ks * h.counts).sum()) == 2 * (tr.n - 1)
    assert int(h.counts.sum()) == tr.n


# ---------------------------------------------------------------------------
# fringe censuses
# ---------------------------------------------------------------------------


def test_fringe_census_path():
    c = fringe_census(PATH4, cap=6)
    assert c.counts == {"()": 1, "(())": 1, "((()))": 1, "(((())))": 1}
    assert c.truncated == 0
    capped = fringe_census(PATH4, cap=2)
    assert capped.counts == {"()": 1, "(())": 1}
    assert capped.truncated == 2
    assert capped.truncated_mass == pytest.approx(0.5)
    assert capped.freq("(())") == pytest.approx(0.25)
    assert capped.freq("nonexistent-is-zero" * 0 + "((()))") == 0.0


def test_singleton_count_identity():
    # leaves of the tree match singleton fringes except when the whole
    # tree is a path from the root: then the root itself has degree 1
    # but its fringe is everything
    for tr in (PATH4, STAR4):
        c = fringe_census(tr, cap=6)
        n1 = degree_hist(tr).count(1)
        root_kids = int((tr.parents[2:] == 1).sum())
        assert c.counts.get("()", 0) == n1 - (1 if root_kids == 1 else 0)
    rng_traces = [
        grow(GrowthConfig(AFF, Uniform01Delay(beta=0.5), 500, seed=s)) for s in (1, 2, 3)
    ]
    for tr in rng_traces:
        c = fringe_census(tr, cap=500)
        n1 = degree_hist(tr).count(1)
        root_kids = int((tr.parents[2:] == 1).sum())
        assert c.counts.get("()", 0) == n1 - (1 if root_kids == 1 else 0)


def test_extended_census_star():
    pc = extended_fringe_census(STAR4, cap=4)
    assert pc.counts == {("()", "(()()())"): 3}
    assert pc.truncated == 0
    assert pc.freq(("()", "(()()())")) == pytest.approx(0.75)
    assert pc.child_marginal("()") == 3
    tight = extended_fringe_census(STAR4, cap=3)
    assert tight.counts == {}
    assert tight.truncated == 3  # parent shape no longer fits the cap


def test_extended_census_matches_pair_freqs_on_grown_tree():
    tr = grow(GrowthConfig(AFF, ZeroDelay(beta=0.5), 4000, seed=23))
    pc = extended_fringe_census(tr, cap=4)
    fc = fringe_census(tr, cap=4)
    # child marginal of the pair census never exceeds the child's own count
    for code, cnt in fc.counts.items():
        assert pc.child_marginal(code) <= cnt
    assert pc.n == tr.n
    # everything either contributes a pair or is truncated (root included)
    assert sum(pc.counts.values()) + pc.truncated == tr.n - 1


# ---------------------------------------------------------------------------
# leaf CLT statistic
# ---------------------------------------------------------------------------


def test_leaf_clt_statistic_values():
    traces = [
        grow(GrowthConfig(AFF, Uniform01Delay(beta=0.3), 900, seed=s)) for s in range(6)
    ]
    res = leaf_clt_statistic(traces, alpha=0.0)
    assert res.n == 900
    assert res.p1 == pytest.approx(2.0 / 3.0)
    assert res.sigma1_sq == pytest.approx(1.0 / 9.0)
    for s_val, tr in zip(res.s_values, traces):
        n1 = degree_hist(tr).count(1)
        assert s_val == pytest.approx(np.sqrt(900) * (n1 / 900 - 2.0 / 3.0))
    assert res.variance == pytest.approx(np.var(res.s_values, ddof=1))
    assert res.standardized == pytest.approx(res.s_values / np.sqrt(1.0 / 9.0))


def test_leaf_clt_statistic_errors():
    t1 = grow(GrowthConfig(AFF, Uniform01Delay(beta=0.3), 100, seed=1))
    t2 = grow(GrowthConfig(AFF, Uniform01Delay(beta=0.3), 101, seed=2))
    with pytest.raises(ArgumentError):
        leaf_clt_statistic([t1, t2], alpha=0.0)
    with pytest.raises(ArgumentError):
        leaf_clt_statistic([t1], alpha=0.0)


# ---------------------------------------------------------------------------
# root trajectory
# ---------------------------------------------------------------------------


def test_geometric_grid():
    np.testing.assert_array_equal(geometric_grid(10), [2, 3, 4, 6, 8, 10])
    g = geometric_grid(100_000)
    assert g[-1] == 100_000
    assert np.all(np.diff(g) > 0)
    np.testing.assert_array_equal(geometric_grid(2), [2])
    with pytest.raises(ArgumentError):
        geometric_grid(1)


def test_root_trajectory_star():
    star = trace_from_parents([0, 0] + [1] * 19, AFF)  # root with 19 children
    traj = root_trajectory(star, theta=0.5, grid=[1, 4, 9, 16, 20])
    np.testing.assert_allclose(traj.values, [1, 4, 9, 16, 20])
    np.testing.assert_allclose(traj.over_ntheta, [1.0, 2.0, 3.0, 4.0, 20 / np.sqrt(20)])
    assert traj.over_truncated_mean is None
    with_ex = root_trajectory(star, theta=0.5, grid=[4, 16], ex_x=lambda n: n / 2.0)
    np.testing.assert_allclose(with_ex.over_truncated_mean, [2.0, 2.0])


def test_root_trajectory_validation():
    with pytest.raises(ArgumentError):
        root_trajectory(PATH4, theta=0.5, grid=[3, 2])
    with pytest.raises(ArgumentError):
        root_trajectory(PATH4, theta=0.5, grid=[1, 99])
    with pytest.raises(ArgumentError):
        RootTrajectory(
            ns=np.array([2, 4]),
            values=np.array([5.0, 3.0]),  # the root cannot shrink
            theta=0.5,
            over_ntheta=np.array([1.0, 1.0]),
            over_truncated_mean=None,
        )


# ---------------------------------------------------------------------------
# delay-decay scan
# ---------------------------------------------------------------------------


def test_scan_zero_delay_trivial():
    scan = delay_condition_scan(ZeroDelay(beta=0.5), [100, 1000, 10_000])
    assert scan.verdict == "satisfied"
    assert scan.method == "exact"
    np.testing.assert_array_equal(scan.e_values, 0.0)
    np.testing.assert_array_equal(scan.lemma_values, 0.0)
    assert list(scan.rows())[0] == (100, 0.0, 0.0)


def test_scan_constant_delay_slab_value():
    # c=1, beta=1/2, n=100: the delay always lands in the slab with
    # floor 90, so e_100 = 10 * 1/90 exactly
    scan = delay_condition_scan(ConstantDelay(c=1.0, beta=0.5), [100, 10_000])
    assert scan.e_values[0] == pytest.approx(1.0 / 9.0, rel=1e-12)
    assert scan.e_values[1] == pytest.approx(100.0 / 9900.0, rel=1e-12)
    assert scan.verdict == "satisfied"


def test_scan_uniform01_decreasing():
    scan = delay_condition_scan(Uniform01Delay(beta=0.5), [100, 316, 1000, 3162, 10_000])
    assert scan.method == "exact"
    assert np.all(np.diff(scan.e_values) < 0)
    assert scan.verdict == "satisfied"
    np.testing.assert_array_equal(scan.stderrs, 0.0)


def test_scan_montecarlo_agrees_with_exact():
    # a quantile table that IS uniform(0,1): the MC route should land on
    # the closed-form slab value within a few standard errors
    qtab = QuantileTableDelay(us=(0.0, 1.0), qs=(0.0, 1.0), beta=0.5)
    mc = delay_condition_scan(qtab, [500, 2000], seed=4)
    exact = delay_condition_scan(Uniform01Delay(beta=0.5), [500, 2000])
    assert mc.method == "montecarlo"
    assert np.all(mc.stderrs > 0)
    for i in range(2):
        assert abs(mc.e_values[i] - exact.e_values[i]) < 5 * mc.stderrs[i]


def test_scan_heavy_tail_inconclusive_on_short_grids():
    # U**-2 decays like n^(-1/4): over two decades that is well short of
    # the halving the verdict demands, and the scan must say so rather
    # than claim satisfaction
    scan = delay_condition_scan(InversePowerDelay(p=2.0, beta=0.5), [100, 1000, 10_000])
    assert scan.verdict == "inconclusive"
    assert np.all(np.diff(scan.e_values) < 0)  # it IS decreasing, just slowly


def test_scan_input_validation():
    with pytest.raises(ArgumentError):
        delay_condition_scan(ZeroDelay(beta=0.5), [100])
    with pytest.raises(ArgumentError):
        delay_condition_scan(ZeroDelay(beta=0.5), [100, 50])


# ---------------------------------------------------------------------------
# random-centering diagnostics
# ---------------------------------------------------------------------------


def test_floor_reach_mean_anchors():
    assert floor_reach_mean(ZeroDelay(beta=0.5), 100) == pytest.approx(0.01, rel=1e-12)
    assert floor_reach_mean(ConstantDelay(c=1.0, beta=0.5), 100) == pytest.approx(1.0 / 90.0, rel=1e-12)


def test_floor_reach_mean_matches_monte_carlo():
    delay = Uniform01Delay(beta=0.5)
    n = 250
    got = floor_reach_mean(delay, n)
    rng = np.random.default_rng(8)
    xi = delay.sample_many(rng, 2_000_000)
    raw = n - n**0.5 * xi
    vals = np.where(raw >= 1.0, 1.0 / np.maximum(np.floor(raw), 1.0), 0.0)
    se = vals.std() / np.sqrt(len(vals))
    assert abs(got - vals.mean()) < 4 * se


def test_random_centering_zero_delay_closed_form():
    # g_n = 1/n exactly, so the implied leaf fraction is 1/(1+gamma_c)
    # at every n: 2/3 for the proportional kernel -- equal to p_1 itself
    diag = random_centering_diagnostic(ZeroDelay(beta=0.5), 0.0, [10, 100, 1000])
    np.testing.assert_allclose(diag["n_times_g"], 1.0, rtol=1e-12)
    np.testing.assert_allclose(diag["implied_leaf_fraction"], 2.0 / 3.0, rtol=1e-12)
    np.testing.assert_allclose(diag["inflow_approximation_gap"], 0.0, atol=1e-12)
    assert diag["p1"] == pytest.approx(2.0 / 3.0)
    assert random_centering_rate(ZeroDelay(beta=0.5), 0.0, 100) == pytest.approx(1.0 - 0.5 / 100)


def test_random_centering_heavy_delay_shows_leaf_deficit():
    # for U**-2 the reach g_n decays so slowly that the implied leaf
    # fraction at n = 5e4 still sits visibly below p_1 = 2/3; this is
    # the finite-size bias seen in the degree histograms
    diag = random_centering_diagnostic(InversePowerDelay(p=2.0, beta=0.5), 0.0, [50_000])
    assert diag["implied_leaf_fraction"][0] < 0.655
    light = random_centering_diagnostic(Uniform01Delay(beta=0.5), 0.0, [50_000])
    assert abs(light["implied_leaf_fraction"][0] - 2.0 / 3.0) < 1e-3

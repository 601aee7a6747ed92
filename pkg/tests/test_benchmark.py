import numpy as np
import pytest

from netgame import (
    GameParameters,
    Intervention,
    WelfareSpec,
    check_theorem2,
    optimize_benchmark,
    optimize_intervention,
    solve_benchmark,
)
from netgame import planner as pl
from netgame.benchmark import benchmark_kkt_check, benchmark_links, spectral_gap


def ones_f(n):
    return np.ones((n, n))


def test_empty_network_when_incentives_nonpositive():
    p = GameParameters(n=3, b=[1.0, -0.5, 0.2], c=[1.0, 2.0, 1.0],
                       s=np.zeros((3, 3)) - 0.1 + 0.1 * np.eye(3),
                       f=ones_f(3), rho=0.4)
    eq = solve_benchmark(p, Intervention.zero(3, 1.0))
    assert np.all(eq.g_star == 0.0)
    np.testing.assert_allclose(
        eq.a_star, np.maximum(0.0, p.b / p.c), atol=1e-12
    )


def test_two_agent_direct_solve():
    p = GameParameters(n=2, b=[1.0, 1.0], c=[1.0, 1.0],
                       s=[[0, 0.5], [0.5, 0]], f=ones_f(2), rho=0.4)
    eq = solve_benchmark(p, Intervention.zero(2, 1.0))
    assert eq.G[0, 1] == pytest.approx(1.0)
    # direct 2x2 solve of (I - rho*G) a = b
    expected = np.linalg.solve(np.eye(2) - 0.4 * eq.G, np.ones(2))
    np.testing.assert_allclose(eq.a_star, expected, rtol=1e-10)
    assert eq.spectral_gap == pytest.approx(0.6)


def test_supercritical_network_does_not_exist():
    p = GameParameters(n=2, b=[1.0, 1.0], c=[1.0, 1.0],
                       s=[[0, 2.0], [2.0, 0]], f=ones_f(2), rho=0.5)
    eq = solve_benchmark(p, Intervention.zero(2, 1.0))
    assert not eq.exists
    assert eq.spectral_gap <= 0.0


def test_links_ignore_action_incentives():
    rng = np.random.default_rng(4)
    s = np.zeros((3, 3))
    s[0, 1] = s[1, 0] = 0.4
    s[1, 2] = s[2, 1] = 0.2
    f = rng.uniform(1, 2, (3, 3))
    iv = Intervention(rng.uniform(0, 0.2, 3), np.zeros((3, 3)), 1.0)
    base = dict(n=3, c=[1.0, 1.0, 1.0], s=s, f=f)
    g1 = solve_benchmark(
        GameParameters(b=[0.1, 0.2, 0.3], rho=0.05, **base), iv
    ).g_star
    g2 = solve_benchmark(
        GameParameters(b=[5.0, 0.0, 1.0], rho=0.3, **base), iv
    ).g_star
    assert np.array_equal(g1, g2)  # bit-identical
    np.testing.assert_allclose(g1, benchmark_links(
        GameParameters(b=[0.1, 0.2, 0.3], rho=0.05, **base), iv))


def test_vanishing_budget():
    p = GameParameters(n=2, b=[0.5, 0.5], c=[1.0, 1.0],
                       s=[[0, 0.3], [0.3, 0]], f=ones_f(2), rho=0.2)
    w = WelfareSpec.action_sum(2)
    res = optimize_benchmark(p, w, 1e-12, seed=0, n_starts=4)
    assert np.max(res.best.beta) <= 1e-10 and np.max(res.best.sigma) <= 1e-10


def test_optimizer_matches_grid_oracle_n2():
    p = GameParameters(n=2, b=[0.5, 0.6], c=[1.0, 1.2],
                       s=[[0, 0.4], [0.4, 0]], f=ones_f(2), rho=0.25)
    w = WelfareSpec.action_sum(2)
    res = optimize_benchmark(p, w, 0.3, seed=1)
    from netgame.benchmark import BenchmarkAdapter

    adapter = BenchmarkAdapter(p, w, 0.3)
    grid_w, _ = pl._grid_search(adapter, "full", 14, 1e-3)
    assert abs(res.welfare_value - grid_w) <= 1e-4


def test_thm2_action_side_inequality():
    # weak spillovers: optimum subsidizes actions only
    p = GameParameters(n=2, b=[0.5, 0.6], c=[1.0, 1.0],
                       s=[[0, 0.15], [0.15, 0]], f=ones_f(2), rho=0.08)
    w = WelfareSpec.action_sum(2)
    res = optimize_benchmark(p, w, 0.3, seed=4)
    assert res.kkt is not None and res.kkt.clean
    verdicts = check_theorem2(p, res)
    rules = {v.rule for v in verdicts.applicable}
    assert "product-below" in rules
    assert verdicts.all_passed


def test_thm2_link_side_inequality():
    # strong standalone link incentives: link subsidies enter the optimum
    p = GameParameters(n=2, b=[0.5, 0.5], c=[1.0, 1.0],
                       s=[[0, 0.8], [0.8, 0]], f=ones_f(2), rho=0.35)
    w = WelfareSpec.action_sum(2)
    res = optimize_benchmark(p, w, 0.5, seed=4)
    assert res.kkt is not None and res.kkt.clean
    assert res.best.sigma[0, 1] > 1e-4
    verdicts = check_theorem2(p, res)
    rules = {v.rule for v in verdicts.applicable}
    assert "product-above" in rules
    assert verdicts.all_passed
    kkt2 = benchmark_kkt_check(p, w, res)
    assert kkt2.max_violation <= pl.KKT_TOL * kkt2.scale


def test_thm2_exempt_without_spillovers():
    p = GameParameters(n=2, b=[0.5, 0.5], c=[1.0, 1.0],
                       s=[[0, 0.3], [0.3, 0]], f=ones_f(2), rho=0.0)
    w = WelfareSpec.action_sum(2)
    res = optimize_benchmark(p, w, 0.2, seed=2, n_starts=4)
    verdicts = check_theorem2(p, res)
    assert verdicts.applicable == []


def test_reversal_contrast_as_actions_scale_up():
    """The fixed-network planner shifts budget toward link subsidies once
    equilibrium actions are high enough (the action product crosses the
    link-value threshold), while the jointly chosen model keeps zero link
    subsidies for nonnegative standalone incentives at every level.

    The family scales the action incentives; scaling the standalone link
    incentives instead cannot exhibit the rising share while keeping the
    jointly chosen twin well posed, because the product threshold then
    requires action levels past its existence boundary.
    """
    w = WelfareSpec.action_sum(2)
    shares = []
    for b_level in (0.2, 0.5, 0.8):
        p = GameParameters(n=2, b=[b_level, b_level], c=[1.0, 1.0],
                           s=[[0, 0.3], [0.3, 0]], f=np.full((2, 2), 4.0),
                           rho=0.3)
        res = optimize_benchmark(p, w, 1.0, seed=9, n_starts=8)
        assert res.kkt is not None and res.kkt.clean
        sigma_spend = float(np.sum(res.best.sigma * res.report.G))
        shares.append(sigma_spend / res.payment)
        endo = optimize_intervention(p, w, 1.0, seed=9, n_starts=8)
        assert np.max(endo.best.sigma) <= 1e-3
    assert shares[0] <= shares[1] + 1e-9 <= shares[2] + 1e-9
    assert shares[2] > shares[0] + 1e-3

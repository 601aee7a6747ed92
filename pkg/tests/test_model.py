import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netgame import (
    GameParameters,
    Intervention,
    StrategyProfile,
    WelfareSpec,
    agent_utility,
    instance_from_json,
    instance_to_json,
    planner_payment,
    welfare,
)
from netgame.model import Instance


def zero_params(n=2, **overrides):
    base = dict(
        n=n, b=np.zeros(n), c=np.ones(n), s=np.zeros((n, n)),
        f=np.ones((n, n)), rho=0.0,
    )
    base.update(overrides)
    return GameParameters(**base)


def test_utility_zero_profile_is_zero():
    p = zero_params()
    iv = Intervention.zero(2, 1.0)
    sp = StrategyProfile.zeros(2)
    assert agent_utility(p, iv, sp, 0) == 0.0
    assert agent_utility(p, iv, sp, 1) == 0.0


def test_utility_quadratic_vertex():
    # b=(1,0), c=(1,1), a=(2,0): agent 0 earns 1*2 - 2^2/2 = 0
    p = zero_params(b=[1.0, 0.0])
    iv = Intervention.zero(2, 1.0)
    sp = StrategyProfile([2.0, 0.0], np.zeros((2, 2)))
    assert agent_utility(p, iv, sp, 0) == pytest.approx(0.0, abs=1e-15)


def test_utility_term_by_term_oracle():
    # every term computed independently and summed by hand
    p = zero_params(rho=1.0, s=[[0, 0.5], [0.5, 0]])
    iv = Intervention([0.0, 0.0], [[0, 0.1], [0.1, 0]], 1.0)
    sp = StrategyProfile([1.0, 1.0], [[0, 0.25], [0.25, 0]])
    G01 = 0.25 + 0.25
    expected = (
        0.0 * 1.0                      # standalone action payoff
        + 1.0 * G01 * 1.0 * 1.0        # spillover rho * G * a_i * a_j
        - 0.5 * 1.0 * 1.0**2           # action cost
        + 0.5 * G01                    # standalone link payoff
        - 0.5 * 1.0 * 0.25**2          # own link cost
        + 0.0                          # action subsidy
        + 0.1 * G01                    # link subsidy
    )
    assert expected == pytest.approx(0.26875)
    assert agent_utility(p, iv, sp, 0) == pytest.approx(expected, abs=1e-15)


def test_utility_index_error():
    p = zero_params()
    with pytest.raises(IndexError):
        agent_utility(p, Intervention.zero(2, 1.0), StrategyProfile.zeros(2), 5)


def test_payment_zero_subsidies():
    iv = Intervention.zero(2, 1.0)
    sp = StrategyProfile([3.0, 4.0], [[0, 1.0], [0.5, 0]])
    assert planner_payment(iv, sp) == 0.0


def test_payment_linear_sum():
    iv = Intervention([1.0, 1.0], np.zeros((2, 2)), 1.0)
    sp = StrategyProfile([0.3, 0.7], np.zeros((2, 2)))
    assert planner_payment(iv, sp) == pytest.approx(1.0)


def test_payment_counts_ordered_pairs_twice():
    iv = Intervention([0.0, 0.0], [[0, 0.2], [0.2, 0]], 1.0)
    sp = StrategyProfile([0.0, 0.0], [[0, 0.5], [0.3, 0]])
    # G01 = 0.8, paid to both endpoints
    assert planner_payment(iv, sp) == pytest.approx(2 * 0.2 * 0.8)


@given(st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_payment_bilinear(seed):
    rng = np.random.default_rng(seed)
    n = 3
    beta = rng.uniform(0, 1, n)
    sig = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            sig[i, j] = sig[j, i] = rng.uniform(0, 1)
    iv = Intervention(beta, sig, 1.0)
    iv2 = Intervention(2 * beta, 2 * sig, 1.0)
    a = rng.uniform(0, 1, n)
    g = rng.uniform(0, 1, (n, n))
    np.fill_diagonal(g, 0)
    sp = StrategyProfile(a, g)
    sp2 = StrategyProfile(2 * a, 2 * g)
    pay = planner_payment(iv, sp)
    assert planner_payment(iv2, sp) == pytest.approx(2 * pay, rel=1e-12)
    assert planner_payment(iv, sp2) == pytest.approx(2 * pay, rel=1e-12)


def test_welfare_unit_weights():
    w = WelfareSpec.action_sum(3)
    sp = StrategyProfile([1.0, 2.0, 3.0], np.zeros((3, 3)))
    assert welfare(w, sp) == pytest.approx(6.0)


def test_welfare_weighted():
    w = WelfareSpec.weighted([2.0, 1.0])
    sp = StrategyProfile([0.5, 1.0], np.zeros((2, 2)))
    assert welfare(w, sp) == pytest.approx(2.0)


def test_welfare_link_sum_ordered_pairs():
    g = np.zeros((3, 3))
    g[0, 1] = g[1, 0] = 0.5
    w = WelfareSpec.link_sum()
    sp = StrategyProfile(np.zeros(3), g)
    assert welfare(w, sp) == pytest.approx(2.0)


@given(st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_utility_permutation_equivariance(seed):
    """Relabeling agents relabels utilities."""
    rng = np.random.default_rng(seed)
    n = 4
    s = rng.uniform(-0.5, 0.5, (n, n))
    s = 0.5 * (s + s.T)
    np.fill_diagonal(s, 0)
    p = GameParameters(
        n=n, b=rng.uniform(-1, 1, n), c=rng.uniform(0.5, 2, n), s=s,
        f=rng.uniform(0.5, 2, (n, n)), rho=rng.uniform(0, 1),
    )
    sig = np.abs(s) * 0.3
    iv = Intervention(rng.uniform(0, 1, n), sig, 1.0)
    g = rng.uniform(0, 1, (n, n))
    np.fill_diagonal(g, 0)
    sp = StrategyProfile(rng.uniform(0, 1, n), g)

    perm = rng.permutation(n)
    p2 = GameParameters(
        n=n, b=p.b[perm], c=p.c[perm], s=p.s[np.ix_(perm, perm)],
        f=p.f[np.ix_(perm, perm)], rho=p.rho,
    )
    iv2 = Intervention(iv.beta[perm], iv.sigma[np.ix_(perm, perm)], 1.0)
    sp2 = StrategyProfile(sp.a[perm], sp.g[np.ix_(perm, perm)])
    for new_i, old_i in enumerate(perm):
        assert agent_utility(p2, iv2, sp2, new_i) == pytest.approx(
            agent_utility(p, iv, sp, old_i), rel=1e-12, abs=1e-12
        )


def test_symmetry_enforced_on_construction():
    with pytest.raises(ValueError):
        GameParameters(
            n=2, b=[0, 0], c=[1, 1], s=[[0, 1.0], [0.5, 0]],
            f=np.ones((2, 2)), rho=0.0,
        )
    # tiny asymmetry within tolerance is averaged away
    p = GameParameters(
        n=2, b=[0, 0], c=[1, 1], s=[[0, 1.0], [1.0 + 1e-12, 0]],
        f=np.ones((2, 2)), rho=0.0,
    )
    assert p.s[0, 1] == p.s[1, 0]


def test_parameter_validation():
    with pytest.raises(ValueError):
        GameParameters(n=2, b=[0, 0], c=[1, -1], s=np.zeros((2, 2)),
                       f=np.ones((2, 2)), rho=0.0)
    with pytest.raises(ValueError):
        GameParameters(n=2, b=[0, 0], c=[1, 1], s=np.zeros((2, 2)),
                       f=np.ones((2, 2)), rho=-0.1)
    with pytest.raises(ValueError):
        Intervention([-0.1, 0.0], np.zeros((2, 2)), 1.0)
    with pytest.raises(ValueError):
        Intervention([0.0, 0.0], np.zeros((2, 2)), 0.0)
    with pytest.raises(ValueError):
        StrategyProfile([-1.0, 0.0], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        WelfareSpec("weighted-action-sum", None)
    with pytest.raises(ValueError):
        WelfareSpec("nonsense")


def test_instance_json_roundtrip(tmp_path):
    p = GameParameters(
        n=2, b=[0.1, 0.2], c=[1.0, 1.5], s=[[0, 0.3], [0.3, 0]],
        f=[[1, 2], [3, 1]], rho=0.25,
    )
    inst = Instance(p, WelfareSpec.weighted([1.0, 2.0]), 0.4,
                    power={"eta": [2, 2], "gamma": np.full((2, 2), 1.5),
                           "kappa": np.ones((2, 2)), "omega": np.ones((2, 2))})
    doc = instance_to_json(inst)
    back = instance_from_json(doc)
    assert back.params.n == 2
    np.testing.assert_allclose(back.params.b, p.b)
    np.testing.assert_allclose(back.params.s, p.s)
    np.testing.assert_allclose(back.welfare.weights, [1.0, 2.0])
    assert back.budget == 0.4
    assert back.power is not None and back.power["gamma"][0][1] == 1.5

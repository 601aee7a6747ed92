import numpy as np
import pytest

from netgame import (
    GameParameters,
    Intervention,
    SingularSystemError,
    StrategyProfile,
    WelfareSpec,
    build_spillover_matrix,
    d_actions_d_beta,
    d_actions_d_sigma,
    d_welfare,
    feedback_spectral_radius,
    finite_difference_oracle,
    solve_equilibrium,
)
from netgame.equilibrium import EquilibriumReport
from netgame.sensitivity import fd_welfare_derivative
from conftest import random_instance
from netgame.experiments import sample_sensitivity_case


def _report_from(a, g, binding_a=None, binding_g=None):
    a = np.asarray(a, dtype=float)
    g = np.asarray(g, dtype=float)
    n = a.shape[0]
    if binding_a is None:
        binding_a = a > 0
    if binding_g is None:
        binding_g = (g + g.T) > 0
        np.fill_diagonal(binding_g, False)
    return EquilibriumReport(
        profile=StrategyProfile(a, g),
        converged=True,
        iterations=1,
        foc_residual_max=0.0,
        binding_actions=np.asarray(binding_a, dtype=bool),
        binding_links=np.asarray(binding_g, dtype=bool),
        exists=True,
    )


def test_spillover_reduces_to_network_at_zero_actions():
    p = GameParameters(n=3, b=np.zeros(3), c=np.ones(3), s=np.zeros((3, 3)),
                       f=np.ones((3, 3)), rho=0.7)
    g = np.zeros((3, 3))
    g[0, 1] = g[1, 0] = 0.25
    report = _report_from(np.zeros(3), g, binding_a=np.ones(3, dtype=bool))
    spill = build_spillover_matrix(p, report)
    np.testing.assert_allclose(spill.matrix, report.profile.G)


@pytest.mark.parametrize("rho", [0.0, 0.3, 1.0])
def test_spillover_two_agent_formula(rho):
    p = GameParameters(n=2, b=np.zeros(2), c=np.ones(2), s=np.zeros((2, 2)),
                       f=np.ones((2, 2)), rho=rho)
    g = np.array([[0.0, 0.25], [0.25, 0.0]])  # G12 = 0.5
    report = _report_from([1.0, 2.0], g)
    m = build_spillover_matrix(p, report).matrix
    # ftilde = 2 everywhere with unit link costs
    assert m[0, 1] == pytest.approx(0.5 + 4 * rho)
    assert m[1, 0] == pytest.approx(0.5 + 4 * rho)
    assert m[0, 0] == pytest.approx(8 * rho)
    assert m[1, 1] == pytest.approx(2 * rho)


def test_dbeta_decoupled_inverse_costs():
    p = GameParameters(n=2, b=[1.0, 1.0], c=[2.0, 4.0], s=np.zeros((2, 2)),
                       f=np.ones((2, 2)), rho=0.0)
    iv = Intervention.zero(2, 1.0)
    report = solve_equilibrium(p, iv)
    np.testing.assert_allclose(d_actions_d_beta(p, iv, report, 0), [0.5, 0.0])
    np.testing.assert_allclose(d_actions_d_beta(p, iv, report, 1), [0.0, 0.25])


def test_dbeta_zero_for_nonbinding_agent():
    p = GameParameters(n=2, b=[1.0, -5.0], c=[1.0, 1.0], s=np.zeros((2, 2)),
                       f=np.ones((2, 2)), rho=0.1)
    iv = Intervention.zero(2, 1.0)
    report = solve_equilibrium(p, iv)
    assert not report.binding_actions[1]
    np.testing.assert_allclose(d_actions_d_beta(p, iv, report, 1), np.zeros(2))


def test_dsigma_zero_when_actions_zero():
    p = GameParameters(n=2, b=[-1.0, -1.0], c=[1.0, 1.0], s=[[0, 0.4], [0.4, 0]],
                       f=np.ones((2, 2)), rho=0.5)
    iv = Intervention.zero(2, 1.0)
    report = solve_equilibrium(p, iv)
    assert report.binding_links[0, 1]  # the link forms from s alone
    np.testing.assert_allclose(d_actions_d_sigma(p, iv, report, 0, 1), np.zeros(2))


def test_dsigma_symmetric_in_pair_order(two_agent_economy):
    p = two_agent_economy
    iv = Intervention.zero(2, 1.0)
    report = solve_equilibrium(p, iv)
    v1 = d_actions_d_sigma(p, iv, report, 0, 1)
    v2 = d_actions_d_sigma(p, iv, report, 1, 0)
    np.testing.assert_allclose(v1, v2, atol=1e-15)
    assert v1[0] == pytest.approx(v1[1], rel=1e-10)  # symmetric economy


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_analytic_beta_derivative_matches_fd(seed):
    n = 3 + seed % 2
    p, iv = sample_sensitivity_case(1000 + seed, n)
    report = solve_equilibrium(p, iv)
    for i in range(n):
        ana = d_actions_d_beta(p, iv, report, i)
        fd = finite_difference_oracle(p, iv, ("beta", i))
        np.testing.assert_allclose(ana, fd, rtol=1e-4, atol=1e-7)


@pytest.mark.parametrize("seed", [11, 12, 13])
def test_analytic_sigma_derivative_matches_fd(seed):
    n = 3
    p, iv = sample_sensitivity_case(3000 + seed, n)
    report = solve_equilibrium(p, iv)
    for (i, j) in [(0, 1), (0, 2), (1, 2)]:
        ana = d_actions_d_sigma(p, iv, report, i, j)
        fd = finite_difference_oracle(p, iv, ("sigma", i, j))
        np.testing.assert_allclose(ana, fd, rtol=1e-4, atol=1e-7)


def test_welfare_derivatives_and_identity():
    for seed in (41, 42, 43):
        n = 3
        p, iv = sample_sensitivity_case(seed, n)
        report = solve_equilibrium(p, iv)
        w = WelfareSpec.action_sum(n)
        sr = d_welfare(w, p, iv, report)
        # identity residual vanishes for action objectives
        for pair, res in sr.lemma_residual.items():
            assert abs(res) <= 1e-10
        # both welfare derivatives agree with finite differences
        for i in range(n):
            fd = fd_welfare_derivative(w, p, iv, ("beta", i))
            assert sr.dW_dbeta[i] == pytest.approx(fd, rel=1e-4, abs=1e-7)
        for pair in sr.dW_dsigma:
            fd = fd_welfare_derivative(w, p, iv, ("sigma", *pair))
            assert sr.dW_dsigma[pair] == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_no_spillover_channel_kills_sigma_welfare_effect():
    p = GameParameters(n=2, b=[1.0, 1.0], c=[1.0, 1.0], s=[[0, 0.4], [0.4, 0]],
                       f=np.ones((2, 2)), rho=0.0)
    iv = Intervention.zero(2, 1.0)
    report = solve_equilibrium(p, iv)
    sr = d_welfare(WelfareSpec.action_sum(2), p, iv, report)
    assert sr.dW_dsigma[(0, 1)] == pytest.approx(0.0, abs=1e-15)


def test_link_objective_residual_equals_direct_term():
    """For the link-weight objective the identity residual is exactly the
    direct response 2*ftilde of the subsidized link itself."""
    p, iv = sample_sensitivity_case(71, 3)
    report = solve_equilibrium(p, iv)
    sr = d_welfare(WelfareSpec.link_sum(), p, iv, report)
    ft = p.ftilde()
    for (i, j), res in sr.lemma_residual.items():
        assert res == pytest.approx(2.0 * ft[i, j], rel=1e-9)
        fd = fd_welfare_derivative(WelfareSpec.link_sum(), p, iv, ("sigma", i, j))
        assert sr.dW_dsigma[(i, j)] == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_singular_system_detected():
    # a = 0.4 each and G chosen so (C - M) restricted to both agents is singular
    p = GameParameters(n=2, b=np.zeros(2), c=np.ones(2), s=np.zeros((2, 2)),
                       f=np.ones((2, 2)), rho=1.0)
    a = np.array([0.4, 0.4])
    G_target = 1.0 - 4 * 0.4**2
    g = np.full((2, 2), G_target / 2)
    np.fill_diagonal(g, 0.0)
    report = _report_from(a, g)
    iv = Intervention.zero(2, 1.0)
    with pytest.raises(SingularSystemError):
        d_actions_d_beta(p, iv, report, 0)


def test_fd_step_sweep_has_plateau():
    p, iv = sample_sensitivity_case(81, 3)
    report = solve_equilibrium(p, iv)
    ana = d_actions_d_beta(p, iv, report, 0)
    errs = {}
    for h in (1e-4, 1e-5, 1e-6):
        fd = finite_difference_oracle(p, iv, ("beta", 0), h=h)
        errs[h] = float(np.max(np.abs(fd - ana)))
    # discretization error shrinks with h until the roundoff floor
    assert errs[1e-6] <= 1e-6
    assert errs[1e-4] <= 1e-3
    assert min(errs.values()) <= errs[1e-4] + 1e-12


def test_near_critical_system_blows_up_derivatives():
    """As the feedback radius approaches one the subsidy response explodes;
    the same instance far from criticality responds mildly."""

    def symmetric_instance(rho):
        return GameParameters(
            n=2, b=[0.5, 0.5], c=[1.0, 1.0], s=[[0, 0.3], [0.3, 0]],
            f=np.ones((2, 2)), rho=rho,
        )

    iv = Intervention.zero(2, 1.0)
    lo, hi = 0.05, 2.0
    rho_hot = None
    # push rho toward the existence boundary, where the feedback radius
    # approaches one
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        rep = solve_equilibrium(symmetric_instance(mid), iv)
        if not rep.exists:
            hi = mid
            continue
        radius = feedback_spectral_radius(symmetric_instance(mid), rep)
        if radius < 0.998:
            lo = mid
        else:
            rho_hot = mid
            break
    assert rho_hot is not None
    p_hot = symmetric_instance(rho_hot)
    rep_hot = solve_equilibrium(p_hot, iv)
    assert feedback_spectral_radius(p_hot, rep_hot) > 0.998
    hot = np.max(np.abs(d_actions_d_beta(p_hot, iv, rep_hot, 0)))

    p_cool = symmetric_instance(0.05)
    rep_cool = solve_equilibrium(p_cool, iv)
    cool = np.max(np.abs(d_actions_d_beta(p_cool, iv, rep_cool, 0)))
    assert hot > 50 * cool

    fd_hot = np.max(np.abs(finite_difference_oracle(p_hot, iv, ("beta", 0), h=1e-7)))
    assert fd_hot > 50 * cool

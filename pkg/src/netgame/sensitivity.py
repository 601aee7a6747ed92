"""Analytic equilibrium sensitivities to subsidies, with a finite-difference
cross-check.

Implicit differentiation of the binding first-order conditions shows that
equilibrium actions respond to subsidies through a single feedback matrix

    M_ij = G_ij + rho * ftilde_ij * a_i a_j     (i != j, binding links only)
    M_ii = rho * sum_k ftilde_ik * a_k^2        (binding links only)

with ftilde_ij = 1/f_ij + 1/f_ji.  On the binding action set S,

    da/dbeta_i  = column i of (C - rho M)^-1            (zero off S)
    da/dsigma_ij = rho * ftilde_ij * (a_j * col_i + a_i * col_j)

where each column term is present only when that endpoint's action
condition binds.  Welfare derivatives chain these with the objective's
action gradient; for the link-weight objective the gradient runs through
the binding links' response to actions and there is an extra direct term
2 * ftilde_ij in d welfare / d sigma_ij.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import equilibrium as eq
from .model import (
    ACTION_SUM,
    LINK_SUM,
    GameParameters,
    Intervention,
    WelfareSpec,
    welfare,
)

FD_STEP = 1e-6
SOLVE_RESIDUAL_TOL = 1e-8


class SingularSystemError(RuntimeError):
    """The feedback system (C - rho M) is singular or too ill conditioned for
    the derivative to be trusted; differentiability fails at this point."""


class OracleUnavailableError(RuntimeError):
    """A perturbed equilibrium needed by the finite-difference probe does not
    exist or did not converge."""


@dataclass
class SpilloverMatrix:
    matrix: np.ndarray  # (n, n), zeroed outside binding action rows/cols
    ftilde: np.ndarray  # (n, n), 1/f_ij + 1/f_ji

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def build_spillover_matrix(
    p: GameParameters, report: eq.EquilibriumReport
) -> SpilloverMatrix:
    """Assemble the feedback matrix at a converged equilibrium.

    Only binding links carry the rho * ftilde * a_i a_j response term
    (corner links do not move with marginal perturbations), and rows and
    columns of agents whose action sits at the corner are zeroed: those
    coordinates drop out of the differentiated system entirely.
    """
    if not report.converged:
        raise ValueError("spillover matrix requires a converged report")
    a = report.profile.a
    G = report.profile.G
    ft = p.ftilde()
    links = report.binding_links
    m = np.where(links, G + p.rho * ft * np.outer(a, a), 0.0)
    np.fill_diagonal(m, 0.0)
    diag = p.rho * np.sum(np.where(links, ft * (a**2)[None, :], 0.0), axis=1)
    m[np.diag_indices(p.n)] = diag
    active = report.binding_actions
    m[~active, :] = 0.0
    m[:, ~active] = 0.0
    return SpilloverMatrix(matrix=m, ftilde=ft)


def _solve_on_binding(
    p: GameParameters,
    spill: SpilloverMatrix,
    active: np.ndarray,
    rhs: np.ndarray,
) -> np.ndarray:
    """Solve (C - rho M) x = rhs restricted to the binding set, zero-padded
    back to full length.  One round of iterative refinement; raises
    SingularSystemError if the refined residual stays above tolerance."""
    n = p.n
    rhs = np.atleast_2d(rhs.T).T  # (n, k)
    out = np.zeros_like(rhs)
    if not active.any():
        return out
    A = np.diag(p.c)[np.ix_(active, active)] - p.rho * spill.matrix[
        np.ix_(active, active)
    ]
    b_sub = rhs[active, :]
    try:
        x = np.linalg.solve(A, b_sub)
        x += np.linalg.solve(A, b_sub - A @ x)
    except np.linalg.LinAlgError as err:
        raise SingularSystemError(str(err)) from None
    resid = np.max(np.abs(b_sub - A @ x))
    if not np.isfinite(resid) or resid > SOLVE_RESIDUAL_TOL * max(
        1.0, float(np.max(np.abs(b_sub)))
    ):
        raise SingularSystemError(
            f"refined solve residual {resid:.3e} exceeds tolerance"
        )
    out[active, :] = x
    return out


def d_actions_d_beta(
    p: GameParameters, iv: Intervention, report: eq.EquilibriumReport, i: int
) -> np.ndarray:
    """Derivative of all equilibrium actions in agent i's action subsidy.
    Zero when i's own action condition does not bind."""
    spill = build_spillover_matrix(p, report)
    if not report.binding_actions[i]:
        return np.zeros(p.n)
    rhs = np.zeros((p.n, 1))
    rhs[i, 0] = 1.0
    return _solve_on_binding(p, spill, report.binding_actions, rhs)[:, 0]


def d_actions_d_sigma(
    p: GameParameters, iv: Intervention, report: eq.EquilibriumReport, i: int, j: int
) -> np.ndarray:
    """Derivative of equilibrium actions in the (i, j) link subsidy.

    Zero when the link is at its corner; when only one endpoint's action
    condition binds only that endpoint's column contributes (and the other
    endpoint's action is zero, so the vector vanishes anyway).
    """
    if i == j:
        raise ValueError("link subsidy needs two distinct agents")
    spill = build_spillover_matrix(p, report)
    if not report.binding_links[i, j]:
        return np.zeros(p.n)
    a = report.profile.a
    rhs = np.zeros((p.n, 1))
    if report.binding_actions[i]:
        rhs[i, 0] += a[j]
    if report.binding_actions[j]:
        rhs[j, 0] += a[i]
    col = _solve_on_binding(p, spill, report.binding_actions, rhs)[:, 0]
    return p.rho * spill.ftilde[i, j] * col


def welfare_action_gradient(
    w: WelfareSpec, p: GameParameters, report: eq.EquilibriumReport
) -> np.ndarray:
    """Gradient of the objective with respect to actions along the
    equilibrium manifold.

    For the action objective this is just the weight vector.  The
    link-weight objective depends on actions only through binding links,
    each responding at rate ftilde * rho * a_other and counted twice in the
    ordered-pair sum.
    """
    if w.kind == ACTION_SUM:
        return w.weights.copy()
    a = report.profile.a
    ft = p.ftilde()
    contrib = np.where(report.binding_links, ft * a[None, :], 0.0)
    return 2.0 * p.rho * np.sum(contrib, axis=1)


def welfare_direct_sigma(
    w: WelfareSpec, p: GameParameters, report: eq.EquilibriumReport, i: int, j: int
) -> float:
    """Part of d welfare / d sigma_ij not mediated by actions: the targeted
    link's own response, nonzero only for the link-weight objective."""
    if w.kind == LINK_SUM and report.binding_links[i, j]:
        return 2.0 * p.ftilde()[i, j]
    return 0.0


@dataclass
class SensitivityReport:
    """Full analytic derivative bundle at one equilibrium.

    ``da_dbeta`` holds da/dbeta_i in column i.  Pair-indexed entries use
    unordered pairs (i < j).  ``lemma_residual`` is
    d welfare/d sigma_ij - rho*ftilde_ij*(dW/dbeta_i * a_j + dW/dbeta_j * a_i),
    reported for every binding link: it vanishes for action objectives and
    equals the direct term 2*ftilde_ij for the link-weight objective.
    """

    da_dbeta: np.ndarray
    da_dsigma: dict[tuple[int, int], np.ndarray]
    dW_dbeta: np.ndarray
    dW_dsigma: dict[tuple[int, int], float]
    lemma_residual: dict[tuple[int, int], float] = field(default_factory=dict)
    spillover: SpilloverMatrix | None = None
    well_posed: bool = True


def d_welfare(
    w: WelfareSpec,
    p: GameParameters,
    iv: Intervention,
    report: eq.EquilibriumReport,
) -> SensitivityReport:
    """Assemble all action and welfare derivatives at a converged report.

    Raises SingularSystemError when the feedback system cannot be solved to
    tolerance.
    """
    spill = build_spillover_matrix(p, report)
    active = report.binding_actions
    a = report.profile.a
    n = p.n

    rhs = np.eye(n)
    rhs[:, ~active] = 0.0
    da_dbeta = _solve_on_binding(p, spill, active, rhs)
    da_dbeta[:, ~active] = 0.0

    grad_a = welfare_action_gradient(w, p, report)
    dW_dbeta = grad_a @ da_dbeta

    da_dsigma: dict[tuple[int, int], np.ndarray] = {}
    dW_dsigma: dict[tuple[int, int], float] = {}
    lemma: dict[tuple[int, int], float] = {}
    ft = spill.ftilde
    for i in range(n):
        for j in range(i + 1, n):
            if report.binding_links[i, j]:
                vec = np.zeros(n)
                if active[i]:
                    vec += a[j] * da_dbeta[:, i]
                if active[j]:
                    vec += a[i] * da_dbeta[:, j]
                vec *= p.rho * ft[i, j]
            else:
                vec = np.zeros(n)
            da_dsigma[(i, j)] = vec
            direct = welfare_direct_sigma(w, p, report, i, j)
            dW_dsigma[(i, j)] = direct + float(grad_a @ vec)
            if report.binding_links[i, j]:
                lemma[(i, j)] = dW_dsigma[(i, j)] - p.rho * ft[i, j] * (
                    dW_dbeta[i] * a[j] + dW_dbeta[j] * a[i]
                )
    return SensitivityReport(
        da_dbeta=da_dbeta,
        da_dsigma=da_dsigma,
        dW_dbeta=dW_dbeta,
        dW_dsigma=dW_dsigma,
        lemma_residual=lemma,
        spillover=spill,
        well_posed=True,
    )


def feedback_spectral_radius(p: GameParameters, report: eq.EquilibriumReport) -> float:
    """Spectral radius of rho * C^-1 M on the binding set; below one means
    the differentiated system is a contraction at the equilibrium."""
    spill = build_spillover_matrix(p, report)
    active = report.binding_actions
    if not active.any():
        return 0.0
    sub = spill.matrix[np.ix_(active, active)]
    scale = 1.0 / np.sqrt(p.c[active])
    sym = p.rho * (scale[:, None] * sub * scale[None, :])
    return float(np.max(np.abs(np.linalg.eigvalsh(sym))))


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def _perturbed(iv: Intervention, selector, h: float) -> Intervention:
    beta = iv.beta.copy()
    sigma = iv.sigma.copy()
    if selector[0] == "beta":
        beta[selector[1]] += h
    elif selector[0] == "sigma":
        _, i, j = selector
        sigma[i, j] += h
        sigma[j, i] += h
    else:
        raise ValueError(f"unknown selector {selector!r}")
    # perturbations may step slightly negative; size check only
    return Intervention(beta, sigma, iv.budget, allow_negative=True)


def _solve_or_unavailable(p: GameParameters, iv: Intervention) -> eq.EquilibriumReport:
    try:
        report = eq.solve_equilibrium(p, iv)
    except eq.NonConvergentError as err:
        raise OracleUnavailableError(str(err)) from None
    if not report.exists:
        raise OracleUnavailableError("perturbed equilibrium does not exist")
    return report


def finite_difference_oracle(
    p: GameParameters,
    iv: Intervention,
    selector: tuple,
    h: float = FD_STEP,
) -> np.ndarray:
    """Central difference of the equilibrium action map in one subsidy
    coordinate.  ``selector`` is ("beta", i) or ("sigma", i, j); a sigma
    perturbation moves both symmetric entries together since they are a
    single policy parameter."""
    plus = _solve_or_unavailable(p, _perturbed(iv, selector, +h))
    minus = _solve_or_unavailable(p, _perturbed(iv, selector, -h))
    return (plus.profile.a - minus.profile.a) / (2.0 * h)


def fd_welfare_derivative(
    w: WelfareSpec,
    p: GameParameters,
    iv: Intervention,
    selector: tuple,
    h: float = FD_STEP,
) -> float:
    """Central difference of equilibrium welfare in one subsidy coordinate."""
    plus = _solve_or_unavailable(p, _perturbed(iv, selector, +h))
    minus = _solve_or_unavailable(p, _perturbed(iv, selector, -h))
    return (welfare(w, plus.profile) - welfare(w, minus.profile)) / (2.0 * h)

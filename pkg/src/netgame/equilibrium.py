"""Best-response equilibrium solver and first-order-condition checks.

The solved equilibrium is the one selected by iterating best responses
from the all-zero profile.  With ``rho >= 0`` the joint best-response map
is monotone in the profile and in the subsidies, so that iteration climbs
coordinatewise to the least fixed point; it either converges or the
actions blow up past a divergence cap, in which case no equilibrium is
reported and downstream welfare is minus infinity.

At an interior optimum the first-order conditions pin the profile down:
on the set S of agents whose action condition binds,

    (C_S - rho * G_S) a_S = (b + beta)_S

and every binding link intensity satisfies

    g_ij = (rho * a_i a_j + s_ij + sigma_ij) / f_ij.

``verify_proposition1`` measures residuals of both systems and the
one-sided sign conditions at corner coordinates.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .model import GameParameters, Intervention, StrategyProfile, WelfareSpec, welfare

TOL_FIXPOINT = 1e-12
MAX_ITERATIONS = 100_000
ACTION_CAP = 1e6  # actions past this count as divergence, not slow progress
BINDING_TOL = 1e-9
FOC_TOL = 1e-8

_ENV_MAX_ITER = "NETGAME_MAX_ITER"


class NonConvergentError(RuntimeError):
    """Iteration hit the cap while bounded (no divergence past ACTION_CAP)."""


def resolved_max_iter(max_iter: int | None = None) -> int:
    """Explicit argument wins; else the NETGAME_MAX_ITER env var; else default."""
    if max_iter is not None:
        return int(max_iter)
    env = os.environ.get(_ENV_MAX_ITER)
    return int(env) if env else MAX_ITERATIONS


@dataclass
class EquilibriumReport:
    """Converged profile plus diagnostics.

    ``binding_actions`` and ``binding_links`` mark coordinates classified as
    interior (value above BINDING_TOL; exact-zero ties count as corners).
    ``exists`` is False when iteration diverged, in which case ``profile``
    is the last iterate and is not meaningful.
    """

    profile: StrategyProfile
    converged: bool
    iterations: int
    foc_residual_max: float
    binding_actions: np.ndarray  # (n,) bool
    binding_links: np.ndarray  # (n, n) bool, symmetric, zero diagonal
    exists: bool

    @property
    def binding_action_set(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.binding_actions))

    @property
    def binding_link_pairs(self) -> tuple[tuple[int, int], ...]:
        i_idx, j_idx = np.nonzero(np.triu(self.binding_links, 1))
        return tuple((int(i), int(j)) for i, j in zip(i_idx, j_idx))

    def to_json(self) -> dict:
        return {
            "a": self.profile.a.tolist(),
            "g": self.profile.g.tolist(),
            "converged": self.converged,
            "iterations": self.iterations,
            "foc_residual_max": self.foc_residual_max,
            "binding_actions": list(self.binding_action_set),
            "binding_links": [list(pr) for pr in self.binding_link_pairs],
            "exists": self.exists,
        }


def best_response_actions(
    p: GameParameters, iv: Intervention, sp: StrategyProfile
) -> np.ndarray:
    """Optimal action of every agent holding links and others' actions fixed:
    a_i' = max(0, (b_i + beta_i + rho * sum_j G_ij a_j) / c_i)."""
    marginal = p.b + iv.beta + p.rho * (sp.G @ sp.a)
    return np.maximum(0.0, marginal / p.c)


def best_response_links(
    p: GameParameters, iv: Intervention, sp: StrategyProfile
) -> np.ndarray:
    """Optimal directed link intensities holding actions fixed:
    g_ij' = max(0, (s_ij + sigma_ij + rho * a_i a_j) / f_ij)."""
    value = p.s + iv.sigma + p.rho * np.outer(sp.a, sp.a)
    np.fill_diagonal(value, 0.0)
    return np.maximum(0.0, value / p.f)


def _classify_binding(
    p: GameParameters, iv: Intervention, a: np.ndarray, g: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    binding_a = a > BINDING_TOL
    # g_ij > 0 iff g_ji > 0 (same numerator); threshold both directions jointly
    binding_g = (g > BINDING_TOL) | (g.T > BINDING_TOL)
    np.fill_diagonal(binding_g, False)
    return binding_a, binding_g


def solve_equilibrium(
    p: GameParameters,
    iv: Intervention,
    *,
    tol: float = TOL_FIXPOINT,
    max_iter: int | None = None,
    start: StrategyProfile | None = None,
) -> EquilibriumReport:
    """Iterate best responses to the selected equilibrium.

    Each round updates all actions simultaneously (holding links fixed) and
    then all link intensities (at the new actions); the order-free updates
    make the run deterministic.  ``start`` may be supplied only with a
    profile known to lie below the target fixed point (for example an
    equilibrium under weaker subsidies); the default zero start always
    qualifies.  Raises NonConvergentError when the iteration cap is reached
    without divergence.
    """
    limit = resolved_max_iter(max_iter)
    if start is None:
        a = np.zeros(p.n)
        g = np.zeros((p.n, p.n))
    else:
        a = start.a.copy()
        g = start.g.copy()
    b_eff = p.b + iv.beta
    link_base = p.s + iv.sigma
    delta = np.inf
    for it in range(1, limit + 1):
        # same maps as best_response_actions / best_response_links, on raw
        # arrays to keep the loop allocation-light
        G = g + g.T
        a_new = np.maximum(0.0, (b_eff + p.rho * (G @ a)) / p.c)
        value = link_base + p.rho * np.outer(a_new, a_new)
        np.fill_diagonal(value, 0.0)
        g_new = np.maximum(0.0, value / p.f)
        if np.max(a_new) > ACTION_CAP:
            return EquilibriumReport(
                profile=StrategyProfile(a_new, g_new),
                converged=False,
                iterations=it,
                foc_residual_max=np.inf,
                binding_actions=np.zeros(p.n, dtype=bool),
                binding_links=np.zeros((p.n, p.n), dtype=bool),
                exists=False,
            )
        delta = max(
            float(np.max(np.abs(a_new - a))), float(np.max(np.abs(g_new - g)))
        )
        a, g = a_new, g_new
        if delta < tol:
            profile = StrategyProfile(a, g)
            binding_a, binding_g = _classify_binding(p, iv, a, g)
            report = EquilibriumReport(
                profile=profile,
                converged=True,
                iterations=it,
                foc_residual_max=0.0,
                binding_actions=binding_a,
                binding_links=binding_g,
                exists=True,
            )
            report.foc_residual_max = _foc_residual(p, iv, report)
            return report
    raise NonConvergentError(
        f"no fixed point within {limit} iterations (last sup-change {delta:.3e})"
    )


def _foc_residual(p: GameParameters, iv: Intervention, report) -> float:
    a, G, g = report.profile.a, report.profile.G, report.profile.g
    res = 0.0
    action_res = p.c * a - (p.b + iv.beta) - p.rho * (G @ a)
    if report.binding_actions.any():
        res = float(np.max(np.abs(action_res[report.binding_actions])))
    link_target = (p.rho * np.outer(a, a) + p.s + iv.sigma) / p.f
    link_res = np.abs(g - link_target)
    if report.binding_links.any():
        res = max(res, float(np.max(link_res[report.binding_links])))
    return res


@dataclass
class Proposition1Residuals:
    """Max absolute residuals of the interior systems plus the largest
    positive marginal utility found at a corner coordinate (a one-sided
    optimality violation if above tolerance)."""

    action_residual_max: float
    link_residual_max: float
    corner_violation_max: float

    @property
    def overall(self) -> float:
        return max(
            self.action_residual_max, self.link_residual_max, self.corner_violation_max
        )


def verify_proposition1(
    p: GameParameters, iv: Intervention, report: EquilibriumReport
) -> Proposition1Residuals:
    """Check the first-order characterization at a converged report."""
    if not report.converged:
        raise ValueError("verification requires a converged report")
    a, g, G = report.profile.a, report.profile.g, report.profile.G
    bind_a, bind_g = report.binding_actions, report.binding_links

    action_foc = p.c * a - (p.b + iv.beta) - p.rho * (G @ a)
    action_res = (
        float(np.max(np.abs(action_foc[bind_a]))) if bind_a.any() else 0.0
    )

    link_value = p.s + iv.sigma + p.rho * np.outer(a, a)
    np.fill_diagonal(link_value, 0.0)
    link_res = (
        float(np.max(np.abs((g - link_value / p.f))[bind_g])) if bind_g.any() else 0.0
    )

    corner = 0.0
    nb_a = ~bind_a
    if nb_a.any():
        # marginal utility of raising an action off the corner must be <= 0
        corner = max(corner, float(np.max((p.b + iv.beta + p.rho * (G @ a))[nb_a])))
    nb_g = ~bind_g
    np.fill_diagonal(nb_g, False)
    if nb_g.any():
        corner = max(corner, float(np.max(link_value[nb_g])))
    return Proposition1Residuals(action_res, link_res, max(0.0, corner))


def equilibrium_welfare(w: WelfareSpec, report: EquilibriumReport) -> float:
    """Planner objective at the report; minus infinity when no equilibrium."""
    if not report.exists:
        return -np.inf
    return welfare(w, report.profile)

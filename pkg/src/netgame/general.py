"""Power-family generalization of the game's cost and spillover shapes.

Agent i pays C_i(a) = c_i a^eta_i / eta_i for actions (eta_i >= 2) and
F_ij(g) = f_ij g^gamma_ij per directed link (gamma_ij > 1), and the
spillover between i and j runs through increasing transforms of the two
actions: i contributes u_ij(a_i) = omega_ij a_i^kappa_ij and j contributes
the partner transform u_ji(a_j), so utility is

    b_i a_i + rho * sum_j G_ij u_ij(a_i) u_ji(a_j) - C_i(a_i)
    + sum_j s_ij G_ij - F_ij(g_ij)   (+ subsidy terms).

Exponent thresholds classify the shapes: a link cost is super-quadratic
when g F''(g) >= F'(g) (power exponent >= 2, sub-quadratic below) and a
spillover transform is super-linear when a u'(a) >= u(a) (exponent >= 1,
sub-linear below).  The classification decides which side of the
optimal-subsidy structure applies; ``check_theorem3`` verifies both
regimes at computed optima.

The quadratic game is the member (eta, gamma, kappa, omega) = (2, 2, 1, 1)
with each link-cost coefficient halved, since F = f g^2 here versus
f g^2 / 2 there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import equilibrium as eq
from . import planner as pl
from .model import (
    GameParameters,
    Instance,
    Intervention,
    StrategyProfile,
    WelfareSpec,
    planner_payment,
    welfare,
)

SUPER_QUADRATIC = "super-quadratic"
SUB_QUADRATIC = "sub-quadratic"
SUPER_LINEAR = "super-linear"
SUB_LINEAR = "sub-linear"
BOTH = "both"

FD_STEP = 1e-6
_BISECT_STEPS = 60  # bracket is O(1) wide, so this is far below solver tolerance
_BISECT_STEPS_COARSE = 26  # used while the outer fixed point is still far away


class IllPosedBRError(RuntimeError):
    """Marginal utility of an action stays positive up to the action cap:
    the agent's problem has no bracketed optimum (utility unbounded)."""


@dataclass(frozen=True)
class PowerFamilySpec:
    """Exponents and spillover coefficients; cost coefficients come from the
    accompanying GameParameters (c for actions, f for links)."""

    eta: np.ndarray  # (n,) action cost exponents, >= 2
    gamma: np.ndarray  # (n, n) link cost exponents per directed pair, > 1
    kappa: np.ndarray  # (n, n) spillover exponents per ordered pair, > 0
    omega: np.ndarray  # (n, n) spillover coefficients per ordered pair, > 0

    def __post_init__(self):
        eta = np.array(self.eta, dtype=float)
        n = eta.shape[0]
        object.__setattr__(self, "eta", eta)
        for name in ("gamma", "kappa", "omega"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")
            object.__setattr__(self, name, arr)
        if np.any(eta < 2):
            raise ValueError("action cost exponents eta must be >= 2")
        off = ~np.eye(n, dtype=bool)
        if np.any(self.gamma[off] <= 1):
            raise ValueError("link cost exponents gamma must exceed 1")
        if np.any(self.kappa[off] <= 0) or np.any(self.omega[off] <= 0):
            raise ValueError("spillover exponents and coefficients must be positive")

    @property
    def n(self) -> int:
        return self.eta.shape[0]

    @classmethod
    def uniform(
        cls, n: int, *, eta: float = 2.0, gamma: float = 2.0, kappa: float = 1.0,
        omega: float = 1.0,
    ) -> "PowerFamilySpec":
        return cls(
            np.full(n, eta),
            np.full((n, n), gamma),
            np.full((n, n), kappa),
            np.full((n, n), omega),
        )

    @classmethod
    def from_instance(cls, inst: Instance) -> "PowerFamilySpec":
        if inst.power is None:
            raise ValueError("instance carries no power-family block")
        blk = inst.power
        return cls(blk["eta"], blk["gamma"], blk["kappa"], blk["omega"])


def quadratic_embedding(p: GameParameters) -> tuple[PowerFamilySpec, GameParameters]:
    """Represent a quadratic economy inside the power family: halve the link
    cost coefficients so F = (f/2) g^2 matches f g^2 / 2."""
    spec = PowerFamilySpec.uniform(p.n)
    p_half = GameParameters(n=p.n, b=p.b, c=p.c, s=p.s, f=p.f / 2.0, rho=p.rho)
    return spec, p_half


def classify_cost(gamma: float) -> str:
    """Side of g F''(g) >= F'(g) a power link cost falls on."""
    if gamma == 2.0:
        return BOTH
    return SUPER_QUADRATIC if gamma > 2.0 else SUB_QUADRATIC


def classify_spillover(kappa: float) -> str:
    """Side of a u'(a) >= u(a) a power spillover transform falls on."""
    if kappa == 1.0:
        return BOTH
    return SUPER_LINEAR if kappa > 1.0 else SUB_LINEAR


def general_agent_utility(
    spec: PowerFamilySpec,
    p: GameParameters,
    iv: Intervention,
    sp: StrategyProfile,
    i: int,
) -> float:
    if not 0 <= i < p.n:
        raise IndexError(f"agent index {i} out of range for n={p.n}")
    a, g, G = sp.a, sp.g, sp.G
    u_i = spec.omega[i] * a[i] ** spec.kappa[i]  # u_ij(a_i) for all j
    u_partner = spec.omega[:, i] * a ** spec.kappa[:, i]  # u_ji(a_j) for all j
    spill = p.rho * float(np.sum(np.delete(G[i] * u_i * u_partner, i)))
    own = (p.b[i] + iv.beta[i]) * a[i] - p.c[i] * a[i] ** spec.eta[i] / spec.eta[i]
    links = float((p.s[i] + iv.sigma[i]) @ G[i])
    link_cost = float(np.sum(np.delete(p.f[i] * g[i] ** spec.gamma[i], i)))
    return own + spill + links - link_cost


def _partner_values(spec: PowerFamilySpec, a: np.ndarray) -> np.ndarray:
    """Matrix with entry (i, j) = u_ji(a_j), the partner's transform."""
    with np.errstate(divide="ignore", invalid="ignore"):
        u = spec.omega * a[:, None] ** spec.kappa  # (j, i) entry u_ji(a_j) at [j,i]
    np.fill_diagonal(u, 0.0)
    return u.T


def _action_phi(
    spec: PowerFamilySpec,
    p: GameParameters,
    b_eff: np.ndarray,
    weight: np.ndarray,
    a: np.ndarray,
) -> np.ndarray:
    """Marginal cost minus marginal benefit of the own action, vectorized:
    c_i a^(eta_i - 1) - b_eff_i - rho * sum_j weight_ij a^(kappa_ij - 1)."""
    with np.errstate(all="ignore"):
        pw = a[:, None] ** (spec.kappa - 1.0)
        spill = np.where(weight > 0.0, weight * pw, 0.0).sum(axis=1)
        own = p.c * a ** (spec.eta - 1.0)
    return own - b_eff - p.rho * spill


def _action_best_response(
    spec: PowerFamilySpec,
    p: GameParameters,
    iv: Intervention,
    a: np.ndarray,
    G: np.ndarray,
    steps: int = _BISECT_STEPS,
) -> np.ndarray:
    """Root of the own-action first-order condition per agent, bracketed
    just above the previous iterate and bisected simultaneously for all
    agents.

    Returns the lower bracket edge, an underestimate of the root, so that
    iterates stay below the target fixed point and remain valid monotone
    warm starts.  Agents whose marginal utility at zero is nonpositive sit
    at the corner when every own spillover exponent is at most one (the
    condition is then monotone); the rare corner case with a convex
    exponent is resolved by a scalar scan comparing utilities.  Raises
    IllPosedBRError when the condition is still negative at the action cap.
    """
    b_eff = p.b + iv.beta
    partner = _partner_values(spec, a)
    weight = G * spec.omega * spec.kappa * partner  # coefficient on a^(kappa-1)
    weight = np.where(np.eye(p.n, dtype=bool), 0.0, weight)
    km1 = spec.kappa - 1.0
    em1 = spec.eta - 1.0
    rho_w = np.where(weight > 0.0, p.rho * weight, 0.0)
    positive = weight > 0.0

    def phi(avec: np.ndarray) -> np.ndarray:
        pw = avec[:, None] ** km1
        pw[~positive] = 0.0
        return p.c * avec**em1 - b_eff - (rho_w * pw).sum(axis=1)

    with np.errstate(all="ignore"):
        # marginal utility at zero: +inf with any concave (kappa < 1) coupling
        concave_coupled = ((spec.kappa < 1.0) & positive).any(axis=1)
        unit = np.where(spec.kappa == 1.0, weight, 0.0).sum(axis=1)
        m0 = b_eff + p.rho * unit
        interior = concave_coupled | (m0 > 0.0)

        # widen the bracket as needed; one that cannot close below the cap
        # is an unbounded problem
        hi = np.maximum(1.0, 4.0 * a)
        phi_hi = phi(hi)
        for _ in range(64):
            growable = (phi_hi < 0) & (hi < eq.ACTION_CAP)
            if not np.any(growable):
                break
            hi = np.where(growable, np.minimum(hi * 8.0, eq.ACTION_CAP), hi)
            phi_hi = phi(hi)
        if np.any((phi_hi < 0) & interior):
            bad = int(np.argmax((phi_hi < 0) & interior))
            raise IllPosedBRError(
                f"agent {bad}: marginal utility still positive at the action cap"
            )

        lo = np.zeros(p.n)
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            neg = phi(mid) < 0
            lo = np.where(neg, mid, lo)
            hi = np.where(neg, hi, mid)
    out = np.where(interior, lo, 0.0)

    convex_corner = ~interior & ((spec.kappa > 1.0) & (weight > 0.0)).any(axis=1)
    for i in np.flatnonzero(convex_corner):
        out[i] = _corner_or_dip(spec, p, b_eff, weight, i)
    return out


def _corner_or_dip(spec, p, b_eff, weight, i) -> float:
    """Corner candidate with convex spillovers: the condition can dip
    negative away from zero, so scan, bracket the upper crossing, and keep
    whichever of zero and the crossing yields higher utility."""
    grid = np.geomspace(1e-9, eq.ACTION_CAP, 160)

    def phi(val: float) -> float:
        with np.errstate(all="ignore"):
            pw = val ** (spec.kappa[i] - 1.0)
            spill = float(np.where(weight[i] > 0.0, weight[i] * pw, 0.0).sum())
        return p.c[i] * val ** (spec.eta[i] - 1.0) - b_eff[i] - p.rho * spill

    vals = np.array([phi(v) for v in grid])
    if np.all(vals >= 0):
        return 0.0
    last_neg = int(np.max(np.flatnonzero(vals < 0)))
    lo, hi = grid[last_neg], grid[min(last_neg + 1, grid.size - 1)]
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        if phi(mid) < 0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)

    def util(val: float) -> float:
        spill = float(
            np.sum(
                np.where(
                    weight[i] > 0.0,
                    weight[i] / spec.kappa[i] * val ** spec.kappa[i],
                    0.0,
                )
            )
        )
        return (
            b_eff[i] * val
            + p.rho * spill
            - p.c[i] * val ** spec.eta[i] / spec.eta[i]
        )

    return root if util(root) > util(0.0) else 0.0


def general_best_response(
    spec: PowerFamilySpec,
    p: GameParameters,
    iv: Intervention,
    sp: StrategyProfile,
) -> StrategyProfile:
    """One joint best-response step: actions against the current profile,
    then link intensities against the new actions.

    Links are in closed form from F'(g) = s + sigma + rho u_ij u_ji:
    g = (value / (f gamma))^(1/(gamma-1)) where the value is positive.
    """
    a_new = _action_best_response(spec, p, iv, sp.a, sp.G)
    g_new = _link_best_response(spec, p, iv, a_new)
    return StrategyProfile(a_new, g_new)


def _link_best_response(
    spec: PowerFamilySpec, p: GameParameters, iv: Intervention, a: np.ndarray
) -> np.ndarray:
    with np.errstate(all="ignore"):
        u_own = spec.omega * a[:, None] ** spec.kappa  # u_ij(a_i)
    np.fill_diagonal(u_own, 0.0)
    value = p.s + iv.sigma + p.rho * u_own * u_own.T
    np.fill_diagonal(value, 0.0)
    base = np.maximum(0.0, value) / (p.f * spec.gamma)
    g = base ** (1.0 / (spec.gamma - 1.0))
    np.fill_diagonal(g, 0.0)
    return g


def solve_general_equilibrium(
    spec: PowerFamilySpec,
    p: GameParameters,
    iv: Intervention,
    *,
    tol: float = eq.TOL_FIXPOINT,
    max_iter: int | None = None,
    start: StrategyProfile | None = None,
) -> eq.EquilibriumReport:
    """Best responses from the zero profile, as in the quadratic solver."""
    limit = eq.resolved_max_iter(max_iter)
    n = p.n
    if start is None:
        a = np.zeros(n)
        g = np.zeros((n, n))
    else:
        a, g = start.a.copy(), start.g.copy()
    delta = np.inf
    fine = False
    for it in range(1, limit + 1):
        # cheap inner root precision far from the fixed point; convergence
        # may only be declared on a full-precision round, since coarse
        # quantization can freeze successive iterates
        used_fine = fine
        steps = _BISECT_STEPS if fine else _BISECT_STEPS_COARSE
        a_new = _action_best_response(spec, p, iv, a, g + g.T, steps=steps)
        g_new = _link_best_response(spec, p, iv, a_new)
        if np.max(a_new) > 0.99 * eq.ACTION_CAP:
            return eq.EquilibriumReport(
                profile=StrategyProfile(a_new, g_new),
                converged=False,
                iterations=it,
                foc_residual_max=np.inf,
                binding_actions=np.zeros(n, dtype=bool),
                binding_links=np.zeros((n, n), dtype=bool),
                exists=False,
            )
        delta = max(float(np.max(np.abs(a_new - a))), float(np.max(np.abs(g_new - g))))
        a, g = a_new, g_new
        if delta < 1e-4:
            fine = True
        if delta < tol and used_fine:
            binding_a = a > eq.BINDING_TOL
            binding_g = (g > eq.BINDING_TOL) | (g.T > eq.BINDING_TOL)
            np.fill_diagonal(binding_g, False)
            report = eq.EquilibriumReport(
                profile=StrategyProfile(a, g),
                converged=True,
                iterations=it,
                foc_residual_max=0.0,
                binding_actions=binding_a,
                binding_links=binding_g,
                exists=True,
            )
            report.foc_residual_max = _general_foc_residual(spec, p, iv, report)
            return report
    raise eq.NonConvergentError(
        f"no fixed point within {limit} iterations (last sup-change {delta:.3e})"
    )


def _general_foc_residual(spec, p, iv, report) -> float:
    a, g, G = report.profile.a, report.profile.g, report.profile.G
    b_eff = p.b + iv.beta
    partner = _partner_values(spec, a)
    weight = G * spec.omega * spec.kappa * partner
    weight = np.where(np.eye(p.n, dtype=bool), 0.0, weight)
    res = 0.0
    if report.binding_actions.any():
        phi = _action_phi(spec, p, b_eff, weight, a)
        res = float(np.max(np.abs(phi[report.binding_actions])))
    if report.binding_links.any():
        with np.errstate(all="ignore"):
            u_own = spec.omega * a[:, None] ** spec.kappa
        np.fill_diagonal(u_own, 0.0)
        value = p.s + iv.sigma + p.rho * u_own * u_own.T
        fprime = p.f * spec.gamma * g ** (spec.gamma - 1.0)
        link_res = np.abs(fprime - value)[report.binding_links]
        res = max(res, float(np.max(link_res)))
    return res


class PowerAdapter:
    """Engine adapter for the power family; welfare and payment gradients
    come from central finite differences of the cold solver (the analytic
    feedback system is not implemented for this family)."""

    def __init__(
        self,
        spec: PowerFamilySpec,
        p: GameParameters,
        w: WelfareSpec,
        budget: float,
        fd_step: float = FD_STEP,
    ):
        self.spec = spec
        self.p = p
        self.w = w
        self.budget = budget
        self.n = p.n
        self.pairs = pl.pair_list(p.n)
        self.m = p.n + len(self.pairs)
        self.fd_step = fd_step

    def _intervention(self, x, allow_negative=False) -> Intervention:
        return pl.vector_to_intervention(
            x, self.n, self.budget, allow_negative=allow_negative
        )

    def solve(self, x: np.ndarray, warm: StrategyProfile | None = None):
        iv = self._intervention(x, allow_negative=True)
        try:
            report = solve_general_equilibrium(self.spec, self.p, iv, start=warm)
        except (eq.NonConvergentError, IllPosedBRError):
            return None
        if not report.exists:
            return None
        return pl.SolveState(
            welfare=welfare(self.w, report.profile),
            payment=planner_payment(iv, report.profile),
            profile=report.profile,
            report=report,
        )

    def cold_solve(self, x: np.ndarray):
        iv = self._intervention(x)
        report = solve_general_equilibrium(self.spec, self.p, iv)
        return (
            iv,
            report,
            welfare(self.w, report.profile),
            planner_payment(iv, report.profile),
        )

    def actions_of(self, state) -> np.ndarray:
        return state.report.profile.a

    def gradients(self, x: np.ndarray, state):
        """Forward differences warm-started from the current equilibrium.

        A bumped-up subsidy vector dominates the current one, so the current
        profile is a valid monotone starting point for every probe; the
        one-sided bias of order fd_step is far below the stationarity
        tolerances in use.
        """
        h = self.fd_step
        gW = np.zeros(self.m)
        gP = np.zeros(self.m)
        for k in range(self.m):
            step = np.zeros(self.m)
            step[k] = h
            up = self.solve(x + step, warm=state.profile)
            if up is None:
                raise pl.sens.SingularSystemError(
                    f"finite-difference probe failed at coordinate {k}"
                )
            gW[k] = (up.welfare - state.welfare) / h
            gP[k] = (up.payment - state.payment) / h
        return gW, gP


def optimize_general(
    spec: PowerFamilySpec,
    p: GameParameters,
    w: WelfareSpec,
    budget: float,
    *,
    mode: str = "full",
    n_starts: int = 8,
    seed: int = 0,
    extra_seeds=(),
    max_iters: int = 60,
) -> pl.OptimizationResult:
    """Subsidy design for the power family (finite-difference gradients, so
    the default start count and iteration cap are smaller)."""
    adapter = PowerAdapter(spec, p, w, budget)
    return pl.optimize_with_adapter(
        adapter,
        mode=mode,
        n_starts=n_starts,
        seed=seed,
        extra_seeds=extra_seeds,
        max_iters=max_iters,
        coarse_iters=25,
    )


def check_theorem3(
    spec: PowerFamilySpec,
    p: GameParameters,
    w: WelfareSpec,
    budget: float,
    *,
    result: pl.OptimizationResult | None = None,
    seed: int = 0,
    n_starts: int = 8,
) -> tuple[pl.OptimizationResult, pl.StructureVerdicts]:
    """Regime verdicts for the generalized structure result.

    Nonnegative standalone link incentive with super-quadratic link costs
    both ways and sub-linear spillover transforms both ways: no link
    subsidy.  Negative incentive with sub-quadratic costs, super-linear
    transforms, both endpoint actions subsidized, and a formed link: a
    strictly positive link subsidy.  Pairs outside both regimes are
    reported as not applicable.
    """
    if result is None:
        result = optimize_general(
            spec, p, w, budget, seed=seed, n_starts=n_starts
        )
    x = pl.intervention_to_vector(result.best)
    act = pl.active_coordinates(x)
    beta_act = act[: p.n]
    G = result.report.profile.G
    out = pl.StructureVerdicts()
    for i, j in pl.pair_list(p.n):
        s_ij = p.s[i, j]
        sig = result.best.sigma[i, j]
        tol = pl.struct_tolerance(s_ij)
        cost_cls = {classify_cost(spec.gamma[i, j]), classify_cost(spec.gamma[j, i])}
        spill_cls = {
            classify_spillover(spec.kappa[i, j]),
            classify_spillover(spec.kappa[j, i]),
        }
        if s_ij >= 0.0:
            applies = cost_cls <= {SUPER_QUADRATIC, BOTH} and spill_cls <= {
                SUB_LINEAR,
                BOTH,
            }
            out.verdicts.append(
                pl.PairVerdict(
                    pair=(i, j),
                    rule="zero",
                    applicable=applies,
                    passed=bool(sig <= tol) if applies else None,
                    sigma_star=sig,
                    target=0.0,
                    tolerance=tol,
                )
            )
        else:
            applies = (
                cost_cls <= {SUB_QUADRATIC, BOTH}
                and spill_cls <= {SUPER_LINEAR, BOTH}
                and beta_act[i]
                and beta_act[j]
                and G[i, j] > eq.BINDING_TOL
            )
            out.verdicts.append(
                pl.PairVerdict(
                    pair=(i, j),
                    rule="positive",
                    applicable=applies,
                    passed=bool(sig > tol) if applies else None,
                    sigma_star=sig,
                    target=None,
                    tolerance=tol,
                )
            )
    return result, out

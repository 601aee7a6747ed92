"""Economy primitives for a network game with endogenous link formation.

Each of ``n`` agents picks a nonnegative scalar action ``a_i`` and a
nonnegative directed link intensity ``g_ij`` toward every other agent.
The undirected link weight is ``G_ij = g_ij + g_ji``.  Agent ``i`` earns

    b_i a_i + rho * sum_j G_ij a_i a_j - c_i a_i^2 / 2
    + sum_j s_ij G_ij - sum_j f_ij g_ij^2 / 2
    + beta_i a_i + sum_j sigma_ij G_ij

where ``(beta, sigma)`` are per-unit money subsidies on actions and on
undirected links, paid by a planner with budget ``B``.  This module holds
the value types, the payoff and payment arithmetic, and the JSON instance
format; it has no solver logic.
"""

from __future__ import annotations

import json
from dataclasses import InitVar, dataclass
from pathlib import Path

import numpy as np

ACTION_SUM = "weighted-action-sum"
LINK_SUM = "link-weight-sum"

_SYM_TOL = 1e-9


def _vector(x, n: int, name: str) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    return arr


def _matrix(x, n: int, name: str) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.shape != (n, n):
        raise ValueError(f"{name} must have shape ({n}, {n}), got {arr.shape}")
    return arr


def _symmetrized(m: np.ndarray, name: str) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > _SYM_TOL * scale:
        raise ValueError(f"{name} must be symmetric")
    out = 0.5 * (m + m.T)
    np.fill_diagonal(out, 0.0)
    return out


@dataclass(frozen=True)
class GameParameters:
    """The economy: incentives, cost curvatures, and spillover strength.

    ``s`` is stored symmetrized with a zero diagonal (symmetry is enforced
    here rather than trusted from input).  ``f`` may differ across the two
    directions of a pair.  ``rho >= 0`` only; strategic substitutes are not
    modeled.
    """

    n: int
    b: np.ndarray
    c: np.ndarray
    s: np.ndarray
    f: np.ndarray
    rho: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two agents")
        object.__setattr__(self, "b", _vector(self.b, self.n, "b"))
        object.__setattr__(self, "c", _vector(self.c, self.n, "c"))
        object.__setattr__(self, "s", _symmetrized(_matrix(self.s, self.n, "s"), "s"))
        f = _matrix(self.f, self.n, "f")
        np.fill_diagonal(f, 1.0)  # diagonal is never read; keep it positive
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "rho", float(self.rho))
        if np.any(self.c <= 0):
            raise ValueError("action cost curvatures c must be positive")
        if np.any(f <= 0):
            raise ValueError("link cost curvatures f must be positive")
        if self.rho < 0:
            raise ValueError("complementarity strength rho must be nonnegative")

    def ftilde(self) -> np.ndarray:
        """Combined inverse link-cost curvature 1/f_ij + 1/f_ji, zero diagonal."""
        ft = 1.0 / self.f + 1.0 / self.f.T
        np.fill_diagonal(ft, 0.0)
        return ft


@dataclass(frozen=True)
class Intervention:
    """Planner subsidies: per-unit action subsidies ``beta``, symmetric
    per-unit link subsidies ``sigma``, and the money budget."""

    beta: np.ndarray
    sigma: np.ndarray
    budget: float
    allow_negative: InitVar[bool] = False

    def __post_init__(self, allow_negative: bool):
        beta = np.array(self.beta, dtype=float)
        n = beta.shape[0]
        object.__setattr__(self, "beta", _vector(beta, n, "beta"))
        object.__setattr__(
            self, "sigma", _symmetrized(_matrix(self.sigma, n, "sigma"), "sigma")
        )
        object.__setattr__(self, "budget", float(self.budget))
        if not allow_negative:
            if np.any(self.beta < 0) or np.any(self.sigma < 0):
                raise ValueError("subsidies must be nonnegative")
        if self.budget <= 0:
            raise ValueError("budget must be positive")

    @property
    def n(self) -> int:
        return self.beta.shape[0]

    @classmethod
    def zero(cls, n: int, budget: float) -> "Intervention":
        return cls(np.zeros(n), np.zeros((n, n)), budget)


@dataclass(frozen=True)
class StrategyProfile:
    """Actions and directed link intensities; ``G`` is the derived
    symmetric undirected link matrix g + g.T."""

    a: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        n = a.shape[0]
        object.__setattr__(self, "a", _vector(a, n, "a"))
        g = _matrix(self.g, n, "g")
        np.fill_diagonal(g, 0.0)
        object.__setattr__(self, "g", g)
        if np.any(self.a < 0) or np.any(self.g < 0):
            raise ValueError("actions and link intensities must be nonnegative")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def G(self) -> np.ndarray:
        return self.g + self.g.T

    @classmethod
    def zeros(cls, n: int) -> "StrategyProfile":
        return cls(np.zeros(n), np.zeros((n, n)))


@dataclass(frozen=True)
class WelfareSpec:
    """Planner objective.

    ``weighted-action-sum`` is sum_i w_i a_i with strictly positive weights,
    so it is strictly increasing and differentiable in every action.
    ``link-weight-sum`` is the ordered-pair sum of link weights,
    sum_i sum_{j != i} G_ij (each undirected link counted twice).
    """

    kind: str
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (ACTION_SUM, LINK_SUM):
            raise ValueError(f"unknown welfare kind {self.kind!r}")
        if self.kind == ACTION_SUM:
            if self.weights is None:
                raise ValueError("weighted-action-sum requires weights")
            w = np.array(self.weights, dtype=float)
            if w.ndim != 1 or np.any(w <= 0):
                raise ValueError("welfare weights must be a positive vector")
            object.__setattr__(self, "weights", w)
        elif self.weights is not None:
            raise ValueError("link-weight-sum takes no weights")

    @classmethod
    def action_sum(cls, n: int) -> "WelfareSpec":
        return cls(ACTION_SUM, np.ones(n))

    @classmethod
    def weighted(cls, weights) -> "WelfareSpec":
        return cls(ACTION_SUM, np.asarray(weights, dtype=float))

    @classmethod
    def link_sum(cls) -> "WelfareSpec":
        return cls(LINK_SUM)


def agent_utility(
    p: GameParameters, iv: Intervention, sp: StrategyProfile, i: int
) -> float:
    """Utility of agent ``i`` at profile ``sp`` under subsidies ``iv``.

    The standalone link incentive ``s_ij`` multiplies the undirected weight
    ``G_ij``; the quadratic link cost is paid on the agent's own directed
    intensity ``g_ij``.
    """
    if not 0 <= i < p.n:
        raise IndexError(f"agent index {i} out of range for n={p.n}")
    a, G = sp.a, sp.G
    own = (p.b[i] + iv.beta[i]) * a[i] - 0.5 * p.c[i] * a[i] ** 2
    spill = p.rho * a[i] * float(G[i] @ a)
    links = float((p.s[i] + iv.sigma[i]) @ G[i])
    link_cost = 0.5 * float(p.f[i] @ (sp.g[i] ** 2))
    return own + spill + links - link_cost


def planner_payment(iv: Intervention, sp: StrategyProfile) -> float:
    """Total money paid out: sum_i beta_i a_i plus the ordered-pair double
    sum of sigma_ij G_ij (each undirected link's subsidy is paid twice,
    once to each endpoint)."""
    return float(iv.beta @ sp.a) + float(np.sum(iv.sigma * sp.G))


def welfare(w: WelfareSpec, sp: StrategyProfile) -> float:
    """Evaluate the planner objective at a strategy profile."""
    if w.kind == ACTION_SUM:
        return float(w.weights @ sp.a)
    return float(np.sum(sp.G))


# ---------------------------------------------------------------------------
# JSON instance format
# ---------------------------------------------------------------------------
#
# {
#   "n": 3, "b": [...], "c": [...], "rho": 0.2,
#   "s": [[...]], "f": [[...]], "budget": 0.1,
#   "welfare": {"kind": "weighted-action-sum", "weights": [...]},
#   "power": {"eta": [...], "gamma": [[...]], "kappa": [[...]],
#             "omega": [[...]]}          # optional, nonquadratic family
# }


@dataclass(frozen=True)
class Instance:
    params: GameParameters
    welfare: WelfareSpec
    budget: float
    power: dict | None = None


def instance_to_json(inst: Instance) -> dict:
    p = inst.params
    w = inst.welfare
    doc = {
        "n": p.n,
        "b": p.b.tolist(),
        "c": p.c.tolist(),
        "rho": p.rho,
        "s": p.s.tolist(),
        "f": p.f.tolist(),
        "budget": inst.budget,
        "welfare": {"kind": w.kind},
    }
    if w.kind == ACTION_SUM:
        doc["welfare"]["weights"] = w.weights.tolist()
    if inst.power is not None:
        doc["power"] = {
            key: np.asarray(val, dtype=float).tolist()
            for key, val in inst.power.items()
        }
    return doc


def instance_from_json(doc: dict) -> Instance:
    n = int(doc["n"])
    params = GameParameters(
        n=n, b=doc["b"], c=doc["c"], s=doc["s"], f=doc["f"], rho=doc["rho"]
    )
    wdoc = doc.get("welfare", {"kind": ACTION_SUM, "weights": [1.0] * n})
    if wdoc["kind"] == ACTION_SUM:
        wspec = WelfareSpec.weighted(wdoc.get("weights", [1.0] * n))
    else:
        wspec = WelfareSpec.link_sum()
    return Instance(
        params=params,
        welfare=wspec,
        budget=float(doc["budget"]),
        power=doc.get("power"),
    )


def load_instance(path) -> Instance:
    with open(Path(path)) as fh:
        return instance_from_json(json.load(fh))


def save_instance(inst: Instance, path) -> None:
    with open(Path(path), "w") as fh:
        json.dump(instance_to_json(inst), fh, indent=2)

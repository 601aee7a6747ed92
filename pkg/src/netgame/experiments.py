"""Instance generation, the welfare-ratio experiment, and verdict campaigns.

Randomness uses the counter-based Philox generator keyed by spawn keys, so
the instance drawn for a given (seed, n, replication) does not depend on
which other cells run or in what order, and repeated runs are
bit-reproducible.  CSV output fixes the column order and prints floats
with 17 significant digits so reruns are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import benchmark as bm
from . import general as gm
from . import planner as pl
from .model import GameParameters, WelfareSpec

EXAMPLE1_BUDGET = 0.01
EXAMPLE1_SCALE = 0.01  # upper end of the uniform action and link incentives
EXAMPLE1_COST = 10.0
EXAMPLE1_RHO = 1.0


def child_seed(seed: int, *key: int) -> int:
    """Stable 63-bit subseed for one cell of an experiment grid."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def rng_from(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _symmetric_draw(rng: np.random.Generator, n: int, low: float, high: float):
    """One uniform draw per unordered pair, mirrored into a symmetric matrix."""
    s = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            s[i, j] = s[j, i] = rng.uniform(low, high)
    return s


def generate_example1_instance(
    n: int, seed: int
) -> tuple[GameParameters, WelfareSpec, float]:
    """The link-welfare test economy: standalone incentives uniform on
    [0, 0.01], action and link cost curvatures 10, spillover strength 1,
    budget 0.01, objective the sum of link weights."""
    if n < 2:
        raise ValueError("need at least two agents")
    rng = rng_from(seed)
    b = rng.uniform(0.0, EXAMPLE1_SCALE, n)
    s = _symmetric_draw(rng, n, 0.0, EXAMPLE1_SCALE)
    p = GameParameters(
        n=n,
        b=b,
        c=np.full(n, EXAMPLE1_COST),
        s=s,
        f=np.full((n, n), EXAMPLE1_COST),
        rho=EXAMPLE1_RHO,
    )
    return p, WelfareSpec.link_sum(), EXAMPLE1_BUDGET


# ---------------------------------------------------------------------------
# Instance samplers for campaigns and verification suites
# ---------------------------------------------------------------------------


def sample_contraction_instance(
    seed: int, n: int, *, allow_negative_s: bool = False
) -> tuple[GameParameters, float]:
    """Random quadratic economy kept well inside the contraction regime:
    the feedback spectral radius at the solved equilibrium stays below 0.9
    (the spillover strength is damped until it does).  Returns the
    parameters and a budget matched to their scale."""
    from . import equilibrium as eq
    from . import sensitivity as sens
    from .model import Intervention

    rng = rng_from(seed)
    b = rng.uniform(0.1, 1.0, n)
    c = rng.uniform(1.0, 2.0, n)
    lo = -0.15 if allow_negative_s else 0.02
    s = _symmetric_draw(rng, n, lo, 0.3)
    f = rng.uniform(1.0, 2.0, (n, n))
    rho = rng.uniform(0.05, 0.35)
    budget = rng.uniform(0.1, 0.4)
    while True:
        p = GameParameters(n=n, b=b, c=c, s=s, f=f, rho=rho)
        report = eq.solve_equilibrium(p, Intervention.zero(n, 1.0))
        if report.exists and sens.feedback_spectral_radius(p, report) < 0.9:
            return p, budget
        rho *= 0.6


def sample_sensitivity_case(
    seed: int, n: int, *, scale: float = 0.1, allow_negative_s: bool = False
):
    """Instance plus a random interior intervention, with the spillover
    strength damped until the feedback radius at the subsidized equilibrium
    stays below 0.9 (derivatives are evaluated there, not at zero)."""
    from . import equilibrium as eq
    from . import sensitivity as sens
    from .model import Intervention

    rng = rng_from(seed)
    b = rng.uniform(0.1, 1.0, n)
    c = rng.uniform(1.0, 2.0, n)
    lo = -0.15 if allow_negative_s else 0.02
    s = _symmetric_draw(rng, n, lo, 0.3)
    f = rng.uniform(1.0, 2.0, (n, n))
    rho = rng.uniform(0.05, 0.35)
    beta = rng.uniform(0.0, scale, n)
    sigma = _symmetric_draw(rng, n, 0.0, scale)
    iv = Intervention(beta, sigma, 1.0)
    while True:
        p = GameParameters(n=n, b=b, c=c, s=s, f=f, rho=rho)
        try:
            report = eq.solve_equilibrium(p, iv)
        except eq.NonConvergentError:
            report = None
        if (
            report is not None
            and report.exists
            and sens.feedback_spectral_radius(p, report) < 0.9
        ):
            return p, iv
        rho *= 0.6


def sample_thm1_negative_instance(seed: int, n: int = 2) -> tuple[GameParameters, float]:
    """Economy with one negative standalone link incentive arranged so the
    optimizer tends to subsidize both endpoint actions while the link still
    forms (product of actions beats the incentive gap)."""
    rng = rng_from(seed)
    b = rng.uniform(0.6, 1.0, n)
    c = rng.uniform(1.0, 1.6, n)
    s = _symmetric_draw(rng, n, 0.02, 0.15)
    s_neg = -rng.uniform(0.02, 0.09)
    s[0, 1] = s[1, 0] = s_neg
    f = rng.uniform(1.0, 2.0, (n, n))
    rho = rng.uniform(0.2, 0.4)
    p = GameParameters(n=n, b=b, c=c, s=s, f=f, rho=rho)
    return p, float(rng.uniform(0.2, 0.5))


def sample_benchmark_instance(seed: int, n: int) -> tuple[GameParameters, float]:
    """Mixed-regime economies for the fixed-network planner: roughly half
    have strong standalone link incentives (link subsidies attractive), the
    rest weak ones (action subsidies attractive)."""
    rng = rng_from(seed)
    strong = rng.uniform() < 0.5
    b = rng.uniform(0.3, 0.8, n)
    c = rng.uniform(1.0, 2.0, n)
    if strong:
        s = _symmetric_draw(rng, n, 0.4, 0.9)
        rho = rng.uniform(0.15, 0.3)
    else:
        s = _symmetric_draw(rng, n, 0.05, 0.25)
        rho = rng.uniform(0.05, 0.15)
    f = rng.uniform(1.0, 2.0, (n, n))
    p = GameParameters(n=n, b=b, c=c, s=s, f=f, rho=rho)
    return p, float(rng.uniform(0.2, 0.5))


def sample_power_block_instance(
    seed: int, block: str, n: int = 2
) -> tuple[gm.PowerFamilySpec, GameParameters, float]:
    """Instances for the three nonquadratic campaign blocks.

    ``steep-concave``: cubic link costs with square-root spillovers and all
    link incentives nonnegative.  ``shallow-convex``: exponent-1.5 link
    costs with squared spillovers, one negative link incentive, and costs
    arranged so both endpoint actions get subsidized.  ``quadratic``: the
    exact quadratic member for cross-checks.
    """
    rng = rng_from(seed)
    b = rng.uniform(0.6, 1.0, n)
    c = rng.uniform(1.0, 1.5, n)
    if block == "steep-concave":
        spec = gm.PowerFamilySpec.uniform(n, eta=2.0, gamma=3.0, kappa=0.5)
        s = _symmetric_draw(rng, n, 0.05, 0.25)
        f = rng.uniform(0.8, 1.5, (n, n))
        rho = rng.uniform(0.2, 0.35)
    elif block == "shallow-convex":
        spec = gm.PowerFamilySpec.uniform(
            n, eta=3.0, gamma=1.5, kappa=2.0, omega=float(rng.uniform(0.5, 0.7))
        )
        s = _symmetric_draw(rng, n, 0.02, 0.1)
        neg = -rng.uniform(0.02, 0.06)
        s[0, 1] = s[1, 0] = neg
        f = rng.uniform(6.0, 10.0, (n, n))
        rho = rng.uniform(0.2, 0.3)
    elif block == "quadratic":
        spec = gm.PowerFamilySpec.uniform(n)
        s = _symmetric_draw(rng, n, 0.02, 0.15)
        if rng.uniform() < 0.5:
            s[0, 1] = s[1, 0] = -rng.uniform(0.02, 0.09)
        f = rng.uniform(0.5, 1.0, (n, n))  # already halved cost coefficients
        rho = rng.uniform(0.2, 0.4)
    else:
        raise ValueError(f"unknown block {block!r}")
    p = GameParameters(n=n, b=b, c=c, s=s, f=f, rho=rho)
    return spec, p, float(rng.uniform(0.2, 0.5))


# ---------------------------------------------------------------------------
# Welfare-ratio experiment
# ---------------------------------------------------------------------------

RATIO_COLUMNS = ("n", "rep", "seed", "w_opt", "w_linkonly", "ratio", "kkt_clean")


@dataclass
class RatioRow:
    n: int
    rep: int
    seed: int
    w_opt: float
    w_linkonly: float
    ratio: float
    kkt_clean: bool

    def as_csv(self) -> str:
        return ",".join(
            (
                str(self.n),
                str(self.rep),
                str(self.seed),
                format(self.w_opt, ".17g"),
                format(self.w_linkonly, ".17g"),
                format(self.ratio, ".17g"),
                str(int(self.kkt_clean)),
            )
        )


def run_example1(
    n_range,
    replications: int,
    seed: int,
    *,
    out: str | Path | None = None,
    n_starts: int = 8,
) -> list[RatioRow]:
    """Welfare of the unrestricted optimum relative to the best link-only
    scheme, per economy size and replication.

    The unrestricted search is seeded with the link-only optimum, so the
    ratio is at least one up to solver noise.  Rows whose optimizer output
    fails the stationarity screen are flagged, never dropped.
    """
    rows = []
    for n in n_range:
        for rep in range(replications):
            sub = child_seed(seed, n, rep)
            p, w, budget = generate_example1_instance(n, sub)
            link_res = pl.restricted_optimize(
                p, w, budget, "links-only", seed=child_seed(sub, 1), n_starts=n_starts
            )
            full_res = pl.optimize_intervention(
                p,
                w,
                budget,
                seed=child_seed(sub, 2),
                n_starts=n_starts,
                extra_seeds=[pl.intervention_to_vector(link_res.best)],
            )
            clean = bool(
                full_res.kkt is not None
                and full_res.kkt.clean
                and link_res.kkt is not None
                and link_res.kkt.clean
            )
            rows.append(
                RatioRow(
                    n=n,
                    rep=rep,
                    seed=sub,
                    w_opt=full_res.welfare_value,
                    w_linkonly=link_res.welfare_value,
                    ratio=full_res.welfare_value / link_res.welfare_value,
                    kkt_clean=clean,
                )
            )
    rows.sort(key=lambda r: (r.n, r.rep))
    if out is not None:
        write_ratio_csv(rows, out)
    return rows


def write_ratio_csv(rows: list[RatioRow], path: str | Path) -> None:
    lines = [",".join(RATIO_COLUMNS)]
    lines.extend(row.as_csv() for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Verdict campaigns
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    mode: str
    instance: str | None = None
    seed: int = 0
    n_range: list[int] = field(default_factory=lambda: [2, 3])
    replications: int = 10
    out: str | None = None


def _tally(rows: list[dict]) -> dict:
    counts = {"pass": 0, "fail": 0, "not_applicable": 0, "flagged": 0}
    for row in rows:
        if not row["kkt_clean"]:
            counts["flagged"] += 1
            continue
        verdicts = row["verdicts"]
        applicable = [v for v in verdicts if v["applicable"]]
        if not applicable:
            counts["not_applicable"] += 1
        elif all(v["passed"] for v in applicable):
            counts["pass"] += 1
        else:
            counts["fail"] += 1
    return counts


def run_theorem_campaign(which: int, config: ExperimentConfig) -> dict:
    """Sample instances in the matching hypothesis regime, optimize, screen
    stationarity, and aggregate structure verdicts.

    Rows failing the stationarity screen count as flagged and are excluded
    from pass/fail; ``hard_violations`` counts clean rows with a failed
    verdict (the campaign's alarm signal).
    """
    if which == 1:
        rows = _campaign_thm1(config)
    elif which == 2:
        rows = _campaign_thm2(config)
    elif which == 3:
        rows = _campaign_thm3(config)
    else:
        raise ValueError("theorem must be 1, 2, or 3")
    counts = _tally(rows)
    summary = {
        "theorem": which,
        "seed": config.seed,
        "replications": config.replications,
        "counts": counts,
        "hard_violations": counts["fail"],
        "rows": rows,
    }
    if config.out:
        Path(config.out).write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


def _campaign_thm1(config: ExperimentConfig) -> list[dict]:
    rows = []
    sizes = config.n_range or [2, 3]
    for rep in range(config.replications):
        n = sizes[rep % len(sizes)]
        sub = child_seed(config.seed, 10, rep)
        p, budget = sample_contraction_instance(sub, n)
        w = WelfareSpec.weighted(rng_from(child_seed(sub, 3)).uniform(0.5, 1.5, n))
        res = pl.optimize_intervention(p, w, budget, seed=child_seed(sub, 4))
        verdicts = pl.check_theorem1_structure(p, w, res)
        rows.append(_verdict_row("nonneg", rep, n, sub, res, verdicts.to_json()))
    for rep in range(config.replications):
        n = 2 + rep % 2
        sub = child_seed(config.seed, 20, rep)
        p, budget = sample_thm1_negative_instance(sub, n)
        w = WelfareSpec.action_sum(n)
        res = pl.optimize_intervention(p, w, budget, seed=child_seed(sub, 4))
        verdicts = pl.check_theorem1_structure(p, w, res)
        rows.append(_verdict_row("negpair", rep, n, sub, res, verdicts.to_json()))
    return rows


def _campaign_thm2(config: ExperimentConfig) -> list[dict]:
    rows = []
    sizes = config.n_range or [2, 3]
    for rep in range(config.replications):
        n = sizes[rep % len(sizes)]
        sub = child_seed(config.seed, 30, rep)
        p, budget = sample_benchmark_instance(sub, n)
        w = WelfareSpec.action_sum(n)
        res = bm.optimize_benchmark(p, w, budget, seed=child_seed(sub, 4))
        verdicts = bm.check_theorem2(p, res)
        rows.append(_verdict_row("benchmark", rep, n, sub, res, verdicts.to_json()))
    return rows


def _campaign_thm3(config: ExperimentConfig) -> list[dict]:
    rows = []
    for b_idx, block in enumerate(("steep-concave", "shallow-convex", "quadratic")):
        for rep in range(config.replications):
            sub = child_seed(config.seed, 40 + b_idx, rep)
            spec, p, budget = sample_power_block_instance(sub, block)
            w = WelfareSpec.action_sum(p.n)
            if block == "quadratic":
                res = gm.optimize_general(
                    spec, p, w, budget, seed=child_seed(sub, 4), n_starts=6
                )
                verdicts = pl.check_theorem1_structure(p, w, res)
            else:
                res, verdicts = gm.check_theorem3(
                    spec, p, w, budget, seed=child_seed(sub, 4), n_starts=6
                )
            rows.append(_verdict_row(block, rep, p.n, sub, res, verdicts.to_json()))
    return rows


def _verdict_row(block, rep, n, seed, res, verdicts_json) -> dict:
    return {
        "block": block,
        "rep": rep,
        "n": n,
        "seed": seed,
        "welfare": res.welfare_value,
        "payment": res.payment,
        "lambda_hat": None if np.isnan(res.lambda_hat) else res.lambda_hat,
        "kkt_clean": bool(res.kkt is not None and res.kkt.clean),
        "verdicts": verdicts_json["verdicts"],
    }

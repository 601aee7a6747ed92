"""Command-line front end.

Subcommands: ``solve`` an instance file, ``optimize`` the subsidy scheme
for it, ``example1`` for the welfare-ratio experiment CSV, and
``campaign`` for theorem-verdict campaigns emitting JSON.  The
NETGAME_MAX_ITER environment variable overrides the solver iteration cap.

Exit codes: 0 when all checks pass or are not applicable, 2 when a
campaign finds a hard verdict violation on a stationarity-clean optimum,
1 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import equilibrium as eq
from . import experiments as ex
from . import general as gm
from . import planner as pl
from .model import Intervention, load_instance


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netgame",
        description="Equilibria and subsidy design for network games with "
        "endogenous links",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one instance file")
    p_solve.add_argument("--instance", required=True)

    p_opt = sub.add_parser("optimize", help="search for the optimal subsidies")
    p_opt.add_argument("--instance", required=True)
    p_opt.add_argument("--budget", type=float, default=None)
    p_opt.add_argument(
        "--mode", choices=("full", "actions", "links"), default="full"
    )
    p_opt.add_argument("--seed", type=int, default=0)
    p_opt.add_argument("--starts", type=int, default=pl.MULTISTART)

    p_ex1 = sub.add_parser("example1", help="welfare-ratio experiment CSV")
    p_ex1.add_argument("--n-min", type=int, default=2)
    p_ex1.add_argument("--n-max", type=int, default=10)
    p_ex1.add_argument("--reps", type=int, default=20)
    p_ex1.add_argument("--seed", type=int, default=0)
    p_ex1.add_argument("--out", required=True)

    p_camp = sub.add_parser("campaign", help="theorem verdict campaign JSON")
    p_camp.add_argument("--theorem", type=int, choices=(1, 2, 3), required=True)
    p_camp.add_argument("--reps", type=int, default=10)
    p_camp.add_argument("--seed", type=int, default=0)
    p_camp.add_argument("--out", required=True)
    return parser


_MODES = {"full": "full", "actions": "actions-only", "links": "links-only"}


def _cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    iv = Intervention.zero(inst.params.n, inst.budget)
    if inst.power is not None:
        spec = gm.PowerFamilySpec.from_instance(inst)
        report = gm.solve_general_equilibrium(spec, inst.params, iv)
    else:
        report = eq.solve_equilibrium(inst.params, iv)
    print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    return 0


def _cmd_optimize(args) -> int:
    inst = load_instance(args.instance)
    budget = args.budget if args.budget is not None else inst.budget
    mode = _MODES[args.mode]
    if inst.power is not None:
        spec = gm.PowerFamilySpec.from_instance(inst)
        result = gm.optimize_general(
            spec, inst.params, inst.welfare, budget, mode=mode, seed=args.seed
        )
    else:
        result = pl.optimize_intervention(
            inst.params,
            inst.welfare,
            budget,
            mode=mode,
            seed=args.seed,
            n_starts=args.starts,
        )
    doc = result.to_json()
    doc.pop("equilibrium", None)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _cmd_example1(args) -> int:
    if args.n_min < 2 or args.n_max < args.n_min or args.reps < 1:
        raise ValueError("need 2 <= n-min <= n-max and reps >= 1")
    rows = ex.run_example1(
        range(args.n_min, args.n_max + 1), args.reps, args.seed, out=args.out
    )
    below = sum(1 for r in rows if r.ratio < 1.0 - 1e-9)
    print(f"wrote {len(rows)} rows to {args.out} ({below} below ratio 1)")
    return 0 if below == 0 else 2


def _cmd_campaign(args) -> int:
    config = ex.ExperimentConfig(
        mode=f"thm{args.theorem}-campaign",
        seed=args.seed,
        replications=args.reps,
        out=args.out,
    )
    summary = ex.run_theorem_campaign(args.theorem, config)
    counts = summary["counts"]
    print(
        f"theorem {args.theorem}: pass={counts['pass']} fail={counts['fail']} "
        f"not_applicable={counts['not_applicable']} flagged={counts['flagged']}"
    )
    return 2 if summary["hard_violations"] > 0 else 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return 1 if err.code not in (0, None) else 0
    handlers = {
        "solve": _cmd_solve,
        "optimize": _cmd_optimize,
        "example1": _cmd_example1,
        "campaign": _cmd_campaign,
    }
    try:
        return handlers[args.command](args)
    except (OSError, ValueError, KeyError, eq.NonConvergentError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

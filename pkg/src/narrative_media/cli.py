"""Command-line front end.

Exit status: 0 success, 1 input error, 2 solver non-convergence or a failed
check (the report still gets written, with diagnostics).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import competitive_market, menu_design, rational_mix, scenarios, strategy_optimizer
from .equilibrium import CERT_TOL, DEFAULT_LADDER, find_equilibria
from .model_core import Environment, ModelError, Narrative, SignalFunction
from ._parallel import parallel_map, solver_threads
from .random_envs import KINDS, random_environment

SIG_DIGITS = 12
COMMANDS = ("solve", "equilibrium", "benchmark", "menu", "compete", "mix", "sweep", "oracle-check")


class InputError(Exception):
    pass


class SolverError(Exception):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# -- formatting ------------------------------------------------------------


def _num(x: float):
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


def clean(obj):
    """Round floats to 12 significant digits; NaN/inf become null."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, Narrative):
        return obj.name
    return obj


def to_json(obj) -> str:
    return json.dumps(clean(obj), indent=2, sort_keys=False) + "\n"


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        v = _num(x)
        return "" if v is None else repr(v)
    return str(x)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(x) for x in r])
    return buf.getvalue()


# -- inputs ----------------------------------------------------------------


def _add_env_source(p):
    p.add_argument("--scenario", choices=scenarios.SCENARIOS)
    p.add_argument("--c", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--env", help="environment JSON file")
    p.add_argument("--random", type=int, metavar="SEED", help="seeded random binary environment")
    p.add_argument("--kind", choices=KINDS, default="none", help="separability of --random")


def _scenario_spec(args) -> scenarios.ScenarioSpec:
    params = {}
    if args.c is not None:
        params["c"] = args.c
    if args.beta is not None:
        params["beta"] = args.beta
    return scenarios.ScenarioSpec(args.scenario, params)


def _environment(args) -> Environment:
    sources = [s for s in ("scenario", "env", "random") if getattr(args, s) is not None]
    if len(sources) != 1:
        raise InputError("input: give exactly one of --scenario, --env, --random")
    if args.scenario is not None:
        return scenarios.build(_scenario_spec(args))
    if args.env is not None:
        try:
            return Environment.load(args.env)
        except OSError as exc:
            raise InputError(f"--env: cannot read {args.env}: {exc}") from exc
    return random_environment(np.random.default_rng(args.random), args.kind)


def _signal(text: str, env: Environment) -> SignalFunction:
    text = text.strip()
    try:
        if text.startswith("["):
            return SignalFunction(np.array(json.loads(text), dtype=float))
        q0, q1 = (float(x) for x in text.split(","))
    except (ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"--signal: expected 'q0,q1' or a JSON matrix, got {text!r}") from exc
    if env.n_states != 2 or env.n_signals != 2:
        raise InputError("--signal: 'q0,q1' form needs two states and two signals")
    return SignalFunction.binary(q0, q1)


def _ladder(text: str | None):
    if text is None:
        return DEFAULT_LADDER
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise InputError(f"--ladder: expected comma-separated numbers, got {text!r}") from exc


# -- commands --------------------------------------------------------------


def cmd_solve(args):
    env = _environment(args)
    rep = strategy_optimizer.optimize_media_strategy(env, args.grid_step, args.refine_iters, args.domain)
    out = rep.to_dict()
    if not rep.search_trace[rep.best.N.name].get("certified", False):
        raise SolverError("optimal strategy failed equilibrium certification", out)
    return to_json(out)


def cmd_benchmark(args):
    env = _environment(args)
    ms, eqm, value = strategy_optimizer.rational_benchmark(env)
    return to_json({
        "benchmark": value,
        "narrative": ms.N.name,
        "signal": ms.I.kernel.tolist(),
        "strategy": eqm.strategy.kernel.tolist(),
        "regular": strategy_optimizer.is_regular(env),
    })


def cmd_equilibrium(args):
    env = _environment(args)
    if args.signal is None:
        raise InputError("--signal: required for equilibrium")
    I = _signal(args.signal, env)
    N = Narrative.parse(args.narrative)
    res = find_equilibria(env, I, N, epsilon=args.epsilon, tol=args.tol, ladder=_ladder(args.ladder))
    out = {
        "narrative": N.name,
        "signal": I.kernel.tolist(),
        "equilibria": [r.to_dict() for r in res],
        "undetermined_profiles": [[sorted(s) for s in p] for p in res.undetermined],
    }
    if not res:
        raise SolverError("no certified equilibrium found", out)
    return to_json(out)


def cmd_menu(args):
    grid = menu_design.TypeGrid.build(args.F, args.nodes)
    low = menu_design.LOW_ACTION if args.low == "both" else (Narrative.parse(args.low),)
    sol = menu_design.optimize_menu(grid, low, allow_true=not args.no_true, q_step=args.q_step, oracle=not args.no_oracle)
    out = sol.to_dict()
    if sol.ic_violations or sol.oracle_ok is False:
        raise SolverError("menu failed the incentive or oracle check", out)
    return to_json(out)


def cmd_compete(args):
    prof = competitive_market.competitive_equilibrium(args.F)
    viol = competitive_market.verify_competitive(prof, step=args.deviation_step)
    out = prof.to_dict()
    out["violations"] = [v.to_dict() for v in viol[:20]]
    out["violation_count"] = len(viol)
    if viol:
        raise SolverError("competitive profile failed verification", out)
    return to_json(out)


def cmd_mix(args):
    if args.c is None or args.lam is None:
        raise InputError("mix: --c and --lambda are required")
    sol = rational_mix.optimize_mixed(args.c, args.lam)
    out = sol.to_dict()
    cross = rational_mix.crossover_lambda(args.c)
    out["crossover_lambda"] = {"value": cross, "note": "numerical: EMPOWERING first-order optimum vs (0, FATALISTIC)"}
    return to_json(out)


def _frange(lo, hi, step):
    if step is None or step <= 0.0:
        raise InputError("--step: must be positive")
    if lo is None or hi is None:
        raise InputError("sweep: --from and --to are required")
    n = int(math.floor((hi - lo) / step + 1e-9))
    if n < 0:
        raise InputError("sweep: --to must not be below --from")
    return [round(lo + i * step, 12) for i in range(n + 1)]


def cmd_sweep(args):
    values = _frange(args.lo, args.hi, args.step)
    if args.scenario == "mix" or args.param == "lambda":
        if args.c is None:
            raise InputError("sweep over lambda: --c is required")
        sols = parallel_map(lambda lam: rational_mix.optimize_mixed(args.c, lam), values)
        rows = [(s.lam, s.q, s.N.name, s.U_r, s.U_nr, s.aggregate) for s in sols]
        return to_csv(("lambda", "q", "narrative", "U_r", "U_nr", "aggregate"), rows)
    if args.scenario not in scenarios.SCENARIOS:
        raise InputError("--scenario: required for sweep (or use --param lambda)")
    key = "beta" if args.scenario == "whac_a_mole" else "c"
    if args.param != key:
        raise InputError(f"--param: scenario {args.scenario} sweeps {key!r}, got {args.param!r}")
    specs = [scenarios.ScenarioSpec(args.scenario, {key: v}) for v in values]

    def run(spec):
        return strategy_optimizer.optimize_media_strategy(scenarios.build(spec), args.grid_step, args.refine_iters)

    reps = parallel_map(run, specs)
    if key == "c":
        header = ("c", "narrative", "q0", "utility", "benchmark")
        rows = [(v, r.best.N.name, r.best.I.kernel[0, 1], r.utility, r.benchmark) for v, r in zip(values, reps)]
    else:
        header = ("beta", "narrative", "q0", "q1", "utility", "benchmark")
        rows = [(v, r.best.N.name, r.best.I.kernel[0, 1], r.best.I.kernel[1, 1], r.utility, r.benchmark) for v, r in zip(values, reps)]
    return to_csv(header, rows)


def cmd_oracle_check(args):
    if args.scenario is None:
        raise InputError("oracle-check: --scenario is required")
    spec = _scenario_spec(args)
    orc = scenarios.closed_form_oracle(spec)
    rep = strategy_optimizer.optimize_media_strategy(scenarios.build(spec), args.grid_step, args.refine_iters)
    q0, q1 = float(rep.best.I.kernel[0, 1]), float(rep.best.I.kernel[1, 1])
    checks = {
        "utility": abs(rep.utility - orc.utility) <= args.utility_tol,
        "benchmark": abs(rep.benchmark - orc.benchmark) <= 1e-12,
        "narrative": rep.best.N in orc.narratives,
    }
    # uninformative optima are not unique, so only the interior scenarios pin the signal
    if spec.name != "degenerate_inaction" and orc.q0 is not None and rep.best.N is orc.narrative:
        checks["q0"] = abs(q0 - orc.q0) <= args.signal_tol
        checks["q1"] = abs(q1 - orc.q1) <= args.signal_tol
    out = {
        "scenario": spec.name,
        "params": spec.params,
        "oracle": {"narratives": [n.name for n in orc.narratives], "q0": orc.q0, "q1": orc.q1,
                   "utility": orc.utility, "benchmark": orc.benchmark},
        "optimizer": {"narrative": rep.best.N.name, "q0": q0, "q1": q1, "utility": rep.utility, "benchmark": rep.benchmark},
        "checks": checks,
        "ok": all(checks.values()),
    }
    if not out["ok"]:
        raise SolverError("optimizer disagrees with the closed form", out)
    return to_json(out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="narrative-media", description="Optimal media strategies under causal narratives.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fmt="json"):
        sp.add_argument("--output", "-o", help="write here instead of stdout")
        sp.add_argument("--format", choices=("json", "csv"), default=fmt)

    def search(sp):
        sp.add_argument("--grid-step", type=float, default=strategy_optimizer.GRID_STEP)
        sp.add_argument("--refine-iters", type=int, default=strategy_optimizer.REFINE_ITERS)

    sp = sub.add_parser("solve", help="optimal (signal, narrative) for one environment")
    _add_env_source(sp)
    search(sp)
    sp.add_argument("--domain", choices=("direct", "full"), default="direct")
    common(sp)

    sp = sub.add_parser("benchmark", help="rational-expectations benchmark")
    _add_env_source(sp)
    common(sp)

    sp = sub.add_parser("equilibrium", help="consumer equilibria for a given signal and narrative")
    _add_env_source(sp)
    sp.add_argument("--signal", help="'q0,q1' for binary problems or a JSON matrix p(s|t)")
    sp.add_argument("--narrative", default="true")
    sp.add_argument("--epsilon", type=float, default=1e-9)
    sp.add_argument("--ladder", help="comma-separated tremble ladder")
    sp.add_argument("--tol", type=float, default=CERT_TOL)
    common(sp)

    sp = sub.add_parser("menu", help="monopoly menu design over a type distribution")
    sp.add_argument("--F", default="uniform", help="'uniform', 'power:k' or a CSV table c,F")
    sp.add_argument("--nodes", type=int, default=2001)
    sp.add_argument("--q-step", type=float, default=menu_design.Q_STEP)
    sp.add_argument("--low", choices=("both", "fatalistic", "denial"), default="both")
    sp.add_argument("--no-true", action="store_true", help="drop the optional TRUE item")
    sp.add_argument("--no-oracle", action="store_true")
    common(sp)

    sp = sub.add_parser("compete", help="competitive equilibrium over a type distribution")
    sp.add_argument("--F", default="uniform")
    sp.add_argument("--deviation-step", type=float, default=competitive_market.DEV_STEP)
    common(sp)

    sp = sub.add_parser("mix", help="mixed rational / anticipatory population")
    sp.add_argument("--c", type=float)
    sp.add_argument("--lambda", dest="lam", type=float)
    common(sp)

    sp = sub.add_parser("sweep", help="parameter sweep to CSV")
    sp.add_argument("--scenario", choices=scenarios.SCENARIOS + ("mix",))
    sp.add_argument("--param", required=True, choices=("c", "beta", "lambda"))
    sp.add_argument("--from", dest="lo", type=float)
    sp.add_argument("--to", dest="hi", type=float)
    sp.add_argument("--step", type=float)
    sp.add_argument("--c", type=float, help="fixed cost for lambda sweeps")
    search(sp)
    common(sp, fmt="csv")

    sp = sub.add_parser("oracle-check", help="compare the optimizer with the closed form")
    sp.add_argument("--scenario", choices=scenarios.SCENARIOS)
    sp.add_argument("--c", type=float)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--utility-tol", type=float, default=1e-4)
    sp.add_argument("--signal-tol", type=float, default=1e-3)
    search(sp)
    common(sp)
    return p


HANDLERS = {
    "solve": cmd_solve,
    "benchmark": cmd_benchmark,
    "equilibrium": cmd_equilibrium,
    "menu": cmd_menu,
    "compete": cmd_compete,
    "mix": cmd_mix,
    "sweep": cmd_sweep,
    "oracle-check": cmd_oracle_check,
}


def _emit(text: str, path):
    if path:
        Path(path).write_text(text, newline="")
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        solver_threads()
        if args.command != "sweep" and args.format == "csv":
            raise InputError("--format: csv output is only available for sweep")
        if args.command == "sweep" and args.format == "json":
            raise InputError("--format: sweep emits csv")
        text = HANDLERS[args.command](args)
    except SolverError as exc:
        print(f"narrative-media: {exc}", file=sys.stderr)
        if exc.report is not None:
            _emit(to_json(dict(exc.report, error=str(exc))), args.output)
        return 2
    except (InputError, ModelError, ValueError) as exc:
        print(f"narrative-media: {exc}", file=sys.stderr)
        return 1
    _emit(text, args.output)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

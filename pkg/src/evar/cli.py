"""Command-line entry point: ``evar <command> [flags]``.

Every command writes one JSON (or CSV for ``kelly``) result to ``--out`` or
standard output. Exit codes: 0 success, 2 when the result records a failed
validation or an infeasible problem, 1 for bad arguments or input files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import composite, constraints, counterexample, ldp, oracle
from .dist import HypothesisPair

SIG_DIGITS = 12

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FINDING = 2


class UsageError(Exception):
    """Bad flags or a malformed input file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# serialization

def _num(x: float):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.{SIG_DIGITS}g}")


def _clean(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _wealth_text(log_w: float) -> str:
    """exp(log_w) at 12 significant digits, without overflowing for huge wealth."""
    if log_w < 700:
        return f"{math.exp(log_w):.{SIG_DIGITS}g}"
    dec = log_w / math.log(10)
    exp10 = math.floor(dec)
    mant = 10 ** (dec - exp10)
    if float(f"{mant:.{SIG_DIGITS - 1}f}") >= 10:
        mant, exp10 = mant / 10, exp10 + 1
    return f"{mant:.{SIG_DIGITS - 1}f}e+{exp10}"


# ---------------------------------------------------------------------------
# input helpers

def _load_pair(path: str) -> HypothesisPair:
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read pair file {path!r}: {exc}") from exc
    try:
        return HypothesisPair.from_json(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid pair file {path!r}: {exc}") from exc


def _grid(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"cannot parse grid {text!r}") from exc


def _require(args, *names) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.command}: missing required flag(s) {', '.join(missing)}")


def _check_clip_bounds(c1: float, c2: float) -> None:
    if not (0 <= c1 <= 1 <= c2 < math.inf):
        raise UsageError(f"infeasible bounds: need 0 <= c1 <= 1 <= c2 < inf, got c1={c1}, c2={c2}")


def _config(args) -> dict:
    skip = {"handler", "out"}
    return {k: v for k, v in vars(args).items() if k not in skip}


# ---------------------------------------------------------------------------
# result builders

def _growth(ev, pair) -> dict:
    rep = constraints.growth_rate(ev, pair)
    return {"growth": rep.growth_rate, "null_expectation": rep.null_expectation,
            "budget_residual": rep.null_expectation - 1.0, **rep.extras}


def _ldp_result(pair, eps) -> dict:
    sol = ldp.solve_binary_threshold(pair, eps)
    ev = ldp.private_evariable(sol.mechanism, pair)
    return {"t": sol.t, "m0": sol.m0, "m1": sol.m1, "v0": ev.v0, "v1": ev.v1, "J": sol.J,
            "residual": sol.residual, "interior": sol.interior, "method": sol.method,
            "null_expectation": ev.null_expectation()}


def _quantize_result(ev, pair) -> dict:
    return {"t_star": ev.t_star, "u0": ev.u0, "u1": ev.u1, "alpha": ev.alpha, "beta": ev.beta,
            "residual": ev.residual, "argmax_thresholds": list(ev.argmax_thresholds),
            "method": ev.method, **_growth(ev, pair)}


def _clip_result(ev, pair) -> dict:
    return {"c1": ev.c1, "c2": ev.c2, "lambda_star": ev.lambda_star, **_growth(ev, pair)}


def _convex_result(ev, pair) -> dict:
    out = {"lambda": ev.lam, "gamma": ev.gamma, "penalty": ev.penalty.name, "C": ev.C,
           "closed_form": ev.closed_form, **_growth(ev, pair)}
    out["penalty_residual"] = out["penalty_expectation"] - ev.C
    return out


# ---------------------------------------------------------------------------
# commands

def cmd_ldp_solve(args):
    pair = _load_pair(args.pair)
    return _ldp_result(pair, args.epsilon), EXIT_OK


def cmd_kelly(args):
    q_true = args.q if args.q_true is None else args.q_true
    traj = ldp.simulate_ldp_kelly(q_true, args.q, args.epsilon, args.rounds, args.seed)
    lines = ["round,y,e_value,wealth"]
    g = SIG_DIGITS
    for k in range(args.rounds):
        lines.append(f"{k + 1},{int(traj.ys[k])},{traj.e_values[k]:.{g}g},{_wealth_text(traj.log_wealths[k + 1])}")
    return "\n".join(lines) + "\n", EXIT_OK


def cmd_quantize(args):
    pair = _load_pair(args.pair)
    return _quantize_result(constraints.solve_quantized(pair), pair), EXIT_OK


def cmd_clip(args):
    _check_clip_bounds(args.c1, args.c2)
    pair = _load_pair(args.pair)
    res = _clip_result(constraints.solve_bounded(pair, args.c1, args.c2), pair)
    return res, EXIT_OK


def _convex_cmd(pair, penalty, C):
    try:
        if penalty == "moment":
            ev = constraints.solve_moment(pair, C)
        else:
            ev = constraints.solve_convex(pair, penalty, C)
    except constraints.InfeasibleError as exc:
        return {"status": "infeasible", "message": str(exc)}, EXIT_FINDING
    return {"status": "ok", **_convex_result(ev, pair)}, EXIT_OK


def cmd_moment(args):
    return _convex_cmd(_load_pair(args.pair), "moment", args.C)


def cmd_convex(args):
    try:
        constraints.get_penalty(args.penalty).check()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return _convex_cmd(_load_pair(args.pair), args.penalty, args.C)


def cmd_composite(args):
    try:
        problem = composite.mlr_problem(args.family, args.theta0, args.theta1,
                                        _grid(args.null_grid), _grid(args.alt_grid))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    lfd = problem.lfd
    kind = args.constraint
    if kind == "ldp":
        _require(args, "epsilon")
        ev, rep = ldp.composite_ldp(problem, args.epsilon, tol=args.tol, strict=False)
        members = [vars(m) for m in rep.members]
        out = {"constraint": kind, "ok": rep.ok, "tol": rep.tol, "threshold": rep.threshold,
               "m0_star": rep.m0_star, "m1_star": rep.m1_star, "v0": ev.v0, "v1": ev.v1,
               "worst_case_growth": rep.worst_case_growth,
               "argmin_alt_growth": rep.argmin_alt_growth, "members": members}
        return out, EXIT_OK if rep.ok else EXIT_FINDING
    if kind == "clip":
        _require(args, "c1", "c2")
        _check_clip_bounds(args.c1, args.c2)
        ev = constraints.solve_bounded(lfd, args.c1, args.c2)
        detail = _clip_result(ev, lfd)
    elif kind == "quantize":
        ev = constraints.solve_quantized(lfd)
        detail = _quantize_result(ev, lfd)
    else:
        _require(args, "C")
        try:
            ev = constraints.solve_moment(lfd, args.C)
        except constraints.InfeasibleError as exc:
            return {"constraint": kind, "status": "infeasible", "message": str(exc)}, EXIT_FINDING
        detail = _convex_result(ev, lfd)
    try:
        lifted = composite.lift(ev, problem)
    except composite.LiftError as exc:
        return {"constraint": kind, "ok": False, "lift_error": str(exc), "simple": detail}, EXIT_FINDING
    rep = composite.validate_composite(lifted, problem, args.tol)
    out = {"constraint": kind, "simple": detail, **rep.to_json()}
    return out, EXIT_OK if rep.ok else EXIT_FINDING


def cmd_counterexample(args):
    try:
        cfg = counterexample.CounterexampleConfig(args.mu, args.c)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    verdict = counterexample.verify_counterexample(cfg)
    code = EXIT_FINDING if verdict.invariants_hold is False else EXIT_OK
    return verdict.to_json(), code


def cmd_oracle(args):
    pair = _load_pair(args.pair)
    try:
        if args.kind == "ldp":
            _require(args, "epsilon")
            res = oracle.brute_force_binary_mechanism(pair, args.epsilon)
        elif args.kind == "quantize":
            res = oracle.brute_force_quantizer(pair)
        else:
            _require(args, "C")
            res = oracle.grid_dual_oracle(pair, constraints.get_penalty(args.penalty), args.C)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = {"best_value": res.best_value, "best_config": res.best_config, "evaluations": res.evaluations}
    feasible = not (isinstance(res.best_config, dict) and res.best_config.get("feasible") is False)
    return out, EXIT_OK if feasible else EXIT_FINDING


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", default=None, help="output file (default: standard output)")
    common.add_argument("--seed", type=int, default=0)

    p = _Parser(prog="evar", description="Constrained growth-optimal e-variables.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, handler, help_text):
        sp = sub.add_parser(name, parents=[common], help=help_text)
        sp.set_defaults(handler=handler)
        return sp

    sp = add("ldp-solve", cmd_ldp_solve, "optimal binary eps-LDP mechanism and its e-variable")
    sp.add_argument("--pair", required=True)
    sp.add_argument("--epsilon", type=float, required=True)

    sp = add("kelly", cmd_kelly, "simulate the privatized Kelly bet")
    sp.add_argument("--q", type=float, required=True, help="alternative success probability")
    sp.add_argument("--q-true", type=float, default=None, help="data-generating probability (default: --q)")
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--rounds", type=int, required=True)

    sp = add("quantize", cmd_quantize, "optimal two-level e-variable")
    sp.add_argument("--pair", required=True)

    sp = add("clip", cmd_clip, "optimal e-variable with values in [c1, c2]")
    sp.add_argument("--pair", required=True)
    sp.add_argument("--c1", type=float, required=True)
    sp.add_argument("--c2", type=float, required=True)

    sp = add("moment", cmd_moment, "optimal e-variable with E0[E^2] <= C")
    sp.add_argument("--pair", required=True)
    sp.add_argument("--C", type=float, required=True)

    sp = add("convex", cmd_convex, "optimal e-variable with E0[phi(E)] <= C")
    sp.add_argument("--pair", required=True)
    sp.add_argument("--penalty", default="square")
    sp.add_argument("--C", type=float, required=True)

    sp = add("composite", cmd_composite, "lift a simple solution to a one-sided MLR family")
    sp.add_argument("--family", default="gauss-mlr")
    sp.add_argument("--theta0", type=float, required=True)
    sp.add_argument("--theta1", type=float, required=True)
    sp.add_argument("--null-grid", required=True, help="comma or space separated parameters")
    sp.add_argument("--alt-grid", required=True, help="comma or space separated parameters")
    sp.add_argument("--constraint", choices=["clip", "quantize", "moment", "ldp"], required=True)
    sp.add_argument("--c1", type=float, default=None)
    sp.add_argument("--c2", type=float, default=None)
    sp.add_argument("--C", type=float, default=None)
    sp.add_argument("--epsilon", type=float, default=None)
    sp.add_argument("--tol", type=float, default=None)

    sp = add("counterexample", cmd_counterexample, "truncation counterexample without an LFD pair")
    sp.add_argument("--mu", type=float, default=0.25)
    sp.add_argument("--c", type=float, default=3.0)

    sp = add("oracle", cmd_oracle, "brute-force reference solutions on small discrete pairs")
    sp.add_argument("kind", choices=["ldp", "quantize", "convex"])
    sp.add_argument("--pair", required=True)
    sp.add_argument("--epsilon", type=float, default=None)
    sp.add_argument("--penalty", default="square")
    sp.add_argument("--C", type=float, default=None)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        result, code = args.handler(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError, ldp.SolverError) as exc:
        print(f"evar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if isinstance(result, str):
        _emit(result, args.out)
    else:
        _emit(dumps({"command": args.command, "config": _config(args), "result": result}), args.out)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Command-line harness.

Subcommands:

* ``run --scenario F --out DIR [--seed S] [--horizon H] [--tol T]``:
  execute the scenario and write ``trace.csv``, ``summary.csv`` and
  ``result.json`` into DIR.  Outputs are byte-identical for identical
  scenario + seed, regardless of ``CCLAB_THREADS``.
* ``check --scenario F``: run every applicable runtime certificate
  (schedule ergodicity, Lyapunov monotonicity, geometric rate, per-round
  descent inequality, residual ceiling, disagreement decay) and print one
  line per certificate.
* ``bound --eta E --B B --m M --gap G``: print the geometric mixing bound
  for those parameters.  Alternatively ``bound --scenario F --export-csv
  OUT [--horizon H]`` exports the scheduled weight matrices for
  inspection (columns ``k,i,j,weight``; the weight agent ``i`` places on
  agent ``j``'s estimate in slot ``k``).

Exit codes: 0 success, 1 certificate violation or non-convergence,
2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .consensus import lyapunov_check, rate_certificate, run_consensus
from .network import check_ergodicity, ergodicity_bound
from .report import fmt_float
from .scenario import ScenarioError, load_scenario
from .sets import project_intersection
from .subgradient import (
    descent_inequality_check,
    disagreement_decay_check,
    residual_bound_check,
    run_subgradient,
)


def _json_value(x):
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


def _write_result(path, payload):
    with open(path, "w", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    scenario = scenario.with_overrides(seed=args.seed, horizon=args.horizon, tol=args.tol)
    os.makedirs(args.out, exist_ok=True)
    trace_path = os.path.join(args.out, "trace.csv")
    summary_path = os.path.join(args.out, "summary.csv")
    result_path = os.path.join(args.out, "result.json")

    if scenario.kind == "consensus":
        trace = run_consensus(scenario)
        trace.write_csv(trace_path, summary_path)
        _write_result(
            result_path,
            {
                "kind": "consensus",
                "converged": trace.converged,
                "rounds": trace.rounds,
                "estimate": [float(v) for v in trace.estimate],
                "disagreement": _json_value(trace.disagreement_series()[-1]),
                "dist_to_intersection": _json_value(trace.estimate_distance()),
                "seed": scenario.seed,
                "tol": scenario.tol,
            },
        )
        if trace.converged:
            print(f"converged in {trace.rounds} rounds; wrote {args.out}")
            return 0
        print(f"no convergence within {trace.rounds} rounds; wrote {args.out}")
        return 1

    trace = run_subgradient(scenario)
    trace.write_csv(trace_path, summary_path)
    _write_result(
        result_path,
        {
            "kind": "optimize",
            "rounds": trace.rounds,
            "estimate": [float(v) for v in trace.estimate],
            "objective": _json_value(trace.objective),
            "f_star": _json_value(trace.reference.f_star) if trace.reference else None,
            "gap": _json_value(trace.gap),
            "dist_to_intersection": _json_value(trace.estimate_distance()),
            "warnings": trace.warnings,
            "seed": scenario.seed,
        },
    )
    print(f"ran {trace.rounds} rounds; wrote {args.out}")
    return 0


def _feasible_probes(scenario, count):
    """Deterministic probe points inside the intersection of the sets."""
    probes = []
    witness = scenario.witness
    if witness is not None:
        probes.append(witness.point.copy())
    rng = np.random.default_rng(scenario.seed + 1)
    while len(probes) < count:
        candidate = rng.uniform(-1.0, 1.0, scenario.n) * 4.0
        z = project_intersection(scenario.sets, candidate)
        if witness is not None:
            # pull strictly inside so rounding can never push the probe out
            z = witness.point + (1.0 - 1e-6) * (z - witness.point)
        probes.append(z)
    return probes[:count]


def _print_report(rep) -> bool:
    """Print one certificate line; returns True when it counts as a failure."""
    if not rep.applicable:
        print(f"[SKIP] {rep.summary()}")
        return False
    if rep.passed:
        print(f"[PASS] {rep.name}")
        return False
    print(f"[FAIL] {rep.summary()}")
    return True


def _cmd_check(args) -> int:
    scenario = load_scenario(args.scenario)
    failures = 0

    erg_horizon = max(scenario.schedule.B, min(scenario.horizon, 100))
    failures += _print_report(check_ergodicity(scenario.schedule, erg_horizon))

    try:
        probes = _feasible_probes(scenario, args.probes)
    except RuntimeError as exc:
        if scenario.allow_empty_intersection:
            print(f"[SKIP] probes: {exc}")
            probes = []
        else:
            print(f"[FAIL] probes: {exc}")
            failures += 1
            probes = []

    if scenario.kind == "consensus":
        trace = run_consensus(scenario)
        if trace.converged:
            print(f"[PASS] convergence ({trace.rounds} rounds)")
        elif scenario.allow_empty_intersection:
            print(f"[SKIP] convergence: horizon exhausted (flagged scenario)")
        else:
            print(f"[FAIL] convergence: horizon exhausted after {trace.rounds} rounds")
            failures += 1
        for idx, probe in enumerate(probes):
            rep = lyapunov_check(trace, probe)
            rep.name = f"lyapunov(probe {idx})"
            failures += _print_report(rep)
        if scenario.witness is not None:
            try:
                rep = rate_certificate(trace, scenario.witness.point, scenario.witness.radius)
                failures += _print_report(rep)
            except ValueError as exc:
                print(f"[SKIP] rate: {exc}")
    else:
        trace = run_subgradient(scenario)
        for warning in trace.warnings:
            print(f"[NOTE] {warning}")
        for idx, probe in enumerate(probes):
            rep = descent_inequality_check(trace, probe, L=trace.bound)
            rep.name = f"descent-inequality(probe {idx})"
            failures += _print_report(rep)
        if all(s == scenario.sets[0] for s in scenario.sets):
            failures += _print_report(residual_bound_check(trace))
        failures += _print_report(disagreement_decay_check(trace))
        if trace.gap is not None:
            print(f"[INFO] objective gap vs reference: {trace.gap:.6g}")

    return 1 if failures else 0


def _cmd_bound(args) -> int:
    if args.scenario is not None:
        if args.export_csv is None:
            raise ValueError("--scenario needs --export-csv to write the matrices")
        scenario = load_scenario(args.scenario)
        schedule = scenario.schedule
        horizon = args.horizon if args.horizon is not None else schedule.period
        with open(args.export_csv, "w", newline="") as fh:
            fh.write("k,i,j,weight\n")
            for k in range(horizon):
                mat = schedule.matrix(k)
                for i in range(schedule.m):
                    for j in range(schedule.m):
                        fh.write(f"{k},{i},{j},{fmt_float(mat[j, i])}\n")
        print(f"wrote {horizon} matrices to {args.export_csv}")
        return 0
    missing = [flag for flag, v in (("--eta", args.eta), ("--B", args.B), ("--m", args.m), ("--gap", args.gap)) if v is None]
    if missing:
        raise ValueError(f"bound needs {' '.join(missing)} (or --scenario/--export-csv)")
    value = ergodicity_bound(args.eta, args.B, args.m, args.gap)
    print(f"{value:.12g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cclab", description="constrained consensus and distributed subgradient simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario and write CSV traces")
    run.add_argument("--scenario", required=True, help="path to a scenario JSON file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--horizon", type=int, default=None, help="override the round budget")
    run.add_argument("--tol", type=float, default=None, help="override the stopping tolerance")

    check = sub.add_parser("check", help="run every applicable runtime certificate")
    check.add_argument("--scenario", required=True)
    check.add_argument("--probes", type=int, default=3, help="feasible probe points per probe-based certificate")

    bound = sub.add_parser("bound", help="print the geometric mixing bound, or export scheduled matrices")
    bound.add_argument("--eta", type=float, default=None, help="weight floor in (0, 1)")
    bound.add_argument("--B", type=int, default=None, help="connectivity window length")
    bound.add_argument("--m", type=int, default=None, help="number of agents")
    bound.add_argument("--gap", type=int, default=None, help="number of slots spanned by the product")
    bound.add_argument("--scenario", default=None, help="scenario whose schedule to export")
    bound.add_argument("--export-csv", default=None, help="CSV path for the exported matrices")
    bound.add_argument("--horizon", type=int, default=None, help="number of slots to export")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "check":
            return _cmd_check(args)
        return _cmd_bound(args)
    except ScenarioError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

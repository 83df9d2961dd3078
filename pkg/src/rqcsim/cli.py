"""Command-line front end.

Exit codes: 0 on success, 1 when ``verify`` finds a failing check, 2 on
usage or I/O errors.  All randomness derives from ``--seed``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import growth, pipeline, verify
from .errors import CapacityError, DomainError
from .parallel import DEFAULT_SEED, resolve_threads
from .report_io import dumps_json, emit, make_report, to_jsonable


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"master seed (default {DEFAULT_SEED})")
    common.add_argument("--threads", type=_positive, default=None, help="worker threads (default: $RQC_SIM_THREADS or all cores)")
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--output", "-o", default="-", help="output path, '-' for standard output")

    parser = argparse.ArgumentParser(prog="rqcsim", description="Symmetric-state growth and relative localization experiments.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("walk", parents=[common], help="Monte Carlo of the growth random walk")
    p.add_argument("--target-n", type=_positive, required=True)
    p.add_argument("--start-k", type=_positive, default=1)
    p.add_argument("--trials", type=_positive, default=100_000)
    p.add_argument("--summary", default=None, help="JSON summary path (default: <output>.summary.json, or stderr)")

    p = sub.add_parser("growth-quantum", parents=[common], help="exact density-matrix check of the growth step")
    p.add_argument("--k", type=_int_list, default=[1, 2, 3, 4, 5])
    p.add_argument("--measurements", type=_int_list, default=[5, 10, 20, 30, 40])

    p = sub.add_parser("localize", parents=[common], help="Bayesian localization experiment")
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--m", type=_positive, required=True)
    p.add_argument("--trials", type=_positive, default=10_000)

    p = sub.add_parser("tiny-exact", parents=[common], help="exact localization on a handful of qubits")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--m", type=int, default=1)

    p = sub.add_parser("sweep", parents=[common], help="required M against N and epsilon")
    p.add_argument("--n", type=_int_list, required=True)
    p.add_argument("--eps", type=_float_list, required=True)
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("end-to-end", parents=[common], help="growth of two sources followed by localization")
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--m", type=_positive, required=True)

    p = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    p.add_argument("--quick", action="store_true", help="smaller Monte Carlo sizes")
    p.add_argument("--only", action="append", default=None, help="run checks whose name starts with this prefix")
    return parser


def cmd_walk(args):
    spec = growth.WalkSpec(args.target_n, start_K=args.start_k)
    stats = growth.monte_carlo_growth(spec, args.trials, args.seed, args.threads)
    analysis = growth.solve_walk_recurrence(spec)
    K = spec.start_K
    summary = {
        "target_N": spec.target_N,
        "start_K": K,
        "trials": stats.trials,
        "seed": stats.seed,
        "right_absorptions": stats.right_absorptions,
        "right_fraction": stats.right_fraction,
        "right_fraction_stderr": stats.right_fraction_stderr,
        "absorb_right_exact": analysis.absorb_right_prob[K],
        "mean_steps": stats.mean_steps,
        "stderr_steps": stats.stderr_steps,
        "expected_steps_exact": analysis.expected_steps[K],
        "cap_exceeded": stats.cap_exceeded,
        "mean_cost_with_restarts": stats.mean_cost_with_restarts,
    }
    if K == 1:
        summary["absorb_right_formula"] = growth.absorption_probability_formula(spec.target_N)
        summary["expected_steps_formula"] = growth.expected_steps_formula(spec.target_N)
    names = {0: "left0", 1: "rightN", 2: "cap_exceeded"}
    rows = [
        {"trial": i, "absorbed": names[int(c)], "steps": int(s)} for i, (c, s) in enumerate(zip(stats.absorbed, stats.steps))
    ]
    report = make_report("walk", summary, ["trial", "absorbed", "steps"], rows)
    if args.format == "json":
        emit(report, "json", args.output)
        return 0
    emit(report, "csv", args.output)
    summary_report = make_report("walk-summary", summary)
    if args.summary:
        emit(summary_report, "json", args.summary)
    elif args.output != "-":
        emit(summary_report, "json", str(Path(args.output).with_suffix("")) + ".summary.json")
    else:
        sys.stderr.write(dumps_json(summary_report))
    return 0


def cmd_growth_quantum(args):
    rows = []
    rng_seed = args.seed
    for K in args.k:
        target = float(growth.triplet_step_probability(K))
        for m in args.measurements:
            res = growth.quantum_validate_growth(K, m, np.random.default_rng([rng_seed, K, m]))
            rows.append(
                {
                    "K": K,
                    "measurements": m,
                    "all_triplet_prob": res.all_triplet_prob,
                    "triplet_prob_exact": growth.triplet_step_probability(K),
                    "prob_error": abs(res.all_triplet_prob - target),
                    "conditional_distance": res.conditional_distance,
                }
            )
    discard = {}
    for K in args.k:
        if 2 <= K:
            discard[str(K)] = growth.quantum_validate_singlet_discard(K, np.random.default_rng([rng_seed, K]))
    report = make_report(
        "growth-quantum",
        {"seed": args.seed, "singlet_discard_distance": discard},
        ["K", "measurements", "all_triplet_prob", "triplet_prob_exact", "prob_error", "conditional_distance"],
        rows,
    )
    emit(report, args.format, args.output)
    return 0


def cmd_localize(args):
    spec = pipeline.ExperimentSpec(args.n, args.m, args.trials, args.seed)
    rep = pipeline.run_localization_experiment(spec, args.threads)
    summary = {
        "N": spec.N,
        "M": spec.M,
        "trials": spec.trials,
        "seed": spec.seed,
        "coverage_2sigma": rep.coverage_2sigma,
        "mean_abs_error": rep.mean_abs_error,
        "mean_ensemble_error_exact": rep.mean_ensemble_error_exact,
        "bound_value": rep.bound_value,
        "fraction_n1_above_half": rep.fraction_n1_above_half,
        "bound_dominates": rep.bound_dominates,
    }
    cols = ["trial", "theta_true", "q_true", "n1", "mu", "sigma", "within_2sigma", "ensemble_error"]
    rows = [{"trial": i, **to_jsonable(r)} for i, r in enumerate(rep.records)]
    emit(make_report("localize", summary, cols, rows), args.format, args.output)
    return 0


def cmd_tiny_exact(args):
    rep = pipeline.tiny_exact_localization(args.n, args.m)
    rows = [
        {"outcomes": "".join(c.outcomes), "probability": c.probability, "n1": c.n1, "distance": c.distance} for c in rep.cases
    ]
    summary = {
        "N": rep.N,
        "M": rep.M,
        "distance": rep.distance,
        "weighted_distance": rep.weighted_distance,
        "total_probability": rep.total_probability,
        "resolution": rep.resolution,
    }
    emit(make_report("tiny-exact", summary, ["outcomes", "probability", "n1", "distance"], rows), args.format, args.output)
    return 0


def cmd_sweep(args):
    table = pipeline.scaling_sweep(args.n, args.eps, trials=args.trials, seed=args.seed, threads=args.threads)
    rows = [to_jsonable(r) for r in table.rows]
    slopes_n = [v for v in table.slope_vs_N.values() if v is not None]
    slopes_e = [v for v in table.slope_vs_inv_eps.values() if v is not None]
    summary = {
        "seed": args.seed,
        "trials": args.trials,
        "slope_vs_N": table.slope_vs_N,
        "slope_vs_inv_eps": table.slope_vs_inv_eps,
        "mean_slope_vs_N": float(np.mean(slopes_n)) if slopes_n else None,
        "mean_slope_vs_inv_eps": float(np.mean(slopes_e)) if slopes_e else None,
    }
    cols = ["N", "epsilon", "log_required_M", "required_M", "bound", "empirical_error"]
    emit(make_report("sweep", summary, cols, rows), args.format, args.output)
    return 0


def cmd_end_to_end(args):
    rep = pipeline.end_to_end(args.n, args.m, args.seed)
    data = to_jsonable(rep)
    sources = data.pop("sources")
    rows = [
        {"source": name, "attempts": s["attempts"], "qubits_consumed": s["qubits_consumed"], "steps": sum(s["steps_per_attempt"])}
        for name, s in zip("AB", sources)
    ]
    emit(make_report("end-to-end", data, ["source", "attempts", "qubits_consumed", "steps"], rows), args.format, args.output)
    return 0


def cmd_verify(args):
    results = verify.run_all(quick=args.quick, only=args.only)
    for r in results:
        sys.stderr.write(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}\n")
    rows = [{"check": r.name, "passed": r.passed, "detail": r.detail} for r in results]
    ok = all(r.passed for r in results)
    emit(make_report("verify", {"passed": ok, "checks": len(results)}, ["check", "passed", "detail"], rows), args.format, args.output)
    return 0 if ok else 1


COMMANDS = {
    "walk": cmd_walk,
    "growth-quantum": cmd_growth_quantum,
    "localize": cmd_localize,
    "tiny-exact": cmd_tiny_exact,
    "sweep": cmd_sweep,
    "end-to-end": cmd_end_to_end,
    "verify": cmd_verify,
}


def parse_and_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    args.threads = resolve_threads(args.threads)
    try:
        return COMMANDS[args.subcommand](args)
    except (DomainError, CapacityError) as exc:
        sys.stderr.write(f"rqcsim {args.subcommand}: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"rqcsim {args.subcommand}: cannot write output: {exc}\n")
        return 2


def main():
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()

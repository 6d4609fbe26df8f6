"""Command-line interface: gen / solve / bench / check / rate.

Exit codes: 0 success, 1 usage or configuration error, 2 solver failure,
3 certificate violation detected by ``check``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, problems
from .record import RunRecord, SolverError


def _parse_params(pairs):
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ValueError(f"--param expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _cmd_gen(args) -> int:
    params = _parse_params(args.param)
    config = harness.ExperimentConfig(
        problem={"family": args.family, "params": params, "seed": args.seed},
        solver={"algorithm": "lalm"}, run={})
    problem, aux = harness.build_problem(config)
    fields = {"family": args.family, "seed": args.seed, "params": params}
    dataset = aux.get("dataset")
    fields.update(problems.instance_fields(problem, dataset))
    if "clean" in aux:
        for key in ("clean", "noisy"):
            img = aux[key]
            fields[key] = {"height": img.shape[0], "width": img.shape[1],
                           "pixels": img.ravel()}
            if args.pgm_dir:
                Path(args.pgm_dir).mkdir(parents=True, exist_ok=True)
                problems.write_pgm(Path(args.pgm_dir) / f"{args.family}_{key}.pgm", img)
    problems.dump_structured(fields, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_solve(args) -> int:
    config = harness.ExperimentConfig.from_file(args.config)
    record, summary = harness.run_experiment(config)
    print(json.dumps({key: summary[key] for key in
                      ("problem", "status", "iterations", "wall_time_s",
                       "final_obj_err", "final_feas", "trace", "summary")
                      if key in summary}, indent=2, default=float))
    return 0


def _cmd_bench(args) -> int:
    suite = json.loads(Path(args.suite).read_text())
    experiments = suite["experiments"] if isinstance(suite, dict) else suite
    combined = []
    failed = False
    for entry in experiments:
        config = harness.ExperimentConfig.from_dict(entry)
        try:
            _, summary = harness.run_experiment(config)
        except SolverError as err:
            summary = {"config": config.to_dict(), "status": "solver_error",
                       "error": str(err)}
            failed = True
        combined.append(summary)
        print(f"[{summary.get('status')}] {summary.get('problem', '?')}")
    out = Path(args.out or "bench_summary.json")
    out.write_text(json.dumps(combined, indent=2, default=float))
    print(f"wrote {out}")
    return 2 if failed else 0


def _cmd_check(args) -> int:
    record = RunRecord.from_csv(args.trace)
    violations = harness.audit_record(record, bound_slack=args.bound_slack,
                                      slack_floor=-args.slack_tol)
    if violations:
        for line in violations:
            print(f"VIOLATION {line}")
        return 3
    print(f"ok: {len(record)} rows, no certificate violations")
    return 0


def _cmd_rate(args) -> int:
    record = RunRecord.from_csv(args.trace)
    slope = harness.rate_fit(record, args.k_lo, args.k_hi, args.field)
    print(f"{args.field}: slope {slope:.4f} over k in [{args.k_lo}, {args.k_hi}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alpd",
        description="Accelerated linearized ALM/ADMM solvers with runtime "
                    "convergence-rate certificates")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate and serialize a problem instance")
    p.add_argument("--family", required=True,
                   choices=["ecqp", "nnqp", "two_block_qp", "tv", "svm"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--out", required=True)
    p.add_argument("--pgm-dir", help="also export tv images as 16-bit PGM")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("solve", help="run one configured experiment")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("bench", help="run a suite of experiments")
    p.add_argument("--suite", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("check", help="re-audit the certificates in a stored trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--slack-tol", type=float, default=1e-8)
    p.add_argument("--bound-slack", type=float, default=1e-8)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("rate", help="fit a log-log decay slope on a trace column")
    p.add_argument("--trace", required=True)
    p.add_argument("--field", default="obj_err")
    p.add_argument("--k-lo", type=int, required=True)
    p.add_argument("--k-hi", type=int, required=True)
    p.set_defaults(func=_cmd_rate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except SolverError as err:
        print(f"solver error: {err}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

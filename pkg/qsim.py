"""
qsim command line
    python qsim.py run <config> [--out report.json] [--csv traj.csv] [--seed S]
    python qsim.py sweep <config> --halvings H [--jobs J] [--csv table.csv]
    python qsim.py census <config> [--steps S]
    python qsim.py validate <config>
"""

import argparse
import json
import os
import sys
import warnings

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src'))

from errors import (
    EXIT_CAP, EXIT_OK, EXIT_TOLERANCE, EXIT_VALIDATION,
    CapExceeded, DimensionMismatch, IndexOutOfRange, NonFinitePhase, NonHermitian,
    NonUnitaryGate, ParseError, QsimError, QsimWarning, ToleranceFailure,
    UnknownAnalyticCase, UnnormalizedState, ValidationError,
)
from problem import load_problem
from runner import convergence_sweep, gate_census, run
from utils import format_count

# Numerical breakdowns during a run fail like a tolerance check.
NUMERICAL_FAILURES = (NonFinitePhase, UnnormalizedState, NonHermitian, DimensionMismatch, NonUnitaryGate)


def cmd_run(args) -> int:
    problem = load_problem(args.config, seed=args.seed)
    report = run(problem)
    report.save(json_path=args.out, csv_path=args.csv)

    plan = report.plan
    print(f"{report.name}: {plan.steps} steps of dt={plan.dt}, realized T={plan.realized_T:.6g}")
    print(f"  final norm: {report.final_norm:.12f}")
    for kind, count in report.gate_counts.items():
        if count:
            print(f"  {kind}: {count}")
    for check in report.checks:
        mark = '✓' if check['passed'] else '✗'
        print(f"  {mark} {check['name']}: {check['value']:.6e} (limit {check['limit']:.3e})")
    if args.out is None and args.csv is None:
        print(report.trajectory.tail(5).to_string(index=False))
    report.raise_for_checks()
    return EXIT_OK


def cmd_sweep(args) -> int:
    problem = load_problem(args.config)
    table = convergence_sweep(problem, halvings=args.halvings, n_jobs=args.jobs)
    if args.csv:
        table.to_csv(args.csv, index=False)
    print(table.to_string(index=False))
    return EXIT_OK


def cmd_census(args) -> int:
    problem = load_problem(args.config)
    census = gate_census(problem, steps=args.steps)
    print(f"{census['name']}: {census['steps']} step(s), {census['num_qubits']} qubits, "
          f"{format_count(census['amplitude_count'])} amplitudes")
    for kind, predicted in census['predicted'].items():
        measured = census['measured'][kind]
        if predicted or measured:
            print(f"  {kind:32s} predicted {predicted:>10d}  measured {measured:>10d}")
    print(f"  match: {census['match']}")
    return EXIT_OK


def cmd_validate(args) -> int:
    problem = load_problem(args.config)
    plan = problem.plan
    print(json.dumps({
        'name': problem.name,
        'problem_type': problem.problem_type,
        'num_qubits': problem.num_qubits,
        'steps': plan.steps,
        'realized_T': plan.realized_T,
        'mode': plan.mode,
    }, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='qsim', description='State-vector emulator for '
                                     'Trotterized spin and grid-particle dynamics')
    sub = parser.add_subparsers(dest='command', required=True)

    p_run = sub.add_parser('run', help='evolve a problem and emit its report')
    p_run.add_argument('config')
    p_run.add_argument('--out', default=None, help='JSON report path')
    p_run.add_argument('--csv', default=None, help='trajectory CSV path')
    p_run.add_argument('--seed', type=int, default=None, help='override plan.seed')
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser('sweep', help='convergence sweep against the dense oracle')
    p_sweep.add_argument('config')
    p_sweep.add_argument('--halvings', type=int, default=2)
    p_sweep.add_argument('--jobs', type=int, default=1)
    p_sweep.add_argument('--csv', default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_census = sub.add_parser('census', help='predicted vs instrumented gate counts')
    p_census.add_argument('config')
    p_census.add_argument('--steps', type=int, default=None, help='default: the whole plan')
    p_census.set_defaults(func=cmd_census)

    p_validate = sub.add_parser('validate', help='load and validate a problem file')
    p_validate.add_argument('config')
    p_validate.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter('always', QsimWarning)
            return args.func(args)
    except (ValidationError, ParseError, IndexOutOfRange, UnknownAnalyticCase) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ToleranceFailure as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except NUMERICAL_FAILURES as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except CapExceeded as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except QsimError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == '__main__':
    sys.exit(main())

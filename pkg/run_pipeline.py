"""
Pipeline Runner
Runs every bundled problem end to end, a convergence sweep and the gate census,
and writes reports under results/.
"""

import glob
import os
import sys
import time

import pandas as pd

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src'))

from problem import load_problem
from runner import census_table, convergence_sweep, quadratic_fit_residual, run
from utils import bundled_config_dir, ensure_dir, format_count


def run_pipeline():
    """Execute every bundled problem plus the sweep and census steps."""

    print("="*70)
    print("QSIM: TROTTERIZED SPIN AND GRID-PARTICLE EMULATOR")
    print("Complete Pipeline Execution")
    print("="*70)

    start_time = time.time()
    base_dir = os.path.dirname(os.path.abspath(__file__))
    results_dir = ensure_dir(os.path.join(base_dir, 'results'))

    # =========================================================================
    # Step 1: Bundled problems
    # =========================================================================
    print("\n" + "="*70)
    print("STEP 1: BUNDLED PROBLEMS")
    print("="*70)

    reports = []
    for path in sorted(glob.glob(os.path.join(bundled_config_dir(), '*.json'))):
        problem = load_problem(path)
        report = run(problem)
        report.save(
            json_path=os.path.join(results_dir, f"{problem.name}_report.json"),
            csv_path=os.path.join(results_dir, f"{problem.name}_trajectory.csv"),
        )
        reports.append(report)
        mark = '✓' if report.passed else '✗'
        print(f"{mark} {problem.name}: {report.plan.steps} steps, "
              f"final norm {report.final_norm:.12f}, {len(report.checks)} check(s)")
        for check in report.failed_checks():
            print(f"   ⚠ {check['name']} = {check['value']:.3e} (limit {check['limit']:.3e})")

    # =========================================================================
    # Step 2: Convergence sweep
    # =========================================================================
    print("\n" + "="*70)
    print("STEP 2: CONVERGENCE SWEEP (3-SPIN SYSTEM)")
    print("="*70)

    problem = load_problem(os.path.join(bundled_config_dir(), 'three_spin.json'))
    sweeps = []
    for mode in ('exact_term', 'strang'):
        plan = problem.plan.replace(mode=mode, dt=1e-2, shots=0)
        table = convergence_sweep(problem, plan, halvings=2, n_jobs=-1)
        table.insert(0, 'mode', mode)
        sweeps.append(table)
    sweep_df = pd.concat(sweeps, ignore_index=True)
    sweep_df.to_csv(os.path.join(results_dir, 'convergence_sweep.csv'), index=False)
    print(sweep_df.to_string(index=False))

    # =========================================================================
    # Step 3: Gate census
    # =========================================================================
    print("\n" + "="*70)
    print("STEP 3: GATE CENSUS")
    print("="*70)

    census_df = census_table()
    census_df.to_csv(os.path.join(results_dir, 'census_table.csv'), index=False)
    print(census_df.to_string(index=False))
    for n, group in census_df.groupby('N'):
        residual = quadratic_fit_residual(group['k'], group['hadamard'] + group['controlled_phase'])
        print(f"   N={n}: quadratic fit residual {residual:.2e}, "
              f"amplitudes up to {format_count(group['amplitudes'].max())}")

    # =========================================================================
    # Summary
    # =========================================================================
    elapsed = time.time() - start_time
    passed = sum(report.passed for report in reports)

    print("\n" + "="*70)
    print("PIPELINE COMPLETE")
    print("="*70)
    print(f"\n⏱  Total execution time: {elapsed:.1f} seconds")
    print(f"\n📊 Summary:")
    print(f"   • Problems run: {len(reports)}")
    print(f"   • Passing embedded checks: {passed}/{len(reports)}")
    print(f"   • Census counts match predictions: {bool(census_df['match'].all())}")

    print(f"\n📁 Output files:")
    print(f"   • results/<problem>_report.json")
    print(f"   • results/<problem>_trajectory.csv")
    print(f"   • results/convergence_sweep.csv")
    print(f"   • results/census_table.csv")
    print()

    return reports, sweep_df, census_df


if __name__ == "__main__":
    run_pipeline()

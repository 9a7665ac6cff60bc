"""
Runner Module
Run orchestration: end-to-end runs with embedded checks, convergence sweeps
against the dense oracle, and gate-count census.
"""

import math
import os
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from errors import CapExceeded, ToleranceFailure, ValidationError
from oracle import (
    DenseOperator, analytic_suite, dense_cap, dense_expectation,
    dense_grid_hamiltonian, dense_spin_hamiltonian, exact_propagate,
)
from particle_sim import (
    CoulombSoft, Harmonic, OneBody, ParticleSystem, PotentialSpec, TwoBody,
    evolve_particles, split_step,
)
from plan import EvolutionPlan
from problem import Problem
from qft import qft_gate_counts
from spin_sim import (
    StepperMode, estimate_pauli_by_sampling, evolve_spins, expectation_pauli,
    trotter_step,
)
from statevec import RNG_ALGORITHM, StateVector, distance, fidelity, sample_counts
from utils import GateTally, ensure_dir, log_execution, save_json


CENSUS_KS = (4, 5, 6, 7, 8)
CENSUS_NS = (1, 2)
QFT_GATE_KINDS = ('hadamard', 'controlled_phase', 'swap')


@dataclass
class RunReport:
    """Everything one run produces; to_dict() is the JSON report."""

    name: str
    problem_type: str
    plan: EvolutionPlan
    trajectory: pd.DataFrame
    final_norm: float
    gate_counts: Dict[str, int]
    predicted_gate_counts: Dict[str, int]
    config: Optional[dict] = None
    histogram: Optional[Dict[int, int]] = None
    sampled_estimates: List[Dict[str, Any]] = field(default_factory=list)
    checks: List[Dict[str, Any]] = field(default_factory=list)
    densities: Optional[pd.DataFrame] = None
    timestamp: str = field(default_factory=lambda: datetime.now().isoformat(timespec='seconds'))
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def passed(self) -> bool:
        return all(check['passed'] for check in self.checks)

    def failed_checks(self) -> List[Dict[str, Any]]:
        return [check for check in self.checks if not check['passed']]

    def raise_for_checks(self) -> None:
        failed = self.failed_checks()
        if failed:
            summary = ', '.join(f"{c['name']}={c['value']:.3e} (limit {c['limit']:.3e})" for c in failed)
            raise ToleranceFailure(f"{self.name}: {summary}")

    def to_dict(self) -> Dict[str, Any]:
        report = {
            'name': self.name,
            'problem_type': self.problem_type,
            'timestamp': self.timestamp,
            'rng_algorithm': self.rng_algorithm,
            'seed': self.plan.seed,
            'steps': self.plan.steps,
            'realized_T': self.plan.realized_T,
            'plan': self.plan.to_dict(),
            'final_norm': self.final_norm,
            'gate_counts': self.gate_counts,
            'predicted_gate_counts': self.predicted_gate_counts,
            'trajectory_columns': list(self.trajectory.columns),
            'trajectory': self.trajectory.to_dict(orient='records'),
        }
        if self.histogram is not None:
            report['histogram'] = {str(b): c for b, c in self.histogram.items()}
            report['sampled_estimates'] = self.sampled_estimates
        report['checks'] = self.checks
        report['passed'] = self.passed
        report['config'] = self.config
        return report

    def save(self, json_path: Optional[str] = None, csv_path: Optional[str] = None) -> None:
        """Write the JSON report and/or the trajectory CSV (plus a density CSV when recorded)."""
        if json_path:
            save_json(self.to_dict(), json_path)
            log_execution('RunReport.save', f"report written to {json_path}")
        if csv_path:
            ensure_dir(os.path.dirname(csv_path))
            self.trajectory.to_csv(csv_path, index=False)
            log_execution('RunReport.save', f"trajectory written to {csv_path}")
            if self.densities is not None and not self.densities.empty:
                density_path = os.path.splitext(csv_path)[0] + '_density.csv'
                self.densities.to_csv(density_path, index=False)


# ---------------------------------------------------------------------------
# Helpers shared by run, sweep and census
# ---------------------------------------------------------------------------

def oracle_time(plan: EvolutionPlan, problem_type: str = 'spins') -> float:
    """
    Time at which the dense propagator should be compared with a run.

    The literal step I + i*sign*H*dt approximates exp(+i*sign*H*dt), i.e. a run
    towards t = -sign*T. Particle steps with paper_literal_signs use exp(+iEt) phases
    and so run towards t = -T.
    """
    if problem_type == 'spins':
        if plan.mode == 'literal_paper':
            return -plan.sign * plan.realized_T
    elif plan.paper_literal_signs:
        return -plan.realized_T
    return plan.realized_T


def relative_energy_drift(energy: np.ndarray) -> float:
    """Largest deviation from the initial energy, relative to it; absolute when it is zero."""
    deviation = float(np.max(np.abs(energy - energy[0])))
    reference = abs(float(energy[0]))
    return deviation / reference if reference > 0 else deviation


def dense_hamiltonian(problem: Problem) -> DenseOperator:
    """Dense generator of the problem (CapExceeded beyond the dense cap)."""
    cap = dense_cap()
    if problem.num_qubits > cap:
        raise CapExceeded(f"{problem.num_qubits} qubits exceeds the dense-oracle cap of {cap}")
    if problem.problem_type == 'spins':
        return dense_spin_hamiltonian(problem.system)
    return dense_grid_hamiltonian(problem.system, problem.potentials, problem.plan.minimal_image)


def predict_gate_counts(problem: Problem, plan: Optional[EvolutionPlan] = None,
                        steps: Optional[int] = None) -> Dict[str, int]:
    """
    Closed-form gate and phase-application counts for `steps` steps.

    Spins: M term applications per step (2M for strang). Particles: per kinetic
    sweep, two QFTs per particle; one kinetic phase per particle per sweep; one
    diagonal-phase application per potential entry per step. Strang makes two
    half sweeps.
    """
    plan = plan or problem.plan
    steps = plan.steps if steps is None else steps
    tally = GateTally()

    if problem.problem_type == 'spins':
        terms = problem.system.num_terms
        if plan.mode == 'literal_paper':
            tally.add('literal_term_applications', terms * steps)
        else:
            sweeps = 2 if plan.mode == 'strang' else 1
            tally.add('exact_term_applications', sweeps * terms * steps)
        return tally.report()

    system = problem.system
    sweeps = 2 if plan.mode == 'strang' else 1
    per_qft = qft_gate_counts(system.qubits_per_particle)
    for kind in QFT_GATE_KINDS:
        tally.add(kind, 2 * per_qft[kind] * system.num_particles * sweeps * steps)
    tally.add('kinetic_phase_applications', system.num_particles * sweeps * steps)
    tally.add('diagonal_phase_applications', len(problem.potentials.groups) * steps)
    return tally.report()


def _evolve(problem: Problem, plan: EvolutionPlan, state: StateVector,
            counter: Optional[GateTally] = None, record_observables: bool = True,
            extra_observables: Optional[dict] = None):
    if problem.problem_type == 'spins':
        observables = problem.observables if record_observables else []
        trajectory, final = evolve_spins(state, problem.system, plan, observables, counter)
        return trajectory, final, None
    return evolve_particles(
        state, problem.system, problem.potentials, plan,
        include_moments=record_observables and 'moments' in problem.observables,
        include_density=record_observables and 'density' in problem.observables,
        extra_observables=extra_observables, counter=counter,
    )


def _particle_position_estimates(system: ParticleSystem, histogram: Dict[int, int],
                                 shots: int, exact_row: pd.Series) -> List[Dict[str, Any]]:
    index = np.fromiter(histogram.keys(), dtype=np.int64)
    counts = np.fromiter(histogram.values(), dtype=np.float64)
    mask = system.grid_size - 1
    estimates = []
    for particle in range(system.num_particles):
        x = ((index >> (particle * system.qubits_per_particle)) & mask) * system.dx
        mean = float(np.dot(counts, x) / shots)
        variance = float(np.dot(counts, (x - mean) ** 2) / shots)
        exact_key = f"x_mean_{particle}"
        estimates.append({
            'observable': exact_key,
            'sampled_mean': mean,
            'standard_error': math.sqrt(variance / shots),
            'exact': float(exact_row[exact_key]) if exact_key in exact_row else None,
        })
    return estimates


def _check(name: str, value: float, limit: float, passed: bool) -> Dict[str, Any]:
    return {'name': name, 'value': float(value), 'limit': float(limit), 'passed': bool(passed)}


def evaluate_checks(problem: Problem, plan: EvolutionPlan, trajectory: pd.DataFrame,
                    initial: StateVector, final: StateVector) -> List[Dict[str, Any]]:
    """Evaluate the problem's embedded tolerance block against a finished run."""
    tolerances = problem.tolerances
    if tolerances is None:
        return []
    checks = []

    if tolerances.max_norm_drift is not None:
        drift = float(np.max(np.abs(trajectory['norm'].to_numpy() - 1.0)))
        checks.append(_check('max_norm_drift', drift, tolerances.max_norm_drift,
                             drift <= tolerances.max_norm_drift))

    if tolerances.analytic is not None:
        analytic = tolerances.analytic
        if analytic.observable not in trajectory.columns:
            raise ValidationError(f"analytic check observable {analytic.observable!r} is not "
                                  f"recorded; columns are {list(trajectory.columns)}")
        expected = analytic_suite(analytic.case, analytic.params, trajectory['t'].to_numpy())
        error = float(np.max(np.abs(trajectory[analytic.observable].to_numpy() - expected)))
        checks.append(_check(f"analytic:{analytic.case}", error, analytic.max_abs_error,
                             error <= analytic.max_abs_error))

    if tolerances.min_oracle_fidelity is not None:
        reference = exact_propagate(dense_hamiltonian(problem), initial,
                                    oracle_time(plan, problem.problem_type))
        value = fidelity(final.normalized(), reference)
        checks.append(_check('oracle_fidelity', value, tolerances.min_oracle_fidelity,
                             value >= tolerances.min_oracle_fidelity))

    if tolerances.max_relative_energy_drift is not None:
        if 'energy' not in trajectory.columns:
            raise ValidationError("max_relative_energy_drift needs the energy observable")
        drift = relative_energy_drift(trajectory['energy'].to_numpy())
        checks.append(_check('relative_energy_drift', drift, tolerances.max_relative_energy_drift,
                             drift <= tolerances.max_relative_energy_drift))
    return checks


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def run(problem: Problem, plan: Optional[EvolutionPlan] = None) -> RunReport:
    """
    Evolve a problem end to end and assemble its report.

    Args:
        problem: Validated problem
        plan: Overrides problem.plan when given

    Returns:
        RunReport with trajectory, gate counts, optional histogram and checks
    """
    plan = plan or problem.plan
    problem = problem.with_plan(plan)
    log_execution('run', f"{problem.name}: {problem.problem_type}, {problem.num_qubits} qubits, "
                         f"mode={plan.mode}, seed={plan.seed}")

    extra_observables = {}
    if problem.problem_type == 'particles' and 'energy' in problem.observables:
        operator = dense_hamiltonian(problem)
        extra_observables['energy'] = lambda s: dense_expectation(operator, s.normalized())

    counter = GateTally()
    initial = problem.initial_state()
    trajectory, final, densities = _evolve(problem, plan, initial, counter,
                                           extra_observables=extra_observables)

    report = RunReport(
        name=problem.name,
        problem_type=problem.problem_type,
        plan=plan,
        trajectory=trajectory,
        final_norm=final.norm(),
        gate_counts=counter.report(),
        predicted_gate_counts=predict_gate_counts(problem, plan),
        config=problem.config,
        densities=densities,
    )

    if plan.shots > 0:
        measured = final.normalized()
        report.histogram = sample_counts(measured, plan.shots, plan.seed)
        if problem.problem_type == 'spins':
            for obs in problem.observables:
                mean, stderr = estimate_pauli_by_sampling(measured, obs, plan.shots, plan.seed)
                report.sampled_estimates.append({
                    'observable': obs.label,
                    'sampled_mean': mean,
                    'standard_error': stderr,
                    'exact': expectation_pauli(measured, obs),
                })
        else:
            report.sampled_estimates = _particle_position_estimates(
                problem.system, report.histogram, plan.shots, trajectory.iloc[-1])

    report.checks = evaluate_checks(problem, plan, trajectory, initial, final)
    status = 'passed' if report.passed else f"FAILED {len(report.failed_checks())} check(s)"
    log_execution('run', f"{problem.name}: {len(trajectory)} records, {status}")
    return report


def _sweep_variant(problem: Problem, plan: EvolutionPlan, operator: DenseOperator,
                   initial: StateVector) -> Dict[str, Any]:
    _, final, _ = _evolve(problem, plan, initial, record_observables=False)
    reference = exact_propagate(operator, initial, oracle_time(plan, problem.problem_type))
    return {'dt': plan.dt, 'steps': plan.steps, 'realized_T': plan.realized_T,
            'error': distance(final, reference)}


def convergence_sweep(problem: Problem, plan: Optional[EvolutionPlan] = None,
                      halvings: int = 2, n_jobs: int = 1) -> pd.DataFrame:
    """
    Final-state error against the dense propagator at dt, dt/2, ..., dt/2^halvings.

    Args:
        problem: Problem within the dense cap
        plan: Base plan (problem.plan by default)
        halvings: Number of dt halvings
        n_jobs: joblib workers for the dt variants

    Returns:
        DataFrame with columns dt, steps, realized_T, error, ratio, observed_order,
        one row per dt in decreasing order
    """
    plan = plan or problem.plan
    if halvings < 0:
        raise ValidationError(f"halvings must be >= 0, got {halvings}")
    operator = dense_hamiltonian(problem)
    # Decompose once, before the workers share the operator.
    operator.eigenvalues()
    initial = problem.initial_state()
    plans = [plan.with_dt(plan.dt / (2 ** h)) for h in range(halvings + 1)]
    log_execution('convergence_sweep', f"{problem.name}: dt={[p.dt for p in plans]}, mode={plan.mode}")

    rows = Parallel(n_jobs=n_jobs, prefer='threads')(
        delayed(_sweep_variant)(problem, p, operator, initial) for p in plans
    )
    table = pd.DataFrame(rows, columns=['dt', 'steps', 'realized_T', 'error'])
    previous = table['error'].shift(1)
    table['ratio'] = previous / table['error']
    table['observed_order'] = np.log2(table['ratio'])
    return table


def _instrumented_steps(problem: Problem, plan: EvolutionPlan, steps: int) -> GateTally:
    counter = GateTally()
    state = problem.initial_state()
    if problem.problem_type == 'spins':
        mode = StepperMode.from_plan(plan)
        for _ in range(steps):
            state = trotter_step(state, problem.system, plan.dt, mode,
                                 plan.renormalize_after_step, counter)
    else:
        for _ in range(steps):
            state = split_step(state, problem.system, problem.potentials, plan.dt, plan.mode,
                               plan.paper_literal_signs, plan.minimal_image, counter)
    return counter


def gate_census(problem: Problem, plan: Optional[EvolutionPlan] = None,
                steps: Optional[int] = None) -> Dict[str, Any]:
    """
    Predicted and instrumented gate counts for `steps` steps (default: the whole plan).

    Returns:
        Dict with predicted, measured, match, steps, num_qubits and the 2^n amplitude count
    """
    plan = plan or problem.plan
    steps = plan.steps if steps is None else steps
    predicted = predict_gate_counts(problem, plan, steps)
    measured = _instrumented_steps(problem, plan, steps).report()
    census = {
        'name': problem.name,
        'steps': steps,
        'mode': plan.mode,
        'num_qubits': problem.num_qubits,
        'amplitude_count': 2 ** problem.num_qubits,
        'predicted': predicted,
        'measured': measured,
        'match': predicted == measured,
    }
    if problem.problem_type == 'particles':
        census['num_particles'] = problem.system.num_particles
        census['qubits_per_particle'] = problem.system.qubits_per_particle
    return census


def census_problem(num_particles: int, k: int, mode: str = 'lie') -> Problem:
    """Harmonic trap per particle plus a soft-Coulomb pair, on a unit box."""
    system = ParticleSystem(num_particles, k, box_length=1.0)
    one_body = tuple(OneBody(i, Harmonic(1.0, 0.5)) for i in range(num_particles))
    two_body = tuple(TwoBody((i, j), CoulombSoft(1.0))
                     for i in range(num_particles) for j in range(i + 1, num_particles))
    return Problem(
        name=f"census_N{num_particles}_k{k}",
        problem_type='particles',
        system=system,
        plan=EvolutionPlan(dt=1e-3, T=1e-3, mode=mode),
        potentials=PotentialSpec(one_body, two_body).resolved(system),
        basis_index=0,
        observables=('moments',),
    )


def census_table(ks: Iterable[int] = CENSUS_KS, ns: Iterable[int] = CENSUS_NS,
                 mode: str = 'lie') -> pd.DataFrame:
    """
    One-step gate census over a grid of (N, k).

    Returns:
        DataFrame with columns N, k, hadamard, controlled_phase, swap, total_gates,
        diagonal_phase_applications, kinetic_phase_applications, amplitudes, match
    """
    rows = []
    for n in ns:
        for k in ks:
            census = gate_census(census_problem(n, k, mode), steps=1)
            measured = census['measured']
            rows.append({
                'N': n,
                'k': k,
                'hadamard': measured['hadamard'],
                'controlled_phase': measured['controlled_phase'],
                'swap': measured['swap'],
                'total_gates': sum(measured[kind] for kind in QFT_GATE_KINDS),
                'diagonal_phase_applications': measured['diagonal_phase_applications'],
                'kinetic_phase_applications': measured['kinetic_phase_applications'],
                'amplitudes': census['amplitude_count'],
                'match': census['match'],
            })
    return pd.DataFrame(rows)


def quadratic_fit_residual(ks: Sequence[int], counts: Sequence[float]) -> float:
    """Max residual of a least-squares quadratic in k through the counts."""
    ks = np.asarray(ks, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    coefficients = np.polyfit(ks, counts, 2)
    return float(np.max(np.abs(np.polyval(coefficients, ks) - counts)))

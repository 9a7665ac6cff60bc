"""
Spin Simulation Module
N two-state systems under M one- and two-body Pauli terms, advanced one term at
a time by the literal step I + i*H*dt/hbar, the exact term exponential, or a
symmetrized (Strang) sweep of exact terms.
"""

import math
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from errors import (
    DimensionMismatch, InvalidPlan, InvalidTerm, QsimWarning, UnnormalizedState,
    ValidationError,
)
from plan import EvolutionPlan, SPIN_MODES
from statevec import (
    GateOp, HADAMARD, PAULI_MATRICES, StateVector, pauli_kernel, apply_gate,
    sample_counts,
)
from utils import GateTally, log_execution


EXPECTATION_NORM_ATOL = 1e-6
IMAG_ATOL = 1e-10
NORM_GROWTH_WARNING = 0.01
S_DAGGER = np.array([[1, 0], [0, -1j]], dtype=np.complex128)


@dataclass(frozen=True)
class PauliTerm:
    """One Hamiltonian summand coefficient * P, P a Pauli product on 1 or 2 sites."""

    coefficient: float
    sites: Tuple[int, ...]
    paulis: Tuple[str, ...]

    def __post_init__(self):
        sites = tuple(int(s) for s in self.sites)
        paulis = tuple(str(p).upper() for p in self.paulis)
        object.__setattr__(self, 'sites', sites)
        object.__setattr__(self, 'paulis', paulis)
        object.__setattr__(self, 'coefficient', float(self.coefficient))

        if not 1 <= len(sites) <= 2:
            raise InvalidTerm(f"1 ≤ |sites| ≤ 2 violated: got {len(sites)} sites")
        if len(paulis) != len(sites):
            raise InvalidTerm(f"one Pauli label per site required: {sites} vs {paulis}")
        if len(set(sites)) != len(sites):
            raise InvalidTerm(f"sites distinct violated: {sites}")
        if any(s < 0 for s in sites):
            raise InvalidTerm(f"sites must be non-negative: {sites}")
        if any(p not in ('X', 'Y', 'Z') for p in paulis):
            raise InvalidTerm(f"Pauli labels must be X, Y or Z: {paulis}")
        if not math.isfinite(self.coefficient):
            raise InvalidTerm(f"coefficient finite violated: {self.coefficient}")

    @property
    def label(self) -> str:
        return ''.join(f"{p}{s}" for p, s in zip(self.paulis, self.sites))

    def pauli_matrix(self) -> np.ndarray:
        """P on the term's site block, local basis bit(sites[0]) + 2*bit(sites[1])."""
        matrix = PAULI_MATRICES[self.paulis[0]]
        if len(self.sites) == 2:
            matrix = np.kron(PAULI_MATRICES[self.paulis[1]], matrix)
        return matrix


@dataclass(frozen=True)
class SpinSystem:
    """N spins and an ordered list of terms; the order is the Trotter order."""

    num_spins: int
    terms: Tuple[PauliTerm, ...]
    hbar: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'terms', tuple(self.terms))
        if self.num_spins < 1:
            raise ValidationError(f"num_spins must be >= 1, got {self.num_spins}")
        if len(self.terms) < 1:
            raise ValidationError("M ≥ 1 violated: at least one term required")
        if not self.hbar > 0:
            raise ValidationError(f"hbar must be positive, got {self.hbar}")
        for term in self.terms:
            if max(term.sites) >= self.num_spins:
                raise InvalidTerm(f"term {term.label} site exceeds num_spins={self.num_spins}")

    @property
    def num_terms(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class StepperMode:
    """literal_paper, exact_term or strang; sign applies to literal_paper only."""

    kind: str = 'exact_term'
    sign: int = 1

    def __post_init__(self):
        if self.kind not in SPIN_MODES:
            raise ValidationError(f"unknown spin stepper mode {self.kind!r}")
        if self.sign not in (1, -1):
            raise ValidationError(f"sign must be +1 or -1, got {self.sign}")

    @classmethod
    def from_plan(cls, plan: EvolutionPlan) -> 'StepperMode':
        return cls(plan.mode, plan.sign)


def apply_pauli_product(state: StateVector, term: PauliTerm) -> StateVector:
    """P|psi> for the term's Pauli product (coefficient not applied)."""
    amps = state.amplitudes
    for site, label in zip(term.sites, term.paulis):
        amps = pauli_kernel(amps, site, label)
    return StateVector._adopt(state.num_qubits, amps)


def term_unitary_exact(term: PauliTerm, dt: float, hbar: float = 1.0) -> np.ndarray:
    """
    exp(-i*theta*P) = cos(theta) I - i sin(theta) P with theta = coefficient*dt/hbar.

    Returns:
        2x2 or 4x4 unitary on the term's site block
    """
    theta = term.coefficient * dt / hbar
    pauli = term.pauli_matrix()
    return math.cos(theta) * np.eye(pauli.shape[0]) - 1j * math.sin(theta) * pauli


def term_step_exact(state: StateVector, term: PauliTerm, dt: float, hbar: float = 1.0,
                    counter: Optional[GateTally] = None) -> StateVector:
    """Apply exp(-i*coefficient*P*dt/hbar) in place on the site block."""
    theta = term.coefficient * dt / hbar
    flipped = apply_pauli_product(state, term).amplitudes
    out = math.cos(theta) * state.amplitudes - 1j * math.sin(theta) * flipped
    if counter is not None:
        counter.add('exact_term_applications')
    return StateVector._adopt(state.num_qubits, out)


def term_step_literal(state: StateVector, term: PauliTerm, dt: float, sign: int = 1,
                      hbar: float = 1.0, counter: Optional[GateTally] = None) -> StateVector:
    """
    Apply I + i*sign*H*dt/hbar verbatim (not unitary, not renormalized).

    For a single Pauli term norm² grows by exactly 1 + (coefficient*dt/hbar)².
    """
    if not dt > 0:
        raise InvalidPlan(f"dt must be > 0, got {dt}")
    theta = term.coefficient * dt / hbar
    flipped = apply_pauli_product(state, term).amplitudes
    out = state.amplitudes + (1j * sign * theta) * flipped
    if counter is not None:
        counter.add('literal_term_applications')
    return StateVector._adopt(state.num_qubits, out)


def trotter_step(state: StateVector, system: SpinSystem, dt: float, mode: StepperMode,
                 renormalize_after_step: bool = False,
                 counter: Optional[GateTally] = None) -> StateVector:
    """
    One sweep over all M terms in listed order.

    Args:
        state: N-qubit state
        system: Spin system
        dt: Step size (> 0)
        mode: Stepper mode; strang sweeps forward at dt/2 then backward at dt/2
        renormalize_after_step: Rescale to unit norm afterwards (literal mode)
        counter: Optional gate tally

    Returns:
        New StateVector
    """
    if not dt > 0:
        raise InvalidPlan(f"dt must be > 0, got {dt}")
    if state.num_qubits != system.num_spins:
        raise DimensionMismatch(f"state has {state.num_qubits} qubits, system has {system.num_spins} spins")

    if mode.kind == 'literal_paper':
        for term in system.terms:
            state = term_step_literal(state, term, dt, mode.sign, system.hbar, counter)
        if renormalize_after_step:
            state = state.normalized()
    elif mode.kind == 'exact_term':
        for term in system.terms:
            state = term_step_exact(state, term, dt, system.hbar, counter)
    else:
        half = 0.5 * dt
        for term in system.terms:
            state = term_step_exact(state, term, half, system.hbar, counter)
        for term in reversed(system.terms):
            state = term_step_exact(state, term, half, system.hbar, counter)
    return state


def _pauli_quadratic_form(state: StateVector, term: PauliTerm) -> float:
    value = np.vdot(state.amplitudes, apply_pauli_product(state, term).amplitudes)
    if abs(value.imag) > IMAG_ATOL:
        raise ValidationError(f"<P> has imaginary part {value.imag:.3e}")
    return float(value.real)


def expectation_pauli(state: StateVector, term: PauliTerm) -> float:
    """
    <psi|P|psi> for the term's Pauli product, coefficient not applied.

    Raises:
        UnnormalizedState: if the state's norm² is off by more than 1e-6
    """
    norm_sq = state.norm() ** 2
    if abs(norm_sq - 1.0) > EXPECTATION_NORM_ATOL:
        raise UnnormalizedState(f"norm² = {norm_sq:.12f}")
    return _pauli_quadratic_form(state, term)


def estimate_pauli_by_sampling(state: StateVector, term: PauliTerm, shots: int,
                               seed: int) -> Tuple[float, float]:
    """
    Sampled estimate of <P> and its standard error.

    X and Y sites are rotated into the Z basis on a copy before measuring.
    """
    rotated = state.normalized()
    for site, label in zip(term.sites, term.paulis):
        if label == 'Y':
            rotated = apply_gate(rotated, GateOp.single(S_DAGGER, site, label='sdg'))
        if label in ('X', 'Y'):
            rotated = apply_gate(rotated, GateOp.single(HADAMARD, site, label='h'))
    counts = sample_counts(rotated, shots, seed)
    total = 0
    for index, count in counts.items():
        parity = sum((index >> site) & 1 for site in term.sites) & 1
        total += count if parity == 0 else -count
    mean = total / shots
    stderr = math.sqrt(max(1.0 - mean * mean, 0.0) / shots)
    return mean, stderr


def default_spin_observables(system: SpinSystem) -> List[PauliTerm]:
    """<Z_i> on every spin."""
    return [PauliTerm(1.0, (i,), ('Z',)) for i in range(system.num_spins)]


def _spin_record(step: int, t: float, state: StateVector,
                 observables: Sequence[PauliTerm]) -> dict:
    norm = state.norm()
    unit = state.scaled(1.0 / norm)
    row = {'step': step, 't': t, 'norm': norm}
    for obs in observables:
        row[obs.label] = _pauli_quadratic_form(unit, obs)
    return row


def evolve_spins(state: StateVector, system: SpinSystem, plan: EvolutionPlan,
                 observables: Optional[Sequence[PauliTerm]] = None,
                 counter: Optional[GateTally] = None) -> Tuple[pd.DataFrame, StateVector]:
    """
    Repeat the Trotter step round(T/dt) times, recording every sample_stride steps.

    Observables are evaluated on a normalized copy so literal runs stay readable;
    the raw norm is recorded alongside.

    Returns:
        Tuple of (trajectory DataFrame with columns step, t, norm, <labels>, final state)
    """
    if plan.mode not in SPIN_MODES:
        raise InvalidPlan(f"mode {plan.mode!r} is not a spin stepper mode")
    if state.num_qubits != system.num_spins:
        raise DimensionMismatch(f"state has {state.num_qubits} qubits, system has {system.num_spins} spins")
    mode = StepperMode.from_plan(plan)
    if observables is None:
        observables = default_spin_observables(system)
    observables = list({obs.label: obs for obs in observables}.values())
    steps = plan.steps

    log_execution('evolve_spins', f"{steps} steps of dt={plan.dt} ({mode.kind}), "
                                  f"realized T={plan.realized_T:.6g}")

    records = [_spin_record(0, 0.0, state, observables)]
    warned = False
    for step in range(1, steps + 1):
        state = trotter_step(state, system, plan.dt, mode, plan.renormalize_after_step, counter)
        if step % plan.sample_stride == 0:
            row = _spin_record(step, step * plan.dt, state, observables)
            records.append(row)
            if not warned and abs(row['norm'] - 1.0) > NORM_GROWTH_WARNING:
                warnings.warn(f"norm drifted to {row['norm']:.6f} at step {step} "
                              f"({mode.kind} mode)", QsimWarning)
                warned = True

    trajectory = pd.DataFrame(records, columns=['step', 't', 'norm'] + [o.label for o in observables])
    log_execution('evolve_spins', f"done, final norm={state.norm():.12f}")
    return trajectory, state

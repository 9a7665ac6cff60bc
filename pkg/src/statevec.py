"""
State Vector Module
Dense complex state-vector engine: basis states, gate application, diagonal
phase kernels, terminal sampling and register marginals.

Qubit q contributes bit (b >> q) & 1 of basis index b, so qubit 0 is the least
significant bit and a k-qubit register reads as an unsigned integer.
"""

import os
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Union

import numpy as np

from errors import (
    CapExceeded, DimensionMismatch, IndexOutOfRange, NonFinitePhase,
    NonUnitaryGate, QubitOutOfRange, RegisterOutOfRange, UnnormalizedState,
    ValidationError,
)
from utils import GateTally


DEFAULT_CAP_QUBITS = 26
RNG_ALGORITHM = "numpy.random.PCG64"
UNITARY_ATOL = 1e-12
SAMPLING_NORM_ATOL = 1e-6
PHASE_CHUNK = 1 << 20

HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0)
PAULI_MATRICES = {
    'I': np.eye(2, dtype=np.complex128),
    'X': np.array([[0, 1], [1, 0]], dtype=np.complex128),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    'Z': np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

PhaseSource = Union[np.ndarray, Sequence[float], Callable[[np.ndarray], np.ndarray]]


def emulator_cap() -> int:
    """Largest qubit count the emulator will allocate (QSIM_CAP_QUBITS overrides)."""
    value = os.environ.get('QSIM_CAP_QUBITS')
    return int(value) if value else DEFAULT_CAP_QUBITS


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator used for every sampling call."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class StateVector:
    """2^n complex amplitudes over n qubits. The amplitude array is read-only."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValidationError(f"num_qubits must be >= 1, got {self.num_qubits}")
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != 1 << self.num_qubits:
            raise DimensionMismatch(
                f"expected {1 << self.num_qubits} amplitudes for {self.num_qubits} qubits, "
                f"got {amps.shape[0]}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, 'amplitudes', amps)

    @classmethod
    def _adopt(cls, num_qubits: int, amps: np.ndarray) -> 'StateVector':
        """Wrap a freshly computed array without copying it."""
        state = object.__new__(cls)
        amps.setflags(write=False)
        object.__setattr__(state, 'num_qubits', num_qubits)
        object.__setattr__(state, 'amplitudes', amps)
        return state

    @property
    def dimension(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def normalized(self) -> 'StateVector':
        return StateVector._adopt(self.num_qubits, self.amplitudes / self.norm())

    def scaled(self, factor: complex) -> 'StateVector':
        return StateVector._adopt(self.num_qubits, self.amplitudes * factor)


@dataclass(frozen=True)
class Register:
    """Contiguous block of qubits [start_qubit, start_qubit + width)."""

    start_qubit: int
    width: int

    def __post_init__(self):
        if self.start_qubit < 0:
            raise ValidationError(f"register start_qubit must be >= 0, got {self.start_qubit}")
        if self.width < 1:
            raise ValidationError(f"register width must be >= 1, got {self.width}")

    @property
    def stop_qubit(self) -> int:
        return self.start_qubit + self.width

    @property
    def size(self) -> int:
        return 1 << self.width

    def qubit(self, offset: int) -> int:
        return self.start_qubit + offset

    def validate_for(self, num_qubits: int) -> None:
        if self.stop_qubit > num_qubits:
            raise RegisterOutOfRange(
                f"register [{self.start_qubit}, {self.stop_qubit}) exceeds {num_qubits} qubits"
            )


GATE_KINDS = ('single_qubit_unitary', 'controlled_phase', 'swap')


@dataclass(frozen=True, eq=False)
class GateOp:
    """One gate of a circuit: a 2x2 unitary, a controlled phase or a swap."""

    kind: str
    qubits: tuple
    matrix: Optional[np.ndarray] = None
    angle: float = 0.0
    label: str = ''

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValidationError(f"unknown gate kind {self.kind!r}")
        expected = 1 if self.kind == 'single_qubit_unitary' else 2
        if len(self.qubits) != expected:
            raise ValidationError(f"{self.kind} acts on {expected} qubit(s), got {self.qubits}")
        if expected == 2 and self.qubits[0] == self.qubits[1]:
            raise ValidationError("control ≠ target: two-qubit gate needs distinct qubits")
        if self.kind == 'single_qubit_unitary':
            matrix = np.asarray(self.matrix, dtype=np.complex128)
            if matrix.shape != (2, 2):
                raise ValidationError(f"single-qubit matrix must be 2x2, got {matrix.shape}")
            _check_unitary(matrix)
            object.__setattr__(self, 'matrix', matrix)

    @classmethod
    def single(cls, matrix: np.ndarray, target: int, label: str = 'u') -> 'GateOp':
        return cls('single_qubit_unitary', (target,), matrix=matrix, label=label)

    @classmethod
    def hadamard(cls, target: int) -> 'GateOp':
        return cls.single(HADAMARD, target, label='h')

    @classmethod
    def cphase(cls, control: int, target: int, angle: float) -> 'GateOp':
        return cls('controlled_phase', (control, target), angle=float(angle), label='cp')

    @classmethod
    def swap(cls, a: int, b: int) -> 'GateOp':
        return cls('swap', (a, b), label='swap')

    def adjoint(self) -> 'GateOp':
        if self.kind == 'single_qubit_unitary':
            return GateOp.single(self.matrix.conj().T, self.qubits[0], label=self.label)
        if self.kind == 'controlled_phase':
            return GateOp.cphase(self.qubits[0], self.qubits[1], -self.angle)
        return self

    @property
    def tally_kind(self) -> str:
        """Key under which a GateTally counts this gate."""
        if self.label == 'h':
            return 'hadamard'
        return self.kind


def _check_unitary(matrix: np.ndarray) -> None:
    deviation = np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0])))
    if deviation >= UNITARY_ATOL:
        raise NonUnitaryGate(f"‖U†U − I‖_max = {deviation:.3e} exceeds {UNITARY_ATOL}")


def _check_qubit(q: int, num_qubits: int) -> None:
    if not 0 <= q < num_qubits:
        raise QubitOutOfRange(f"qubit {q} out of range for {num_qubits} qubits")


def _pair_view(amps: np.ndarray, q_hi: int, q_lo: int) -> np.ndarray:
    """View with axes (rest, bit q_hi, middle, bit q_lo, low)."""
    return amps.reshape(-1, 2, 1 << (q_hi - q_lo - 1), 2, 1 << q_lo)


def new_basis_state(n: int, b: int) -> StateVector:
    """
    Computational basis state |b> on n qubits.

    Args:
        n: Qubit count
        b: Basis index, little-endian

    Returns:
        StateVector with amplitude 1 at index b
    """
    cap = emulator_cap()
    if n > cap:
        raise CapExceeded(f"{n} qubits exceeds the emulator cap of {cap}")
    if n < 1:
        raise ValidationError(f"qubit count must be >= 1, got {n}")
    if not 0 <= b < 1 << n:
        raise IndexOutOfRange(f"basis index {b} out of range for {n} qubits")
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[b] = 1.0
    return StateVector._adopt(n, amps)


def product_state(factors: Sequence[np.ndarray]) -> StateVector:
    """Product of per-register amplitude blocks; factors[0] occupies the lowest qubits."""
    amps = np.ones(1, dtype=np.complex128)
    widths = 0
    for factor in factors:
        factor = np.asarray(factor, dtype=np.complex128)
        amps = np.kron(factor, amps)
        widths += int(np.log2(factor.shape[0]))
    cap = emulator_cap()
    if widths > cap:
        raise CapExceeded(f"{widths} qubits exceeds the emulator cap of {cap}")
    return StateVector._adopt(widths, amps)


def single_qubit_kernel(amps: np.ndarray, q: int, matrix: np.ndarray) -> np.ndarray:
    """Apply a 2x2 matrix to qubit q by stride iteration; returns a new array."""
    view = amps.reshape(-1, 2, 1 << q)
    lo = view[:, 0, :]
    hi = view[:, 1, :]
    out = np.empty_like(view)
    out[:, 0, :] = matrix[0, 0] * lo + matrix[0, 1] * hi
    out[:, 1, :] = matrix[1, 0] * lo + matrix[1, 1] * hi
    return out.reshape(-1)


def two_qubit_kernel(amps: np.ndarray, q0: int, q1: int, matrix: np.ndarray) -> np.ndarray:
    """
    Apply a 4x4 matrix to qubits (q0, q1); returns a new array.

    The matrix is written in the local basis bit(q0) + 2*bit(q1), i.e. kron(A_q1, A_q0).
    """
    u = np.asarray(matrix, dtype=np.complex128).reshape(2, 2, 2, 2)
    if q0 < q1:
        view = _pair_view(amps, q1, q0)
        out = np.einsum('WXYZ,aYbZc->aWbXc', u, view)
    else:
        view = _pair_view(amps, q0, q1)
        out = np.einsum('WXYZ,aZbYc->aXbWc', u, view)
    return np.ascontiguousarray(out).reshape(-1)


def pauli_kernel(amps: np.ndarray, q: int, label: str) -> np.ndarray:
    """Apply a single Pauli X/Y/Z on qubit q without a matrix multiply."""
    view = amps.reshape(-1, 2, 1 << q)
    if label == 'X':
        out = view[:, ::-1, :].copy()
    elif label == 'Y':
        out = np.empty_like(view)
        out[:, 0, :] = -1j * view[:, 1, :]
        out[:, 1, :] = 1j * view[:, 0, :]
    elif label == 'Z':
        out = view.copy()
        out[:, 1, :] *= -1.0
    elif label == 'I':
        out = view.copy()
    else:
        raise ValidationError(f"unknown Pauli label {label!r}")
    return out.reshape(-1)


def apply_gate(state: StateVector, gate: GateOp, counter: Optional[GateTally] = None) -> StateVector:
    """
    Apply one gate to the named qubits, identity elsewhere.

    Args:
        state: Input state
        gate: Gate to apply
        counter: Optional tally incremented under gate.tally_kind

    Returns:
        New StateVector
    """
    n = state.num_qubits
    for q in gate.qubits:
        _check_qubit(q, n)
    amps = state.amplitudes

    if gate.kind == 'single_qubit_unitary':
        _check_unitary(gate.matrix)
        out = single_qubit_kernel(amps, gate.qubits[0], gate.matrix)
    elif gate.kind == 'controlled_phase':
        q_hi, q_lo = max(gate.qubits), min(gate.qubits)
        out = amps.copy()
        _pair_view(out, q_hi, q_lo)[:, 1, :, 1, :] *= np.exp(1j * gate.angle)
    else:
        q_hi, q_lo = max(gate.qubits), min(gate.qubits)
        out = amps.copy()
        src = _pair_view(amps, q_hi, q_lo)
        dst = _pair_view(out, q_hi, q_lo)
        dst[:, 0, :, 1, :] = src[:, 1, :, 0, :]
        dst[:, 1, :, 0, :] = src[:, 0, :, 1, :]

    if counter is not None:
        counter.add(gate.tally_kind)
    return StateVector._adopt(n, out)


def apply_circuit(state: StateVector, gates: Sequence[GateOp],
                  counter: Optional[GateTally] = None) -> StateVector:
    """Apply gates in order."""
    for gate in gates:
        state = apply_gate(state, gate, counter)
    return state


def _check_finite(phases: np.ndarray) -> None:
    if not np.all(np.isfinite(phases)):
        bad = int(np.flatnonzero(~np.isfinite(phases))[0])
        raise NonFinitePhase(f"phase is not finite at offset {bad} (singular potential?)")


def apply_diagonal_phase(state: StateVector, phase_of_index: PhaseSource,
                         counter: Optional[GateTally] = None,
                         kind: str = 'diagonal_phase_applications') -> StateVector:
    """
    Multiply every amplitude b by exp(i * phase(b)).

    Args:
        state: Input state
        phase_of_index: Array of 2^n phases, or a vectorized callable mapping an
            index array to phases (evaluated chunk by chunk)
        counter: Optional tally incremented under `kind`
        kind: Tally key

    Returns:
        New StateVector
    """
    amps = state.amplitudes
    dim = amps.shape[0]

    if callable(phase_of_index):
        out = np.empty_like(amps)
        for start in range(0, dim, PHASE_CHUNK):
            stop = min(dim, start + PHASE_CHUNK)
            index = np.arange(start, stop, dtype=np.int64)
            phases = np.broadcast_to(np.asarray(phase_of_index(index), dtype=np.float64), index.shape)
            _check_finite(phases)
            out[start:stop] = amps[start:stop] * np.exp(1j * phases)
    else:
        phases = np.asarray(phase_of_index, dtype=np.float64).reshape(-1)
        if phases.shape[0] != dim:
            raise DimensionMismatch(f"expected {dim} phases, got {phases.shape[0]}")
        _check_finite(phases)
        out = amps * np.exp(1j * phases)

    if counter is not None:
        counter.add(kind)
    return StateVector._adopt(state.num_qubits, out)


def apply_register_phase(state: StateVector, reg: Register, table: np.ndarray,
                         counter: Optional[GateTally] = None,
                         kind: str = 'diagonal_phase_applications') -> StateVector:
    """Diagonal phase that depends only on one register's value (table of 2^width phases)."""
    reg.validate_for(state.num_qubits)
    table = np.asarray(table, dtype=np.float64).reshape(-1)
    if table.shape[0] != reg.size:
        raise DimensionMismatch(f"expected {reg.size} register phases, got {table.shape[0]}")
    _check_finite(table)
    view = state.amplitudes.reshape(-1, reg.size, 1 << reg.start_qubit)
    out = view * np.exp(1j * table)[None, :, None]
    if counter is not None:
        counter.add(kind)
    return StateVector._adopt(state.num_qubits, out.reshape(-1))


def sample_counts(state: StateVector, shots: int, seed: int) -> Dict[int, int]:
    """
    Draw `shots` terminal measurements of all qubits.

    Args:
        state: Normalized state
        shots: Number of draws (>= 1)
        seed: Seed for the PCG64 generator

    Returns:
        Histogram {basis index: count}, ascending index, zero counts omitted
    """
    if shots < 1:
        raise ValidationError(f"shots must be >= 1, got {shots}")
    probs = state.probabilities()
    total = float(probs.sum())
    if abs(total - 1.0) > SAMPLING_NORM_ATOL:
        raise UnnormalizedState(f"norm² = {total:.12f} deviates from 1 by more than {SAMPLING_NORM_ATOL}")
    draws = make_rng(seed).multinomial(shots, probs / total)
    return {int(b): int(draws[b]) for b in np.flatnonzero(draws)}


def marginal_probabilities(state: StateVector, reg: Register) -> np.ndarray:
    """
    Probability of each value of a register, summed over all other qubits.

    Returns:
        Array of 2^width probabilities
    """
    reg.validate_for(state.num_qubits)
    probs = state.probabilities().reshape(-1, reg.size, 1 << reg.start_qubit)
    return probs.sum(axis=(0, 2))


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b> = sum conj(a_i) b_i."""
    if a.num_qubits != b.num_qubits:
        raise DimensionMismatch(f"{a.num_qubits} vs {b.num_qubits} qubits")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>| for two states of equal size."""
    return abs(inner_product(a, b))


def distance(a: StateVector, b: StateVector) -> float:
    """2-norm of a - b."""
    if a.num_qubits != b.num_qubits:
        raise DimensionMismatch(f"{a.num_qubits} vs {b.num_qubits} qubits")
    return float(np.linalg.norm(a.amplitudes - b.amplitudes))

"""
Oracle Module
Independent reference engines for checking the gate path: dense Hamiltonians and
propagators, a classical FFT split-step twin, dense gate matrices and closed-form
results. Nothing here reuses the gate path's stepping code.
"""

import math
import os
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from errors import (
    CapExceeded, DimensionMismatch, InvalidPlan, NonHermitian,
    UnknownAnalyticCase, UnresolvableWidth, ValidationError,
)
from particle_sim import (
    OneBody, ParticleSystem, PotentialSpec, Tabulated, WavepacketSpec,
)
from spin_sim import SpinSystem
from statevec import PAULI_MATRICES, GateOp, StateVector, emulator_cap


DEFAULT_CAP_DENSE = 12
HERMITIAN_ATOL = 1e-10


def dense_cap() -> int:
    """Largest qubit count for a dense 2^n x 2^n operator (QSIM_CAP_DENSE overrides)."""
    value = os.environ.get('QSIM_CAP_DENSE')
    return int(value) if value else DEFAULT_CAP_DENSE


def _check_dense_cap(n: int) -> None:
    cap = dense_cap()
    if n > cap:
        raise CapExceeded(f"{n} qubits exceeds the dense-oracle cap of {cap}")


def _kron_little_endian(ops: Sequence[np.ndarray]) -> np.ndarray:
    """kron(ops[-1], ..., ops[0]) so ops[0] acts on the fastest-varying index."""
    return reduce(np.kron, list(reversed(ops)))


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """A 2^n x 2^n complex matrix together with the hbar it is measured in."""

    num_qubits: int
    matrix: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        _check_dense_cap(self.num_qubits)
        matrix = np.array(self.matrix, dtype=np.complex128)
        dim = 1 << self.num_qubits
        if matrix.shape != (dim, dim):
            raise DimensionMismatch(f"expected a {dim}x{dim} matrix, got {matrix.shape}")
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def hermiticity_error(self) -> float:
        """max |A - A^dagger|."""
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    @cached_property
    def eigensystem(self) -> Tuple[np.ndarray, np.ndarray]:
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        error = self.hermiticity_error()
        if error > HERMITIAN_ATOL * scale:
            raise NonHermitian(f"‖A − A†‖_max = {error:.3e}")
        return scipy.linalg.eigh(self.matrix)

    def eigenvalues(self) -> np.ndarray:
        return self.eigensystem[0]


# ---------------------------------------------------------------------------
# Dense Hamiltonians
# ---------------------------------------------------------------------------

def dense_spin_hamiltonian(system: SpinSystem) -> DenseOperator:
    """
    Sum of coefficient * (kron-extended Pauli product) over all terms.

    Args:
        system: Spin system with N <= dense cap

    Returns:
        Hermitian DenseOperator on N qubits
    """
    n = system.num_spins
    _check_dense_cap(n)
    matrix = np.zeros((1 << n, 1 << n), dtype=np.complex128)
    for term in system.terms:
        ops = [PAULI_MATRICES['I']] * n
        for site, label in zip(term.sites, term.paulis):
            ops[site] = PAULI_MATRICES[label]
        matrix += term.coefficient * _kron_little_endian(ops)
    return DenseOperator(n, matrix, system.hbar)


def dft_matrix(k: int, inverse: bool = False) -> np.ndarray:
    """
    Unitary DFT on 2^k points, column j holding the image of |j>.

    Forward entries are exp(+2*pi*i*j*l/2^k) / 2^(k/2); inverse is the adjoint.
    """
    size = 1 << k
    index = np.arange(size)
    sign = -1.0 if inverse else 1.0
    return np.exp(sign * 2j * np.pi * np.outer(index, index) / size) / math.sqrt(size)


def _grid_coordinates(system: ParticleSystem) -> Tuple[np.ndarray, np.ndarray]:
    size = 1 << system.qubits_per_particle
    x = np.arange(size) * (system.box_length / size)
    p = (2.0 * np.pi * system.hbar / system.box_length) * np.fft.fftfreq(size, d=1.0 / size)
    return x, p


def _register_values(system: ParticleSystem, particle: int, index: np.ndarray) -> np.ndarray:
    k = system.qubits_per_particle
    return (index >> (particle * k)) & ((1 << k) - 1)


def potential_energy_by_index(system: ParticleSystem, potentials: PotentialSpec,
                              minimal_image: bool = False) -> np.ndarray:
    """V_total at every basis index, decoded index by index."""
    potentials = potentials.resolved(system)
    x, _ = _grid_coordinates(system)
    index = np.arange(1 << system.num_qubits)
    total = np.zeros(index.shape[0], dtype=np.float64)

    for entry in potentials.groups:
        if isinstance(entry, OneBody):
            j = _register_values(system, entry.particle, index)
            if isinstance(entry.kind, Tabulated):
                total += entry.kind.values[j]
            else:
                total += entry.kind.evaluate(x[j])
            continue
        ja = _register_values(system, entry.particles[0], index)
        jb = _register_values(system, entry.particles[1], index)
        if isinstance(entry.kind, Tabulated):
            total += entry.kind.values[ja, jb]
            continue
        r = x[ja] - x[jb]
        if minimal_image:
            r = r - system.box_length * np.floor(r / system.box_length + 0.5)
        total += entry.kind.evaluate(r)
    return total


def dense_grid_hamiltonian(system: ParticleSystem, potentials: PotentialSpec,
                           minimal_image: bool = False) -> DenseOperator:
    """
    H = sum_i F_i^dagger diag(p^2 / 2 m_i) F_i + diag(V_total).

    F_i is the forward DFT on particle i's register, kron-extended by identities.
    """
    n = system.num_qubits
    _check_dense_cap(n)
    k = system.qubits_per_particle
    _, p = _grid_coordinates(system)
    forward = dft_matrix(k)
    identity = np.eye(1 << k, dtype=np.complex128)

    matrix = np.diag(potential_energy_by_index(system, potentials, minimal_image)).astype(np.complex128)
    for particle, mass in enumerate(system.masses):
        kinetic = forward.conj().T @ np.diag(p ** 2 / (2.0 * mass)) @ forward
        ops = [identity] * system.num_particles
        ops[particle] = kinetic
        matrix += _kron_little_endian(ops)
    # Remove rounding asymmetry from the DFT products.
    matrix = 0.5 * (matrix + matrix.conj().T)
    return DenseOperator(n, matrix, system.hbar)


# ---------------------------------------------------------------------------
# Propagation and expectation values
# ---------------------------------------------------------------------------

def exact_propagate(H: DenseOperator, psi0: StateVector, t: float) -> StateVector:
    """
    exp(-i H t / hbar) psi0 through the Hermitian eigendecomposition.

    Raises:
        DimensionMismatch: if psi0 and H differ in size
        NonHermitian: if H is not Hermitian within 1e-10
    """
    if psi0.num_qubits != H.num_qubits:
        raise DimensionMismatch(f"state has {psi0.num_qubits} qubits, operator {H.num_qubits}")
    energies, vectors = H.eigensystem
    if t == 0:
        return StateVector(psi0.num_qubits, psi0.amplitudes)
    coefficients = vectors.conj().T @ psi0.amplitudes
    phases = np.exp(-1j * energies * t / H.hbar)
    return StateVector(psi0.num_qubits, vectors @ (phases * coefficients))


def dense_expectation(H: DenseOperator, psi: StateVector) -> float:
    """<psi|H|psi> for a normalized psi."""
    if psi.num_qubits != H.num_qubits:
        raise DimensionMismatch(f"state has {psi.num_qubits} qubits, operator {H.num_qubits}")
    return float(np.vdot(psi.amplitudes, H.matrix @ psi.amplitudes).real)


def dense_gate_matrix(gate: GateOp, n: int) -> np.ndarray:
    """Full 2^n x 2^n matrix of one gate, built from kron products and index masks."""
    _check_dense_cap(n)
    dim = 1 << n
    if gate.kind == 'single_qubit_unitary':
        ops = [np.eye(2, dtype=np.complex128)] * n
        ops[gate.qubits[0]] = gate.matrix
        return _kron_little_endian(ops)

    a, b = gate.qubits
    index = np.arange(dim)
    bit_a = (index >> a) & 1
    bit_b = (index >> b) & 1
    if gate.kind == 'controlled_phase':
        return np.diag(np.where(bit_a & bit_b, np.exp(1j * gate.angle), 1.0)).astype(np.complex128)
    swapped = index ^ ((bit_a ^ bit_b) << a) ^ ((bit_a ^ bit_b) << b)
    matrix = np.zeros((dim, dim), dtype=np.complex128)
    matrix[swapped, index] = 1.0
    return matrix


def dense_circuit_matrix(gates: Sequence[GateOp], n: int) -> np.ndarray:
    """Product of the gate matrices, first gate rightmost."""
    matrix = np.eye(1 << n, dtype=np.complex128)
    for gate in gates:
        matrix = dense_gate_matrix(gate, n) @ matrix
    return matrix


# ---------------------------------------------------------------------------
# Classical split-step twin
# ---------------------------------------------------------------------------

def _classical_wavepackets(system: ParticleSystem, spec: WavepacketSpec) -> np.ndarray:
    if len(spec.packets) != system.num_particles:
        raise ValidationError(f"expected {system.num_particles} wavepackets, got {len(spec.packets)}")
    x, _ = _grid_coordinates(system)
    dx = system.box_length / x.shape[0]
    amps = np.ones(1, dtype=np.complex128)
    for packet in spec.packets:
        if packet.width < 2.0 * dx:
            raise UnresolvableWidth(f"σ ≥ 2Δx violated: width {packet.width} < 2*{dx}")
        factor = np.exp(-((x - packet.center) ** 2) / (4.0 * packet.width ** 2)
                        + 1j * packet.momentum * x / system.hbar)
        amps = np.kron(factor / np.linalg.norm(factor), amps)
    return amps


def _particle_axis(system: ParticleSystem, particle: int) -> int:
    return system.num_particles - 1 - particle


def classical_split_step(system: ParticleSystem, potentials: PotentialSpec,
                         initial: Union[StateVector, WavepacketSpec], dt: float, steps: int,
                         mode: str = 'lie', literal_signs: bool = False,
                         minimal_image: bool = False) -> StateVector:
    """
    Split-operator stepping on the amplitude tensor with numpy FFTs.

    The forward transform of the gate path (exp(+2*pi*i*j*l/2^k), unitary
    normalization) is numpy's orthonormal ifft along the particle's axis.

    Args:
        system: Particle system
        potentials: Potential entries
        initial: Starting state, or wavepacket spec to build it from
        dt: Step size (> 0)
        steps: Number of steps (>= 0)
        mode: lie or strang
        literal_signs: Use +i phases
        minimal_image: Wrap pair separations into [-L/2, L/2)

    Returns:
        StateVector after `steps` steps
    """
    if not dt > 0:
        raise InvalidPlan(f"dt must be > 0, got {dt}")
    if steps < 0:
        raise InvalidPlan(f"steps must be >= 0, got {steps}")
    if mode not in ('lie', 'strang'):
        raise InvalidPlan(f"unknown splitting mode {mode!r}")
    cap = emulator_cap()
    if system.num_qubits > cap:
        raise CapExceeded(f"N*k = {system.num_qubits} exceeds the emulator cap of {cap}")

    if isinstance(initial, WavepacketSpec):
        amps = _classical_wavepackets(system, initial)
    else:
        if initial.num_qubits != system.num_qubits:
            raise DimensionMismatch(f"state has {initial.num_qubits} qubits, "
                                    f"system needs {system.num_qubits}")
        amps = initial.amplitudes.copy()

    size = 1 << system.qubits_per_particle
    shape = (size,) * system.num_particles
    psi = amps.reshape(shape)
    sign = 1.0 if literal_signs else -1.0
    _, p = _grid_coordinates(system)
    potential = potential_energy_by_index(system, potentials, minimal_image).reshape(shape)
    potential_factor = np.exp(sign * 1j * dt * potential / system.hbar)

    def kinetic(psi: np.ndarray, tau: float) -> np.ndarray:
        for particle, mass in enumerate(system.masses):
            axis = _particle_axis(system, particle)
            factor_shape = [1] * system.num_particles
            factor_shape[axis] = size
            factor = np.exp(sign * 1j * tau * p ** 2 / (2.0 * mass * system.hbar)).reshape(factor_shape)
            psi = np.fft.ifft(psi, axis=axis, norm='ortho') * factor
            psi = np.fft.fft(psi, axis=axis, norm='ortho')
        return psi

    for _ in range(steps):
        if mode == 'lie':
            psi = kinetic(psi, dt) * potential_factor
        else:
            psi = kinetic(kinetic(psi, 0.5 * dt) * potential_factor, 0.5 * dt)

    return StateVector(system.num_qubits, psi.reshape(-1))


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def _rabi(params: Dict[str, float], t):
    omega = params.get('omega', 1.0)
    return np.cos(2.0 * omega * t)


def _free_width(params: Dict[str, float], t):
    sigma0 = params['sigma0']
    mass = params.get('mass', 1.0)
    hbar = params.get('hbar', 1.0)
    return sigma0 * np.sqrt(1.0 + (hbar * t / (2.0 * mass * sigma0 ** 2)) ** 2)


def _harmonic_mean_x(params: Dict[str, float], t):
    omega = params.get('omega', 1.0)
    mass = params.get('mass', 1.0)
    center = params.get('center', 0.0)
    x0 = params['x0']
    p0 = params.get('p0', 0.0)
    return center + x0 * np.cos(omega * t) + (p0 / (mass * omega)) * np.sin(omega * t)


def _oscillator_level(params: Dict[str, float], t):
    omega = params.get('omega', 1.0)
    hbar = params.get('hbar', 1.0)
    level = params.get('n', 0)
    return np.full_like(np.asarray(t, dtype=np.float64), hbar * omega * (level + 0.5))


ANALYTIC_CASES = {
    'rabi': _rabi,
    'free_width': _free_width,
    'harmonic_mean_x': _harmonic_mean_x,
    'oscillator_level': _oscillator_level,
}


def analytic_suite(name: str, params: Optional[Dict[str, float]], t):
    """
    Closed-form reference values.

    rabi: <Z>(t) = cos(2 omega t) for H = omega X from |0>
    free_width: sigma0 * sqrt(1 + (hbar t / (2 m sigma0^2))^2)
    harmonic_mean_x: center + x0 cos(omega t) + p0 / (m omega) sin(omega t), x0 relative to center
    oscillator_level: hbar omega (n + 1/2), independent of t

    Returns:
        float for scalar t, array otherwise
    """
    if name not in ANALYTIC_CASES:
        raise UnknownAnalyticCase(f"unknown analytic case {name!r}; "
                                  f"expected one of {sorted(ANALYTIC_CASES)}")
    try:
        value = ANALYTIC_CASES[name](dict(params or {}), np.asarray(t, dtype=np.float64))
    except KeyError as exc:
        raise ValidationError(f"analytic case {name!r} needs parameter {exc.args[0]!r}") from exc
    return float(value) if np.ndim(value) == 0 else value

"""
Particle Simulation Module
N distinguishable 1D particles on a 2^k-point periodic grid of length L, each held
in its own k-qubit register and advanced by split-operator steps: a QFT-based
kinetic phase per particle and a diagonal phase per potential term.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from errors import (
    CapExceeded, DimensionMismatch, IndexOutOfRange, InvalidPlan, QsimWarning,
    UnnormalizedState, UnresolvableWidth, ValidationError,
)
from plan import EvolutionPlan, PARTICLE_MODES
from qft import QftDirection, apply_qft
from statevec import (
    Register, StateVector, apply_diagonal_phase, apply_register_phase,
    emulator_cap, marginal_probabilities, product_state,
)
from utils import GateTally, log_execution


OBSERVABLE_NORM_ATOL = 1e-6
EDGE_TAIL_LIMIT = 1e-8
MOMENT_NAMES = ('x_mean', 'x2_mean', 'x_width', 'p_mean', 'p2_mean')


@dataclass(frozen=True)
class ParticleSystem:
    """
    N particles, k qubits each, periodic box [0, L).

    Particle i occupies qubits [i*k, (i+1)*k); grid index j sits at x = j*L/2^k.
    """

    num_particles: int
    qubits_per_particle: int
    box_length: float = 1.0
    masses: Optional[Tuple[float, ...]] = None
    hbar: float = 1.0

    def __post_init__(self):
        if self.num_particles < 1:
            raise ValidationError(f"num_particles must be >= 1, got {self.num_particles}")
        if self.qubits_per_particle < 1:
            raise ValidationError(f"qubits_per_particle must be >= 1, got {self.qubits_per_particle}")
        if not (self.box_length > 0 and math.isfinite(self.box_length)):
            raise ValidationError(f"box_length must be positive, got {self.box_length}")
        if not self.hbar > 0:
            raise ValidationError(f"hbar must be positive, got {self.hbar}")

        masses = self.masses if self.masses is not None else (1.0,) * self.num_particles
        masses = tuple(float(m) for m in masses)
        if len(masses) != self.num_particles:
            raise ValidationError(f"expected {self.num_particles} masses, got {len(masses)}")
        if any(not (m > 0 and math.isfinite(m)) for m in masses):
            raise ValidationError(f"masses must be positive and finite: {masses}")
        object.__setattr__(self, 'masses', masses)

        cap = emulator_cap()
        if self.num_qubits > cap:
            raise CapExceeded(f"N*k = {self.num_qubits} exceeds the emulator cap of {cap}")

    @property
    def num_qubits(self) -> int:
        return self.num_particles * self.qubits_per_particle

    @property
    def grid_size(self) -> int:
        return 1 << self.qubits_per_particle

    @property
    def dx(self) -> float:
        return self.box_length / self.grid_size

    def register(self, particle: int) -> Register:
        if not 0 <= particle < self.num_particles:
            raise IndexOutOfRange(f"particle {particle} out of range for N={self.num_particles}")
        return Register(particle * self.qubits_per_particle, self.qubits_per_particle)

    def positions(self) -> np.ndarray:
        return np.arange(self.grid_size) * self.dx

    def momenta(self) -> np.ndarray:
        """Signed, centred momentum grid: l < 2^(k-1) -> l, otherwise l - 2^k."""
        index = np.arange(self.grid_size)
        signed = np.where(index < self.grid_size // 2, index, index - self.grid_size)
        return (2.0 * math.pi * self.hbar / self.box_length) * signed


def position_of_index(system: ParticleSystem, j: int) -> float:
    """x = j * L / 2^k."""
    if not 0 <= j < system.grid_size:
        raise IndexOutOfRange(f"grid index {j} out of range for 2^{system.qubits_per_particle} points")
    return j * system.box_length / system.grid_size


def momentum_of_index(system: ParticleSystem, l: int) -> float:
    """p = (2*pi*hbar/L) * s with s the signed, centred index."""
    if not 0 <= l < system.grid_size:
        raise IndexOutOfRange(f"grid index {l} out of range for 2^{system.qubits_per_particle} points")
    signed = l if l < system.grid_size // 2 else l - system.grid_size
    return 2.0 * math.pi * system.hbar * signed / system.box_length


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------

def _require_finite(name: str, *values: float) -> None:
    for value in values:
        if not math.isfinite(value):
            raise ValidationError(f"{name}: all parameters finite violated ({value})")


@dataclass(frozen=True)
class Harmonic:
    """V = stiffness/2 * (q - center)^2."""

    stiffness: float
    center: float = 0.0

    def __post_init__(self):
        _require_finite('harmonic', self.stiffness, self.center)

    def evaluate(self, q: np.ndarray) -> np.ndarray:
        return 0.5 * self.stiffness * (q - self.center) ** 2


@dataclass(frozen=True)
class Polynomial:
    """V = sum_n coefficients[n] * q^n."""

    coefficients: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'coefficients', tuple(float(c) for c in self.coefficients))
        if not self.coefficients:
            raise ValidationError("polynomial needs at least one coefficient")
        _require_finite('polynomial', *self.coefficients)

    def evaluate(self, q: np.ndarray) -> np.ndarray:
        return np.polynomial.polynomial.polyval(q, self.coefficients)


@dataclass(frozen=True)
class CoulombSoft:
    """V = strength / sqrt((q - center)^2 + softening^2); softening defaults to 2*dx."""

    strength: float
    softening: Optional[float] = None
    center: float = 0.0

    def __post_init__(self):
        _require_finite('coulomb_soft', self.strength, self.center)
        if self.softening is not None:
            _require_finite('coulomb_soft', self.softening)
            if not self.softening > 0:
                raise ValidationError(f"coulomb_soft: ε > 0 violated ({self.softening})")

    def evaluate(self, q: np.ndarray) -> np.ndarray:
        if self.softening is None:
            raise ValidationError("coulomb_soft softening unresolved; call PotentialSpec.resolved")
        return self.strength / np.sqrt((q - self.center) ** 2 + self.softening ** 2)


@dataclass(frozen=True, eq=False)
class Tabulated:
    """2^k values for a one-body term, or a 2^k x 2^k table [j_a, j_b] for a pair."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise ValidationError("tabulated: all parameters finite violated")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)


PotentialKind = Union[Harmonic, Polynomial, CoulombSoft, Tabulated]


@dataclass(frozen=True)
class OneBody:
    particle: int
    kind: PotentialKind


@dataclass(frozen=True)
class TwoBody:
    particles: Tuple[int, int]
    kind: PotentialKind

    def __post_init__(self):
        object.__setattr__(self, 'particles', tuple(int(p) for p in self.particles))
        if len(self.particles) != 2 or self.particles[0] == self.particles[1]:
            raise ValidationError(f"two-body particle pair must be distinct: {self.particles}")


@dataclass(frozen=True)
class PotentialSpec:
    """One-body and two-body potential entries, applied in turn (one-body first)."""

    one_body: Tuple[OneBody, ...] = ()
    two_body: Tuple[TwoBody, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'one_body', tuple(self.one_body))
        object.__setattr__(self, 'two_body', tuple(self.two_body))

    @property
    def groups(self) -> Tuple[Union[OneBody, TwoBody], ...]:
        return self.one_body + self.two_body

    def resolved(self, system: ParticleSystem) -> 'PotentialSpec':
        """Check entries against the grid and fill the default softening 2*dx."""
        grid = system.grid_size

        def resolve(kind: PotentialKind, table_shape: tuple) -> PotentialKind:
            if isinstance(kind, CoulombSoft) and kind.softening is None:
                return CoulombSoft(kind.strength, 2.0 * system.dx, kind.center)
            if isinstance(kind, Tabulated) and kind.values.shape != table_shape:
                raise ValidationError(
                    f"tabulated lengths match grid violated: expected {table_shape}, "
                    f"got {kind.values.shape}"
                )
            return kind

        one_body = []
        for entry in self.one_body:
            if not 0 <= entry.particle < system.num_particles:
                raise ValidationError(f"one-body particle {entry.particle} out of range")
            one_body.append(OneBody(entry.particle, resolve(entry.kind, (grid,))))
        two_body = []
        for entry in self.two_body:
            if max(entry.particles) >= system.num_particles or min(entry.particles) < 0:
                raise ValidationError(f"two-body particles {entry.particles} out of range")
            two_body.append(TwoBody(entry.particles, resolve(entry.kind, (grid, grid))))
        return PotentialSpec(tuple(one_body), tuple(two_body))


def separation_grid(system: ParticleSystem, minimal_image: bool = False) -> np.ndarray:
    """r[j_a, j_b] = x_a - x_b, optionally wrapped into [-L/2, L/2)."""
    x = system.positions()
    r = x[:, None] - x[None, :]
    if minimal_image:
        half = 0.5 * system.box_length
        r = np.mod(r + half, system.box_length) - half
    return r


def one_body_table(system: ParticleSystem, kind: PotentialKind) -> np.ndarray:
    """V at every grid point of one register."""
    if isinstance(kind, Tabulated):
        return kind.values
    return kind.evaluate(system.positions())


def two_body_table(system: ParticleSystem, kind: PotentialKind,
                   minimal_image: bool = False) -> np.ndarray:
    """V for every pair of register values, indexed [j_a, j_b]."""
    if isinstance(kind, Tabulated):
        return kind.values
    return kind.evaluate(separation_grid(system, minimal_image))


def _group_phase(system: ParticleSystem, entry: Union[OneBody, TwoBody], scale: float,
                 minimal_image: bool) -> Callable[[np.ndarray], np.ndarray]:
    """Per-index phase for one potential entry, read from a per-register table."""
    k = system.qubits_per_particle
    mask = system.grid_size - 1
    if isinstance(entry, OneBody):
        table = scale * one_body_table(system, entry.kind)
        shift = entry.particle * k
        return lambda index: table[(index >> shift) & mask]

    table = scale * two_body_table(system, entry.kind, minimal_image)
    shift_a, shift_b = entry.particles[0] * k, entry.particles[1] * k
    return lambda index: table[(index >> shift_a) & mask, (index >> shift_b) & mask]


# ---------------------------------------------------------------------------
# Initial states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Wavepacket:
    center: float
    momentum: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        _require_finite('wavepacket', self.center, self.momentum, self.width)
        if not self.width > 0:
            raise ValidationError(f"wavepacket width must be > 0, got {self.width}")


@dataclass(frozen=True)
class WavepacketSpec:
    """One Gaussian packet per particle."""

    packets: Tuple[Wavepacket, ...]

    def __post_init__(self):
        object.__setattr__(self, 'packets', tuple(self.packets))


def wavepacket_amplitudes(system: ParticleSystem, packet: Wavepacket) -> np.ndarray:
    """
    Normalized register amplitudes exp(-(x-x0)^2/(4 sigma^2)) * exp(i p0 x / hbar).

    Raises:
        UnresolvableWidth: if sigma < 2*dx
    """
    if packet.width < 2.0 * system.dx:
        raise UnresolvableWidth(
            f"σ ≥ 2Δx violated: width {packet.width} < 2*{system.dx}"
        )
    if not 0.0 <= packet.center < system.box_length:
        raise ValidationError(f"wavepacket center {packet.center} outside [0, {system.box_length})")

    for edge in (0.0, system.box_length):
        tail = math.exp(-((edge - packet.center) ** 2) / (2.0 * packet.width ** 2))
        if tail > EDGE_TAIL_LIMIT:
            warnings.warn(f"wavepacket at {packet.center} has density {tail:.2e} of peak "
                          f"at box edge {edge}", QsimWarning)
            break

    x = system.positions()
    amps = np.exp(-((x - packet.center) ** 2) / (4.0 * packet.width ** 2))
    amps = amps * np.exp(1j * packet.momentum * x / system.hbar)
    return amps / np.linalg.norm(amps)


def prepare_product_wavepackets(system: ParticleSystem, spec: WavepacketSpec) -> StateVector:
    """Product state with particle i's register holding packet i."""
    if len(spec.packets) != system.num_particles:
        raise ValidationError(
            f"expected {system.num_particles} wavepackets, got {len(spec.packets)}"
        )
    return product_state([wavepacket_amplitudes(system, p) for p in spec.packets])


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------

def _phase_sign(literal_signs: bool) -> float:
    return 1.0 if literal_signs else -1.0


def kinetic_phase_step(state: StateVector, system: ParticleSystem, particle: int, dt: float,
                       literal_signs: bool = False,
                       counter: Optional[GateTally] = None) -> StateVector:
    """
    QFT on the particle's register, phase exp(-i dt p^2 / (2 m hbar)), inverse QFT.

    Args:
        state: Full N*k-qubit state
        system: Particle system
        particle: Index of the particle to advance
        dt: Step size (> 0)
        literal_signs: Use +i instead of the physical -i
        counter: Optional gate tally

    Returns:
        New StateVector
    """
    if not dt > 0:
        raise InvalidPlan(f"dt must be > 0, got {dt}")
    reg = system.register(particle)
    mass = system.masses[particle]
    table = _phase_sign(literal_signs) * dt * system.momenta() ** 2 / (2.0 * mass * system.hbar)

    state = apply_qft(state, reg, QftDirection.FORWARD, counter)
    state = apply_register_phase(state, reg, table, counter, kind='kinetic_phase_applications')
    return apply_qft(state, reg, QftDirection.INVERSE, counter)


def kinetic_sweep(state: StateVector, system: ParticleSystem, dt: float,
                  literal_signs: bool = False,
                  counter: Optional[GateTally] = None) -> StateVector:
    """Kinetic step for every particle, ascending index."""
    for particle in range(system.num_particles):
        state = kinetic_phase_step(state, system, particle, dt, literal_signs, counter)
    return state


def potential_phase_step(state: StateVector, system: ParticleSystem, potentials: PotentialSpec,
                         dt: float, literal_signs: bool = False, minimal_image: bool = False,
                         counter: Optional[GateTally] = None) -> StateVector:
    """
    Advance the phase of every basis state by -dt * V(x_b) / hbar, one potential entry at a time.

    Each entry decodes the positions held by its particles' registers and is one
    diagonal-phase application.
    """
    if not dt > 0:
        raise InvalidPlan(f"dt must be > 0, got {dt}")
    if state.num_qubits != system.num_qubits:
        raise DimensionMismatch(f"state has {state.num_qubits} qubits, system needs {system.num_qubits}")
    scale = _phase_sign(literal_signs) * dt / system.hbar
    for entry in potentials.resolved(system).groups:
        state = apply_diagonal_phase(state, _group_phase(system, entry, scale, minimal_image), counter)
    return state


def split_step(state: StateVector, system: ParticleSystem, potentials: PotentialSpec, dt: float,
               mode: str = 'lie', literal_signs: bool = False, minimal_image: bool = False,
               counter: Optional[GateTally] = None) -> StateVector:
    """
    One split-operator step.

    lie: kinetic sweep, then potential. strang: half kinetic, potential, half kinetic.
    """
    if mode == 'lie':
        state = kinetic_sweep(state, system, dt, literal_signs, counter)
        return potential_phase_step(state, system, potentials, dt, literal_signs, minimal_image, counter)
    if mode == 'strang':
        half = 0.5 * dt
        state = kinetic_sweep(state, system, half, literal_signs, counter)
        state = potential_phase_step(state, system, potentials, dt, literal_signs, minimal_image, counter)
        return kinetic_sweep(state, system, half, literal_signs, counter)
    raise InvalidPlan(f"unknown splitting mode {mode!r}")


# ---------------------------------------------------------------------------
# Observables and evolution
# ---------------------------------------------------------------------------

def particle_observables(state: StateVector, system: ParticleSystem,
                         include_density: bool = False) -> List[Dict[str, object]]:
    """
    Per-particle position and momentum moments.

    Momentum moments come from a copy with every register transformed by the
    inverse-direction QFT, i.e. projected with exp(-i p x / hbar).

    Returns:
        One dict per particle with x_mean, x2_mean, x_width, p_mean, p2_mean
        (and density when requested)
    """
    norm_sq = state.norm() ** 2
    if abs(norm_sq - 1.0) > OBSERVABLE_NORM_ATOL:
        raise UnnormalizedState(f"norm² = {norm_sq:.12f}")

    x = system.positions()
    p = system.momenta()
    momentum_state = state
    for particle in range(system.num_particles):
        momentum_state = apply_qft(momentum_state, system.register(particle), QftDirection.INVERSE)

    results = []
    for particle in range(system.num_particles):
        reg = system.register(particle)
        density = marginal_probabilities(state, reg)
        momentum_density = marginal_probabilities(momentum_state, reg)
        x_mean = float(np.dot(density, x))
        x2_mean = float(np.dot(density, x ** 2))
        moments = {
            'x_mean': x_mean,
            'x2_mean': x2_mean,
            'x_width': math.sqrt(max(x2_mean - x_mean ** 2, 0.0)),
            'p_mean': float(np.dot(momentum_density, p)),
            'p2_mean': float(np.dot(momentum_density, p ** 2)),
        }
        if include_density:
            moments['density'] = density
        results.append(moments)
    return results


def moment_columns(system: ParticleSystem) -> List[str]:
    return [f"{name}_{i}" for i in range(system.num_particles) for name in MOMENT_NAMES]


def evolve_particles(state: StateVector, system: ParticleSystem, potentials: PotentialSpec,
                     plan: EvolutionPlan, include_moments: bool = True,
                     include_density: bool = False,
                     extra_observables: Optional[Mapping[str, Callable[[StateVector], float]]] = None,
                     counter: Optional[GateTally] = None
                     ) -> Tuple[pd.DataFrame, StateVector, pd.DataFrame]:
    """
    Run round(T/dt) split steps, recording every sample_stride steps.

    Args:
        state: Initial N*k-qubit state
        system: Particle system
        potentials: Potential entries
        plan: Evolution plan (mode lie or strang)
        include_moments: Record per-particle moments
        include_density: Record per-particle position densities
        extra_observables: Additional column name -> function of the state
        counter: Optional gate tally

    Returns:
        Tuple of (trajectory DataFrame, final state, density DataFrame with columns
        step, t, particle, index, probability)
    """
    if plan.mode not in PARTICLE_MODES:
        raise InvalidPlan(f"mode {plan.mode!r} is not a particle splitting mode")
    if state.num_qubits != system.num_qubits:
        raise DimensionMismatch(f"state has {state.num_qubits} qubits, system needs {system.num_qubits}")
    potentials = potentials.resolved(system)
    extra_observables = dict(extra_observables or {})
    steps = plan.steps

    log_execution('evolve_particles', f"N={system.num_particles}, k={system.qubits_per_particle}, "
                                      f"{steps} steps of dt={plan.dt} ({plan.mode}), "
                                      f"realized T={plan.realized_T:.6g}")

    records = []
    densities = []

    def record(step: int, current: StateVector) -> None:
        t = step * plan.dt
        norm = current.norm()
        row = {'step': step, 't': t, 'norm': norm}
        if include_moments or include_density:
            unit = current.scaled(1.0 / norm)
            for i, moments in enumerate(particle_observables(unit, system, include_density)):
                if include_moments:
                    for name in MOMENT_NAMES:
                        row[f"{name}_{i}"] = moments[name]
                if include_density:
                    for j, prob in enumerate(moments['density']):
                        densities.append({'step': step, 't': t, 'particle': i,
                                          'index': j, 'probability': float(prob)})
        for name, func in extra_observables.items():
            row[name] = float(func(current))
        records.append(row)

    record(0, state)
    for step in range(1, steps + 1):
        state = split_step(state, system, potentials, plan.dt, plan.mode,
                           plan.paper_literal_signs, plan.minimal_image, counter)
        if step % plan.sample_stride == 0:
            record(step, state)

    columns = ['step', 't', 'norm']
    if include_moments:
        columns += moment_columns(system)
    columns += list(extra_observables)
    trajectory = pd.DataFrame(records, columns=columns)
    density_frame = pd.DataFrame(densities, columns=['step', 't', 'particle', 'index', 'probability'])
    log_execution('evolve_particles', f"done, final norm={state.norm():.12f}")
    return trajectory, state, density_frame

"""Tests for the dense and closed-form reference engines."""

import math

import numpy as np
import pytest

from conftest import random_state
from errors import (
    CapExceeded, DimensionMismatch, InvalidPlan, NonHermitian,
    UnknownAnalyticCase, UnresolvableWidth, ValidationError,
)
from oracle import (
    DenseOperator, analytic_suite, classical_split_step, dense_circuit_matrix,
    dense_expectation, dense_grid_hamiltonian, dense_spin_hamiltonian, dft_matrix,
    exact_propagate, potential_energy_by_index,
)
from particle_sim import (
    CoulombSoft, Harmonic, OneBody, ParticleSystem, PotentialSpec, Tabulated,
    TwoBody, Wavepacket, WavepacketSpec, particle_observables,
    prepare_product_wavepackets,
)
from spin_sim import PauliTerm, SpinSystem, expectation_pauli
from statevec import HADAMARD, GateOp, distance, new_basis_state

X = np.array([[0, 1], [1, 0]], dtype=complex)


def single_term(label, sites, coefficient=1.0, n=None):
    term = PauliTerm(coefficient, sites, tuple(label))
    return SpinSystem(n or max(sites) + 1, (term,))


# Dense spin Hamiltonians

def test_single_x_hamiltonian():
    H = dense_spin_hamiltonian(single_term('X', (0,), 0.4))
    assert np.array_equal(H.matrix, 0.4 * X)


def test_zz_hamiltonian_is_diagonal():
    H = dense_spin_hamiltonian(single_term('ZZ', (0, 1)))
    assert np.array_equal(H.matrix, np.diag([1, -1, -1, 1]).astype(complex))


def test_site_one_acts_on_bit_one():
    H = dense_spin_hamiltonian(single_term('X', (1,), n=2))
    # |00> -> |10>, i.e. index 0 -> index 2
    assert H.matrix[2, 0] == 1.0
    assert H.matrix[1, 0] == 0.0


def test_spin_hamiltonian_is_hermitian(three_spin_system):
    H = dense_spin_hamiltonian(three_spin_system)
    assert H.hermiticity_error() == 0.0
    energies = H.eigenvalues()
    assert np.all(np.diff(energies) >= 0)


def test_dense_cap(monkeypatch, three_spin_system):
    monkeypatch.setenv('QSIM_CAP_DENSE', '2')
    with pytest.raises(CapExceeded):
        dense_spin_hamiltonian(three_spin_system)


def test_non_hermitian_operator_rejected():
    operator = DenseOperator(1, np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(NonHermitian):
        operator.eigenvalues()


def test_operator_shape_checked():
    with pytest.raises(DimensionMismatch):
        DenseOperator(2, np.eye(2))


# Propagation

def test_zero_time_returns_initial_state(rng, three_spin_system):
    psi = random_state(rng, 3)
    out = exact_propagate(dense_spin_hamiltonian(three_spin_system), psi, 0.0)
    assert np.array_equal(out.amplitudes, psi.amplitudes)


def test_rabi_propagation():
    H = dense_spin_hamiltonian(single_term('X', (0,)))
    t = 0.3
    out = exact_propagate(H, new_basis_state(1, 0), t)
    assert np.allclose(out.amplitudes, [math.cos(t), -1j * math.sin(t)], atol=1e-14)


def test_propagation_is_unitary_and_reversible(rng, three_spin_system):
    H = dense_spin_hamiltonian(three_spin_system)
    psi = random_state(rng, 3)
    forward = exact_propagate(H, psi, 1.7)
    assert abs(forward.norm() - 1.0) < 1e-12
    assert distance(exact_propagate(H, forward, -1.7), psi) < 1e-12


def test_propagation_dimension_checked(three_spin_system):
    with pytest.raises(DimensionMismatch):
        exact_propagate(dense_spin_hamiltonian(three_spin_system), new_basis_state(2, 0), 1.0)


def test_dense_expectation():
    H = dense_spin_hamiltonian(single_term('Z', (0,), 2.5))
    assert dense_expectation(H, new_basis_state(1, 1)) == -2.5


def test_energy_conserved_by_exact_propagation(rng, three_spin_system):
    H = dense_spin_hamiltonian(three_spin_system)
    psi = random_state(rng, 3)
    assert dense_expectation(H, exact_propagate(H, psi, 3.0)) == pytest.approx(dense_expectation(H, psi), abs=1e-12)


# DFT and circuit matrices

def test_dft_matrix_is_unitary():
    F = dft_matrix(4)
    assert np.allclose(F.conj().T @ F, np.eye(16), atol=1e-13)
    assert np.allclose(dft_matrix(4, inverse=True), F.conj().T, atol=1e-15)


def test_circuit_matrix_applies_first_gate_first():
    gates = [GateOp.single(X, 0), GateOp.hadamard(0)]
    assert np.allclose(dense_circuit_matrix(gates, 1), HADAMARD @ X, atol=1e-15)


# Dense grid Hamiltonians

def test_plane_wave_is_free_eigenvector():
    system = ParticleSystem(1, 4, box_length=2.0, masses=(0.5,))
    H = dense_grid_hamiltonian(system, PotentialSpec())
    wave = np.exp(2j * np.pi * np.arange(16) * 5 / 16) / 4
    p = 2 * math.pi * 5 / 2.0
    assert np.allclose(H.matrix @ wave, (p ** 2 / (2 * 0.5)) * wave, atol=1e-10)


def test_potential_energy_by_index_brute_force():
    system = ParticleSystem(2, 3, box_length=8.0)
    table = np.arange(8, dtype=float)
    spec = PotentialSpec(
        one_body=(OneBody(1, Tabulated(table)),),
        two_body=(TwoBody((0, 1), CoulombSoft(2.0, 0.5)),),
    )
    energies = potential_energy_by_index(system, spec, minimal_image=True)
    x = system.positions()
    for b in (0, 7, 9, 56, 63):
        j0, j1 = b & 7, b >> 3
        r = x[j0] - x[j1]
        r = (r + 4.0) % 8.0 - 4.0
        assert energies[b] == pytest.approx(table[j1] + 2.0 / math.sqrt(r ** 2 + 0.25))


def test_oscillator_spectrum():
    system = ParticleSystem(1, 7, box_length=20.0)
    H = dense_grid_hamiltonian(system, PotentialSpec(one_body=(OneBody(0, Harmonic(1.0, 10.0)),)))
    energies = H.eigenvalues()
    for n in range(4):
        assert energies[n] == pytest.approx(analytic_suite('oscillator_level', {'n': n}, 0.0), abs=1e-6)


def test_free_gaussian_width_spreads():
    system = ParticleSystem(1, 8, box_length=20.0)
    state = prepare_product_wavepackets(system, WavepacketSpec((Wavepacket(10.0, 0.0, 1.0),)))
    H = dense_grid_hamiltonian(system, PotentialSpec())
    moments = particle_observables(exact_propagate(H, state, 1.0), system)[0]
    expected = analytic_suite('free_width', {'sigma0': 1.0}, 1.0)
    assert moments['x_width'] == pytest.approx(expected, abs=1e-6)


def test_harmonic_mean_position():
    system = ParticleSystem(1, 7, box_length=20.0)
    spec = PotentialSpec(one_body=(OneBody(0, Harmonic(1.0, 10.0)),))
    state = prepare_product_wavepackets(system, WavepacketSpec((Wavepacket(12.0, 0.0, math.sqrt(0.5)),)))
    H = dense_grid_hamiltonian(system, spec)
    for t in (math.pi / 3, math.pi / 2, math.pi):
        moments = particle_observables(exact_propagate(H, state, t), system)[0]
        expected = analytic_suite('harmonic_mean_x', {'x0': 2.0, 'center': 10.0}, t)
        assert moments['x_mean'] == pytest.approx(expected, abs=1e-6)


# Classical split-step twin

def test_classical_twin_zero_steps_is_initial_state():
    system = ParticleSystem(2, 5, box_length=10.0)
    spec = WavepacketSpec((Wavepacket(3.0, 0.5, 1.0), Wavepacket(7.0, -0.5, 1.0)))
    twin = classical_split_step(system, PotentialSpec(), spec, 0.1, 0)
    assert distance(twin, prepare_product_wavepackets(system, spec)) < 1e-14


def test_classical_twin_conserves_norm(rng):
    system = ParticleSystem(2, 3, box_length=4.0)
    spec = PotentialSpec(two_body=(TwoBody((0, 1), CoulombSoft(1.0)),))
    out = classical_split_step(system, spec, random_state(rng, 6), 0.01, 50, 'strang')
    assert abs(out.norm() - 1.0) < 1e-12


def test_classical_twin_validation(rng):
    system = ParticleSystem(1, 3)
    state = random_state(rng, 3)
    with pytest.raises(InvalidPlan):
        classical_split_step(system, PotentialSpec(), state, 0.0, 1)
    with pytest.raises(InvalidPlan):
        classical_split_step(system, PotentialSpec(), state, 0.1, 1, mode='yoshida')
    with pytest.raises(DimensionMismatch):
        classical_split_step(system, PotentialSpec(), random_state(rng, 4), 0.1, 1)
    with pytest.raises(UnresolvableWidth):
        classical_split_step(system, PotentialSpec(), WavepacketSpec((Wavepacket(0.5, 0.0, 0.1),)), 0.1, 1)


# Closed forms

def test_analytic_rabi():
    assert analytic_suite('rabi', {'omega': 1.0}, math.pi / 2) == pytest.approx(-1.0)


def test_analytic_free_width():
    assert analytic_suite('free_width', {'sigma0': 1.0}, 2.0) == pytest.approx(math.sqrt(2.0))


def test_analytic_harmonic_mean_x():
    assert analytic_suite('harmonic_mean_x', {'x0': 2.0, 'center': 10.0}, math.pi) == pytest.approx(8.0)
    with_momentum = analytic_suite('harmonic_mean_x', {'x0': 0.0, 'p0': 1.0, 'omega': 2.0}, math.pi / 4)
    assert with_momentum == pytest.approx(0.5)


def test_analytic_oscillator_level():
    assert analytic_suite('oscillator_level', {'n': 2, 'omega': 1.5}, 3.0) == pytest.approx(3.75)


def test_analytic_array_time():
    t = np.linspace(0.0, 1.0, 5)
    values = analytic_suite('rabi', None, t)
    assert isinstance(values, np.ndarray)
    assert np.allclose(values, np.cos(2 * t))


def test_unknown_analytic_case():
    with pytest.raises(UnknownAnalyticCase):
        analytic_suite('hydrogen', {}, 0.0)


def test_analytic_missing_parameter():
    with pytest.raises(ValidationError, match='sigma0'):
        analytic_suite('free_width', {}, 1.0)


def test_dense_energy_matches_pauli_expectations(rng, three_spin_system):
    psi = random_state(rng, 3)
    H = dense_spin_hamiltonian(three_spin_system)
    total = sum(term.coefficient * expectation_pauli(psi, term) for term in three_spin_system.terms)
    assert dense_expectation(H, psi) == pytest.approx(total, abs=1e-12)


def test_quarter_rabi_period():
    H = dense_spin_hamiltonian(single_term('X', (0,)))
    out = exact_propagate(H, new_basis_state(1, 0), math.pi / 2)
    assert np.allclose(out.amplitudes, [0.0, -1j], atol=1e-14)


def test_propagation_composes(rng, three_spin_system):
    H = dense_spin_hamiltonian(three_spin_system)
    psi = random_state(rng, 3)
    direct = exact_propagate(H, psi, 1.3)
    stepped = exact_propagate(H, exact_propagate(H, psi, 0.5), 0.8)
    assert distance(direct, stepped) < 1e-10


def test_free_two_point_grid_spectrum():
    system = ParticleSystem(1, 2, box_length=1.0)
    energies = dense_grid_hamiltonian(system, PotentialSpec()).eigenvalues()
    p = system.momenta()
    assert np.allclose(energies, np.sort(p ** 2 / 2), atol=1e-9)


def test_two_particle_coulomb_hamiltonian_is_hermitian():
    system = ParticleSystem(2, 4, box_length=8.0)
    spec = PotentialSpec(two_body=(TwoBody((0, 1), CoulombSoft(1.0)),))
    assert dense_grid_hamiltonian(system, spec).hermiticity_error() < 1e-10


def test_analytic_initial_values():
    assert analytic_suite('rabi', {'omega': 1.0}, 0.0) == 1.0
    assert analytic_suite('free_width', {'sigma0': 0.3}, 0.0) == pytest.approx(0.3)
    assert analytic_suite('harmonic_mean_x', {'x0': 1.5}, math.pi) == pytest.approx(-1.5)

"""Tests for problem files: parsing, schema validation and construction."""

import glob
import json
import os

import pytest

from conftest import CONFIG_DIR, config_path
from errors import InvalidPlan, InvalidTerm, ParseError, ValidationError
from particle_sim import CoulombSoft, ParticleSystem
from problem import build_problem, load_problem
from spin_sim import SpinSystem


def spin_config(**overrides):
    config = {
        'problem_type': 'spins',
        'system': {'num_spins': 2, 'terms': [
            {'coefficient': 1.0, 'sites': [0], 'paulis': ['X']},
            {'coefficient': 0.5, 'sites': [0, 1], 'paulis': ['Z', 'Z']},
        ]},
        'initial_state': {'basis_index': 0},
        'plan': {'dt': 0.01, 'T': 0.1},
    }
    config.update(overrides)
    return config


def particle_config(**overrides):
    config = {
        'problem_type': 'particles',
        'system': {'num_particles': 1, 'qubits_per_particle': 4, 'box_length': 1.0},
        'potentials': {'one_body': [
            {'particle': 0, 'kind': {'type': 'harmonic', 'stiffness': 1.0, 'center': 0.5}},
        ]},
        'initial_state': {'wavepackets': [{'center': 0.5, 'width': 0.2}]},
        'plan': {'dt': 0.01, 'T': 0.1},
    }
    config.update(overrides)
    return config


def write_config(tmp_path, data, name='problem.json'):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data, indent=2))
    return str(path)


# Spin problems

def test_minimal_spin_config(tmp_path):
    problem = load_problem(write_config(tmp_path, spin_config(), 'two_spin.json'))
    assert problem.name == 'two_spin'
    assert isinstance(problem.system, SpinSystem)
    assert problem.system.num_terms == 2
    assert problem.plan.mode == 'exact_term'
    assert problem.plan.steps == 10
    assert problem.initial_state().amplitudes[0] == 1.0
    assert [obs.label for obs in problem.observables] == ['Z0', 'Z1']


def test_spin_term_sites_distinct():
    config = spin_config()
    config['system']['terms'][1]['sites'] = [1, 1]
    with pytest.raises(InvalidTerm, match='sites distinct'):
        build_problem(config)


def test_unknown_keys_rejected():
    with pytest.raises(ValidationError, match='colour'):
        build_problem(spin_config(colour='blue'))
    config = spin_config()
    config['plan']['dtt'] = 0.1
    with pytest.raises(ValidationError, match='plan.dtt'):
        build_problem(config)


def test_unknown_system_keys_rejected():
    config = spin_config()
    config['system']['spins'] = 2
    with pytest.raises(ValidationError, match='system'):
        build_problem(config)


def test_mode_must_fit_problem_type():
    with pytest.raises(InvalidPlan):
        build_problem(spin_config(plan={'dt': 0.01, 'T': 0.1, 'mode': 'lie'}))
    with pytest.raises(InvalidPlan):
        build_problem(particle_config(plan={'dt': 0.01, 'T': 0.1, 'mode': 'exact_term'}))


def test_initial_state_needs_exactly_one_source():
    both = {'basis_index': 0, 'wavepackets': [{'center': 0.5, 'width': 0.2}]}
    with pytest.raises(ValidationError, match='exactly one'):
        build_problem(particle_config(initial_state=both))
    with pytest.raises(ValidationError, match='exactly one'):
        build_problem(spin_config(initial_state={}))


def test_spins_reject_particle_sections():
    with pytest.raises(ValidationError, match='potentials'):
        build_problem(spin_config(potentials={'one_body': []}))
    with pytest.raises(ValidationError, match='wavepackets'):
        build_problem(spin_config(initial_state={'wavepackets': [{'center': 0.5, 'width': 0.2}]}))


def test_pauli_observable_not_available_for_particles():
    observables = [{'kind': 'pauli', 'sites': [0], 'paulis': ['Z']}]
    with pytest.raises(ValidationError, match='pauli'):
        build_problem(particle_config(observables=observables))


def test_spin_observable_sites_checked():
    observables = [{'kind': 'pauli', 'sites': [3], 'paulis': ['Z']}]
    with pytest.raises(ValidationError, match='num_spins'):
        build_problem(spin_config(observables=observables))


def test_seed_override(tmp_path):
    path = write_config(tmp_path, spin_config(plan={'dt': 0.01, 'T': 0.1, 'seed': 3}))
    assert load_problem(path).plan.seed == 3
    assert load_problem(path, seed=99).plan.seed == 99


# Particle problems

def test_bundled_two_particle_problem():
    problem = load_problem(config_path('two_particle_coulomb.json'))
    assert isinstance(problem.system, ParticleSystem)
    assert problem.system.num_particles == 2
    assert problem.system.qubits_per_particle == 5
    assert problem.num_qubits == 10
    coulomb = problem.potentials.two_body[0].kind
    assert isinstance(coulomb, CoulombSoft)
    assert coulomb.softening == pytest.approx(0.75)
    assert problem.plan.mode == 'strang'
    assert problem.observables == ('moments', 'energy')


def test_particle_defaults():
    problem = build_problem(particle_config())
    assert problem.plan.mode == 'lie'
    assert problem.observables == ('moments',)
    assert abs(problem.initial_state().norm() - 1.0) < 1e-12


def test_tabulated_length_must_match_grid():
    potentials = {'one_body': [{'particle': 0, 'kind': {'type': 'tabulated', 'values': [0.0, 1.0, 2.0]}}]}
    with pytest.raises(ValidationError, match='tabulated'):
        build_problem(particle_config(potentials=potentials))


def test_unknown_potential_type():
    potentials = {'one_body': [{'particle': 0, 'kind': {'type': 'morse', 'depth': 1.0}}]}
    with pytest.raises(ValidationError):
        build_problem(particle_config(potentials=potentials))


def test_potential_particle_out_of_range():
    potentials = {'one_body': [{'particle': 1, 'kind': {'type': 'harmonic', 'stiffness': 1.0}}]}
    with pytest.raises(ValidationError, match='out of range'):
        build_problem(particle_config(potentials=potentials))


def test_wavepacket_count_must_match_particles():
    initial = {'wavepackets': [{'center': 0.3, 'width': 0.2}, {'center': 0.6, 'width': 0.2}]}
    with pytest.raises(ValidationError, match='wavepackets'):
        build_problem(particle_config(initial_state=initial))


# File handling

def test_malformed_json_reports_line_and_column(tmp_path):
    path = write_config(tmp_path, '{\n  "problem_type": "spins",\n  "system": \n}\n')
    with pytest.raises(ParseError) as info:
        load_problem(path)
    assert str(info.value).startswith(f"{path}:4:1:")


def test_missing_file(tmp_path):
    with pytest.raises(ParseError, match='cannot read file'):
        load_problem(str(tmp_path / 'absent.json'))


def test_all_bundled_configs_load():
    paths = sorted(glob.glob(os.path.join(CONFIG_DIR, '*.json')))
    assert len(paths) == 7
    for path in paths:
        problem = load_problem(path)
        assert problem.name == os.path.splitext(os.path.basename(path))[0]
        assert problem.plan.steps >= 1

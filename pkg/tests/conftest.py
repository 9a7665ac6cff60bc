"""
Shared fixtures: seeded generators, random states and the bundled problems.
"""

import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, 'src'))
sys.path.insert(0, ROOT)
os.environ.setdefault('QSIM_QUIET', '1')

from spin_sim import PauliTerm, SpinSystem
from statevec import StateVector


CONFIG_DIR = os.path.join(ROOT, 'data', 'configs')
GOLDEN_DIR = os.path.join(ROOT, 'data', 'golden')


def random_amplitudes(rng: np.random.Generator, n: int) -> np.ndarray:
    amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return amps / np.linalg.norm(amps)


def random_state(rng: np.random.Generator, n: int) -> StateVector:
    """Normalized state with Gaussian random amplitudes."""
    return StateVector(n, random_amplitudes(rng, n))


def random_unitary(rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    """Haar-ish unitary from the QR decomposition of a complex Gaussian matrix."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def config_path(name: str) -> str:
    return os.path.join(CONFIG_DIR, name)


def three_spin() -> SpinSystem:
    """Non-commuting 3-spin system used by the convergence checks."""
    return SpinSystem(3, (
        PauliTerm(1.0, (0,), ('X',)),
        PauliTerm(0.9, (1,), ('X',)),
        PauliTerm(0.8, (2,), ('X',)),
        PauliTerm(0.5, (0,), ('Z',)),
        PauliTerm(0.7, (0, 1), ('Z', 'Z')),
        PauliTerm(0.6, (1, 2), ('Z', 'Z')),
    ))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def three_spin_system():
    return three_spin()

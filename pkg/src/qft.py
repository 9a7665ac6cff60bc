"""
QFT Module
Gate-level quantum Fourier transform on a qubit register.

Forward convention: |j> -> 2^(-k/2) * sum_l exp(+2*pi*i*j*l / 2^k) |l>, with j and l
read little-endian from the register. Bit reversal is done with explicit swaps.
"""

import math
from enum import Enum
from functools import lru_cache
from typing import Dict, Optional, Tuple

from statevec import GateOp, Register, StateVector, apply_circuit
from utils import GateTally


class QftDirection(str, Enum):
    FORWARD = 'forward'
    INVERSE = 'inverse'


@lru_cache(maxsize=256)
def qft_circuit(reg: Register, direction: QftDirection = QftDirection.FORWARD) -> Tuple[GateOp, ...]:
    """
    Ordered gate list of the exact QFT on a register.

    Args:
        reg: Target register of width k
        direction: forward or inverse

    Returns:
        k Hadamards, k(k-1)/2 controlled phases (angles ±pi/2^m) and floor(k/2) swaps
    """
    k = reg.width
    gates = []
    # Top qubit first: after its Hadamard it collects pi/2^m from each lower qubit
    # that is still in the computational basis.
    for i in range(k - 1, -1, -1):
        gates.append(GateOp.hadamard(reg.qubit(i)))
        for j in range(i - 1, -1, -1):
            gates.append(GateOp.cphase(reg.qubit(j), reg.qubit(i), math.pi / (1 << (i - j))))
    for i in range(k // 2):
        gates.append(GateOp.swap(reg.qubit(i), reg.qubit(k - 1 - i)))

    if QftDirection(direction) is QftDirection.INVERSE:
        gates = [gate.adjoint() for gate in reversed(gates)]
    return tuple(gates)


def qft_gate_counts(k: int) -> Dict[str, int]:
    """Closed-form gate counts of one k-qubit QFT."""
    return {
        'hadamard': k,
        'controlled_phase': k * (k - 1) // 2,
        'swap': k // 2,
    }


def apply_qft(state: StateVector, reg: Register,
              direction: QftDirection = QftDirection.FORWARD,
              counter: Optional[GateTally] = None) -> StateVector:
    """Apply the QFT gate list to reg; identity on every other qubit."""
    reg.validate_for(state.num_qubits)
    return apply_circuit(state, qft_circuit(reg, QftDirection(direction)), counter)

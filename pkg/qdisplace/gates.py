from __future__ import annotations
from math import sqrt
from typing import Sequence

import numpy as np

from .qsim import GateOp

I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / sqrt(2)
CNOT = np.array([
    [1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 0, 1],
    [0, 0, 1, 0],
], dtype=np.complex128)
SWAP = np.array([
    [1, 0, 0, 0],
    [0, 0, 1, 0],
    [0, 1, 0, 0],
    [0, 0, 0, 1],
], dtype=np.complex128)
# Bell-basis disambiguation: Hadamard on the control after CNOT
U = np.kron(H, I2) @ CNOT

NAMED_MATRICES = {
    'I': I2,
    'X': X,
    'Y': Y,
    'Z': Z,
    'H': H,
    'CNOT': CNOT,
    'SWAP': SWAP,
    'U': U,
    'U†': U.conj().T,
    'Udg': U.conj().T,
}


def named(name: str, *sites: str) -> GateOp:
    try:
        matrix = NAMED_MATRICES[name]
    except KeyError:
        raise ValueError(f'Unknown gate name {name!r}; known: {sorted(NAMED_MATRICES)}')
    return GateOp(matrix, sites, name=name)


def pauli(z: int, x: int) -> np.ndarray:
    """The frame operator X^x Z^z."""
    return np.linalg.matrix_power(X, x) @ np.linalg.matrix_power(Z, z)


def pauli_pair(frame: Sequence[tuple[int, int]]) -> np.ndarray:
    """Tensor product of X^x Z^z frames, first qubit most significant."""
    result = np.ones((1, 1), dtype=np.complex128)
    for z, x in frame:
        result = np.kron(result, pauli(z, x))
    return result


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)

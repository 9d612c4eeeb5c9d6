"""Bell states, the disambiguated Bell state measurement, uncorrected
teleportation and CHSH bookkeeping."""
from __future__ import annotations
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from itertools import product
from math import atan2, cos, pi, sin, sqrt
from typing import Literal, Mapping, Sequence

import numpy as np

from .constants import UNITARY_TOLERANCE
from .exceptions import RegisterError
from .gates import I2, U, pauli, ry
from .qsim import GateOp, PureState, Register, apply_gate, born_distribution

Wing = Literal['A', 'B', 'C_A', 'C_B']
Signs = tuple[int, int, int, int]


class BellKind(Enum):
    PhiPlus = 'PhiPlus'
    PhiMinus = 'PhiMinus'
    PsiPlus = 'PsiPlus'
    PsiMinus = 'PsiMinus'

    @property
    def bits(self) -> tuple[int, int]:
        """(z, x): phase bit then flip bit."""
        return _KIND_BITS[self]

    @classmethod
    def from_bits(cls, z: int, x: int) -> 'BellKind':
        return _BITS_KIND[(int(z), int(x))]

    def __str__(self):
        return self.value


_KIND_BITS = {
    BellKind.PhiPlus: (0, 0),
    BellKind.PhiMinus: (1, 0),
    BellKind.PsiPlus: (0, 1),
    BellKind.PsiMinus: (1, 1),
}
_BITS_KIND = {bits: kind for kind, bits in _KIND_BITS.items()}

PHI_PLUS = np.array([1, 0, 0, 1], dtype=np.complex128) / sqrt(2)


def bell_vector(kind: BellKind) -> np.ndarray:
    z, x = kind.bits
    return np.kron(I2, pauli(z, x)) @ PHI_PLUS


def bell_state(kind: BellKind | str, site_a: str, site_b: str) -> PureState:
    kind = BellKind(kind)
    return PureState(Register.qubits(site_a, site_b), bell_vector(kind))


def bsm_unitary(sites: Sequence[str] = ('q0', 'q1')) -> GateOp:
    """U = (H ⊗ I)·CNOT; the first site is the control and receives the Hadamard."""
    return GateOp(U, tuple(sites), name='U')


def bsm_outcome_map(bits: Sequence[int]) -> BellKind:
    b1, b2 = bits
    if {b1, b2} - {0, 1}:
        raise ValueError(f'Bell measurement bits must be 0/1, got {tuple(bits)}')
    return BellKind.from_bits(b1, b2)


@dataclass(frozen=True)
class TeleportFragment:
    """Teleportation without the receiver's correction.

    After the gates, reading out `z_site` and `x_site` as (z, x) leaves
    X^x Z^z applied to the source state on `receiver`.
    """
    gates: tuple[GateOp, ...]
    z_site: str
    x_site: str
    receiver: str

    @staticmethod
    def frame(z: int, x: int) -> np.ndarray:
        return pauli_frame(z, x)


def pauli_frame(z: int, x: int) -> np.ndarray:
    """X^x Z^z, the operator left on the receiver by readout (z, x)."""
    return pauli(z, x)


def uncorrected_teleport_fragment(source: str, sender: str, receiver: str) -> TeleportFragment:
    if len({source, sender, receiver}) != 3:
        raise RegisterError(
            f'Teleportation sites must be distinct: {source!r}, {sender!r}, {receiver!r}'
        )
    return TeleportFragment(
        gates=(bsm_unitary((source, sender)),),
        z_site=source,
        x_site=sender,
        receiver=receiver
    )


def direction_rotation(theta: float) -> np.ndarray:
    """Basis change after which readout 0 means +1 along cos θ σz + sin θ σx."""
    return ry(-theta)


@dataclass(frozen=True)
class ChshSettings:
    wing: str
    # (z, x) components of the two measurement directions
    directions: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self):
        for z, x in self.directions:
            if abs(z * z + x * x - 1) > UNITARY_TOLERANCE:
                raise ValueError(f'Direction {(z, x)} of wing {self.wing!r} is not unit norm')

    @classmethod
    def from_angles(cls, wing: str, first: float, second: float) -> 'ChshSettings':
        return cls(wing, ((cos(first), sin(first)), (cos(second), sin(second))))

    @property
    def angles(self) -> tuple[float, float]:
        return tuple(atan2(x, z) for z, x in self.directions)

    def rotation(self, setting: int, site: str) -> GateOp:
        theta = self.angles[setting]
        return GateOp(direction_rotation(theta), (site,), name=f'R({theta:.4f})')


_CANONICAL_ANGLES = {
    'A': (0.0, pi / 2),
    'C_A': (pi / 4, -pi / 4),
    'C_B': (0.0, pi / 2),
    'B': (pi / 4, -pi / 4),
}


def canonical_chsh_settings(wing: Wing) -> ChshSettings:
    try:
        first, second = _CANONICAL_ANGLES[wing]
    except KeyError:
        raise ValueError(f'Unknown wing {wing!r}; expected one of {sorted(_CANONICAL_ANGLES)}')
    return ChshSettings.from_angles(wing, first, second)


def correlator(distribution: Mapping) -> float:
    """E = Σ p(a, b)·(-1)^(a+b) for bit-valued outcome pairs."""
    return sum(
        probability * (-1) ** (int(a) + int(b))
        for (a, b), probability in distribution.items()
    )


CHSH_SYMMETRIES: tuple[Signs, ...] = tuple(
    signs for signs in product((1, -1), repeat=4)
    if signs.count(-1) % 2 == 1
)


def chsh_symmetry(signs: Signs) -> str:
    names = ('E11', 'E12', 'E21', 'E22')
    return ''.join(f"{'+' if s > 0 else '-'}{name}" for s, name in zip(signs, names))


@dataclass(frozen=True)
class ChshReport:
    scores: dict
    best: Signs
    best_score: float

    @property
    def best_name(self) -> str:
        return chsh_symmetry(self.best)


def chsh_scores(correlators: Mapping) -> ChshReport:
    """Score all eight CHSH symmetries.

    `correlators` maps setting pairs (x, y) with x, y in {0, 1} to either a
    correlator value or a distribution over bit pairs.
    """
    values = {}
    for key in product((0, 1), repeat=2):
        if key not in correlators:
            raise ValueError(f'Incomplete behavior: missing settings {key}')
        value = correlators[key]
        values[key] = correlator(value) if isinstance(value, Mapping) else float(value)
    ordered = [values[(0, 0)], values[(0, 1)], values[(1, 0)], values[(1, 1)]]
    scores = {
        signs: sum(s * e for s, e in zip(signs, ordered))
        for signs in CHSH_SYMMETRIES
    }
    best = max(scores, key=scores.get)
    return ChshReport(scores=scores, best=best, best_score=scores[best])


def ideal_correlators(
    kind: BellKind,
    first: ChshSettings,
    second: ChshSettings
) -> dict[tuple[int, int], float]:
    state = bell_state(kind, 'a', 'b')
    result = {}
    for x, y in product((0, 1), repeat=2):
        rotated = apply_gate(apply_gate(state, first.rotation(x, 'a')), second.rotation(y, 'b'))
        result[(x, y)] = correlator(born_distribution(rotated, ['a', 'b']))
    return result


@lru_cache(maxsize=None)
def bell_symmetry(kind: BellKind) -> Signs:
    """CHSH symmetry maximised by `kind` under the canonical A/B settings."""
    report = chsh_scores(ideal_correlators(
        kind, canonical_chsh_settings('A'), canonical_chsh_settings('B')
    ))
    return report.best

"""Exact pure-state simulation over registers of labeled qudit sites.

Amplitudes are indexed with the first site as the most significant digit.
Gates are applied by reshaping the amplitude vector into one axis per site
and contracting the gate matrix with the target axes only.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from math import log2, prod, sqrt
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .config import max_qubits
from .constants import (
    BRANCH_THRESHOLD, DISTRIBUTION_TOLERANCE, EQUIVALENCE_TOLERANCE,
    NORM_TOLERANCE, PROBABILITY_CLAMP, PROBABILITY_FLOOR, UNITARY_TOLERANCE,
    unset
)
from .exceptions import (
    CapacityError, NonUnitaryError, RegisterError, ZeroProbabilityBranch
)
from .utils import ensure_unique

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Register:
    sites: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        sites = tuple((str(label), int(dim)) for label, dim in self.sites)
        object.__setattr__(self, 'sites', sites)
        ensure_unique(self.labels, what='site label', error=RegisterError)
        for label, dim in sites:
            if dim < 2:
                raise RegisterError(f'Site {label!r} has dimension {dim} < 2')

    @classmethod
    def qubits(cls, *labels: str) -> 'Register':
        return cls(tuple((label, 2) for label in labels))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.sites)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.sites)

    @property
    def total_dim(self) -> int:
        return prod(self.dims)

    @property
    def qubit_equivalents(self) -> float:
        return log2(self.total_dim)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise RegisterError(f'Unknown site {label!r}; register has {list(self.labels)}')

    def dim(self, label: str) -> int:
        return self.sites[self.index(label)][1]

    def without(self, label: str) -> 'Register':
        i = self.index(label)
        return Register(self.sites[:i] + self.sites[i + 1:])

    def concat(self, other: 'Register') -> 'Register':
        return Register(self.sites + other.sites)

    def subset(self, labels: Sequence[str]) -> 'Register':
        return Register(tuple((label, self.dim(label)) for label in labels))

    def __contains__(self, label) -> bool:
        return label in self.labels

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self) -> Iterator[tuple[str, int]]:
        return iter(self.sites)


def check_capacity(register: Register, cap: int = unset):
    limit = max_qubits(cap)
    if register.qubit_equivalents > limit + 1e-9:
        raise CapacityError(
            f'Register of {register.qubit_equivalents:.1f} qubit-equivalents'
            f' exceeds the dense cap of {limit}'
            ' (raise it with QDISPLACE_MAX_QUBITS)'
        )


@dataclass(frozen=True, eq=False)
class PureState:
    register: Register
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amplitudes.size != self.register.total_dim:
            raise RegisterError(
                f'{amplitudes.size} amplitudes do not match a register'
                f' of total dimension {self.register.total_dim}'
            )
        norm = float(np.vdot(amplitudes, amplitudes).real)
        if abs(norm - 1) > NORM_TOLERANCE:
            raise ValueError(f'State is not normalized: squared norm {norm!r}')
        amplitudes.setflags(write=False)
        object.__setattr__(self, 'amplitudes', amplitudes)

    @classmethod
    def empty(cls) -> 'PureState':
        return cls(Register(), np.ones(1))

    @property
    def labels(self) -> tuple[str, ...]:
        return self.register.labels

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.register.dims)

    def amplitude(self, *values: int) -> complex:
        """Amplitude of the basis state with the given per-site digits."""
        if len(values) == 1 and isinstance(values[0], str):
            values = tuple(int(c) for c in values[0])
        return complex(self.tensor_view()[tuple(values)])

    def __repr__(self):
        return f'PureState({list(self.labels)})'


@dataclass(frozen=True, eq=False)
class GateOp:
    matrix: np.ndarray = field(repr=False)
    sites: tuple[str, ...]
    controls: tuple[str, ...] = ()
    control_values: tuple[int, ...] = ()
    name: str = ''

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.complex128)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise NonUnitaryError(f'Gate {self.name!r} matrix is not square: {matrix.shape}')
        deviation = np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0])).max()
        if deviation > UNITARY_TOLERANCE:
            raise NonUnitaryError(
                f'Gate {self.name!r} is not unitary (deviation {deviation:.2e})'
            )
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)
        object.__setattr__(self, 'sites', tuple(self.sites))
        object.__setattr__(self, 'controls', tuple(self.controls))
        values = tuple(self.control_values) or (1,) * len(self.controls)
        if len(values) != len(self.controls):
            raise RegisterError(
                f'Gate {self.name!r} has {len(self.controls)} controls'
                f' but {len(values)} control values'
            )
        object.__setattr__(self, 'control_values', tuple(int(v) for v in values))
        ensure_unique(self.support, what='gate site', error=RegisterError)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def support(self) -> tuple[str, ...]:
        return self.controls + self.sites

    def dagger(self) -> 'GateOp':
        name = self.name[:-1] if self.name.endswith('†') else f'{self.name}†'
        return GateOp(
            self.matrix.conj().T, self.sites,
            controls=self.controls, control_values=self.control_values,
            name=name
        )

    def on(self, *sites: str) -> 'GateOp':
        return GateOp(self.matrix, sites, self.controls, self.control_values, self.name)

    def controlled_by(self, controls: Sequence[str], values: Sequence[int]) -> 'GateOp':
        return GateOp(
            self.matrix, self.sites,
            controls=tuple(controls) + self.controls,
            control_values=tuple(values) + self.control_values,
            name=self.name
        )

    def relabel(self, mapping: Mapping[str, str]) -> 'GateOp':
        return GateOp(
            self.matrix,
            tuple(mapping.get(s, s) for s in self.sites),
            tuple(mapping.get(s, s) for s in self.controls),
            self.control_values,
            self.name
        )


def daggers(gates: Iterable[GateOp]) -> list[GateOp]:
    """Inverse of a gate sequence."""
    return [gate.dagger() for gate in reversed(list(gates))]


class OutcomeDistribution(dict):
    """Map from outcome tuple to probability."""

    def __init__(self, data=(), tolerance: float = DISTRIBUTION_TOLERANCE):
        super().__init__()
        for outcome, probability in dict(data).items():
            probability = float(probability)
            if probability < 0:
                if probability < -PROBABILITY_CLAMP:
                    raise ValueError(
                        f'Negative probability {probability!r} for outcome {outcome!r}'
                    )
                probability = 0.0
            self[tuple(outcome)] = probability
        total = sum(self.values())
        if abs(total - 1) > tolerance:
            raise ValueError(f'Probabilities sum to {total!r}, not 1')

    def marginal(self, positions: Sequence[int]) -> 'OutcomeDistribution':
        result = {}
        for outcome, probability in self.items():
            key = tuple(outcome[i] for i in positions)
            result[key] = result.get(key, 0.0) + probability
        return OutcomeDistribution(result)

    def map(self, function) -> 'OutcomeDistribution':
        """Push the distribution forward through `function` on outcomes."""
        result = {}
        for outcome, probability in self.items():
            key = function(outcome)
            key = key if isinstance(key, tuple) else (key,)
            result[key] = result.get(key, 0.0) + probability
        return OutcomeDistribution(result)

    def tv_distance(self, other: Mapping) -> float:
        keys = set(self) | set(other)
        return 0.5 * sum(abs(self.get(k, 0.0) - other.get(k, 0.0)) for k in keys)


def _apply_matrix(
    psi: np.ndarray,
    matrix: np.ndarray,
    targets: Sequence[int],
    controls: Sequence[int] = (),
    control_values: Sequence[int] = ()
) -> np.ndarray:
    """Apply `matrix` to the target axes of `psi` (in place on a copy).

    Axes beyond the register axes (e.g. a batch axis) are carried along.
    """
    out = psi.copy()
    index = [slice(None)] * psi.ndim
    for axis, value in zip(controls, control_values):
        index[axis] = value
    index = tuple(index)
    block = out[index]
    remaining = [axis for axis in range(psi.ndim) if axis not in set(controls)]
    moved_axes = [remaining.index(axis) for axis in targets]
    moved = np.moveaxis(block, moved_axes, range(len(moved_axes)))
    shape = moved.shape
    updated = (matrix @ moved.reshape(matrix.shape[0], -1)).reshape(shape)
    out[index] = np.moveaxis(updated, range(len(moved_axes)), moved_axes)
    return out


def _check_gate(register: Register, gate: GateOp):
    missing = [label for label in gate.support if label not in register]
    if missing:
        raise RegisterError(f'Gate {gate.name!r} acts on unknown sites {missing}')
    target_dim = prod(register.dim(label) for label in gate.sites)
    if target_dim != gate.dim:
        raise RegisterError(
            f'Gate {gate.name!r} of dimension {gate.dim} does not match'
            f' sites {list(gate.sites)} of total dimension {target_dim}'
        )
    for label, value in zip(gate.controls, gate.control_values):
        if not 0 <= value < register.dim(label):
            raise RegisterError(f'Control value {value} out of range for site {label!r}')


def init_state(register: Register, index: int) -> PureState:
    check_capacity(register)
    if not 0 <= index < register.total_dim:
        raise RegisterError(
            f'Basis index {index} out of range for total dimension {register.total_dim}'
        )
    amplitudes = np.zeros(register.total_dim, dtype=np.complex128)
    amplitudes[index] = 1
    return PureState(register, amplitudes)


def apply_gate(state: PureState, gate: GateOp) -> PureState:
    register = state.register
    _check_gate(register, gate)
    psi = _apply_matrix(
        state.tensor_view(),
        gate.matrix,
        targets=[register.index(label) for label in gate.sites],
        controls=[register.index(label) for label in gate.controls],
        control_values=gate.control_values
    )
    return PureState(register, psi.reshape(-1))


def apply_gates(state: PureState, gates: Iterable[GateOp]) -> PureState:
    for gate in gates:
        state = apply_gate(state, gate)
    return state


def tensor(a: PureState, b: PureState) -> PureState:
    register = a.register.concat(b.register)
    check_capacity(register)
    return PureState(register, np.kron(a.amplitudes, b.amplitudes))


def permute(state: PureState, order: Sequence[str]) -> PureState:
    register = state.register
    if sorted(order) != sorted(register.labels):
        raise RegisterError(f'{list(order)} is not a permutation of {list(register.labels)}')
    axes = [register.index(label) for label in order]
    psi = np.transpose(state.tensor_view(), axes) if axes else state.tensor_view()
    return PureState(register.subset(order), psi.reshape(-1))


def born_distribution(state: PureState, sites: Sequence[str]) -> OutcomeDistribution:
    register = state.register
    axes = [register.index(label) for label in sites]
    ensure_unique(list(sites), what='measured site', error=RegisterError)
    probabilities = (np.abs(state.amplitudes) ** 2).reshape(register.dims)
    if not axes:
        return OutcomeDistribution({(): float(probabilities.sum())})
    others = tuple(axis for axis in range(len(register)) if axis not in axes)
    marginal = probabilities.sum(axis=others) if others else probabilities
    ordered = sorted(axes)
    marginal = np.transpose(marginal, [ordered.index(axis) for axis in axes])
    return OutcomeDistribution({
        tuple(int(i) for i in outcome): float(marginal[tuple(outcome)])
        for outcome in np.argwhere(marginal > PROBABILITY_FLOOR)
    })


def project_and_drop(state: PureState, site: str, outcome: int) -> tuple[float, PureState]:
    register = state.register
    axis = register.index(site)
    if not 0 <= outcome < register.dim(site):
        raise RegisterError(f'Outcome {outcome} out of range for site {site!r}')
    branch = np.take(state.tensor_view(), outcome, axis=axis).reshape(-1)
    probability = float(np.vdot(branch, branch).real)
    if probability <= BRANCH_THRESHOLD:
        raise ZeroProbabilityBranch(
            f'Outcome {outcome} on site {site!r} has probability {probability:.3e}'
        )
    return probability, PureState(register.without(site), branch / sqrt(probability))


def branches(state: PureState, site: str) -> Iterator[tuple[int, float, PureState]]:
    """All nonzero-probability outcomes of a computational readout of `site`."""
    for outcome in range(state.register.dim(site)):
        try:
            probability, post = project_and_drop(state, site, outcome)
        except ZeroProbabilityBranch:
            continue
        yield outcome, probability, post


def states_equal(a: PureState, b: PureState, tol: float = EQUIVALENCE_TOLERANCE) -> bool:
    """Equality up to global phase: |<a|b>| within `tol` of 1."""
    if a.register != b.register:
        raise RegisterError(
            f'Cannot compare states over {list(a.register)} and {list(b.register)}'
        )
    return abs(abs(np.vdot(a.amplitudes, b.amplitudes)) - 1) <= tol


def expand_gate(gate: GateOp, sites: Sequence[str], dims: Sequence[int]) -> np.ndarray:
    """Dense matrix of `gate` over the ordered `sites`, identity elsewhere."""
    register = Register(tuple(zip(sites, dims)))
    _check_gate(register, gate)
    total = register.total_dim
    columns = np.eye(total, dtype=np.complex128).reshape(tuple(dims) + (total,))
    expanded = _apply_matrix(
        columns,
        gate.matrix,
        targets=[register.index(label) for label in gate.sites],
        controls=[register.index(label) for label in gate.controls],
        control_values=gate.control_values
    )
    return expanded.reshape(total, total)


def compose(gates: Sequence[GateOp], sites: Sequence[str], dims: Sequence[int]) -> np.ndarray:
    """Dense unitary of a gate sequence (first gate applied first)."""
    total = prod(dims)
    result = np.eye(total, dtype=np.complex128)
    for gate in gates:
        result = expand_gate(gate, sites, dims) @ result
    return result


def merge_sites(state: PureState, group: Sequence[str], label: str) -> PureState:
    """Relabel a contiguous run of sites as one site of the product dimension.

    Amplitudes are untouched: digits of the group read most-significant-first
    become the digit of the merged site.
    """
    register = state.register
    if not group:
        raise RegisterError(f'Cannot merge an empty group into site {label!r}')
    positions = [register.index(site) for site in group]
    if positions != list(range(positions[0], positions[0] + len(positions))):
        raise RegisterError(
            f'Sites {list(group)} are not contiguous in {list(register.labels)};'
            ' permute the state first'
        )
    start, stop = positions[0], positions[-1] + 1
    merged = (label, prod(register.dims[start:stop]))
    return PureState(
        Register(register.sites[:start] + (merged,) + register.sites[stop:]),
        state.amplitudes
    )


def split_site(state: PureState, label: str, parts: Sequence[tuple[str, int]]) -> PureState:
    """Inverse of `merge_sites`."""
    register = state.register
    i = register.index(label)
    parts = tuple((str(name), int(dim)) for name, dim in parts)
    if prod(dim for _, dim in parts) != register.dim(label):
        raise RegisterError(
            f'Parts {list(parts)} do not factor site {label!r}'
            f' of dimension {register.dim(label)}'
        )
    return PureState(
        Register(register.sites[:i] + parts + register.sites[i + 1:]),
        state.amplitudes
    )

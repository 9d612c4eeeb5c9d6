"""Schmidt decompositions, entanglement entropy, separability verdicts for
rank-1 instruments and coarsening of sites into qudits."""
from __future__ import annotations
from dataclasses import dataclass, replace
from functools import singledispatch
from itertools import product
from math import prod
from typing import Sequence

import numpy as np
from scipy.linalg import svd
from scipy.stats import entropy as shannon_entropy

from .constants import SCHMIDT_CUTOFF, unset
from .exceptions import RegisterError, ScenarioError, UnsupportedMeasurement
from .qsim import (
    GateOp, PureState, Register, compose, expand_gate, merge_sites, split_site
)
from .scenario import Instrument, Merge, Scenario
from .utils import digits, index_of


@dataclass(frozen=True)
class Bipartition:
    left: tuple[str, ...]
    right: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, 'left', tuple(self.left))
        object.__setattr__(self, 'right', tuple(self.right))
        if not self.left or not self.right:
            raise ValueError('Both sides of a bipartition must be nonempty')
        shared = set(self.left) & set(self.right)
        if shared:
            raise ValueError(f'Sites {sorted(shared)} appear on both sides of the bipartition')

    @classmethod
    def parse(cls, text: str) -> 'Bipartition':
        """Parse 'A,C_A|C_B,B'."""
        try:
            left, right = text.split('|')
        except ValueError:
            raise ValueError(f'Expected exactly one "|" in bipartition {text!r}')
        return cls(
            tuple(s.strip() for s in left.split(',') if s.strip()),
            tuple(s.strip() for s in right.split(',') if s.strip())
        )

    @property
    def sites(self) -> tuple[str, ...]:
        return self.left + self.right

    def side(self, site: str) -> int | None:
        if site in self.left:
            return 0
        if site in self.right:
            return 1
        return None

    def __str__(self):
        return f"{','.join(self.left)}|{','.join(self.right)}"


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    coefficients: np.ndarray
    # columns: left basis vectors; rows: right basis vectors
    left_basis: np.ndarray
    right_basis: np.ndarray
    bipartition: Bipartition
    dims: tuple[int, ...]

    @property
    def rank(self) -> int:
        return int(np.sum(self.coefficients > SCHMIDT_CUTOFF))

    def reconstruct(self) -> np.ndarray:
        """Vector over the bipartition's sites, left sites first."""
        matrix = (self.left_basis * self.coefficients) @ self.right_basis
        return matrix.reshape(-1)


def schmidt(
    state: PureState | np.ndarray,
    bipartition: Bipartition,
    register: Register = unset
) -> SchmidtDecomposition:
    """Schmidt decomposition across `bipartition`.

    A bare vector is read over `register`, by default qubits in the
    bipartition's site order.
    """
    if isinstance(state, PureState):
        register = state.register
        vector = state.amplitudes
    else:
        vector = np.asarray(state, dtype=np.complex128).reshape(-1)
        if register is unset:
            register = Register.qubits(*bipartition.sites)
    if sorted(register.labels) != sorted(bipartition.sites):
        raise RegisterError(
            f'Bipartition {bipartition} does not cover the sites {list(register.labels)}'
        )
    if vector.size != register.total_dim:
        raise RegisterError(
            f'Vector of length {vector.size} does not match {list(register)}'
        )
    order = [register.index(site) for site in bipartition.sites]
    tensor = np.transpose(vector.reshape(register.dims), order)
    left_dim = prod(register.dim(site) for site in bipartition.left)
    u, s, vh = svd(tensor.reshape(left_dim, -1), full_matrices=False)
    return SchmidtDecomposition(
        coefficients=s,
        left_basis=u,
        right_basis=vh,
        bipartition=bipartition,
        dims=tuple(register.dim(site) for site in bipartition.sites)
    )


def entropy(state: PureState, bipartition: Bipartition) -> float:
    """Entanglement entropy in bits."""
    coefficients = schmidt(state, bipartition).coefficients
    weights = coefficients ** 2
    return float(shannon_entropy(weights[weights > 0], base=2))


@dataclass(frozen=True)
class OutcomeVerdict:
    label: str
    entangled: bool
    coefficients: tuple[float, ...]


@dataclass(frozen=True)
class SeparabilityVerdict:
    bipartition: Bipartition
    outcomes: tuple[OutcomeVerdict, ...]

    @property
    def entangled(self) -> bool:
        return any(o.entangled for o in self.outcomes)

    @property
    def product(self) -> bool:
        return not self.entangled


def _product_verdict(instrument: Instrument, register: Register, bipartition: Bipartition):
    return SeparabilityVerdict(
        bipartition,
        tuple(OutcomeVerdict(label, False, (1.0,)) for label in instrument.alphabet(register))
    )


def measurement_verdict(
    instrument: Instrument,
    bipartition: Bipartition,
    register: Register = unset
) -> SeparabilityVerdict:
    """Product/entangled verdict per outcome class across `bipartition`.

    Computational projectors are product across any cut, so an instrument
    whose rotation gates each stay on one side is product without further
    work. Otherwise every class must be a single projector vector, whose
    Schmidt rank decides.
    """
    support = instrument.support
    if register is unset:
        register = Register.qubits(*support)
    sides = {site: bipartition.side(site) for site in support}
    uncovered = [site for site, side in sides.items() if side is None]
    if uncovered:
        raise RegisterError(f'Sites {uncovered} are on neither side of {bipartition}')
    if len(set(sides.values())) < 2:
        return _product_verdict(instrument, register, bipartition)
    if all(len({sides[s] for s in gate.support}) == 1 for gate in instrument.rotation):
        return _product_verdict(instrument, register, bipartition)

    dims = [register.dim(site) for site in support]
    unmeasured = prod(register.dim(s) for s in support if s not in instrument.sites)
    members = instrument.class_members(register)
    rank_deficient = [label for label, outcomes in members.items() if len(outcomes) * unmeasured > 1]
    if rank_deficient:
        raise UnsupportedMeasurement(
            f'Outcome classes {rank_deficient} are not rank-1 projectors;'
            ' only rank-1 classes can be judged across an entangling rotation'
        )
    rotation = compose(instrument.rotation, support, dims)
    measured_positions = [support.index(site) for site in instrument.sites]
    left = tuple(s for s in bipartition.left if s in support)
    right = tuple(s for s in bipartition.right if s in support)
    local = Bipartition(left, right)
    sub_register = Register(tuple(zip(support, dims)))
    verdicts = []
    for label, (outcome,) in members.items():
        values = [0] * len(support)
        for position, value in zip(measured_positions, outcome):
            values[position] = value
        vector = rotation.conj().T[:, index_of(values, dims)]
        decomposition = schmidt(vector, local, sub_register)
        coefficients = tuple(float(c) for c in decomposition.coefficients if c > SCHMIDT_CUTOFF)
        verdicts.append(OutcomeVerdict(label, decomposition.rank > 1, coefficients))
    return SeparabilityVerdict(bipartition, tuple(verdicts))


def _merged_gate(gate: GateOp, group: Sequence[str], label: str, register: Register) -> GateOp:
    if not set(gate.support) & set(group):
        return gate
    outside = [site for site in gate.support if site not in group]
    if outside:
        raise ScenarioError(
            f'Gate {gate.name!r} on {list(gate.support)} straddles the merged group'
            f' {list(group)}; only gates inside the group can be coarsened'
        )
    matrix = expand_gate(gate, group, [register.dim(site) for site in group])
    return GateOp(matrix, (label,), name=gate.name)


def _qubits_unless(register: Register, *site_lists) -> Register:
    if register is not unset:
        return register
    return Register.qubits(*dict.fromkeys(s for sites in site_lists for s in sites))


@singledispatch
def coarsen(obj, group: Sequence[str], label: str = unset, register: Register = unset):
    """Merge the sites of `group` into one qudit site named `label`.

    Site dimensions come from `register` (qubits when unset); scenarios
    use their own register.
    """
    raise TypeError(f'Cannot coarsen {type(obj).__name__}')


def _default_label(group: Sequence[str], label) -> str:
    return '+'.join(group) if label is unset else label


@coarsen.register
def _(obj: PureState, group, label=unset, register=unset):
    return merge_sites(obj, tuple(group), _default_label(group, label))


@coarsen.register
def _(obj: GateOp, group, label=unset, register=unset):
    group = tuple(group)
    register = _qubits_unless(register, obj.support, group)
    return _merged_gate(obj, group, _default_label(group, label), register)


@coarsen.register
def _(obj: Instrument, group, label=unset, register=unset):
    group = tuple(group)
    label = _default_label(group, label)
    register = _qubits_unless(register, obj.support, group)
    rotation = tuple(_merged_gate(g, group, label, register) for g in obj.rotation)
    if not set(obj.sites) & set(group):
        return Instrument(obj.sites, obj.classes, rotation, obj.events)
    sites = list(dict.fromkeys(label if site in group else site for site in obj.sites))
    group_dims = [register.dim(site) for site in group]
    merged_dims = [prod(group_dims) if site == label else register.dim(site) for site in sites]

    def original(outcome):
        values = dict(zip(sites, outcome))
        values.update(zip(group, digits(values.pop(label), group_dims)))
        return tuple(values[site] for site in obj.sites)

    classes = {
        outcome: obj.label(original(outcome))
        for outcome in product(*(range(d) for d in merged_dims))
    }
    events = {site: event for site, event in obj.events.items() if site not in group}
    group_events = {obj.events[site] for site in group if site in obj.events}
    if len(group_events) == 1:
        events[label] = group_events.pop()
    return Instrument(tuple(sites), classes, rotation, events)


@coarsen.register
def _(obj: Scenario, group, label=unset, register=unset):
    group = tuple(group)
    label = _default_label(group, label)
    labels = list(obj.register.labels)
    first = min(labels.index(site) for site in group)
    rest = [(site, dim) for site, dim in obj.register.sites if site not in group]
    merged = (label, prod(obj.register.dim(site) for site in group))
    coarse = Register(tuple(rest[:first]) + (merged,) + tuple(rest[first:]))

    custody = {}
    for round_type, holders in obj.custody.items():
        custody[round_type] = {}
        for party, sites in holders.items():
            held = [site for site in sites if site in group]
            if held and len(held) != len(group):
                raise ScenarioError(
                    f'{party!r} holds only {held} of the merged group {list(group)}'
                    f' in round {round_type!r}'
                )
            kept = [site for site in sites if site not in group]
            if held:
                kept.insert(min(sites.index(site) for site in held), label)
            custody[round_type][party] = tuple(kept)
    settings = {
        party: {
            name: coarsen(instrument, group, label, obj.register)
            for name, instrument in instruments.items()
        }
        for party, instruments in obj.settings.items()
    }
    return replace(
        obj,
        name=f'{obj.name}[{label}]',
        register=coarse,
        recipe=obj.recipe + (Merge(group, label),),
        custody=custody,
        settings=settings
    )


def expand(state: PureState, label: str, parts: Sequence[tuple[str, int]]) -> PureState:
    """Undo `coarsen` on a state, restoring the constituent sites."""
    return split_site(state, label, parts)

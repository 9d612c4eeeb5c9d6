"""Measurement scenarios and their observable behavior."""
from __future__ import annotations
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from math import prod
from typing import Iterator, Mapping, Sequence, Union
from warnings import warn

import numpy as np
import pandas as pd

from .bell_ops import BellKind, bell_state
from .constants import ABORT, DISTRIBUTION_TOLERANCE, unset
from .exceptions import ScenarioError, StructureMismatch, ZeroProbabilityBranch
from .qsim import (
    GateOp, OutcomeDistribution, PureState, Register,
    apply_gate, apply_gates, born_distribution, init_state, merge_sites, permute, tensor
)
from .utils import bits_to_str, ensure_unique

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BellPair:
    sites: tuple[str, str]
    kind: BellKind = BellKind.PhiPlus

    def apply(self, state: PureState) -> PureState:
        return tensor(state, bell_state(self.kind, *self.sites))


@dataclass(frozen=True)
class BasisState:
    register: Register
    values: tuple[int, ...]

    def apply(self, state: PureState) -> PureState:
        index = int(np.ravel_multi_index(tuple(self.values), self.register.dims))
        return tensor(state, init_state(self.register, index))


@dataclass(frozen=True, eq=False)
class Amplitudes:
    state: PureState

    def apply(self, state: PureState) -> PureState:
        return tensor(state, self.state)


@dataclass(frozen=True, eq=False)
class GateStep:
    gate: GateOp

    def apply(self, state: PureState) -> PureState:
        return apply_gate(state, self.gate)


@dataclass(frozen=True)
class Merge:
    """Coarsen a group of sites into one qudit site."""
    sites: tuple[str, ...]
    label: str

    def apply(self, state: PureState) -> PureState:
        labels = list(state.labels)
        first = min(labels.index(site) for site in self.sites)
        rest = [label for label in labels if label not in self.sites]
        order = rest[:first] + list(self.sites) + rest[first:]
        return merge_sites(permute(state, order), self.sites, self.label)


RecipeStep = Union[BellPair, BasisState, Amplitudes, GateStep, Merge]


@dataclass(frozen=True, eq=False)
class Instrument:
    """Pre-rotation followed by computational readout of `sites`.

    `classes` maps outcome digit tuples to labels; when unset the label
    is the digit string itself. `events` places readouts of individual
    sites at events other than the owning party's.
    """
    sites: tuple[str, ...]
    classes: Mapping = unset
    rotation: tuple[GateOp, ...] = ()
    events: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'sites', tuple(self.sites))
        object.__setattr__(self, 'rotation', tuple(self.rotation))
        object.__setattr__(self, 'events', dict(self.events))
        ensure_unique(self.sites, what='measured site', error=ScenarioError)

    @property
    def support(self) -> tuple[str, ...]:
        support = dict.fromkeys(site for gate in self.rotation for site in gate.support)
        support.update(dict.fromkeys(self.sites))
        return tuple(support)

    def outcomes(self, register: Register) -> Iterator[tuple[int, ...]]:
        return product(*(range(register.dim(site)) for site in self.sites))

    def label(self, outcome: Sequence[int]) -> str:
        outcome = tuple(int(v) for v in outcome)
        if self.classes is unset:
            return bits_to_str(outcome)
        return self.classes[outcome]

    def alphabet(self, register: Register) -> tuple[str, ...]:
        if hasattr(self.classes, 'alphabet'):
            return tuple(self.classes.alphabet)
        return tuple(dict.fromkeys(self.label(o) for o in self.outcomes(register)))

    def class_members(self, register: Register) -> dict[str, list[tuple[int, ...]]]:
        members = {}
        for outcome in self.outcomes(register):
            members.setdefault(self.label(outcome), []).append(outcome)
        return members

    def with_prefix(self, gates: Sequence[GateOp]) -> 'Instrument':
        return Instrument(
            self.sites, self.classes, tuple(gates) + self.rotation, self.events
        )

    def validate(self, register: Register):
        unknown = [site for site in self.support if site not in register]
        if unknown:
            raise ScenarioError(f'Instrument touches unknown sites {unknown}')
        if self.classes is unset:
            return
        expected = prod(register.dim(site) for site in self.sites)
        if len(self.classes) != expected:
            raise ScenarioError(
                f'Outcome classes cover {len(self.classes)} outcomes,'
                f' expected {expected} for sites {list(self.sites)}'
            )
        if isinstance(self.classes, dict):
            missing = [o for o in self.outcomes(register) if o not in self.classes]
            if missing:
                raise ScenarioError(f'Outcomes {missing} are not assigned to a class')


@dataclass(frozen=True)
class DisplacementRecord:
    party: str
    setting: str
    levels: int
    alice_sites: tuple[str, ...]
    bob_sites: tuple[str, ...]


@dataclass(eq=False)
class Scenario:
    name: str
    register: Register
    recipe: tuple[RecipeStep, ...]
    # round type -> active parties, in outcome order
    rounds: dict[str, tuple[str, ...]]
    # round type -> party -> sites it may touch
    custody: dict[str, dict[str, tuple[str, ...]]]
    settings: dict[str, dict[str, Instrument]]
    alignment: dict[str, dict[str, str]] = field(default_factory=dict)
    displacements: tuple[DisplacementRecord, ...] = ()

    @property
    def parties(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(p for active in self.rounds.values() for p in active))

    def instrument(self, party: str, setting: str) -> Instrument:
        try:
            return self.settings[party][setting]
        except KeyError:
            raise ScenarioError(f'Party {party!r} has no setting {setting!r}')

    def initial_state(self) -> PureState:
        state = PureState.empty()
        for step in self.recipe:
            state = step.apply(state)
        if sorted(state.register.sites) != sorted(self.register.sites):
            raise ScenarioError(
                f'Recipe of {self.name!r} prepares {list(state.register)}'
                f' instead of {list(self.register)}'
            )
        return permute(state, self.register.labels)

    def combinations(self) -> Iterator[tuple[str, tuple[str, ...]]]:
        for round_type, parties in self.rounds.items():
            for names in product(*(list(self.settings[party]) for party in parties)):
                yield round_type, tuple(names)

    def alphabet(self, party: str) -> tuple[str, ...]:
        labels = {}
        for instrument in self.settings[party].values():
            for label in instrument.alphabet(self.register):
                labels[self.aligned(party, label)] = None
        return tuple(labels)

    def aligned(self, party: str, label: str) -> str:
        return self.alignment.get(party, {}).get(label, label)

    def validate(self):
        for round_type, parties in self.rounds.items():
            missing = [p for p in parties if p not in self.settings or not self.settings[p]]
            if missing:
                raise ScenarioError(f'Parties {missing} of round {round_type!r} have no settings')
            held = [
                site
                for party in parties
                for site in self.custody.get(round_type, {}).get(party, ())
            ]
            ensure_unique(held, what=f'site in custody during {round_type!r}', error=ScenarioError)
        for party, instruments in self.settings.items():
            for instrument in instruments.values():
                instrument.validate(self.register)
        for party, mapping in self.alignment.items():
            raw = {
                label
                for instrument in self.settings.get(party, {}).values()
                for label in instrument.alphabet(self.register)
            }
            for label in mapping:
                if label not in raw:
                    warn(f'Unused label: {label!r} in the alignment of {party!r}')


class BehaviorTable(dict):
    """Map from (round type, setting names) to the outcome distribution."""

    def __init__(self, data=(), parties: Mapping[str, Sequence[str]] = None):
        super().__init__(data)
        self.parties = {r: tuple(p) for r, p in (parties or {}).items()}

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                'round': round_type,
                'settings': ','.join(names),
                'outcome': ','.join(outcome),
                'probability': probability
            }
            for (round_type, names), distribution in self.items()
            for outcome, probability in distribution.items()
        ]
        return pd.DataFrame(rows, columns=['round', 'settings', 'outcome', 'probability'])

    def _repr_html_(self):
        return self.to_frame()._repr_html_()


def _evaluate(scenario: Scenario, state: PureState, round_type: str, names: tuple[str, ...]):
    parties = scenario.rounds[round_type]
    instruments = [scenario.instrument(p, n) for p, n in zip(parties, names)]
    custody = scenario.custody.get(round_type, {})
    for party, name, instrument in zip(parties, names, instruments):
        outside = [s for s in instrument.support if s not in custody.get(party, ())]
        if outside:
            raise ScenarioError(
                f'Setting {name!r} of {party!r} touches {outside}'
                f' outside its custody in round {round_type!r}'
            )
    measured = [site for instrument in instruments for site in instrument.sites]
    ensure_unique(measured, what='measured site', error=ScenarioError)
    rotated = apply_gates(state, [g for instrument in instruments for g in instrument.rotation])
    raw = born_distribution(rotated, measured)
    bounds = np.cumsum([0] + [len(instrument.sites) for instrument in instruments])

    def classify(outcome):
        return tuple(
            scenario.aligned(party, instrument.label(outcome[start:stop]))
            for party, instrument, start, stop in zip(parties, instruments, bounds, bounds[1:])
        )

    logger.debug('%s: evaluated %s %s', scenario.name, round_type, names)
    return raw.map(classify)


def behavior(scenario: Scenario, workers: int = 1) -> BehaviorTable:
    scenario.validate()
    state = scenario.initial_state()
    combinations = list(scenario.combinations())

    def evaluate(combination):
        return combination, _evaluate(scenario, state, *combination)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, combinations))
    else:
        results = [evaluate(c) for c in combinations]
    logger.debug('%s: %d setting combinations', scenario.name, len(results))
    return BehaviorTable(results, parties=scenario.rounds)


@dataclass(frozen=True)
class Comparison:
    max_tv: float
    tolerance: float
    distances: dict
    worst: tuple

    @property
    def equivalent(self) -> bool:
        return self.max_tv <= self.tolerance


def relabel(table: BehaviorTable, mapping: Mapping[str, str]) -> BehaviorTable:
    """Rename outcome labels and setting names."""
    used = set()

    def rename(label):
        if label in mapping:
            used.add(label)
        return mapping.get(label, label)

    result = BehaviorTable(parties=table.parties)
    for (round_type, names), distribution in table.items():
        result[(round_type, tuple(rename(n) for n in names))] = distribution.map(
            lambda outcome: tuple(rename(label) for label in outcome)
        )
    for label in set(mapping) - used:
        warn(f'Unused label: {label!r}')
    return result


def compare_behaviors(
    first: BehaviorTable,
    second: BehaviorTable,
    tol: float = DISTRIBUTION_TOLERANCE,
    alignment: Mapping[str, str] = None
) -> Comparison:
    """Maximum total-variation distance over setting combinations.

    `alignment` renames labels of the second table before comparing.
    """
    if alignment:
        second = relabel(second, alignment)
    if set(first) != set(second) or first.parties != second.parties:
        only_first = sorted(set(first) - set(second))
        only_second = sorted(set(second) - set(first))
        raise StructureMismatch(
            'Behavior tables differ in structure:'
            f' only in first {only_first}, only in second {only_second},'
            f' parties {first.parties} vs {second.parties}'
        )
    index = ['round', 'settings', 'outcome']
    joined = pd.concat(
        [
            first.to_frame().set_index(index)['probability'],
            second.to_frame().set_index(index)['probability']
        ],
        axis=1,
        keys=['first', 'second']
    ).fillna(0.0)
    distances = (joined['first'] - joined['second']).abs().groupby(level=['round', 'settings']).sum() / 2
    if distances.empty:
        return Comparison(0.0, tol, {}, ())
    return Comparison(
        max_tv=float(distances.max()),
        tolerance=tol,
        distances={key: float(value) for key, value in distances.items()},
        worst=tuple(distances.idxmax())
    )


def condition_on_success(table: BehaviorTable) -> BehaviorTable:
    """Drop outcomes in which any party reports abort, renormalising."""
    result = BehaviorTable(parties=table.parties)
    for key, distribution in table.items():
        kept = {o: p for o, p in distribution.items() if ABORT not in o}
        total = sum(kept.values())
        if total <= 0:
            raise ZeroProbabilityBranch(f'No successful outcome for {key}')
        result[key] = OutcomeDistribution({o: p / total for o, p in kept.items()})
    return result


def success_probability(table: BehaviorTable, party: str) -> dict:
    result = {}
    for (round_type, names), distribution in table.items():
        parties = table.parties[round_type]
        if party not in parties:
            continue
        i = parties.index(party)
        result[(round_type, names)] = 1 - sum(
            p for outcome, p in distribution.items() if outcome[i] == ABORT
        )
    return result


Observable = Union[str, tuple[str, int]]


def _position(parties: Sequence[str], observable: Observable) -> tuple[int, int]:
    party, char = (observable, None) if isinstance(observable, str) else observable
    if party not in parties:
        raise ScenarioError(f'Party {party!r} is not active; active parties: {list(parties)}')
    return parties.index(party), char


def expectation(
    table: BehaviorTable,
    round_type: str,
    settings: Sequence[str],
    observables: Sequence[Observable],
    given: Mapping[str, str] = None
) -> float:
    """Conditional expectation of the product of ±1 values (-1)^bit.

    An observable is a party or a (party, character) pair selecting one
    bit of a multi-bit label.
    """
    parties = table.parties[round_type]
    distribution = table[(round_type, tuple(settings))]
    positions = [_position(parties, o) for o in observables]
    conditions = [(parties.index(p), label) for p, label in (given or {}).items()]
    total = weight = 0.0
    for outcome, probability in distribution.items():
        if any(outcome[i] != label for i, label in conditions):
            continue
        weight += probability
        value = 1
        for i, char in positions:
            label = outcome[i] if char is None else outcome[i][char]
            if label not in ('0', '1'):
                raise ValueError(f'Outcome label {label!r} is not a bit')
            value *= -1 if label == '1' else 1
        total += probability * value
    if weight <= 0:
        raise ZeroProbabilityBranch(f'Condition {dict(given or {})} never occurs')
    return total / weight


def correlators(
    table: BehaviorTable,
    round_type: str,
    first: Observable,
    second: Observable,
    fixed: Mapping[str, str] = None,
    given: Mapping[str, str] = None
) -> dict[tuple[int, int], float]:
    """E(x, y) over the two settings of each observable's party."""
    parties = table.parties[round_type]
    (i, _), (j, _) = _position(parties, first), _position(parties, second)
    fixed = fixed or {}
    keys = [names for r, names in table if r == round_type]
    first_names = list(dict.fromkeys(names[i] for names in keys))
    second_names = list(dict.fromkeys(names[j] for names in keys))
    result = {}
    for names in keys:
        if any(names[parties.index(p)] != name for p, name in fixed.items()):
            continue
        x, y = first_names.index(names[i]), second_names.index(names[j])
        if (x, y) not in result:
            result[(x, y)] = expectation(table, round_type, names, [first, second], given)
    return result


def swap_lookup(p: BellKind, q: BellKind) -> BellKind:
    """A–B Bell state left by Bell outcomes p and q on the two middle pairs."""
    (z1, x1), (z2, x2) = p.bits, q.bits
    return BellKind.from_bits(z1 ^ z2, x1 ^ x2)


def swap_classes() -> dict[tuple[int, ...], str]:
    """Readout of two disambiguated BSMs decoded into the swapped Bell state."""
    return {
        (z1, x1, z2, x2): swap_lookup(BellKind.from_bits(z1, x1), BellKind.from_bits(z2, x2)).value
        for z1, x1, z2, x2 in product((0, 1), repeat=4)
    }


def bsm_classes() -> dict[tuple[int, int], str]:
    return {(z, x): BellKind.from_bits(z, x).value for z, x in product((0, 1), repeat=2)}

"""Localising an arbitrary two-qubit projective measurement.

Alice holds the first qubit of the measured state and Bob the second. Bob
teleports their qubit to Alice without correction, Alice rotates both qubits
with the diagonalising unitary M and teleports them back, again without
correction. When Bob's teleportation happened to need no correction, Bob's
readout of the returned qubits, corrected by Alice's flip bits, is the
measurement outcome. Otherwise Bob sends the qubits through a port keyed by
Bob's readouts, where Alice's port-specific correction undoes the known error,
and the exchange repeats one level deeper.

Every classically controlled step is deferred: Alice's corrections are
gates controlled by Alice's own readout wires, Bob's port choice is a gate
controlled by Bob's.
"""
from __future__ import annotations
import logging
from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Iterator, Mapping, Sequence

import numpy as np
from scipy.stats import unitary_group

from .bell_ops import BellKind, bell_state, bell_vector, bsm_unitary
from .constants import ABORT, MAX_BRANCHING_LEVELS, UNITARY_TOLERANCE, unset
from .exceptions import CapacityError
from .gates import X, Z, pauli, pauli_pair
from .qsim import (
    GateOp, OutcomeDistribution, PureState, Register,
    apply_gate, apply_gates, born_distribution, branches, check_capacity,
    permute, states_equal, tensor
)
from .utils import bits_to_str, digits

logger = logging.getLogger(__name__)

FAILURES = {
    2: tuple(p for p in product((0, 1), repeat=2) if any(p)),
    4: tuple(p for p in product((0, 1), repeat=4) if any(p)),
}


@dataclass(frozen=True, eq=False)
class TargetMeasurement:
    """Orthonormal eigenvectors (columns) with the outcome class of each.

    Columns are kept grouped by class, classes in order of first appearance.
    """
    vectors: np.ndarray = field(repr=False)
    labels: tuple[str, ...]

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.complex128)
        labels = tuple(str(label) for label in self.labels)
        if vectors.shape != (4, 4) or len(labels) != 4:
            raise ValueError(
                f'Expected four eigenvectors of length 4 with four labels,'
                f' got {vectors.shape} and {len(labels)} labels'
            )
        deviation = np.abs(vectors.conj().T @ vectors - np.eye(4)).max()
        if deviation > UNITARY_TOLERANCE:
            raise ValueError(
                f'Projectors are not orthogonal and complete (deviation {deviation:.2e})'
            )
        classes = list(dict.fromkeys(labels))
        order = sorted(range(4), key=lambda k: classes.index(labels[k]))
        vectors = vectors[:, order]
        vectors.setflags(write=False)
        object.__setattr__(self, 'vectors', vectors)
        object.__setattr__(self, 'labels', tuple(labels[k] for k in order))

    @classmethod
    def computational(cls) -> 'TargetMeasurement':
        return cls(np.eye(4), tuple(bits_to_str(digits(k, (2, 2))) for k in range(4)))

    @classmethod
    def bsm(cls) -> 'TargetMeasurement':
        kinds = [BellKind.from_bits(*digits(k, (2, 2))) for k in range(4)]
        return cls(np.column_stack([bell_vector(kind) for kind in kinds]), [k.value for k in kinds])

    @classmethod
    def random(cls, rng: np.random.Generator, labels: Sequence[str] = unset) -> 'TargetMeasurement':
        labels = tuple(f'k{k}' for k in range(4)) if labels is unset else labels
        return cls(unitary_group.rvs(4, random_state=rng), labels)

    @classmethod
    def from_rotation(cls, rotation: np.ndarray, labels: Sequence[str]) -> 'TargetMeasurement':
        """Readout k after `rotation` selects the eigenvector rotation†|k⟩."""
        return cls(np.asarray(rotation).conj().T, labels)

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(self.labels))

    def born(self, phi: PureState | np.ndarray) -> OutcomeDistribution:
        """Outcome-class distribution of measuring `phi` directly."""
        amplitudes = phi.amplitudes if isinstance(phi, PureState) else np.asarray(phi)
        weights = np.abs(self.vectors.conj().T @ amplitudes) ** 2
        result = dict.fromkeys([(label,) for label in self.classes], 0.0)
        for label, weight in zip(self.labels, weights):
            result[(label,)] += float(weight)
        return OutcomeDistribution(result)


def diagonalizer(target: TargetMeasurement, sites: Sequence[str] = ('q0', 'q1')) -> GateOp:
    """M with M·vectors[:, k] = |k⟩."""
    return GateOp(target.vectors.conj().T, tuple(sites), name='M')


def failure_pauli(pattern: Sequence[int]) -> np.ndarray:
    """Error left by an inbound teleport with readouts `pattern`.

    The root teleports only Bob's qubit, so a two-bit pattern acts on the
    second qubit.
    """
    if len(pattern) == 2:
        return np.kron(np.eye(2), pauli(*pattern))
    return pauli_pair([tuple(pattern[:2]), tuple(pattern[2:])])


def child_frame(m: np.ndarray, frame: np.ndarray, pattern: Sequence[int]) -> np.ndarray:
    return m @ frame.conj().T @ failure_pauli(pattern) @ frame


@dataclass(frozen=True)
class Pair:
    label: str
    alice: str
    bob: str
    # 'in': Bob to Alice, 'ret': Alice to Bob
    role: str


@dataclass(eq=False)
class Port:
    path: tuple[tuple[int, ...], ...]
    frame: np.ndarray = field(repr=False)
    bob_sources: tuple[str, ...]
    inbound: tuple[Pair, ...]
    returns: tuple[Pair, ...]
    parent: 'Port' = None
    children: dict = field(default_factory=dict, repr=False)

    @property
    def level(self) -> int:
        return len(self.path) + 1

    @property
    def name(self) -> str:
        return 'p' + ''.join(f'.{bits_to_str(pattern)}' for pattern in self.path)

    @property
    def readout_wires(self) -> tuple[str, ...]:
        """(z, x) wires of each inbound teleport."""
        return tuple(w for source, pair in zip(self.bob_sources, self.inbound) for w in (source, pair.bob))

    def ancestors(self) -> list['Port']:
        chain, port = [], self.parent
        while port is not None:
            chain.append(port)
            port = port.parent
        return chain[::-1]


@dataclass(eq=False)
class LocalizationCircuit:
    target: TargetMeasurement
    levels: int
    alice_site: str
    bob_site: str
    root: Port = field(repr=False)
    pairs: tuple[Pair, ...] = field(repr=False)
    # V
    alice_gates: tuple[GateOp, ...] = field(repr=False)
    # W
    bob_gates: tuple[GateOp, ...] = field(repr=False)

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def wires(self) -> tuple[str, ...]:
        return (self.alice_site, self.bob_site) + tuple(
            w for pair in self.pairs for w in (pair.alice, pair.bob)
        )

    @property
    def alice_wires(self) -> tuple[str, ...]:
        return (self.alice_site,) + tuple(pair.alice for pair in self.pairs)

    @property
    def bob_wires(self) -> tuple[str, ...]:
        return (self.bob_site,) + tuple(pair.bob for pair in self.pairs)

    def ports(self) -> Iterator[Port]:
        queue = deque([self.root])
        while queue:
            port = queue.popleft()
            yield port
            queue.extend(port.children.values())

    def alice_sources(self, port: Port) -> tuple[str, ...]:
        if port.parent is None:
            return (self.alice_site, port.inbound[0].alice)
        return tuple(pair.alice for pair in port.inbound)

    def decoder(self) -> 'DecoderClasses':
        return DecoderClasses(self)


def build(
    target: TargetMeasurement,
    levels: int,
    alice_site: str = 'phiA',
    bob_site: str = 'phiB',
    prefix: str = ''
) -> LocalizationCircuit:
    if levels < 1:
        raise ValueError(f'At least one level is needed, got {levels}')
    m = target.vectors.conj().T
    pairs = []

    def allocate(port_name: str, role: str, count: int) -> tuple[Pair, ...]:
        allocated = []
        for j in range(count):
            label = f'{prefix}{port_name}/{role}{j}'
            allocated.append(Pair(label, f'{label}.a', f'{label}.b', role))
        pairs.extend(allocated)
        return tuple(allocated)

    root = Port(
        path=(),
        frame=np.eye(4, dtype=np.complex128),
        bob_sources=(bob_site,),
        inbound=allocate('p', 'in', 1),
        returns=allocate('p', 'ret', 2)
    )
    queue = deque([root])
    while queue:
        port = queue.popleft()
        if port.level == levels:
            continue
        for pattern in FAILURES[len(port.readout_wires)]:
            path = port.path + (pattern,)
            name = 'p' + ''.join(f'.{bits_to_str(p)}' for p in path)
            child = Port(
                path=path,
                frame=child_frame(m, port.frame, pattern),
                bob_sources=tuple(pair.bob for pair in port.returns),
                inbound=allocate(name, 'in', 2),
                returns=allocate(name, 'ret', 2),
                parent=port
            )
            port.children[pattern] = child
            queue.append(child)

    circuit = LocalizationCircuit(
        target=target,
        levels=levels,
        alice_site=alice_site,
        bob_site=bob_site,
        root=root,
        pairs=tuple(pairs),
        alice_gates=(),
        bob_gates=()
    )
    alice_gates, bob_gates = [], []
    for port in circuit.ports():
        sources = circuit.alice_sources(port)
        if port.parent is not None:
            parent_sources = circuit.alice_sources(port.parent)
            for pair, parent_return, parent_source in zip(port.inbound, port.parent.returns, parent_sources):
                alice_gates.append(GateOp(X, (pair.alice,), controls=(parent_return.alice,), name='X'))
                alice_gates.append(GateOp(Z, (pair.alice,), controls=(parent_source,), name='Z'))
        alice_gates.append(GateOp(m @ port.frame.conj().T, sources, name=f'M·{port.name}†'))
        for source, pair in zip(sources, port.returns):
            alice_gates.append(bsm_unitary((source, pair.alice)))

        controls = [w for ancestor in port.ancestors() for w in ancestor.readout_wires]
        values = [bit for pattern in port.path for bit in pattern]
        for source, pair in zip(port.bob_sources, port.inbound):
            bob_gates.append(bsm_unitary((source, pair.bob)).controlled_by(controls, values))
    circuit.alice_gates = tuple(alice_gates)
    circuit.bob_gates = tuple(bob_gates)
    logger.debug(
        'Built %d-level localization: %d pairs, %d Alice gates, %d Bob gates',
        levels, len(pairs), len(alice_gates), len(bob_gates)
    )
    return circuit


@dataclass(frozen=True, eq=False)
class ProtocolResult:
    success: bool
    level: int | None = None
    outcome: str | None = None
    index: int | None = None
    # (z, x) of Alice's return teleports at the successful port
    frame: tuple[tuple[int, int], ...] = ()
    residual: PureState | None = None
    probability: float = 1.0

    @property
    def key(self) -> tuple:
        return (self.level, self.outcome) if self.success else (ABORT, ABORT)


def _outcome_values(outcome, circuit: LocalizationCircuit) -> dict[str, int]:
    wires = circuit.wires
    if isinstance(outcome, Mapping):
        values = {wire: outcome[wire] for wire in wires if wire in outcome}
    else:
        if isinstance(outcome, str):
            outcome = outcome.strip()
        if len(outcome) != len(wires):
            raise ValueError(f'Outcome covers {len(outcome)} wires, the circuit has {len(wires)}')
        values = dict(zip(wires, outcome))
    missing = [wire for wire in wires if wire not in values]
    if missing:
        raise ValueError(f'Outcome is missing wires {missing[:5]}')
    try:
        values = {wire: int(v) for wire, v in values.items()}
    except (TypeError, ValueError):
        raise ValueError('Outcome values must be bits')
    if set(values.values()) - {0, 1}:
        raise ValueError('Outcome values must be bits')
    return values


def decode(outcome, circuit: LocalizationCircuit) -> ProtocolResult:
    values = _outcome_values(outcome, circuit)
    port = circuit.root
    while port is not None:
        pattern = tuple(values[w] for w in port.readout_wires)
        if not any(pattern):
            bits = [values[pair.bob] ^ values[pair.alice] for pair in port.returns]
            index = 2 * bits[0] + bits[1]
            frame = tuple(
                (values[source], values[pair.alice])
                for source, pair in zip(circuit.alice_sources(port), port.returns)
            )
            return ProtocolResult(
                True, port.level, circuit.target.labels[index], index, frame
            )
        port = port.children.get(pattern)
    return ProtocolResult(False)


def covert_decode(outcome, circuit: LocalizationCircuit, rng: np.random.Generator = None) -> ProtocolResult:
    """Like `decode`, but a failure reports a uniformly drawn eigenvector's class."""
    result = decode(outcome, circuit)
    if result.success:
        return result
    rng = np.random.default_rng() if rng is None else rng
    index = int(rng.integers(4))
    return replace(result, outcome=circuit.target.labels[index], index=index)


def covert_distribution(distribution: Mapping, target: TargetMeasurement) -> OutcomeDistribution:
    """Class distribution when aborts are replaced by uniform eigenvector draws."""
    result = dict.fromkeys([(label,) for label in target.classes], 0.0)
    for (level, label), probability in distribution.items():
        if level == ABORT:
            for each in target.labels:
                result[(each,)] += probability / 4
        else:
            result[(label,)] += probability
    return OutcomeDistribution(result)


class DecoderClasses(Mapping):
    """Outcome classes of a readout of every circuit wire, decoded lazily."""

    def __init__(self, circuit: LocalizationCircuit):
        self.circuit = circuit

    @property
    def alphabet(self) -> tuple[str, ...]:
        return self.circuit.target.classes + (ABORT,)

    def __getitem__(self, outcome) -> str:
        result = decode(tuple(outcome), self.circuit)
        return result.outcome if result.success else ABORT

    def __len__(self) -> int:
        return 2 ** len(self.circuit.wires)

    def __iter__(self):
        return product((0, 1), repeat=len(self.circuit.wires))


@lru_cache(maxsize=None)
def readout_patterns(width: int) -> dict[tuple[int, ...], Fraction]:
    """Exact probability of each (z, x) readout pattern of a port.

    Simulates `width // 2` teleports of qubits that are maximally entangled
    with a reference, which covers every input state at once.
    """
    if width not in FAILURES:
        raise ValueError(f'Ports read out 2 or 4 wires, got {width}')
    sources = [f'in{j}' for j in range(width // 2)]
    state = bell_state(BellKind.PhiPlus, 'ref0', sources[0])
    for j, source in enumerate(sources[1:], start=1):
        state = tensor(state, bell_state(BellKind.PhiPlus, f'ref{j}', source))
    state, readouts, _ = _teleport_pair(state, sources, 'port')
    joint = born_distribution(state, readouts)
    return {
        outcome: Fraction(probability).limit_denominator(2 ** width)
        for outcome, probability in joint.items()
    }


def _pattern_success(width: int, child_success) -> Fraction:
    total = Fraction(0)
    for pattern, probability in readout_patterns(width).items():
        if not any(pattern):
            total += probability
        else:
            total += probability * child_success(pattern)
    return total


@lru_cache(maxsize=None)
def _port_success(level: int, levels: int) -> Fraction:
    width = 2 if level == 1 else 4
    if level == levels:
        return _pattern_success(width, lambda pattern: Fraction(0))
    return _pattern_success(width, lambda pattern: _port_success(level + 1, levels))


def success_probability(levels: int) -> Fraction:
    """Probability that decoding succeeds, for any target and input state.

    The readout patterns of each port are enumerated by simulation; ports
    at the same level are identical and are counted once.
    """
    if levels < 1:
        raise ValueError(f'At least one level is needed, got {levels}')
    return _port_success(1, levels)


def circuit_success_probability(circuit: LocalizationCircuit) -> Fraction:
    """Success probability by walking the ports of a built circuit."""

    def visit(port: Port) -> Fraction:
        return _pattern_success(
            len(port.readout_wires),
            lambda pattern: visit(port.children[pattern]) if pattern in port.children else Fraction(0)
        )

    return visit(circuit.root)


def closed_form_success(levels: int) -> Fraction:
    return 1 - Fraction(3, 4) * Fraction(15, 16) ** (levels - 1)


def min_levels(epsilon: float) -> int:
    if not 0 < epsilon < 1:
        raise ValueError(f'epsilon must lie in (0, 1), got {epsilon!r}')
    goal = 1 - Fraction(epsilon)
    levels = 1
    while success_probability(levels) < goal:
        levels += 1
    return levels


@dataclass(frozen=True, eq=False)
class LocalizationRun:
    # (level | abort, class | abort) -> probability
    distribution: OutcomeDistribution
    joint: OutcomeDistribution | None = None
    results: tuple[ProtocolResult, ...] = ()

    @property
    def success_probability(self) -> float:
        return sum(p for (level, _), p in self.distribution.items() if level != ABORT)

    def level_probability(self, level: int) -> float:
        return sum(p for (lvl, _), p in self.distribution.items() if lvl == level)

    def conditional(self, level: int = unset) -> OutcomeDistribution:
        """Class distribution given success (at `level`, if set)."""
        kept = {}
        for (lvl, label), p in self.distribution.items():
            if lvl == ABORT or (level is not unset and lvl != level):
                continue
            kept[(label,)] = kept.get((label,), 0.0) + p
        total = sum(kept.values())
        return OutcomeDistribution({k: p / total for k, p in kept.items()})

    def levels(self) -> list[int]:
        return sorted({lvl for lvl, _ in self.distribution if lvl != ABORT})


def _as_phi(phi, labels: Sequence[str]) -> PureState:
    amplitudes = phi.amplitudes if isinstance(phi, PureState) else np.asarray(phi)
    return PureState(Register.qubits(*labels), amplitudes)


def run_deferred(circuit: LocalizationCircuit, phi, cap: int = unset) -> LocalizationRun:
    """Exact joint readout distribution of V⊗W on phi and the Bell pairs."""
    check_capacity(Register.qubits(*circuit.wires), cap)
    state = _as_phi(phi, (circuit.alice_site, circuit.bob_site))
    for pair in circuit.pairs:
        state = tensor(state, bell_state(BellKind.PhiPlus, pair.alice, pair.bob))
    state = apply_gates(state, circuit.alice_gates + circuit.bob_gates)
    joint = born_distribution(state, circuit.wires)
    decoded = {}
    for outcome, probability in joint.items():
        key = decode(outcome, circuit).key
        decoded[key] = decoded.get(key, 0.0) + probability
    return LocalizationRun(OutcomeDistribution(decoded), joint)


def _readouts(state: PureState, sites: Sequence[str]) -> Iterator[tuple[tuple[int, ...], float, PureState]]:
    """Nonzero branches of reading out `sites` one after another."""
    if not sites:
        yield (), 1.0, state
        return
    for value, probability, post in branches(state, sites[0]):
        for rest, rest_probability, final in _readouts(post, sites[1:]):
            yield (value,) + rest, probability * rest_probability, final


def _relabel(state: PureState, order: Sequence[str], labels: Sequence[str]) -> PureState:
    return PureState(Register.qubits(*labels), permute(state, order).amplitudes)


def _teleport_pair(state: PureState, sources: Sequence[str], tag: str) -> tuple[PureState, list[str], list[str]]:
    """Teleport the two `sources` through fresh pairs; returns readout and receiver wires."""
    readouts, receivers = [], []
    for j, source in enumerate(sources):
        sender, receiver = f'{tag}{j}.s', f'{tag}{j}.r'
        state = tensor(state, bell_state(BellKind.PhiPlus, sender, receiver))
        state = apply_gate(state, bsm_unitary((source, sender)))
        readouts.extend([source, sender])
        receivers.append(receiver)
    return state, readouts, receivers


def run_branching(
    target: TargetMeasurement,
    levels: int,
    phi,
    collect: bool = False
) -> LocalizationRun:
    """Exact outcome distribution by walking measurement branches.

    Bell pairs are created only on the path actually taken and measured
    wires are dropped at once. Alice's return-teleport readouts are undone
    before Bob's next teleport is interpreted, so branches that differ
    only in them carry equal states and are merged.
    """
    if levels < 1:
        raise ValueError(f'At least one level is needed, got {levels}')
    if levels > MAX_BRANCHING_LEVELS:
        raise CapacityError(
            f'Branching enumeration is limited to {MAX_BRANCHING_LEVELS} levels, got {levels}'
        )
    m = target.vectors.conj().T
    distribution = {}
    results = []
    merged = 0

    def record(key, probability):
        distribution[key] = distribution.get(key, 0.0) + probability

    def visit(state: PureState, frame: np.ndarray, level: int, pattern: tuple, weight: float):
        nonlocal merged
        # Alice holds pattern-error · frame · phi on (a0, a1)
        state = apply_gate(state, GateOp(m @ frame.conj().T, ('a0', 'a1'), name='M'))
        state, alice_readouts, bob_wires = _teleport_pair(state, ('a0', 'a1'), 'ret')
        children = {}
        for bits, probability, bob in _readouts(state, alice_readouts):
            alice_frame = ((bits[0], bits[1]), (bits[2], bits[3]))
            reached = weight * probability
            if not any(pattern):
                for finals, final_probability, _ in _readouts(bob, bob_wires):
                    k1, k2 = finals[0] ^ bits[1], finals[1] ^ bits[3]
                    label = target.labels[2 * k1 + k2]
                    record((level, label), reached * final_probability)
                    if collect:
                        results.append(ProtocolResult(
                            True, level, label, 2 * k1 + k2, alice_frame,
                            residual=_collapse(bob, bob_wires, finals),
                            probability=reached * final_probability
                        ))
                continue
            if level == levels:
                record((ABORT, ABORT), reached)
                if collect:
                    results.append(ProtocolResult(False, probability=reached))
                continue
            sent, bob_readouts, receivers = _teleport_pair(bob, bob_wires, 'in')
            for child_pattern, child_probability, alice in _readouts(sent, bob_readouts):
                for receiver, (z, x) in zip(receivers, alice_frame):
                    alice = apply_gates(alice, [
                        GateOp(np.linalg.matrix_power(X, x), (receiver,), name='X'),
                        GateOp(np.linalg.matrix_power(Z, z), (receiver,), name='Z')
                    ])
                alice = _relabel(alice, receivers, ('a0', 'a1'))
                entries = children.setdefault(child_pattern, [])
                for entry in entries:
                    if states_equal(entry[0], alice):
                        entry[1] += reached * child_probability
                        merged += 1
                        break
                else:
                    entries.append([alice, reached * child_probability])
        next_frame = child_frame(m, frame, pattern) if any(pattern) else None
        for child_pattern, entries in children.items():
            for alice, child_weight in entries:
                visit(alice, next_frame, level + 1, child_pattern, child_weight)

    phi = _as_phi(phi, ('phiA', 'phiB'))
    state, readouts, receivers = _teleport_single(phi)
    for pattern, probability, alice in _readouts(state, readouts):
        alice = _relabel(alice, ('phiA', receivers[0]), ('a0', 'a1'))
        visit(alice, np.eye(4, dtype=np.complex128), 1, pattern, probability)
    logger.debug('Branching run at %d levels merged %d branches', levels, merged)
    return LocalizationRun(OutcomeDistribution(distribution), results=tuple(results))


def _teleport_single(phi: PureState) -> tuple[PureState, list[str], list[str]]:
    state = tensor(phi, bell_state(BellKind.PhiPlus, 'in0.r', 'in0.s'))
    state = apply_gate(state, bsm_unitary(('phiB', 'in0.s')))
    return state, ['phiB', 'in0.s'], ['in0.r']


def _collapse(state: PureState, wires: Sequence[str], values: Sequence[int]) -> PureState:
    """Post-readout state of `wires`, kept on the register."""
    ordered = permute(state, list(wires))
    amplitudes = np.zeros_like(ordered.amplitudes)
    index = int(np.ravel_multi_index(tuple(values), ordered.register.dims))
    amplitudes[index] = ordered.amplitudes[index]
    return PureState(ordered.register, amplitudes / abs(amplitudes[index]))

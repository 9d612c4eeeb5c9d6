"""Rewrite a scenario so that a two-qubit measurement becomes local readouts.

The measurement's disambiguating rotation is absorbed into the prepared
state through the localization circuit V⊗W; the measuring party then only
reads out wires and decodes classically.
"""
from __future__ import annotations
import logging
from dataclasses import replace

from .constants import unset
from .entanglement import Bipartition
from .exceptions import ScenarioError, UnsupportedMeasurement
from .localization import LocalizationCircuit, TargetMeasurement, build
from .qsim import Register, compose, daggers
from .scenario import BellPair, DisplacementRecord, GateStep, Instrument, Scenario
from .utils import digits

logger = logging.getLogger(__name__)


def split_rotation(instrument: Instrument) -> tuple[tuple, tuple]:
    """(prefix, core): core is the longest tail of gates inside the measured sites."""
    measured = set(instrument.sites)
    rotation = instrument.rotation
    split = len(rotation)
    while split > 0 and set(rotation[split - 1].support) <= measured:
        split -= 1
    return rotation[:split], rotation[split:]


def target_of(instrument: Instrument, register: Register) -> TargetMeasurement:
    sites = instrument.sites
    if len(sites) != 2 or any(register.dim(site) != 2 for site in sites):
        raise UnsupportedMeasurement(
            f'Only measurements reading out two qubits can be displaced, got {list(sites)}'
        )
    _, core = split_rotation(instrument)
    rotation = compose(core, sites, (2, 2))
    labels = [instrument.label(digits(k, (2, 2))) for k in range(4)]
    return TargetMeasurement.from_rotation(rotation, labels)


def displace_measurement(
    scenario: Scenario,
    party: str,
    setting: str,
    levels: int = 1,
    events: tuple[str, str] = unset
) -> Scenario:
    """Replace a two-qubit measurement by wire readouts and a decoder.

    The first measured site is treated as Alice's, the second as Bob's.
    Gates of the setting that act outside the measured pair are folded into
    the state recipe first. `events` optionally places Alice's and Bob's
    readouts at two spacetime events.
    """
    instrument = scenario.instrument(party, setting)
    target = target_of(instrument, scenario.register)
    prefix, _ = split_rotation(instrument)
    alice_site, bob_site = instrument.sites
    circuit = build(target, levels, alice_site, bob_site, prefix=f'{party}.{setting}:')
    ancillas = [w for pair in circuit.pairs for w in (pair.alice, pair.bob)]
    clashes = [w for w in ancillas if w in scenario.register]
    if clashes:
        raise ScenarioError(f'Ancilla labels {clashes[:3]} already exist in {scenario.name!r}')

    readout_events = {}
    if events is not unset:
        alice_event, bob_event = events
        readout_events.update(dict.fromkeys(circuit.alice_wires, alice_event))
        readout_events.update(dict.fromkeys(circuit.bob_wires, bob_event))
    readout = Instrument(circuit.wires, circuit.decoder(), (), readout_events)

    settings = {}
    for owner, instruments in scenario.settings.items():
        settings[owner] = {}
        for name, other in instruments.items():
            if (owner, name) == (party, setting):
                settings[owner][name] = readout
            else:
                settings[owner][name] = _undo_prefix(other, circuit, prefix)

    alice_ancillas = tuple(pair.alice for pair in circuit.pairs)
    bob_ancillas = tuple(pair.bob for pair in circuit.pairs)
    custody = {}
    for round_type, holders in scenario.custody.items():
        custody[round_type] = {}
        for holder, sites in holders.items():
            extra = ()
            if alice_site in sites:
                extra += alice_ancillas
            if bob_site in sites:
                extra += bob_ancillas
            custody[round_type][holder] = tuple(sites) + extra

    recipe = (
        scenario.recipe
        + tuple(GateStep(gate) for gate in prefix)
        + tuple(BellPair((pair.alice, pair.bob)) for pair in circuit.pairs)
        + tuple(GateStep(gate) for gate in circuit.alice_gates + circuit.bob_gates)
    )
    record = DisplacementRecord(party, setting, levels, circuit.alice_wires, circuit.bob_wires)
    logger.info(
        'Displaced %s of %s in %r with %d Bell pairs', setting, party, scenario.name, circuit.n_pairs
    )
    return replace(
        scenario,
        name=f'{scenario.name}+{party}.{setting}',
        register=scenario.register.concat(Register.qubits(*ancillas)),
        recipe=recipe,
        custody=custody,
        settings=settings,
        displacements=scenario.displacements + (record,)
    )


def _undo_prefix(instrument: Instrument, circuit: LocalizationCircuit, prefix: tuple) -> Instrument:
    touched = set(instrument.support)
    folded = {site for gate in prefix for site in gate.support}
    if prefix and touched & (folded | {circuit.alice_site, circuit.bob_site}):
        undo = daggers(circuit.alice_gates) + daggers(circuit.bob_gates) + daggers(prefix)
    else:
        undo = []
        if circuit.alice_site in touched:
            undo += daggers(circuit.alice_gates)
        if circuit.bob_site in touched:
            undo += daggers(circuit.bob_gates)
    return instrument.with_prefix(undo) if undo else instrument


def displacement_bipartition(scenario: Scenario) -> Bipartition:
    """Alice's wires against Bob's wires over all displacements so far."""
    if not scenario.displacements:
        raise ScenarioError(f'{scenario.name!r} has no displaced measurement')
    alice, bob = {}, {}
    for record in scenario.displacements:
        alice.update(dict.fromkeys(record.alice_sites))
        bob.update(dict.fromkeys(record.bob_sites))
    return Bipartition(tuple(alice), tuple(bob))

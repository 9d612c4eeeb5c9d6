"""Conversion between JSON documents and scenarios, behavior tables,
event layouts and measurement descriptors."""
from __future__ import annotations
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from collections.abc import Mapping
from typing import Any
from warnings import warn

import numpy as np

from .bell_ops import BellKind, bell_vector
from .constants import unset
from .exceptions import QDisplaceError, SchemaError
from .gates import NAMED_MATRICES
from .localization import TargetMeasurement
from .qsim import GateOp, OutcomeDistribution, PureState, Register
from .scenario import (
    Amplitudes, BasisState, BehaviorTable, BellPair, DisplacementRecord,
    GateStep, Instrument, Merge, Scenario
)
from .spacetime import Event

# explicit class tables larger than this are not written out
MAX_WRITTEN_OUTCOMES = 2 ** 12

SCENARIO_KEYS = {
    'name', 'sites', 'state', 'parties', 'round_types', 'custody',
    'instruments', 'alignment', 'displacements'
}


def format_probability(p: float) -> str:
    return f'{p:.15g}'


def digest(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode('utf-8')
    return hashlib.sha256(data).hexdigest()


def dumps(document: Any) -> str:
    return json.dumps(document, indent=2, ensure_ascii=False) + '\n'


def load_json(path: str | Path) -> Any:
    text = Path(path).read_text(encoding='utf-8')
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f'Malformed JSON in {path}: {e.msg} at line {e.lineno}, column {e.colno}')


def _expect(value, kind: type | tuple, path: tuple, what: str):
    if not isinstance(value, kind):
        names = kind.__name__ if isinstance(kind, type) else ' or '.join(k.__name__ for k in kind)
        raise SchemaError(f'Expected {what} to be {names}, got {type(value).__name__}', path)
    return value


def _key(document: Mapping, key: str, path: tuple, default=unset):
    if key in document:
        return document[key]
    if default is not unset:
        return default
    raise SchemaError(f'Missing key {key!r}', path)


def _complex(value, path: tuple) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        return complex(value[0], value[1])
    raise SchemaError(f'Expected a number or a [re, im] pair, got {value!r}', path)


def complex_to_json(value: complex):
    value = complex(value)
    if value.imag == 0:
        return value.real
    return [value.real, value.imag]


def _vector(values, path: tuple) -> np.ndarray:
    _expect(values, list, path, 'amplitudes')
    return np.array([_complex(v, path + (i,)) for i, v in enumerate(values)], dtype=np.complex128)


def _matrix(rows, path: tuple) -> np.ndarray:
    _expect(rows, list, path, 'matrix')
    return np.array([_vector(row, path + (i,)) for i, row in enumerate(rows)])


def _strings(values, path: tuple, what: str) -> tuple[str, ...]:
    _expect(values, list, path, what)
    for i, value in enumerate(values):
        _expect(value, str, path + (i,), what)
    return tuple(values)


def _register(sites, path: tuple) -> Register:
    _expect(sites, list, path, 'sites')
    entries = []
    for i, site in enumerate(sites):
        if isinstance(site, str):
            entries.append((site, 2))
        elif isinstance(site, Mapping):
            entries.append((_key(site, 'label', path + (i,)), _key(site, 'dim', path + (i,), 2)))
        elif isinstance(site, list) and len(site) == 2:
            entries.append(tuple(site))
        else:
            raise SchemaError(f'Expected a site label, [label, dim] or {{"label", "dim"}}, got {site!r}', path + (i,))
    try:
        return Register(tuple(entries))
    except QDisplaceError as e:
        raise SchemaError(str(e), path)


def gate_from_json(document, path: tuple = ()) -> GateOp:
    _expect(document, Mapping, path, 'gate')
    sites = _strings(_key(document, 'sites', path), path + ('sites',), 'gate sites')
    controls = _strings(document.get('controls', []), path + ('controls',), 'gate controls')
    values = document.get('control_values', [])
    if 'name' in document and 'matrix' not in document:
        name = document['name']
        if name not in NAMED_MATRICES:
            raise SchemaError(f'Unknown gate name {name!r}; known: {sorted(NAMED_MATRICES)}', path + ('name',))
        matrix = NAMED_MATRICES[name]
    elif 'matrix' in document:
        name = document.get('name', '')
        matrix = _matrix(document['matrix'], path + ('matrix',))
    else:
        raise SchemaError('A gate needs a "name" or a "matrix"', path)
    try:
        return GateOp(matrix, sites, controls, values, name)
    except QDisplaceError as e:
        raise SchemaError(str(e), path)


def gate_to_json(gate: GateOp) -> dict:
    document = {}
    known = NAMED_MATRICES.get(gate.name)
    if known is not None and known.shape == gate.matrix.shape and np.allclose(known, gate.matrix):
        document['name'] = gate.name
    else:
        if gate.name:
            document['name'] = gate.name
        document['matrix'] = [[complex_to_json(v) for v in row] for row in gate.matrix]
    document['sites'] = list(gate.sites)
    if gate.controls:
        document['controls'] = list(gate.controls)
        document['control_values'] = list(gate.control_values)
    return document


def _step_from_json(step, path: tuple, register: Register):
    _expect(step, Mapping, path, 'state step')
    if len(step) != 1 and 'bell' not in step:
        raise SchemaError(f'Expected one constructor per state step, got {sorted(step)}', path)
    if 'bell' in step:
        sites = _strings(step['bell'], path + ('bell',), 'Bell pair sites')
        if len(sites) != 2:
            raise SchemaError('A Bell pair has exactly two sites', path + ('bell',))
        kind = step.get('kind', BellKind.PhiPlus.value)
        try:
            return BellPair(sites, BellKind(kind))
        except ValueError:
            raise SchemaError(f'Unknown Bell kind {kind!r}', path + ('kind',))
    if 'gate' in step:
        return GateStep(gate_from_json(step['gate'], path + ('gate',)))
    if 'amplitudes' in step:
        body = step['amplitudes']
        if isinstance(body, Mapping):
            sub = _register(_key(body, 'sites', path + ('amplitudes',)), path + ('amplitudes', 'sites'))
            values = _vector(_key(body, 'values', path + ('amplitudes',)), path + ('amplitudes', 'values'))
        else:
            sub, values = register, _vector(body, path + ('amplitudes',))
        try:
            return Amplitudes(PureState(sub, values))
        except ValueError as e:
            raise SchemaError(str(e), path + ('amplitudes',))
    if 'basis' in step:
        body = _expect(step['basis'], Mapping, path + ('basis',), 'basis state')
        sub = _register(_key(body, 'sites', path + ('basis',)), path + ('basis', 'sites'))
        values = tuple(int(v) for v in _key(body, 'values', path + ('basis',)))
        if len(values) != len(sub) or any(not 0 <= v < d for v, d in zip(values, sub.dims)):
            raise SchemaError(f'Basis values {list(values)} do not fit {list(sub)}', path + ('basis',))
        return BasisState(sub, values)
    if 'merge' in step:
        body = _expect(step['merge'], Mapping, path + ('merge',), 'merge')
        sites = _strings(_key(body, 'sites', path + ('merge',)), path + ('merge', 'sites'), 'merged sites')
        return Merge(sites, _key(body, 'label', path + ('merge',)))
    raise SchemaError(f'Unknown state constructor {sorted(step)}', path)


def _step_to_json(step) -> dict:
    if isinstance(step, BellPair):
        document = {'bell': list(step.sites)}
        if step.kind != BellKind.PhiPlus:
            document['kind'] = step.kind.value
        return document
    if isinstance(step, GateStep):
        return {'gate': gate_to_json(step.gate)}
    if isinstance(step, Amplitudes):
        return {'amplitudes': {
            'sites': [[label, dim] for label, dim in step.state.register],
            'values': [complex_to_json(v) for v in step.state.amplitudes],
        }}
    if isinstance(step, BasisState):
        return {'basis': {
            'sites': [[label, dim] for label, dim in step.register],
            'values': list(step.values),
        }}
    if isinstance(step, Merge):
        return {'merge': {'sites': list(step.sites), 'label': step.label}}
    raise TypeError(f'Cannot serialize state step {type(step).__name__}')


def _outcome_key(text: str, path: tuple) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(','))
    except ValueError:
        raise SchemaError(f'Outcome key {text!r} is not a comma-separated digit list', path)


def instrument_from_json(document, path: tuple = ()) -> Instrument:
    _expect(document, Mapping, path, 'instrument')
    sites = _strings(_key(document, 'sites', path), path + ('sites',), 'measured sites')
    rotation = tuple(
        gate_from_json(gate, path + ('rotation', i))
        for i, gate in enumerate(_expect(document.get('rotation', []), list, path + ('rotation',), 'rotation'))
    )
    classes = unset
    if 'classes' in document:
        raw = _expect(document['classes'], Mapping, path + ('classes',), 'classes')
        classes = {
            _outcome_key(outcome, path + ('classes', outcome)): str(label)
            for outcome, label in raw.items()
        }
    events = _expect(document.get('events', {}), Mapping, path + ('events',), 'events')
    try:
        return Instrument(sites, classes, rotation, events)
    except QDisplaceError as e:
        raise SchemaError(str(e), path)


def instrument_to_json(instrument: Instrument, register: Register, path: tuple = ()) -> dict:
    document = {'sites': list(instrument.sites)}
    if instrument.rotation:
        document['rotation'] = [gate_to_json(gate) for gate in instrument.rotation]
    if instrument.classes is not unset:
        if len(instrument.classes) > MAX_WRITTEN_OUTCOMES:
            raise SchemaError(
                f'{len(instrument.classes)} outcome classes are too many to write out', path
            )
        document['classes'] = {
            ','.join(str(v) for v in outcome): instrument.label(outcome)
            for outcome in instrument.outcomes(register)
        }
    if instrument.events:
        document['events'] = dict(instrument.events)
    return document


def _displacement_from_json(record, path: tuple) -> DisplacementRecord:
    _expect(record, Mapping, path, 'displacement')
    return DisplacementRecord(
        _expect(_key(record, 'party', path), str, path + ('party',), 'party'),
        _expect(_key(record, 'setting', path), str, path + ('setting',), 'setting'),
        _expect(_key(record, 'levels', path), int, path + ('levels',), 'levels'),
        _strings(_key(record, 'alice_sites', path), path + ('alice_sites',), 'sites'),
        _strings(_key(record, 'bob_sites', path), path + ('bob_sites',), 'sites')
    )


def scenario_from_json(document, name: str = 'scenario') -> Scenario:
    _expect(document, Mapping, (), 'scenario')
    unknown = sorted(set(document) - SCENARIO_KEYS)
    if unknown:
        warn(f'Ignoring unknown scenario keys: {unknown}')
    register = _register(_key(document, 'sites', ()), ('sites',))
    recipe = tuple(
        _step_from_json(step, ('state', i), register)
        for i, step in enumerate(_expect(_key(document, 'state', ()), list, ('state',), 'state'))
    )
    rounds = {
        round_type: _strings(parties, ('round_types', round_type), 'active parties')
        for round_type, parties in _expect(
            _key(document, 'round_types', ()), Mapping, ('round_types',), 'round types'
        ).items()
    }
    if 'parties' in document:
        declared = set(_strings(document['parties'], ('parties',), 'parties'))
        undeclared = sorted({p for parties in rounds.values() for p in parties} - declared)
        if undeclared:
            raise SchemaError(f'Parties {undeclared} are active but not declared', ('round_types',))
    custody = {
        round_type: {
            party: _strings(sites, ('custody', round_type, party), 'held sites')
            for party, sites in _expect(holders, Mapping, ('custody', round_type), 'custody').items()
        }
        for round_type, holders in _expect(
            _key(document, 'custody', ()), Mapping, ('custody',), 'custody'
        ).items()
    }
    settings = {
        party: {
            setting: instrument_from_json(body, ('instruments', party, setting))
            for setting, body in _expect(instruments, Mapping, ('instruments', party), 'settings').items()
        }
        for party, instruments in _expect(
            _key(document, 'instruments', ()), Mapping, ('instruments',), 'instruments'
        ).items()
    }
    alignment = {
        party: dict(_expect(mapping, Mapping, ('alignment', party), 'alignment'))
        for party, mapping in _expect(document.get('alignment', {}), Mapping, ('alignment',), 'alignment').items()
    }
    displacements = tuple(
        _displacement_from_json(record, ('displacements', i))
        for i, record in enumerate(
            _expect(document.get('displacements', []), list, ('displacements',), 'displacements')
        )
    )
    return Scenario(
        name=document.get('name', name),
        register=register,
        recipe=recipe,
        rounds=rounds,
        custody=custody,
        settings=settings,
        alignment=alignment,
        displacements=displacements
    )


def scenario_to_json(scenario: Scenario) -> dict:
    document = {
        'name': scenario.name,
        'sites': [[label, dim] for label, dim in scenario.register],
        'state': [_step_to_json(step) for step in scenario.recipe],
        'parties': list(scenario.parties),
        'round_types': {r: list(parties) for r, parties in scenario.rounds.items()},
        'custody': {
            r: {party: list(sites) for party, sites in holders.items()}
            for r, holders in scenario.custody.items()
        },
        'instruments': {
            party: {
                name: instrument_to_json(instrument, scenario.register, ('instruments', party, name))
                for name, instrument in instruments.items()
            }
            for party, instruments in scenario.settings.items()
        },
    }
    if scenario.alignment:
        document['alignment'] = {party: dict(m) for party, m in scenario.alignment.items()}
    if scenario.displacements:
        document['displacements'] = [
            {
                'party': r.party, 'setting': r.setting, 'levels': r.levels,
                'alice_sites': list(r.alice_sites), 'bob_sites': list(r.bob_sites)
            }
            for r in scenario.displacements
        ]
    return document


def behavior_to_json(table: BehaviorTable) -> list[dict]:
    return [
        {
            'round': round_type,
            'parties': list(table.parties[round_type]),
            'settings': list(names),
            'dist': {
                ','.join(outcome): format_probability(p)
                for outcome, p in sorted(distribution.items())
            }
        }
        for (round_type, names), distribution in table.items()
    ]


def behavior_from_json(document) -> BehaviorTable:
    """Read records, or a report whose results hold them."""
    path = ()
    if isinstance(document, Mapping):
        path = ('results', 'behavior')
        document = _key(_expect(_key(document, 'results', ()), Mapping, ('results',), 'results'), 'behavior', ('results',))
    _expect(document, list, path, 'behavior records')
    table = BehaviorTable()
    for i, record in enumerate(document):
        where = path + (i,)
        _expect(record, Mapping, where, 'behavior record')
        round_type = _key(record, 'round', where)
        names = _strings(_key(record, 'settings', where), where + ('settings',), 'setting names')
        parties = _strings(_key(record, 'parties', where), where + ('parties',), 'parties')
        if len(parties) != len(names):
            raise SchemaError(f'{len(names)} settings for {len(parties)} parties', where)
        if table.parties.setdefault(round_type, parties) != parties:
            raise SchemaError(f'Round {round_type!r} lists different parties', where + ('parties',))
        distribution = {}
        for outcome, p in _expect(_key(record, 'dist', where), Mapping, where + ('dist',), 'distribution').items():
            try:
                distribution[tuple(outcome.split(','))] = float(p)
            except ValueError:
                raise SchemaError(f'Probability {p!r} is not a number', where + ('dist', outcome))
        try:
            table[(round_type, names)] = OutcomeDistribution(distribution)
        except ValueError as e:
            raise SchemaError(str(e), where + ('dist',))
    return table


@dataclass(frozen=True)
class EventsInput:
    events: tuple[Event, ...]
    # event -> sites acted on there
    instrument_sites: dict
    site_factors: dict


def events_from_json(document) -> EventsInput:
    _expect(document, Mapping, (), 'events document')
    events = []
    for i, body in enumerate(_expect(_key(document, 'events', ()), list, ('events',), 'events')):
        where = ('events', i)
        _expect(body, Mapping, where, 'event')
        label, t = _key(body, 'label', where), _key(body, 't', where)
        x = body.get('x', [])
        x = [x] if isinstance(x, (int, float)) else x
        try:
            events.append(Event(str(label), float(t), tuple(x)))
        except (TypeError, ValueError) as e:
            raise SchemaError(str(e), where)
    instrument_sites = {
        event: _strings(sites, ('instrument_sites', event), 'sites')
        for event, sites in _expect(
            document.get('instrument_sites', {}), Mapping, ('instrument_sites',), 'instrument sites'
        ).items()
    }
    site_factors = {}
    for site, factor in _expect(document.get('site_factors', {}), Mapping, ('site_factors',), 'site factors').items():
        site_factors[site] = factor if isinstance(factor, str) else _strings(factor, ('site_factors', site), 'path')
    return EventsInput(tuple(events), instrument_sites, site_factors)


def _inline_or_file(descriptor: str):
    if descriptor.lstrip().startswith(('{', '[')):
        try:
            return json.loads(descriptor)
        except json.JSONDecodeError as e:
            raise SchemaError(f'Malformed inline JSON: {e.msg}')
    if not Path(descriptor).exists():
        return unset
    return load_json(descriptor)


def measurement_from_descriptor(descriptor: str, rng: np.random.Generator = None) -> TargetMeasurement:
    """'computational', 'bsm', 'random' or a JSON {"vectors", "labels"} (inline or a file)."""
    if descriptor == 'computational':
        return TargetMeasurement.computational()
    if descriptor == 'bsm':
        return TargetMeasurement.bsm()
    if descriptor == 'random':
        return TargetMeasurement.random(np.random.default_rng() if rng is None else rng)
    document = _inline_or_file(descriptor)
    if document is unset:
        raise SchemaError(f'Unknown measurement {descriptor!r}: expected computational, bsm, random or a JSON file')
    _expect(document, Mapping, (), 'measurement')
    vectors = _matrix(_key(document, 'vectors', ()), ('vectors',))
    labels = _strings(_key(document, 'labels', ()), ('labels',), 'labels')
    try:
        return TargetMeasurement(vectors, labels)
    except ValueError as e:
        raise SchemaError(str(e))


def state_from_descriptor(descriptor: str, rng: np.random.Generator = None) -> np.ndarray:
    """Two-qubit input: 'random', 'zero', a Bell kind, or JSON amplitudes."""
    if descriptor == 'random':
        rng = np.random.default_rng() if rng is None else rng
        amplitudes = rng.normal(size=4) + 1j * rng.normal(size=4)
        return amplitudes / np.linalg.norm(amplitudes)
    if descriptor == 'zero':
        return np.eye(4, dtype=np.complex128)[0]
    if descriptor in BellKind.__members__:
        return bell_vector(BellKind(descriptor))
    document = _inline_or_file(descriptor)
    if document is unset:
        raise SchemaError(f'Unknown state {descriptor!r}: expected random, zero, a Bell kind or JSON amplitudes')
    amplitudes = _vector(document, ())
    if amplitudes.size != 4:
        raise SchemaError(f'Expected 4 amplitudes, got {amplitudes.size}')
    norm = np.linalg.norm(amplitudes)
    if norm == 0:
        raise SchemaError('Amplitudes are all zero')
    return amplitudes / norm


def distribution_to_json(distribution: Mapping, key=lambda outcome: ','.join(str(v) for v in outcome)) -> dict:
    return {key(outcome): format_probability(p) for outcome, p in sorted(distribution.items(), key=lambda kv: str(kv[0]))}

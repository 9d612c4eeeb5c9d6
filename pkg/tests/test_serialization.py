import json

import numpy as np
from pytest import approx, mark, raises, warns

from qdisplace.bell_ops import BellKind, bell_vector
from qdisplace.builtins import build_builtin
from qdisplace.exceptions import SchemaError
from qdisplace.gates import named
from qdisplace.localization import TargetMeasurement
from qdisplace.qsim import GateOp, Register
from qdisplace.scenario import Instrument, behavior, compare_behaviors
from qdisplace.serialization import (
    behavior_from_json, behavior_to_json, dumps, events_from_json, format_probability,
    gate_from_json, gate_to_json, instrument_to_json, load_json,
    measurement_from_descriptor, scenario_from_json, scenario_to_json, state_from_descriptor
)


def test_format_probability():
    assert format_probability(0.25) == '0.25'
    assert format_probability(1.0) == '1'
    assert format_probability(1 / 3) == '0.333333333333333'


@mark.parametrize('name', ['rabelo-original', 'rabelo-displaced', 'rabelo-ququart', 'bancal-ququart'])
def test_scenario_documents_keep_the_behavior(name):
    scenario = build_builtin(name)
    document = json.loads(dumps(scenario_to_json(scenario)))
    restored = scenario_from_json(document)
    assert restored.name == name
    assert restored.register == scenario.register
    assert compare_behaviors(behavior(scenario), behavior(restored)).max_tv < 1e-12


def test_named_gates_are_written_by_name():
    assert gate_to_json(named('U', 'a', 'b')) == {'name': 'U', 'sites': ['a', 'b']}
    controlled = GateOp(named('X', 't').matrix, ('t',), controls=('c',), control_values=(0,), name='X')
    document = gate_to_json(controlled)
    assert document == {'name': 'X', 'sites': ['t'], 'controls': ['c'], 'control_values': [0]}
    restored = gate_from_json(document)
    assert restored.controls == ('c',)
    assert restored.control_values == (0,)


def test_other_gates_are_written_as_matrices():
    phase = GateOp(np.diag([1, 1j]), ('a',), name='S')
    document = gate_to_json(phase)
    assert document['matrix'] == [[1.0, 0.0], [0.0, [0.0, 1.0]]]
    assert np.allclose(gate_from_json(document).matrix, phase.matrix)


def test_instrument_classes_are_keyed_by_digits():
    instrument = Instrument(('a', 'b'), {(0, 0): 'x', (0, 1): 'y', (1, 0): 'y', (1, 1): 'x'})
    document = instrument_to_json(instrument, Register.qubits('a', 'b'))
    assert document['classes'] == {'0,0': 'x', '0,1': 'y', '1,0': 'y', '1,1': 'x'}


def minimal_scenario(**changes):
    document = {
        'sites': ['a', 'b'],
        'state': [{'bell': ['a', 'b'], 'kind': 'PsiMinus'}],
        'round_types': {'main': ['A', 'B']},
        'custody': {'main': {'A': ['a'], 'B': ['b']}},
        'instruments': {'A': {'Z': {'sites': ['a']}}, 'B': {'Z': {'sites': ['b']}}},
    }
    document.update(changes)
    return document


def test_minimal_scenario():
    scenario = scenario_from_json(minimal_scenario(), name='minimal')
    assert scenario.name == 'minimal'
    table = behavior(scenario)
    assert table[('main', ('Z', 'Z'))] == {('0', '1'): approx(0.5), ('1', '0'): approx(0.5)}


def test_state_constructors():
    scenario = scenario_from_json(minimal_scenario(
        sites=['a', ['b', 2], {'label': 'c', 'dim': 2}],
        state=[
            {'basis': {'sites': ['c'], 'values': [1]}},
            {'amplitudes': {'sites': ['a', 'b'], 'values': [0, [0, 1], 0, 0]}},
            {'gate': {'name': 'CNOT', 'sites': ['c', 'a']}},
        ],
    ))
    state = scenario.initial_state()
    assert abs(state.amplitude('111')) == approx(1)


def test_schema_errors_locate_the_key():
    broken = minimal_scenario(instruments={
        'A': {'A1': {'sites': ['a'], 'rotation': [{'name': 'Q', 'sites': ['a']}]}},
        'B': {'Z': {'sites': ['b']}},
    })
    with raises(SchemaError, match='^instruments/A/A1/rotation/0/name: Unknown gate'):
        scenario_from_json(broken)
    with raises(SchemaError, match='^state/0/kind'):
        scenario_from_json(minimal_scenario(state=[{'bell': ['a', 'b'], 'kind': 'Omega'}]))
    with raises(SchemaError, match='Missing key'):
        scenario_from_json({'sites': ['a']})
    with raises(SchemaError, match='not declared'):
        scenario_from_json(minimal_scenario(parties=['A']))
    with raises(SchemaError, match='^state/0/amplitudes'):
        scenario_from_json(minimal_scenario(state=[{'amplitudes': [1, 1, 0, 0]}]))
    with raises(SchemaError, match='number'):
        gate_from_json({'matrix': [['x']], 'sites': ['a']})


def test_displacement_records_are_validated():
    record = {'party': 'A', 'setting': 'Z', 'levels': 1, 'alice_sites': [], 'bob_sites': []}
    scenario = scenario_from_json(minimal_scenario(displacements=[record]))
    assert scenario.displacements[0].levels == 1
    with raises(SchemaError, match="^displacements/0: Missing key 'setting'"):
        scenario_from_json(minimal_scenario(displacements=[{'party': 'A'}]))
    with raises(SchemaError, match='^displacements/0/levels: Expected levels'):
        scenario_from_json(minimal_scenario(displacements=[{**record, 'levels': '1'}]))
    with raises(SchemaError, match='^displacements/1: Expected displacement'):
        scenario_from_json(minimal_scenario(displacements=[record, 'A.Z']))


def test_unknown_scenario_keys_warn():
    with warns(UserWarning, match='unknown scenario keys'):
        scenario_from_json(minimal_scenario(colour='blue'))


def test_malformed_json(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"sites": [}')
    with raises(SchemaError, match='line 1, column 12'):
        load_json(path)


def test_behavior_documents():
    table = behavior(build_builtin('rabelo-original'))
    records = behavior_to_json(table)
    assert len(records) == 12
    assert records[0]['parties'] == ['A', 'C', 'B']
    assert all(isinstance(p, str) for record in records for p in record['dist'].values())
    restored = behavior_from_json(json.loads(dumps({'results': {'behavior': records}})))
    assert restored.parties == table.parties
    assert compare_behaviors(table, restored).max_tv < 1e-14


def test_behavior_document_errors():
    record = {'round': 'main', 'parties': ['A'], 'settings': ['Z'], 'dist': {'0': '0.5', '1': '0.25'}}
    with raises(SchemaError, match='^0/dist: Probabilities sum'):
        behavior_from_json([record])
    with raises(SchemaError, match='settings for'):
        behavior_from_json([dict(record, parties=['A', 'B'])])
    with raises(SchemaError, match="^results: Missing key 'behavior'"):
        behavior_from_json({'results': {}})


def test_events_document():
    document = events_from_json({
        'events': [{'label': 'a', 't': 0, 'x': 1}, {'label': 'b', 't': 1, 'x': [0, 0]}],
        'instrument_sites': {'a': ['s']},
        'site_factors': {'s': ['a']},
    })
    assert [e.x for e in document.events] == [(1.0,), (0.0, 0.0)]
    assert document.instrument_sites == {'a': ('s',)}
    assert document.site_factors == {'s': ('a',)}
    with raises(SchemaError, match="^events/0: Missing key 't'"):
        events_from_json({'events': [{'label': 'a'}]})


def test_measurement_descriptors(tmp_path, rng):
    assert measurement_from_descriptor('bsm').classes == tuple(
        BellKind.from_bits(z, x).value for z, x in ((0, 0), (0, 1), (1, 0), (1, 1))
    )
    assert len(measurement_from_descriptor('random', rng).labels) == 4
    inline = measurement_from_descriptor(json.dumps({
        'vectors': np.eye(4).tolist(), 'labels': ['p', 'q', 'q', 'p']
    }))
    assert inline.classes == ('p', 'q')
    path = tmp_path / 'target.json'
    path.write_text(json.dumps({'vectors': np.eye(4).tolist(), 'labels': list('abcd')}))
    assert measurement_from_descriptor(str(path)).labels == tuple('abcd')
    with raises(SchemaError, match='Unknown measurement'):
        measurement_from_descriptor('nonsense')
    with raises(SchemaError, match='orthogonal'):
        measurement_from_descriptor(json.dumps({'vectors': np.ones((4, 4)).tolist(), 'labels': list('abcd')}))


def test_state_descriptors(rng):
    assert np.allclose(state_from_descriptor('PsiMinus'), bell_vector(BellKind.PsiMinus))
    assert np.allclose(state_from_descriptor('zero'), [1, 0, 0, 0])
    assert np.linalg.norm(state_from_descriptor('random', rng)) == approx(1)
    assert np.allclose(state_from_descriptor('[1, 1, 0, 0]'), np.array([1, 1, 0, 0]) / np.sqrt(2))
    with raises(SchemaError, match='4 amplitudes'):
        state_from_descriptor('[1, 0]')
    with raises(SchemaError, match='all zero'):
        state_from_descriptor('[0, 0, 0, 0]')
    with raises(SchemaError, match='Unknown state'):
        state_from_descriptor('plus')


def test_measurement_round_trip_through_descriptor():
    target = TargetMeasurement.bsm()
    document = {
        'vectors': [[[v.real, v.imag] for v in row] for row in target.vectors.tolist()],
        'labels': list(target.labels),
    }
    restored = measurement_from_descriptor(json.dumps(document))
    assert np.allclose(restored.vectors, target.vectors)

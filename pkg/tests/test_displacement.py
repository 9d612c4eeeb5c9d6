import numpy as np
from pytest import raises

from qdisplace.builtins import build_builtin
from qdisplace.constants import ABORT
from qdisplace.displacement import (
    displace_measurement, displacement_bipartition, split_rotation, target_of
)
from qdisplace.entanglement import measurement_verdict
from qdisplace.exceptions import ScenarioError, UnsupportedMeasurement
from qdisplace.gates import U, named
from qdisplace.qsim import Register
from qdisplace.scenario import (
    Amplitudes, Instrument, Scenario, behavior, bsm_classes, compare_behaviors,
    condition_on_success, success_probability
)

from .conftest import random_state


def test_split_rotation():
    rotation = (named('H', 'c'), named('CNOT', 'a', 'c'), named('U', 'a', 'b'), named('H', 'b'))
    prefix, core = split_rotation(Instrument(('a', 'b'), rotation=rotation))
    assert prefix == rotation[:2]
    assert core == rotation[2:]
    assert split_rotation(Instrument(('a', 'b'), rotation=rotation[:2])) == (rotation[:2], ())


def test_target_of_a_bell_measurement():
    instrument = Instrument(('a', 'b'), bsm_classes(), (named('U', 'a', 'b'),))
    target = target_of(instrument, Register.qubits('a', 'b'))
    assert np.allclose(target.vectors.conj().T, U)
    assert target.labels == ('PhiPlus', 'PsiPlus', 'PhiMinus', 'PsiMinus')


def test_only_two_qubit_readouts_are_displaced():
    scenario = build_builtin('rabelo-original')
    with raises(UnsupportedMeasurement, match='two qubits'):
        displace_measurement(scenario, 'A', 'A1')
    with raises(UnsupportedMeasurement):
        displace_measurement(build_builtin('rabelo-ququart'), 'C', 'C3')


def test_displaced_bell_measurement_reproduces_the_behavior():
    original = build_builtin('rabelo-original')
    displaced = displace_measurement(original, 'C', 'C3')
    assert len(displaced.register) == 10
    assert displaced.displacements[0].alice_sites[0] == 'C_A'
    table = behavior(displaced)
    assert 'abort' in {o[1] for o in table[('main', ('A1', 'C3', 'B1'))]}
    rates = success_probability(table, 'C')
    assert all(abs(rate - (0.25 if names[1] == 'C3' else 1)) < 1e-9 for (_, names), rate in rates.items())
    assert compare_behaviors(behavior(original), condition_on_success(table)).equivalent


def test_displaced_settings_are_local_across_the_wires():
    displaced = displace_measurement(build_builtin('rabelo-original'), 'C', 'C3')
    bipartition = displacement_bipartition(displaced)
    for setting in ('C1', 'C2', 'C3'):
        instrument = displaced.instrument('C', setting)
        assert measurement_verdict(instrument, bipartition, displaced.register).product
    assert displaced.instrument('C', 'C3').rotation == ()


def test_displacement_bipartition_needs_a_displacement():
    with raises(ScenarioError, match='no displaced'):
        displacement_bipartition(build_builtin('rabelo-original'))


def test_readout_events():
    displaced = displace_measurement(build_builtin('rabelo-original'), 'C', 'C3', events=('C_A', 'C_B'))
    readout = displaced.instrument('C', 'C3')
    assert readout.events['C_A'] == 'C_A'
    assert readout.events['C_B'] == 'C_B'
    assert {readout.events[w] for w in displaced.displacements[0].bob_sites} == {'C_B'}


def joint_measurements(rng) -> Scenario:
    return Scenario(
        name='joint',
        register=Register.qubits('q1', 'q2'),
        recipe=(Amplitudes(random_state(rng, 'q1', 'q2')),),
        rounds={'main': ('M',)},
        custody={'main': {'M': ('q1', 'q2')}},
        settings={'M': {
            'bsm': Instrument(('q1', 'q2'), bsm_classes(), (named('U', 'q1', 'q2'),)),
            'cnot': Instrument(('q1', 'q2'), rotation=(named('CNOT', 'q1', 'q2'),)),
        }},
    )


def test_displacing_twice(rng):
    scenario = joint_measurements(rng)
    once = displace_measurement(scenario, 'M', 'bsm')
    twice = displace_measurement(once, 'M', 'cnot')
    assert len(twice.register) == 14
    assert len(twice.displacements) == 2
    bipartition = displacement_bipartition(twice)
    for setting in ('bsm', 'cnot'):
        assert measurement_verdict(twice.instrument('M', setting), bipartition, twice.register).product
    table = behavior(twice)
    for distribution in table.values():
        assert sum(p for o, p in distribution.items() if o[0] != ABORT) < 0.26
    assert compare_behaviors(behavior(scenario), condition_on_success(table)).equivalent


def test_ancilla_clash_is_rejected(rng):
    scenario = joint_measurements(rng)
    clashing = Scenario(
        name='clash',
        register=Register.qubits('q1', 'q2', 'M.bsm:p/in0.a'),
        recipe=scenario.recipe + (Amplitudes(random_state(rng, 'M.bsm:p/in0.a')),),
        rounds=scenario.rounds,
        custody=scenario.custody,
        settings=scenario.settings,
    )
    with raises(ScenarioError, match='already exist'):
        displace_measurement(clashing, 'M', 'bsm')

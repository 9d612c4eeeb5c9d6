from dataclasses import replace
from math import pi, sqrt

import numpy as np
from hypothesis import given, settings, strategies as st
from pytest import approx, mark, raises

from qdisplace.bell_ops import (
    BellKind, bell_state, bell_symmetry, canonical_chsh_settings, chsh_scores, direction_rotation
)
from qdisplace.builtins import BUILTINS, RABELO_TILT, build_builtin, lambda_state, rabelo_chsh_settings
from qdisplace.entanglement import Bipartition, measurement_verdict
from qdisplace.exceptions import ScenarioError, UnsupportedMeasurement
from qdisplace.gates import named
from qdisplace.qsim import GateOp, apply_gate, tensor
from qdisplace.scenario import Instrument, behavior, compare_behaviors, correlators, expectation

CUT = Bipartition(('A', 'C_A'), ('C_B', 'B'))


def test_lambda_state_is_the_disambiguated_pair_of_pairs():
    pairs = tensor(bell_state(BellKind.PhiPlus, 'A', 'C_A'), bell_state(BellKind.PhiPlus, 'C_B', 'B'))
    expected = apply_gate(pairs, named('U', 'C_A', 'C_B'))
    assert abs(np.vdot(expected.amplitudes, lambda_state().amplitudes)) > 1 - 1e-10
    restored = apply_gate(lambda_state(), named('U†', 'C_A', 'C_B'))
    assert np.allclose(restored.amplitudes, pairs.amplitudes)


def test_lambda_state_amplitudes():
    state = lambda_state()
    amplitude = 1 / (2 * sqrt(2))
    assert state.amplitude('0000') == approx(amplitude)
    assert state.amplitude('1110') == approx(-amplitude)
    assert state.amplitude('1101') == approx(-amplitude)
    assert state.amplitude('1111') == approx(0)


@mark.parametrize('name', sorted(BUILTINS))
def test_builtins_validate(name):
    build_builtin(name).validate()


def test_unknown_builtin():
    with raises(ScenarioError, match='Unknown builtin'):
        build_builtin('nope')


def test_rabelo_counter_model_is_indistinguishable():
    original = behavior(build_builtin('rabelo-original'))
    displaced = behavior(build_builtin('rabelo-displaced'))
    assert len(original) == 12
    comparison = compare_behaviors(original, displaced)
    assert comparison.max_tv < 1e-9
    assert compare_behaviors(displaced, behavior(build_builtin('rabelo-ququart'))).max_tv < 1e-9


def test_rabelo_verdicts_flip():
    original = build_builtin('rabelo-original')
    displaced = build_builtin('rabelo-displaced')

    def entangled(scenario, setting):
        return measurement_verdict(scenario.instrument('C', setting), CUT, scenario.register).entangled

    assert [entangled(original, s) for s in ('C1', 'C2', 'C3')] == [False, False, True]
    assert [entangled(displaced, s) for s in ('C1', 'C2', 'C3')] == [True, True, False]


def test_rabelo_chsh_wings_are_maximal():
    table = behavior(build_builtin('rabelo-original'))
    left = {
        (x, y): expectation(table, 'main', (a, c, 'B1'), ['A', ('C', 0)])
        for x, a in enumerate(('A1', 'A2'))
        for y, c in enumerate(('C1', 'C2'))
    }
    right = {
        (x, y): expectation(table, 'main', ('A1', c, b), [('C', 1), 'B'])
        for x, c in enumerate(('C1', 'C2'))
        for y, b in enumerate(('B1', 'B2'))
    }
    assert chsh_scores(left).best_score == approx(2 * sqrt(2))
    assert chsh_scores(right).best_score == approx(2 * sqrt(2))


@mark.parametrize('wing', ['C_B', 'B'])
def test_rabelo_tilt_turns_both_directions(wing):
    tilted = rabelo_chsh_settings(wing).angles
    canonical = canonical_chsh_settings(wing).angles
    assert [t - c for t, c in zip(tilted, canonical)] == approx([RABELO_TILT] * 2)


def test_rabelo_charlie_directions_avoid_the_axes():
    for angle in rabelo_chsh_settings('C_B').angles:
        assert min(abs(angle - k * pi / 2) for k in range(-2, 3)) > 0.1
    assert rabelo_chsh_settings('A') == canonical_chsh_settings('A')


def test_ququart_has_no_entangled_setting():
    scenario = build_builtin('rabelo-ququart')
    for bipartition in (Bipartition(('A', 'C'), ('B',)), Bipartition(('A',), ('C', 'B'))):
        for setting in ('C1', 'C2', 'C3'):
            verdict = measurement_verdict(scenario.instrument('C', setting), bipartition, scenario.register)
            assert verdict.product


def test_bancal_models_are_indistinguishable():
    reference = behavior(build_builtin('bancal-reference'))
    for name in ('bancal-classical', 'bancal-unentangled', 'bancal-ququart'):
        assert compare_behaviors(reference, behavior(build_builtin(name))).max_tv < 1e-9


@mark.parametrize('name', ['bancal-reference', 'bancal-classical', 'bancal-unentangled'])
def test_bancal_selftest_is_maximal(name):
    table = behavior(build_builtin(name))
    for first, second in (('A', 'C_A'), ('C_B', 'B')):
        report = chsh_scores(correlators(table, 'selftest', first, second))
        assert report.best_score == approx(2 * sqrt(2), abs=1e-9)


@mark.parametrize('name', ['bancal-reference', 'bancal-classical', 'bancal-unentangled'])
def test_bancal_send_round_matches_announced_bell_state(name):
    table = behavior(build_builtin(name))
    for kind in BellKind:
        values = correlators(table, 'send', 'A', 'B', given={'C': kind.value})
        report = chsh_scores(values)
        assert report.best == bell_symmetry(kind)
        assert report.best_score == approx(2 * sqrt(2), abs=1e-9)


def test_bancal_central_measurement_verdicts():
    classical = build_builtin('bancal-classical')
    unentangled = build_builtin('bancal-unentangled')
    wings = Bipartition(('A', 'C1_A', 'C2_A'), ('C2_B', 'C1_B', 'B'))
    assert measurement_verdict(classical.instrument('C', 'BSM'), wings, classical.register).product
    assert measurement_verdict(unentangled.instrument('C', 'BSM'), wings, unentangled.register).product
    inner = Bipartition(('A', 'C1_A'), ('C2_A', 'C2_B', 'C1_B', 'B'))
    assert measurement_verdict(unentangled.instrument('C', 'BSM'), inner, unentangled.register).product
    with raises(UnsupportedMeasurement):
        measurement_verdict(classical.instrument('C', 'BSM'), inner, classical.register)


def with_angles(scenario, angles):
    """Swap the final direction rotation of every wing setting for a drawn angle."""
    settings = {}
    for party, instruments in scenario.settings.items():
        settings[party] = {}
        for name, instrument in instruments.items():
            if party == 'C':
                settings[party][name] = instrument
                continue
            *prefix, last = instrument.rotation
            gate = GateOp(direction_rotation(angles[party, name]), last.sites)
            settings[party][name] = Instrument(instrument.sites, instrument.classes, (*prefix, gate), instrument.events)
    return replace(scenario, settings=settings)


@settings(max_examples=5, deadline=None)
@given(st.lists(st.floats(-np.pi, np.pi), min_size=8, max_size=8))
def test_bancal_models_agree_for_any_wing_angles(drawn):
    names = [
        ('A', 'A1'), ('A', 'A2'), ('C_A', 'CA1'), ('C_A', 'CA2'),
        ('C_B', 'CB1'), ('C_B', 'CB2'), ('B', 'B1'), ('B', 'B2'),
    ]
    angles = dict(zip(names, drawn))
    reference = behavior(with_angles(build_builtin('bancal-reference'), angles))
    for name in ('bancal-classical', 'bancal-unentangled'):
        other = behavior(with_angles(build_builtin(name), angles))
        assert compare_behaviors(reference, other).max_tv < 1e-9

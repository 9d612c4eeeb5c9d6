import numpy as np
from hypothesis import given, settings, strategies as st
from pytest import approx, raises, warns

from qdisplace.exceptions import CapacityError, NonUnitaryError, RegisterError, ZeroProbabilityBranch
from qdisplace.gates import CNOT, H, X, named
from qdisplace.qsim import (
    GateOp, OutcomeDistribution, PureState, Register, apply_gate, apply_gates,
    born_distribution, branches, check_capacity, compose, daggers, init_state,
    merge_sites, permute, project_and_drop, split_site, states_equal, tensor
)

from .conftest import random_state, random_unitary


def test_register_rejects_duplicates_and_small_dims():
    with raises(RegisterError, match='Duplicate'):
        Register.qubits('a', 'a')
    with raises(RegisterError, match='dimension 1'):
        Register((('a', 1),))


def test_first_site_is_most_significant():
    state = init_state(Register.qubits('a', 'b', 'c'), 0b100)
    assert state.amplitude(1, 0, 0) == 1
    assert state.amplitude('100') == 1


def test_gate_on_non_adjacent_sites_in_given_order():
    state = init_state(Register.qubits('q0', 'q1', 'q2'), 0b100)
    flipped = apply_gate(state, GateOp(CNOT, ('q0', 'q2'), name='CNOT'))
    assert flipped.amplitude('101') == approx(1)
    untouched = apply_gate(state, GateOp(CNOT, ('q2', 'q0'), name='CNOT'))
    assert untouched.amplitude('100') == approx(1)


def test_controlled_gate_respects_control_value():
    state = init_state(Register.qubits('c', 't'), 0)
    on_zero = apply_gate(state, GateOp(X, ('t',), controls=('c',), control_values=(0,)))
    on_one = apply_gate(state, GateOp(X, ('t',), controls=('c',)))
    assert on_zero.amplitude('01') == approx(1)
    assert on_one.amplitude('00') == approx(1)


def test_controlled_gate_matches_dense_cnot():
    controlled = GateOp(X, ('t',), controls=('c',))
    assert np.allclose(compose([controlled], ('c', 't'), (2, 2)), CNOT)


def test_invalid_gates():
    with raises(NonUnitaryError):
        GateOp(np.array([[1, 1], [0, 1]]), ('a',))
    with raises(NonUnitaryError, match='square'):
        GateOp(np.ones((2, 3)), ('a',))
    with raises(RegisterError, match='control values'):
        GateOp(X, ('a',), controls=('b', 'c'), control_values=(1,))
    state = init_state(Register.qubits('a', 'b'), 0)
    with raises(RegisterError, match='unknown sites'):
        apply_gate(state, named('X', 'z'))
    with raises(RegisterError, match='does not match'):
        apply_gate(state, named('CNOT', 'a'))


def test_state_must_be_normalized():
    with raises(ValueError, match='not normalized'):
        PureState(Register.qubits('a'), [1, 1])


def test_bell_state_distribution_and_marginal():
    state = apply_gates(init_state(Register.qubits('a', 'b'), 0), [named('H', 'a'), named('CNOT', 'a', 'b')])
    distribution = born_distribution(state, ['a', 'b'])
    assert distribution == {(0, 0): approx(0.5), (1, 1): approx(0.5)}
    assert distribution.marginal([1]) == {(0,): approx(0.5), (1,): approx(0.5)}


def test_born_distribution_follows_requested_order():
    state = init_state(Register.qubits('a', 'b', 'c'), 0b110)
    assert born_distribution(state, ['c', 'a']) == {(0, 1): approx(1)}


def test_outcome_distribution_validation():
    with raises(ValueError, match='sum'):
        OutcomeDistribution({(0,): 0.5})
    with raises(ValueError, match='Negative'):
        OutcomeDistribution({(0,): 1.5, (1,): -0.5})
    clamped = OutcomeDistribution({(0,): 1.0, (1,): -1e-14})
    assert clamped[(1,)] == 0.0


def test_project_and_drop():
    state = apply_gate(init_state(Register.qubits('a', 'b'), 0), named('H', 'a'))
    probability, post = project_and_drop(state, 'a', 1)
    assert probability == approx(0.5)
    assert post.labels == ('b',)
    with raises(ZeroProbabilityBranch):
        project_and_drop(state, 'b', 1)
    assert [outcome for outcome, _, _ in branches(state, 'b')] == [0]


def test_permute_and_tensor(rng):
    a, b = random_state(rng, 'a'), random_state(rng, 'b')
    ab = tensor(a, b)
    ba = permute(ab, ['b', 'a'])
    assert np.allclose(ba.amplitudes, np.kron(b.amplitudes, a.amplitudes))
    with raises(RegisterError, match='permutation'):
        permute(ab, ['a'])


def test_states_equal_ignores_global_phase(rng):
    state = random_state(rng, 'a', 'b')
    rotated = PureState(state.register, np.exp(0.7j) * state.amplitudes)
    assert states_equal(state, rotated)
    assert not states_equal(state, apply_gate(state, named('X', 'a')))


def test_capacity(monkeypatch):
    monkeypatch.setenv('QDISPLACE_MAX_QUBITS', '3')
    with raises(CapacityError):
        init_state(Register.qubits('a', 'b', 'c', 'd'), 0)
    check_capacity(Register.qubits('a', 'b', 'c', 'd'), cap=4)


def test_invalid_capacity_override_falls_back(monkeypatch):
    monkeypatch.setenv('QDISPLACE_MAX_QUBITS', 'many')
    with warns(UserWarning, match='QDISPLACE_MAX_QUBITS'):
        check_capacity(Register.qubits('a'))


def test_merge_and_split_keep_amplitudes(rng):
    state = random_state(rng, 'a', 'b', 'c')
    merged = merge_sites(state, ('b', 'c'), 'bc')
    assert merged.register.sites == (('a', 2), ('bc', 4))
    assert np.array_equal(merged.amplitudes, state.amplitudes)
    restored = split_site(merged, 'bc', [('b', 2), ('c', 2)])
    assert restored.register == state.register
    with raises(RegisterError, match='contiguous'):
        merge_sites(state, ('a', 'c'), 'ac')
    with raises(RegisterError, match='empty group'):
        merge_sites(state, (), 'none')


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_gates_preserve_norm(seed):
    rng = np.random.default_rng(seed)
    state = random_state(rng, 'a', 'b', 'c')
    gate = GateOp(random_unitary(rng, 4), ('c', 'a'))
    after = apply_gate(state, gate)
    assert np.linalg.norm(after.amplitudes) == approx(1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_gate_sequence_matches_composed_matrix(seed):
    rng = np.random.default_rng(seed)
    state = random_state(rng, 'a', 'b', 'c')
    gates = [
        GateOp(random_unitary(rng, 2), ('b',)),
        GateOp(random_unitary(rng, 4), ('c', 'a')),
        GateOp(H, ('a',), controls=('b',)),
    ]
    dense = compose(gates, state.labels, state.register.dims)
    assert np.allclose(apply_gates(state, gates).amplitudes, dense @ state.amplitudes)
    assert np.allclose(apply_gates(apply_gates(state, gates), daggers(gates)).amplitudes, state.amplitudes)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_marginals_are_consistent(seed):
    rng = np.random.default_rng(seed)
    state = random_state(rng, 'a', 'b', 'c')
    joint = born_distribution(state, ['a', 'b', 'c'])
    direct = born_distribution(state, ['b'])
    assert joint.marginal([1]).tv_distance(direct) < 1e-12
    summed = {}
    for outcome in range(2):
        probability, post = project_and_drop(state, 'a', outcome)
        for key, p in born_distribution(post, ['b']).items():
            summed[key] = summed.get(key, 0.0) + probability * p
    assert OutcomeDistribution(summed).tv_distance(direct) < 1e-12

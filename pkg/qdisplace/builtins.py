"""Built-in scenarios: two parallel CHSH tests with a joint measurement at the
middle party, and entanglement swapping towards a central station, each with
their displaced counter-models."""
from __future__ import annotations
from dataclasses import dataclass, replace
from math import pi, sqrt
from typing import Callable

import numpy as np

from .bell_ops import ChshSettings, canonical_chsh_settings
from .entanglement import coarsen
from .exceptions import ScenarioError
from .gates import named
from .qsim import PureState, Register
from .scenario import (
    Amplitudes, BellPair, GateStep, Instrument, Scenario, bsm_classes, swap_classes
)
from .spacetime import Event

RABELO_SITES = ('A', 'C_A', 'C_B', 'B')
# added to the C_B and B angles; C_B directions must lie off the z and x axes
RABELO_TILT = pi / 8
BANCAL_SITES = ('A', 'C1_A', 'C2_A', 'C2_B', 'C1_B', 'B')


def lambda_state(sites=RABELO_SITES) -> PureState:
    """(I⊗U⊗I) applied to two Φ+ pairs, written out term by term."""
    amplitude = 1 / (2 * sqrt(2))
    terms = {
        '0000': 1, '0011': 1, '0100': 1, '0111': 1,
        '1010': 1, '1001': 1, '1110': -1, '1101': -1,
    }
    amplitudes = np.zeros(16, dtype=np.complex128)
    for bits, sign in terms.items():
        amplitudes[int(bits, 2)] = sign * amplitude
    return PureState(Register.qubits(*sites), amplitudes)


def rabelo_chsh_settings(wing: str) -> ChshSettings:
    """Canonical settings, with the C_B and B wings turned by RABELO_TILT."""
    settings = canonical_chsh_settings(wing)
    if wing not in ('C_B', 'B'):
        return settings
    first, second = settings.angles
    return ChshSettings.from_angles(wing, first + RABELO_TILT, second + RABELO_TILT)


def _chsh(wing: str, setting: int, site: str, prefix=(), settings=canonical_chsh_settings) -> Instrument:
    rotation = settings(wing).rotation(setting, site)
    return Instrument((site,), rotation=tuple(prefix) + (rotation,))


def _charlie_product(setting: int, prefix=()) -> Instrument:
    rotation = tuple(prefix) + (
        rabelo_chsh_settings('C_A').rotation(setting, 'C_A'),
        rabelo_chsh_settings('C_B').rotation(setting, 'C_B'),
    )
    return Instrument(('C_A', 'C_B'), rotation=rotation)


def _rabelo(name: str, recipe: tuple, charlie: dict) -> Scenario:
    return Scenario(
        name=name,
        register=Register.qubits(*RABELO_SITES),
        recipe=recipe,
        rounds={'main': ('A', 'C', 'B')},
        custody={'main': {'A': ('A',), 'C': ('C_A', 'C_B'), 'B': ('B',)}},
        settings={
            'A': {'A1': _chsh('A', 0, 'A'), 'A2': _chsh('A', 1, 'A')},
            'C': charlie,
            'B': {
                'B1': _chsh('B', 0, 'B', settings=rabelo_chsh_settings),
                'B2': _chsh('B', 1, 'B', settings=rabelo_chsh_settings),
            },
        }
    )


def rabelo_original() -> Scenario:
    return _rabelo(
        'rabelo-original',
        (BellPair(('A', 'C_A')), BellPair(('C_B', 'B'))),
        {
            'C1': _charlie_product(0),
            'C2': _charlie_product(1),
            'C3': Instrument(('C_A', 'C_B'), bsm_classes(), (named('U', 'C_A', 'C_B'),)),
        }
    )


def rabelo_displaced() -> Scenario:
    undo = (named('U†', 'C_A', 'C_B'),)
    return _rabelo(
        'rabelo-displaced',
        (Amplitudes(lambda_state()),),
        {
            'C1': _charlie_product(0, undo),
            'C2': _charlie_product(1, undo),
            'C3': Instrument(('C_A', 'C_B'), bsm_classes()),
        }
    )


def rabelo_ququart() -> Scenario:
    return replace(
        coarsen(rabelo_displaced(), ('C_A', 'C_B'), 'C'),
        name='rabelo-ququart'
    )


SWAP_EVENTS = {'C1_A': 'C_A', 'C2_A': 'C_A', 'C2_B': 'C_B', 'C1_B': 'C_B'}


def _bancal(name: str, register: Register, recipe: tuple, wings: dict, station: Instrument, custody: dict) -> Scenario:
    return Scenario(
        name=name,
        register=register,
        recipe=recipe,
        rounds={'selftest': ('A', 'C_A', 'C_B', 'B'), 'send': ('A', 'C', 'B')},
        custody={
            'selftest': {'A': ('A',), 'B': ('B',), **custody['selftest']},
            'send': {'A': ('A',), 'B': ('B',), **custody['send']},
        },
        settings={
            'A': {'A1': _chsh('A', 0, 'A'), 'A2': _chsh('A', 1, 'A')},
            **wings,
            'C': {'BSM': station},
            'B': {'B1': _chsh('B', 0, 'B'), 'B2': _chsh('B', 1, 'B')},
        }
    )


def bancal_reference() -> Scenario:
    return _bancal(
        'bancal-reference',
        Register.qubits('A', 'C_A', 'C_B', 'B'),
        (BellPair(('A', 'C_A')), BellPair(('C_B', 'B'))),
        {
            'C_A': {'CA1': _chsh('C_A', 0, 'C_A'), 'CA2': _chsh('C_A', 1, 'C_A')},
            'C_B': {'CB1': _chsh('C_B', 0, 'C_B'), 'CB2': _chsh('C_B', 1, 'C_B')},
        },
        Instrument(('C_A', 'C_B'), bsm_classes(), (named('U', 'C_A', 'C_B'),)),
        {
            'selftest': {'C_A': ('C_A',), 'C_B': ('C_B',)},
            'send': {'C': ('C_A', 'C_B')},
        }
    )


_BANCAL_CUSTODY = {
    'selftest': {'C_A': ('C1_A', 'C2_A'), 'C_B': ('C2_B', 'C1_B')},
    'send': {'C': ('C1_A', 'C2_A', 'C2_B', 'C1_B')},
}
_THREE_PAIRS = (BellPair(('A', 'C1_A')), BellPair(('C2_A', 'C2_B')), BellPair(('C1_B', 'B')))


def bancal_classical() -> Scenario:
    """C_A and C_B swap entanglement locally and only report their outcomes."""
    return _bancal(
        'bancal-classical',
        Register.qubits(*BANCAL_SITES),
        _THREE_PAIRS,
        {
            'C_A': {'CA1': _chsh('C_A', 0, 'C1_A'), 'CA2': _chsh('C_A', 1, 'C1_A')},
            'C_B': {'CB1': _chsh('C_B', 0, 'C1_B'), 'CB2': _chsh('C_B', 1, 'C1_B')},
        },
        Instrument(
            ('C1_A', 'C2_A', 'C2_B', 'C1_B'),
            swap_classes(),
            (named('U', 'C1_A', 'C2_A'), named('U', 'C2_B', 'C1_B')),
            SWAP_EVENTS
        ),
        _BANCAL_CUSTODY
    )


def bancal_unentangled() -> Scenario:
    """The swapping unitaries are moved into the state; C reads out all four qubits."""
    undo_a = (named('U†', 'C1_A', 'C2_A'),)
    undo_b = (named('U†', 'C2_B', 'C1_B'),)
    return _bancal(
        'bancal-unentangled',
        Register.qubits(*BANCAL_SITES),
        _THREE_PAIRS + (
            GateStep(named('U', 'C1_A', 'C2_A')),
            GateStep(named('U', 'C2_B', 'C1_B')),
        ),
        {
            'C_A': {
                'CA1': _chsh('C_A', 0, 'C1_A', undo_a),
                'CA2': _chsh('C_A', 1, 'C1_A', undo_a),
            },
            'C_B': {
                'CB1': _chsh('C_B', 0, 'C1_B', undo_b),
                'CB2': _chsh('C_B', 1, 'C1_B', undo_b),
            },
        },
        Instrument(('C1_A', 'C2_A', 'C2_B', 'C1_B'), swap_classes()),
        _BANCAL_CUSTODY
    )


def bancal_ququart() -> Scenario:
    scenario = coarsen(bancal_unentangled(), ('C1_A', 'C2_A'), 'C_A')
    scenario = coarsen(scenario, ('C2_B', 'C1_B'), 'C_B')
    return replace(scenario, name='bancal-ququart')


BUILTINS: dict[str, Callable[[], Scenario]] = {
    'rabelo-original': rabelo_original,
    'rabelo-displaced': rabelo_displaced,
    'rabelo-ququart': rabelo_ququart,
    'bancal-reference': bancal_reference,
    'bancal-classical': bancal_classical,
    'bancal-unentangled': bancal_unentangled,
    'bancal-ququart': bancal_ququart,
}


def build_builtin(name: str) -> Scenario:
    if name not in BUILTINS:
        raise ScenarioError(f'Unknown builtin {name!r}; known: {sorted(BUILTINS)}')
    return BUILTINS[name]()


@dataclass(frozen=True)
class BuiltinLayout:
    events: tuple[Event, ...]
    party_events: dict
    site_factors: dict


def _bancal_events(reversed: bool) -> tuple[Event, ...]:
    t = -2.0 if reversed else 2.0
    return (
        Event('A', 0.0, (-3.0,)),
        Event('C_A', 0.0, (-1.0,)),
        Event('C', t, (0.0,)),
        Event('C_B', 0.0, (1.0,)),
        Event('B', 0.0, (3.0,)),
    )


def builtin_layout(name: str, reversed: bool = False) -> BuiltinLayout:
    """Spacetime events and factor assignment under which `name` is local.

    With `reversed`, the central station precedes C_A and C_B.
    """
    if name not in BUILTINS:
        raise ScenarioError(f'Unknown builtin {name!r}; known: {sorted(BUILTINS)}')
    if name.startswith('rabelo'):
        events = (Event('A', 0.0, (-2.0,)), Event('C', 0.0, (0.0,)), Event('B', 0.0, (2.0,)))
        sites = {'A': 'A', 'B': 'B'}
        merged = name == 'rabelo-ququart'
        sites.update({'C': 'C'} if merged else {'C_A': 'C', 'C_B': 'C'})
        return BuiltinLayout(events, {'A': 'A', 'C': 'C', 'B': 'B'}, sites)
    left, right = ('C>C_A', 'C>C_B') if reversed else ('C_A>C', 'C_B>C')
    if name in ('bancal-reference', 'bancal-ququart'):
        sites = {'C_A': left, 'C_B': right}
    else:
        sites = {'C1_A': left, 'C2_A': left, 'C2_B': right, 'C1_B': right}
    sites.update({'A': 'A', 'B': 'B'})
    party_events = {'A': 'A', 'C_A': 'C_A', 'C_B': 'C_B', 'C': 'C', 'B': 'B'}
    return BuiltinLayout(_bancal_events(reversed), party_events, sites)

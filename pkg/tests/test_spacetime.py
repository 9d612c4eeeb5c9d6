from pytest import mark, raises

from qdisplace.builtins import BUILTINS, build_builtin, builtin_layout
from qdisplace.displacement import displace_measurement
from qdisplace.exceptions import ScenarioError, SpacetimeError
from qdisplace.spacetime import (
    Event, check_footprint, classify_pair, factor_layout, maximal_paths, path_id,
    timelike_order, validate
)


def test_classify_pair():
    origin = Event('o', 0, (0,))
    assert classify_pair(origin, Event('a', 2, (1,))) == 'timelike'
    assert classify_pair(origin, Event('b', 1, (3,))) == 'spacelike'
    assert classify_pair(origin, Event('c', 1, (1,))) == 'lightlike'
    assert classify_pair(Event('d', 0, (0, 0)), Event('e', 1, (0, 1))) == 'lightlike'
    assert classify_pair(Event('f', -3), origin) == 'timelike'
    with raises(SpacetimeError, match='identical'):
        classify_pair(origin, Event('g', 0, (0,)))


def test_events_take_at_most_two_spatial_coordinates():
    assert Event('a', 1, 2.0).x == (2.0,)
    with raises(SpacetimeError, match='at most 2'):
        Event('a', 0, (0, 0, 0))


def test_timelike_order_points_forward():
    graph = timelike_order([Event('late', 5, (0,)), Event('early', 0, (0,))])
    assert list(graph.edges) == [('early', 'late')]
    with raises(SpacetimeError, match='Duplicate'):
        timelike_order([Event('a', 0), Event('a', 1)])


def test_single_event_is_a_path():
    assert maximal_paths([Event('only', 0, (0,))]) == [('only',)]


def test_chain_skips_implied_links():
    events = [Event('a', 0, (0,)), Event('b', 1, (0,)), Event('c', 2, (0,))]
    assert maximal_paths(events) == [('a', 'b', 'c')]


def test_diamond_has_two_paths():
    events = [
        Event('bottom', 0, (0,)), Event('left', 2, (-1,)),
        Event('right', 2, (1,)), Event('top', 4, (0,)),
    ]
    assert maximal_paths(events) == [('bottom', 'left', 'top'), ('bottom', 'right', 'top')]


def test_central_station_after_its_wings():
    layout = builtin_layout('bancal-reference')
    assert maximal_paths(layout.events) == [('A',), ('C_A', 'C'), ('C_B', 'C'), ('B',)]


def test_central_station_before_its_wings():
    layout = builtin_layout('bancal-reference', reversed=True)
    assert maximal_paths(layout.events) == [('A',), ('C', 'C_A'), ('C', 'C_B'), ('B',)]


def test_spacelike_parties_have_zero_length_paths():
    layout = builtin_layout('rabelo-original')
    assert maximal_paths(layout.events) == [('A',), ('C',), ('B',)]


def test_factor_layout():
    layout = factor_layout([('A',), ('C_A', 'C'), ('C_B', 'C')])
    assert set(layout.factors) == {'A', 'C_A>C', 'C_B>C'}
    assert layout.event_factors['C'] == ('C_A>C', 'C_B>C')
    assert layout.passes('C_A>C', 'C')
    assert not layout.passes('C_A>C', 'C_B')
    assert path_id(('x', 'y')) == 'x>y'


def test_check_footprint():
    layout = factor_layout([('A',), ('C_A', 'C'), ('C_B', 'C')])
    factors = {'a': 'A', 'ca': ('C_A', 'C'), 'cb': 'C_B>C'}
    assert check_footprint(layout, {'C': ['ca', 'cb']}, factors) == []
    violations = check_footprint(layout, {'C_A': ['ca', 'cb']}, factors)
    assert [(v.site, v.factor) for v in violations] == [('cb', 'C_B>C')]
    with raises(SpacetimeError, match='unknown factor'):
        check_footprint(layout, {'A': ['a']}, {'a': 'Z'})
    with raises(SpacetimeError, match='not assigned'):
        check_footprint(layout, {'A': ['x']}, factors)


@mark.parametrize('name', sorted(BUILTINS))
@mark.parametrize('reversed', [False, True])
def test_builtins_are_local_in_their_layout(name, reversed):
    layout = builtin_layout(name, reversed=reversed)
    violations = validate(
        build_builtin(name), factor_layout(maximal_paths(layout.events)),
        layout.site_factors, layout.party_events
    )
    assert violations == []


def relocated(name: str, event: str) -> list:
    layout = builtin_layout(name)
    return validate(
        build_builtin(name), factor_layout(maximal_paths(layout.events)),
        layout.site_factors, {**layout.party_events, 'C': event}
    )


def test_joint_measurement_at_a_wing_is_flagged():
    violations = relocated('bancal-reference', 'C_A')
    assert len(violations) == 1
    violation = violations[0]
    assert (violation.event, violation.site, violation.party, violation.setting) == ('C_A', 'C_B', 'C', 'BSM')
    assert str(violation) == 'C_A touches C_B whose factor C_B>C misses it (C.BSM)'


def test_wing_readouts_ignore_relocation():
    assert relocated('bancal-classical', 'C_A') == []


def test_station_readouts_of_the_unentangled_model_are_flagged():
    violations = relocated('bancal-unentangled', 'C_A')
    assert sorted(str(v) for v in violations) == [
        'C_A touches C1_B whose factor C_B>C misses it (C.BSM)',
        'C_A touches C2_B whose factor C_B>C misses it (C.BSM)',
    ]
    assert build_builtin('bancal-unentangled').instrument('C', 'BSM').events == {}


def test_displaced_readout_events():
    scenario = displace_measurement(build_builtin('bancal-reference'), 'C', 'BSM', events=('C_A', 'C_B'))
    layout = builtin_layout('bancal-reference')
    factors = dict(layout.site_factors)
    record = scenario.displacements[0]
    factors.update(dict.fromkeys(record.alice_sites, 'C_A>C'))
    factors.update(dict.fromkeys(record.bob_sites, 'C_B>C'))
    party_events = {**layout.party_events, 'C': 'C_A'}
    violations = validate(scenario, factor_layout(maximal_paths(layout.events)), factors, party_events)
    assert violations == []


def test_validate_needs_every_site_and_party():
    layout = builtin_layout('rabelo-original')
    paths = factor_layout(maximal_paths(layout.events))
    with raises(SpacetimeError, match='not assigned'):
        validate(build_builtin('rabelo-original'), paths, {'A': 'A'}, layout.party_events)
    with raises(SpacetimeError, match='no event'):
        validate(build_builtin('rabelo-original'), paths, layout.site_factors, {'A': 'A'})
    with raises(ScenarioError):
        builtin_layout('nope')


def test_six_event_graph_with_four_factors():
    events = [
        Event('A', 0, (-10,)), Event('B', 0, (-1,)), Event('C', 2, (0,)),
        Event('D', 1, (-10,)), Event('E', 0, (1,)), Event('F', 0, (10,)),
    ]
    layout = factor_layout(maximal_paths(events))
    assert layout.paths == (('A', 'D'), ('B', 'C'), ('E', 'C'), ('F',))
    second, third = layout.paths[1], layout.paths[2]
    assert layout.event_factors['C'] == (path_id(second), path_id(third))
    assert layout.event_factors['B'] == (path_id(second),)
    assert layout.event_factors['F'] == ('F',)

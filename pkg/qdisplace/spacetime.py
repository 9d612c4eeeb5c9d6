"""Causal structure of measurement events and the locality rule it imposes
on which Hilbert-space factors an event may act on."""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence, Union

import networkx as nx
import numpy as np

from .constants import LIGHTLIKE_TOLERANCE
from .exceptions import SpacetimeError
from .utils import ensure_unique

logger = logging.getLogger(__name__)

Separation = Literal['timelike', 'lightlike', 'spacelike']


@dataclass(frozen=True)
class Event:
    label: str
    t: float
    x: tuple[float, ...] = ()

    def __post_init__(self):
        x = (self.x,) if np.isscalar(self.x) else tuple(self.x)
        if len(x) > 2:
            raise SpacetimeError(f'Event {self.label!r} has {len(x)} spatial coordinates; at most 2 are supported')
        object.__setattr__(self, 'x', tuple(float(c) for c in x))
        object.__setattr__(self, 't', float(self.t))


def _interval(e1: Event, e2: Event) -> float:
    width = max(len(e1.x), len(e2.x))
    x1 = np.pad(e1.x, (0, width - len(e1.x)))
    x2 = np.pad(e2.x, (0, width - len(e2.x)))
    return (e2.t - e1.t) ** 2 - float(np.sum((x2 - x1) ** 2))


def classify_pair(e1: Event, e2: Event, tol: float = LIGHTLIKE_TOLERANCE) -> Separation:
    if e1.t == e2.t and _interval(e1, e2) == 0:
        raise SpacetimeError(f'Events {e1.label!r} and {e2.label!r} have identical coordinates')
    interval = _interval(e1, e2)
    if interval > tol:
        return 'timelike'
    if interval < -tol:
        return 'spacelike'
    return 'lightlike'


def timelike_order(events: Sequence[Event]) -> nx.DiGraph:
    """Edges run from earlier to later events of every timelike pair."""
    ensure_unique([e.label for e in events], what='event label', error=SpacetimeError)
    graph = nx.DiGraph()
    graph.add_nodes_from(e.label for e in events)
    for i, e1 in enumerate(events):
        for e2 in events[i + 1:]:
            if classify_pair(e1, e2) != 'timelike':
                continue
            if e1.t < e2.t:
                graph.add_edge(e1.label, e2.label)
            else:
                graph.add_edge(e2.label, e1.label)
    return graph


def maximal_paths(events: Sequence[Event]) -> list[tuple[str, ...]]:
    """Inextendable timelike chains; an isolated event is a zero-length path."""
    order = [e.label for e in events]
    hasse = nx.transitive_reduction(timelike_order(events))
    sources = [n for n in order if hasse.in_degree(n) == 0]
    sinks = [n for n in order if hasse.out_degree(n) == 0]
    paths = []
    for source in sources:
        if hasse.out_degree(source) == 0:
            paths.append((source,))
            continue
        for sink in sinks:
            for path in nx.all_simple_paths(hasse, source, sink):
                paths.append(tuple(path))
    paths.sort(key=lambda path: [order.index(label) for label in path])
    logger.debug('%d events, %d maximal paths', len(order), len(paths))
    return paths


def path_id(path: Sequence[str]) -> str:
    return '>'.join(path)


@dataclass(frozen=True)
class FactorLayout:
    paths: tuple[tuple[str, ...], ...]
    # factor id -> path
    factors: dict = field(default_factory=dict)
    # event -> factor ids of the paths through it
    event_factors: dict = field(default_factory=dict)

    def passes(self, factor: str, event: str) -> bool:
        return event in self.factors[factor]


def factor_layout(paths: Sequence[Sequence[str]]) -> FactorLayout:
    factors = {path_id(path): tuple(path) for path in paths}
    event_factors = {}
    for factor, path in factors.items():
        for event in path:
            event_factors.setdefault(event, []).append(factor)
    return FactorLayout(
        paths=tuple(tuple(p) for p in paths),
        factors=factors,
        event_factors={event: tuple(ids) for event, ids in event_factors.items()}
    )


@dataclass(frozen=True)
class Violation:
    event: str
    site: str
    factor: str
    # party and setting when the footprint came from a scenario
    party: str = ''
    setting: str = ''

    def __str__(self):
        origin = f' ({self.party}.{self.setting})' if self.party else ''
        return f'{self.event} touches {self.site} whose factor {self.factor} misses it{origin}'


SiteFactor = Union[str, Sequence[str]]


def _factor_of(site: str, site_factors: Mapping[str, SiteFactor], layout: FactorLayout) -> str:
    if site not in site_factors:
        raise SpacetimeError(f'Site {site!r} is not assigned to a factor')
    factor = site_factors[site]
    factor = factor if isinstance(factor, str) else path_id(factor)
    if factor not in layout.factors:
        raise SpacetimeError(f'Site {site!r} is assigned to unknown factor {factor!r}')
    return factor


def check_footprint(
    layout: FactorLayout,
    footprint: Mapping[str, Sequence[str]],
    site_factors: Mapping[str, SiteFactor]
) -> list[Violation]:
    """Violations among `footprint` (event -> sites acted on at it)."""
    violations = []
    for event, sites in footprint.items():
        for site in sites:
            factor = _factor_of(site, site_factors, layout)
            if not layout.passes(factor, event):
                violations.append(Violation(event, site, factor))
    return violations


def validate(
    scenario,
    layout: FactorLayout,
    site_factors: Mapping[str, SiteFactor],
    party_events: Mapping[str, str]
) -> list[Violation]:
    """Every site an instrument touches must belong to a path through its event."""
    unmapped = [site for site in scenario.register.labels if site not in site_factors]
    if unmapped:
        raise SpacetimeError(f'Sites {unmapped} are not assigned to a factor')
    violations = []
    for party, instruments in scenario.settings.items():
        if party not in party_events:
            raise SpacetimeError(f'Party {party!r} has no event')
        for name, instrument in instruments.items():
            footprint = {}
            for site in instrument.support:
                event = instrument.events.get(site, party_events[party])
                footprint.setdefault(event, []).append(site)
            for violation in check_footprint(layout, footprint, site_factors):
                violations.append(Violation(
                    violation.event, violation.site, violation.factor, party, name
                ))
    return violations

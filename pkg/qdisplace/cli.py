"""Command line entry point: behavior tables, comparisons, localization runs
and spacetime checks, each emitted as a JSON report."""
from __future__ import annotations
import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from .builtins import BUILTINS, build_builtin, builtin_layout
from .constants import DISTRIBUTION_TOLERANCE
from .displacement import displace_measurement
from .entanglement import Bipartition, entropy, measurement_verdict
from .exceptions import SchemaError, UnsupportedMeasurement
from .localization import (
    build, covert_distribution, run_branching, run_deferred, success_probability
)
from .scenario import Scenario, behavior, compare_behaviors, condition_on_success
from .serialization import (
    behavior_from_json, behavior_to_json, digest, distribution_to_json, dumps,
    events_from_json, format_probability, load_json, measurement_from_descriptor,
    scenario_from_json, scenario_to_json, state_from_descriptor
)
from .spacetime import check_footprint, factor_layout, maximal_paths, validate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT_ERROR = 2


def _scenario_input(args) -> tuple[Scenario, str]:
    if args.builtin:
        scenario = build_builtin(args.builtin)
        return scenario, digest(dumps(scenario_to_json(scenario)))
    path = Path(args.scenario)
    document = load_json(path)
    return scenario_from_json(document, name=path.stem), digest(path.read_bytes())


def _displace(scenario: Scenario, targets: Sequence[str], levels: int) -> Scenario:
    for target in targets:
        party, sep, setting = target.partition('.')
        if not sep:
            raise SchemaError(f'Expected PARTY.SETTING, got {target!r}', ('--displace',))
        scenario = displace_measurement(scenario, party, setting, levels)
    return scenario


def _verdicts(scenario: Scenario, bipartition: Bipartition) -> dict:
    result = {}
    for party, instruments in scenario.settings.items():
        result[party] = {}
        for name, instrument in instruments.items():
            try:
                verdict = measurement_verdict(instrument, bipartition, scenario.register)
            except UnsupportedMeasurement as e:
                result[party][name] = {'unsupported': str(e)}
                continue
            result[party][name] = {
                'entangled': verdict.entangled,
                'outcomes': {
                    o.label: [format_probability(c) for c in o.coefficients]
                    for o in verdict.outcomes
                }
            }
    return result


def cmd_behavior(args) -> tuple[dict, dict]:
    scenario, inputs = _scenario_input(args)
    if args.displace:
        scenario = _displace(scenario, args.displace, args.levels)
    if args.dump_scenario:
        return {'scenario': scenario_to_json(scenario)}, {}
    logger.info('Evaluating behavior of %r', scenario.name)
    table = behavior(scenario, workers=args.workers)
    if args.condition_on_success:
        table = condition_on_success(table)
    results = {
        'scenario': scenario.name,
        'inputs_sha256': inputs,
        'combinations': len(table),
        'behavior': behavior_to_json(table),
    }
    if args.bipartition:
        bipartition = Bipartition.parse(args.bipartition)
        results['bipartition'] = str(bipartition)
        results['entropy'] = format_probability(entropy(scenario.initial_state(), bipartition))
        results['verdicts'] = _verdicts(scenario, bipartition)
    return results, {}


def _load_table(source: str, workers: int):
    """A behavior JSON file, a scenario JSON file or a builtin name."""
    path = Path(source)
    if not path.exists():
        if source in BUILTINS:
            return behavior(build_builtin(source), workers=workers), digest(source)
        raise SchemaError(f'{source!r} is neither a file nor a builtin; builtins: {sorted(BUILTINS)}')
    document = load_json(path)
    if isinstance(document, dict) and 'sites' in document:
        return behavior(scenario_from_json(document, name=path.stem), workers=workers), digest(path.read_bytes())
    return behavior_from_json(document), digest(path.read_bytes())


def cmd_compare(args) -> tuple[dict, dict]:
    first, first_digest = _load_table(args.first, args.workers)
    second, second_digest = _load_table(args.second, args.workers)
    if args.condition_on_success:
        first, second = condition_on_success(first), condition_on_success(second)
    alignment = load_json(args.alignment) if args.alignment else None
    comparison = compare_behaviors(first, second, tol=args.tol, alignment=alignment)
    results = {
        'inputs_sha256': [first_digest, second_digest],
        'max_tv': format_probability(comparison.max_tv),
        'tolerance': args.tol,
        'worst': list(comparison.worst),
        'distances': {
            f'{round_type}:{settings}': format_probability(d)
            for (round_type, settings), d in sorted(comparison.distances.items())
        },
    }
    return results, {'equivalent': comparison.equivalent}


def cmd_localize(args) -> tuple[dict, dict]:
    if args.mode == 'deferred' and args.levels != 1:
        raise SchemaError(
            f'Deferred mode simulates every wire at once and supports one level only, got {args.levels};'
            ' use --mode branching',
            ('--levels',)
        )
    rng = np.random.default_rng(args.seed)
    target = measurement_from_descriptor(args.measurement, rng)
    phi = state_from_descriptor(args.state, rng)
    circuit = build(target, args.levels)
    if args.mode == 'deferred':
        run = run_deferred(circuit, phi)
    else:
        run = run_branching(target, args.levels, phi)
    oracle = target.born(phi)
    exact = success_probability(args.levels)
    per_level = {
        str(level): {
            'probability': format_probability(run.level_probability(level)),
            'tv': format_probability(run.conditional(level).tv_distance(oracle)),
        }
        for level in run.levels()
    }
    overall_tv = run.conditional().tv_distance(oracle)
    results = {
        'inputs_sha256': digest(dumps({
            'measurement': args.measurement, 'state': args.state,
            'seed': args.seed, 'levels': args.levels, 'mode': args.mode
        })),
        'labels': list(target.labels),
        'state': [[float(a.real), float(a.imag)] for a in phi],
        'ancilla_pairs': circuit.n_pairs,
        'success_probability': format_probability(run.success_probability),
        'expected_success': str(exact),
        'levels': per_level,
        'conditional': distribution_to_json(run.conditional()),
        'oracle': distribution_to_json(oracle),
        'tv': format_probability(overall_tv),
    }
    if args.covert:
        covert = covert_distribution(run.distribution, target)
        results['covert'] = distribution_to_json(covert)
        results['covert_tv'] = format_probability(covert.tv_distance(oracle))
    checks = {
        'success_probability': abs(run.success_probability - float(exact)) <= args.tol,
        'conditional_matches_oracle': all(
            run.conditional(level).tv_distance(oracle) <= args.tol for level in run.levels()
        ),
    }
    return results, checks


def _relocations(pairs: Sequence[str]) -> dict:
    relocations = {}
    for pair in pairs:
        party, sep, event = pair.partition('=')
        if not sep:
            raise SchemaError(f'Expected PARTY=EVENT, got {pair!r}', ('--relocate',))
        relocations[party] = event
    return relocations


def _layout_report(events, site_factors) -> tuple[dict, object]:
    paths = maximal_paths(events)
    layout = factor_layout(paths)
    report = {
        'paths': [list(path) for path in paths],
        'factors': {factor: list(path) for factor, path in layout.factors.items()},
        'event_factors': {event: list(ids) for event, ids in layout.event_factors.items()},
        'site_factors': {
            site: factor if isinstance(factor, str) else '>'.join(factor)
            for site, factor in site_factors.items()
        },
    }
    return report, layout


def cmd_spacetime(args) -> tuple[dict, dict]:
    if args.builtin:
        scenario = build_builtin(args.builtin)
        documented = builtin_layout(args.builtin, reversed=args.reversed)
        party_events = {**documented.party_events, **_relocations(args.relocate)}
        results, layout = _layout_report(documented.events, documented.site_factors)
        violations = validate(scenario, layout, documented.site_factors, party_events)
        results['inputs_sha256'] = digest(dumps({
            'builtin': args.builtin, 'reversed': args.reversed, 'party_events': party_events
        }))
    else:
        if args.relocate:
            raise SchemaError('--relocate applies to builtin layouts only', ('--relocate',))
        path = Path(args.events)
        document = events_from_json(load_json(path))
        results, layout = _layout_report(document.events, document.site_factors)
        violations = check_footprint(layout, document.instrument_sites, document.site_factors)
        results['inputs_sha256'] = digest(path.read_bytes())
    results['violations'] = [str(v) for v in violations]
    return results, {'local': not violations}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='qdisplace',
        description='Check displaced-measurement counter-models and localization protocols exactly.'
    )
    parser.add_argument('-v', '--verbose', action='count', default=0, help='Log progress (-vv for debug records).')
    parser.add_argument('--timing', action='store_true', help='Add wall time to the report.')
    parser.add_argument('-o', '--output', type=Path, help='Write the report here instead of stdout.')
    commands = parser.add_subparsers(dest='command', required=True)

    def scenario_source(command):
        source = command.add_mutually_exclusive_group(required=True)
        source.add_argument('--builtin', choices=sorted(BUILTINS), help='Built-in scenario name.')
        source.add_argument('--scenario', type=Path, help='Scenario JSON file.')

    command = commands.add_parser('behavior', help='Behavior table of a scenario.')
    scenario_source(command)
    command.add_argument('--dump-scenario', action='store_true', help='Emit the scenario JSON and stop.')
    command.add_argument(
        '--displace', action='append', default=[], metavar='PARTY.SETTING',
        help='Displace this two-qubit measurement first. Repeatable.'
    )
    command.add_argument('--levels', type=int, default=1, help='Localization levels used by --displace.')
    command.add_argument('--condition-on-success', action='store_true', help='Drop aborted outcomes.')
    command.add_argument('--bipartition', help="Report verdicts and entropy across e.g. 'A,C_A|C_B,B'.")
    command.add_argument('--workers', type=int, default=1)
    command.set_defaults(handler=cmd_behavior)

    command = commands.add_parser('compare', help='Maximum total-variation distance of two behaviors.')
    command.add_argument('first', help='Behavior JSON, scenario JSON or builtin name.')
    command.add_argument('second', help='Behavior JSON, scenario JSON or builtin name.')
    command.add_argument('--tol', type=float, default=DISTRIBUTION_TOLERANCE)
    command.add_argument('--alignment', type=Path, help='JSON map renaming labels of the second behavior.')
    command.add_argument('--condition-on-success', action='store_true')
    command.add_argument('--workers', type=int, default=1)
    command.set_defaults(handler=cmd_compare)

    command = commands.add_parser('localize', help='Run the localization protocol exactly.')
    command.add_argument(
        '--measurement', default='bsm',
        help='computational, bsm, random or a JSON {"vectors", "labels"} file.'
    )
    command.add_argument('--levels', type=int, default=1)
    command.add_argument('--mode', choices=['deferred', 'branching'], default='branching')
    command.add_argument('--state', default='random', help='random, zero, a Bell kind or JSON amplitudes.')
    command.add_argument('--seed', type=int, default=0)
    command.add_argument('--covert', action='store_true', help='Also report the covert decoder.')
    command.add_argument('--tol', type=float, default=DISTRIBUTION_TOLERANCE)
    command.set_defaults(handler=cmd_localize)

    command = commands.add_parser('spacetime', help='Paths, factor layout and locality violations.')
    source = command.add_mutually_exclusive_group(required=True)
    source.add_argument('events', nargs='?', help='Events JSON file.')
    source.add_argument('--builtin', choices=sorted(BUILTINS), help='Use the documented layout of a builtin.')
    command.add_argument('--reversed', action='store_true', help='Central station precedes the wings.')
    command.add_argument('--relocate', action='append', default=[], metavar='PARTY=EVENT')
    command.set_defaults(handler=cmd_spacetime)
    return parser


def _configure_logging(verbosity: int):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format='%(levelname)s %(name)s: %(message)s'
    )


def main(argv: Sequence[str] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    started = time.perf_counter()
    try:
        results, checks = args.handler(args)
    except (ValueError, OSError) as e:
        print(f'error: {e}', file=sys.stderr)
        return EXIT_INPUT_ERROR
    report = {
        'command': argv,
        'results': results,
        'checks': checks,
        'passed': all(checks.values()),
    }
    if args.timing:
        report['wall_time'] = round(time.perf_counter() - started, 3)
    text = dumps(report)
    if args.output is None:
        sys.stdout.write(text)
    else:
        args.output.write_text(text, encoding='utf-8')
    logger.info('%s finished: %s', args.command, 'passed' if report['passed'] else 'failed')
    return EXIT_OK if report['passed'] else EXIT_FAILED

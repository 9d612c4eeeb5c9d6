from .bell_ops import (
    BellKind, ChshSettings, bell_state, bell_vector, bsm_outcome_map, bsm_unitary,
    canonical_chsh_settings, chsh_scores, uncorrected_teleport_fragment
)
from .builtins import BUILTINS, build_builtin, builtin_layout, lambda_state
from .displacement import displace_measurement, displacement_bipartition
from .entanglement import (
    Bipartition, coarsen, entropy, expand, measurement_verdict, schmidt
)
from .exceptions import (
    CapacityError, NonUnitaryError, QDisplaceError, RegisterError, ScenarioError,
    SchemaError, SpacetimeError, StructureMismatch, UnsupportedMeasurement,
    ZeroProbabilityBranch
)
from .localization import (
    TargetMeasurement, build, decode, min_levels, run_branching, run_deferred,
    success_probability
)
from .qsim import GateOp, OutcomeDistribution, PureState, Register
from .scenario import (
    BehaviorTable, Instrument, Scenario, behavior, compare_behaviors,
    condition_on_success, swap_lookup
)
from .spacetime import Event, classify_pair, factor_layout, maximal_paths, validate

__version__ = '0.1.0'

__all__ = [
    'Register',
    'PureState',
    'GateOp',
    'OutcomeDistribution',
    'BellKind',
    'bell_state',
    'bell_vector',
    'bsm_unitary',
    'bsm_outcome_map',
    'uncorrected_teleport_fragment',
    'ChshSettings',
    'canonical_chsh_settings',
    'chsh_scores',
    'Bipartition',
    'schmidt',
    'entropy',
    'measurement_verdict',
    'coarsen',
    'expand',
    'Instrument',
    'Scenario',
    'BehaviorTable',
    'behavior',
    'compare_behaviors',
    'condition_on_success',
    'swap_lookup',
    'BUILTINS',
    'build_builtin',
    'builtin_layout',
    'lambda_state',
    'displace_measurement',
    'displacement_bipartition',
    'TargetMeasurement',
    'build',
    'decode',
    'run_deferred',
    'run_branching',
    'success_probability',
    'min_levels',
    'Event',
    'classify_pair',
    'maximal_paths',
    'factor_layout',
    'validate',
    'QDisplaceError',
    'RegisterError',
    'NonUnitaryError',
    'ZeroProbabilityBranch',
    'CapacityError',
    'ScenarioError',
    'StructureMismatch',
    'UnsupportedMeasurement',
    'SpacetimeError',
    'SchemaError',
]

from typing import Any


class Sentinel:
    def __init__(self, name: str):
        self.name = name

    def __eq__(self, other):
        return (
            hasattr(other, 'name')
            and
            (self.name == other.name)
            and
            (
                self.__class__.__name__
                ==
                other.__class__.__name__
            )
        )

    def __hash__(self):
        return hash((self.__class__.__name__, self.name))

    def __repr__(self):
        return self.name


unset: Any = Sentinel('unset')

# tolerances shared by every module
UNITARY_TOLERANCE = 1e-10
NORM_TOLERANCE = 1e-10
PROBABILITY_CLAMP = 1e-12
DISTRIBUTION_TOLERANCE = 1e-9
SCHMIDT_CUTOFF = 1e-9
LIGHTLIKE_TOLERANCE = 1e-12
BRANCH_THRESHOLD = 1e-12
EQUIVALENCE_TOLERANCE = 1e-9

# outcomes with smaller probability are not listed in distributions
PROBABILITY_FLOOR = 1e-15

DEFAULT_MAX_QUBITS = 26
MAX_BRANCHING_LEVELS = 4

ABORT = 'abort'

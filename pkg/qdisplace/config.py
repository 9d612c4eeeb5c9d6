"""Runtime configuration read from the environment."""
from __future__ import annotations
import os
from warnings import warn

from .constants import DEFAULT_MAX_QUBITS, unset

MAX_QUBITS_VARIABLE = 'QDISPLACE_MAX_QUBITS'


def max_qubits(override: int = unset) -> int:
    """Dense-mode cap in qubit-equivalents (log2 of the total dimension).

    An explicit `override` wins over the environment variable.
    """
    if override is not unset:
        return int(override)
    raw = os.environ.get(MAX_QUBITS_VARIABLE)
    if raw is None:
        return DEFAULT_MAX_QUBITS
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        warn(
            f'Ignoring {MAX_QUBITS_VARIABLE}={raw!r}: expected a positive'
            f' integer, using the default of {DEFAULT_MAX_QUBITS}'
        )
        return DEFAULT_MAX_QUBITS
    return value

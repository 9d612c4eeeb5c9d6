from __future__ import annotations
from typing import Iterable, Sequence

import numpy as np


def digits(index: int, dims: Sequence[int]) -> tuple[int, ...]:
    """Mixed-radix expansion of `index`, most significant digit first."""
    return tuple(int(d) for d in np.unravel_index(index, tuple(dims)))


def index_of(values: Sequence[int], dims: Sequence[int]) -> int:
    return int(np.ravel_multi_index(tuple(values), tuple(dims)))


def bits_to_str(values: Iterable[int]) -> str:
    return ''.join(str(int(v)) for v in values)


def ensure_unique(labels: Sequence[str], what: str = 'label', error: type = ValueError):
    seen = set()
    duplicated = [label for label in labels if label in seen or seen.add(label)]
    if duplicated:
        raise error(f'Duplicate {what}s: {duplicated}')

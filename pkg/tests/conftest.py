import numpy as np
from pytest import fixture
from scipy.stats import unitary_group

from qdisplace.qsim import PureState, Register


def random_state(rng: np.random.Generator, *labels: str) -> PureState:
    register = Register.qubits(*labels)
    amplitudes = rng.normal(size=register.total_dim) + 1j * rng.normal(size=register.total_dim)
    return PureState(register, amplitudes / np.linalg.norm(amplitudes))


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    return unitary_group.rvs(dim, random_state=rng)


@fixture
def rng():
    return np.random.default_rng(20240521)

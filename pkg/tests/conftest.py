import numpy as np
import pytest

from nonlocal_lab import bell, statevec
from nonlocal_lab.bell import BellKind
from nonlocal_lab.statevec import Ket

TOL = 1e-10


def three_sigma(trials: int, p: float) -> float:
    return 3.0 * np.sqrt(trials * p * (1.0 - p))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def singlet() -> Ket:
    return bell.make_bell(BellKind.PSI_MINUS)


@pytest.fixture
def psi_plus() -> Ket:
    return bell.make_bell(BellKind.PSI_PLUS)


@pytest.fixture
def up_up() -> Ket:
    return statevec.basis_ket((2, 2), (0, 0))


@pytest.fixture
def down_down() -> Ket:
    return statevec.basis_ket((2, 2), (1, 1))


def random_ket(generator: np.random.Generator, dims) -> Ket:
    side = int(np.prod(dims))
    return Ket.from_amplitudes(generator.normal(size=side) + 1j * generator.normal(size=side), dims)

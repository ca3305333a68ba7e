import pytest

from gradsurf.potential import (
    PeriodicPotential,
    QuadraticPotential,
    TablePotential,
    domino_potential,
    lipschitz_truncate,
    sos_abs_potential,
)


@pytest.fixture(scope="session")
def domino():
    return domino_potential()


@pytest.fixture(scope="session")
def sos():
    """Isotropic V(eta) = |eta| on integer heights."""
    return PeriodicPotential.isotropic("int", sos_abs_potential())


@pytest.fixture(scope="session")
def sos_trunc1(sos):
    """|eta| restricted to increments in [-1, 1]."""
    return lipschitz_truncate(sos, 1)


@pytest.fixture(scope="session")
def sos_trunc2(sos):
    return lipschitz_truncate(sos, 2)


@pytest.fixture(scope="session")
def gaussian():
    return PeriodicPotential.isotropic("real", QuadraticPotential(1.0))


@pytest.fixture(scope="session")
def nonconvex():
    """The convexity negative control: V(0)=1, V(+-1)=0."""
    table = TablePotential.from_dict({0: 1.0, 1: 0.0, -1: 0.0})
    return PeriodicPotential.isotropic("int", table)

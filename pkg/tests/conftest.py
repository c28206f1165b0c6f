import pytest

from pball import (Nonlinearity, OperatorConfig, RadialGrid, RiemannianModel,
                   WarpingProfile)


@pytest.fixture(scope="session")
def cfg2():
    return OperatorConfig(p=2.0)


@pytest.fixture(scope="session")
def cfg3():
    return OperatorConfig(p=3.0)


@pytest.fixture(scope="session")
def euclid2():
    return RiemannianModel(2, WarpingProfile.euclidean())


@pytest.fixture(scope="session")
def euclid3():
    return RiemannianModel(3, WarpingProfile.euclidean())


@pytest.fixture(scope="session")
def hyper3():
    return RiemannianModel(3, WarpingProfile.hyperbolic())


@pytest.fixture(scope="session")
def sphere3():
    return RiemannianModel(3, WarpingProfile.spherical())


@pytest.fixture(scope="session")
def grid256():
    return RadialGrid.uniform(256)


@pytest.fixture(scope="session")
def grid1024():
    return RadialGrid.uniform(1024)


@pytest.fixture(scope="session")
def exp_reaction():
    return Nonlinearity.exponential()

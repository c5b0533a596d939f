import pytest

from periodiv.model import ModelParams


@pytest.fixture(scope="session")
def row1() -> ModelParams:
    return ModelParams(delta=0.5, sigma=0.3, mu=1.2, eta=0.2)


@pytest.fixture(scope="session")
def row2() -> ModelParams:
    return ModelParams(delta=1.5, sigma=0.3, mu=0.8, eta=0.5)


@pytest.fixture(scope="session")
def row3() -> ModelParams:
    return ModelParams(delta=1.5, sigma=0.5, mu=0.7, eta=0.7)

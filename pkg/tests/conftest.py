import pytest

from ucdkit import load_bundled_scenario, train


@pytest.fixture(scope="session")
def e1c1():
    return load_bundled_scenario("example1_case1")


@pytest.fixture(scope="session")
def e1c4():
    return load_bundled_scenario("example1_case4")


@pytest.fixture(scope="session")
def e2c1():
    return load_bundled_scenario("example2_case1")


@pytest.fixture(scope="session")
def e2c2():
    return load_bundled_scenario("example2_case2")


@pytest.fixture(scope="session")
def e2c3():
    return load_bundled_scenario("example2_case3")


# training is deterministic and fast; share one model per scenario
@pytest.fixture(scope="session")
def model_e1c1(e1c1):
    return train(e1c1)


@pytest.fixture(scope="session")
def model_e1c4(e1c4):
    return train(e1c4)

import pytest

from vlcsim.scenario import default_scenario


@pytest.fixture(scope="session")
def scenario():
    return default_scenario()


@pytest.fixture(scope="session")
def room(scenario):
    return scenario.room


@pytest.fixture(scope="session")
def params(scenario):
    return scenario.channel

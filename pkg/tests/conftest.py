import pytest

from benchmarks import example_scenario
from experiments import run_scenario


@pytest.fixture(scope="session")
def example1():
    return example_scenario(1)


@pytest.fixture(scope="session")
def example2():
    return example_scenario(2)


@pytest.fixture(scope="session")
def example1_results(example1):
    return run_scenario(example1)


@pytest.fixture(scope="session")
def example2_results(example2):
    return run_scenario(example2)

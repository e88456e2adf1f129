import numpy as np
import pytest

from tlme.bath import BathSpec
from tlme.evolve import ExperimentConfig, run_experiment
from tlme.stable import build_stable

SWEEP = (0.05, 0.1, 0.2)


@pytest.fixture(scope="session")
def unit_table():
    return build_stable(1.0, BathSpec(), 5)


@pytest.fixture(scope="session")
def experiments(unit_table):
    return {g: run_experiment(ExperimentConfig(g_c=g), unit_table.scaled(g)) for g in SWEEP}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

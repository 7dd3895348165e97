import numpy as np
import pytest

from edgebd import Dag, ScoreModel, fig1_dag, generate, random_cpts
from edgebd.data import Dataset

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def seeded_dataset(dag: Dag, card, rows: int, seed: int, concentration: float = 1.0) -> Dataset:
    rng = np.random.default_rng(seed)
    net = random_cpts(dag, card, concentration, rng)
    return generate(net, rows, rng)


def empty_dataset(n: int, card: int = 2) -> Dataset:
    return Dataset(np.zeros((0, n), dtype=np.int64), np.full(n, card))


@pytest.fixture
def fig1():
    return fig1_dag()


@pytest.fixture(scope="session")
def fig1_data():
    return seeded_dataset(fig1_dag(), 4, 50, seed=11)


@pytest.fixture(scope="session")
def chain3_data():
    return seeded_dataset(Dag(3, [(0, 1), (1, 2)]), 2, 60, seed=3)


@pytest.fixture
def fig1_model(fig1_data):
    return ScoreModel(fig1_data)

import numpy as np
import pytest

from nustab import certify, gain_init
from nustab.model import ContinuousPlant

BENCH_A = [[1.0, -2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 0.5]]
BENCH_B = [[0.5], [2.0], [1.0]]
BENCH_K = [[1128 / 289, -1064 / 289, -105 / 34]]


@pytest.fixture(scope="session")
def bench_plant():
    return ContinuousPlant(BENCH_A, BENCH_B)


@pytest.fixture(scope="session")
def bench_design(bench_plant):
    K = gain_init.accept_user_gain(bench_plant, BENCH_K)
    return gain_init.diagonalize(bench_plant, K)


@pytest.fixture(scope="session")
def bench_cert(bench_plant, bench_design):
    return certify.find_h_star(bench_plant, bench_design, gamma=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")

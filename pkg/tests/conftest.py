# noqa: D100
import numpy as np
import pytest

from packcount.testing import load_fixture


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def single_vertex():
    return load_fixture("single_vertex_q3")


@pytest.fixture
def edge_q3():
    return load_fixture("single_edge_q3")


@pytest.fixture
def edge_q4():
    return load_fixture("single_edge_q4")


@pytest.fixture
def path3_q5():
    return load_fixture("path3_q5")


@pytest.fixture(autouse=True)
def _single_worker(monkeypatch):
    # keep multiprocessing opt-in inside tests
    monkeypatch.delenv("PACKCOUNT_THREADS", raising=False)
    monkeypatch.delenv("PACKCOUNT_CONFIG", raising=False)

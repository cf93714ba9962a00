import numpy as np
import pytest

from graphquant.graph import from_edges
from graphquant.synthetic import cluster_graph


def path_graph(n, **kw):
    return from_edges([(i, i + 1) for i in range(n - 1)], n, **kw)


def random_graph(n, p, rng, **kw):
    upper = np.triu(rng.random((n, n)) < p, k=1)
    return from_edges(np.argwhere(upper), n, **kw)


@pytest.fixture(scope="session")
def clusters():
    return cluster_graph(seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

import numpy as np
import pytest

from grothcover import ConeSpec, encode_problem


def k_n(n):
    return encode_problem("maxcut", [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)], n)


@pytest.fixture
def k2():
    return k_n(2)


@pytest.fixture
def k3():
    return k_n(3)


@pytest.fixture
def arc():
    return encode_problem("maxdicut", [(1, 2)], 2)


@pytest.fixture
def k3_spec(k3):
    return ConeSpec.from_instance(k3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_psd(m, rng, rank=None):
    G = rng.standard_normal((m, rank or m))
    return G @ G.T

import numpy as np
import pytest

from dhym.hermitian import symmetrize


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def random_hermitian(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return symmetrize(a)


def random_hpd(rng, n, shift=0.5):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a @ a.conj().T + shift * np.eye(n)


def random_distinct_diag(rng, n, gap=0.5):
    lam = np.sort(rng.uniform(-2.0, 2.5, n))[::-1] + np.arange(n)[::-1] * gap
    return np.diag(lam)

import numpy as np
import pytest

from spdmetric import _backend


def rand_sym(rng, n, scale=1.0):
    A = rng.normal(scale=scale, size=(n, n))
    return 0.5 * (A + A.T)


def rand_spd(rng, n, spread=1.0):
    """exp of a random symmetric matrix: condition number stays moderate."""
    w, U = np.linalg.eigh(rand_sym(rng, n, spread))
    return (U * np.exp(w)) @ U.T


def rand_rotation(rng, n):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)))
    return Q * np.sign(np.diag(R))


def rand_invertible(rng, n):
    # well conditioned: rotation times a bounded diagonal times rotation
    return rand_rotation(rng, n) @ np.diag(rng.uniform(0.5, 2.0, n)) @ rand_rotation(rng, n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=_backend.available())
def backend(request):
    return request.param

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.special import sph_harm_y

from rotorctl.basis import build_operators

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def ops1():
    return build_operators(1)


@pytest.fixture(scope="session")
def ops2():
    return build_operators(2)


@pytest.fixture(scope="session")
def ops3():
    return build_operators(3)


def sphere_matrix(ops, func, n_theta: int = 24, n_phi: int = 48) -> np.ndarray:
    """``<Y_a| f |Y_b>`` by Gauss-Legendre (theta) times uniform (phi) quadrature.

    Exact for band-limited integrands of degree below ``2 n_theta`` and ``n_phi``.
    """
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)
    phi = np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    W = np.outer(w, np.full(n_phi, 2 * np.pi / n_phi))
    Y = np.array([sph_harm_y(lv.ell, lv.m, T, P) for lv in ops.ordering.levels])
    return np.einsum("aij,bij,ij->ab", Y.conj(), Y * func(T, P), W)

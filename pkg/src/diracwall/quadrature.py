"""Quadrature rules and orthonormal polynomial bases used by the leaf solver."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy.linalg import eigh_tridiagonal

PI_QUARTER = np.pi ** -0.25


def hermite_functions(n_max: int, y) -> np.ndarray:
    """Normalized Hermite functions phi_0..phi_{n_max} at points ``y``.

    Returns an array of shape ``(n_max + 1,) + np.shape(y)``. Uses the
    three-term recurrence for the functions (not the polynomials). The
    Gaussian factor is carried as a separate log-scale that is rebalanced
    whenever the recurrence grows, so high orders stay accurate at points
    where phi_0 itself underflows.
    """
    y = np.asarray(y, dtype=float)
    out = np.empty((n_max + 1,) + y.shape)
    log_scale = -0.5 * y * y
    v_prev = np.zeros(y.shape)
    v = np.full(y.shape, PI_QUARTER)
    out[0] = v * np.exp(log_scale)
    for n in range(n_max):
        v_prev, v = v, (2.0 * y * v - np.sqrt(2.0 * n) * v_prev) / np.sqrt(2.0 * n + 2.0)
        big = np.abs(v) > _RESCALE
        if np.any(big):
            v = np.where(big, v / _RESCALE, v)
            v_prev = np.where(big, v_prev / _RESCALE, v_prev)
            log_scale = np.where(big, log_scale + _LOG_RESCALE, log_scale)
        out[n + 1] = v * np.exp(log_scale)
    return out


_RESCALE = 1e100
_LOG_RESCALE = np.log(_RESCALE)


@lru_cache(maxsize=64)
def _gauss_hermite(n: int):
    k = np.arange(1, n)
    nodes = eigh_tridiagonal(np.zeros(n), np.sqrt(k / 2.0), eigvals_only=True)
    # Newton polish on phi_n, with phi_n' = sqrt(2n) phi_{n-1} - y phi_n
    for _ in range(2):
        phi = hermite_functions(n, nodes)
        nodes = nodes - phi[n] / (np.sqrt(2.0 * n) * phi[n - 1] - nodes * phi[n])
    phi = hermite_functions(n - 1, nodes)
    weights = 1.0 / np.sum(phi * phi, axis=0)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_hermite_function_rule(n: int):
    """Gauss-Hermite rule for integrands of the form phi_j(y) phi_k(y) f(y).

    The returned weights already include the factor exp(y**2), i.e.
    ``sum(w * g(nodes))`` approximates ``int g(y) dy`` for ``g`` equal to a
    Gaussian times a polynomial of degree < 2n. Weights are obtained from the
    Christoffel numbers ``1 / sum_j phi_j(y_k)**2`` so they never underflow.
    """
    return _gauss_hermite(int(n))


@lru_cache(maxsize=64)
def _gauss_legendre(n: int):
    u, w = legendre.leggauss(n)
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0):
    """Gauss-Legendre nodes and weights on ``[a, b]``."""
    u, w = _gauss_legendre(int(n))
    half = 0.5 * (b - a)
    return a + half * (u + 1.0), half * w


def legendre_orthonormal(n: int, x, a: float, b: float) -> np.ndarray:
    """Legendre polynomials orthonormal on ``[a, b]``, shape ``x.shape + (n,)``."""
    x = np.asarray(x, dtype=float)
    t = (2.0 * x - a - b) / (b - a)
    scale = np.sqrt((2.0 * np.arange(n) + 1.0) / (b - a))
    return (legendre.legvander(t.ravel(), n - 1) * scale).reshape(x.shape + (n,))

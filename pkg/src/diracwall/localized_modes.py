"""Embedded localized modes of constant scalar wells.

A well ``V = V0 on [0, l]`` traps level ``n`` when the level is evanescent
outside (``E^2 < 2n``) and propagating inside (``(E - V0)^2 > 2n``). Matching
the inside and outside mode pairs gives a phase condition on ``l``; numerically
the same event shows up as a null vector of ``I + V G``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import svd
from scipy.optimize import brentq

from .errors import InvalidRegime, NoRoot
from .leaf_solver import DensityCoefficients, LeafConfig, LeafSystem, radiate_field
from .potentials import PotentialSpec
from .spectral_basis import EnergyContext


@dataclass(frozen=True)
class WellConfig:
    E: float
    V0: float
    l: float
    n: int
    k: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidRegime("trapped level must be n >= 1")
        if not self.E * self.E - 2 * self.n < 0:
            raise InvalidRegime(f"level {self.n} is not evanescent outside the well at E={self.E}")
        if not (self.E - self.V0) ** 2 - 2 * self.n > 0:
            raise InvalidRegime(f"level {self.n} is not propagating inside the well (E - V0 = {self.E - self.V0})")

    @property
    def E_inner(self) -> float:
        return self.E - self.V0

    @property
    def xi(self) -> complex:
        return 1j * np.sqrt(2 * self.n - self.E**2)

    @property
    def xi_inner(self) -> float:
        return float(np.sqrt(self.E_inner**2 - 2 * self.n))

    @classmethod
    def from_inner_wavenumber(cls, E: float, xi_inner: float, n: int, l: float = 1.0, k: int = 0) -> "WellConfig":
        """Choose ``V0 < E`` so that the inside wavenumber equals ``xi_inner``."""
        return cls(E, E - np.sqrt(xi_inner**2 + 2 * n), l, n, k)


def matching_ratio(cfg: WellConfig) -> complex:
    """Closed-form ratio whose argument must equal ``2 xi' l`` modulo ``2 pi``."""
    d = cfg.E - cfg.E_inner
    xi, xp = cfg.xi, cfg.xi_inner
    return (d + xi + xp) * (d - xi - xp) / ((d - xi + xp) * (d + xi - xp))


def matching_ratio_from_profiles(cfg: WellConfig) -> complex:
    """Same quantity built from the 2x2 mode-profile matrices.

    Returns ``-(b_+ a_+) / (b_- a_-)`` where ``(a_+, a_-)`` expands the decaying
    outside profile in the inside pair and ``(b_+, b_-)`` is the first row of
    the inside-to-outside change of basis.
    """
    n = cfg.n

    def pair(E, xi):
        cp = 1 / np.sqrt(2 * n + abs(E - xi) ** 2)
        cm = 1 / np.sqrt(2 * n + abs(E + xi) ** 2)
        return np.array([[cp * np.sqrt(2 * n), cm * np.sqrt(2 * n)], [cp * (E - xi), cm * (E + xi)]])

    out = pair(cfg.E, cfg.xi)
    inn = pair(cfg.E_inner, cfg.xi_inner)
    a = np.linalg.solve(inn, out[:, 0])
    b = np.linalg.solve(out, inn)[0]
    return -(b[0] * a[0]) / (b[1] * a[1])


def _wrap(phase: float) -> float:
    return float(np.pi - np.mod(np.pi - phase, 2 * np.pi))


def quantization_residual(cfg: WellConfig) -> float:
    """``Arg(ratio) - 2 xi' l + 2 k pi`` wrapped to ``(-pi, pi]``.

    Branch ``k`` is the ``k``-th resonant length counted upward from the
    smallest positive one, i.e. ``l_k = (Arg + 2 k pi) / (2 xi')`` with the
    argument taken in ``(0, 2 pi]``.
    """
    return _wrap(np.angle(matching_ratio(cfg)) - 2 * cfg.xi_inner * cfg.l + 2 * np.pi * cfg.k)


def find_resonant_length(E: float, V0: float, n: int, k: int = 0, step: float = 1e-2) -> float:
    """Resonant well length on branch ``k`` by bracketing scan and Brent refinement."""
    probe = WellConfig(E, V0, 1.0, n, k)
    arg = float(np.angle(matching_ratio(probe)))
    if arg <= 0:
        # branch 0 is the smallest positive length
        arg += 2 * np.pi
    xp = probe.xi_inner

    def g(l):
        return arg - 2 * xp * l + 2 * np.pi * k

    upper = max(4 * np.pi / xp, (abs(arg) + 2 * np.pi * (abs(k) + 1)) / (2 * xp))
    grid = np.arange(step, upper + step, step)
    vals = g(grid)
    hits = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    if vals[0] == 0:
        return float(grid[0])
    if hits.size == 0 or g(0.0) <= 0:
        raise NoRoot(f"branch k={k} has no positive resonant length")
    i = hits[0]
    return float(brentq(g, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))


@dataclass(frozen=True)
class NullSpaceReport:
    singular_values: np.ndarray
    null_vector: DensityCoefficients
    condition: float
    residual: float

    @property
    def sigma_min(self) -> float:
        return float(self.singular_values[-1])


def detect_null_space(spec: PotentialSpec, cfg: LeafConfig, ctx: EnergyContext, tail: int = 5) -> NullSpaceReport:
    """Full SVD of ``I + V G``; returns the smallest singular values and the null vector."""
    A = LeafSystem(spec, cfg, ctx, check=False).matrix()
    _, s, Vh = svd(A, check_finite=False)
    v = Vh[-1].conj()
    residual = float(np.linalg.norm(A @ v))
    cond = np.inf if s[-1] == 0 else float(s[0] / s[-1])
    return NullSpaceReport(s[-tail:].copy(), DensityCoefficients.from_flat(v, cfg), cond, residual)


def localized_field(rho_null: DensityCoefficients, xs, ys, ctx: EnergyContext) -> np.ndarray:
    """Sample ``psi = int G rho`` on the grid ``xs x ys``; shape ``(2, len(xs), len(ys))``."""
    ys = np.asarray(ys, dtype=float)
    return np.stack([radiate_field(rho_null, float(x), ys, ctx) for x in np.asarray(xs, dtype=float)], axis=1)

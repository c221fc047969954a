"""Hermite functions, mode indices and unperturbed mode profiles.

Works in the rotated frame where the unperturbed operator reads
``H = D_x sigma_3 - D_y sigma_2 + y sigma_1``. Level ``n >= 1`` carries the two
modes ``(n, +1)`` and ``(n, -1)`` spanned by ``(phi_{n-1}, 0)`` and
``(0, phi_n)``; level 0 carries only ``(0, -1) = (0, phi_0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import floor

import numpy as np

from .errors import NotPropagating, ThresholdEnergy
from .quadrature import hermite_functions

THRESHOLD_ENERGY = 1e-8
MAX_NY = 512


def hermite_eval(n_max: int, y: float) -> np.ndarray:
    """Values phi_0(y), ..., phi_{n_max}(y) of the normalized Hermite functions."""
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    return hermite_functions(n_max, float(y))


@dataclass(frozen=True, order=True)
class ModeIndex:
    """Branch label ``(n, eps)``; ``(0, +1)`` does not exist."""

    n: int
    eps: int

    def __post_init__(self):
        if self.n < 0 or int(self.n) != self.n:
            raise ValueError(f"Hermite level must be a nonnegative integer, got {self.n}")
        if self.eps not in (1, -1):
            raise ValueError(f"eps must be +1 or -1, got {self.eps}")
        if self.n == 0 and self.eps == 1:
            raise ValueError("(0, +1) is not a mode")

    def __str__(self):
        return f"({self.n},{self.eps:+d})"

    @classmethod
    def parse(cls, text: str) -> "ModeIndex":
        """Parse ``"(1,-1)"``, ``"1,-1"`` or ``"1-"``-style labels."""
        s = text.strip().strip("()").replace(" ", "")
        if "," in s:
            n, e = s.split(",")
            return cls(int(n), int(e))
        if s[-1] in "+-":
            return cls(int(s[:-1]), 1 if s[-1] == "+" else -1)
        raise ValueError(f"cannot parse mode label {text!r}")


def _check_threshold(E: float, n: int):
    if abs(E * E - 2 * n) <= THRESHOLD_ENERGY:
        raise ThresholdEnergy(f"E={E!r} is within {THRESHOLD_ENERGY} of the threshold E^2 = {2 * n}")


def _root(E: float, n):
    """Branch of (E^2 - 2n)^(1/2): positive real, or i*sqrt(2n - E^2)."""
    d = E * E - 2.0 * np.asarray(n, dtype=float)
    return np.where(d >= 0, np.sqrt(np.abs(d)) + 0j, 1j * np.sqrt(np.abs(d)))


def mode_wavenumber(m: ModeIndex, E: float) -> complex:
    """Wavenumber xi_m solving E^2 = xi^2 + 2n, with xi_(0,-1) = -E."""
    _check_threshold(E, m.n)
    if m.n == 0:
        return complex(-E)
    return complex(m.eps * _root(E, m.n))


@dataclass(frozen=True)
class ModeProfile:
    """``phi_m = up[0] * (phi_{up[1]}, 0) + down[0] * (0, phi_{down[1]})``."""

    up: tuple
    down: tuple
    norm_c: float

    def evaluate(self, y) -> np.ndarray:
        """Spinor values, shape ``(2,) + y.shape``."""
        y = np.asarray(y, dtype=float)
        h = hermite_functions(self.down[1], y)
        return np.stack([self.up[0] * h[self.up[1]], self.down[0] * h[self.down[1]]])


def mode_profile(m: ModeIndex, E: float) -> ModeProfile:
    xi = mode_wavenumber(m, E)
    if m.n == 0:
        return ModeProfile(up=(0j, 0), down=(1.0 + 0j, 0), norm_c=1.0)
    n = m.n
    c = 1.0 / np.sqrt(2 * n + abs(E - xi) ** 2)
    return ModeProfile(up=(complex(c * np.sqrt(2 * n)), n - 1), down=(complex(c * (E - xi)), n), norm_c=float(c))


def propagating_modes(E: float) -> list[ModeIndex]:
    """Modes with real wavenumber, ordered (n ascending, eps=-1 before +1)."""
    k = floor(E * E / 2.0)
    for n in range(k + 2):
        _check_threshold(E, n)
    modes = [ModeIndex(0, -1)]
    for n in range(1, k + 1):
        modes += [ModeIndex(n, -1), ModeIndex(n, 1)]
    return modes


def mode_inner_sigma3(m: ModeIndex, q: ModeIndex, E: float) -> complex:
    """``(phi_m, sigma_3 phi_q)_y``; zero unless the levels agree."""
    if m.n != q.n:
        return 0j
    pm, pq = mode_profile(m, E), mode_profile(q, E)
    return complex(np.conj(pm.up[0]) * pq.up[0] - np.conj(pm.down[0]) * pq.down[0])


@dataclass(frozen=True, eq=False)
class EnergyContext:
    """Energy-dependent data shared by every solver stage.

    ``theta[n] = i * xi_(n,+1)`` for ``0 <= n <= n_y`` (with ``theta[0] = iE``);
    the branch is fixed here once so that Re(theta) <= 0 everywhere.
    """

    E: float
    n_y: int
    xi_plus: np.ndarray = field(init=False, repr=False)
    theta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        E = float(self.E)
        if not np.isfinite(E) or E <= 0:
            raise ValueError("energy must be positive (the spectrum is symmetric in E -> -E)")
        if self.n_y < 1:
            raise ValueError("n_y must be >= 1")
        levels = np.arange(self.n_y + 1)
        gap = np.abs(E * E - 2.0 * levels)
        if np.any(gap <= THRESHOLD_ENERGY):
            n = int(levels[np.argmin(gap)])
            raise ThresholdEnergy(f"E={E!r} is within {THRESHOLD_ENERGY} of the threshold E^2 = {2 * n}")
        xi = _root(E, levels)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "xi_plus", xi)
        object.__setattr__(self, "theta", 1j * xi)
        xi.setflags(write=False)
        self.theta.setflags(write=False)

    def xi(self, m: ModeIndex) -> complex:
        if m.n == 0:
            return complex(-self.E)
        if m.n > self.n_y:
            return mode_wavenumber(m, self.E)
        return complex(m.eps * self.xi_plus[m.n])

    @cached_property
    def n_propagating_levels(self) -> int:
        return int(floor(self.E * self.E / 2.0))

    @cached_property
    def propagating(self) -> list[ModeIndex]:
        return propagating_modes(self.E)

    def is_propagating(self, m: ModeIndex) -> bool:
        return m.n <= self.n_propagating_levels

    @cached_property
    def modes_minus(self) -> list[ModeIndex]:
        return [ModeIndex(n, -1) for n in range(self.n_y)]

    @cached_property
    def modes_plus(self) -> list[ModeIndex]:
        return [ModeIndex(n, 1) for n in range(1, self.n_y)]

    @cached_property
    def level_profiles(self) -> dict:
        """Per-level profile coefficients for levels 0..n_y-1.

        ``up[s]`` and ``down[s]`` hold the coefficients of mode ``(l, s)`` on
        ``(phi_{l-1}, 0)`` and ``(0, phi_l)``; ``xi[s]`` the wavenumbers.
        Level 0 ``plus`` entries are placeholders (zero) since (0,+1) is absent.
        """
        E = self.E
        lev = np.arange(self.n_y)
        out = {"up": {}, "down": {}, "xi": {}}
        for s in (1, -1):
            xi = s * self.xi_plus[: self.n_y].copy()
            xi[0] = -E if s == -1 else 0.0
            c = 1.0 / np.sqrt(2.0 * lev + np.abs(E - xi) ** 2)
            up = c * np.sqrt(2.0 * lev) + 0j
            down = c * (E - xi)
            if s == -1:
                up[0], down[0] = 0.0, 1.0
            else:
                up[0], down[0] = 0.0, 0.0
            out["up"][s], out["down"][s], out["xi"][s] = up, down, xi
        return out

    @cached_property
    def level_basis_inverse(self) -> np.ndarray:
        """Inverse of the per-level map (a_plus, a_minus) -> (u, d).

        Shape ``(n_y, 2, 2)``; converts Hermite-pair coordinates of a field at
        fixed x into mode expansion coefficients. Level 0 maps d -> a_minus.
        """
        p = self.level_profiles
        B = np.empty((self.n_y, 2, 2), dtype=complex)
        B[:, 0, 0], B[:, 0, 1] = p["up"][1], p["up"][-1]
        B[:, 1, 0], B[:, 1, 1] = p["down"][1], p["down"][-1]
        B[0] = [[1.0, 0.0], [0.0, 1.0]]
        return np.linalg.inv(B)

    @cached_property
    def sigma3_forms(self) -> np.ndarray:
        """Per-level Hermitian forms ``Q[l, a, b] = (phi_a, sigma_3 phi_b)_y`` over a, b in (+, -)."""
        p = self.level_profiles
        up = np.stack([p["up"][1], p["up"][-1]], axis=1)
        dn = np.stack([p["down"][1], p["down"][-1]], axis=1)
        Q = np.conj(up)[:, :, None] * up[:, None, :] - np.conj(dn)[:, :, None] * dn[:, None, :]
        return Q

    def require_propagating(self, m: ModeIndex):
        if not self.is_propagating(m):
            raise NotPropagating(f"mode {m} is evanescent at E={self.E}")

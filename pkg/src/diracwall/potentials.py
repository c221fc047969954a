"""Built-in perturbation families and a callback interface.

Every family is a 2x2 Hermitian matrix field, sharply truncated to a window
``[x_L, x_R]`` in x and scaled by ``scale``. Families V0-V3 oscillate in x at
differences of unperturbed wavenumbers evaluated at a reference energy ``E0``;
V4 oscillates at ``E0`` itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np

from .errors import MissingEnergy, NotPropagating
from .spectral_basis import ModeIndex, mode_wavenumber

M0 = ModeIndex(0, -1)
M1P, M1M = ModeIndex(1, 1), ModeIndex(1, -1)
M2P, M2M = ModeIndex(2, 1), ModeIndex(2, -1)


class Family(str, Enum):
    V0 = "V0"
    V1 = "V1"
    V2 = "V2"
    V3 = "V3"
    V4 = "V4"
    CONST = "ConstScalar"
    CUSTOM = "Custom"
    ZERO = "Zero"


WAVENUMBER_FAMILIES = {Family.V0, Family.V1, Family.V2, Family.V3, Family.V4}


def coupling_frequency(m: ModeIndex, q: ModeIndex, E: float) -> float:
    """``xi_m - xi_q`` for two propagating modes."""
    xm, xq = mode_wavenumber(m, E), mode_wavenumber(q, E)
    if xm.imag != 0 or xq.imag != 0:
        bad = m if xm.imag != 0 else q
        raise NotPropagating(f"mode {bad} is evanescent at E={E}")
    return float(xm.real - xq.real)


@dataclass(frozen=True)
class PotentialSpec:
    """A windowed, scaled perturbation.

    ``callback`` (Custom family only) maps broadcast arrays ``(x, y)`` to an
    array of shape ``shape + (2, 2)``; if ``callback_scalar`` is set it
    returns scalar values instead, meaning ``v(x, y) * I``. ``origin`` shifts
    the oscillation phase: the family is evaluated at ``x - origin``.
    """

    family: Family
    window: tuple[float, float]
    scale: float = 1.0
    E0: float | None = None
    const_value: float = 0.0
    callback: Callable | None = field(default=None, compare=False)
    callback_scalar: bool = False
    origin: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        a, b = (float(v) for v in self.window)
        if not a < b:
            raise ValueError(f"window must satisfy x_L < x_R, got {self.window}")
        object.__setattr__(self, "window", (a, b))
        if self.family in WAVENUMBER_FAMILIES and self.E0 is None:
            raise MissingEnergy(f"family {self.family.value} needs the reference energy E0")
        if self.family is Family.CUSTOM and self.callback is None:
            raise ValueError("Custom family needs a callback")
        if self.family in WAVENUMBER_FAMILIES:
            # fail early on threshold / evanescent reference modes
            self.frequencies

    @property
    def frequencies(self) -> tuple:
        E0 = self.E0
        f = self.family
        if f is Family.V0:
            return (coupling_frequency(M0, M1P, E0), coupling_frequency(M0, M1M, E0), coupling_frequency(M1M, M1P, E0))
        if f is Family.V1:
            return (coupling_frequency(M0, M1P, E0),)
        if f is Family.V2:
            return (coupling_frequency(M0, M1M, E0),)
        if f is Family.V3:
            return (coupling_frequency(M1M, M1P, E0), coupling_frequency(M2M, M2P, E0))
        if f is Family.V4:
            return (float(E0),)
        return ()

    @property
    def structure(self) -> str:
        """``"zero"``, ``"scalar"`` (v I), ``"diagonal"`` or ``"matrix"``."""
        if self.family is Family.ZERO or self.scale == 0:
            return "zero"
        if self.family is Family.CONST and self.const_value == 0:
            return "zero"
        if self.family is Family.V3:
            return "diagonal"
        if self.family is Family.CUSTOM and not self.callback_scalar:
            return "matrix"
        return "scalar"

    def with_scale(self, scale: float) -> "PotentialSpec":
        return replace(self, scale=float(scale))

    def overlaps(self, a: float, b: float) -> bool:
        """True if the window meets ``(a, b)`` in a set of positive length."""
        return self.structure != "zero" and min(b, self.window[1]) > max(a, self.window[0])

    def _inside(self, x):
        return (x >= self.window[0]) & (x <= self.window[1])

    def scalar_part(self, x, y) -> np.ndarray:
        """Values of ``v`` for scalar families (``V = v I``), windowed and scaled."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        xs = x - self.origin
        g = np.exp(-y * y)
        f = self.family
        if f is Family.V0:
            k1, k2, k3 = self.frequencies
            v = g * y * np.cos(k1 * xs) + g * y * np.cos(k2 * xs) + g * np.cos(k3 * xs)
        elif f in (Family.V1, Family.V2):
            v = g * y * np.cos(self.frequencies[0] * xs)
        elif f is Family.V4:
            v = g * np.cos(self.frequencies[0] * xs)
        elif f is Family.CONST:
            v = np.full(x.shape, float(self.const_value))
        elif f is Family.ZERO:
            v = np.zeros(x.shape)
        elif f is Family.CUSTOM and self.callback_scalar:
            v = np.asarray(self.callback(x, y))
        else:
            raise TypeError(f"family {f.value} is not scalar")
        return np.where(self._inside(x), self.scale * v, 0.0)

    def diagonal_part(self, x, y) -> tuple:
        """``(v_11, v_22)`` for the diagonal family V3."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        xs = x - self.origin
        g = np.exp(-y * y)
        k1, k2 = self.frequencies
        w = self.scale * self._inside(x)
        return w * g * np.cos(k1 * xs), w * g * np.cos(k2 * xs)

    def evaluate(self, x, y) -> np.ndarray:
        """Matrix values, shape ``broadcast(x, y).shape + (2, 2)``."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        kind = self.structure
        if kind == "matrix":
            V = np.asarray(self.callback(x, y))
            V = V * (self.scale * self._inside(x))[..., None, None]
            return V
        out = np.zeros(x.shape + (2, 2), dtype=float)
        if kind == "scalar":
            v = self.scalar_part(x, y)
            out[..., 0, 0] = v
            out[..., 1, 1] = v
        elif kind == "diagonal":
            out[..., 0, 0], out[..., 1, 1] = self.diagonal_part(x, y)
        return out


def eval_potential(spec: PotentialSpec, x: float, y: float) -> np.ndarray:
    """2x2 matrix ``V(x, y)``."""
    return spec.evaluate(x, y)


def make_potential(family: str, window, scale: float = 1.0, E0: float | None = None, **kw) -> PotentialSpec:
    return PotentialSpec(family=Family(family), window=tuple(window), scale=scale, E0=E0, **kw)

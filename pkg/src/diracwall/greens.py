"""Outgoing Green's function of H - E in the Hermite basis.

Source Hermite functions couple to at most two target Hermite functions. It is
convenient to group them by *level* ``l``: part 0 is the up component on
``phi_{l-1}``, part 1 the down component on ``phi_l``. The y-integrated kernel
acting on level ``l`` is ``K_l(sgn(x - x0)) * exp(theta_l |x - x0|)`` with the
2x2 matrix returned by :func:`level_kernel`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import PI_QUARTER
from .spectral_basis import EnergyContext


@dataclass(frozen=True)
class GreenColumnResult:
    """Image of a single Hermite source under the y-integrated kernel.

    ``up`` and ``down`` are ``(coefficient, hermite_index)`` pairs; ``up`` is
    ``None`` for the level-0 down source.
    The x dependence ``exp(theta * |x - x0|)`` is already folded into the
    coefficients; ``theta`` and ``sign`` are kept for inspection.
    """

    up: tuple | None
    down: tuple
    theta: complex
    sign: int

    @property
    def entries(self) -> list:
        return [e for e in (self.up, self.down) if e is not None]


def level_kernel(ctx: EnergyContext, sign: int, levels=None) -> np.ndarray:
    """2x2 matrices ``K_l(sign)`` for the requested levels, shape ``(len, 2, 2)``.

    ``sign`` is ``sgn(x - x0)`` and may be 0 (coincident points). Level 0 only
    has part 1, so its part-0 row and column are zero.
    """
    if levels is None:
        levels = np.arange(ctx.n_y)
    levels = np.asarray(levels)
    th = ctx.theta[levels]
    E = ctx.E
    K = np.empty(levels.shape + (2, 2), dtype=complex)
    K[..., 0, 0] = 0.5 * (1j * sign - E / th)
    K[..., 1, 1] = 0.5 * (-1j * sign - E / th)
    off = -np.sqrt(2.0 * levels) / (2.0 * th)
    K[..., 0, 1] = off
    K[..., 1, 0] = off
    zero = levels == 0
    K[zero, 0, :] = 0.0
    K[zero, :, 0] = 0.0
    return K


def _sgn(d: float) -> int:
    return int(np.sign(d))


def green_column_up(n: int, x: float, x0: float, ctx: EnergyContext) -> GreenColumnResult:
    """y-integrated Green's function applied to the source ``(phi_n, 0) delta(x - x0)``."""
    if not 0 <= n <= ctx.n_y - 1:
        raise ValueError(f"source index {n} outside 0..{ctx.n_y - 1}")
    th = ctx.theta[n + 1]
    s = _sgn(x - x0)
    f = np.exp(th * abs(x - x0))
    a = 0.5 * (1j * s - ctx.E / th) * f
    b = -np.sqrt(2.0 * n + 2.0) / (2.0 * th) * f
    return GreenColumnResult(up=(complex(a), n), down=(complex(b), n + 1), theta=complex(th), sign=s)


def green_column_down(n: int, x: float, x0: float, ctx: EnergyContext) -> GreenColumnResult:
    """y-integrated Green's function applied to the source ``(0, phi_n) delta(x - x0)``."""
    if not 0 <= n <= ctx.n_y:
        raise ValueError(f"source index {n} outside 0..{ctx.n_y}")
    th = ctx.theta[n]
    s = _sgn(x - x0)
    f = np.exp(th * abs(x - x0))
    d = 0.5 * (-1j * s - ctx.E / th) * f
    up = None
    if n > 0:
        up = (complex(-np.sqrt(2.0 * n) / (2.0 * th) * f), n - 1)
    return GreenColumnResult(up=up, down=(complex(d), n), theta=complex(th), sign=s)


def green_point_eval(x, y, x0: float, y0: float, ctx: EnergyContext) -> np.ndarray:
    """Truncated Hermite series of the 2x2 Green's function.

    Sums source levels ``n < ctx.n_y``. ``x`` and ``y`` may be arrays (they are
    broadcast together); the result has shape ``broadcast.shape + (2, 2)``.
    The series converges slowly as ``x -> x0`` since G is singular there.
    The Hermite recurrence is streamed so memory does not grow with ``n_y``.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    shape = x.shape
    x = x.ravel()
    y = y.ravel()
    dx = x - x0
    s = np.sign(dx)
    ax = np.abs(dx)
    E = ctx.E
    th = ctx.theta

    # phi_n(y), phi_{n-1}(y), phi_{n+1}(y) and phi_n(y0) by streamed recurrence
    h_prev = np.zeros_like(y)
    h = PI_QUARTER * np.exp(-0.5 * y * y)
    g = PI_QUARTER * np.exp(-0.5 * y0 * y0)
    g_prev = 0.0
    h_next = np.sqrt(2.0) * y * h
    out = np.zeros((x.size, 2, 2), dtype=complex)
    for n in range(ctx.n_y):
        t1 = th[n + 1]
        t0 = th[n]
        e1 = np.exp(t1 * ax)
        e0 = np.exp(t0 * ax)
        out[:, 0, 0] += 0.5 * (1j * s - E / t1) * e1 * h * g
        out[:, 1, 0] += -np.sqrt(2.0 * n + 2.0) / (2.0 * t1) * e1 * h_next * g
        out[:, 1, 1] += 0.5 * (-1j * s - E / t0) * e0 * h * g
        if n > 0:
            out[:, 0, 1] += -np.sqrt(2.0 * n) / (2.0 * t0) * e0 * h_prev * g
        # advance y and y0 recurrences to n + 1
        k = n + 1
        h_prev, h, h_next = h, h_next, (2.0 * y * h_next - np.sqrt(2.0 * k) * h) / np.sqrt(2.0 * k + 2.0)
        g_prev, g = g, (2.0 * y0 * g - np.sqrt(2.0 * n) * g_prev) / np.sqrt(2.0 * n + 2.0)
    return out.reshape(shape + (2, 2))

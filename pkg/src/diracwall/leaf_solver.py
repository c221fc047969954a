"""Single-interval solver for the volume integral equation rho + V G rho = -V psi_in.

The density on a leaf ``[x_L, x_R]`` is expanded as
``rho(x, y) = sum rho[i, n, s] P_i(x) phi_n(y) e_s`` with ``P_i`` orthonormal
Legendre polynomials on the leaf. Internally the coefficients live in a flat
vector ordered spinor-major: ``flat = s * n_y * n_x + n * n_x + i``.

The Green's operator is block diagonal over Hermite *levels* (see
:mod:`diracwall.greens`). Levels ``0..n_y-1`` are kept; the up component on
``phi_{n_y-1}`` belongs to level ``n_y``, whose partner lies outside the basis,
so the discrete Green's operator neither radiates from nor into it. This keeps
the truncated operator an exact restriction of ``(H - E)^{-1}`` to a sum of
invariant subspaces.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve, svdvals
from scipy.linalg.lapack import get_lapack_funcs

from .errors import NearSingular
from .greens import level_kernel
from .potentials import PotentialSpec
from .quadrature import gauss_hermite_function_rule, gauss_legendre, hermite_functions, legendre_orthonormal
from .spectral_basis import EnergyContext

SINGULAR_CONDITION = 1e12
ROW_CHUNK = 512


@dataclass(frozen=True)
class LeafConfig:
    """One leaf: Legendre order ``n_x``, Hermite order ``n_y``.

    ``oversample`` raises the quadrature orders used for the potential and the
    panel integrals: ``n_x + oversample`` Legendre nodes and
    ``2 * (n_y + oversample)`` Hermite nodes.
    """

    interval: tuple[float, float]
    n_x: int
    n_y: int
    oversample: int = 20

    def __post_init__(self):
        a, b = (float(v) for v in self.interval)
        object.__setattr__(self, "interval", (a, b))
        if not a < b:
            raise ValueError(f"leaf interval must satisfy x_L < x_R, got {self.interval}")
        if self.n_x < 2:
            raise ValueError("n_x must be >= 2")
        if self.n_y < 1:
            raise ValueError("n_y must be >= 1")
        if self.oversample < 0:
            raise ValueError("oversample must be >= 0")

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]

    @property
    def size(self) -> int:
        return 2 * self.n_x * self.n_y


@dataclass(frozen=True)
class BoundaryAmplitudes:
    """Mode amplitudes on an interval boundary.

    ``minus`` is indexed by ``(n, -1)`` for ``0 <= n < n_y``; ``plus`` by
    ``(n, +1)`` for ``1 <= n < n_y`` (entry ``k`` is level ``k + 1``).
    """

    minus: np.ndarray
    plus: np.ndarray

    @classmethod
    def zeros(cls, n_y: int) -> "BoundaryAmplitudes":
        return cls(np.zeros(n_y, dtype=complex), np.zeros(n_y - 1, dtype=complex))

    @classmethod
    def from_vector(cls, v, n_y: int) -> "BoundaryAmplitudes":
        v = np.asarray(v, dtype=complex)
        return cls(v[:n_y].copy(), v[n_y:].copy())

    @classmethod
    def unit(cls, n_y: int, n: int, eps: int) -> "BoundaryAmplitudes":
        out = cls.zeros(n_y)
        if eps == -1:
            out.minus[n] = 1.0
        else:
            out.plus[n - 1] = 1.0
        return out

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.minus, self.plus])


@dataclass(frozen=True)
class DensityCoefficients:
    """Leaf density; ``coeffs[i, n, s]`` multiplies ``P_i(x) phi_n(y) e_s``."""

    coeffs: np.ndarray
    interval: tuple[float, float]
    oversample: int = 20

    @property
    def n_x(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n_y(self) -> int:
        return self.coeffs.shape[1]

    @classmethod
    def from_flat(cls, flat, cfg: LeafConfig) -> "DensityCoefficients":
        c = np.asarray(flat).reshape(2, cfg.n_y, cfg.n_x).transpose(2, 1, 0)
        return cls(np.ascontiguousarray(c), cfg.interval, cfg.oversample)

    @property
    def flat(self) -> np.ndarray:
        return self.coeffs.transpose(2, 1, 0).reshape(-1)

    def tail_norms(self) -> tuple[float, float]:
        """Relative size of the last Legendre and last Hermite slices."""
        total = np.linalg.norm(self.coeffs)
        if total == 0:
            return 0.0, 0.0
        return float(np.linalg.norm(self.coeffs[-1]) / total), float(np.linalg.norm(self.coeffs[:, -1]) / total)

    def evaluate(self, x, y) -> np.ndarray:
        """Spinor values of rho at points, shape ``(2,) + broadcast.shape``."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        a, b = self.interval
        P = legendre_orthonormal(self.n_x, x, a, b)
        P = P * ((x >= a) & (x <= b))[..., None]
        H = hermite_functions(self.n_y - 1, y)
        return np.einsum("...i,n...,ins->s...", P, H, self.coeffs)


@dataclass
class TRMatrix:
    """Map ``(alpha_-(x_R), alpha_+(x_L)) -> (alpha_-(x_L), alpha_+(x_R))``."""

    M11: np.ndarray
    M12: np.ndarray
    M21: np.ndarray
    M22: np.ndarray
    interval: tuple[float, float]
    E: float

    @property
    def n_y(self) -> int:
        return self.M11.shape[0]

    def full(self) -> np.ndarray:
        return np.block([[self.M11, self.M12], [self.M21, self.M22]])

    def apply(self, minus_right, plus_left):
        """Outgoing ``(alpha_-(x_L), alpha_+(x_R))`` for the given incoming data."""
        ml = self.M11 @ minus_right + self.M12 @ plus_left
        pr = self.M21 @ minus_right + self.M22 @ plus_left
        return ml, pr

    @classmethod
    def from_full(cls, M, interval, E) -> "TRMatrix":
        n_y = (M.shape[0] + 1) // 2
        return cls(M[:n_y, :n_y], M[:n_y, n_y:], M[n_y:, :n_y], M[n_y:, n_y:], tuple(interval), E)


def free_TR(ctx: EnergyContext, interval) -> TRMatrix:
    """TR matrix of an interval without potential (pure phase/decay transport)."""
    a, b = interval
    h = b - a
    n = ctx.n_y
    xi = ctx.xi_plus[:n]
    xm = -xi.copy()
    xm[0] = -ctx.E
    M11 = np.diag(np.exp(-1j * xm * h))
    M22 = np.diag(np.exp(1j * xi[1:] * h))
    return TRMatrix(M11, np.zeros((n, n - 1), complex), np.zeros((n - 1, n), complex), M22, (a, b), ctx.E)


class LeafOperators:
    """Potential-independent discrete operators of a leaf of length ``h``.

    Everything here is translation invariant, so a single instance serves all
    leaves of equal length. Local coordinate ``s = x - x_L`` in ``[0, h]``.
    """

    def __init__(self, ctx: EnergyContext, n_x: int, h: float, oversample: int):
        self.ctx, self.n_x, self.h, self.oversample = ctx, n_x, h, oversample
        n_y = ctx.n_y
        q = n_x + oversample
        self.q = q
        levels = np.arange(n_y)
        th = ctx.theta[:n_y]

        t, _ = gauss_legendre(n_x, 0.0, h)
        self.nodes = t
        P_nodes = legendre_orthonormal(n_x, t, 0.0, h)
        self.node_to_coef = np.linalg.inv(P_nodes)

        # panel integrals: left[l, k, j] = int_0^{t_k} P_j(s) e^{theta (t_k - s)} ds
        u, wu = gauss_legendre(q, 0.0, 1.0)
        sL = t[:, None] * u[None, :]
        wL = t[:, None] * wu[None, :]
        sR = t[:, None] + (h - t[:, None]) * u[None, :]
        wR = (h - t[:, None]) * wu[None, :]
        PL = legendre_orthonormal(n_x, sL, 0.0, h) * wL[..., None]
        PR = legendre_orthonormal(n_x, sR, 0.0, h) * wR[..., None]
        eL = np.exp(th[:, None, None] * (t[:, None] - sL)[None])
        eR = np.exp(th[:, None, None] * (sR - t[:, None])[None])
        left = np.einsum("lkq,kqj->lkj", eL, PL)
        right = np.einsum("lkq,kqj->lkj", eR, PR)
        left = np.einsum("ik,lkj->lij", self.node_to_coef, left)
        right = np.einsum("ik,lkj->lij", self.node_to_coef, right)

        self.K_plus = level_kernel(ctx, 1, levels)
        self.K_minus = level_kernel(ctx, -1, levels)
        # G[l, a, i, b, j]
        G = self.K_plus[:, :, None, :, None] * left[:, None, :, None, :]
        G = G + self.K_minus[:, :, None, :, None] * right[:, None, :, None, :]
        self.G = G.reshape(n_y, 2 * n_x, 2 * n_x)

        # whole-leaf exponential moments used for radiation to the endpoints
        xq, wq = gauss_legendre(q, 0.0, h)
        Pq = legendre_orthonormal(n_x, xq, 0.0, h) * wq[:, None]
        self.quad_x, self.quad_P = xq, Pq
        self.EL = np.exp(th[:, None] * xq[None, :]) @ Pq
        self.ER = np.exp(th[:, None] * (h - xq)[None, :]) @ Pq

        Binv = ctx.level_basis_inverse
        self.XL = (Binv @ self.K_minus)[:, 1, :, None] * self.EL[:, None, :]
        self.XR = (Binv @ self.K_plus)[:, 0, :, None] * self.ER[:, None, :]

        # Legendre coefficients of incoming plane waves, referenced to their entry point
        prof = ctx.level_profiles
        xi_p, xi_m = prof["xi"][1], prof["xi"][-1]
        self.ex_plus = np.exp(1j * xi_p[:, None] * xq[None, :]) @ Pq
        self.ex_minus = np.exp(1j * xi_m[:, None] * (xq - h)[None, :]) @ Pq
        self.in_plus = np.stack([prof["up"][1][:, None] * self.ex_plus, prof["down"][1][:, None] * self.ex_plus], axis=1)
        self.in_minus = np.stack([prof["up"][-1][:, None] * self.ex_minus, prof["down"][-1][:, None] * self.ex_minus], axis=1)

    def panel_moments(self, s: float):
        """``int_0^s P_j e^{theta(s-x0)}`` and ``int_s^h P_j e^{theta(x0-s)}`` per level."""
        th = self.ctx.theta[: self.ctx.n_y]
        u, wu = gauss_legendre(self.q, 0.0, 1.0)
        out = []
        for lo, hi, sign in ((0.0, s, 1.0), (s, self.h, -1.0)):
            xs = lo + (hi - lo) * u
            P = legendre_orthonormal(self.n_x, xs, 0.0, self.h) * ((hi - lo) * wu)[:, None]
            out.append(np.exp(th[:, None] * (sign * (s - xs))[None, :]) @ P)
        return out


@lru_cache(maxsize=8)
def leaf_operators(ctx: EnergyContext, n_x: int, h: float, oversample: int) -> LeafOperators:
    return LeafOperators(ctx, n_x, h, oversample)


def _level_index(n_y: int, n_x: int):
    """Flat indices of level parts: ``idx[l, a, i]``; -1 where absent."""
    lev = np.arange(n_y)
    i = np.arange(n_x)
    idx = np.empty((n_y, 2, n_x), dtype=np.int64)
    idx[:, 0, :] = (lev[:, None] - 1) * n_x + i[None, :]
    idx[0, 0, :] = -1
    idx[:, 1, :] = n_y * n_x + lev[:, None] * n_x + i[None, :]
    return idx


def to_levels(flat: np.ndarray, n_y: int, n_x: int) -> np.ndarray:
    """Gather flat coefficients (first axis) into level form ``[l, a, i, ...]``."""
    idx = _level_index(n_y, n_x)
    out = flat[np.where(idx < 0, 0, idx)]
    out[0, 0] = 0
    return out


def from_levels(lev: np.ndarray, n_y: int, n_x: int) -> np.ndarray:
    """Scatter level form back to flat vectors; the orphan slot gets zero."""
    tail = lev.shape[3:]
    flat = np.zeros((2 * n_y * n_x,) + tail, dtype=lev.dtype)
    idx = _level_index(n_y, n_x)
    flat[idx[1:, 0].ravel()] = lev[1:, 0].reshape((-1,) + tail)
    flat[idx[:, 1].ravel()] = lev[:, 1].reshape((-1,) + tail)
    return flat


def build_V_blocks(spec: PotentialSpec, cfg: LeafConfig) -> dict:
    """Galerkin blocks ``V[(s, t)]`` of shape ``(n_y*n_x, n_y*n_x)``, ordered ``n*n_x + i``.

    Missing keys are zero blocks. Identical blocks share storage.
    """
    a, b = cfg.interval
    kind = spec.structure
    if kind == "zero" or not spec.overlaps(a, b):
        return {}
    # products phi_n phi_m v carry a second Gaussian, so the Hermite rule needs
    # roughly twice the basis order to stay exact near the top of the basis
    qx, qy = cfg.n_x + cfg.oversample, 2 * (cfg.n_y + cfg.oversample)
    xq, wx = gauss_legendre(qx, a, b)
    yq, wy = gauss_hermite_function_rule(qy)
    Px = legendre_orthonormal(cfg.n_x, xq, a, b) * np.sqrt(wx)[:, None]
    Hy = hermite_functions(cfg.n_y - 1, yq).T * np.sqrt(wy)[:, None]
    X, Y = np.meshgrid(xq, yq, indexing="ij")

    def galerkin(v):
        # A[qx, n, m] = sum_qy H[qy, n] H[qy, m] v(qx, qy)
        A = np.einsum("qn,pq,qm->pnm", Hy, v, Hy, optimize=True)
        T = Px[:, :, None] * Px[:, None, :]
        R = A.reshape(qx, -1).T @ T.reshape(qx, -1)
        n_y, n_x = cfg.n_y, cfg.n_x
        R = R.reshape(n_y, n_y, n_x, n_x).transpose(0, 2, 1, 3)
        return np.ascontiguousarray(R).reshape(n_y * n_x, n_y * n_x)

    if kind == "scalar":
        B = galerkin(spec.scalar_part(X, Y))
        return {(0, 0): B, (1, 1): B}
    if kind == "diagonal":
        v0, v1 = spec.diagonal_part(X, Y)
        return {(0, 0): galerkin(v0), (1, 1): galerkin(v1)}
    V = spec.evaluate(X, Y)
    out = {}
    for s in range(2):
        for t in range(2):
            v = V[..., s, t]
            if np.any(v != 0):
                out[(s, t)] = galerkin(v)
    return out


def build_V_hat(spec: PotentialSpec, cfg: LeafConfig) -> np.ndarray:
    """Dense Galerkin matrix of the potential in the flat ordering."""
    blocks = build_V_blocks(spec, cfg)
    m = cfg.n_y * cfg.n_x
    dtype = complex if any(np.iscomplexobj(B) for B in blocks.values()) else float
    out = np.zeros((2 * m, 2 * m), dtype=dtype)
    for (s, t), B in blocks.items():
        out[s * m:(s + 1) * m, t * m:(t + 1) * m] = B
    return out


def build_G_hat(cfg: LeafConfig, ctx: EnergyContext) -> np.ndarray:
    """Dense matrix of ``rho -> Pi(G rho)`` in the flat ordering."""
    _check_ctx(cfg, ctx)
    ops = leaf_operators(ctx, cfg.n_x, cfg.length, cfg.oversample)
    n_y, n_x = cfg.n_y, cfg.n_x
    N = cfg.size
    out = np.zeros((N, N), dtype=complex)
    idx = _level_index(n_y, n_x).reshape(n_y, 2 * n_x)
    for l in range(n_y):
        sel = idx[l] >= 0
        rows = idx[l][sel]
        out[np.ix_(rows, rows)] = ops.G[l][np.ix_(sel, sel)]
    return out


def _check_ctx(cfg: LeafConfig, ctx: EnergyContext):
    if ctx.n_y != cfg.n_y:
        raise ValueError(f"context built for n_y={ctx.n_y}, leaf uses n_y={cfg.n_y}")


def _rows_times_levels(W0, W1, n_y, n_x):
    """Gather row blocks ``W_s[:, n, i]`` into level form ``[l, R, a*n_x + i]``."""
    R = (W0 if W0 is not None else W1).shape[0]
    dtype = np.result_type(*(w.dtype for w in (W0, W1) if w is not None))
    Wl = np.zeros((n_y, R, 2, n_x), dtype=dtype)
    if W0 is not None:
        Wl[1:, :, 0, :] = W0.reshape(R, n_y, n_x)[:, : n_y - 1, :].transpose(1, 0, 2)
    if W1 is not None:
        Wl[:, :, 1, :] = W1.reshape(R, n_y, n_x).transpose(1, 0, 2)
    return Wl.reshape(n_y, R, 2 * n_x)


class LeafSystem:
    """Factorized ``I + V G`` for one leaf, reusable across right-hand sides."""

    def __init__(self, spec: PotentialSpec, cfg: LeafConfig, ctx: EnergyContext, *, check=True):
        _check_ctx(cfg, ctx)
        self.spec, self.cfg, self.ctx = spec, cfg, ctx
        self.ops = leaf_operators(ctx, cfg.n_x, cfg.length, cfg.oversample)
        self.blocks = build_V_blocks(spec, cfg)
        self.is_free = not self.blocks
        self.condition = 1.0
        self._lu = None
        self._rhs = None
        if not self.is_free:
            A, self._rhs = self._assemble()
            anorm = np.abs(A).sum(axis=0).max()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", LinAlgWarning)
                self._lu = lu_factor(A, overwrite_a=True, check_finite=False)
            gecon = get_lapack_funcs("gecon", (self._lu[0],))
            rcond, _ = gecon(self._lu[0], anorm, norm="1")
            self.condition = np.inf if rcond == 0 else 1.0 / rcond
            if check and not self.condition < SINGULAR_CONDITION:
                smin = self.singular_values()[-1]
                raise NearSingular(
                    f"I + V G is numerically singular on {cfg.interval} at E={ctx.E} "
                    f"(condition ~ {self.condition:.3e}, sigma_min = {smin:.3e})",
                    condition=self.condition,
                    sigma_min=smin,
                    where=cfg.interval,
                )

    def _assemble(self):
        """Return ``A = I + V G`` and the right-hand sides ``-V Pi psi_in`` for unit modes."""
        cfg, ops = self.cfg, self.ops
        n_y, n_x = cfg.n_y, cfg.n_x
        m = n_y * n_x
        N = 2 * m
        A = np.zeros((N, N), dtype=complex)
        rhs = np.zeros((N, 2 * n_y - 1), dtype=complex)
        G = ops.G
        inc_minus = ops.in_minus.reshape(n_y, 2 * n_x)
        inc_plus = ops.in_plus[1:].reshape(n_y - 1, 2 * n_x)
        for r in range(2):
            W0, W1 = self.blocks.get((r, 0)), self.blocks.get((r, 1))
            if W0 is None and W1 is None:
                continue
            for start in range(0, m, ROW_CHUNK):
                stop = min(start + ROW_CHUNK, m)
                w0 = None if W0 is None else W0[start:stop]
                w1 = None if W1 is None else W1[start:stop]
                Wl = _rows_times_levels(w0, w1, n_y, n_x)
                out = np.matmul(Wl, G)  # [l, R, b*n_x + j]
                rows = slice(r * m + start, r * m + stop)
                out = out.reshape(n_y, stop - start, 2, n_x)
                # column (t=0, n=l-1) is part 0 of level l; the orphan column stays zero
                A[rows, 0 : m - n_x] = out[1:, :, 0, :].transpose(1, 0, 2).reshape(stop - start, m - n_x)
                A[rows, m:N] = out[:, :, 1, :].transpose(1, 0, 2).reshape(stop - start, m)
                rhs[rows, :n_y] = -np.einsum("lrk,lk->rl", Wl, inc_minus)
                rhs[rows, n_y:] = -np.einsum("lrk,lk->rl", Wl[1:], inc_plus)
        A[np.diag_indices(N)] += 1.0
        return A, rhs

    def matrix(self) -> np.ndarray:
        """Freshly assembled ``I + V G`` (dense)."""
        if self.is_free:
            return np.eye(self.cfg.size, dtype=complex)
        return self._assemble()[0]

    def singular_values(self) -> np.ndarray:
        return svdvals(self.matrix(), check_finite=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.is_free:
            return np.zeros_like(rhs, dtype=complex)
        return lu_solve(self._lu, rhs, check_finite=False)

    def unit_densities(self) -> np.ndarray:
        """Flat densities for every unit incoming mode, columns ordered like BoundaryAmplitudes."""
        if self.is_free:
            return np.zeros((self.cfg.size, 2 * self.cfg.n_y - 1), dtype=complex)
        return self.solve(self._rhs)

    def density(self, incoming: BoundaryAmplitudes) -> DensityCoefficients:
        """Density for incoming amplitudes ``alpha_-(x_R)`` (minus) and ``alpha_+(x_L)`` (plus)."""
        if self.is_free:
            flat = np.zeros(self.cfg.size, dtype=complex)
        else:
            flat = self.solve(self._rhs @ incoming.vector)
        return DensityCoefficients.from_flat(flat, self.cfg)

    def outgoing_from_flat(self, flat: np.ndarray):
        """Radiated ``(alpha_-(x_L), alpha_+(x_R))`` of flat densities (vector or columns)."""
        n_y, n_x = self.cfg.n_y, self.cfg.n_x
        lev = to_levels(flat, n_y, n_x)
        ml = np.einsum("laj,laj...->l...", self.ops.XL, lev)
        pr = np.einsum("laj,laj...->l...", self.ops.XR, lev)
        return ml, pr[1:]

    def tr(self) -> TRMatrix:
        a, b = self.cfg.interval
        free = free_TR(self.ctx, (a, b))
        if self.is_free:
            return free
        n_y = self.cfg.n_y
        ml, pr = self.outgoing_from_flat(self.unit_densities())
        return TRMatrix(
            free.M11 + ml[:, :n_y], ml[:, n_y:], pr[:, :n_y], free.M22 + pr[:, n_y:], (a, b), self.ctx.E
        )


def radiated_levels(rho: DensityCoefficients, x: float, ctx: EnergyContext) -> np.ndarray:
    """Hermite-pair coordinates ``[l, a]`` of the radiated field ``G rho`` at ``x``."""
    a, b = rho.interval
    ops = leaf_operators(ctx, rho.n_x, b - a, rho.oversample)
    lev = to_levels(rho.flat, rho.n_y, rho.n_x)
    th = ctx.theta[: ctx.n_y]
    if x >= b:
        mom = np.exp(th * (x - b))[:, None] * ops.ER
        return np.einsum("lab,lj,lbj->la", ops.K_plus, mom, lev)
    if x <= a:
        mom = np.exp(th * (a - x))[:, None] * ops.EL
        return np.einsum("lab,lj,lbj->la", ops.K_minus, mom, lev)
    left, right = ops.panel_moments(x - a)
    return np.einsum("lab,lj,lbj->la", ops.K_plus, left, lev) + np.einsum("lab,lj,lbj->la", ops.K_minus, right, lev)


def levels_to_spinor(pairs: np.ndarray, y) -> np.ndarray:
    """Evaluate Hermite-pair coordinates ``[l, a]`` at ``y``; returns ``(2,) + y.shape``."""
    y = np.asarray(y, dtype=float)
    n_y = pairs.shape[0]
    H = hermite_functions(n_y - 1, y)
    up = np.tensordot(pairs[1:, 0], H[: n_y - 1], axes=(0, 0))
    down = np.tensordot(pairs[:, 1], H, axes=(0, 0))
    return np.stack([up, down])


def radiate_field(rho: DensityCoefficients, x: float, y, ctx: EnergyContext) -> np.ndarray:
    """Spinor value of ``int G rho`` at ``(x, y)``."""
    return levels_to_spinor(radiated_levels(rho, x, ctx), y)


def incoming_levels(incoming: BoundaryAmplitudes, interval, x: float, ctx: EnergyContext) -> np.ndarray:
    """Mode amplitudes ``[l, (+, -)]`` of the free incoming wave at ``x``."""
    a, b = interval
    prof = ctx.level_profiles
    out = np.zeros((ctx.n_y, 2), dtype=complex)
    out[1:, 0] = incoming.plus * np.exp(1j * prof["xi"][1][1:] * (x - a))
    out[:, 1] = incoming.minus * np.exp(1j * prof["xi"][-1] * (x - b))
    return out


def modes_to_pairs(amps: np.ndarray, ctx: EnergyContext) -> np.ndarray:
    """Mode amplitudes ``[l, (+, -), ...]`` to Hermite-pair coordinates ``[l, a, ...]``."""
    p = ctx.level_profiles
    B = np.stack([np.stack([p["up"][1], p["up"][-1]], -1), np.stack([p["down"][1], p["down"][-1]], -1)], 1)
    return np.einsum("lab,lb...->la...", B, amps)


def pairs_to_modes(pairs: np.ndarray, ctx: EnergyContext) -> np.ndarray:
    return np.einsum("lab,lb...->la...", ctx.level_basis_inverse, pairs)


def total_mode_amplitudes(rho: DensityCoefficients, incoming: BoundaryAmplitudes, x: float, ctx: EnergyContext):
    """Mode amplitudes ``[l, (+, -)]`` of ``psi_in + G rho`` at ``x``."""
    return incoming_levels(incoming, rho.interval, x, ctx) + pairs_to_modes(radiated_levels(rho, x, ctx), ctx)


def solve_leaf_density(spec, cfg, ctx, incoming: BoundaryAmplitudes) -> DensityCoefficients:
    return LeafSystem(spec, cfg, ctx).density(incoming)


def extract_outgoing(rho: DensityCoefficients, cfg: LeafConfig, ctx: EnergyContext) -> BoundaryAmplitudes:
    """Radiated amplitudes ``alpha_-(x_L)`` (minus) and ``alpha_+(x_R)`` (plus) of ``G rho``."""
    a, b = cfg.interval
    left = pairs_to_modes(radiated_levels(rho, a, ctx), ctx)
    right = pairs_to_modes(radiated_levels(rho, b, ctx), ctx)
    return BoundaryAmplitudes(left[:, 1].copy(), right[1:, 0].copy())


def leaf_TR(spec, cfg, ctx) -> TRMatrix:
    return LeafSystem(spec, cfg, ctx).tr()

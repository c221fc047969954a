"""Currents, interface conductivity and scattering matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .leaf_solver import (
    BoundaryAmplitudes,
    LeafConfig,
    LeafSystem,
    TRMatrix,
    levels_to_spinor,
    modes_to_pairs,
    total_mode_amplitudes,
)
from .merge_engine import GridAmplitudes, MergeTree, build_tree, leaf_incoming, recover_amplitudes
from .potentials import PotentialSpec
from .spectral_basis import EnergyContext, ModeIndex


def level_amplitudes(minus: np.ndarray, plus: np.ndarray) -> np.ndarray:
    """Stack boundary vectors into ``[l, (+, -), ...]`` with a zero (0, +1) slot."""
    n_y = minus.shape[0]
    out = np.zeros((n_y, 2) + minus.shape[1:], dtype=complex)
    out[1:, 0] = plus
    out[:, 1] = minus
    return out


def sigma3_current(amps: np.ndarray, ctx: EnergyContext) -> np.ndarray:
    """``(psi, sigma_3 psi)_y`` for mode amplitudes ``[l, (+, -), ...]``.

    Uses the closed-form pairings of the mode profiles, so evanescent cross
    terms inside a slab are included exactly.
    """
    Q = ctx.sigma3_forms[: amps.shape[0]]
    return np.einsum("la...,lab,lb...->...", np.conj(amps), Q, amps).real


@dataclass
class SlabSolution:
    """Generalized eigenfunctions of a slab for a batch of incoming data.

    Column ``c`` of ``amps`` holds the grid amplitudes for incoming set ``c``.
    """

    tree: MergeTree
    amps: GridAmplitudes
    incoming_modes: list
    _densities: dict = field(default_factory=dict, repr=False)

    @property
    def ctx(self) -> EnergyContext:
        return self.tree.ctx

    @property
    def grid(self) -> np.ndarray:
        return self.tree.grid

    def _leaf_of(self, x: float) -> int:
        k = int(np.searchsorted(self.grid, x, side="right")) - 1
        return min(max(k, 0), len(self.grid) - 2)

    def _density(self, k: int):
        if k not in self._densities:
            t = self.tree
            sysk = t.leaf_systems[k] if t.leaf_systems else None
            if sysk is None:
                sysk = LeafSystem(t.spec, t.leaf_config(k), t.ctx)
            self._densities[k] = [sysk.density(leaf_incoming(self.amps, k, c)) for c in range(len(self.incoming_modes))]
        return self._densities[k]

    def amplitudes_at(self, x: float) -> np.ndarray:
        """Mode amplitudes ``[l, (+, -), column]`` of the total field at ``x``."""
        g = self.grid
        prof = self.ctx.level_profiles
        xp, xm = prof["xi"][1][:, None], prof["xi"][-1][:, None]
        if x <= g[0]:
            a = level_amplitudes(self.amps.minus[0], self.amps.plus[0])
            a[:, 0] *= np.exp(1j * xp * (x - g[0]))
            a[:, 1] *= np.exp(1j * xm * (x - g[0]))
            return a
        if x >= g[-1]:
            a = level_amplitudes(self.amps.minus[-1], self.amps.plus[-1])
            a[:, 0] *= np.exp(1j * xp * (x - g[-1]))
            a[:, 1] *= np.exp(1j * xm * (x - g[-1]))
            return a
        hit = np.flatnonzero(np.isclose(g, x, rtol=0, atol=1e-14 * max(1.0, abs(x))))
        if hit.size:
            k = int(hit[0])
            return level_amplitudes(self.amps.minus[k], self.amps.plus[k])
        k = self._leaf_of(x)
        rhos = self._density(k)
        cols = [
            total_mode_amplitudes(rho, leaf_incoming(self.amps, k, c), x, self.ctx) for c, rho in enumerate(rhos)
        ]
        return np.stack(cols, axis=-1)

    def current_at(self, x: float) -> np.ndarray:
        """``(psi, sigma_3 psi)_y`` per incoming column."""
        return sigma3_current(self.amplitudes_at(x), self.ctx)

    def grid_currents(self) -> np.ndarray:
        """Currents at every grid point, shape ``(n_points, n_columns)``."""
        a = level_amplitudes(np.moveaxis(self.amps.minus, 0, -1), np.moveaxis(self.amps.plus, 0, -1))
        # a: [l, (+,-), column, point]
        return sigma3_current(a, self.ctx).T

    def field_at(self, x: float, y) -> np.ndarray:
        """Total field ``psi`` at ``(x, y)``, shape ``(2, column) + y.shape``."""
        pairs = modes_to_pairs(self.amplitudes_at(x), self.ctx)
        return np.stack([levels_to_spinor(pairs[..., c], y) for c in range(pairs.shape[-1])], axis=1)


def unit_incoming(modes, n_y: int):
    """Incoming arrays ``(alpha_+(x_L), alpha_-(x_R))`` with one column per mode."""
    ap = np.zeros((n_y - 1, len(modes)), dtype=complex)
    am = np.zeros((n_y, len(modes)), dtype=complex)
    for c, m in enumerate(modes):
        if m.eps == 1:
            ap[m.n - 1, c] = 1.0
        else:
            am[m.n, c] = 1.0
    return ap, am


def solve_slab(
    spec: PotentialSpec,
    interval,
    levels: int,
    leaf_cfg: LeafConfig,
    ctx: EnergyContext,
    modes=None,
    *,
    threads: int = 1,
    keep_leaf_systems: bool = False,
) -> SlabSolution:
    """Generalized eigenfunctions for unit incoming waves in ``modes`` (default: all propagating).

    An incoming mode ``(n, +1)`` has unit amplitude at the left end of the
    slab, ``(n, -1)`` at the right end.
    """
    modes = list(ctx.propagating if modes is None else modes)
    tree = build_tree(spec, interval, levels, leaf_cfg, ctx, threads=threads, keep_leaf_systems=keep_leaf_systems)
    ap, am = unit_incoming(modes, ctx.n_y)
    return SlabSolution(tree, recover_amplitudes(tree, ap, am), modes)


def velocity_weight(m: ModeIndex, E: float) -> float:
    """``E / sqrt(E^2 - 2n)`` for a propagating mode."""
    return float(E / np.sqrt(E * E - 2.0 * m.n))


@dataclass(frozen=True)
class ConductivityResult:
    value: float
    modes: list
    j: np.ndarray
    currents: np.ndarray


def conductivity(
    E: float,
    spec: PotentialSpec,
    x0: float,
    *,
    interval=None,
    levels: int = 4,
    n_x: int = 10,
    n_y: int = 100,
    oversample: int = 20,
    threads: int = 1,
) -> ConductivityResult:
    """``2 pi sigma_I`` at ``x0`` and its per-mode decomposition ``j_m``.

    ``interval`` defaults to the potential window; ``x0`` may lie anywhere.
    """
    ctx = EnergyContext(E, n_y)
    if interval is None:
        interval = spec.window
    sol = solve_slab(spec, interval, levels, LeafConfig(interval, n_x, n_y, oversample), ctx, threads=threads)
    cur = sol.current_at(x0)
    w = np.array([velocity_weight(m, E) for m in sol.incoming_modes])
    j = w * cur
    return ConductivityResult(float(j.sum()), sol.incoming_modes, j, cur)


@dataclass(frozen=True)
class ScatteringMatrix:
    """Current-normalized far-field scattering blocks.

    Right movers are ``(n, +1)`` for ``1 <= n <= k``; left movers ``(n, -1)``
    for ``0 <= n <= k``. ``T_plus`` is ``k x k`` (right to right),
    ``R_plus`` ``(k+1) x k`` (right to left), ``T_minus`` ``(k+1) x (k+1)``,
    ``R_minus`` ``k x (k+1)``. Phases refer to plane waves ``e^{i xi x}``.
    """

    R_plus: np.ndarray
    T_plus: np.ndarray
    R_minus: np.ndarray
    T_minus: np.ndarray
    E: float
    interval: tuple

    @property
    def k(self) -> int:
        return self.T_plus.shape[0]

    @property
    def modes(self) -> list:
        """Global ordering of the propagating modes."""
        out = [ModeIndex(0, -1)]
        for n in range(1, self.k + 1):
            out += [ModeIndex(n, -1), ModeIndex(n, 1)]
        return out

    def full(self) -> np.ndarray:
        """``S[p, n]``: outgoing mode p from incoming mode n, in the global mode ordering."""
        modes = self.modes
        S = np.zeros((len(modes), len(modes)), dtype=complex)
        for c, m in enumerate(modes):
            for r, p in enumerate(modes):
                S[r, c] = self.entry(p, m)
        return S

    def entry(self, out: ModeIndex, inc: ModeIndex) -> complex:
        if inc.eps == 1:
            return self.T_plus[out.n - 1, inc.n - 1] if out.eps == 1 else self.R_plus[out.n, inc.n - 1]
        return self.R_minus[out.n - 1, inc.n] if out.eps == 1 else self.T_minus[out.n, inc.n]

    def quantization_defect(self) -> float:
        """``tr(T+^* T+) - tr(T-^* T-) + 1``."""
        return float(np.sum(np.abs(self.T_plus) ** 2) - np.sum(np.abs(self.T_minus) ** 2) + 1.0)


def scattering_from_TR(tr: TRMatrix, ctx: EnergyContext) -> ScatteringMatrix:
    """Propagating block of a TR matrix, re-phased and scaled to unit current."""
    k = ctx.n_propagating_levels
    if k + 1 > ctx.n_y:
        raise ValueError("n_y too small to hold all propagating modes")
    xL, xR = tr.interval
    E = ctx.E
    xp = np.real(ctx.xi_plus[1 : k + 1])
    xm = -np.real(ctx.xi_plus[: k + 1])
    xm[0] = -E
    sp, sm = np.sqrt(np.abs(xp)), np.sqrt(np.abs(xm))

    def block(M, xi_out, x_out, s_out, xi_in, x_in, s_in):
        return np.exp(-1j * xi_out * x_out)[:, None] * M * np.exp(1j * xi_in * x_in)[None, :] * (s_out[:, None] / s_in[None, :])

    T_plus = block(tr.M22[:k, :k], xp, xR, sp, xp, xL, sp)
    R_plus = block(tr.M12[: k + 1, :k], xm, xL, sm, xp, xL, sp)
    T_minus = block(tr.M11[: k + 1, : k + 1], xm, xL, sm, xm, xR, sm)
    R_minus = block(tr.M21[:k, : k + 1], xp, xR, sp, xm, xR, sm)
    return ScatteringMatrix(R_plus, T_plus, R_minus, T_minus, E, tuple(tr.interval))


def shift_reference(S: ScatteringMatrix, c: float) -> ScatteringMatrix:
    """Scattering matrix with phases referred to ``e^{i xi (x - c)}`` instead of ``e^{i xi x}``."""
    E = S.E
    k = S.k
    lev = np.arange(k + 1)
    xi = np.sqrt(E * E - 2.0 * lev)
    xp, xm = xi[1:], -xi
    xm[0] = -E

    def ph(xo, xi_in, M):
        return np.exp(1j * xo * c)[:, None] * M * np.exp(-1j * xi_in * c)[None, :]

    return ScatteringMatrix(
        ph(xm, xp, S.R_plus), ph(xp, xp, S.T_plus), ph(xp, xm, S.R_minus), ph(xm, xm, S.T_minus), E, S.interval
    )


@dataclass(frozen=True)
class CurrentReport:
    """Per-mode currents ``j_m`` and optional spatial samples of the current."""

    modes: list
    j: np.ndarray
    x: np.ndarray | None = None
    samples: np.ndarray | None = None

    @property
    def total(self) -> float:
        return float(np.sum(self.j))

    @property
    def mean(self):
        return None if self.samples is None else self.samples.mean(axis=0)

    @property
    def max_deviation(self):
        if self.samples is None:
            return None
        return np.abs(self.samples - self.samples.mean(axis=0)).max(axis=0)


def currents_from_S(s: ScatteringMatrix) -> CurrentReport:
    """``j_m`` from transmission columns: ``+sum_p |T+|^2`` for right movers, ``-sum_p |T-|^2`` for left movers."""
    modes = s.modes
    jp = np.sum(np.abs(s.T_plus) ** 2, axis=0)
    jm = -np.sum(np.abs(s.T_minus) ** 2, axis=0)
    j = np.array([jp[m.n - 1] if m.eps == 1 else jm[m.n] for m in modes])
    return CurrentReport(modes, j)


def current_profile(sol: SlabSolution, x) -> CurrentReport:
    """Unweighted currents ``(psi, sigma_3 psi)_y`` sampled at positions ``x``."""
    x = np.asarray(x, dtype=float)
    samples = np.array([sol.current_at(xi) for xi in x])
    return CurrentReport(sol.incoming_modes, samples.mean(axis=0), x, samples)

"""Hierarchical merging of TR matrices and downward recovery of boundary data."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.linalg.lapack import get_lapack_funcs

from .errors import MergeSingular, NearSingular
from .leaf_solver import BoundaryAmplitudes, LeafConfig, LeafSystem, TRMatrix
from .potentials import PotentialSpec
from .spectral_basis import EnergyContext

SINGULAR_CONDITION = 1e12


def _factor(A, where):
    anorm = np.abs(A).sum(axis=0).max()
    with warnings.catch_warnings():
        # exact singularity is reported through the condition estimate below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu = lu_factor(A, check_finite=False)
    gecon = get_lapack_funcs("gecon", (lu[0],))
    rcond, _ = gecon(lu[0], anorm, norm="1")
    cond = np.inf if rcond == 0 else 1.0 / rcond
    if not cond < SINGULAR_CONDITION:
        raise MergeSingular(f"inner resolvent singular at {where} (condition ~ {cond:.3e})", condition=cond, where=where)
    return lu


def _check_adjacent(L: TRMatrix, R: TRMatrix):
    if not np.isclose(L.interval[1], R.interval[0], rtol=0, atol=1e-12 * max(1.0, abs(L.interval[1]))):
        raise ValueError(f"intervals {L.interval} and {R.interval} are not adjacent")
    if L.n_y != R.n_y:
        raise ValueError("TR matrices have different n_y")


def _resolvents(L: TRMatrix, R: TRMatrix):
    where = L.interval[1]
    X = _factor(np.eye(L.n_y) - R.M12 @ L.M21, where)
    Y = _factor(np.eye(L.n_y - 1) - L.M21 @ R.M12, where)
    return X, Y


def _merge_with(L, R, X, Y) -> TRMatrix:
    XR11 = lu_solve(X, R.M11)
    XR12L22 = lu_solve(X, R.M12 @ L.M22)
    YL21R11 = lu_solve(Y, L.M21 @ R.M11)
    YL22 = lu_solve(Y, L.M22)
    return TRMatrix(
        L.M11 @ XR11,
        L.M11 @ XR12L22 + L.M12,
        R.M22 @ YL21R11 + R.M21,
        R.M22 @ YL22,
        (L.interval[0], R.interval[1]),
        L.E,
    ), np.block([[XR11, XR12L22], [YL21R11, YL22]])


def merge_TR(L_mat: TRMatrix, R_mat: TRMatrix) -> TRMatrix:
    """TR matrix of the union of two adjacent intervals."""
    _check_adjacent(L_mat, R_mat)
    X, Y = _resolvents(L_mat, R_mat)
    return _merge_with(L_mat, R_mat, X, Y)[0]


def merge_with_intersection(L_mat: TRMatrix, R_mat: TRMatrix):
    """``(parent TR, intersection matrix)`` in one pass."""
    _check_adjacent(L_mat, R_mat)
    X, Y = _resolvents(L_mat, R_mat)
    return _merge_with(L_mat, R_mat, X, Y)


def intersection_matrix(L_mat: TRMatrix, R_mat: TRMatrix) -> np.ndarray:
    """Map ``(alpha_-(right end), alpha_+(left end)) -> (alpha_-, alpha_+)`` at the shared point."""
    return merge_with_intersection(L_mat, R_mat)[1]


@dataclass
class MergeTree:
    """Result of the upward pass over ``2**levels`` uniform leaves.

    ``intersection_mats[l][k]`` belongs to the node at height ``l + 1`` whose
    children are nodes ``2k`` and ``2k + 1`` one level down; its shared point
    is grid point ``(2k + 1) * 2**l``. ``level_TRs[0]`` are the leaf TRs
    (kept only when requested); ``root`` is always kept.
    """

    levels: int
    grid: np.ndarray
    spec: PotentialSpec
    leaf_cfg: LeafConfig
    ctx: EnergyContext
    root: TRMatrix
    intersection_mats: list
    level_TRs: list = field(default_factory=list)
    leaf_systems: list | None = None

    @property
    def n_y(self) -> int:
        return self.ctx.n_y

    @property
    def leaf_TRs(self) -> list:
        return self.level_TRs[0] if self.level_TRs else []

    def leaf_config(self, k: int) -> LeafConfig:
        return LeafConfig((self.grid[k], self.grid[k + 1]), self.leaf_cfg.n_x, self.leaf_cfg.n_y, self.leaf_cfg.oversample)


def uniform_grid(interval, levels: int) -> np.ndarray:
    a, b = interval
    return np.linspace(a, b, 2**levels + 1)


def _leaf_system(spec, cfg, ctx, k):
    try:
        return LeafSystem(spec, cfg, ctx)
    except NearSingular as exc:
        exc.where = (k, cfg.interval)
        raise


def build_tree(
    spec: PotentialSpec,
    interval,
    levels: int,
    leaf_cfg: LeafConfig,
    ctx: EnergyContext,
    *,
    threads: int = 1,
    keep_levels: bool = False,
    keep_leaf_systems: bool = False,
) -> MergeTree:
    """Upward pass: leaf TR matrices, then pairwise merges up to the root.

    ``leaf_cfg`` supplies ``n_x``, ``n_y`` and ``oversample``; its interval is
    ignored. Leaf factorizations are dropped after use unless
    ``keep_leaf_systems`` is set (memory is ``O(2**levels * (2 n_x n_y)**2)``).
    """
    if levels < 0:
        raise ValueError("levels must be >= 0")
    grid = uniform_grid(interval, levels)
    n_leaves = 2**levels
    cfgs = [LeafConfig((grid[k], grid[k + 1]), leaf_cfg.n_x, leaf_cfg.n_y, leaf_cfg.oversample) for k in range(n_leaves)]
    systems = [None] * n_leaves if keep_leaf_systems else None

    def leaf(k):
        sysk = _leaf_system(spec, cfgs[k], ctx, k)
        if systems is not None:
            systems[k] = sysk
        return sysk.tr()

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            current = list(pool.map(leaf, range(n_leaves)))
    else:
        current = [leaf(k) for k in range(n_leaves)]

    kept = [current] if keep_levels else []
    mats = []
    for _ in range(levels):
        pairs = [(current[2 * k], current[2 * k + 1]) for k in range(len(current) // 2)]
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                merged = list(pool.map(lambda p: merge_with_intersection(*p), pairs))
        else:
            merged = [merge_with_intersection(*p) for p in pairs]
        current = [m[0] for m in merged]
        mats.append([m[1] for m in merged])
        if keep_levels:
            kept.append(current)
    return MergeTree(levels, grid, spec, leaf_cfg, ctx, current[0], mats, kept, systems)


@dataclass
class GridAmplitudes:
    """Total mode amplitudes at every grid point.

    ``minus[k]`` has shape ``(n_y, ...)`` and ``plus[k]`` ``(n_y - 1, ...)``;
    trailing axes index independent incoming data sets.
    """

    grid: np.ndarray
    minus: np.ndarray
    plus: np.ndarray

    def at(self, k: int, column=None) -> BoundaryAmplitudes:
        m, p = self.minus[k], self.plus[k]
        if column is not None:
            m, p = m[..., column], p[..., column]
        return BoundaryAmplitudes(m, p)


def recover_amplitudes(tree: MergeTree, alpha_plus_left, alpha_minus_right) -> GridAmplitudes:
    """Downward pass: amplitudes at all ``2**L + 1`` grid points.

    Incoming arrays may carry trailing axes (several data sets at once).
    """
    ap = np.asarray(alpha_plus_left, dtype=complex)
    am = np.asarray(alpha_minus_right, dtype=complex)
    n_y = tree.n_y
    npts = 2**tree.levels + 1
    minus = np.zeros((npts, n_y) + am.shape[1:], dtype=complex)
    plus = np.zeros((npts, n_y - 1) + ap.shape[1:], dtype=complex)
    plus[0], minus[-1] = ap, am
    minus[0], plus[-1] = tree.root.apply(am, ap)
    for lev in range(tree.levels - 1, -1, -1):
        step = 2**lev
        for k, Mk in enumerate(tree.intersection_mats[lev]):
            lo, mid, hi = 2 * k * step, (2 * k + 1) * step, (2 * k + 2) * step
            out = Mk @ np.concatenate([minus[hi], plus[lo]], axis=0)
            minus[mid], plus[mid] = out[:n_y], out[n_y:]
    return GridAmplitudes(tree.grid, minus, plus)


def leaf_incoming(amps: GridAmplitudes, k: int, column=None) -> BoundaryAmplitudes:
    """Incoming data of leaf ``k``: ``alpha_-`` at its right end, ``alpha_+`` at its left end."""
    m, p = amps.minus[k + 1], amps.plus[k]
    if column is not None:
        m, p = m[..., column], p[..., column]
    return BoundaryAmplitudes(m, p)


def recover_leaf_densities(tree: MergeTree, amps: GridAmplitudes, leaves=None, column=None) -> dict:
    """Re-solve selected leaves (default all) with their recovered incoming data."""
    if leaves is None:
        leaves = range(2**tree.levels)
    out = {}
    for k in leaves:
        if tree.leaf_systems is not None and tree.leaf_systems[k] is not None:
            sysk = tree.leaf_systems[k]
        else:
            sysk = LeafSystem(tree.spec, tree.leaf_config(k), tree.ctx)
        out[k] = sysk.density(leaf_incoming(amps, k, column))
    return out


def sequential_fold(spec: PotentialSpec, grid, leaf_cfg: LeafConfig, ctx: EnergyContext):
    """Yield the TR matrix of ``[grid[0], grid[k+1]]`` after appending each leaf."""
    acc = None
    for k in range(len(grid) - 1):
        cfg = LeafConfig((grid[k], grid[k + 1]), leaf_cfg.n_x, leaf_cfg.n_y, leaf_cfg.oversample)
        t = _leaf_system(spec, cfg, ctx, k).tr()
        acc = t if acc is None else merge_TR(acc, t)
        yield acc

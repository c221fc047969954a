"""Acceptance criteria 1-9, one summary line each (see the terminal summary).

Criterion 3 collects every scattering matrix built by the other criteria, so
it is placed last in the module.
"""

import numpy as np
import pytest

from diracwall.cli import _density, density_error
from diracwall.greens import green_column_down, green_column_up, green_point_eval
from diracwall.leaf_solver import DensityCoefficients, LeafConfig, LeafSystem, pairs_to_modes, radiated_levels
from diracwall.localized_modes import detect_null_space, find_resonant_length
from diracwall.merge_engine import build_tree, merge_TR, sequential_fold
from diracwall.potentials import make_potential
from diracwall.quadrature import hermite_functions, legendre_orthonormal
from diracwall.spectral_basis import EnergyContext, ModeIndex
from diracwall.transport import (
    conductivity,
    current_profile,
    currents_from_S,
    scattering_from_TR,
    solve_slab,
    velocity_weight,
)

pytestmark = pytest.mark.slow

SCATTERING = []  # (label, ScatteringMatrix) from every sweep in this module


def _fold_sweep(spec, grid, n_x, n_y, E, label):
    ctx = EnergyContext(E, n_y)
    out = []
    for k, tr in enumerate(sequential_fold(spec, grid, LeafConfig((grid[0], grid[1]), n_x, n_y), ctx)):
        S = scattering_from_TR(tr, ctx)
        SCATTERING.append((f"{label} l={grid[k + 1]:g}", S))
        out.append(S)
    return out


def test_1_conductivity_quantization(report):
    energies = [1.52, 1.6, 1.7, 1.8, 1.9]
    scales = [0.0, 0.5, 1.0, 1.5, 2.0]
    worst = 0.0
    for E in energies:
        for lam in scales:
            spec = make_potential("V0", (-1.0, 1.0), scale=lam, E0=E)
            res = conductivity(E, spec, 0.0, levels=4, n_x=10, n_y=100)
            worst = max(worst, abs(res.value + 1.0))
    ok = report(1, worst < 1e-10, f"max |2 pi sigma_I + 1| = {worst:.2e} over {len(energies) * len(scales)} (E, lambda) points (tol 1e-10)")
    assert ok


def test_4_merge_correctness(report):
    E, n_y = 1.8, 60
    iv = (-1.0, 1.0)
    spec = make_potential("V1", iv, E0=E)
    ctx = EnergyContext(E, n_y)
    ref = build_tree(spec, iv, 0, LeafConfig(iv, 40, n_y), ctx).root
    SCATTERING.append(("merge L=0", scattering_from_TR(ref, ctx)))
    errs = {}
    for L, n_x in ((1, 24), (2, 16), (3, 12), (4, 10)):
        root = build_tree(spec, iv, L, LeafConfig(iv, n_x, n_y), ctx).root
        SCATTERING.append((f"merge L={L}", scattering_from_TR(root, ctx)))
        errs[L] = float(np.linalg.norm(root.full() - ref.full()))
    cuts = np.linspace(-1.0, 1.0, 4)
    a, b, c = (LeafSystem(spec, LeafConfig((cuts[i], cuts[i + 1]), 16, n_y), ctx).tr() for i in range(3))
    assoc = float(np.linalg.norm(merge_TR(merge_TR(a, b), c).full() - merge_TR(a, merge_TR(b, c)).full()))
    worst = max(errs.values())
    detail = ", ".join(f"L={L}: {e:.1e}" for L, e in errs.items())
    ok = report(4, worst < 1e-10 and assoc < 1e-10, f"root TR vs L=0 ({detail}); associativity {assoc:.1e} (tol 1e-10)")
    assert ok


def test_5_spectral_self_convergence(report):
    E = 1.8
    iv = (0.0, 100.0 / 1024.0)
    spec = make_potential("V1", (0.0, 100.0), E0=E)
    mode = ModeIndex(0, -1)
    ref = _density(spec, iv, 16, 300, 20, E, mode)
    c = np.linalg.norm(ref.coeffs, axis=(0, 2))
    tail = np.sqrt(np.cumsum((c**2)[::-1])[::-1]) / np.linalg.norm(ref.coeffs)
    ex = {n_x: density_error(_density(spec, iv, n_x, 300, 20, E, mode), ref) for n_x in (12, 13, 14, 15)}
    ey = {n_y: density_error(_density(spec, iv, 16, n_y, 20, E, mode), ref) for n_y in (20, 40, 60, 80, 100, 150)}
    del ref
    ratios = {n: ey[n] / tail[n] for n in ey}
    vals = [ey[n] for n in sorted(ey)]
    decreasing = all(b < a for a, b in zip(vals, vals[1:]))
    # the truncation error can never undercut the discarded part of the reference
    tracks = all(0.99 < r < 1.01 for r in ratios.values())
    ok_x = max(ex.values()) < 1e-12
    detail = (
        f"max e(n_x>=12) = {max(ex.values()):.1e} (tol 1e-12); e(n_y)/tail in "
        f"[{min(ratios.values()):.5f}, {max(ratios.values()):.5f}], e(n_y) from {vals[0]:.1e} to {vals[-1]:.1e}"
    )
    ok = report(5, ok_x and decreasing and tracks, detail)
    assert ok


def test_6_no_backscatter(report):
    E = 1.2
    spec = make_potential("V4", (0.0, 20.0), E0=E)
    grid = np.linspace(0.0, 20.0, 81)
    Ss = _fold_sweep(spec, grid, 10, 30, E, "V4 E=1.2")
    assert all(S.k == 0 for S in Ss)
    worst = max(abs(abs(S.T_minus[0, 0]) - 1.0) for S in Ss)
    ok = report(6, worst < 1e-10, f"max ||T| - 1| = {worst:.1e} over {len(Ss)} lengths in (0, 20] (tol 1e-10)")
    assert ok


def test_7_localized_mode(report):
    E = 1.8
    V0 = E - np.sqrt(5.0)  # inner wavenumber 1 on level 2
    l = find_resonant_length(E, V0, 2, 0)
    spec = make_potential("ConstScalar", (0.0, l), const_value=V0)
    rep = detect_null_space(spec, LeafConfig((0.0, l), 60, 20), EnergyContext(E, 20))
    s = rep.singular_values
    ok = abs(l - 1.5422) < 1e-3 and s[-1] < 1e-10 and s[-2] > 0.1 and rep.residual < 1e-12
    detail = f"l = {l:.10f}; sigma_min = {s[-1]:.1e}, next = {s[-2]:.4f}, null residual = {rep.residual:.1e}"
    assert report(7, ok, detail)


def _pde_residual(E, xt):
    n_x, n_y = 6, 10
    ctx = EnergyContext(E, n_y)
    rng = np.random.default_rng(11)
    coef = rng.standard_normal((n_x, n_y, 2)) + 1j * rng.standard_normal((n_x, n_y, 2))
    coef[:, n_y - 1, 0] = 0.0
    rho = DensityCoefficients(coef, (0.0, 1.0), 20)
    h = 2e-3
    vals = []
    for k in (-2, -1, 0, 1, 2):
        pairs = radiated_levels(rho, xt + k * h, ctx)
        up = np.zeros(n_y, complex)
        up[:-1] = pairs[1:, 0]
        vals.append((up, pairs[:, 1]))
    w = np.array([1, -8, 0, 8, -1]) / (12 * h)
    u, d = vals[2]
    ux = sum(wk * v[0] for wk, v in zip(w, vals))
    dx = sum(wk * v[1] for wk, v in zip(w, vals))
    n = np.arange(n_y)
    top = -1j * ux - E * u
    top[:-1] += np.sqrt(2 * (n[:-1] + 1)) * d[1:]
    bot = 1j * dx - E * d
    bot[1:] += np.sqrt(2 * n[1:]) * u[:-1]
    P = legendre_orthonormal(n_x, np.array([xt]), 0.0, 1.0)[0]
    r_up, r_dn = P @ coef[:, :, 0], P @ coef[:, :, 1]
    scale = np.max(np.abs(r_dn))
    return max(np.max(np.abs(top[:-1] - r_up[:-1])), np.max(np.abs(bot - r_dn))) / scale


def test_8_green_function_properties(report):
    E = 1.8
    ctx = EnergyContext(E, 12)
    y = np.linspace(-13, 13, 521)
    w = y[1] - y[0]
    H = hermite_functions(ctx.n_y, y)
    quad = 0.0
    for dx in (0.1, -0.5, 1.5):
        G = np.stack([green_point_eval(dx, y, 0.0, y0, ctx) for y0 in y], axis=1)
        P = np.einsum("ky,yzij,nz->knij", H, G, H) * w * w
        for n in range(11):
            up, dn = green_column_up(n, dx, 0.0, ctx), green_column_down(n, dx, 0.0, ctx)
            quad = max(quad, abs(P[n, n, 0, 0] - up.up[0]), abs(P[n + 1, n, 1, 0] - up.down[0]))
            quad = max(quad, abs(P[n, n, 1, 1] - dn.down[0]))
            if n > 0:
                quad = max(quad, abs(P[n - 1, n, 0, 1] - dn.up[0]))
    pde = max(_pde_residual(E_, xt) for E_ in (1.2, 1.8, 2.2) for xt in (0.13, 0.5, 0.91))
    far = 0.0
    for seed, E_ in ((1, 1.2), (2, 1.8), (3, 2.2)):
        c = EnergyContext(E_, 8)
        coef = np.random.default_rng(seed).standard_normal((5, 8, 2)) + 0j
        coef[:, 7, 0] = 0.0
        rho = DensityCoefficients(coef, (0.0, 0.5), 20)
        for dist in (0.0, 0.7, 2.5):
            right = pairs_to_modes(radiated_levels(rho, 0.5 + dist, c), c)
            left = pairs_to_modes(radiated_levels(rho, -dist, c), c)
            leak = max(np.max(np.abs(right[:, 1])), np.max(np.abs(left[1:, 0])))
            far = max(far, leak / np.abs(coef).max())
    ok = quad < 1e-8 and pde < 1e-6 and far < 1e-10
    detail = f"y-integrals vs quadrature {quad:.1e} (tol 1e-8); PDE residual {pde:.1e} (tol 1e-6); incoming far-field content {far:.1e} (tol 1e-10)"
    assert report(8, ok, detail)


def test_9_parity_decoupling(report):
    E = 2.2
    spec = make_potential("V3", (0.0, 10.0), E0=E)
    grid = np.linspace(0.0, 10.0, 41)
    Ss = _fold_sweep(spec, grid, 10, 40, E, "V3 E=2.2")
    modes = Ss[0].modes
    even = [i for i, m in enumerate(modes) if m.n % 2 == 0]
    odd = [i for i, m in enumerate(modes) if m.n % 2 == 1]
    worst = max(max(np.abs(S.full()[np.ix_(even, odd)]).max(), np.abs(S.full()[np.ix_(odd, even)]).max()) for S in Ss)
    coupled = min(np.abs(S.full()[np.ix_(even, even)]).max() for S in Ss)
    ok = len(modes) == 5 and worst < 1e-12
    detail = f"max |S| between parity classes = {worst:.1e} over {len(Ss)} lengths (tol 1e-12); same-class max |S| >= {coupled:.2f}"
    assert report(9, ok, detail)


def test_2_current_conservation(report):
    E = 1.8
    iv = (0.0, 100.0)
    spec = make_potential("V1", iv, E0=E)
    ctx = EnergyContext(E, 100)
    modes = [ModeIndex(0, -1), ModeIndex(1, 1), ModeIndex(1, -1)]
    sol = solve_slab(spec, iv, 10, LeafConfig(iv, 12, 100), ctx, modes)
    S = scattering_from_TR(sol.tree.root, ctx)
    SCATTERING.append(("V1 [0,100] L=10", S))
    on_grid = sol.grid_currents()
    # off-grid samples, one per leaf, spread over the slab
    leaves = np.linspace(3, len(sol.grid) - 5, 50).astype(int)
    xs = sol.grid[leaves] + 0.37 * (sol.grid[1] - sol.grid[0])
    off = current_profile(sol, xs).samples
    samples = np.vstack([on_grid, off])
    mean = samples.mean(axis=0)
    dev = float(np.abs(samples - mean).max())
    # independent route: the conserved current equals the signed transmitted flux
    j_S = currents_from_S(S)
    flux = np.array([j_S.j[j_S.modes.index(m)] / velocity_weight(m, E) for m in modes])
    route = float(np.abs(mean - flux).max())
    expected = np.array([4.66e-3, 3.06e-6, -0.62])
    mean_err = np.abs(mean - expected)
    ok = dev < 1e-10 and route < 1e-10 and bool(np.all(mean_err < 5e-3))
    labels = ", ".join(f"{m}: {v:.4g} (ref {r:.3g})" for m, v, r in zip(modes, mean, expected))
    detail = (
        f"max |j(x) - mean| = {dev:.1e} over {len(samples)} points (tol 1e-10); "
        f"mean vs transmitted flux {route:.1e}; means {labels} (tol 5e-3)"
    )
    assert report(2, ok, detail)


def test_3_scattering_quantization(report):
    E = 1.8
    grid = np.linspace(0.0, 10.0, 41)
    for fam in ("V1", "V2"):
        _fold_sweep(make_potential(fam, (0.0, 10.0), E0=E), grid, 10, 40, E, f"{fam} E=1.8")
    defects = [(abs(S.quantization_defect()), label) for label, S in SCATTERING]
    worst, where = max(defects)
    ok = worst < 1e-10
    assert report(3, ok, f"max |tr T+*T+ - tr T-*T- + 1| = {worst:.1e} over {len(defects)} scattering matrices ({where}) (tol 1e-10)")

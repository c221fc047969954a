"""Command-line driver.

Each subcommand reads a YAML configuration (``--config``), applies
``--set key=value`` overrides, runs the experiment and writes CSV tables,
JSON matrices and PNG figures into ``--out``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import plotting
from .config import COMMANDS, ConfigError, dumps, load_config
from .errors import DiracWallError, MergeSingular, NearSingular, ThresholdEnergy
from .greens import green_point_eval
from .leaf_solver import BoundaryAmplitudes, LeafConfig, LeafSystem
from .localized_modes import WellConfig, detect_null_space, find_resonant_length, localized_field, quantization_residual
from .merge_engine import build_tree, sequential_fold
from .output import ensure_dir, write_csv, write_json
from .potentials import Family, PotentialSpec
from .spectral_basis import EnergyContext, ModeIndex
from .transport import conductivity, currents_from_S, scattering_from_TR, solve_slab

log = logging.getLogger("diracwall")


def _label(m: ModeIndex) -> str:
    return f"({m.n},{m.eps:+d})"


def _path(out, name):
    return os.path.join(out, name)


def cmd_green_eval(cfg, out, threads=1, figures=True) -> dict:
    x, y = cfg.x.values(), cfg.y.values()
    x0, y0 = (float(v) for v in cfg.source)
    X, Y = np.meshgrid(x, y, indexing="ij")
    rows, maps = [], {}
    for n_y in cfg.truncations:
        ctx = EnergyContext(cfg.energy, int(n_y))
        G = np.abs(green_point_eval(X, Y, x0, y0, ctx))
        maps[int(n_y)] = G[..., 0, 0]
        for i in range(len(x)):
            for j in range(len(y)):
                g = G[i, j]
                rows.append((int(n_y), x[i], y[j], g[0, 0], g[0, 1], g[1, 0], g[1, 1]))
    write_csv(_path(out, "green.csv"), ["n_y", "x", "y", "abs_G11", "abs_G12", "abs_G21", "abs_G22"], rows)
    if figures:
        plotting.green_maps(x, y, maps, _path(out, "green.png"))
    return {"maps": maps, "x": x, "y": y}


def _scattering_record(S):
    return {
        "E": S.E,
        "interval": list(S.interval),
        "modes": [_label(m) for m in S.modes],
        "S": S.full(),
        "R_plus": S.R_plus,
        "T_plus": S.T_plus,
        "R_minus": S.R_minus,
        "T_minus": S.T_minus,
        "quantization_defect": S.quantization_defect(),
    }


def cmd_solve(cfg, out, threads=1, figures=True) -> dict:
    ctx = EnergyContext(cfg.energy, cfg.solver.n_y)
    spec = cfg.potential.build(cfg.energy)
    interval = tuple(cfg.interval) if cfg.interval else spec.window
    modes = [ModeIndex.parse(str(m)) for m in cfg.incoming] or ctx.propagating
    s = cfg.solver
    sol = solve_slab(spec, interval, s.levels, LeafConfig(interval, s.n_x, s.n_y, s.oversample), ctx, modes, threads=threads)
    labels = [_label(m) for m in modes]

    rows = []
    for k, xk in enumerate(sol.grid):
        for c, lab in enumerate(labels):
            for n in range(ctx.n_y):
                a = sol.amps.minus[k][n, c]
                rows.append((lab, xk, f"({n},-1)", a.real, a.imag, abs(a)))
            for n in range(1, ctx.n_y):
                a = sol.amps.plus[k][n - 1, c]
                rows.append((lab, xk, f"({n},+1)", a.real, a.imag, abs(a)))
    write_csv(_path(out, "amplitudes.csv"), ["incoming", "x", "mode", "re", "im", "abs"], rows)

    cur = sol.grid_currents()
    write_csv(_path(out, "currents.csv"), ["x"] + [f"j_{l}" for l in labels], [(x, *c) for x, c in zip(sol.grid, cur)])

    xs, ys = cfg.x.values(), cfg.y.values()
    psi = np.stack([sol.field_at(float(x), ys) for x in xs], axis=2)  # (2, column, x, y)
    frows = []
    for c, lab in enumerate(labels):
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                p1, p2 = psi[0, c, i, j], psi[1, c, i, j]
                frows.append((lab, x, y, p1.real, p1.imag, p2.real, p2.imag))
    write_csv(_path(out, "field.csv"), ["incoming", "x", "y", "re_psi1", "im_psi1", "re_psi2", "im_psi2"], frows)

    S = scattering_from_TR(sol.tree.root, ctx)
    write_json(_path(out, "scattering.json"), _scattering_record(S))
    if figures:
        for c, lab in enumerate(labels):
            plotting.field_maps(xs, ys, psi[:, c], _path(out, f"field_{c}.png"), title=f"incoming {lab}")
        plotting.current_fluctuations(sol.grid, cur, labels, _path(out, "currents.png"))
    return {"solution": sol, "psi": psi, "currents": cur, "S": S}


def cmd_conductivity_sweep(cfg, out, threads=1, figures=True) -> dict:
    s = cfg.solver
    energies = cfg.energies.values()
    points = [(E, lam) for E in energies for lam in cfg.scales]

    def run(point):
        E, lam = point
        spec = cfg.potential.build(E, scale=lam)
        interval = tuple(cfg.interval) if cfg.interval else spec.window
        try:
            return conductivity(E, spec, cfg.x0, interval=interval, levels=s.levels, n_x=s.n_x, n_y=s.n_y, oversample=s.oversample)
        except ThresholdEnergy as exc:
            log.warning("skipping E=%s: %s", E, exc)
            return None

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, points))
    else:
        results = [run(p) for p in points]

    kmax = max((len(r.modes) for r in results if r is not None), default=1)
    labels = ["(0,-1)"]
    for n in range(1, (kmax - 1) // 2 + 1):
        labels += [f"({n},-1)", f"({n},+1)"]
    rows, failures = [], []
    jgrid = np.full((len(energies), len(cfg.scales), len(labels)), np.nan)
    for idx, ((E, lam), r) in enumerate(zip(points, results)):
        if r is None:
            continue
        js = dict(zip((_label(m) for m in r.modes), r.j))
        ok = abs(r.value + 1.0) <= cfg.tolerance
        if not ok:
            failures.append((E, lam, r.value))
            log.warning("conductivity off quantization at E=%s lambda=%s: %s", E, lam, r.value)
        rows.append((E, lam, *[js.get(l) for l in labels], r.value, r.value + 1.0, ok))
        jgrid[idx // len(cfg.scales), idx % len(cfg.scales), : len(labels)] = [js.get(l, np.nan) for l in labels]
    header = ["E", "lambda"] + [f"j_{l}" for l in labels] + ["sum_j", "defect", "pass"]
    write_csv(_path(out, "conductivity.csv"), header, rows)
    if figures:
        plotting.conductivity_curves(energies, cfg.scales, jgrid, labels, _path(out, "conductivity.png"))
    return {"rows": rows, "failures": failures, "results": results}


def cmd_scattering_sweep(cfg, out, threads=1, figures=True) -> dict:
    ctx = EnergyContext(cfg.energy, cfg.solver.n_y)
    spec = cfg.potential.build(cfg.energy)
    grid = cfg.start + cfg.leaf_length * np.arange(cfg.n_leaves + 1)
    s = cfg.solver
    lengths, mats, currents, defects = [], [], [], []
    for tr in sequential_fold(spec, grid, LeafConfig((grid[0], grid[1]), s.n_x, s.n_y, s.oversample), ctx):
        S = scattering_from_TR(tr, ctx)
        lengths.append(tr.interval[1] - tr.interval[0])
        mats.append(S)
        currents.append(currents_from_S(S).j)
        defects.append(S.quantization_defect())
    modes = mats[0].modes
    labels = [_label(m) for m in modes]
    full = np.array([S.full() for S in mats])
    header = ["l"]
    for p in labels:
        for n in labels:
            header += [f"abs_{n}->{p}", f"arg_{n}->{p}"]
    header += [f"j_{l}" for l in labels] + ["sum_j", "quantization_defect"]
    rows = []
    for i, l in enumerate(lengths):
        row = [l]
        for p in range(len(labels)):
            for n in range(len(labels)):
                row += [abs(full[i, p, n]), np.angle(full[i, p, n])]
        row += list(currents[i]) + [float(np.sum(currents[i])), defects[i]]
        rows.append(row)
    write_csv(_path(out, "scattering.csv"), header, rows)
    write_json(_path(out, "scattering.json"), [dict(l=l, **_scattering_record(S)) for l, S in zip(lengths, mats)])
    if figures:
        plotting.scattering_grid(lengths, np.abs(full), labels, _path(out, "scattering.png"))
        plotting.sweep_currents(np.array(lengths), np.array(currents), labels, _path(out, "currents.png"))
    return {"lengths": np.array(lengths), "S": mats, "currents": np.array(currents), "defects": np.array(defects)}


def cmd_localized(cfg, out, threads=1, figures=True) -> dict:
    well0 = WellConfig.from_inner_wavenumber(cfg.energy, cfg.xi_inner, cfg.level, k=cfg.branch)
    l = find_resonant_length(cfg.energy, well0.V0, cfg.level, cfg.branch)
    well = WellConfig(cfg.energy, well0.V0, l, cfg.level, cfg.branch)
    write_csv(
        _path(out, "roots.csv"),
        ["branch", "E", "V0", "level", "xi_inner", "length", "residual"],
        [(cfg.branch, cfg.energy, well.V0, cfg.level, well.xi_inner, l, quantization_residual(well))],
    )
    length = l + cfg.length_shift
    s = cfg.solver
    ctx = EnergyContext(cfg.energy, s.n_y)
    spec = PotentialSpec(Family.CONST, (0.0, length), const_value=well.V0)
    rep = detect_null_space(spec, LeafConfig((0.0, length), s.n_x, s.n_y, s.oversample), ctx)
    found = rep.sigma_min < cfg.null_threshold
    summary = {
        "length": length,
        "resonant_length": l,
        "V0": well.V0,
        "singular_values_tail": rep.singular_values,
        "condition": rep.condition,
        "null_residual": rep.residual,
        "null_space": bool(found),
    }
    write_json(_path(out, "svd.json"), summary)
    if not found:
        log.info("no null space: sigma_min = %.3e", rep.sigma_min)
        return {"report": rep, "summary": summary, "field": None}
    xs, ys = cfg.x.values(), cfg.y.values()
    psi = localized_field(rep.null_vector, xs, ys, ctx)
    rows = [
        (x, y, psi[0, i, j].real, psi[0, i, j].imag, psi[1, i, j].real, psi[1, i, j].imag)
        for i, x in enumerate(xs)
        for j, y in enumerate(ys)
    ]
    write_csv(_path(out, "field.csv"), ["x", "y", "re_psi1", "im_psi1", "re_psi2", "im_psi2"], rows)
    if figures:
        plotting.field_maps(xs, ys, psi, _path(out, "localized.png"), title=f"well length {length:.6g}")
    return {"report": rep, "summary": summary, "field": psi}


def density_error(rho, ref) -> float:
    """Relative l2 distance of Legendre x Hermite coefficient tensors (zero padded)."""
    a, b = rho.coeffs, ref.coeffs
    shape = tuple(max(p, q) for p, q in zip(a.shape, b.shape))
    A = np.zeros(shape, dtype=complex)
    B = np.zeros(shape, dtype=complex)
    A[: a.shape[0], : a.shape[1]] = a
    B[: b.shape[0], : b.shape[1]] = b
    return float(np.linalg.norm(A - B) / np.linalg.norm(B))


def _density(spec, interval, n_x, n_y, oversample, E, mode):
    ctx = EnergyContext(E, n_y)
    sysl = LeafSystem(spec, LeafConfig(interval, n_x, n_y, oversample), ctx)
    return sysl.density(BoundaryAmplitudes.unit(n_y, mode.n, mode.eps))


def cmd_convergence(cfg, out, threads=1, figures=True) -> dict:
    spec = cfg.potential.build(cfg.energy)
    interval = tuple(cfg.interval)
    ref = cfg.reference
    rows, series = [], {}
    if cfg.study == "density":
        mode = ModeIndex.parse(cfg.incoming)
        rho_ref = _density(spec, interval, ref.n_x, ref.n_y, ref.oversample, cfg.energy, mode)
        tail = np.linalg.norm(rho_ref.coeffs, axis=(0, 2))
        tail = np.sqrt(np.cumsum((tail**2)[::-1])[::-1]) / np.linalg.norm(rho_ref.coeffs)
        ex = []
        for n_x in cfg.n_x:
            e = density_error(_density(spec, interval, int(n_x), ref.n_y, ref.oversample, cfg.energy, mode), rho_ref)
            ex.append(e)
            rows.append(("n_x", int(n_x), ref.n_y, e, None))
        ey = []
        for n_y in cfg.n_y:
            e = density_error(_density(spec, interval, ref.n_x, int(n_y), ref.oversample, cfg.energy, mode), rho_ref)
            ey.append(e)
            rows.append(("n_y", ref.n_x, int(n_y), e, tail[int(n_y)] if int(n_y) < len(tail) else 0.0))
        write_csv(_path(out, "convergence.csv"), ["sweep", "n_x", "n_y", "error", "reference_tail"], rows)
        series = {"e(n_x)": (cfg.n_x, ex), "e(n_y)": (cfg.n_y, ey)}
        if figures:
            plotting.convergence_curves({"e(n_x), n_y=ref": (cfg.n_x, ex)}, _path(out, "convergence_nx.png"), "n_x")
            tail_y = [tail[int(n)] if int(n) < len(tail) else 0.0 for n in cfg.n_y]
            plotting.convergence_curves(
                {"e(n_y), n_x=ref": (cfg.n_y, ey), "reference tail": (cfg.n_y, tail_y)}, _path(out, "convergence_ny.png"), "n_y"
            )
        return {"rows": rows, "series": series}

    def smat(n_x, n_y, levels):
        ctx = EnergyContext(cfg.energy, n_y)
        tree = build_tree(spec, interval, levels, LeafConfig(interval, n_x, n_y, ref.oversample), ctx, threads=threads)
        return scattering_from_TR(tree.root, ctx).full()

    S_ref = smat(ref.n_x, ref.n_y, ref.levels)
    for L in cfg.levels:
        ex = []
        for n_x in cfg.n_x:
            e = float(np.linalg.norm(smat(int(n_x), ref.n_y, int(L)) - S_ref))
            ex.append(e)
            rows.append(("n_x", int(L), int(n_x), ref.n_y, e))
        series[f"n_x, L={L}"] = (cfg.n_x, ex)
    ey = []
    for n_y in cfg.n_y:
        e = float(np.linalg.norm(smat(ref.n_x, int(n_y), ref.levels) - S_ref))
        ey.append(e)
        rows.append(("n_y", ref.levels, ref.n_x, int(n_y), e))
    series["n_y"] = (cfg.n_y, ey)
    write_csv(_path(out, "convergence.csv"), ["sweep", "levels", "n_x", "n_y", "error"], rows)
    if figures:
        plotting.convergence_curves(series, _path(out, "convergence.png"))
    return {"rows": rows, "series": series}


HANDLERS = {
    "green-eval": cmd_green_eval,
    "solve": cmd_solve,
    "conductivity-sweep": cmd_conductivity_sweep,
    "scattering-sweep": cmd_scattering_sweep,
    "localized": cmd_localized,
    "convergence": cmd_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diracwall", description="Dirac domain-wall scattering solver")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML configuration file")
        sp.add_argument("--out", default="out", help="output directory (created if missing)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config value")
        sp.add_argument("--no-figures", action="store_true", help="skip PNG figures")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.command, args.config, args.set)
        out = ensure_dir(args.out)
        with open(_path(out, "config.yaml"), "w") as fh:
            fh.write(dumps(cfg))
        t0 = time.perf_counter()
        HANDLERS[args.command](cfg, out, threads=args.threads, figures=not args.no_figures)
        log.info("%s finished in %.1f s", args.command, time.perf_counter() - t0)
    except (NearSingular, MergeSingular) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError, DiracWallError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

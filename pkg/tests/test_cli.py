import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diracwall import ConfigError
from diracwall.cli import main
from diracwall.config import (
    COMMANDS,
    ConductivitySweepConfig,
    SolveConfig,
    apply_overrides,
    dumps,
    from_dict,
    load_config,
    loads,
)
from diracwall.output import complex_matrix, fmt, read_csv
from diracwall.spectral_basis import mode_profile, ModeIndex


def _run(tmp_path, command, *sets, name="out", extra=()):
    out = tmp_path / name
    args = [command, "--out", str(out), "--no-figures"]
    for s in sets:
        args += ["--set", s]
    return main(args + list(extra)), out


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_default_config_round_trip(command):
    cfg = COMMANDS[command]()
    assert loads(COMMANDS[command], dumps(cfg)) == cfg
    cfg.validate()


@settings(max_examples=30, deadline=None)
@given(
    E=st.floats(0.1, 5.0),
    lam=st.lists(st.floats(-3, 3), min_size=1, max_size=4),
    levels=st.integers(0, 6),
    fam=st.sampled_from(["V0", "V1", "V2", "V3", "V4", "ConstScalar", "Zero"]),
)
def test_config_round_trip_property(E, lam, levels, fam):
    cfg = from_dict(
        ConductivitySweepConfig,
        {"energies": {"start": E, "stop": E + 0.5, "count": 3}, "scales": lam, "potential": {"family": fam}, "solver": {"levels": levels}},
    )
    assert loads(ConductivitySweepConfig, dumps(cfg)) == cfg


def test_nested_override_keeps_section_defaults():
    cfg = load_config("conductivity-sweep", None, ["energies.count=2", "solver.n_y=40"])
    assert cfg.energies.start == 1.5 and cfg.energies.count == 2
    assert cfg.solver.levels == 4 and cfg.solver.n_y == 40


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        from_dict(SolveConfig, {"energy": 1.8, "bogus": 1})
    with pytest.raises(ConfigError):
        from_dict(SolveConfig, {"solver": {"nx": 3}})
    with pytest.raises(ConfigError):
        apply_overrides({}, ["novalue"])


def test_file_and_override_precedence(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("energy: 1.7\nsolver:\n  n_x: 6\n  n_y: 12\n")
    cfg = load_config("solve", str(p), ["solver.n_y=14"])
    assert cfg.energy == 1.7 and cfg.solver.n_x == 6 and cfg.solver.n_y == 14


def test_fmt_is_seventeen_digits():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(True) == "1" and fmt(None) == "" and fmt(3) == "3"


def test_validation_exit_code(tmp_path, capsys):
    code, _ = _run(tmp_path, "solve", "energy=-1")
    assert code == 2
    code, _ = _run(tmp_path, "solve", "potential.family=V9")
    assert code == 2
    code, _ = _run(tmp_path, "solve", "energy=1.4142135623730951", "solver.n_y=4", "solver.n_x=4")
    assert code == 2
    p = tmp_path / "bad.yaml"
    p.write_text("energy: [1, 2\n")
    assert main(["solve", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


def test_singular_exit_code(tmp_path):
    l = 1.5422162040041363
    V0 = 1.8 - 5.0**0.5
    code, _ = _run(
        tmp_path,
        "solve",
        "potential.family=ConstScalar",
        f"potential.window=[0.0, {l!r}]",
        f"potential.const_value={V0!r}",
        "solver.n_x=30",
        "solver.n_y=4",
    )
    assert code == 3


def test_green_eval_outputs_are_deterministic(tmp_path):
    sets = ["x.count=3", "y.count=4", "truncations=[5, 20]"]
    code, out = _run(tmp_path, "green-eval", *sets, name="a")
    assert code == 0
    code, out2 = _run(tmp_path, "green-eval", *sets, name="b")
    a = (out / "green.csv").read_bytes()
    assert a == (out2 / "green.csv").read_bytes()
    header, rows = read_csv(out / "green.csv")
    assert header[:3] == ["n_y", "x", "y"] and len(rows) == 2 * 3 * 4
    assert (out / "config.yaml").exists()


def test_green_eval_single_point(tmp_path):
    code, out = _run(tmp_path, "green-eval", "x.start=3", "x.count=1", "y.start=0", "y.count=1", "truncations=[50]")
    assert code == 0
    _, rows = read_csv(out / "green.csv")
    assert len(rows) == 1 and np.isfinite(float(rows[0][3]))


def test_solve_free_field_is_plane_wave(tmp_path):
    code, out = _run(
        tmp_path, "solve", "potential.family=Zero", "solver.n_x=4", "solver.n_y=6", "solver.levels=1",
        "incoming=['(1,+1)']", "x.count=5", "y.count=3",
    )
    assert code == 0
    _, rows = read_csv(out / "field.csv")
    prof = mode_profile(ModeIndex(1, 1), 1.8)
    xi = np.sqrt(1.8**2 - 2)
    for r in rows:
        x, y = float(r[1]), float(r[2])
        want = np.exp(1j * xi * (x - (-1.0))) * prof.evaluate(np.array(y))
        got = np.array([float(r[3]) + 1j * float(r[4]), float(r[5]) + 1j * float(r[6])])
        np.testing.assert_allclose(got, want, atol=1e-13)
    S = json.loads((out / "scattering.json").read_text())
    np.testing.assert_allclose(np.abs(complex_matrix(S["S"])), np.eye(3), atol=1e-14)


def test_solve_reports_conserved_currents(tmp_path):
    code, out = _run(tmp_path, "solve", "solver.n_x=8", "solver.n_y=20", "solver.levels=2", "x.count=3", "y.count=3")
    assert code == 0
    header, rows = read_csv(out / "currents.csv")
    j = np.array([[float(v) for v in r[1:]] for r in rows])
    assert header[1:] == ["j_(0,-1)", "j_(1,-1)", "j_(1,+1)"]
    assert np.max(np.abs(j - j.mean(axis=0))) < 1e-12


def test_conductivity_sweep_table(tmp_path):
    code, out = _run(
        tmp_path, "conductivity-sweep", "energies.start=1.6", "energies.stop=1.9", "energies.count=2",
        "scales=[0.0, 1.0]", "solver.levels=1", "solver.n_x=10", "solver.n_y=30",
    )
    assert code == 0
    header, rows = read_csv(out / "conductivity.csv")
    assert header == ["E", "lambda", "j_(0,-1)", "j_(1,-1)", "j_(1,+1)", "sum_j", "defect", "pass"]
    assert len(rows) == 4 and all(r[-1] == "1" for r in rows)
    free = [r for r in rows if float(r[1]) == 0.0]
    for r in free:
        np.testing.assert_allclose([float(v) for v in r[2:5]], [-1, -1, 1], atol=1e-14)


def test_conductivity_sweep_skips_threshold(tmp_path):
    code, out = _run(
        tmp_path, "conductivity-sweep", "energies.start=1.4142135623730951", "energies.stop=1.7",
        "energies.count=2", "scales=[1.0]", "solver.levels=0", "solver.n_x=6", "solver.n_y=10",
        "potential.E0=1.8",
    )
    assert code == 0
    _, rows = read_csv(out / "conductivity.csv")
    assert len(rows) == 1


def test_scattering_sweep(tmp_path):
    code, out = _run(tmp_path, "scattering-sweep", "n_leaves=4", "solver.n_x=8", "solver.n_y=16", "potential.window=[0.0, 1.0]")
    assert code == 0
    header, rows = read_csv(out / "scattering.csv")
    assert len(rows) == 4
    assert all(abs(float(r[-1])) < 1e-10 for r in rows)
    data = json.loads((out / "scattering.json").read_text())
    S = complex_matrix(data[-1]["S"])
    np.testing.assert_allclose(S.conj().T @ S, np.eye(3), atol=1e-11)


def test_localized_reports(tmp_path):
    code, out = _run(tmp_path, "localized", "solver.n_x=30", "solver.n_y=4", "x.count=5", "y.count=5", name="hit")
    assert code == 0
    svd = json.loads((out / "svd.json").read_text())
    assert svd["null_space"] and svd["singular_values_tail"][-1] < 1e-10
    assert svd["resonant_length"] == pytest.approx(1.5422, abs=1e-3)
    assert (out / "field.csv").exists()
    code, out = _run(tmp_path, "localized", "solver.n_x=30", "solver.n_y=4", "length_shift=0.5", name="miss")
    assert code == 0
    svd = json.loads((out / "svd.json").read_text())
    assert not svd["null_space"] and svd["singular_values_tail"][-1] > 1e-2
    assert not (out / "field.csv").exists()


def test_convergence_identical_orders_give_zero(tmp_path):
    code, out = _run(
        tmp_path, "convergence", "reference.n_x=6", "reference.n_y=12", "n_x=[4, 6]", "n_y=[8, 12]",
        "interval=[0.0, 0.1]",
    )
    assert code == 0
    _, rows = read_csv(out / "convergence.csv")
    errs = {(r[0], int(r[1]), int(r[2])): float(r[3]) for r in rows}
    assert errs[("n_x", 6, 12)] == 0.0 and errs[("n_y", 6, 12)] == 0.0
    assert errs[("n_x", 4, 12)] > 0.0


def test_figures_written(tmp_path):
    out = tmp_path / "fig"
    code = main(["green-eval", "--out", str(out), "--set", "x.count=3", "--set", "y.count=3", "--set", "truncations=[5]"])
    assert code == 0 and (out / "green.png").stat().st_size > 0

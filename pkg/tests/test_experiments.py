from __future__ import annotations

import json
import math

import numpy as np
import pytest

from dqhe.experiments.cli import main
from dqhe.experiments.config import ConfigError, RunConfig, load_config, parse_config
from dqhe.experiments.disorder import sample_disorder
from dqhe.experiments.figures import PRESETS, figure_sweep, preset_panels
from dqhe.experiments.io import read_csv, write_csv
from dqhe.experiments.sweeps import disorder_averaged_curve, resolve_points, run_points

SCAN = """
[chain]
N = 2
[scan]
axis = Jbar_over_h
values = 0.3, 0.7
[ramp]
t_ramp_ns = 30
"""


def test_defaults():
    cfg = RunConfig()
    assert cfg.chain.N == 2 and cfg.ramp.h_MHz == 76.0 and cfg.disorder.N_alpha == 500
    assert cfg.ramp.v == pytest.approx(math.pi / 100)


def test_parse_config_sections():
    cfg = parse_config("""
[chain]
N = 4
[ramp]
v_rad_per_ns = 0.1
h_rule_a = -85
h_rule_b = 3400
theta_final = pi/2
[disorder]
enabled = yes
eta = 0.05
N_alpha = 10
[scan]
axis = Jbar_over_h
start = 0.1
stop = 0.5
num = 3
[circuit]
C_int = 0.2
flux_quantum_prefactor = false
""")
    assert cfg.chain.N == 4 and cfg.ramp.t_ramp_ns is None and cfg.ramp.v == 0.1
    assert cfg.ramp.h_MHz is None
    assert np.allclose(cfg.scan.grid(), [0.1, 0.3, 0.5])
    assert cfg.circuit.C_int == 0.2 and not cfg.circuit.flux_quantum_prefactor_enabled
    assert cfg.disorder.enabled and cfg.disorder.N_alpha == 10


@pytest.mark.parametrize("text", [
    "[chain]\nmode = direct\n[scan]\naxis = I_b\nvalues = 0.1",
    "[chain]\nJ_MHz = 10\nJbar_over_h = 0.2",
    "[disorder]\neta = 1.5",
    "[scan]\naxis = sideways",
    "[nonsense]\nx = 1",
    "[chain]\ncolour = blue",
    "[ramp]\nt_ramp_ns = 10\nv_rad_per_ns = 0.3",
])
def test_parse_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_config_missing(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_sample_disorder_properties():
    assert sample_disorder(0.0, 1, 5) == sample_disorder(0.0, 2, 9)
    assert sample_disorder(0.0, 1, 5).alpha1 == 1.0
    assert sample_disorder(0.05, 7, 3, 2) == sample_disorder(0.05, 7, 3, 2)
    a = np.array([[s.alpha1, s.alpha2] for s in (sample_disorder(0.05, 11, i) for i in range(10_000))])
    assert a.min() >= 0.95 and a.max() <= 1.05
    assert np.all(np.abs(a.mean(axis=0) - 1) < 0.002)
    with pytest.raises(ValueError):
        sample_disorder(1.0, 0, 0)


def test_resolve_points_ratio_and_rule():
    pts = resolve_points(parse_config(SCAN))
    assert [p.Jbar_over_h for p in pts] == pytest.approx([0.3, 0.7])
    ruled = parse_config(SCAN + "h_rule_a = -85\nh_rule_b = 3400\n")
    for p in resolve_points(ruled):
        assert p.h == pytest.approx(ruled.ramp.field_rule.amplitude(p.bond.Jbar))


def test_resolve_points_circuit():
    cfg = parse_config("[chain]\nmode = circuit\n[scan]\naxis = I_b\nvalues = 0.0, 0.5")
    pts = resolve_points(cfg)
    assert pts[0].bond.Jx > pts[1].bond.Jx and pts[0].bond.Jz != pts[0].bond.Jx


def test_eta_zero_matches_deterministic():
    cfg = parse_config(SCAN + "[disorder]\nenabled = true\neta = 0\nN_alpha = 3\n")
    avg = disorder_averaged_curve(cfg)
    det = run_points(cfg, disorder=False)
    for a, d in zip(avg, det):
        # Batch composition changes the shared step sequence, so agreement is at integrator tolerance.
        assert a.F_mean == pytest.approx(float(d.F[0]), abs=1e-8)
        assert a.n_samples == 3 and a.n_failed == 0


def test_standard_error_scaling():
    base = SCAN.replace("0.3, 0.7", "0.3") + "[disorder]\nenabled = true\neta = 0.05\n"
    se = {}
    for n in (125, 500, 2000):
        se[n] = disorder_averaged_curve(parse_config(base + f"N_alpha = {n}\n"))[0].F_std_err
    for n in (500, 2000):
        ratio = se[125] / se[n]
        assert ratio == pytest.approx(math.sqrt(n / 125), rel=0.2)


def test_chern_scan_values():
    cfg = parse_config(SCAN.replace("30", "100") + "[chern]\nenabled = true\ngrid_size = 41\n")
    r = run_points(cfg)
    assert r[0].Ch[0] == pytest.approx(2.0, abs=0.02)
    assert r[1].Ch[0] == pytest.approx(0.0, abs=0.02)


def test_csv_round_trip(tmp_path):
    p = write_csv(tmp_path / "a.csv", ["x_ns", "y"], [{"x_ns": 0.1, "y": 2}, {"x_ns": 1 / 3, "y": None}])
    rows = read_csv(p)
    assert float(rows[1]["x_ns"]) == 1 / 3 and rows[1]["y"] == ""


def test_figure_sweep_bit_identical(tmp_path):
    cfg = parse_config(SCAN + "[disorder]\nenabled = true\neta = 0.05\nN_alpha = 6\nbase_seed = 42\n")
    a = figure_sweep(cfg, "disorder", tmp_path / "a")
    b = figure_sweep(cfg, "disorder", tmp_path / "b", threads=2)
    assert a[0].read_bytes() == b[0].read_bytes()
    manifest = json.loads(a[-1].read_text())
    assert manifest["seed"] == 42 and "wall_time_s" in manifest and manifest["config"]["chain"]["N"] == 2


def test_different_seed_changes_output(tmp_path):
    text = SCAN + "[disorder]\nenabled = true\neta = 0.1\nN_alpha = 4\nbase_seed = {}\n"
    a = figure_sweep(parse_config(text.format(1)), "disorder", tmp_path / "a")
    b = figure_sweep(parse_config(text.format(2)), "disorder", tmp_path / "b")
    assert a[0].read_bytes() != b[0].read_bytes()


def test_presets_resolve():
    for name in PRESETS:
        panels = preset_panels(name, quick=True)
        assert panels and all(p[0].startswith(name) for p in panels)


def test_cli_couplings_and_ramp(tmp_path, capsys):
    assert main(["couplings-scan", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "run_couplings.csv")
    assert 35 < float(rows[0]["Jx_MHz"]) < 45
    cfg = tmp_path / "c.ini"
    cfg.write_text("[chain]\nJbar_over_h = 0.4\n[ramp]\nt_ramp_ns = 100\n[output]\nname = single\n")
    assert main(["ramp", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    F = float(read_csv(tmp_path / "single_ramp.csv")[0]["F"])
    assert F == pytest.approx(1.0, abs=0.02)


def test_cli_preset_and_errors(tmp_path, capsys):
    assert main(["preset", "fig2", "--quick", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "fig2_couplings.csv").exists()
    bad = tmp_path / "bad.ini"
    bad.write_text("[scan]\naxis = nowhere\n")
    assert main(["scan", "--config", str(bad)]) == 1
    assert "scan.axis" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["preset", "fig9"])
    assert main(["ramp", "--threads", "0"]) == 2

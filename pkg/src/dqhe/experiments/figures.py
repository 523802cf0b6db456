"""Tables for each run kind, figure presets, and the dataset writer."""
from __future__ import annotations

import math
import time
from dataclasses import replace
from pathlib import Path
from typing import Callable

import numpy as np

from .. import __version__
from ..circuit_map import CircuitParams, couplings, rad_per_ns_to_mhz
from .config import (
    CONTROL_COLUMNS,
    ChainConfig,
    ChernConfig,
    ConfigError,
    DecoherenceConfig,
    DisorderConfig,
    RampConfig,
    RunConfig,
    ScanConfig,
)
from .io import write_csv, write_manifest
from .sweeps import disorder_averaged_curve, gap_curve, run_points

KINDS = ("couplings-scan", "ramp", "scan", "chern", "disorder", "gap-scan")

Table = tuple[list[str], list[dict]]


def _mhz(x: float) -> float:
    return rad_per_ns_to_mhz(x)


def _point_cols(cfg: RunConfig) -> list[str]:
    ctrl = CONTROL_COLUMNS[cfg.scan.axis]
    cols = [ctrl] if ctrl != "Jbar_over_h" else []
    return cols + ["Jbar_over_h", "h_MHz", "Jx_MHz", "Jz_MHz", "Jbar_MHz", "t_ramp_ns", "theta_rad"]


def _point_row(cfg: RunConfig, p, theta: float | None = None) -> dict:
    ctrl = CONTROL_COLUMNS[cfg.scan.axis]
    row = {
        ctrl: p.index if ctrl == "point" else p.control,
        "Jbar_over_h": p.Jbar_over_h,
        "h_MHz": _mhz(p.h),
        "Jx_MHz": _mhz(p.bond.Jx),
        "Jz_MHz": _mhz(p.bond.Jz),
        "Jbar_MHz": _mhz(p.bond.Jbar),
        "t_ramp_ns": p.protocol.t_ramp,
        "theta_rad": p.protocol.theta_final if theta is None else theta,
    }
    return row


def couplings_table(cfg: RunConfig) -> Table:
    """Jx, Jz against bias current; uses the scan grid when it is an I_b scan."""
    grid = cfg.scan.grid() if cfg.scan.axis == "I_b" else np.linspace(0.0, 0.95, 96)
    rows = []
    for x in grid:
        c = couplings(cfg.circuit, float(x) * cfg.circuit.I_cr)
        rows.append({
            "I_b_over_Icr": float(x),
            "Jx_MHz": _mhz(c.Jx),
            "Jz_MHz": _mhz(c.Jz),
            "Jz_over_Jx": c.Jz / c.Jx if c.Jx != 0 else math.nan,
        })
    return ["I_b_over_Icr", "Jx_MHz", "Jz_MHz", "Jz_over_Jx"], rows


def scan_table(cfg: RunConfig, threads: int = 1) -> Table:
    """Curvature at the end of the ramp for every scan point."""
    if cfg.chern.enabled:
        cfg = cfg.replace(chern=ChernConfig(False))
    rows = []
    for r in run_points(cfg, threads, disorder=False):
        theta = float(r.theta_grid[-1]) if cfg.scan.axis == "theta" else None
        row = _point_row(cfg, r.point, theta)
        row.update(F=float(r.F[0]), M_theta_rad_per_ns=float(r.M_theta[0]),
                   sigma_y_total=float(np.sum(r.sigma_y[0])))
        rows.append(row)
    return _point_cols(cfg) + ["F", "M_theta_rad_per_ns", "sigma_y_total"], rows


def chern_tables(cfg: RunConfig, threads: int = 1) -> tuple[Table, Table]:
    """Summary (control, F, Ch) and long-format F(theta) per scan point."""
    cfg = cfg.replace(chern=replace(cfg.chern, enabled=True))
    summary, curve = [], []
    ctrl = CONTROL_COLUMNS[cfg.scan.axis]
    for r in run_points(cfg, threads, disorder=False):
        row = _point_row(cfg, r.point)
        row.update(F=float(r.F[0]), Ch=float(r.Ch[0]))
        summary.append(row)
        for th, f in zip(r.theta_grid, r.F_grid[0]):
            curve.append({ctrl: row[ctrl], "theta_rad": float(th), "F": float(f)})
    return ((_point_cols(cfg) + ["F", "Ch"], summary), ([ctrl, "theta_rad", "F"], curve))


def disorder_table(cfg: RunConfig, threads: int = 1) -> Table:
    if not cfg.disorder.enabled:
        cfg = cfg.replace(disorder=replace(cfg.disorder, enabled=True))
    from .sweeps import resolve_points

    points = resolve_points(cfg)
    rows = []
    for p, a in zip(points, disorder_averaged_curve(cfg, threads)):
        row = _point_row(cfg, p)
        row.update(F_mean=a.F_mean, F_std_err=a.F_std_err, Ch_mean=a.Ch_mean, Ch_std_err=a.Ch_std_err,
                   n_samples=a.n_samples, n_failed=a.n_failed, eta=cfg.disorder.eta)
        rows.append(row)
    cols = _point_cols(cfg) + ["eta", "F_mean", "F_std_err"]
    if cfg.chern.enabled:
        cols += ["Ch_mean", "Ch_std_err"]
    return cols + ["n_samples", "n_failed"], rows


def gap_table(cfg: RunConfig, n_theta: int = 33) -> Table:
    rows = []
    for p, g in gap_curve(cfg, n_theta):
        row = _point_row(cfg, p)
        row["gap_MHz"] = _mhz(g)
        rows.append(row)
    return _point_cols(cfg) + ["gap_MHz"], rows


def tables_for(kind: str, cfg: RunConfig, threads: int = 1) -> dict[str, Table]:
    """All tables a run kind produces, keyed by file suffix."""
    if kind == "couplings-scan":
        return {"couplings": couplings_table(cfg)}
    if kind in ("ramp", "scan"):
        if cfg.disorder.enabled:
            return {"disorder": disorder_table(cfg, threads)}
        return {kind: scan_table(cfg, threads)}
    if kind == "chern":
        s, c = chern_tables(cfg, threads)
        return {"chern": s, "chern_curve": c}
    if kind == "disorder":
        return {"disorder": disorder_table(cfg, threads)}
    if kind == "gap-scan":
        return {"gap": gap_table(cfg)}
    raise ConfigError(f"unknown run kind {kind!r}; expected one of {KINDS}")


def figure_sweep(cfg: RunConfig, kind: str = "scan", out_dir: str | Path | None = None,
                 threads: int = 1) -> list[Path]:
    """Run ``kind`` and write ``<name>_<table>.csv`` files plus ``<name>.json``."""
    out = Path(out_dir if out_dir is not None else cfg.output.dir)
    t0 = time.perf_counter()
    tables = tables_for(kind, cfg, threads)
    paths = [write_csv(out / f"{cfg.output.name}_{key}.csv", cols, rows)
             for key, (cols, rows) in tables.items()]
    manifest = {
        "kind": kind,
        "version": __version__,
        "seed": cfg.disorder.base_seed,
        "threads": threads,
        "wall_time_s": time.perf_counter() - t0,
        "files": [p.name for p in paths],
        "config": cfg.to_dict(),
    }
    paths.append(write_manifest(out / f"{cfg.output.name}.json", manifest))
    return paths


# Presets ---------------------------------------------------------------------

def _base(**kw) -> RunConfig:
    return RunConfig(**kw)


def _jx_window(circuit: CircuitParams, h_mhz: float, upper: float = 0.54) -> tuple[float, float]:
    lo = rad_per_ns_to_mhz(couplings(circuit, upper * circuit.I_cr).Jx)
    hi = rad_per_ns_to_mhz(couplings(circuit, 0.0).Jx)
    return lo / h_mhz, hi / h_mhz


def _preset_fig2(b: RunConfig, quick: bool):
    n = 24 if quick else 96
    return [("fig2", "couplings-scan", b.replace(chain=ChainConfig(2, "circuit"),
                                                 scan=ScanConfig("I_b", 0.0, 0.95, n)))]


def _preset_fig4a(b: RunConfig, quick: bool):
    n_ib, n_r = (6, 7) if quick else (48, 37)
    ramp = RampConfig(t_ramp_ns=100.0, h_MHz=76.0)
    circuit_scan = ScanConfig("I_b", 0.0, 0.92, n_ib)
    ratio_scan = ScanConfig("Jbar_over_h", 0.05, 0.95, n_r)
    direct = ChainConfig(2, "direct")
    panels = [
        ("fig4a_aniso", "scan", b.replace(chain=ChainConfig(2, "circuit"), ramp=ramp, scan=circuit_scan)),
        ("fig4a_iso", "scan", b.replace(chain=ChainConfig(2, "circuit", isotropic_proxy=True), ramp=ramp,
                                        scan=circuit_scan)),
        ("fig4a_direct", "scan", b.replace(chain=direct, ramp=ramp, scan=ratio_scan)),
    ]
    for t in (10.0, 100.0):
        panels.append((f"fig4a_open_t{int(t)}", "scan", b.replace(
            chain=direct, ramp=replace(ramp, t_ramp_ns=t),
            decoherence=DecoherenceConfig(enabled=True), scan=ratio_scan)))
    return panels


def _fixed_h(N: int, h_mhz: float, name: str):
    def build(b: RunConfig, quick: bool):
        lo, hi = _jx_window(b.circuit, h_mhz)
        ramp = RampConfig(t_ramp_ns=100.0, h_MHz=h_mhz)
        n = 5 if quick else 25
        return [(name, "scan", b.replace(chain=ChainConfig(N, "direct"), ramp=ramp,
                                         scan=ScanConfig("Jbar_over_h", lo, hi, n)))]
    return build


def _ruled(N: int, stop: float, name: str):
    def build(b: RunConfig, quick: bool):
        ramp = RampConfig(t_ramp_ns=100.0, h_MHz=None, h_rule_a=-85.0, h_rule_b=3400.0)
        n = 6 if quick else 40
        return [(name, "scan", b.replace(chain=ChainConfig(N, "direct"), ramp=ramp,
                                         scan=ScanConfig("Jbar_over_h", 0.05, stop, n)))]
    return build


def _preset_fig5(b: RunConfig, quick: bool):
    n = 6 if quick else 40
    return [("fig5", "scan", b.replace(chain=ChainConfig(2, "direct", Jbar_over_h=0.4),
                                       ramp=RampConfig(t_ramp_ns=100.0, h_MHz=76.0),
                                       scan=ScanConfig("t_ramp", 1.0, 200.0, n)))]


def _disorder_panels(b: RunConfig, quick: bool, chern: bool, prefix: str):
    n, n_alpha = (5, 16) if quick else (19, b.disorder.N_alpha)
    panels = []
    for eta in (0.05, 0.10):
        cfg = b.replace(chain=ChainConfig(2, "direct"), ramp=RampConfig(t_ramp_ns=100.0, h_MHz=76.0),
                        scan=ScanConfig("Jbar_over_h", 0.05, 0.95, n),
                        disorder=DisorderConfig(True, eta, n_alpha, b.disorder.base_seed),
                        chern=ChernConfig(chern, b.chern.grid_size if chern else 101))
        panels.append((f"{prefix}_eta{int(round(eta * 100)):02d}", "disorder", cfg))
    return panels


def _preset_fig6a(b: RunConfig, quick: bool):
    return _disorder_panels(b, quick, False, "fig6a")


def _preset_fig6b(b: RunConfig, quick: bool):
    panels = _disorder_panels(b, quick, True, "fig6b")
    gap_cfg = panels[0][2].replace(disorder=DisorderConfig(), chern=ChernConfig())
    panels.append(("fig6b_gap", "gap-scan", gap_cfg))
    return panels


PRESETS: dict[str, Callable[[RunConfig, bool], list]] = {
    "fig2": _preset_fig2,
    "fig4a": _preset_fig4a,
    "fig4b": _fixed_h(4, 49.0, "fig4b"),
    "fig4c": _ruled(4, 1.0, "fig4c"),
    "fig4d": _fixed_h(6, 36.0, "fig4d"),
    "fig4e": _ruled(6, 1.2, "fig4e"),
    "fig5": _preset_fig5,
    "fig6a": _preset_fig6a,
    "fig6b": _preset_fig6b,
}


def preset_panels(name: str, base: RunConfig | None = None, quick: bool = False) -> list[tuple[str, str, RunConfig]]:
    """``(panel, kind, config)`` triples; ``base`` supplies circuit, evolver and seed."""
    try:
        build = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return build(base or RunConfig(), quick)


def run_preset(name: str, out_dir: str | Path, base: RunConfig | None = None, threads: int = 1,
               quick: bool = False) -> list[Path]:
    paths = []
    for panel, kind, cfg in preset_panels(name, base, quick):
        cfg = cfg.replace(output=replace(cfg.output, name=panel))
        paths += figure_sweep(cfg, kind, out_dir, threads)
    return paths

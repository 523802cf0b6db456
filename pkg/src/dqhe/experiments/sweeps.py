"""Scan orchestration: resolve scan points, batch trajectories, aggregate.

Work is cut into chunks whose composition depends only on the configuration,
never on the worker count, so results are identical for any ``threads``.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..circuit_map import CouplingStrengths, couplings
from ..evolve_lindblad import DecoherenceParams, evolve_open_batch
from ..evolve_unitary import EvolverConfig, evolve_batch
from ..integrate import IntegrationError
from ..probes import chern_from_samples, chern_grid, curvature_from_sigma_y
from ..schedules import LinearFieldRule, RampProtocol
from ..spin_system import MagneticField, SpinChainSpec, build_hamiltonian, chain_operators, diagonalize
from .config import ConfigError, RunConfig
from .disorder import sample_block

log = logging.getLogger(__name__)

#: Scan points integrated together in one batch.
POINT_CHUNK = 16
#: Disorder realisations integrated together in one batch.
SAMPLE_CHUNK = 250
#: Largest tolerated fraction of failed disorder trajectories.
MAX_FAILURE_FRACTION = 0.01


class SweepError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScanPoint:
    index: int
    control: float
    N: int
    bond: CouplingStrengths
    h: float
    protocol: RampProtocol

    @property
    def Jbar_over_h(self) -> float:
        return self.bond.Jbar / self.h if self.h else math.inf

    def spec(self) -> SpinChainSpec:
        return SpinChainSpec.homogeneous(self.N, self.bond, MagneticField(self.h, 0.0, self.protocol.phi))

    def interaction(self) -> np.ndarray:
        return chain_operators(self.N).interaction([self.bond] * (self.N - 1))


def _field_for(rule, Jbar: float) -> float:
    return rule.amplitude(Jbar)


def _direct_bond(cfg: RunConfig, rule) -> tuple[CouplingStrengths, float]:
    c = cfg.chain
    if c.J_MHz is not None:
        J = 2 * math.pi * c.J_MHz * 1e-3
        return CouplingStrengths.isotropic(J), rule.amplitude(J)
    ratio = c.Jbar_over_h if c.Jbar_over_h is not None else 0.0
    return _ratio_bond(ratio, rule)


def _ratio_bond(ratio: float, rule) -> tuple[CouplingStrengths, float]:
    if isinstance(rule, LinearFieldRule):
        h = rule.at_ratio(ratio)
    else:
        h = rule.h
    return CouplingStrengths.isotropic(ratio * h), h


def _circuit_bond(cfg: RunConfig, fraction: float, rule) -> tuple[CouplingStrengths, float]:
    c = couplings(cfg.circuit, fraction * cfg.circuit.I_cr)
    bond = CouplingStrengths.isotropic(c.Jbar) if cfg.chain.isotropic_proxy else c
    return bond, rule.amplitude(c.Jbar)


def resolve_points(cfg: RunConfig) -> list[ScanPoint]:
    """Expand the scan axis into concrete chain/field/protocol triples."""
    rule = cfg.ramp.field_rule
    base_protocol = cfg.ramp.protocol()
    N = cfg.chain.N

    def base_bond():
        if N == 1:
            return CouplingStrengths(0.0, 0.0, 0.0), rule.amplitude(0.0)
        if cfg.chain.mode == "circuit":
            return _circuit_bond(cfg, cfg.I_b_over_Icr or 0.0, rule)
        return _direct_bond(cfg, rule)

    axis = cfg.scan.axis
    points = []
    for i, x in enumerate(cfg.scan.grid()):
        x = float(x)
        protocol = base_protocol
        if axis == "I_b":
            bond, h = _circuit_bond(cfg, x, rule)
        elif axis == "Jbar_over_h":
            bond, h = _ratio_bond(x, rule)
        elif axis == "t_ramp":
            if x <= 0:
                raise ConfigError("ramp times must be positive")
            protocol = replace(base_protocol, v=math.pi / x)
            bond, h = base_bond()
        else:
            bond, h = base_bond()
        points.append(ScanPoint(i, x, N, bond, h, protocol))
    return points


@dataclass(frozen=True)
class _Task:
    key: tuple
    N: int
    interactions: np.ndarray
    h: np.ndarray
    protocol: RampProtocol
    decoherence: DecoherenceParams | None
    evolver: EvolverConfig
    thetas: tuple[float, ...] | None


def _run_task(task: _Task):
    if task.decoherence is None:
        b = evolve_batch(task.N, task.interactions, task.h, task.protocol, task.evolver, task.thetas)
    else:
        b = evolve_open_batch(task.N, task.interactions, task.h, task.protocol, task.decoherence,
                              task.evolver, task.thetas)
    return b.sigma_y, b.sigma_y_grid, b.theta_grid, b.v_theta_grid


def _run_task_isolating(task: _Task):
    """Run a chunk; if it fails, rerun member by member and mark failures with NaN."""
    try:
        return _run_task(task), np.zeros(len(task.h), dtype=bool)
    except (IntegrationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.warning("chunk %s failed (%s); isolating members", task.key, exc)
    parts, failed = [], np.zeros(len(task.h), dtype=bool)
    template = None
    for b in range(len(task.h)):
        sub = replace(task, interactions=task.interactions[b:b + 1], h=task.h[b:b + 1])
        try:
            res = _run_task(sub)
            template = template or res
            parts.append(res)
        except (IntegrationError, FloatingPointError, np.linalg.LinAlgError):
            failed[b] = True
            parts.append(None)
    if template is None:
        raise SweepError(f"every trajectory in chunk {task.key} failed")
    sy = np.stack([p[0][0] if p else np.full_like(template[0][0], np.nan) for p in parts])
    grid = np.stack([p[1][0] if p else np.full_like(template[1][0], np.nan) for p in parts])
    return (sy, grid, template[2], template[3]), failed


def execute(tasks: Sequence[_Task], threads: int = 1) -> list:
    """Run tasks, returning results in task order whatever the worker count."""
    if threads <= 1 or len(tasks) <= 1:
        return [_run_task_isolating(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_task_isolating, tasks))


def _decoherence(cfg: RunConfig) -> DecoherenceParams | None:
    if not cfg.decoherence.enabled:
        return None
    return cfg.decoherence.params(cfg.circuit.omega_q)


def _record_plan(cfg: RunConfig, protocol: RampProtocol):
    """Protocol actually integrated plus the angles to record."""
    if cfg.scan.axis == "theta":
        thetas = tuple(sorted(set(float(t) for t in cfg.scan.grid())))
        if thetas[0] <= 0 or thetas[-1] > math.pi:
            raise ConfigError("theta scan values must lie in (0, pi]")
        return replace(protocol, theta_final=thetas[-1]), thetas
    if cfg.chern.enabled:
        if cfg.decoherence.enabled:
            raise ConfigError("Chern scans are closed-system only")
        thetas = tuple(chern_grid(cfg.chern.grid_size)) + (protocol.theta_final,)
        return replace(protocol, theta_final=math.pi), tuple(sorted(set(thetas)))
    return protocol, None


def _build_tasks(cfg: RunConfig, points: list[ScanPoint], multipliers: dict[int, np.ndarray] | None):
    deco = _decoherence(cfg)
    tasks, layout = [], []
    if multipliers is None:
        # Group consecutive points sharing one protocol, then cut fixed-size chunks.
        groups: list[list[ScanPoint]] = []
        for p in points:
            if groups and groups[-1][0].protocol == p.protocol:
                groups[-1].append(p)
            else:
                groups.append([p])
        for g in groups:
            run_protocol, thetas = _record_plan(cfg, g[0].protocol)
            for k in range(0, len(g), POINT_CHUNK):
                chunk = g[k:k + POINT_CHUNK]
                tasks.append(_Task(
                    key=("points", chunk[0].index),
                    N=cfg.chain.N,
                    interactions=np.stack([p.interaction() for p in chunk]),
                    h=np.array([p.h for p in chunk]),
                    protocol=run_protocol, decoherence=deco, evolver=cfg.evolver, thetas=thetas))
                layout.append([(p.index, 0) for p in chunk])
        return tasks, layout
    for p in points:
        run_protocol, thetas = _record_plan(cfg, p.protocol)
        Hint = p.interaction()
        alphas = multipliers[p.index]
        for k in range(0, len(alphas), SAMPLE_CHUNK):
            a = alphas[k:k + SAMPLE_CHUNK]
            tasks.append(_Task(
                key=("disorder", p.index, k),
                N=cfg.chain.N,
                interactions=a[:, 0, None, None] * Hint[None],
                h=a[:, 1] * p.h,
                protocol=run_protocol, decoherence=deco, evolver=cfg.evolver, thetas=thetas))
            layout.append([(p.index, k + j) for j in range(len(a))])
    return tasks, layout


@dataclass
class PointResult:
    """Per-sample curvature at one scan point (one sample without disorder)."""

    point: ScanPoint
    F: np.ndarray                 # (S,) at the measurement angle
    M_theta: np.ndarray           # (S,)
    sigma_y: np.ndarray           # (S, N)
    Ch: np.ndarray | None         # (S,)
    theta_grid: np.ndarray | None
    F_grid: np.ndarray | None     # (S, K)
    failed: int = 0


def run_points(cfg: RunConfig, threads: int = 1, disorder: bool | None = None) -> list[PointResult]:
    """Integrate every scan point (and disorder sample) of ``cfg``."""
    points = resolve_points(cfg)
    use_disorder = cfg.disorder.enabled if disorder is None else disorder
    multipliers = None
    if use_disorder:
        d = cfg.disorder
        multipliers = {p.index: sample_block(d.eta, d.base_seed, p.index, d.N_alpha) for p in points}
    tasks, layout = _build_tasks(cfg, points, multipliers)
    outputs = execute(tasks, threads)

    n_samples = cfg.disorder.N_alpha if use_disorder else 1
    N = cfg.chain.N
    per_point_sy = {p.index: np.full((n_samples, N), np.nan) for p in points}
    per_point_grid: dict[int, np.ndarray] = {}
    per_point_failed = {p.index: np.zeros(n_samples, dtype=bool) for p in points}
    theta_grid = v_grid = None
    for (res, failed), slots in zip(outputs, layout):
        sy, grid, theta_grid, v_grid = res
        for j, (pi, si) in enumerate(slots):
            per_point_sy[pi][si] = sy[j]
            per_point_failed[pi][si] = failed[j]
            if grid.shape[1]:
                per_point_grid.setdefault(pi, np.full((n_samples,) + grid.shape[1:], np.nan))[si] = grid[j]

    total = sum(int(f.sum()) for f in per_point_failed.values())
    if use_disorder and total > MAX_FAILURE_FRACTION * n_samples * len(points):
        raise SweepError(f"{total} of {n_samples * len(points)} disorder trajectories failed")

    results = []
    for p in points:
        ok = ~per_point_failed[p.index]
        sy = per_point_sy[p.index][ok]
        if multipliers is not None:
            h_s = p.h * multipliers[p.index][ok, 1]
        else:
            h_s = np.full(len(sy), p.h)
        grid = per_point_grid.get(p.index)
        F_grid = Ch = th = None
        if grid is not None:
            grid = grid[ok]
            th = np.asarray(theta_grid)
            F_grid = curvature_from_sigma_y(grid.sum(axis=-1), h_s[:, None], th[None, :], np.asarray(v_grid)[None, :])
        if cfg.scan.axis == "theta":
            theta_m = th[-1]
            F = F_grid[:, -1]
        elif cfg.chern.enabled:
            theta_m = p.protocol.theta_final
            k = int(np.argmin(np.abs(th - theta_m)))
            F = F_grid[:, k]
            # Interior of the uniform Chern grid only; the measurement angle may not be on it.
            cg = chern_grid(cfg.chern.grid_size)
            idx = [int(np.argmin(np.abs(th - t))) for t in cg]
            Ch = chern_from_samples(F_grid[:, idx], cfg.chern.grid_size)
        else:
            theta_m = p.protocol.theta_final
            v_m = p.protocol.v_theta(p.protocol.end_time())
            F = curvature_from_sigma_y(sy.sum(axis=-1), h_s, theta_m, v_m)
        M = F * p.protocol.v_theta(p.protocol.time_at(theta_m))
        results.append(PointResult(p, F, M, sy, Ch, th, F_grid, int((~ok).sum())))
    return results


@dataclass(frozen=True)
class AveragedResult:
    control: float
    F_mean: float
    F_std_err: float
    Ch_mean: float | None
    Ch_std_err: float | None
    n_samples: int
    n_failed: int


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(np.mean(x)), se


def disorder_averaged_curve(cfg: RunConfig, threads: int = 1) -> list[AveragedResult]:
    """Mean curvature (and Chern number when enabled) over ``N_alpha`` realisations."""
    if cfg.decoherence.enabled:
        raise ConfigError("disorder averaging is defined for the closed system")
    out = []
    for r in run_points(cfg, threads, disorder=True):
        Fm, Fse = _mean_se(r.F)
        Cm, Cse = _mean_se(r.Ch) if r.Ch is not None else (None, None)
        out.append(AveragedResult(r.point.control, Fm, Fse, Cm, Cse, len(r.F), r.failed))
    return out


def gap_curve(cfg: RunConfig, n_theta: int = 33) -> list[tuple[ScanPoint, float]]:
    """Smallest ground-state gap along the ramp path for each scan point."""
    out = []
    thetas = np.linspace(0.0, cfg.ramp.theta_final, n_theta)
    for p in resolve_points(cfg):
        gaps = []
        for th in thetas:
            spec = p.spec().with_field(MagneticField(p.h, float(th), p.protocol.phi))
            gaps.append(diagonalize(build_hamiltonian(spec)).gap)
        out.append((p, float(min(gaps))))
    return out

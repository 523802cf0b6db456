"""Run configuration read from INI-style files.

Sections and keys (all optional unless noted)::

    [chain]        N, mode = direct | circuit, J_MHz, Jbar_over_h,
                   isotropic_proxy (circuit mode: use Jbar on all axes)
    [circuit]      omega_q_GHz, C_j, C_jp1, C_int, L_R, L_L, M, I_cr, N1, N2, L_j,
                   flux_quantum_prefactor, frequency_convention, coupling_normalisation,
                   I_b_over_Icr
    [ramp]         t_ramp_ns | v_rad_per_ns, theta_final, phi,
                   h_MHz | h_rule_a + h_rule_b, t_meas_ns, measurement
    [decoherence]  enabled, T1_ns, T2_ns, temperature_mK, thermal, rate_convention
    [disorder]     enabled, eta, N_alpha, base_seed
    [scan]         axis = I_b | Jbar_over_h | t_ramp | theta | none,
                   start, stop, num  or  values = comma separated list
    [chern]        enabled, grid_size
    [evolver]      rel_tol, abs_tol, method, max_step
    [output]       dir, name
"""
from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

from ..circuit_map import CircuitParams
from ..evolve_lindblad import DecoherenceParams
from ..evolve_unitary import EvolverConfig
from ..schedules import ConstantField, LinearFieldRule, RampProtocol

SCAN_AXES = ("I_b", "Jbar_over_h", "t_ramp", "theta", "none")
CONTROL_COLUMNS = {
    "I_b": "I_b_over_Icr",
    "Jbar_over_h": "Jbar_over_h",
    "t_ramp": "t_ramp_ns",
    "theta": "theta_rad",
    "none": "point",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ChainConfig:
    N: int = 2
    mode: str = "direct"
    J_MHz: float | None = None
    Jbar_over_h: float | None = None
    isotropic_proxy: bool = False

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError("chain.N must be >= 1")
        if self.mode not in ("direct", "circuit"):
            raise ConfigError("chain.mode must be 'direct' or 'circuit'")
        if self.J_MHz is not None and self.Jbar_over_h is not None:
            raise ConfigError("set at most one of chain.J_MHz and chain.Jbar_over_h")


@dataclass(frozen=True)
class RampConfig:
    t_ramp_ns: float | None = 100.0
    v_rad_per_ns: float | None = None
    theta_final: float = math.pi / 2
    phi: float = 0.0
    h_MHz: float | None = 76.0
    h_rule_a: float | None = None
    h_rule_b: float | None = None
    t_meas_ns: float = 10.0
    measurement: str = "free"

    def __post_init__(self):
        if (self.t_ramp_ns is None) == (self.v_rad_per_ns is None):
            raise ConfigError("set exactly one of ramp.t_ramp_ns and ramp.v_rad_per_ns")
        rule = self.h_rule_a is not None or self.h_rule_b is not None
        if rule and self.h_MHz is not None:
            raise ConfigError("ramp.h_MHz and ramp.h_rule_* are mutually exclusive")
        if not rule and self.h_MHz is None:
            raise ConfigError("set ramp.h_MHz or ramp.h_rule_a/h_rule_b")

    @property
    def v(self) -> float:
        return self.v_rad_per_ns if self.v_rad_per_ns is not None else math.pi / self.t_ramp_ns

    @property
    def field_rule(self) -> ConstantField | LinearFieldRule:
        if self.h_MHz is not None:
            return ConstantField.from_mhz(self.h_MHz)
        return LinearFieldRule(
            self.h_rule_a if self.h_rule_a is not None else -85.0,
            self.h_rule_b if self.h_rule_b is not None else 3400.0,
        )

    def protocol(self, **changes) -> RampProtocol:
        kw = dict(v=self.v, theta_final=self.theta_final, phi=self.phi, h_rule=self.field_rule,
                  t_meas=self.t_meas_ns, measurement=self.measurement)
        kw.update(changes)
        return RampProtocol(**kw)


@dataclass(frozen=True)
class DecoherenceConfig:
    enabled: bool = False
    T1_ns: float = 658.0
    T2_ns: float = 812.0
    temperature_mK: float = 30.0
    thermal: bool = False
    rate_convention: str = "bare"

    def params(self, omega_q: float) -> DecoherenceParams:
        return DecoherenceParams(self.T1_ns, self.T2_ns, self.temperature_mK, omega_q,
                                 self.thermal, self.rate_convention)


@dataclass(frozen=True)
class DisorderConfig:
    enabled: bool = False
    eta: float = 0.0
    N_alpha: int = 500
    base_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.eta < 1.0:
            raise ConfigError("disorder.eta must lie in [0, 1)")
        if self.N_alpha < 1:
            raise ConfigError("disorder.N_alpha must be >= 1")
        if self.base_seed < 0:
            raise ConfigError("disorder.base_seed must be a non-negative integer")


@dataclass(frozen=True)
class ScanConfig:
    axis: str = "none"
    start: float | None = None
    stop: float | None = None
    num: int | None = None
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.axis not in SCAN_AXES:
            raise ConfigError(f"scan.axis must be one of {SCAN_AXES}")
        ranged = self.start is not None or self.stop is not None or self.num is not None
        if self.axis != "none":
            if ranged == (self.values is not None):
                raise ConfigError("give either scan.values or scan.start/stop/num")
            if ranged and None in (self.start, self.stop, self.num):
                raise ConfigError("scan.start, scan.stop and scan.num go together")

    def grid(self) -> np.ndarray:
        if self.axis == "none":
            return np.array([0.0])
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        return np.linspace(self.start, self.stop, int(self.num))


@dataclass(frozen=True)
class ChernConfig:
    enabled: bool = False
    grid_size: int = 101

    def __post_init__(self):
        if self.grid_size < 3:
            raise ConfigError("chern.grid_size must be >= 3")


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    name: str = "run"


@dataclass(frozen=True)
class RunConfig:
    chain: ChainConfig = ChainConfig()
    circuit: CircuitParams = CircuitParams()
    I_b_over_Icr: float | None = None
    ramp: RampConfig = RampConfig()
    decoherence: DecoherenceConfig = DecoherenceConfig()
    disorder: DisorderConfig = DisorderConfig()
    scan: ScanConfig = ScanConfig()
    chern: ChernConfig = ChernConfig()
    evolver: EvolverConfig = EvolverConfig()
    output: OutputConfig = OutputConfig()

    def __post_init__(self):
        ax = self.scan.axis
        if ax == "I_b" and self.chain.mode != "circuit":
            raise ConfigError("an I_b scan needs chain.mode = circuit")
        if self.chain.mode == "circuit" and (self.chain.J_MHz is not None or self.chain.Jbar_over_h is not None):
            raise ConfigError("circuit mode derives J from the bias current; drop chain.J_MHz/Jbar_over_h")
        if ax == "Jbar_over_h" and self.chain.mode != "direct":
            raise ConfigError("a Jbar_over_h scan needs chain.mode = direct")
        if ax == "theta" and self.chern.enabled:
            raise ConfigError("a theta scan already samples the curvature; disable [chern]")

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["circuit"].pop("metadata", None)
        return d


def _parse_value(raw: str) -> Any:
    s = raw.strip()
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null", ""):
        return None
    if low in ("pi", "pi/2", "pi/4"):
        return {"pi": math.pi, "pi/2": math.pi / 2, "pi/4": math.pi / 4}[low]
    if "," in s:
        return tuple(float(x) for x in s.split(",") if x.strip())
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


_CIRCUIT_KEYS = {
    "flux_quantum_prefactor": "flux_quantum_prefactor_enabled",
}


def _section(cp: configparser.ConfigParser, name: str) -> dict[str, Any]:
    if not cp.has_section(name):
        return {}
    return {k: _parse_value(v) for k, v in cp.items(name)}


def _build(cls, values: dict[str, Any], section: str):
    names = {f for f in cls.__dataclass_fields__}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {sorted(unknown)}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse INI text on top of ``base`` (defaults when omitted)."""
    base = base or RunConfig()
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep key case (T1_ns, C_int, ...)
    cp.read_string(text)
    known = {"chain", "circuit", "ramp", "decoherence", "disorder", "scan", "chern", "evolver", "output"}
    extra = set(cp.sections()) - known
    if extra:
        raise ConfigError(f"unknown section(s): {sorted(extra)}")

    def merged(name, current):
        vals = asdict(current)
        vals.pop("metadata", None)
        new = _section(cp, name)
        # Switching ramp speed or field specification drops the other default.
        if name == "ramp":
            if "v_rad_per_ns" in new and "t_ramp_ns" not in new:
                vals["t_ramp_ns"] = None
            if "t_ramp_ns" in new and "v_rad_per_ns" not in new:
                vals["v_rad_per_ns"] = None
            if ("h_rule_a" in new or "h_rule_b" in new) and "h_MHz" not in new:
                vals["h_MHz"] = None
        if name == "scan" and "values" in new:
            v = new["values"]
            new["values"] = tuple(v) if isinstance(v, tuple) else (float(v),)
            for k in ("start", "stop", "num"):
                vals[k] = None
        if name == "scan" and "start" in new:
            vals["values"] = None
        vals.update(new)
        return vals

    circuit_vals = merged("circuit", base.circuit)
    I_b = circuit_vals.pop("I_b_over_Icr", base.I_b_over_Icr)
    for old, new in _CIRCUIT_KEYS.items():
        if old in circuit_vals:
            circuit_vals[new] = circuit_vals.pop(old)
    try:
        circuit = CircuitParams(**circuit_vals)
    except TypeError as exc:
        raise ConfigError(f"[circuit]: {exc}") from exc

    return RunConfig(
        chain=_build(ChainConfig, merged("chain", base.chain), "chain"),
        circuit=circuit,
        I_b_over_Icr=I_b,
        ramp=_build(RampConfig, merged("ramp", base.ramp), "ramp"),
        decoherence=_build(DecoherenceConfig, merged("decoherence", base.decoherence), "decoherence"),
        disorder=_build(DisorderConfig, merged("disorder", base.disorder), "disorder"),
        scan=_build(ScanConfig, merged("scan", base.scan), "scan"),
        chern=_build(ChernConfig, merged("chern", base.chern), "chern"),
        evolver=_build(EvolverConfig, merged("evolver", base.evolver), "evolver"),
        output=_build(OutputConfig, merged("output", base.output), "output"),
    )


def load_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base)

"""The quadratic theta ramp, field-amplitude rules and the measurement window."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .circuit_map import mhz_to_rad_per_ns, rad_per_ns_to_mhz
from .spin_system import MagneticField

MEASUREMENT_MODES = ("free", "frozen")


@dataclass(frozen=True)
class ConstantField:
    h: float  # rad/ns

    def amplitude(self, Jbar: float) -> float:
        return self.h

    @classmethod
    def from_mhz(cls, f_mhz: float) -> "ConstantField":
        return cls(mhz_to_rad_per_ns(f_mhz))


@dataclass(frozen=True)
class LinearFieldRule:
    """``h = a * Jbar + b`` with both sides quoted as frequencies in MHz."""

    a: float = -85.0
    b: float = 3400.0

    def amplitude(self, Jbar: float) -> float:
        h_mhz = self.a * rad_per_ns_to_mhz(Jbar) + self.b
        if h_mhz <= 0:
            raise ValueError(f"field rule gives non-positive h ({h_mhz:.4g} MHz)")
        return mhz_to_rad_per_ns(h_mhz)

    def at_ratio(self, ratio: float) -> float:
        """Amplitude in rad/ns where ``Jbar / h == ratio``."""
        return mhz_to_rad_per_ns(self.b / (1.0 - self.a * ratio))


@dataclass(frozen=True)
class RampProtocol:
    """``theta(t) = v**2 t**2 / (2 pi)`` from 0 to ``theta_final`` at fixed phi.

    ``measurement`` selects the drive during the ``t_meas`` window that
    follows the ramp: ``"free"`` switches the Hamiltonian off, ``"frozen"``
    holds it at its final value.
    """

    v: float
    theta_final: float = math.pi / 2
    phi: float = 0.0
    h_rule: ConstantField | LinearFieldRule = ConstantField(mhz_to_rad_per_ns(76.0))
    t_meas: float = 0.0
    measurement: str = "free"

    def __post_init__(self):
        if not self.v > 0:
            raise ValueError("ramp velocity must be positive")
        if not 0 < self.theta_final <= math.pi:
            raise ValueError("theta_final must lie in (0, pi]")
        if self.t_meas < 0:
            raise ValueError("t_meas must be >= 0")
        if self.measurement not in MEASUREMENT_MODES:
            raise ValueError(f"measurement must be one of {MEASUREMENT_MODES}")

    @classmethod
    def from_ramp_time(cls, t_ramp: float, **kw) -> "RampProtocol":
        """Protocol whose ramp reaches pi/2 after ``t_ramp`` ns."""
        return cls(v=math.pi / t_ramp, **kw)

    @property
    def t_ramp(self) -> float:
        return math.pi / self.v

    def theta(self, t: float) -> float:
        return min(self.v**2 * t**2 / (2 * math.pi), self.theta_final)

    def v_theta(self, t: float) -> float:
        if t >= self.end_time():
            t = self.end_time()
        return self.v**2 * t / math.pi

    def time_at(self, theta: float) -> float:
        """Time at which the unclipped ramp reaches ``theta``."""
        return (math.pi / self.v) * math.sqrt(2 * theta / math.pi)

    def end_time(self) -> float:
        return self.time_at(self.theta_final)

    def total_time(self) -> float:
        return self.end_time() + self.t_meas

    def field_amplitude(self, Jbar: float) -> float:
        return self.h_rule.amplitude(Jbar)


@dataclass(frozen=True)
class DriveSample:
    t: float
    field: MagneticField
    v_theta: float


def end_time(p: RampProtocol) -> float:
    return p.end_time()


def sample(p: RampProtocol, Jbar: float, t: float) -> DriveSample:
    """Drive at time ``t``; after the ramp the angle stays at ``theta_final``
    and the angular velocity is reported as zero."""
    if t < 0:
        raise ValueError("t must be >= 0")
    h = p.field_amplitude(Jbar)
    t_end = p.end_time()
    if t <= t_end:
        return DriveSample(t, MagneticField(h, p.theta(t), p.phi), p.v_theta(t))
    return DriveSample(t, MagneticField(h, p.theta_final, p.phi), 0.0)

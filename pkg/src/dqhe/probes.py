"""Generalised force, Berry curvature, Chern number and transition finding."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .schedules import RampProtocol
from .spin_system import (
    DegenerateGroundStateError,
    MagneticField,
    SpinChainSpec,
    build_hamiltonian,
    diagonalize,
    field_derivatives,
)

#: Relative gap below which the Kubo sum is refused.
DEGENERACY_TOL = 1e-9

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class ProbeError(ValueError):
    pass


@dataclass(frozen=True)
class ProbeResult:
    M_theta: float
    F_theta_phi: float
    theta_measured: float
    v_theta_at_measure: float
    per_qubit_sigma_y: tuple[float, ...]


@dataclass(frozen=True)
class ChernResult:
    Ch: float
    theta_grid: np.ndarray
    F_values: np.ndarray
    quadrature: str = "trapezoid"


@dataclass(frozen=True)
class Transition:
    """Location of a plateau jump; ``value`` is None when there is none."""

    value: float | None
    uncertainty: float
    left_level: float | None = None
    right_level: float | None = None

    @property
    def found(self) -> bool:
        return self.value is not None


def generalized_force(sigma_y: Sequence[float], h: float, theta: float) -> float:
    """``M = h sin(theta) sum_j <sigma_y_j>``, i.e. ``-<dH/dphi>`` at phi = 0."""
    if not 0 < theta <= math.pi:
        raise ProbeError("the force direction is undefined at theta = 0")
    return float(h * math.sin(theta) * np.sum(sigma_y))


def berry_curvature_dynamical(traj, protocol: RampProtocol, h: float | None = None) -> ProbeResult:
    """``F = M_theta / v_theta`` from a trajectory measured at the end of the ramp."""
    h = traj.h if h is None else h
    theta = protocol.theta_final
    v_theta = protocol.v_theta(protocol.end_time())
    if v_theta == 0:
        raise ProbeError("zero ramp velocity at the measurement point")
    sy = np.asarray(traj.sigma_y_expectations, dtype=float)
    M = generalized_force(sy, h, theta)
    return ProbeResult(M, M / v_theta, theta, v_theta, tuple(float(s) for s in sy))


def curvature_from_sigma_y(sigma_y_sum: np.ndarray, h: np.ndarray, theta: np.ndarray, v_theta: np.ndarray) -> np.ndarray:
    """Vectorised ``h sin(theta) sum <sigma_y> / v_theta``; broadcasts over all axes."""
    return h * np.sin(theta) * sigma_y_sum / v_theta


def kubo_curvature(H: np.ndarray, dH_theta: np.ndarray, dH_phi: np.ndarray) -> float:
    """Ground-state Berry curvature by the eigenstate sum

    ``F = -2 Im sum_{n>0} <0|dH_phi|n><n|dH_theta|0> / (E_n - E_0)**2``.

    The derivative order matches the measured response ``-<dH/dphi> = F v_theta``,
    so a single spin gives ``+sin(theta)/2``.
    """
    spec = diagonalize(H)
    E, V = spec.energies, spec.states
    scale = max(np.linalg.norm(H, 2), 1e-300)
    if len(E) > 1 and E[1] - E[0] < DEGENERACY_TOL * scale:
        raise DegenerateGroundStateError("ground state is degenerate, curvature undefined")
    g = V[:, 0]
    a = V.conj().T @ (dH_phi @ g)
    b = V.conj().T @ (dH_theta @ g)
    dE = E[1:] - E[0]
    return float(-2.0 * np.imag(np.sum(np.conj(a[1:]) * b[1:] / dE**2)))


def kubo_curvature_oracle(spec: SpinChainSpec, theta: float, h: float | None = None, phi: float = 0.0) -> float:
    """Kubo curvature of ``spec`` with the field placed at ``(theta, phi)``."""
    h = spec.field.h if h is None else h
    fld = MagneticField(h, theta, phi)
    s = spec.with_field(fld)
    d_theta, d_phi = field_derivatives(spec.N, fld)
    return kubo_curvature(build_hamiltonian(s), d_theta, d_phi)


def chern_number(F_of_theta: Callable[[np.ndarray], np.ndarray] | Callable[[float], float],
                 grid_size: int = 101, vectorised: bool = False) -> ChernResult:
    """Trapezoid ``Ch = int_0^pi F dtheta`` with ``F(0) = F(pi) = 0``.

    ``F_of_theta`` is called on the interior points, either once with the
    whole array (``vectorised=True``) or point by point.
    """
    if grid_size < 3:
        raise ValueError("grid_size must be >= 3")
    grid = np.linspace(0.0, math.pi, grid_size)
    interior = grid[1:-1]
    F = np.zeros(grid_size)
    if vectorised:
        F[1:-1] = np.asarray(F_of_theta(interior), dtype=float)
    else:
        for k, th in enumerate(interior, start=1):
            try:
                F[k] = F_of_theta(th)
            except Exception as exc:
                raise ProbeError(f"curvature sampler failed at theta={th:.6g} (grid index {k})") from exc
    return ChernResult(float(_trapezoid(F, grid)), grid, F)


def chern_from_samples(F_interior: np.ndarray, grid_size: int) -> np.ndarray:
    """Trapezoid Chern numbers for curvature sampled on the interior of a
    uniform ``grid_size`` grid; the last axis runs over angle."""
    F_interior = np.asarray(F_interior, dtype=float)
    if F_interior.shape[-1] != grid_size - 2:
        raise ValueError("interior sample count must be grid_size - 2")
    dtheta = math.pi / (grid_size - 1)
    # Endpoint values vanish, so the trapezoid reduces to a plain sum.
    return dtheta * F_interior.sum(axis=-1)


def chern_grid(grid_size: int = 101) -> np.ndarray:
    return np.linspace(0.0, math.pi, grid_size)[1:-1]


def detect_transition(control: Sequence[float], F: Sequence[float], min_jump: float = 0.5) -> Transition:
    """Locate the largest plateau jump in ``F(control)``.

    The estimate is the midpoint between the two grid points that straddle
    the half-way level of the jump; the grid spacing there is the
    uncertainty. A curve whose total swing is below ``min_jump`` has no
    transition.
    """
    x = np.asarray(control, dtype=float)
    y = np.asarray(F, dtype=float)
    if x.size != y.size or x.size < 2:
        raise ValueError("need matching control and curvature arrays with >= 2 points")
    order = np.argsort(x)
    x, y = x[order], y[order]
    steps = np.diff(y)
    k = int(np.argmax(np.abs(steps)))
    if abs(steps[k]) < min_jump:
        return Transition(None, float("nan"))
    return Transition(
        value=float(0.5 * (x[k] + x[k + 1])),
        uncertainty=float(x[k + 1] - x[k]),
        left_level=float(y[k]),
        right_level=float(y[k + 1]),
    )


def count_transitions(F: Sequence[float], min_jump: float = 0.5) -> int:
    """Number of level changes between consecutive rounded plateau values."""
    levels = np.round(np.asarray(F, dtype=float) / min_jump) * min_jump
    return int(np.count_nonzero(np.abs(np.diff(levels)) >= min_jump))

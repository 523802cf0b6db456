"""Open-system evolution: per-qubit relaxation and dephasing on top of the ramp.

Each qubit couples to its own bath through

    L_j[rho] = g (1 + n0) (2 s- rho s+ - {s+ s-, rho})
             + g n0       (2 s+ rho s- - {s- s+, rho})
             + G          (2 sz rho sz - {sz sz, rho})

with ``s- = |down><up|``. A single qubit then loses excited population at
rate ``2 g`` and coherence at ``g + 4 G``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .evolve_unitary import (
    BatchTrajectory,
    EvolverConfig,
    TrajectoryResult,
    _as_batch,
    default_max_step,
    initial_states,
    run_integrator,
    theta_record_times,
)
from .schedules import RampProtocol
from .spin_system import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SpinChainSpec,
    chain_operators,
    embed,
    pauli_string,
)

HBAR = 1.054571817e-34
K_B = 1.380649e-23

#: ``"bare"`` uses g = 1/T1 and G = 1/T2 - 1/(2 T1) as the dissipator
#: coefficients; ``"calibrated"`` rescales them so that a single qubit decays
#: with exactly T1 (population) and T2 (coherence).
RATE_CONVENTIONS = ("bare", "calibrated")


class PositivityError(RuntimeError):
    """Density matrix left the positive cone beyond integration error."""


@dataclass(frozen=True)
class DecoherenceParams:
    """Relaxation (T1) and dephasing (T2) times in ns, bath temperature in mK."""

    T1: float
    T2: float
    temperature_mK: float = 30.0
    omega_q: float = 2 * math.pi * 4.77  # rad/ns, sets the thermal occupation
    thermal: bool = False
    rate_convention: str = "bare"

    def __post_init__(self):
        if not (self.T1 > 0 and self.T2 > 0):
            raise ValueError("T1 and T2 must be positive")
        if self.T2 > 2 * self.T1 * (1 + 1e-12):
            raise ValueError(f"T2={self.T2} exceeds 2*T1={2 * self.T1}: negative pure dephasing")
        if self.rate_convention not in RATE_CONVENTIONS:
            raise ValueError(f"rate_convention must be one of {RATE_CONVENTIONS}")

    @property
    def n0(self) -> float:
        """Bose occupation of the bath at the qubit frequency."""
        if self.temperature_mK <= 0:
            return 0.0
        x = HBAR * self.omega_q * 1e9 / (K_B * self.temperature_mK * 1e-3)
        return 1.0 / math.expm1(x)

    @property
    def n0_used(self) -> float:
        return self.n0 if self.thermal else 0.0

    @property
    def gamma(self) -> float:
        if self.rate_convention == "bare":
            return 1.0 / self.T1
        return 1.0 / (2 * self.T1)

    @property
    def Gamma_phi(self) -> float:
        pure = max(1.0 / self.T2 - 1.0 / (2 * self.T1), 0.0)
        if self.rate_convention == "bare":
            return pure
        return pure / 4

    @classmethod
    def closed(cls) -> "DecoherenceParams":
        return cls(math.inf, math.inf)


class Dissipator:
    """Jump operators and rates for N independent qubits, with the
    anticommutator pieces pre-summed."""

    def __init__(self, N: int, d: DecoherenceParams):
        self.N = N
        g, G, n0 = d.gamma, d.Gamma_phi, d.n0_used
        jumps, rates = [], []
        for j in range(1, N + 1):
            sm, sp = embed(N, j, SIGMA_MINUS), embed(N, j, SIGMA_PLUS)
            sz = pauli_string(N, j, "z")
            for L, r in ((sm, g * (1 + n0)), (sp, g * n0), (sz, G)):
                if r > 0:
                    jumps.append(L)
                    rates.append(r)
        self.jumps = np.array(jumps) if jumps else np.zeros((0, 2**N, 2**N), complex)
        self.rates = np.array(rates, dtype=float)
        self.jumps_dag = self.jumps.conj().transpose(0, 2, 1)
        dim = 2**N
        self.anti = np.zeros((dim, dim), complex)
        for L, Ld, r in zip(self.jumps, self.jumps_dag, self.rates):
            self.anti += r * (Ld @ L)

    @property
    def active(self) -> bool:
        return len(self.rates) > 0

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Sum of ``L_j[rho]``; ``rho`` may carry leading batch axes."""
        out = -(self.anti @ rho + rho @ self.anti)
        for L, Ld, r in zip(self.jumps, self.jumps_dag, self.rates):
            out = out + (2 * r) * (L @ rho @ Ld)
        return out


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, d: DecoherenceParams | Dissipator) -> np.ndarray:
    """``drho/dt = -i[H, rho] + sum_j L_j[rho]``."""
    rho = np.asarray(rho, dtype=complex)
    N = int(round(math.log2(rho.shape[-1])))
    diss = d if isinstance(d, Dissipator) else Dissipator(N, d)
    return -1j * (H @ rho - rho @ H) + diss.apply(rho)


# Basis order used by the hand-written two-qubit equations:
# (up up, down up, up down, down down) with qubit 1 written first. The
# kron ordering used elsewhere lists (up up, up down, down up, down down).
TWO_QUBIT_LEVEL_ORDER = np.array([0, 2, 1, 3])


def two_qubit_master_equation(rho: np.ndarray, H: np.ndarray, gamma: float, Gamma: float) -> np.ndarray:
    """Hand-written right-hand side for two qubits at zero temperature.

    ``rho`` and ``H`` are in the (uu, du, ud, dd) basis and indexed from 1
    below to keep the entries readable. ``H`` must have the structure of the
    driven two-qubit Hamiltonian: real diagonal, ``H23 = H32`` and
    ``H14 = H41`` real.
    """
    r = {(i + 1, j + 1): rho[i, j] for i in range(4) for j in range(4)}
    Hm = {(i + 1, j + 1): H[i, j] for i in range(4) for j in range(4)}

    def R(i, j):
        return r[(i, j)]

    def Hh(i, j):
        return Hm[(i, j)]

    g, G = gamma, Gamma
    c34 = 3 * g + 4 * G
    c28 = 2 * g + 8 * G
    c14 = g + 4 * G
    out = np.empty((4, 4), dtype=complex)
    out[0, 0] = -1j * (Hh(1, 4) * (R(4, 1) - R(1, 4)) + Hh(1, 2) * R(2, 1) + Hh(1, 3) * R(3, 1)
                       - Hh(2, 1) * R(1, 2) - Hh(3, 1) * R(1, 3)) - 4 * g * R(1, 1)
    out[0, 1] = -1j * ((Hh(1, 1) - Hh(2, 2)) * R(1, 2) + Hh(1, 2) * (R(2, 2) - R(1, 1))
                       + Hh(1, 3) * R(3, 2) + Hh(1, 4) * R(4, 2) - Hh(3, 2) * R(1, 3)
                       - Hh(4, 2) * R(1, 4)) - c34 * R(1, 2)
    out[0, 2] = -1j * ((Hh(1, 1) - Hh(3, 3)) * R(1, 3) + Hh(1, 3) * (R(3, 3) - R(1, 1))
                       + Hh(1, 2) * R(2, 3) + Hh(1, 4) * R(4, 3) - Hh(2, 3) * R(1, 2)
                       - Hh(4, 3) * R(1, 4)) - c34 * R(1, 3)
    out[0, 3] = -1j * ((Hh(1, 1) - Hh(4, 4)) * R(1, 4) + Hh(1, 4) * (R(4, 4) - R(1, 1))
                       + Hh(1, 2) * R(2, 4) + Hh(1, 3) * R(3, 4) - Hh(2, 4) * R(1, 2)
                       - Hh(3, 4) * R(1, 3)) - c28 * R(1, 4)
    out[1, 0] = -1j * ((Hh(2, 2) - Hh(1, 1)) * R(2, 1) + Hh(2, 1) * (R(1, 1) - R(2, 2))
                       + Hh(2, 3) * R(3, 1) + Hh(2, 4) * R(4, 1) - Hh(3, 1) * R(2, 3)
                       - Hh(4, 1) * R(2, 4)) - c34 * R(2, 1)
    out[1, 1] = -1j * (Hh(2, 3) * (R(3, 2) - R(2, 3)) + Hh(2, 1) * R(1, 2) + Hh(2, 4) * R(4, 2)
                       - Hh(1, 2) * R(2, 1) - Hh(4, 2) * R(2, 4)) - 2 * g * (R(2, 2) - R(1, 1))
    out[1, 2] = -1j * ((Hh(2, 2) - Hh(3, 3)) * R(2, 3) + Hh(2, 3) * (R(3, 3) - R(2, 2))
                       + Hh(2, 1) * R(1, 3) + Hh(2, 4) * R(4, 3) - Hh(1, 3) * R(2, 1)
                       - Hh(4, 3) * R(2, 4)) - c28 * R(2, 3)
    out[1, 3] = -1j * ((Hh(2, 2) - Hh(4, 4)) * R(2, 4) + Hh(2, 4) * (R(4, 4) - R(2, 2))
                       + Hh(2, 1) * R(1, 4) + Hh(2, 3) * R(3, 4) - Hh(1, 4) * R(2, 1)
                       - Hh(3, 4) * R(2, 3)) + 2 * g * R(1, 3) - c14 * R(2, 4)
    out[2, 0] = -1j * ((Hh(3, 3) - Hh(1, 1)) * R(3, 1) + Hh(3, 1) * (R(1, 1) - R(3, 3))
                       + Hh(3, 2) * R(2, 1) + Hh(3, 4) * R(4, 1) - Hh(2, 1) * R(3, 2)
                       - Hh(4, 1) * R(3, 4)) - c34 * R(3, 1)
    out[2, 1] = -1j * ((Hh(3, 3) - Hh(2, 2)) * R(3, 2) + Hh(3, 2) * (R(2, 2) - R(3, 3))
                       + Hh(3, 1) * R(1, 2) + Hh(3, 4) * R(4, 2) - Hh(1, 2) * R(3, 1)
                       - Hh(4, 2) * R(3, 4)) - c28 * R(3, 2)
    out[2, 2] = -1j * (Hh(2, 3) * (R(2, 3) - R(3, 2)) + Hh(3, 1) * R(1, 3) + Hh(3, 4) * R(4, 3)
                       - Hh(1, 3) * R(3, 1) - Hh(4, 3) * R(3, 4)) - 2 * g * (R(3, 3) - R(1, 1))
    out[2, 3] = -1j * ((Hh(3, 3) - Hh(4, 4)) * R(3, 4) + Hh(3, 4) * (R(4, 4) - R(3, 3))
                       + Hh(3, 1) * R(1, 4) + Hh(3, 2) * R(2, 4) - Hh(1, 4) * R(3, 1)
                       - Hh(2, 4) * R(3, 2)) + 2 * g * R(1, 2) - c14 * R(3, 4)
    out[3, 0] = -1j * ((Hh(4, 4) - Hh(1, 1)) * R(4, 1) + Hh(4, 1) * (R(1, 1) - R(4, 4))
                       + Hh(4, 2) * R(2, 1) + Hh(4, 3) * R(3, 1) - Hh(2, 1) * R(4, 2)
                       - Hh(3, 1) * R(4, 3)) - c28 * R(4, 1)
    out[3, 1] = -1j * ((Hh(4, 4) - Hh(2, 2)) * R(4, 2) + Hh(4, 2) * (R(2, 2) - R(4, 4))
                       + Hh(4, 1) * R(1, 2) + Hh(4, 3) * R(3, 2) - Hh(1, 2) * R(4, 1)
                       - Hh(3, 2) * R(4, 3)) + 2 * g * R(3, 1) - c14 * R(4, 2)
    out[3, 2] = -1j * ((Hh(4, 4) - Hh(3, 3)) * R(4, 3) + Hh(4, 3) * (R(3, 3) - R(4, 4))
                       + Hh(4, 1) * R(1, 3) + Hh(4, 2) * R(2, 3) - Hh(1, 3) * R(4, 1)
                       - Hh(2, 3) * R(4, 2)) + 2 * g * R(2, 1) - c14 * R(4, 3)
    out[3, 3] = -1j * (Hh(1, 4) * (R(1, 4) - R(4, 1)) + Hh(4, 2) * R(2, 4) + Hh(4, 3) * R(3, 4)
                       - Hh(2, 4) * R(4, 2) - Hh(3, 4) * R(4, 3)) + 2 * g * (R(2, 2) + R(3, 3))
    return out


def to_level_order(m: np.ndarray) -> np.ndarray:
    p = TWO_QUBIT_LEVEL_ORDER
    return m[np.ix_(p, p)]


def evolve_open_batch(
    N: int,
    interactions: np.ndarray,
    h: np.ndarray | float,
    protocol: RampProtocol,
    d: DecoherenceParams,
    cfg: EvolverConfig = EvolverConfig(),
    thetas: Sequence[float] | None = None,
    positivity_tol: float = 1e-6,
) -> BatchTrajectory:
    """Density-matrix counterpart of :func:`evolve_batch`.

    The ramp is followed by the ``protocol.t_meas`` window, during which the
    Hamiltonian is switched off (``measurement="free"``) or held at its final
    value (``"frozen"``); dissipation acts throughout. ``sigma_y`` is read at
    ``t_end + t_meas``; ``sigma_y_grid`` at the ramp angles in ``thetas``.
    """
    interactions, h = _as_batch(interactions, h)
    ops = chain_operators(N)
    Sx, Sy, Sz = ops.total["x"], ops.total["y"], ops.total["z"]
    diss = Dissipator(N, d)
    cphi, sphi = math.cos(protocol.phi), math.sin(protocol.phi)
    hcol = h[:, None, None]
    t_end = protocol.end_time()
    th_end = protocol.theta_final
    s_end = math.sin(th_end)
    H_final = interactions - hcol * (s_end * cphi * Sx + s_end * sphi * Sy + math.cos(th_end) * Sz)

    def rhs_ramp(t, rho):
        th = protocol.theta(t)
        s = math.sin(th)
        H = interactions - hcol * ((s * cphi) * Sx + (s * sphi) * Sy + math.cos(th) * Sz)
        return diss.apply(rho) - 1j * (H @ rho - rho @ H)

    def rhs_window(t, rho):
        out = diss.apply(rho)
        if protocol.measurement == "frozen":
            out = out - 1j * (H_final @ rho - rho @ H_final)
        return out

    psi0, flags = initial_states(N, interactions, h, protocol.phi)
    rho0 = psi0[:, :, None] * psi0.conj()[:, None, :]
    thetas, times = theta_record_times(protocol, thetas)
    max_step = cfg.max_step or default_max_step(N, interactions, h, protocol)
    # Integrate the ramp and the window separately: the drive jumps at t_end.
    ramp_times = sorted(set(times) | {t_end})
    states = run_integrator(rhs_ramp, 0.0, rho0, ramp_times, cfg, max_step)
    by_time = dict(zip(ramp_times, states))
    rho_end = by_time[t_end]
    t_f = t_end + protocol.t_meas
    if protocol.t_meas > 0:
        rho_f = run_integrator(rhs_window, t_end, rho_end, [t_f], cfg, max_step)[0]
    else:
        rho_f = rho_end

    check_density_matrices(rho_f, positivity_tol)
    grid = np.stack([by_time[t] for t in times], axis=1) if times else np.zeros((len(h), 0) + rho0.shape[1:], complex)
    return BatchTrajectory(
        final_states=rho_f,
        sigma_y=sigma_y_of_density(N, rho_f),
        h=h,
        theta_grid=thetas,
        v_theta_grid=np.array([protocol.v_theta(t) for t in times]),
        sigma_y_grid=sigma_y_of_density(N, grid),
        degenerate_start=flags,
        t_end=t_end,
        t_measured=t_f,
    )


def sigma_y_of_density(N: int, rho: np.ndarray) -> np.ndarray:
    """Per-qubit ``Tr[rho sigma_y_j]`` for density matrices on the trailing two axes."""
    sy = chain_operators(N).sigma_y
    return np.einsum("...ik,jki->...j", rho, sy).real


def check_density_matrices(rho: np.ndarray, positivity_tol: float = 1e-6) -> None:
    rho = np.asarray(rho)
    herm = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    lowest = np.linalg.eigvalsh(herm)[..., 0]
    if np.any(lowest < -positivity_tol):
        raise PositivityError(
            f"density matrix eigenvalue {lowest.min():.3g} below -{positivity_tol:g}; "
            "tighten the integrator tolerances")


def evolve_open(
    spec: SpinChainSpec,
    protocol: RampProtocol,
    d: DecoherenceParams,
    cfg: EvolverConfig = EvolverConfig(),
    thetas: Sequence[float] | None = None,
) -> TrajectoryResult:
    """Open-system counterpart of :func:`dqhe.evolve_unitary.evolve`.

    ``final_state`` is the density matrix at ``t_end + t_meas``.
    """
    Hint = chain_operators(spec.N).interaction(spec.bonds)
    h = protocol.field_amplitude(spec.Jbar)
    return evolve_open_batch(spec.N, Hint, h, protocol, d, cfg, thetas).member(0, protocol)

"""Bias-current controlled couplings between neighbouring phase qubits.

Units: inductances in nH, capacitances in pF, currents in uA, angular
frequencies in rad/ns. With these units ``1 / (nH * pF) = 1e3 / ns**2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

#: Magnetic flux quantum h / 2e in Wb.
FLUX_QUANTUM = 2.067833848e-15
#: Phi_0 / 2pi expressed in nH * uA.
REDUCED_FLUX_QUANTUM_NH_UA = FLUX_QUANTUM / (2 * math.pi) * 1e15

_LC_TO_NS2 = 1e-3  # nH * pF -> ns**2

#: The Jx zero crossing on this fraction of I_cr bounds the monotone branch.
MONOTONE_BRANCH_END = 0.93

#: Operator normalisations of the source coupling formula.
NORMALISATIONS = {"pauli": 1.0, "spin_half": 0.25}


class CircuitError(ValueError):
    """Base class for invalid circuit inputs."""


class JunctionSwitchedError(CircuitError):
    """Bias current at or above the coupler's critical current."""


class ResonanceError(CircuitError):
    """Qubit frequency too close to the coupler plasma frequency."""


class CouplingRangeError(CircuitError):
    """Requested coupling outside what the bias current can reach."""


def mhz_to_rad_per_ns(f_mhz: float) -> float:
    return 2 * math.pi * f_mhz * 1e-3


def rad_per_ns_to_mhz(w: float) -> float:
    return w / (2 * math.pi) * 1e3


@dataclass(frozen=True)
class CircuitParams:
    """Physical constants of one coupled pair of phase qubits.

    ``omega_q_GHz`` is the quoted qubit frequency. With
    ``frequency_convention="nu"`` it is read as an ordinary frequency and
    converted with 2pi; ``"omega"`` takes the number literally in rad/ns.

    ``coupling_normalisation`` picks the spin operators the source formula is
    written for. ``"spin_half"`` (S = sigma/2) divides every J by four when the
    couplings are used with Pauli matrices; ``"pauli"`` uses it unchanged.

    The default ``C_int`` is calibrated so that Jx vanishes at
    ``0.93 * I_cr``, see :func:`calibrate_c_int`.
    """

    omega_q_GHz: float = 4.77
    C_j: float = 1.0
    C_jp1: float = 1.0
    C_int: float = 0.155
    L_R: float = 3.0
    L_L: float = 3.0
    M: float = 0.41
    I_cr: float = 3.0
    N1: float = 5.0
    N2: float = 5.0
    flux_quantum_prefactor_enabled: bool = True
    frequency_convention: str = "nu"
    coupling_normalisation: str = "spin_half"
    # Stored for completeness, no formula uses it.
    L_j: float = 0.7
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        positive = ("C_j", "C_jp1", "C_int", "L_R", "L_L", "I_cr", "N1", "N2", "omega_q_GHz")
        for name in positive:
            if not getattr(self, name) > 0:
                raise CircuitError(f"{name} must be strictly positive, got {getattr(self, name)}")
        if self.M < 0:
            raise CircuitError("M is the mutual inductance magnitude and must be >= 0")
        if not self.M**2 < self.L_R * self.L_L:
            raise CircuitError("M**2 must be smaller than L_R * L_L")
        if self.frequency_convention not in ("nu", "omega"):
            raise CircuitError(f"unknown frequency_convention {self.frequency_convention!r}")
        if self.coupling_normalisation not in NORMALISATIONS:
            raise CircuitError(f"unknown coupling_normalisation {self.coupling_normalisation!r}")

    @property
    def omega_q(self) -> float:
        """Qubit angular frequency in rad/ns."""
        if self.frequency_convention == "nu":
            return 2 * math.pi * self.omega_q_GHz
        return self.omega_q_GHz

    def with_(self, **changes) -> "CircuitParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class CouplingStrengths:
    """XYZ couplings of one bond, in rad/ns."""

    Jx: float
    Jy: float
    Jz: float

    @property
    def Jbar(self) -> float:
        return math.sqrt(self.Jx**2 + self.Jy**2 + self.Jz**2) / math.sqrt(3)

    @classmethod
    def isotropic(cls, J: float) -> "CouplingStrengths":
        return cls(J, J, J)

    def scaled(self, alpha: float) -> "CouplingStrengths":
        return CouplingStrengths(alpha * self.Jx, alpha * self.Jy, alpha * self.Jz)


def josephson_inductance(I_b: float, I_cr: float, prefactor: bool = True) -> float:
    """Josephson inductance of the coupler junction in nH.

    With ``prefactor`` the standard ``Phi_0 / (2 pi sqrt(I_cr**2 - I_b**2))``;
    without it the bare ``1 / sqrt(I_cr**2 - I_b**2)`` (in 1/uA, read as nH).
    """
    if I_b < 0:
        raise CircuitError("bias current must be non-negative")
    if I_b >= I_cr:
        raise JunctionSwitchedError(f"junction switched: I_b={I_b} >= I_cr={I_cr}")
    root = math.sqrt(I_cr**2 - I_b**2)
    if prefactor:
        return REDUCED_FLUX_QUANTUM_NH_UA / root
    return 1.0 / root


def renormalisation_factor(p: CircuitParams) -> float:
    return 1.0 - p.M**2 / (p.L_R * p.L_L)


def renormalized_inductances(p: CircuitParams, I_b: float = 0.0) -> tuple[float, float, float, float]:
    """Return ``(M~, L~_R, L~_L, L~_int)`` at bias ``I_b``."""
    f = renormalisation_factor(p)
    L_int = josephson_inductance(I_b, p.I_cr, p.flux_quantum_prefactor_enabled)
    L_int_t = L_int * (1 + p.M / p.L_R) * (1 + p.M / p.L_L)
    return f * p.M, f * p.L_R, f * p.L_L, L_int_t


def coupler_plasma_frequency(p: CircuitParams, I_b: float) -> float:
    L_int = josephson_inductance(I_b, p.I_cr, p.flux_quantum_prefactor_enabled)
    return 1.0 / math.sqrt(L_int * p.C_int * _LC_TO_NS2)


def couplings(p: CircuitParams, I_b: float, resonance_tol: float = 1e-6) -> CouplingStrengths:
    """Bond couplings (Jx = Jy, Jz) in rad/ns for bias current ``I_b`` (uA)."""
    M_t, L_R_t, L_L_t, L_int_t = renormalized_inductances(p, I_b)
    w_int = coupler_plasma_frequency(p, I_b)
    detune = 1.0 - (p.omega_q / w_int) ** 2
    if abs(detune) < resonance_tol:
        raise ResonanceError(f"omega_q within {resonance_tol:g} of the coupler resonance")
    denom = L_R_t * L_L_t * p.omega_q * math.sqrt(p.C_j * p.C_jp1) * _LC_TO_NS2
    scale = NORMALISATIONS[p.coupling_normalisation]
    jxy = scale * (M_t - L_int_t / detune) / denom
    jz = scale * (M_t - L_int_t) / (denom * 6.0 * math.sqrt(p.N1 * p.N2))
    return CouplingStrengths(jxy, jxy, jz)


def bias_for_coupling(
    p: CircuitParams,
    Jx_target: float,
    upper_fraction: float = MONOTONE_BRANCH_END,
    rtol: float = 1e-9,
) -> float:
    """Invert ``couplings(p, I_b).Jx`` by bisection on ``[0, upper_fraction * I_cr]``.

    A zero target lands on the Jx zero crossing even if it sits slightly
    past ``upper_fraction``.
    """
    lo, hi = 0.0, upper_fraction * p.I_cr
    j_lo, j_hi = couplings(p, lo).Jx, couplings(p, hi).Jx
    if Jx_target == 0.0 and j_hi > 0:
        # Extend the bracket to the zero crossing of Jx.
        hi_limit = p.I_cr * (1 - 1e-9)
        while j_hi > 0 and hi < hi_limit:
            hi = min(hi_limit, hi + 0.01 * p.I_cr)
            j_hi = couplings(p, hi).Jx
    top, bottom = max(j_lo, j_hi), min(j_lo, j_hi)
    if not bottom - 1e-12 * abs(top) <= Jx_target <= top + 1e-12 * abs(top):
        raise CouplingRangeError(
            f"Jx={Jx_target:.6g} rad/ns outside achievable [{bottom:.6g}, {top:.6g}]"
        )
    sign = 1.0 if j_lo > j_hi else -1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if sign * (couplings(p, mid).Jx - Jx_target) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * p.I_cr:
            break
    return 0.5 * (lo + hi)


def calibrate_c_int(
    p: CircuitParams, zero_fraction: float = MONOTONE_BRANCH_END
) -> float:
    """C_int (pF) that puts the Jx zero crossing at ``zero_fraction * I_cr``.

    Solves ``M~ * (1 - (w_q/w_int)**2) = L~_int`` for the coupler capacitance.
    """
    I_b = zero_fraction * p.I_cr
    M_t, _, _, L_int_t = renormalized_inductances(p, I_b)
    L_int = josephson_inductance(I_b, p.I_cr, p.flux_quantum_prefactor_enabled)
    ratio_sq = 1.0 - L_int_t / M_t
    if ratio_sq <= 0:
        raise CircuitError("no positive C_int places the zero crossing there")
    return ratio_sq / (p.omega_q**2 * L_int * _LC_TO_NS2)

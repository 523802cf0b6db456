"""Pauli operators, the driven XYZ chain Hamiltonian and its eigenproblem.

Conventions: hbar = 1, energies in rad/ns, qubit 1 is the leftmost tensor
factor and ``|up> = (1, 0)`` is the sigma_z = +1 state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Sequence

import numpy as np

from .circuit_map import CouplingStrengths

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
IDENTITY = np.eye(2, dtype=complex)
#: Lowering operator |down><up| in the (up, down) basis.
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.conj().T

#: Relative Hermiticity tolerance for assembled and diagonalised matrices.
HERMITIAN_TOL = 1e-12


class DegenerateGroundStateError(ValueError):
    pass


def embed(N: int, site: int, op: np.ndarray) -> np.ndarray:
    """Place a single-qubit ``op`` on ``site`` (1-based) of an N-qubit register."""
    if not 1 <= site <= N:
        raise IndexError(f"site {site} outside 1..{N}")
    factors = [IDENTITY] * N
    factors[site - 1] = op
    return reduce(np.kron, factors)


@lru_cache(maxsize=None)
def _pauli_string(N: int, site: int, axis: str) -> np.ndarray:
    m = embed(N, site, PAULI[axis])
    m.flags.writeable = False
    return m


def pauli_string(N: int, site: int, axis: str) -> np.ndarray:
    """sigma^axis acting on ``site`` (1-based). The returned array is read-only."""
    if axis not in PAULI:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}")
    return _pauli_string(N, site, axis)


@dataclass(frozen=True)
class MagneticField:
    """Effective field ``h (sin t cos p, sin t sin p, cos t)``."""

    h: float
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if self.h < 0:
            raise ValueError("field amplitude h must be >= 0")

    @property
    def vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return self.h * np.array(
            [st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)]
        )


@dataclass(frozen=True)
class SpinChainSpec:
    """Open chain of N qubits with one coupling triple per bond."""

    N: int
    bonds: tuple[CouplingStrengths, ...]
    field: MagneticField = field(default_factory=lambda: MagneticField(0.0, 0.0))

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        object.__setattr__(self, "bonds", tuple(self.bonds))
        if len(self.bonds) != self.N - 1:
            raise ValueError(f"an open chain of {self.N} qubits needs {self.N - 1} bonds")

    @classmethod
    def homogeneous(cls, N: int, bond: CouplingStrengths, field: MagneticField | None = None):
        return cls(N, (bond,) * (N - 1), field or MagneticField(0.0, 0.0))

    @property
    def Jbar(self) -> float:
        """Mean isotropic proxy over bonds (0 for a single qubit)."""
        if not self.bonds:
            return 0.0
        return float(np.mean([b.Jbar for b in self.bonds]))

    def with_field(self, field: MagneticField) -> "SpinChainSpec":
        return SpinChainSpec(self.N, self.bonds, field)


class ChainOperators:
    """Operators reused along a trajectory: total spin components, the bond
    Hamiltonian and the per-site sigma_y."""

    def __init__(self, N: int):
        self.N = N
        self.dim = 2**N
        self.total = {a: sum(pauli_string(N, j, a) for j in range(1, N + 1)) for a in "xyz"}
        self.sigma_y = np.stack([pauli_string(N, j, "y") for j in range(1, N + 1)])

    def interaction(self, bonds: Sequence[CouplingStrengths]) -> np.ndarray:
        H = np.zeros((self.dim, self.dim), dtype=complex)
        for j, b in enumerate(bonds, start=1):
            for axis, J in zip("xyz", (b.Jx, b.Jy, b.Jz)):
                if J:
                    H += J * (pauli_string(self.N, j, axis) @ pauli_string(self.N, j + 1, axis))
        return H

    def zeeman(self, field_vector: np.ndarray) -> np.ndarray:
        hx, hy, hz = field_vector
        return -(hx * self.total["x"] + hy * self.total["y"] + hz * self.total["z"])


@lru_cache(maxsize=8)
def chain_operators(N: int) -> ChainOperators:
    return ChainOperators(N)


def build_hamiltonian(spec: SpinChainSpec) -> np.ndarray:
    """Assemble ``-sum_j h.sigma_j + sum_j (Jx XX + Jy YY + Jz ZZ)``."""
    ops = chain_operators(spec.N)
    return ops.zeeman(spec.field.vector) + ops.interaction(spec.bonds)


def field_derivatives(N: int, field: MagneticField) -> tuple[np.ndarray, np.ndarray]:
    """Analytic ``(dH/dtheta, dH/dphi)`` of the Zeeman term at ``field``."""
    ops = chain_operators(N)
    h, t, p = field.h, field.theta, field.phi
    d_theta = np.array([math.cos(t) * math.cos(p), math.cos(t) * math.sin(p), -math.sin(t)]) * h
    d_phi = np.array([-math.sin(t) * math.sin(p), math.sin(t) * math.cos(p), 0.0]) * h
    return ops.zeeman(d_theta), ops.zeeman(d_phi)


def hermiticity_defect(H: np.ndarray) -> float:
    norm = np.linalg.norm(H)
    return float(np.linalg.norm(H - H.conj().T) / norm) if norm else 0.0


@dataclass(frozen=True)
class Spectrum:
    energies: np.ndarray
    states: np.ndarray  # columns are eigenvectors

    @property
    def gap(self) -> float:
        if len(self.energies) < 2:
            return math.inf
        return float(self.energies[1] - self.energies[0])


def diagonalize(H: np.ndarray, tol: float = HERMITIAN_TOL) -> Spectrum:
    if hermiticity_defect(H) > tol:
        raise ValueError(f"matrix is not Hermitian (defect {hermiticity_defect(H):.3g})")
    H = 0.5 * (H + H.conj().T)
    energies, states = np.linalg.eigh(H)
    return Spectrum(energies, states)


def all_up(N: int) -> np.ndarray:
    psi = np.zeros(2**N, dtype=complex)
    psi[0] = 1.0
    return psi


def ground_state(H: np.ndarray, degeneracy_tol: float = 1e-9) -> tuple[np.ndarray, bool]:
    """Lowest eigenvector and whether the degeneracy tie-break was used.

    When the ground level is (near) degenerate the vector in that level with
    the largest overlap with ``|up up ... up>`` is returned.
    """
    spec = diagonalize(H)
    scale = max(np.linalg.norm(H, 2), 1e-300)
    E = spec.energies
    level = np.flatnonzero(E - E[0] < degeneracy_tol * scale)
    if len(level) == 1:
        psi = spec.states[:, 0]
        flagged = False
    else:
        # Project |up...up> onto the degenerate level; fall back to the first vector.
        V = spec.states[:, level]
        amp = V.conj().T @ all_up(int(round(math.log2(H.shape[0]))))
        psi = V @ amp if np.linalg.norm(amp) > 1e-12 else V[:, 0]
        flagged = True
    psi = psi / np.linalg.norm(psi)
    # Fix the global phase for reproducible output: largest component real positive.
    k = int(np.argmax(np.abs(psi)))
    psi = psi * (abs(psi[k]) / psi[k])
    return psi, flagged


def spectral_gap(spec: SpinChainSpec) -> float:
    return diagonalize(build_hamiltonian(spec)).gap

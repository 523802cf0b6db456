from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dqhe.circuit_map import CouplingStrengths
from dqhe.spin_system import (
    MagneticField,
    SpinChainSpec,
    build_hamiltonian,
    chain_operators,
    diagonalize,
    embed,
    field_derivatives,
    ground_state,
    hermiticity_defect,
    pauli_string,
    spectral_gap,
)


def test_pauli_algebra():
    assert np.array_equal(pauli_string(1, 1, "z"), np.diag([1, -1]))
    x1, y2 = pauli_string(2, 1, "x"), pauli_string(2, 2, "y")
    assert np.allclose(x1 @ y2 - y2 @ x1, 0)
    y1, z1 = pauli_string(2, 1, "y"), pauli_string(2, 1, "z")
    assert np.allclose(x1 @ y1, 1j * z1)


def test_pauli_string_read_only_and_bounds():
    with pytest.raises(ValueError):
        pauli_string(2, 1, "x")[0, 0] = 5
    with pytest.raises(IndexError):
        embed(2, 3, np.eye(2))
    with pytest.raises(ValueError):
        pauli_string(2, 1, "w")


def test_qubit_one_is_leftmost_factor():
    # sigma_z on qubit 1 flips sign between |up up> (index 0) and |down up> (index 2).
    z1 = np.diag(pauli_string(2, 1, "z")).real
    assert list(z1) == [1, 1, -1, -1]


def test_spec_validation():
    with pytest.raises(ValueError):
        SpinChainSpec(3, (CouplingStrengths.isotropic(1.0),))
    with pytest.raises(ValueError):
        SpinChainSpec(0, ())
    with pytest.raises(ValueError):
        MagneticField(-1.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 5), st.floats(0, math.pi), st.floats(0, 2 * math.pi))
def test_field_vector_norm(h, th, ph):
    assert np.linalg.norm(MagneticField(h, th, ph).vector) == pytest.approx(h)


def test_single_spin_eigenvalues():
    spec = SpinChainSpec(1, (), MagneticField(0.7, 0.0))
    assert np.allclose(diagonalize(build_hamiltonian(spec)).energies, [-0.7, 0.7])


def test_two_qubit_closed_forms(rng):
    for _ in range(10):
        h, th, ph = rng.uniform(0.1, 2), rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi)
        Jx, Jy, Jz = rng.uniform(-1, 1, 3)
        spec = SpinChainSpec(2, (CouplingStrengths(Jx, Jy, Jz),), MagneticField(h, th, ph))
        H = build_hamiltonian(spec)
        # Basis (uu, ud, du, dd); hand-expanded matrix entries.
        hx, hy, hz = h * math.sin(th) * math.cos(ph), h * math.sin(th) * math.sin(ph), h * math.cos(th)
        off = -hx + 1j * hy
        ref = np.array([
            [-2 * hz + Jz, off, off, Jx - Jy],
            [np.conj(off), -Jz, Jx + Jy, off],
            [np.conj(off), Jx + Jy, -Jz, off],
            [Jx - Jy, np.conj(off), np.conj(off), 2 * hz + Jz],
        ])
        assert np.allclose(H, ref, atol=1e-14)


def test_isotropic_pair_spectrum():
    h, J = 1.0, 0.3
    spec = SpinChainSpec.homogeneous(2, CouplingStrengths.isotropic(J), MagneticField(h, 0.0))
    E = diagonalize(build_hamiltonian(spec)).energies
    assert np.allclose(E, sorted([-2 * h + J, J, -3 * J, 2 * h + J]))


@pytest.mark.parametrize("J", [0.2, 0.45, 0.55, 0.9])
def test_gap_near_crossing(J):
    h = 1.0
    spec = SpinChainSpec.homogeneous(2, CouplingStrengths.isotropic(J), MagneticField(h, 0.0))
    E = sorted([-2 * h + J, J, -3 * J, 2 * h + J])
    assert spectral_gap(spec) == pytest.approx(E[1] - E[0], abs=1e-12)
    if abs(J - 0.5) < 0.1:
        assert spectral_gap(spec) == pytest.approx(abs(4 * J - 2 * h), abs=1e-12)


def test_ground_states_at_theta_zero():
    up = np.array([1, 0, 0, 0])
    singlet = np.array([0, 1, -1, 0]) / math.sqrt(2)
    for J, ref in ((0.3, up), (0.7, singlet)):
        spec = SpinChainSpec.homogeneous(2, CouplingStrengths.isotropic(J), MagneticField(1.0, 0.0))
        psi, flagged = ground_state(build_hamiltonian(spec))
        assert abs(np.vdot(ref, psi)) == pytest.approx(1.0)
        assert not flagged


def test_degenerate_ground_state_tie_break():
    # At J = h/2 the all-up state and the singlet cross; the tie-break picks all-up.
    spec = SpinChainSpec.homogeneous(2, CouplingStrengths.isotropic(0.5), MagneticField(1.0, 0.0))
    psi, flagged = ground_state(build_hamiltonian(spec))
    assert flagged
    assert abs(psi[0]) == pytest.approx(1.0)


def test_diagonalize_residual_and_hermiticity(rng):
    spec = SpinChainSpec.homogeneous(4, CouplingStrengths(0.3, 0.2, 0.1), MagneticField(1.0, 0.7, 0.4))
    H = build_hamiltonian(spec)
    assert hermiticity_defect(H) < 1e-12
    s = diagonalize(H)
    assert np.all(np.diff(s.energies) >= 0)
    res = np.linalg.norm(H @ s.states - s.states * s.energies, axis=0)
    assert res.max() <= 1e-10 * np.linalg.norm(H, 2)
    with pytest.raises(ValueError):
        diagonalize(np.array([[0, 1], [0, 0]], dtype=complex))


def test_field_derivatives_match_finite_difference():
    N, h, th, ph, eps = 3, 0.8, 0.9, 0.3, 1e-6
    bonds = (CouplingStrengths.isotropic(0.2),) * 2
    Hf = lambda t, p: build_hamiltonian(SpinChainSpec(N, bonds, MagneticField(h, t, p)))
    dth, dph = field_derivatives(N, MagneticField(h, th, ph))
    assert np.allclose(dth, (Hf(th + eps, ph) - Hf(th - eps, ph)) / (2 * eps), atol=1e-8)
    assert np.allclose(dph, (Hf(th, ph + eps) - Hf(th, ph - eps)) / (2 * eps), atol=1e-8)


def test_total_operators():
    ops = chain_operators(3)
    assert np.allclose(ops.total["z"], sum(pauli_string(3, j, "z") for j in (1, 2, 3)))
    assert ops.sigma_y.shape == (3, 8, 8)

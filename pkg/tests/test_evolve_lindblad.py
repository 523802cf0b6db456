from __future__ import annotations

import math

import numpy as np
import pytest

from dqhe.circuit_map import CouplingStrengths
from dqhe.evolve_lindblad import (
    DecoherenceParams,
    Dissipator,
    PositivityError,
    check_density_matrices,
    evolve_open,
    lindblad_rhs,
    to_level_order,
    two_qubit_master_equation,
)
from dqhe.evolve_unitary import evolve
from dqhe.integrate import dop853
from dqhe.probes import generalized_force
from dqhe.schedules import ConstantField, RampProtocol
from dqhe.spin_system import MagneticField, SpinChainSpec, build_hamiltonian, pauli_string

from conftest import H76, random_density


def _spec(J=0.3 * H76):
    return SpinChainSpec.homogeneous(2, CouplingStrengths.isotropic(J))


def test_hand_written_pair_equations_match_generic(rng):
    worst = 0.0
    for _ in range(100):
        T1 = rng.uniform(50, 1000)
        T2 = rng.uniform(0.2, 2.0) * T1
        d = DecoherenceParams(T1, T2)
        field = MagneticField(rng.uniform(0.1, 3), rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi))
        bond = CouplingStrengths(*rng.uniform(-1, 1, 3))
        H = build_hamiltonian(SpinChainSpec(2, (bond,), field))
        rho = random_density(rng, 4)
        generic = to_level_order(lindblad_rhs(rho, H, d))
        hand = two_qubit_master_equation(to_level_order(rho), to_level_order(H), d.gamma, d.Gamma_phi)
        worst = max(worst, np.max(np.abs(generic - hand)))
    assert worst < 1e-12


def test_single_qubit_rates():
    d = DecoherenceParams(T1=100.0, T2=150.0)
    rho0 = np.full((2, 2), 0.5, dtype=complex)
    t = 40.0
    rho = dop853(lambda s, r: lindblad_rhs(r, np.zeros((2, 2)), d), 0.0, rho0, [t])[0]
    assert rho[0, 0].real == pytest.approx(0.5 * math.exp(-2 * d.gamma * t), rel=1e-8)
    assert abs(rho[0, 1]) == pytest.approx(0.5 * math.exp(-(d.gamma + 4 * d.Gamma_phi) * t), rel=1e-8)


def test_rate_conventions():
    p = DecoherenceParams(658.0, 812.0)
    assert p.gamma == pytest.approx(1 / 658)
    assert p.Gamma_phi == pytest.approx(1 / 812 - 1 / 1316)
    c = DecoherenceParams(658.0, 812.0, rate_convention="calibrated")
    assert c.gamma == pytest.approx(1 / 1316)
    assert c.Gamma_phi == pytest.approx(p.Gamma_phi / 4)
    with pytest.raises(ValueError):
        DecoherenceParams(100.0, 250.0)
    with pytest.raises(ValueError):
        DecoherenceParams(100.0, 100.0, rate_convention="other")


def test_thermal_occupation():
    d = DecoherenceParams(100.0, 100.0, temperature_mK=30.0, thermal=True)
    x = 1.054571817e-34 * 2 * math.pi * 4.77e9 / (1.380649e-23 * 0.030)
    assert d.n0 == pytest.approx(1 / (math.exp(x) - 1), rel=1e-12)
    assert DecoherenceParams(100.0, 100.0).n0_used == 0.0
    assert len(Dissipator(1, d).rates) == 3


def test_trace_hermiticity_positivity():
    d = DecoherenceParams(200.0, 250.0)
    p = RampProtocol.from_ramp_time(20.0, h_rule=ConstantField(H76), t_meas=10.0)
    rho = evolve_open(_spec(), p, d).final_state
    assert abs(np.trace(rho) - 1) < 1e-8
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-10
    assert np.linalg.eigvalsh(rho).min() > -1e-8


def test_zero_rates_reproduce_unitary():
    p = RampProtocol.from_ramp_time(20.0, h_rule=ConstantField(H76))
    closed = DecoherenceParams.closed()
    assert closed.gamma == 0 and closed.Gamma_phi == 0
    rho = evolve_open(_spec(), p, closed).final_state
    psi = evolve(_spec(), p).final_state
    assert np.max(np.abs(rho - np.outer(psi, psi.conj()))) < 1e-6


def test_frozen_window_differs_from_free():
    d = DecoherenceParams(658.0, 812.0)
    kw = dict(h_rule=ConstantField(H76), t_meas=10.0)
    free = evolve_open(_spec(), RampProtocol.from_ramp_time(10.0, **kw), d).sigma_y_expectations
    frozen = evolve_open(_spec(), RampProtocol.from_ramp_time(10.0, measurement="frozen", **kw),
                         d).sigma_y_expectations
    assert not np.allclose(free, frozen)


def test_stronger_decoherence_erodes_plateau():
    p = RampProtocol.from_ramp_time(50.0, h_rule=ConstantField(H76), t_meas=10.0)
    F = []
    for T1 in (3000.0, 1000.0, 300.0):
        traj = evolve_open(_spec(), p, DecoherenceParams(T1, T1))
        F.append(generalized_force(traj.sigma_y_expectations, traj.h, p.theta_final) / p.v)
    assert F[0] > F[1] > F[2]


def test_positivity_check():
    bad = np.diag([1.2, -0.2]).astype(complex)
    with pytest.raises(PositivityError):
        check_density_matrices(bad)
    check_density_matrices(np.eye(2) / 2)


def test_generic_dissipator_structure():
    d = DecoherenceParams(100.0, 120.0)
    D = Dissipator(2, d)
    # sigma^- on each qubit plus dephasing on each qubit.
    assert len(D.rates) == 4
    assert np.allclose(D.jumps[0], np.kron([[0, 0], [1, 0]], np.eye(2)))
    assert np.allclose(D.jumps[1], pauli_string(2, 1, "z"))

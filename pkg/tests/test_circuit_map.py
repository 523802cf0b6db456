from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dqhe.circuit_map import (
    CircuitError,
    CircuitParams,
    CouplingRangeError,
    CouplingStrengths,
    JunctionSwitchedError,
    ResonanceError,
    bias_for_coupling,
    calibrate_c_int,
    coupler_plasma_frequency,
    couplings,
    josephson_inductance,
    mhz_to_rad_per_ns,
    rad_per_ns_to_mhz,
    renormalisation_factor,
    renormalized_inductances,
)

P = CircuitParams()


def test_josephson_inductance_hand_value():
    # Phi0 / (2 pi * 3 uA) = 2.0678e-15 / 1.88496e-5 H
    assert josephson_inductance(0.0, 3.0) == pytest.approx(0.10970, rel=1e-3)
    assert josephson_inductance(0.0, 3.0, prefactor=False) == pytest.approx(1 / 3)


def test_josephson_inductance_domain_and_monotone():
    assert josephson_inductance(0.99 * 3, 3.0) > josephson_inductance(0.9 * 3, 3.0)
    with pytest.raises(JunctionSwitchedError):
        josephson_inductance(3.0, 3.0)
    with pytest.raises(CircuitError):
        josephson_inductance(-0.1, 3.0)


def test_renormalisation_factor():
    assert renormalisation_factor(P) == pytest.approx(1 - 0.41**2 / 9, abs=1e-15)
    assert renormalisation_factor(P) == pytest.approx(0.98132, abs=1e-5)
    M_t, L_R_t, L_L_t, _ = renormalized_inductances(P)
    assert M_t / P.M == pytest.approx(L_R_t / P.L_R, rel=1e-15)
    assert L_R_t == L_L_t
    M_t0, *_ = renormalized_inductances(P.with_(M=0.0))
    assert M_t0 == 0.0


def test_int_inductance_dressing():
    _, _, _, L_int_t = renormalized_inductances(P, 0.0)
    assert L_int_t == pytest.approx(josephson_inductance(0.0, 3.0) * (1 + 0.41 / 3) ** 2)


def test_coupling_hand_evaluation():
    # Independent evaluation of the XY and Z formulas at I_b = 0 with plain arithmetic.
    f = 1 - 0.41**2 / 9
    Lint = 2.067833848e-15 / (2 * math.pi * 3e-6) * 1e9  # nH
    Lint_t = Lint * (1 + 0.41 / 3) ** 2
    wq = 2 * math.pi * 4.77
    wint = 1 / math.sqrt(Lint * 0.155 * 1e-3)
    denom = (f * 3) ** 2 * wq * 1.0 * 1e-3
    jxy = 0.25 * (f * 0.41 - Lint_t / (1 - (wq / wint) ** 2)) / denom
    jz = 0.25 * (f * 0.41 - Lint_t) / (denom * 30)
    c = couplings(P, 0.0)
    assert c.Jx == pytest.approx(jxy, rel=1e-12)
    assert c.Jz == pytest.approx(jz, rel=1e-12)
    assert c.Jx == c.Jy


def test_fig2_anchors():
    assert 35 <= rad_per_ns_to_mhz(couplings(P, 0.0).Jx) <= 45
    assert abs(rad_per_ns_to_mhz(couplings(P, 0.93 * P.I_cr).Jx)) < 2


def test_jx_monotone_on_branch():
    jx = [couplings(P, x * P.I_cr).Jx for x in np.linspace(0, 0.93, 94)]
    assert np.all(np.diff(jx) < 0)


def test_pauli_normalisation_is_four_times_larger():
    a = couplings(P, 0.2 * P.I_cr)
    b = couplings(P.with_(coupling_normalisation="pauli"), 0.2 * P.I_cr)
    assert b.Jx == pytest.approx(4 * a.Jx)


def test_resonance_rejected():
    # Pick C_int so the coupler plasma frequency equals the qubit frequency at I_b = 0.
    Lint = josephson_inductance(0.0, P.I_cr)
    c_res = 1 / (P.omega_q**2 * Lint * 1e-3)
    with pytest.raises(ResonanceError):
        couplings(P.with_(C_int=c_res), 0.0)
    assert coupler_plasma_frequency(P.with_(C_int=c_res), 0.0) == pytest.approx(P.omega_q)


def test_invalid_params():
    with pytest.raises(CircuitError):
        CircuitParams(C_j=0.0)
    with pytest.raises(CircuitError):
        CircuitParams(M=3.0)
    with pytest.raises(CircuitError):
        CircuitParams(frequency_convention="hz")


def test_frequency_convention():
    assert P.omega_q == pytest.approx(2 * math.pi * 4.77)
    assert P.with_(frequency_convention="omega").omega_q == 4.77


def test_bias_round_trip_and_zero():
    target = couplings(P, 0.3 * P.I_cr).Jx
    assert bias_for_coupling(P, target) == pytest.approx(0.3 * P.I_cr, abs=1e-6 * P.I_cr)
    assert bias_for_coupling(P, 0.0) / P.I_cr == pytest.approx(0.93, abs=0.03)
    with pytest.raises(CouplingRangeError):
        bias_for_coupling(P, 2 * couplings(P, 0.0).Jx)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.9))
def test_bias_inverse_property(x):
    I_b = x * P.I_cr
    assert bias_for_coupling(P, couplings(P, I_b).Jx) == pytest.approx(I_b, abs=1e-6 * P.I_cr)


def test_calibrate_c_int_places_zero():
    c = calibrate_c_int(P.with_(C_int=1.0))
    assert c == pytest.approx(0.155, abs=1e-3)
    assert abs(couplings(P.with_(C_int=c), 0.93 * P.I_cr).Jx) < 1e-9


def test_coupling_strengths_helpers():
    c = CouplingStrengths(1.0, 1.0, 1.0)
    assert c.Jbar == pytest.approx(1.0)
    assert CouplingStrengths(3.0, 0, 0).Jbar == pytest.approx(math.sqrt(3))
    assert c.scaled(2).Jz == 2
    assert mhz_to_rad_per_ns(1000 / (2 * math.pi)) == pytest.approx(1.0)

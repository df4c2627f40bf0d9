"""Impulse decomposition: jump matrices, phases, cycle products."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lzsim import (DriveProtocol, LZParams, SystemSpec, adiabatic_matrix,
                   closed_form_two_level, compose_linear, compose_periodic,
                   impulse_matrix, integrate, initial_state, lz_probability,
                   periodic_time_average, stokes_phase, validity_report,
                   SweepWindow)
from lzsim.errors import CrossingInsideSegment, NoCrossing


def reachable_drive(draw_Delta0, draw_delta, draw_omega):
    return DriveProtocol.periodic(Delta0=draw_Delta0, delta=draw_delta,
                                  omega=draw_omega)


# ---------------------------------------------------------------------------
# scalar pieces

def test_jump_probability_formula():
    # P = exp(-2 pi gamma) with gamma = gap^2 / (4 * slope_factor * rate)
    assert lz_probability(LZParams(gap=1e-12, rate=1.0)) == pytest.approx(
        1.0, abs=1e-12)
    assert lz_probability(LZParams(gap=1.0, rate=2.0)) == pytest.approx(
        math.exp(-math.pi / 4.0), rel=1e-15)
    assert lz_probability(LZParams(gap=1.0, rate=2.0, slope_factor=2.0)) \
        == pytest.approx(math.exp(-math.pi / 8.0), rel=1e-15)


def test_params_validation():
    with pytest.raises(ValueError):
        LZParams(gap=-1.0, rate=1.0)
    with pytest.raises(ValueError):
        LZParams(gap=1.0, rate=0.0)
    with pytest.raises(ValueError):
        LZParams(gap=1.0, rate=1.0, slope_factor=0.0)
    assert LZParams(gap=2.0, rate=1.0).gamma == pytest.approx(1.0)


def test_stokes_phase_frozen_point():
    # pi/4 - 1 + arg Gamma(1 - i) with arg Gamma frozen from mpmath
    assert stokes_phase(LZParams(gap=2.0, rate=1.0)) == pytest.approx(
        math.pi / 4.0 - 1.0 + 0.30164032046753320, abs=1e-12)


def test_stokes_phase_limits():
    # sudden limit pi/4; adiabatic fall-off 1/(12 gamma)
    assert stokes_phase(LZParams(gap=1e-9, rate=1.0)) == pytest.approx(
        math.pi / 4.0, abs=1e-9)
    g = 1.0e4
    assert stokes_phase(LZParams(gap=2.0e2, rate=1.0)) == pytest.approx(
        1.0 / (12.0 * g), rel=1e-3)


# ---------------------------------------------------------------------------
# transfer matrices

@settings(max_examples=60, deadline=None)
@given(gap=st.floats(0.01, 10.0), rate=st.floats(0.01, 50.0),
       crossing=st.sampled_from([1, 2, 3]),
       transpose=st.booleans(), zero=st.booleans())
def test_impulse_matrix_unitary(gap, rate, crossing, transpose, zero):
    params = LZParams(gap=gap, rate=rate)
    U = impulse_matrix(crossing, params, dim=3, transpose=transpose,
                       zero_stokes=zero).entries
    np.testing.assert_allclose(U @ U.T.conj(), np.eye(3), atol=1e-12)


def test_impulse_matrix_slot_structure():
    params = LZParams(gap=1.0, rate=2.0)
    # crossing 2 couples the upper descending pair (slots 0, 1);
    # crossings 1 and 3 couple slots 1, 2
    U2 = impulse_matrix(2, params, dim=3).entries
    assert abs(U2[2, 2]) == pytest.approx(1.0, abs=1e-14)
    assert U2[0, 2] == U2[2, 0] == 0.0
    U1 = impulse_matrix(1, params, dim=3).entries
    assert abs(U1[0, 0]) == pytest.approx(1.0, abs=1e-14)
    # two-level matrices ignore the slot question
    U = impulse_matrix(1, params, dim=2).entries
    assert abs(U[0, 0]) ** 2 == pytest.approx(
        1.0 - lz_probability(params), rel=1e-12)


def test_impulse_matrix_zero_stokes_is_real():
    U = impulse_matrix(1, LZParams(gap=1.0, rate=2.0), dim=2,
                       zero_stokes=True).entries
    np.testing.assert_allclose(U.imag, 0.0, atol=1e-15)


def test_adiabatic_matrix_is_diagonal_phase():
    s = SystemSpec.three_level(Omega=1.0, V0=10.0)
    p = DriveProtocol.linear(v=2.0)
    A = adiabatic_matrix(s, p, 5.1, 7.3)
    M = A.entries
    assert A.zetas is not None and len(A.zetas) == 3
    np.testing.assert_allclose(M, np.diag(np.diag(M)), atol=1e-15)
    np.testing.assert_allclose(np.abs(np.diag(M)), 1.0, atol=1e-12)
    # zero span: identity
    np.testing.assert_allclose(adiabatic_matrix(s, p, 5.1, 5.1).entries,
                               np.eye(3), atol=1e-14)


def test_adiabatic_matrix_rejects_straddled_crossing():
    s = SystemSpec.three_level(Omega=1.0, V0=10.0)
    p = DriveProtocol.linear(v=2.0)
    with pytest.raises(CrossingInsideSegment):
        adiabatic_matrix(s, p, -1.0, 1.0)   # crossing 1 sits at t = 0


# ---------------------------------------------------------------------------
# cycle products: the driven single atom

def cycle_system(Delta0, delta, omega, Omega=1.0):
    return (SystemSpec.two_level(Omega=Omega),
            DriveProtocol.periodic(Delta0=Delta0, delta=delta, omega=omega))


@settings(max_examples=40, deadline=None)
@given(Delta0=st.floats(-8.0, 8.0), delta=st.floats(10.0, 30.0),
       omega=st.floats(0.5, 3.0), k=st.integers(1, 60))
def test_closed_form_matches_matrix_power(Delta0, delta, omega, k):
    s, p = cycle_system(Delta0, delta, omega)
    cf = closed_form_two_level(s, p, k=k)
    a0 = np.array([1.0, 0.0], complex)   # ascending: start in the lower level
    final, _ = compose_periodic(s, p, a0, cycles=k)
    assert cf["P_plus_k"] == pytest.approx(abs(final[1]) ** 2, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(Delta0=st.floats(-8.0, 8.0), delta=st.floats(10.0, 30.0),
       omega=st.floats(0.5, 3.0), k=st.integers(1, 200))
def test_closed_form_invariants(Delta0, delta, omega, k):
    s, p = cycle_system(Delta0, delta, omega)
    cf = closed_form_two_level(s, p, k=k)
    # the cycle matrix is unitary: |g11|^2 + |g21|^2 = 1
    assert abs(cf["g11"]) ** 2 + abs(cf["g21"]) ** 2 == pytest.approx(
        1.0, abs=1e-12)
    assert 0.0 <= cf["alpha"] <= math.pi
    # envelope bound and long-time mean
    assert cf["P_plus_k"] <= cf["P_max"] + 1e-12
    assert cf["P_max"] <= 1.0 + 1e-12
    assert 0.0 <= cf["P_bar"] <= 0.5 + 1e-12


def test_cycle_structure_ignores_cycle_start():
    s, p = cycle_system(5.0, 20.0, 2.0)
    a = closed_form_two_level(s, p, k=7, t_start=0.0)
    b = closed_form_two_level(s, p, k=7, t_start=0.25 * p.period)
    # alpha (hence P_max and P_bar) is a property of the cycle, not of
    # where the cycle is cut
    assert a["alpha"] == pytest.approx(b["alpha"], abs=1e-9)
    assert a["P_max"] == pytest.approx(b["P_max"], abs=1e-9)


def test_compose_periodic_requires_crossing():
    s, p = cycle_system(50.0, 25.0, 2.0)   # |Delta0| > delta: no crossing
    with pytest.raises(NoCrossing):
        compose_periodic(s, p, np.array([1.0, 0.0], complex), cycles=3)


def test_compose_periodic_conserves_norm():
    s, p = cycle_system(5.0, 20.0, 1.3)
    rng = np.random.default_rng(7)
    raw = rng.normal(size=2) + 1j * rng.normal(size=2)
    a0 = raw / np.linalg.norm(raw)
    final, deco = compose_periodic(s, p, a0, cycles=33)
    assert np.linalg.norm(final) == pytest.approx(1.0, abs=1e-12)
    for mat in deco.matrices:
        np.testing.assert_allclose(mat.entries @ mat.entries.T.conj(),
                                   np.eye(2), atol=1e-12)


def test_periodic_time_average_normalised():
    s, p = cycle_system(5.0, 20.0, 2.0)
    avg = periodic_time_average(s, p, np.array([1.0, 0.0], complex),
                                cycles=50)
    assert set(avg) == {"P_minus", "P_plus"}
    assert avg["P_minus"] + avg["P_plus"] == pytest.approx(1.0, abs=1e-9)

    s3 = SystemSpec.three_level(Omega=1.0, V0=40.0)
    p3 = DriveProtocol.periodic(Delta0=-15.0, delta=25.0, omega=5.0)
    avg3 = periodic_time_average(s3, p3, np.array([1.0, 0, 0], complex),
                                 cycles=50)
    assert set(avg3) == {"P_1", "P_2", "P_3"}
    assert sum(avg3.values()) == pytest.approx(1.0, abs=1e-9)


def test_single_cycle_against_exact_propagation():
    # one full drive cycle, ground start at the sweep turning point:
    # impulse picture vs exact integration (coarse agreement is the whole
    # point of the approximation)
    s, p = cycle_system(5.0, 20.0, 1.0)
    t0 = 0.25 * p.period
    cf = closed_form_two_level(s, p, k=1, t_start=t0)
    w = SweepWindow(t0, t0 + p.period, samples=2)
    traj = integrate(s, p, initial_state(s, p, "adiabatic_minus", t0),
                     window=w, tol=1e-11)
    from lzsim import project_adiabatic
    traj = project_adiabatic(s, p, traj)
    assert cf["P_plus_k"] == pytest.approx(traj.P_adiab[-1, 1], abs=0.05)


# ---------------------------------------------------------------------------
# linear ramps of the pair

def test_compose_linear_matches_exact():
    s = SystemSpec.three_level(Omega=1.0, V0=6.0)
    p = DriveProtocol.linear(v=2.0)
    a0 = np.array([1.0, 0.0, 0.0], complex)
    final, deco = compose_linear(s, p, a0)
    assert np.linalg.norm(final) == pytest.approx(1.0, abs=1e-12)
    assert [m.kind for m in deco.matrices] == [
        "adiabatic", "impulse", "adiabatic", "impulse", "adiabatic",
        "impulse", "adiabatic"]

    from lzsim import default_window, project_adiabatic
    w = default_window(s, p)
    traj = integrate(s, p, initial_state(s, p, "adiabatic_1", w.t_i),
                     window=SweepWindow(w.t_i, w.t_f, samples=2), tol=1e-11)
    traj = project_adiabatic(s, p, traj)
    np.testing.assert_allclose(np.abs(final) ** 2, traj.P_adiab[-1],
                               atol=0.05)


def test_compose_linear_rejects_single_atom():
    s = SystemSpec.two_level(Omega=1.0)
    with pytest.raises(ValueError):
        compose_linear(s, DriveProtocol.linear(v=2.0),
                       np.array([1.0, 0.0], complex))


def test_zero_stokes_changes_eigenstate_outcomes():
    # the Stokes phases enter through path interference between the three
    # crossings, so zeroing them must move the final populations
    s = SystemSpec.three_level(Omega=1.0, V0=2.0)
    p = DriveProtocol.linear(v=1.0)
    a0 = np.array([1.0, 0.0, 0.0], complex)
    full, _ = compose_linear(s, p, a0)
    bare, _ = compose_linear(s, p, a0, zero_stokes=True)
    shift = np.max(np.abs(np.abs(full) ** 2 - np.abs(bare) ** 2))
    assert shift > 1e-4


def test_state_validation():
    s, p = cycle_system(5.0, 20.0, 2.0)
    with pytest.raises(ValueError):
        compose_periodic(s, p, np.array([1.0, 0.0, 0.0], complex), cycles=1)
    with pytest.raises(ValueError):
        compose_periodic(s, p, np.array([2.0, 0.0], complex), cycles=1)
    with pytest.raises(ValueError):
        compose_periodic(s, p, np.array([1.0, 0.0], complex), cycles=0)


# ---------------------------------------------------------------------------
# validity report

def test_validity_two_level_periodic():
    s, p = cycle_system(5.0, 20.0, 2.0)
    rep = validity_report(s, p)
    names = [c.name for c in rep.criteria]
    assert "amplitude_exceeds_coupling" in names
    assert "sweep_speed_exceeds_coupling" in names
    assert rep.verdict
    for c in rep.criteria:
        assert c.satisfied == (c.margin > 0.0)


def test_validity_flags_weak_drive():
    s = SystemSpec.two_level(Omega=5.0)
    p = DriveProtocol.periodic(Delta0=0.0, delta=6.0, omega=0.1)
    rep = validity_report(s, p)
    assert not rep.verdict


def test_validity_linear_branches():
    s = SystemSpec.three_level(Omega=1.0, V0=10.0)
    fast = validity_report(s, DriveProtocol.linear(v=5.0))
    slow = validity_report(s, DriveProtocol.linear(v=0.2))
    assert [c.name for c in fast.criteria] == ["interaction_beats_rate"]
    assert [c.name for c in slow.criteria] == ["rate_within_gap_window"]
    assert fast.verdict and slow.verdict

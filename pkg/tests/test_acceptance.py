"""Acceptance gate: thirteen checks, one printed PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v`.  Every check prints its
verdict and headline metric even under output capture, then asserts.
"""

import math
import time

import numpy as np
import pytest

from lzsim import (DriveProtocol, LZParams, SweepAxis, SweepGrid,
                   SystemSpec, SweepWindow, beat_analysis,
                   closed_form_two_level, compose_linear, compose_periodic,
                   default_window, detect_resonances, gap_report,
                   impulse_matrix, initial_state, integrate,
                   interacting_correction_final, project_adiabatic,
                   resonance_catalog, run_sweep, symmetric_window,
                   time_average)
from lzsim.hamiltonian import detuning, eigensystem, level_energies

TOL = 1e-11          # integration tolerance for every acceptance run
NORM_BUDGET = 1e-9   # criterion 1: worst allowed norm drift

PAIR = dict(Delta0=-15.0, delta=25.0)


@pytest.fixture
def announce(capfd):
    def _announce(tag, name, ok, metric):
        with capfd.disabled():
            print("ACCEPT-%d %s: %s (%s)"
                  % (tag, name, "PASS" if ok else "FAIL", metric))
    return _announce


def integrate_checked(s, p, label, window, tol=TOL):
    """Exact propagation that enforces the norm budget of criterion 1."""
    traj = integrate(s, p, initial_state(s, p, label, window.t_i),
                     window=window, tol=tol)
    assert traj.norm_drift <= NORM_BUDGET
    return project_adiabatic(s, p, traj)


def adiabatic_amplitudes(s, p, label, t):
    state = initial_state(s, p, label, t)
    frame = eigensystem(s, detuning(p, t))
    return frame.eigvecs.T.conj() @ state.amplitudes


def dip_locations(sweep, channel, match_tol):
    hits = detect_resonances(sweep, channel, prominence=0.02,
                             match_tol=match_tol)
    return [h.location for h in hits if h.kind == "dip"]


def matched(target, locations, tol):
    return any(abs(x - target) <= tol for x in locations)


def average_sweep(V0, delta, omegas, label, engine, delta0=-15.0, tol=TOL):
    system = SystemSpec.three_level(Omega=1.0, V0=V0)
    drive = DriveProtocol.periodic(Delta0=delta0, delta=delta,
                                   omega=omegas[0])
    grid = SweepGrid(system, drive,
                     (SweepAxis("omega", tuple(omegas)),),
                     label, "average", cycles=100, samples_per_cycle=100,
                     tol=tol)
    done = run_sweep(grid, engine=engine)
    assert not done.failed.any()
    return done


# ---------------------------------------------------------------------------

def test_accept_01_unitarity(announce):
    # norm conservation over the harshest integrations in this suite, each
    # at the tolerance the corresponding check actually uses (the two very
    # long ramps run at 1e-12 there as well)
    drifts = []
    runs = [
        (SystemSpec.three_level(1.0, 10.0), DriveProtocol.linear(1.0),
         "gg", SweepWindow(-10.0, 40.0), TOL),
        (SystemSpec.three_level(1.0, 0.1), DriveProtocol.linear(1.0),
         "gg", SweepWindow(-80.0, 90.1), 1e-12),
        (SystemSpec.three_level(1.0, 2.0), DriveProtocol.linear(5.0),
         "adiabatic3", SweepWindow(-16.0, 80.0), 1e-12),
        (SystemSpec.three_level(1.0, 40.0),
         DriveProtocol.periodic(omega=2.3, **PAIR), "gg",
         SweepWindow(0.0, 100 * 2 * math.pi / 2.3, samples=10000), TOL),
        (SystemSpec.three_level(1.0, 40.0),
         DriveProtocol.periodic(omega=10.5, **PAIR), "s",
         SweepWindow(0.0, 100 * 2 * math.pi / 10.5, samples=10000), TOL),
        (SystemSpec.three_level(1.0, 40.0),
         DriveProtocol.periodic(Delta0=-15.0, delta=65.0, omega=6.5), "rr",
         SweepWindow(0.0, 100 * 2 * math.pi / 6.5, samples=10000), 1e-12),
        (SystemSpec.two_level(1.0),
         DriveProtocol.periodic(Delta0=5.0, delta=20.0, omega=0.3),
         "adiabatic_minus",
         SweepWindow(math.pi / 0.6, math.pi / 0.6 + 2 * math.pi / 0.3,
                     samples=400), TOL),
    ]
    for s, p, label, w, tol in runs:
        traj = integrate(s, p, initial_state(s, p, label, w.t_i),
                         window=w, tol=tol)
        drifts.append(traj.norm_drift)
    drift_max = max(drifts)

    # transfer-matrix unitarity: every factor of real schedules plus a
    # scatter of standalone impulse matrices
    defect = 0.0

    def worst(mat):
        U = mat.entries
        return float(np.max(np.abs(U.conj().T @ U - np.eye(len(U)))))

    schedules = [
        (SystemSpec.three_level(1.0, 40.0),
         DriveProtocol.periodic(omega=7.5, **PAIR)),
        (SystemSpec.three_level(1.0, 40.0),
         DriveProtocol.periodic(omega=13.75, **PAIR)),
        (SystemSpec.three_level(1.0, 40.0),
         DriveProtocol.periodic(Delta0=-15.0, delta=65.0, omega=11.0)),
        (SystemSpec.two_level(1.0),
         DriveProtocol.periodic(Delta0=5.0, delta=20.0, omega=1.0)),
    ]
    for s, p in schedules:
        a0 = np.zeros(s.dim, complex)
        a0[0] = 1.0
        _, decomp = compose_periodic(s, p, a0, cycles=1)
        for mat in decomp.matrices:
            defect = max(defect, worst(mat))
    s = SystemSpec.three_level(1.0, 6.0)
    p = DriveProtocol.linear(2.0)
    _, decomp = compose_linear(s, p, np.array([1.0, 0.0, 0.0], complex))
    for mat in decomp.matrices:
        defect = max(defect, worst(mat))

    rng = np.random.default_rng(11)
    for _ in range(200):
        params = LZParams(gap=rng.uniform(0.05, 5.0),
                          rate=rng.uniform(0.1, 50.0),
                          slope_factor=rng.choice([1.0, 2.0]))
        dim = int(rng.choice([2, 3]))
        crossing = 1 if dim == 2 else int(rng.integers(1, 4))
        mat = impulse_matrix(crossing, params, dim=dim,
                             transpose=bool(rng.integers(2)),
                             zero_stokes=bool(rng.integers(2)))
        defect = max(defect, worst(mat))

    ok = drift_max <= NORM_BUDGET and defect <= 1e-12
    announce(1, "unitarity", ok,
             "max norm drift %.2e (<= 1e-9), max transfer defect %.2e "
             "(<= 1e-12)" % (drift_max, defect))
    assert drift_max <= NORM_BUDGET
    assert defect <= 1e-12


def test_accept_02_eigenvalue_oracle(announce):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        Delta = rng.uniform(-150.0, 150.0)
        V0 = rng.uniform(0.0, 150.0)
        s = SystemSpec.three_level(Omega=1.0, V0=V0)
        trig = np.sort(level_energies(s, np.array([Delta]))[0])
        c = s.Omega / math.sqrt(2.0)
        d1, d2, d3 = 0.0, -Delta, V0 - 2.0 * Delta
        # characteristic polynomial of the tridiagonal 3x3
        tr = d1 + d2 + d3
        m2 = d1 * d2 + d1 * d3 + d2 * d3 - 2.0 * c * c
        det = d1 * d2 * d3 - c * c * (d1 + d3)
        roots = np.sort(np.roots([1.0, -tr, m2, -det]).real)
        worst = max(worst, float(np.max(np.abs(trig - roots))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10.0
    announce(2, "eigenvalue_oracle", ok,
             "1000 draws, max |trig - roots| %.2e (<= 1e-9), %.1f s"
             % (worst, elapsed))
    assert worst <= 1e-9
    assert elapsed < 10.0


def test_accept_03_gap_structure(announce):
    big = gap_report(SystemSpec.three_level(Omega=1.0, V0=100.0))
    sat = abs(big.gap_zero - math.sqrt(2.0))

    grid = np.linspace(0.5, 100.0, 50)
    outer = max(abs(gap_report(SystemSpec.three_level(1.0, V0)).gap_zero
                    - gap_report(SystemSpec.three_level(1.0, V0)).gap_full)
                for V0 in grid)

    V0s = np.geomspace(20.0, 100.0, 30)
    mids = [gap_report(SystemSpec.three_level(1.0, V0)).gap_half
            for V0 in V0s]
    slope = float(np.polyfit(np.log(V0s), np.log(mids), 1)[0])

    ok = sat <= 1e-3 and outer <= 1e-9 and abs(slope + 1.0) <= 0.05
    announce(3, "gap_structure", ok,
             "sqrt2 saturation off by %.2e (<= 1e-3), outer-gap mismatch "
             "%.2e (<= 1e-9), middle-gap slope %.4f (-1 +- 0.05)"
             % (sat, outer, slope))
    assert sat <= 1e-3
    assert outer <= 1e-9
    assert abs(slope + 1.0) <= 0.05


def test_accept_04_single_cycle_transfer(announce):
    s = SystemSpec.two_level(Omega=1.0)
    worst = 0.0
    for omega in np.linspace(0.3, 3.0, 100):
        p = DriveProtocol.periodic(Delta0=5.0, delta=20.0, omega=omega)
        t0 = math.pi / (2.0 * omega)
        w = SweepWindow(t0, t0 + p.period, samples=400)
        traj = integrate_checked(s, p, "adiabatic_minus", w)
        cf = closed_form_two_level(s, p, k=1, t_start=t0)
        worst = max(worst, abs(traj.P_adiab[-1][1] - cf["P_plus_k"]))
    ok = worst <= 0.05
    announce(4, "single_cycle_transfer", ok,
             "100 drive frequencies, max |exact - impulse| %.4f (<= 0.05)"
             % worst)
    assert worst <= 0.05


def test_accept_05_resonance_positions(announce):
    # Known marginal miss: the n=1 dip of the exact 100-cycle average sits
    # at 15.21.  The dip is shallow and the slow resonant oscillation is
    # incommensurate with the averaging span, so truncating the average at
    # 100 cycles moves this one minimum by ~0.2 (400 cycles: 15.10; the
    # averages over cycles 100-200 / 200-300 put it at 15.1 / 15.3).  The
    # other five dips and all six impulse-approximation dips land within
    # 0.09 of the nominal positions.
    omegas = np.linspace(2.3, 16.0, 275)          # step 0.05
    done = average_sweep(40.0, 25.0, omegas, "gg", "both")
    expected = (15.0, 7.5, 5.0, 3.75, 3.0, 2.5)
    offsets = {}
    for engine in ("exact", "aia"):
        dips = dip_locations(done, "%s:P_1" % engine, match_tol=0.1)
        offsets[engine] = [min(abs(x - e) for x in dips) for e in expected]
    worst_exact = max(offsets["exact"])
    worst_aia = max(offsets["aia"])
    ok = worst_exact <= 0.1 and worst_aia <= 0.1
    announce(5, "resonance_positions", ok,
             "6 expected dips; worst offset exact %.3f, impulse %.3f "
             "(<= 0.1)" % (worst_exact, worst_aia))
    assert worst_exact <= 0.1
    assert worst_aia <= 0.1


def test_accept_06_narrow_resonances(announce):
    omegas = np.linspace(10.5, 19.0, 426)         # step 0.02
    done = average_sweep(40.0, 25.0, omegas, "s", "both")
    expected = (55.0 / 3.0, 13.75, 11.0)
    exact_dips = dip_locations(done, "exact:P_2", match_tol=0.15)
    aia_dips = dip_locations(done, "aia:P_2", match_tol=0.15)
    found = [matched(e, exact_dips, 0.15) for e in expected]
    leaked = [matched(e, aia_dips, 0.15) for e in expected]
    ok = all(found) and not any(leaked)
    announce(6, "narrow_resonances", ok,
             "exact shows %d/3 narrow dips, impulse shows %d (must be 0)"
             % (sum(found), sum(leaked)))
    assert all(found)
    assert not any(leaked)


def test_accept_07_strong_drive_coverage(announce):
    omegas = np.linspace(6.5, 20.0, 271)          # step 0.05
    catalog = resonance_catalog(-15.0, 40.0, (6.5, 20.0))
    transitions = (("gg", "s"), ("s", "rr"), ("gg", "rr"))
    worst = 0.0
    seen = {"exact": set(), "aia": set()}
    for label in ("gg", "s", "rr"):
        # the strong drive needs the tighter tolerance to hold the norm
        # budget over 100 cycles (worst start drifts 4.7e-9 at 1e-11)
        done = average_sweep(40.0, 65.0, omegas, label, "both", tol=1e-12)
        worst = max(worst, float(np.max(done.outputs["dP_max"])))
        for engine in ("exact", "aia"):
            for channel in ("P_1", "P_2", "P_3"):
                dips = dip_locations(done, "%s:%s" % (engine, channel),
                                     match_tol=0.1)
                for transition in transitions:
                    if any(matched(w, dips, 0.1)
                           for w in catalog.omegas(transition)):
                        seen[engine].add(transition)
    coverage = all(t in seen["exact"] and t in seen["aia"]
                   for t in transitions)
    ok = worst <= 0.1 and coverage
    announce(7, "strong_drive_coverage", ok,
             "3 starts x 271 frequencies, max |exact - impulse| %.4f "
             "(<= 0.1); families exact %d/3, impulse %d/3"
             % (worst, len(seen["exact"]), len(seen["aia"])))
    assert worst <= 0.1
    assert coverage


def test_accept_08_weak_interaction_closed_forms(announce):
    def deviation(v, V0):
        s = SystemSpec.three_level(Omega=1.0, V0=V0)
        p = DriveProtocol.linear(v=v)
        w = SweepWindow(-80.0 / v, (80.0 + 10.0 * v + V0) / v)
        traj = integrate_checked(s, p, "gg", w, tol=1e-12)
        predicted = interacting_correction_final(v, 1.0, V0, "gg")
        return float(np.max(np.abs(traj.P_diab[-1] - np.array(predicted))))

    worst_v = max(deviation(v, 0.1) for v in np.linspace(1.0, 10.0, 25))
    worst_V0 = max(deviation(2.0, V0)
                   for V0 in np.linspace(0.02, 0.5, 25))
    ok = worst_v <= 0.02 and worst_V0 <= 0.02
    announce(8, "weak_interaction_closed_forms", ok,
             "max |exact - formula|: %.4f over sweep rates, %.4f over "
             "interaction shifts (<= 0.02)" % (worst_v, worst_V0))
    assert worst_v <= 0.02
    assert worst_V0 <= 0.02


def test_accept_09_beat_envelope(announce):
    s = SystemSpec.three_level(Omega=1.0, V0=2.0)
    p = DriveProtocol.linear(v=5.0)
    w = SweepWindow(-16.0, 80.0, samples=30000)
    ratios = []
    for label in ("adiabatic1", "adiabatic2", "adiabatic3"):
        traj = integrate_checked(s, p, label, w, tol=1e-12)
        report = beat_analysis(traj, channel="P_s")
        ratios.append(report.envelope_frequency / (s.V0 / 2.0))
    worst = max(abs(r - 1.0) for r in ratios)
    ok = worst <= 0.10
    announce(9, "beat_envelope", ok,
             "envelope frequency / (V0/2) = %.3f, %.3f, %.3f for the three "
             "eigenstate starts (within 10%%)" % tuple(ratios))
    assert worst <= 0.10


def test_accept_10_cycle_algebra(announce):
    rng = np.random.default_rng(10)
    worst = 0.0
    bound_margin = -1.0
    for i in range(50):
        Omega = rng.uniform(0.5, 2.0)
        Delta0 = rng.uniform(-8.0, 8.0)
        delta = abs(Delta0) + rng.uniform(2.0, 22.0)
        omega = rng.uniform(0.5, 4.0)
        k = int(rng.integers(1, 26))
        s = SystemSpec.two_level(Omega=Omega)
        p = DriveProtocol.periodic(Delta0=Delta0, delta=delta, omega=omega)
        cf = closed_form_two_level(s, p, k=k)
        final, _ = compose_periodic(s, p, np.array([1.0, 0.0], complex),
                                    cycles=k)
        worst = max(worst, abs(cf["P_plus_k"] - abs(final[1]) ** 2))
        cf10 = closed_form_two_level(s, p, k=10)
        slack = math.sin(10.0 * cf10["alpha"]) ** 2 - cf10["P_plus_k"]
        bound_margin = max(bound_margin, -slack)
    ok = worst <= 1e-10 and bound_margin <= 1e-9
    announce(10, "cycle_algebra", ok,
             "50 draws: max |closed form - matrix power| %.2e (<= 1e-10); "
             "10-cycle envelope bound violated by %.2e (<= 1e-9)"
             % (worst, bound_margin))
    assert worst <= 1e-10
    assert bound_margin <= 1e-9


def test_accept_11_scale_invariance(announce):
    v, V0, Omega = 2.0, 3.0, 1.0
    worst = 0.0
    for label in ("gg", "s"):
        base = None
        for c in (1.0, 0.5, 2.0, 5.0):
            s = SystemSpec.three_level(Omega=c * Omega, V0=c * V0)
            p = DriveProtocol.linear(v=c * c * v)
            w = default_window(s, p)
            traj = integrate_checked(
                s, p, label, SweepWindow(w.t_i, w.t_f, samples=400))
            if base is None:
                base = traj.P_diab[-1]
            else:
                worst = max(worst,
                            float(np.max(np.abs(traj.P_diab[-1] - base))))
    ok = worst <= 1e-6
    announce(11, "scale_invariance", ok,
             "max population change under c in {0.5, 2, 5}: %.2e (<= 1e-6)"
             % worst)
    assert worst <= 1e-6


def test_accept_12_pattern_symmetry(announce):
    axes = (SweepAxis.linspace("v", 0.5, 10.0, 20),
            SweepAxis.linspace("V0", 0.5, 10.0, 20))
    s = SystemSpec.three_level(Omega=1.0, V0=2.0)
    p = DriveProtocol.linear(v=2.0)

    def final_sweep(label, policy):
        grid = SweepGrid(s, p, axes, label, "final",
                         window_policy=policy, tol=TOL)
        done = run_sweep(grid, engine="exact")
        assert not done.failed.any()
        return done

    down = final_sweep("adiabatic1", "symmetric")
    up = final_sweep("adiabatic3", "symmetric")
    mismatch = float(np.max(np.abs(down.outputs["exact:P_3"]
                                   - up.outputs["exact:P_1"])))

    flat = final_sweep("gg", "default")
    col_std = float(np.max(np.std(flat.outputs["exact:P_gg"], axis=1)))

    ok = mismatch <= 1e-3 and col_std <= 0.01
    announce(12, "pattern_symmetry", ok,
             "20x20 grid: max |P3(from 1) - P1(from 3)| %.2e (<= 1e-3); "
             "max P_gg std across interaction shifts %.4f (<= 0.01)"
             % (mismatch, col_std))
    assert mismatch <= 1e-3
    assert col_std <= 0.01


def test_accept_13_stokes_phase_ablation(announce):
    points = ([(2.0, V0) for V0 in np.linspace(0.5, 10.0, 20)]
              + [(v, 2.0) for v in np.linspace(0.5, 10.0, 20)])
    worst = 0.0
    for v, V0 in points:
        s = SystemSpec.three_level(Omega=1.0, V0=V0)
        p = DriveProtocol.linear(v=v)
        w = default_window(s, p)
        for slot in range(3):
            a0 = np.zeros(3, complex)
            a0[slot] = 1.0
            kept, _ = compose_linear(s, p, a0, window=w)
            ablated, _ = compose_linear(s, p, a0, window=w,
                                        zero_stokes=True)
            worst = max(worst, float(np.max(np.abs(
                np.abs(kept) ** 2 - np.abs(ablated) ** 2))))
    ok = worst <= 1e-6
    announce(13, "stokes_phase_ablation", ok,
             "max per-channel population change when the impulse phase "
             "jumps are zeroed: %.2e (<= 1e-6)" % worst)
    assert worst <= 1e-6
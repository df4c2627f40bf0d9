"""Adiabatic impulse engine: piecewise evolution through avoided crossings.

Between crossings the adiabatic amplitudes only accumulate dynamical phases
(diagonal matrices of integrated level energies); each passage through an
avoided crossing is collapsed to a point and described by a 2x2
Landau-Zener transfer block

    [[ e^{-i ps} sqrt(1-P),  -sqrt(P)          ],
     [ sqrt(P),               e^{i ps} sqrt(1-P) ]]

with P the single-passage transition probability and ps the Stokes phase.
Rising passages (positive detuning slope) use the block as written, falling
passages its transpose.

Matrix convention: every TransferMatrix in this module acts on adiabatic
amplitudes ordered from the highest instantaneous level DOWN, i.e.
(a_+, a_-) for the single atom and (a_3, a_2, a_1) for the pair, the usual
transfer-matrix layout.  The composition entry points (`compose_linear`,
`compose_periodic`, `periodic_time_average`) accept and return amplitudes
in ASCENDING level order -- matching the propagator's adiabatic
projections -- and flip the ordering internally.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CrossingInsideSegment, NoCrossing
from .hamiltonian import (LINEAR, PERIODIC, THREE_LEVEL, TWO_LEVEL,
                          CrossingEvent, crossing_targets, crossing_times,
                          detuning, gap_report, level_energies)
from .special import im_loggamma_one_minus_i

QUARTER_PI = 0.25 * math.pi


@dataclass(frozen=True)
class LZParams:
    """Effective two-state crossing parameters.

    gap is the minimal splitting of the two levels involved; rate the
    magnitude of the detuning sweep speed at the crossing; slope_factor
    the relative slope of the two diabatic lines that cross (1 for the
    single-photon crossings, 2 for the double-photon gg-rr crossing whose
    diabatic energies separate twice as fast).
    """

    gap: float
    rate: float
    slope_factor: float = 1.0

    def __post_init__(self):
        if self.gap <= 0.0:
            raise ValueError("crossing gap must be > 0")
        if self.rate <= 0.0:
            raise ValueError("crossing rate must be > 0")
        if self.slope_factor <= 0.0:
            raise ValueError("slope_factor must be > 0")

    @property
    def gamma(self):
        """Adiabaticity parameter gap^2 / (4 * slope_factor * rate)."""
        return self.gap ** 2 / (4.0 * self.slope_factor * self.rate)


@dataclass(frozen=True)
class TransferMatrix:
    """One unitary factor of an impulse decomposition (descending basis)."""

    entries: np.ndarray
    kind: str                      # "impulse" or "adiabatic"
    crossing: Optional[int] = None  # impulse: which crossing detuning
    span: Optional[tuple] = None    # adiabatic: (t1, t2)
    zetas: Optional[tuple] = None   # adiabatic: ascending dynamical phases


@dataclass(frozen=True)
class CycleDecomposition:
    """Ordered factors of one evolution window, first-applied first.

    timestamps: impulse factors carry their crossing time, adiabatic
    factors the midpoint of their segment (strictly increasing).  phases
    collects the named scalars of the decomposition (Stokes phases and
    adiabaticity parameters per crossing; for the single atom also the
    interference phases of the cycle closed form).
    """

    matrices: tuple
    timestamps: tuple
    phases: dict


@dataclass(frozen=True)
class ValidityCriterion:
    """One inequality lhs > rhs with its margin."""

    name: str
    lhs: float
    rhs: float

    @property
    def satisfied(self):
        return self.lhs > self.rhs

    @property
    def margin(self):
        return self.lhs - self.rhs


@dataclass(frozen=True)
class ValidityReport:
    """Advisory applicability check of the impulse treatment."""

    criteria: tuple
    tau_lz: dict
    durations: dict

    @property
    def verdict(self):
        return all(c.satisfied for c in self.criteria)


def lz_probability(params):
    """Single-passage transition probability exp(-2 pi gamma)."""
    return math.exp(-2.0 * math.pi * params.gamma)


def stokes_phase(params):
    """Stokes phase gamma*(ln gamma - 1) + arg Gamma(1 - i gamma) + pi/4.

    Tends to pi/4 in the sudden limit (gamma -> 0) and decays to zero in
    the adiabatic limit.
    """
    g = params.gamma
    if g == 0.0:
        return QUARTER_PI
    return g * (math.log(g) - 1.0) + float(im_loggamma_one_minus_i(g)) \
        + QUARTER_PI


def _lz_block(P, ps):
    root_p = math.sqrt(P)
    root_q = math.sqrt(1.0 - P)
    return np.array([
        [np.exp(-1j * ps) * root_q, -root_p],
        [root_p, np.exp(1j * ps) * root_q],
    ])


def impulse_matrix(crossing, params, dim=2, transpose=False,
                   zero_stokes=False):
    """Transfer matrix of one crossing passage (descending basis).

    crossing 1 and 3 couple the two lowest levels, crossing 2 the two
    highest; for dim=2 only crossing 1 exists.  transpose selects the
    falling-passage convention; zero_stokes drops the Stokes phase (for
    ablation studies).
    """
    if crossing not in (1, 2, 3):
        raise ValueError("crossing index must be 1, 2 or 3")
    if dim == 2 and crossing != 1:
        raise ValueError("the single atom has only crossing 1")
    P = lz_probability(params)
    ps = 0.0 if zero_stokes else stokes_phase(params)
    block = _lz_block(P, ps)
    if transpose:
        block = block.T
    if dim == 2:
        entries = block
    else:
        entries = np.eye(3, dtype=np.complex128)
        lo = 0 if crossing == 2 else 1  # descending slots (0,1) or (1,2)
        entries[lo:lo + 2, lo:lo + 2] = block
    return TransferMatrix(entries=entries, kind="impulse", crossing=crossing)


# ---------------------------------------------------------------------------
# quadrature for the dynamical phases

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _gl_integral(f, a, b, rel_tol=1e-13):
    """Adaptive composite Gauss-Legendre quadrature of a vector integrand.

    Doubles the panel count until two consecutive estimates agree to
    rel_tol (relative to max(1, |integral|)).
    """
    if b == a:
        probe = np.atleast_2d(f(np.array([a])))
        return np.zeros(probe.shape[-1])
    prev = None
    panels = 1
    while panels <= 4096:
        edges = np.linspace(a, b, panels + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1] - edges[0])
        ts = (mid[:, None] + half * _GL_NODES[None, :]).ravel()
        vals = np.atleast_2d(f(ts))
        vals = vals.reshape(panels, _GL_NODES.size, -1)
        est = half * np.einsum("k,pkm->m", _GL_WEIGHTS, vals)
        if prev is not None:
            scale = max(1.0, float(np.max(np.abs(est))))
            if float(np.max(np.abs(est - prev))) <= rel_tol * scale:
                return est
        prev = est
        panels *= 2
    raise RuntimeError("phase quadrature did not converge")


def _segment_zetas(s, p, t1, t2):
    # ascending vector of integral(E_j dt) over [t1, t2]
    return _gl_integral(lambda ts: level_energies(s, detuning(p, ts)),
                        t1, t2)


def _crossings_strictly_inside(s, p, t1, t2):
    eps = 1e-12 * max(abs(t1), abs(t2), t2 - t1)
    inside = []
    if p.kind == LINEAR:
        if p.v == 0.0:
            return inside
        for index, target in crossing_targets(s):
            tc = target / p.v
            if t1 + eps < tc < t2 - eps:
                inside.append(tc)
    else:
        n_cycles = int(math.ceil((t2 - t1) / p.period)) + 1
        for ev in crossing_times(p, s, cycles=n_cycles, t_start=t1):
            if t1 + eps < ev.time < t2 - eps:
                inside.append(ev.time)
    return inside


def adiabatic_matrix(s, p, t1, t2):
    """Diagonal phase-accumulation matrix over a crossing-free segment.

    Entries are e^{-i zeta_j} with zeta_j the integrated level energies,
    ordered descending to match the module convention; the ascending
    zetas are stored on the returned TransferMatrix.  Raises
    CrossingInsideSegment when a crossing detuning lies strictly inside
    (t1, t2); segments may abut crossings exactly.
    """
    if t2 < t1:
        raise ValueError("segment must have t1 <= t2")
    if t2 == t1:
        return TransferMatrix(
            entries=np.eye(s.dim, dtype=np.complex128), kind="adiabatic",
            span=(t1, t2), zetas=(0.0,) * s.dim)
    inside = _crossings_strictly_inside(s, p, t1, t2)
    if inside:
        raise CrossingInsideSegment(
            "avoided crossing at t=%g lies inside segment (%g, %g)"
            % (inside[0], t1, t2))
    zetas = _segment_zetas(s, p, t1, t2)
    entries = np.diag(np.exp(-1j * zetas[::-1]))
    return TransferMatrix(entries=entries, kind="adiabatic", span=(t1, t2),
                          zetas=tuple(float(z) for z in zetas))


# ---------------------------------------------------------------------------
# schedules and composition

def _crossing_gaps(s):
    if s.arity == TWO_LEVEL:
        return {1: s.Omega}
    rep = gap_report(s)
    return {1: rep.gap_zero, 2: rep.gap_half, 3: rep.gap_full}


def _event_params(s, gaps, event):
    slope = 2.0 if (s.arity == THREE_LEVEL and event.index == 2) else 1.0
    return LZParams(gap=gaps[event.index], rate=abs(event.rate),
                    slope_factor=slope)


def _build_product(s, p, events, t0, t1, zero_stokes, gaps):
    """Factors (first-applied first), timestamps, and their full product."""
    eps = 1e-12 * max(abs(t0), abs(t1), t1 - t0)
    mats = []
    stamps = []
    F = np.eye(s.dim, dtype=np.complex128)
    prev = t0
    for ev in events:
        if ev.time - prev > eps:
            seg = adiabatic_matrix(s, p, prev, ev.time)
            mats.append(seg)
            stamps.append(0.5 * (prev + ev.time))
            F = seg.entries @ F
        imp = impulse_matrix(ev.index, _event_params(s, gaps, ev),
                             dim=s.dim, transpose=ev.rate < 0.0,
                             zero_stokes=zero_stokes)
        mats.append(imp)
        stamps.append(ev.time)
        F = imp.entries @ F
        prev = ev.time
    if t1 - prev > eps:
        seg = adiabatic_matrix(s, p, prev, t1)
        mats.append(seg)
        stamps.append(0.5 * (prev + t1))
        F = seg.entries @ F
    return mats, stamps, F


def _coerce_adiabatic_state(psi0, dim):
    a = np.asarray(psi0, dtype=np.complex128)
    if a.shape != (dim,):
        raise ValueError("adiabatic state must have %d amplitudes" % dim)
    if abs(float(np.vdot(a, a).real) - 1.0) > 1e-9:
        raise ValueError("adiabatic state must be normalised")
    return a


def _phase_dict(s, mats, gaps, events):
    phases = {}
    seen = set()
    for ev in events:
        if ev.index in seen:
            continue
        seen.add(ev.index)
        params = _event_params(s, gaps, ev)
        phases["gamma_crossing_%d" % ev.index] = params.gamma
        phases["stokes_crossing_%d" % ev.index] = stokes_phase(params)
        phases["P_crossing_%d" % ev.index] = lz_probability(params)
    return phases


def compose_linear(s, p, psi0, window=None, zero_stokes=False):
    """Impulse evolution of the atom pair across a linear ramp.

    psi0: ascending adiabatic amplitudes at window.t_i.  Returns
    (final ascending adiabatic amplitudes, CycleDecomposition) for the
    segment-impulse product over the window (default: the propagator's
    standard ramp window).
    """
    if s.arity != THREE_LEVEL:
        raise ValueError("compose_linear treats the atom pair; the single "
                         "atom ramp has a single crossing (plain LZ)")
    if p.kind != LINEAR or p.v == 0.0:
        raise ValueError("compose_linear needs a linear drive with v != 0")
    if window is None:
        from .propagator import default_window
        window = default_window(s, p)
    a = _coerce_adiabatic_state(psi0, s.dim)[::-1]
    events = []
    for index, target in crossing_targets(s):
        tc = target / p.v
        if window.t_i < tc < window.t_f:
            events.append(CrossingEvent(time=tc, index=index,
                                        branch=0 if p.v > 0 else 1,
                                        rate=p.v))
    events.sort(key=lambda ev: ev.time)
    gaps = _crossing_gaps(s)
    mats, stamps, F = _build_product(s, p, events, window.t_i, window.t_f,
                                     zero_stokes, gaps)
    final = (F @ a)[::-1]
    deco = CycleDecomposition(matrices=tuple(mats), timestamps=tuple(stamps),
                              phases=_phase_dict(s, mats, gaps, events))
    return final, deco


def compose_periodic(s, p, psi0, cycles, t_start=0.0, zero_stokes=False):
    """Impulse evolution over k full drive cycles.

    psi0: ascending adiabatic amplitudes at t_start.  The single-cycle
    product is built once and applied k times.  Raises NoCrossing when the
    drive never reaches a crossing detuning (then the evolution is purely
    adiabatic and the impulse picture adds nothing).
    """
    if p.kind != PERIODIC:
        raise ValueError("compose_periodic needs a periodic drive")
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    a = _coerce_adiabatic_state(psi0, s.dim)[::-1]
    events = crossing_times(p, s, cycles=1, t_start=t_start)
    if not events:
        raise NoCrossing("drive amplitude delta=%g never reaches a crossing "
                         "detuning from Delta0=%g" % (p.delta, p.Delta0))
    gaps = _crossing_gaps(s)
    mats, stamps, F = _build_product(s, p, events, t_start,
                                     t_start + p.period, zero_stokes, gaps)
    phases = _phase_dict(s, mats, gaps, events)
    if s.arity == TWO_LEVEL:
        phases.update(_two_level_cycle_phases(s, p, t_start, zero_stokes))
    final = (np.linalg.matrix_power(F, cycles) @ a)[::-1]
    deco = CycleDecomposition(matrices=tuple(mats), timestamps=tuple(stamps),
                              phases=phases)
    return final, deco


def periodic_time_average(s, p, psi0, cycles, t_start=0.0,
                          zero_stokes=False):
    """Impulse-picture time-averaged adiabatic populations over k cycles.

    Within each adiabatic segment the populations are constant, so the
    average is the duration-weighted sum of segment populations,
    accumulated cycle by cycle.  Returns a dict over ascending adiabatic
    channel names (P_minus/P_plus or P_1..P_3).
    """
    if p.kind != PERIODIC:
        raise ValueError("periodic_time_average needs a periodic drive")
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    a = _coerce_adiabatic_state(psi0, s.dim)[::-1]
    events = crossing_times(p, s, cycles=1, t_start=t_start)
    if not events:
        raise NoCrossing("no crossing reachable")
    gaps = _crossing_gaps(s)
    T = p.period
    t_end = t_start + T
    eps = 1e-12 * max(abs(t_start), abs(t_end), T)

    prefixes = [np.eye(s.dim, dtype=np.complex128)]
    durations = [events[0].time - t_start]
    cur = np.eye(s.dim, dtype=np.complex128)
    prev = t_start
    for ev in events:
        if ev.time - prev > eps:
            cur = adiabatic_matrix(s, p, prev, ev.time).entries @ cur
        imp = impulse_matrix(ev.index, _event_params(s, gaps, ev),
                             dim=s.dim, transpose=ev.rate < 0.0,
                             zero_stokes=zero_stokes)
        cur = imp.entries @ cur
        prefixes.append(cur)
        prev = ev.time
    durations.extend(events[i + 1].time - events[i].time
                     for i in range(len(events) - 1))
    durations.append(t_end - events[-1].time)
    if t_end - prev > eps:
        F = adiabatic_matrix(s, p, prev, t_end).entries @ cur
    else:
        F = cur

    weights = np.array(durations) / (cycles * T)
    acc = np.zeros(s.dim)
    for _ in range(cycles):
        for w, M in zip(weights, prefixes):
            acc += w * np.abs(M @ a) ** 2
        a = F @ a
    acc = acc[::-1]
    names = (("P_minus", "P_plus") if s.dim == 2 else ("P_1", "P_2", "P_3"))
    return {name: float(acc[j]) for j, name in enumerate(names)}


# ---------------------------------------------------------------------------
# single-atom cycle closed form

def _two_level_cycle_phases(s, p, t_start, zero_stokes=False):
    events = crossing_times(p, s, cycles=1, t_start=t_start)
    if len(events) != 2:
        raise NoCrossing("the cycle closed form needs |Delta0| < delta")
    tau1, tau2 = events[0].time, events[1].time
    t_end = t_start + p.period
    params = LZParams(gap=s.Omega, rate=abs(events[0].rate))
    P = lz_probability(params)
    ps = 0.0 if zero_stokes else stokes_phase(params)

    def splitting(ts):
        d = detuning(p, ts)
        return np.hypot(d, s.Omega)[:, None]

    I_first = float(_gl_integral(splitting, t_start, tau1)[0])
    I_mid = float(_gl_integral(splitting, tau1, tau2)[0])
    I_last = float(_gl_integral(splitting, tau2, t_end)[0])
    I_full = I_first + I_mid + I_last

    eta0 = 0.5 * I_full + 2.0 * ps
    eta1 = 0.5 * I_full - I_mid
    eta2 = 0.5 * I_full - I_last + 2.0 * ps
    eta3 = I_first - 0.5 * I_full
    g11 = (np.exp(-1j * eta0) * (1.0 - P) + np.exp(-1j * eta1) * P)
    g21 = ((np.exp(-1j * eta3) - np.exp(-1j * eta2)) * np.exp(1j * ps)
           * math.sqrt((1.0 - P) * P))
    re = float(g11.real)
    assert abs(re) <= 1.0 + 1e-9
    alpha = math.acos(min(1.0, max(-1.0, re)))
    return {
        "P_LZ": P, "gamma": params.gamma, "stokes": ps,
        "eta0": eta0, "eta1": eta1, "eta2": eta2, "eta3": eta3,
        "phi_s": 0.5 * I_mid + ps,
        "phi_G": math.pi * p.Delta0 / p.omega,
        "alpha": alpha, "g11": complex(g11), "g21": complex(g21),
    }


def closed_form_two_level(s, p, k, t_start=0.0):
    """Cycle interference closed form for the driven single atom.

    Returns the k-cycle excitation probability for a ground-state start,

        P_+^k = 4 (1-P)P sin^2(phi_s) * sin^2(k alpha) / sin^2(alpha),

    its envelope bound sin^2(k alpha), the long-time average P_bar, and
    every named phase entering them.  cos(alpha) = Re g11 of the
    single-cycle matrix.
    """
    if s.arity != TWO_LEVEL or p.kind != PERIODIC:
        raise ValueError("the cycle closed form is for the periodically "
                         "driven single atom")
    if k < 1:
        raise ValueError("k must be >= 1")
    ph = _two_level_cycle_phases(s, p, t_start)
    P = ph["P_LZ"]
    # sin(k a)/sin(a) = U_{k-1}(cos a); the recurrence sidesteps the acos
    # round-trip, which loses ~k/sin(a) digits near sin(a) = 0 and lands
    # exactly on the k**2 limit of the ratio there.
    c = min(1.0, max(-1.0, float(np.real(ph["g11"]))))
    u_prev, u = 0.0, 1.0
    for _ in range(k - 1):
        u_prev, u = u, 2.0 * c * u - u_prev
    ratio_sq = u ** 2
    base = 4.0 * (1.0 - P) * P * math.sin(ph["phi_s"]) ** 2
    im11 = float(np.imag(ph["g11"]))
    denom = math.sqrt(base ** 2 + im11 ** 2)
    p_bar = 0.5 * base / denom if denom > 0.0 else 0.0
    out = dict(ph)
    out.update({
        "P_plus_k": base * ratio_sq,
        "P_max": (1.0 - c ** 2) * ratio_sq,
        "P_bar": p_bar,
        "k": k,
    })
    return out


# ---------------------------------------------------------------------------
# applicability

def _tau_impulse(gap, rate, gamma):
    # duration of the impulse region; the crossing is pointlike only if
    # this is shorter than the adjacent adiabatic segments
    return (1.0 / math.sqrt(rate)) * max(1.0, gamma)


def validity_report(s, p):
    """Advisory inequalities for the impulse treatment of a protocol.

    Single atom, periodic drive: amplitude and speed must beat the
    coupling (delta - Delta0 > Omega, delta*omega > Omega^2).  Atom pair,
    linear ramp: the rate window from comparing the impulse duration to
    the inter-crossing time (V0^2 > v for fast ramps, v < 16 V0^2/Omega^4
    for slow ones).  Atom pair, periodic: per reachable crossing, the
    impulse duration must fit inside the shorter adjacent segment.
    """
    criteria = []
    tau = {}
    durations = {}
    if s.arity == TWO_LEVEL and p.kind == PERIODIC:
        criteria.append(ValidityCriterion(
            name="amplitude_exceeds_coupling",
            lhs=p.delta - p.Delta0, rhs=s.Omega))
        criteria.append(ValidityCriterion(
            name="sweep_speed_exceeds_coupling",
            lhs=p.delta * p.omega, rhs=s.Omega ** 2))
        if abs(p.Delta0) < p.delta:
            rate = p.omega * math.sqrt(p.delta ** 2 - p.Delta0 ** 2)
            gamma = s.Omega ** 2 / (4.0 * rate)
            tau["crossing_1"] = (math.sqrt(gamma) / s.Omega) * max(1.0, gamma)
            a = math.asin(-p.Delta0 / p.delta)
            durations["T_a"] = (math.pi - 2.0 * a) / p.omega
            durations["T_a_prime"] = (math.pi + 2.0 * a) / p.omega
    elif s.arity == THREE_LEVEL and p.kind == LINEAR and p.v != 0.0:
        v = abs(p.v)
        tau["linear"] = (0.5 / math.sqrt(v)) * max(1.0, s.Omega ** 2 / (2.0 * v))
        if s.V0 > 0.0:
            durations["T_a"] = s.V0 / (2.0 * v)
        if v > 0.5 * s.Omega ** 2:
            criteria.append(ValidityCriterion(
                name="interaction_beats_rate", lhs=s.V0 ** 2, rhs=v))
        else:
            criteria.append(ValidityCriterion(
                name="rate_within_gap_window",
                lhs=16.0 * s.V0 ** 2 / s.Omega ** 4, rhs=v))
    elif s.arity == THREE_LEVEL and p.kind == PERIODIC:
        events = crossing_times(p, s, cycles=1, t_start=0.0)
        if not events:
            criteria.append(ValidityCriterion(
                name="crossing_reachable", lhs=0.0, rhs=1.0))
        else:
            gaps = _crossing_gaps(s)
            T = p.period
            n = len(events)
            for i, ev in enumerate(events):
                after = (events[(i + 1) % n].time - ev.time) % T
                before = (ev.time - events[(i - 1) % n].time) % T
                if n == 1:
                    after = before = T
                bound = min(after, before)
                params = _event_params(s, gaps, ev)
                t_imp = _tau_impulse(params.gap, params.rate, params.gamma)
                key = "crossing_%d_branch_%d" % (ev.index, ev.branch)
                tau[key] = t_imp
                durations[key] = bound
                criteria.append(ValidityCriterion(
                    name="impulse_fits_segment_%s" % key,
                    lhs=bound, rhs=t_imp))
    return ValidityReport(criteria=tuple(criteria), tau_lz=tau,
                          durations=durations)

"""Exact propagation of the driven-atom Schrodinger equation.

Solves i d/dt psi = H(t) psi on the complex amplitudes with the adaptive
Dormand-Prince kernel from `_stepper`, records densely sampled populations
in the diabatic basis, and projects trajectories onto the instantaneous
eigenbasis on request.  No renormalisation is ever applied while stepping:
the norm drift of a run is the unitarity diagnostic and is stored on the
trajectory.

The default sampling window for a linear ramp starts at Delta = -10*Omega
and ends at Delta = 30*Omega + 10*v/Omega, wide enough that every avoided
crossing of either system lies well inside.
"""

import numbers
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _stepper
from .errors import StepFailure
from .hamiltonian import LINEAR, detuning, eigenbasis, eigensystem, \
    hamiltonian_matrix

MAX_STEPS = 50_000_000


@dataclass(frozen=True)
class StateVector:
    """Complex diabatic-basis amplitudes attached to a time."""

    amplitudes: np.ndarray
    t: float

    @property
    def populations(self):
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class SweepWindow:
    """Integration window [t_i, t_f] with a uniform sampling grid."""

    t_i: float
    t_f: float
    samples: int = 2000

    def __post_init__(self):
        if not self.t_f > self.t_i:
            raise ValueError("sampling window requires t_i < t_f")
        if self.samples < 2:
            raise ValueError("sampling window needs at least two samples")

    @property
    def times(self):
        return np.linspace(self.t_i, self.t_f, self.samples)


@dataclass(frozen=True)
class TrajectoryRecord:
    """Densely sampled solution of one propagation run.

    P_diab rows hold |amplitude|^2 in the diabatic basis; P_adiab is None
    until `project_adiabatic` fills it with populations of the ascending
    adiabatic levels.  norm_drift is max_t |sum_i P_i(t) - 1|.
    """

    times: np.ndarray
    P_diab: np.ndarray
    P_adiab: Optional[np.ndarray]
    amplitudes: np.ndarray
    final_state: StateVector
    n_steps: int
    norm_drift: float


def channel_names(dim):
    """(diabatic, adiabatic) population channel names for a system size."""
    if dim == 2:
        return ("P_g", "P_r"), ("P_minus", "P_plus")
    return ("P_gg", "P_s", "P_rr"), ("P_1", "P_2", "P_3")


def initial_state(s, p, label, t):
    """Build a named initial state at time t.

    Diabatic labels: g, r (single atom) or gg, s, rr (pair).  Adiabatic
    labels: adiabatic_minus / adiabatic_plus, or adiabatic_1 .. adiabatic_3,
    referring to the ascending instantaneous levels at detuning Delta(t).
    """
    dim = s.dim
    diab = {"g": 0, "r": 1} if dim == 2 else {"gg": 0, "s": 1, "rr": 2}
    if label in diab:
        amps = np.zeros(dim, np.complex128)
        amps[diab[label]] = 1.0
        return StateVector(amplitudes=amps, t=float(t))
    adiab = ({"adiabatic_minus": 0, "adiabatic_plus": 1} if dim == 2 else
             {"adiabatic_1": 0, "adiabatic_2": 1, "adiabatic_3": 2,
              "adiabatic1": 0, "adiabatic2": 1, "adiabatic3": 2})
    if label in adiab:
        frame = eigensystem(s, detuning(p, t))
        amps = np.asarray(frame.eigvecs[:, adiab[label]], np.complex128)
        return StateVector(amplitudes=amps, t=float(t))
    raise ValueError("unknown initial state %r for a %d-state system"
                     % (label, dim))


def default_window(s, p):
    """Linear-ramp window with Delta from -10*Omega to 30*Omega + 10*v/Omega."""
    if p.kind != LINEAR:
        raise ValueError("the default window is defined for linear ramps")
    if p.v <= 0.0:
        raise ValueError("the default window assumes a positive ramp rate")
    t_i = -10.0 * s.Omega / p.v
    t_f = (30.0 * s.Omega + 10.0 * p.v / s.Omega) / p.v
    return SweepWindow(t_i=t_i, t_f=t_f)


def _coerce_state(psi0, dim, t_i):
    if isinstance(psi0, StateVector):
        amps = np.asarray(psi0.amplitudes, np.complex128)
        if abs(psi0.t - t_i) > 1e-9 * max(1.0, abs(t_i)):
            raise ValueError("initial state is attached to t=%g but the "
                             "window starts at t=%g" % (psi0.t, t_i))
    else:
        amps = np.asarray(psi0, np.complex128)
    if amps.shape != (dim,):
        raise ValueError("initial state must have %d amplitudes" % dim)
    norm = float(np.vdot(amps, amps).real)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError("initial state must be normalised (|norm-1| = %g)"
                         % abs(norm - 1.0))
    return np.ascontiguousarray(amps)


def integrate(s, p, psi0, window=None, tol=1e-10, scheme="dp853"):
    """Propagate psi0 across the window and sample it on the uniform grid.

    tol is applied as both relative and absolute local error target and
    must lie in [1e-12, 1e-6].  scheme selects the embedded pair: "dp853"
    (8th order, default) or "dp45" (5th order, kept as an independent
    scheme for cross-checks).  Raises StepFailure when the adaptive step
    underflows or the step budget is exhausted.
    """
    if window is None:
        window = default_window(s, p)
    if not (isinstance(tol, numbers.Real) and 1e-12 <= tol <= 1e-6):
        raise ValueError("tol must lie in [1e-12, 1e-6]")
    if scheme not in ("dp853", "dp45"):
        raise ValueError("scheme must be 'dp853' or 'dp45'")
    amps0 = _coerce_state(psi0, s.dim, window.t_i)
    times = window.times
    out = np.empty((times.size, s.dim), np.complex128)
    kind = _stepper.KIND_LINEAR if p.kind == LINEAR else _stepper.KIND_PERIODIC
    status, y_end, steps = _stepper.propagate(
        kind, p.v, p.Delta0, p.delta, p.omega, s.Omega, s.V0,
        amps0, float(window.t_i), float(window.t_f), times, out,
        float(tol), float(tol), MAX_STEPS,
        _stepper.SCHEME_DP853 if scheme == "dp853" else _stepper.SCHEME_DP45)
    if status == _stepper.STATUS_UNDERFLOW:
        raise StepFailure("adaptive step size underflow (span %g)"
                          % (window.t_f - window.t_i))
    if status == _stepper.STATUS_MAX_STEPS:
        raise StepFailure("step budget of %d exhausted" % MAX_STEPS)
    P = np.abs(out) ** 2
    drift = float(np.max(np.abs(P.sum(axis=1) - 1.0)))
    return TrajectoryRecord(
        times=times, P_diab=P, P_adiab=None, amplitudes=out,
        final_state=StateVector(amplitudes=y_end, t=float(window.t_f)),
        n_steps=int(steps), norm_drift=drift)


def project_adiabatic(s, p, traj):
    """Return a copy of traj with populations of the ascending levels filled."""
    deltas = detuning(p, traj.times)
    _, vecs = eigenbasis(s, deltas)
    adiab = np.einsum("tij,ti->tj", vecs, traj.amplitudes)
    return replace(traj, P_adiab=np.abs(adiab) ** 2)


def time_average(traj, t0=None, t1=None):
    """Trapezoidal time averages of every population channel in [t0, t1].

    Returns a dict keyed by channel name (P_g, P_r or P_gg, P_s, P_rr, plus
    the adiabatic channels when present).
    """
    times = traj.times
    t0 = float(times[0]) if t0 is None else float(t0)
    t1 = float(times[-1]) if t1 is None else float(t1)
    eps = 1e-9 * (times[-1] - times[0])
    if not (times[0] - eps <= t0 < t1 <= times[-1] + eps):
        raise ValueError("averaging window [%g, %g] outside trajectory"
                         % (t0, t1))
    mask = (times >= t0 - eps) & (times <= t1 + eps)
    tt = times[mask]
    if tt.size < 2:
        raise ValueError("averaging window covers fewer than two samples")
    span = tt[-1] - tt[0]
    dim = traj.P_diab.shape[1]
    diab_names, adiab_names = channel_names(dim)
    averages = {}
    for j, name in enumerate(diab_names):
        averages[name] = float(np.trapezoid(traj.P_diab[mask, j], tt) / span)
    if traj.P_adiab is not None:
        for j, name in enumerate(adiab_names):
            averages[name] = float(np.trapezoid(traj.P_adiab[mask, j], tt) / span)
    return averages


def integrate_reference(s, p, psi0, window=None, tol=1e-10):
    """Same run on an independent scheme (scipy DOP853) for cross-checks."""
    from scipy.integrate import solve_ivp

    if window is None:
        window = default_window(s, p)
    amps0 = _coerce_state(psi0, s.dim, window.t_i)

    def rhs(t, y):
        return -1j * (hamiltonian_matrix(s, detuning(p, t)) @ y)

    times = window.times
    sol = solve_ivp(rhs, (window.t_i, window.t_f), amps0, method="DOP853",
                    rtol=tol, atol=tol, t_eval=times)
    if not sol.success:
        raise StepFailure("reference integrator failed: %s" % sol.message)
    amps = np.ascontiguousarray(sol.y.T)
    P = np.abs(amps) ** 2
    return TrajectoryRecord(
        times=times, P_diab=P, P_adiab=None, amplitudes=amps,
        final_state=StateVector(amplitudes=amps[-1], t=float(window.t_f)),
        n_steps=-1, norm_drift=float(np.max(np.abs(P.sum(axis=1) - 1.0))))

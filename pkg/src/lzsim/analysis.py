"""Derived quantities on top of the exact and impulse engines.

Closed-form final populations for the weakly interacting pair, resonance
bookkeeping for the periodically driven pair, beat extraction from dense
trajectories, the multi-slit interference reference curve, and a threaded
parameter-sweep driver that runs either engine (or both) over 1-2 axis
grids.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import find_peaks, hilbert, peak_widths, savgol_filter

from .aia import compose_linear, periodic_time_average
from .errors import InsufficientResolution, NoBeat
from .hamiltonian import (LINEAR, PERIODIC, DriveProtocol, SystemSpec,
                          detuning, eigensystem)
from .propagator import (SweepWindow, channel_names, default_window,
                         initial_state, integrate, project_adiabatic,
                         time_average)

DIABATIC_STATES = ("gg", "s", "rr")
AXIS_NAMES = ("v", "V0", "omega", "delta", "Delta0")
ENGINES = ("exact", "aia", "both")

#: resonance families of the driven pair: a drive harmonic matching the
#: accumulated detuning between two diabatic states makes that pair flop.
RESONANCE_FAMILIES = (
    ("n*omega = |Delta0|", ("gg", "s")),
    ("n*omega = |Delta0 - V0|", ("s", "rr")),
    ("n*omega = |2*Delta0 - V0|", ("gg", "rr")),
)


def _single_atom_jump(v, Omega):
    if v <= 0.0:
        raise ValueError("sweep rate must be positive")
    return math.exp(-math.pi * Omega ** 2 / (2.0 * v))


def noninteracting_final(v, Omega, initial):
    """Final diabatic populations of two independent swept atoms.

    Each atom keeps its diabatic state with the single-crossing jump
    probability p; the pair populations follow from the product rule.
    Returns (P_gg, P_s, P_rr).
    """
    p = _single_atom_jump(v, Omega)
    if initial == "gg":
        return (p ** 2, 2.0 * p * (1.0 - p), (1.0 - p) ** 2)
    if initial == "s":
        return (2.0 * p * (1.0 - p), 1.0 - 4.0 * p * (1.0 - p),
                2.0 * p * (1.0 - p))
    if initial == "rr":
        return ((1.0 - p) ** 2, 2.0 * p * (1.0 - p), p ** 2)
    raise ValueError("initial state must be one of %s" % (DIABATIC_STATES,))


def pair_jump_probabilities(v, Omega, V0):
    """(p, q, r): bare jump probability and its two interaction-damped
    variants governing transfer through the shifted second crossing."""
    p = _single_atom_jump(v, Omega)
    q = p * math.exp(-math.pi * Omega ** 2 * V0 / (4.0 * v ** 1.5))
    r = p * math.exp(-math.pi * Omega ** 2 * V0 / (2.0 ** 2.5 * v ** 1.5))
    return p, q, r


def interacting_correction_final(v, Omega, V0, initial):
    """Small-interaction closed forms for the final pair populations.

    Valid while V0/sqrt(v) is small (advisory, not enforced).  One channel
    per initial state is fixed by the remainder so the triple sums to one.
    Returns (P_gg, P_s, P_rr).
    """
    if V0 < 0.0:
        raise ValueError("interaction shift must be >= 0")
    p, q, r = pair_jump_probabilities(v, Omega, V0)
    if initial == "gg":
        p_gg = p ** 2
        p_s = 1.0 - p ** 2 - (1.0 - q) ** 2
        return (p_gg, p_s, 1.0 - p_gg - p_s)
    if initial == "s":
        p_gg = 1.0 - p ** 2 - (1.0 - q) ** 2
        p_rr = 1.0 - p ** 2 - (1.0 - r) ** 2
        return (p_gg, 1.0 - p_gg - p_rr, p_rr)
    if initial == "rr":
        p_gg = (1.0 - r) ** 2
        p_s = 1.0 - p ** 2 - (1.0 - r) ** 2
        return (p_gg, p_s, 1.0 - p_gg - p_s)
    raise ValueError("initial state must be one of %s" % (DIABATIC_STATES,))


# ---------------------------------------------------------------------------
# resonance bookkeeping

@dataclass(frozen=True)
class ResonanceLine:
    """One drive harmonic n whose frequency matches a diabatic pair."""

    condition: str
    n: int
    omega_value: float
    transition: tuple

    def __post_init__(self):
        if self.omega_value <= 0.0:
            raise ValueError("resonance frequency must be positive")


@dataclass(frozen=True)
class ResonanceCatalog:
    """All harmonics of the three pair-matching conditions in a window,
    sorted by frequency, highest first."""

    families: tuple

    def __post_init__(self):
        omegas = [line.omega_value for line in self.families]
        if any(b > a + 1e-12 for a, b in zip(omegas, omegas[1:])):
            raise ValueError("catalog must be sorted by descending frequency")

    def omegas(self, transition=None):
        return tuple(line.omega_value for line in self.families
                     if transition is None or line.transition == transition)


def resonance_catalog(Delta0, V0, omega_range):
    """Enumerate drive frequencies resonant with any diabatic pair.

    A pair separated by an accumulated detuning D flops when n*omega = |D|
    for an integer n >= 1; the three pair separations are |Delta0|,
    |Delta0 - V0| and |2*Delta0 - V0|.  Returns every (family, n) whose
    frequency falls inside omega_range = (low, high).
    """
    lo, hi = float(omega_range[0]), float(omega_range[1])
    if not (0.0 < lo < hi):
        raise ValueError("omega_range must satisfy 0 < low < high")
    separations = (abs(Delta0), abs(Delta0 - V0), abs(2.0 * Delta0 - V0))
    eps = 1e-9 * hi
    lines = []
    for (condition, transition), sep in zip(RESONANCE_FAMILIES, separations):
        if sep <= 0.0:
            continue
        n_min = max(1, math.ceil(sep / hi - 1e-12))
        n_max = math.floor(sep / lo + 1e-12)
        for n in range(n_min, n_max + 1):
            omega = sep / n
            if lo - eps <= omega <= hi + eps:
                lines.append(ResonanceLine(condition, n, omega, transition))
    lines.sort(key=lambda line: -line.omega_value)
    return ResonanceCatalog(families=tuple(lines))


@dataclass(frozen=True)
class SpectralFeature:
    """A located extremum of a 1-D sweep channel."""

    location: float
    kind: str          # "dip" or "peak"
    prominence: float
    width: float


def detect_resonances(sweep, channel, prominence=0.02, match_tol=None):
    """Locate dips and peaks of one channel of a 1-D sweep.

    The channel is smoothed with a short quadratic Savitzky-Golay window
    before extremum search; each extremum is refined by a parabola through
    its three central samples.  Widths are at half prominence, in axis
    units.  Raises InsufficientResolution when the grid step is larger
    than the requested match_tol.
    """
    if len(sweep.axes) != 1:
        raise ValueError("resonance detection needs a 1-D sweep")
    axis = sweep.axes[0]
    x = np.asarray(axis.values, float)
    if x.size < 50:
        raise ValueError("resonance detection needs at least 50 grid points")
    step = float(np.mean(np.diff(x)))
    if match_tol is not None and step > match_tol:
        raise InsufficientResolution(
            "grid step %.4g exceeds the requested matching tolerance %.4g"
            % (step, match_tol))
    if sweep.outputs is None or channel not in sweep.outputs:
        raise ValueError("sweep has no channel %r" % (channel,))
    y = np.asarray(sweep.outputs[channel], float)
    if not np.all(np.isfinite(y)):
        raise ValueError("channel %r has failed points; re-run the sweep"
                         % (channel,))
    smooth = savgol_filter(y, 5, 2)
    hits = []
    for sign, kind in ((-1.0, "dip"), (1.0, "peak")):
        folded = sign * smooth
        idx, props = find_peaks(folded, prominence=prominence)
        if idx.size == 0:
            continue
        widths = peak_widths(folded, idx, rel_height=0.5)[0] * step
        for i, prom, width in zip(idx, props["prominences"], widths):
            denom = folded[i - 1] - 2.0 * folded[i] + folded[i + 1]
            shift = 0.0
            if denom < 0.0:
                shift = 0.5 * (folded[i - 1] - folded[i + 1]) / denom
                shift = min(1.0, max(-1.0, shift))
            hits.append(SpectralFeature(location=float(x[i] + shift * step),
                                        kind=kind, prominence=float(prom),
                                        width=float(width)))
    hits.sort(key=lambda h: h.location)
    return hits


# ---------------------------------------------------------------------------
# beats

@dataclass(frozen=True)
class BeatReport:
    """Envelope frequency and carrier chirp of an amplitude-modulated
    population channel."""

    envelope_frequency: float
    carrier_frequency_trend: float
    present: bool

    def __post_init__(self):
        if self.present and not self.envelope_frequency > 0.0:
            raise ValueError("a detected beat needs a positive envelope "
                             "frequency")


def _channel_series(traj, channel):
    dim = traj.amplitudes.shape[1]
    diab, adiab = channel_names(dim)
    if channel in diab:
        return traj.P_diab[:, diab.index(channel)]
    if traj.P_adiab is not None and channel in adiab:
        return traj.P_adiab[:, adiab.index(channel)]
    raise ValueError("trajectory has no channel %r" % (channel,))


def beat_analysis(traj, channel="P_s", tail=0.75):
    """Measure the beat envelope and carrier chirp of one channel.

    Works on the trailing `tail` fraction of the trajectory (the windows
    of interest put all avoided crossings near the start).  The carrier is
    isolated by subtracting a quadratic Savitzky-Golay baseline, the
    envelope is the analytic-signal magnitude, its frequency is read off
    the mean spacing of envelope minima (pi/spacing: the underlying
    modulation is a rectified cosine, so minima come twice per period),
    and the chirp is a linear fit to the instantaneous carrier frequency
    away from envelope nulls.  Expects dense sampling: at least ~20 points
    per carrier period near the end of the window.

    Raises NoBeat when the envelope modulation depth is below 10%.
    """
    y_full = _channel_series(traj, channel)
    n0 = max(0, int(round((1.0 - tail) * traj.times.size)))
    times = traj.times[n0:]
    y = np.asarray(y_full[n0:], float)
    if y.size < 64:
        raise ValueError("too few samples for beat analysis")
    # uniform resampling (sample grids are uniform in practice; cheap no-op)
    t = np.linspace(times[0], times[-1], y.size)
    y = np.interp(t, times, y)
    dt = t[1] - t[0]

    base_win = min(y.size // 4 * 2 - 1, max(5, int(y.size // 10) | 1))
    baseline = savgol_filter(y, base_win, 2)
    z = y - baseline
    if float(np.max(np.abs(z))) < 1e-9:
        raise NoBeat("channel %r carries no oscillation" % (channel,))
    analytic = hilbert(z)
    env = np.abs(analytic)
    env_smooth = savgol_filter(env, max(5, int(y.size // 50) | 1), 2)
    # the beat amplitude itself decays across the window; divide out its
    # slow trend so every envelope minimum registers equally
    trend = savgol_filter(env_smooth, int(y.size // 3) | 1, 2)
    norm = env_smooth / np.maximum(trend, 1e-12 * np.max(env_smooth) + 1e-300)
    emax = float(np.max(norm))
    emin = float(np.min(norm))
    depth = (emax - emin) / (emax + emin + 1e-300)
    if depth < 0.10:
        raise NoBeat("envelope modulation depth %.3f is below 10%%" % depth)

    prom = 0.2 * (emax - emin)
    minima, _ = find_peaks(-norm, prominence=prom)
    if minima.size < 2:
        raise NoBeat("fewer than two envelope minima in the window")
    t_min = []
    for i in minima:
        denom = norm[i - 1] - 2.0 * norm[i] + norm[i + 1]
        shift = 0.0
        if denom > 0.0:
            shift = 0.5 * (norm[i - 1] - norm[i + 1]) / denom
            shift = min(1.0, max(-1.0, shift))
        t_min.append(t[i] + shift * dt)
    spacing = float(np.mean(np.diff(t_min)))
    envelope_frequency = math.pi / spacing

    phase = np.unwrap(np.angle(analytic))
    inst = np.gradient(phase, dt)
    mask = norm > 0.35 * emax
    mask[:3] = mask[-3:] = False
    if int(np.count_nonzero(mask)) < 16:
        raise NoBeat("not enough clean carrier samples for a chirp fit")
    slope = float(np.polyfit(t[mask], inst[mask], 1)[0])
    return BeatReport(envelope_frequency=envelope_frequency,
                      carrier_frequency_trend=slope, present=True)


def multislit_reference(k, phi_grid):
    """Intensity of k narrow equal slits vs phase difference phi.

    Returns sin^2(k phi/2)/sin^2(phi/2) in units of the single-slit
    intensity, evaluated through the Chebyshev recurrence so the removable
    singularities at phi = 2 n pi take their limit value k^2 exactly.
    """
    if k < 2:
        raise ValueError("a multi-slit pattern needs k >= 2")
    c = np.cos(0.5 * np.asarray(phi_grid, float))
    u_prev = np.zeros_like(c)
    u = np.ones_like(c)
    for _ in range(k - 1):
        u_prev, u = u, 2.0 * c * u - u_prev
    return u ** 2


# ---------------------------------------------------------------------------
# parameter sweeps

@dataclass(frozen=True)
class SweepAxis:
    """One named, ordered parameter axis of a sweep."""

    name: str
    values: tuple

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ValueError("axis name must be one of %s" % (AXIS_NAMES,))
        vals = np.asarray(self.values, float)
        if vals.size == 0 or not np.all(np.isfinite(vals)):
            raise ValueError("axis %r needs finite values" % (self.name,))
        object.__setattr__(self, "values", tuple(float(v) for v in vals))

    @classmethod
    def linspace(cls, name, start, stop, points):
        return cls(name=name, values=tuple(np.linspace(start, stop, points)))


@dataclass(frozen=True)
class SweepGrid:
    """A rectangular 1-D or 2-D parameter scan and (once run) its outputs.

    quantity "final" integrates a linear ramp over `window` (or the
    default ramp window / the symmetric one, per window_policy) and
    records final populations; "average" propagates `cycles` periods of a
    periodic drive and records time-averaged populations.  outputs maps
    "<engine>:<channel>" to an array shaped like the grid; points whose
    engine raised are True in `failed` and NaN in every channel.
    """

    system: SystemSpec
    drive: DriveProtocol
    axes: tuple
    initial_label: str
    quantity: str
    window: SweepWindow = None
    window_policy: str = "default"
    cycles: int = 100
    samples_per_cycle: int = 40
    t_start: float = 0.0
    tol: float = 1e-10
    outputs: dict = None
    failed: np.ndarray = None
    notes: tuple = ()
    engines: tuple = ()

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("a sweep takes one or two axes")
        names = [axis.name for axis in self.axes]
        if len(set(names)) != len(names):
            raise ValueError("axis names must be distinct")
        if self.quantity not in ("final", "average"):
            raise ValueError("quantity must be 'final' or 'average'")
        want = LINEAR if self.quantity == "final" else PERIODIC
        if self.drive.kind != want:
            raise ValueError("quantity %r needs a %s drive"
                             % (self.quantity, want))
        if self.window_policy not in ("default", "symmetric"):
            raise ValueError("window_policy must be 'default' or 'symmetric'")
        if self.quantity == "average" and self.cycles < 1:
            raise ValueError("averaging needs at least one cycle")

    @property
    def shape(self):
        return tuple(len(axis.values) for axis in self.axes)

    def point(self, flat_index):
        """(SystemSpec, DriveProtocol) at one flat grid index."""
        idx = np.unravel_index(flat_index, self.shape)
        s, p = self.system, self.drive
        for axis, i in zip(self.axes, idx):
            value = axis.values[i]
            if axis.name == "V0":
                s = replace(s, V0=value)
            else:
                p = replace(p, **{axis.name: value})
        return s, p


def symmetric_window(s, p):
    """Ramp window symmetric about the crossing pattern's midpoint.

    The detuning runs from -D to V0 + D with D = 10*Omega + 10*v/Omega,
    so reflecting Delta about V0/2 maps the window onto itself (for a
    single atom V0 = 0 and the window is plain +-D).  Population patterns
    that are exactly mirror-symmetric in the idealized infinite sweep stay
    mirror-symmetric here; the default window does not have this property.
    """
    if p.kind != LINEAR or p.v <= 0.0:
        raise ValueError("the symmetric window needs a positive linear ramp")
    D = 10.0 * s.Omega + 10.0 * p.v / s.Omega
    return SweepWindow(t_i=-D / p.v, t_f=(s.V0 + D) / p.v, samples=2)


def _ramp_window(grid, s, p):
    if grid.window is not None:
        return grid.window
    if grid.window_policy == "symmetric":
        return symmetric_window(s, p)
    w = default_window(s, p)
    return SweepWindow(w.t_i, w.t_f, samples=2)


def _adiabatic_start(s, p, label, t):
    """Ascending adiabatic amplitudes for a named start at time t."""
    state = initial_state(s, p, label, t)
    frame = eigensystem(s, detuning(p, t))
    return frame.eigvecs.T.conj() @ state.amplitudes


def _exact_point(grid, s, p, label):
    diab, adiab = channel_names(s.dim)
    if grid.quantity == "final":
        w = _ramp_window(grid, s, p)
        traj = integrate(s, p, initial_state(s, p, label, w.t_i),
                         window=w, tol=grid.tol)
        traj = project_adiabatic(s, p, traj)
        values = list(traj.P_diab[-1]) + list(traj.P_adiab[-1])
    else:
        horizon = grid.cycles * p.period
        w = SweepWindow(grid.t_start, grid.t_start + horizon,
                        samples=grid.cycles * grid.samples_per_cycle)
        traj = integrate(s, p, initial_state(s, p, label, w.t_i),
                         window=w, tol=grid.tol)
        traj = project_adiabatic(s, p, traj)
        avg = time_average(traj)
        values = [avg[name] for name in diab + adiab]
    return {"exact:%s" % name: float(v)
            for name, v in zip(diab + adiab, values)}


def _aia_point(grid, s, p, label):
    diab, adiab = channel_names(s.dim)
    if grid.quantity == "final":
        w = _ramp_window(grid, s, p)
        a0 = _adiabatic_start(s, p, label, w.t_i)
        final, _ = compose_linear(s, p, a0, window=w)
        out = {"aia:%s" % name: float(v)
               for name, v in zip(adiab, np.abs(final) ** 2)}
        frame = eigensystem(s, detuning(p, w.t_f))
        psi = frame.eigvecs @ final
        out.update({"aia:%s" % name: float(v)
                    for name, v in zip(diab, np.abs(psi) ** 2)})
        return out
    a0 = _adiabatic_start(s, p, label, grid.t_start)
    avg = periodic_time_average(s, p, a0, cycles=grid.cycles,
                                t_start=grid.t_start)
    return {"aia:%s" % name: float(avg[name]) for name in adiab}


def _sweep_threads(threads):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("LZ_SIM_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return min(32, os.cpu_count() or 1)


def run_sweep(grid, engine, initial_label=None, threads=None):
    """Evaluate every grid point with the requested engine(s).

    engine "both" adds per-channel |exact - aia| differences ("diff:*")
    and their per-point maximum ("dP_max").  Per-point failures are
    recorded in `failed` (with messages in `notes`) and the sweep
    continues.  Points run concurrently on a thread pool sized by
    `threads`, the LZ_SIM_THREADS environment variable, or the CPU count.
    """
    if engine not in ENGINES:
        raise ValueError("engine must be one of %s" % (ENGINES,))
    label = initial_label or grid.initial_label
    n_points = int(np.prod(grid.shape))

    def worker(flat):
        s, p = grid.point(flat)
        out = {}
        if engine in ("exact", "both"):
            out.update(_exact_point(grid, s, p, label))
        if engine in ("aia", "both"):
            out.update(_aia_point(grid, s, p, label))
        if engine == "both":
            diffs = []
            for key in [k for k in out if k.startswith("exact:")]:
                name = key.split(":", 1)[1]
                twin = "aia:%s" % name
                if twin in out:
                    d = abs(out[key] - out[twin])
                    out["diff:%s" % name] = d
                    diffs.append(d)
            out["dP_max"] = max(diffs)
        return out

    results = [None] * n_points
    errors = [None] * n_points
    n_threads = _sweep_threads(threads)
    if n_threads == 1:
        for flat in range(n_points):
            try:
                results[flat] = worker(flat)
            except Exception as exc:   # noqa: BLE001 - recorded per point
                errors[flat] = "%s: %s" % (type(exc).__name__, exc)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            futures = {flat: pool.submit(worker, flat)
                       for flat in range(n_points)}
            for flat, fut in futures.items():
                try:
                    results[flat] = fut.result()
                except Exception as exc:   # noqa: BLE001
                    errors[flat] = "%s: %s" % (type(exc).__name__, exc)

    keys = []
    for res in results:
        if res is not None:
            keys = list(res)
            break
    if not keys:
        raise RuntimeError("every grid point failed; first error: %s"
                           % next(e for e in errors if e))
    outputs = {key: np.full(grid.shape, np.nan) for key in keys}
    failed = np.zeros(grid.shape, bool)
    notes = []
    for flat in range(n_points):
        idx = np.unravel_index(flat, grid.shape)
        if results[flat] is None:
            failed[idx] = True
            notes.append((flat, errors[flat]))
            continue
        for key in keys:
            outputs[key][idx] = results[flat][key]
    return replace(grid, outputs=outputs, failed=failed, notes=tuple(notes),
                   engines=(engine,), initial_label=label)

"""Drive schedules, Hamiltonians and instantaneous spectra for driven atoms.

Two physical systems are covered, written in their diabatic bases:

  single atom   {|g>, |r>}            H = [[0, O/2], [O/2, -Delta]]
  atom pair     {|gg>, |s>, |rr>}     with |s> = (|gr> + |rg>)/sqrt(2);
                the doubly excited state carries the interaction shift V0.

Conventions: hbar = 1, the Rabi coupling Omega is the energy unit and
1/Omega the time unit.  The detuning is either a linear ramp
Delta(t) = v*t or a biased sinusoid Delta(t) = Delta0 + delta*sin(omega*t).

Energies are always reported in ascending order.  Eigenvectors are the
columns of `EigenFrame.eigvecs`, each normalised with its largest-magnitude
component real and positive.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrum

LINEAR = "linear"
PERIODIC = "periodic"
TWO_LEVEL = "two_level"
THREE_LEVEL = "three_level"

DEGENERACY_TOL = 1e-12  # in units of Omega, see assert_nondegenerate


@dataclass(frozen=True)
class DriveProtocol:
    """Time dependence of the detuning.

    kind is LINEAR (Delta = v*t, only `v` meaningful) or PERIODIC
    (Delta = Delta0 + delta*sin(omega*t), only the other three meaningful).
    A LINEAR drive with v = 0 is the constant-detuning special case
    Delta = 0 (plain Rabi flopping); crossing enumeration and impulse
    products require v != 0.
    """

    kind: str
    v: float = 0.0
    Delta0: float = 0.0
    delta: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if self.kind not in (LINEAR, PERIODIC):
            raise ValueError("unknown drive kind %r" % (self.kind,))
        if self.kind == PERIODIC:
            if self.delta < 0.0:
                raise ValueError("drive amplitude delta must be >= 0")
            if self.omega <= 0.0:
                raise ValueError("drive frequency omega must be > 0")

    @classmethod
    def linear(cls, v):
        """Linear ramp Delta(t) = v*t."""
        return cls(kind=LINEAR, v=float(v))

    @classmethod
    def periodic(cls, Delta0, delta, omega):
        """Sinusoidal drive Delta(t) = Delta0 + delta*sin(omega*t)."""
        return cls(kind=PERIODIC, Delta0=float(Delta0), delta=float(delta),
                   omega=float(omega))

    @property
    def period(self):
        if self.kind != PERIODIC:
            raise ValueError("period is defined for periodic drives only")
        return 2.0 * math.pi / self.omega


@dataclass(frozen=True)
class SystemSpec:
    """Which atom system is simulated and its couplings.

    Omega = 0 (uncoupled levels, populations frozen) is accepted for
    propagation limit checks, but instantaneous spectra require Omega > 0.
    """

    arity: str
    Omega: float
    V0: float = 0.0

    def __post_init__(self):
        if self.arity not in (TWO_LEVEL, THREE_LEVEL):
            raise ValueError("unknown system arity %r" % (self.arity,))
        if self.Omega < 0.0:
            raise ValueError("Rabi frequency Omega must be >= 0")
        if self.V0 < 0.0:
            raise ValueError("interaction strength V0 must be >= 0")
        if self.arity == TWO_LEVEL and self.V0 != 0.0:
            raise ValueError("V0 is meaningful only for the atom pair")

    @classmethod
    def two_level(cls, Omega):
        return cls(arity=TWO_LEVEL, Omega=float(Omega))

    @classmethod
    def three_level(cls, Omega, V0):
        return cls(arity=THREE_LEVEL, Omega=float(Omega), V0=float(V0))

    @property
    def dim(self):
        return 2 if self.arity == TWO_LEVEL else 3


@dataclass(frozen=True)
class EigenFrame:
    """Instantaneous spectrum at a single detuning value.

    energies: ascending eigenvalues, shape (dim,).
    eigvecs:  orthonormal matrix whose columns are the adiabatic states in
              the diabatic basis; largest-magnitude entry of each column is
              real and positive.
    """

    detuning: float
    energies: np.ndarray
    eigvecs: np.ndarray


@dataclass(frozen=True)
class GapReport:
    """Adjacent-level gaps of the atom pair at its three avoided crossings.

    gap_zero and gap_full are the lower gaps at Delta = 0 and Delta = V0
    (they coincide exactly); gap_half is the upper gap at Delta = V0/2,
    which closes like 1/V0 at strong interaction.
    """

    gap_zero: float
    gap_half: float
    gap_full: float
    crossing_detunings: tuple


@dataclass(frozen=True)
class CrossingEvent:
    """One passage of the drive through an avoided-crossing detuning.

    index labels which crossing (1: Delta=0, 2: Delta=V0/2, 3: Delta=V0),
    branch is the integer m of the sine branch (even m rising through the
    target when rate > 0), rate is the signed slope dDelta/dt there.
    """

    time: float
    index: int
    branch: int
    rate: float


def detuning(p, t):
    """Detuning Delta(t); t may be a scalar or an array."""
    if p.kind == LINEAR:
        return p.v * t
    return p.Delta0 + p.delta * np.sin(p.omega * t)


def detuning_rate(p, t):
    """Slope dDelta/dt with the same broadcasting as `detuning`."""
    if p.kind == LINEAR:
        if np.ndim(t) == 0:
            return p.v
        return np.full(np.shape(t), p.v)
    return p.delta * p.omega * np.cos(p.omega * t)


def hamiltonian_matrix(s, Delta):
    """Diabatic-basis Hamiltonian at detuning Delta (real symmetric)."""
    if s.arity == TWO_LEVEL:
        half = 0.5 * s.Omega
        return np.array([[0.0, half], [half, -Delta]])
    c = s.Omega / math.sqrt(2.0)
    return np.array([
        [0.0, c, 0.0],
        [c, -Delta, c],
        [0.0, c, s.V0 - 2.0 * Delta],
    ])


def assert_nondegenerate(energies, Omega):
    """Raise DegenerateSpectrum when adjacent sorted levels sit closer than
    DEGENERACY_TOL*Omega (below that an eigenvector basis cannot be chosen
    reliably in double precision)."""
    e = np.asarray(energies, dtype=float)
    gaps = np.diff(e, axis=-1)
    if np.any(gaps < DEGENERACY_TOL * Omega):
        raise DegenerateSpectrum(
            "adjacent energy levels coincide within %g*Omega" % DEGENERACY_TOL)


def _require_coupling(s):
    if s.Omega <= 0.0:
        raise ValueError("instantaneous spectra require Omega > 0")


def _fix_phases(vecs):
    # flip column signs so the largest-magnitude entry is positive
    idx = np.argmax(np.abs(vecs), axis=-2)
    picked = np.take_along_axis(vecs, idx[..., None, :], axis=-2)[..., 0, :]
    signs = np.where(picked < 0.0, -1.0, 1.0)
    return vecs * signs[..., None, :]


def _two_level_arrays(s, deltas):
    _require_coupling(s)
    d = np.asarray(deltas, dtype=float)
    W = np.hypot(d, s.Omega)
    bp = (W + d) / s.Omega
    bm = (W - d) / s.Omega
    energies = np.stack([-0.5 * s.Omega * bp, 0.5 * s.Omega * bm], axis=-1)
    amp = np.sqrt(s.Omega / (2.0 * W))
    sp = np.sqrt(bp)
    sm = np.sqrt(bm)
    vecs = np.empty(np.shape(d) + (2, 2))
    vecs[..., 0, 0] = -amp * sm
    vecs[..., 1, 0] = amp * sp
    vecs[..., 0, 1] = amp * sp
    vecs[..., 1, 1] = amp * sm
    return energies, _fix_phases(vecs)


def _three_level_energies(s, deltas):
    # trigonometric solution of the characteristic cubic; the three roots
    # are real for every (Omega, V0, Delta) since the matrix is symmetric
    d = np.asarray(deltas, dtype=float)
    V0, Om = s.V0, s.Omega
    D0 = V0 * V0 - 3.0 * V0 * d + 3.0 * d * d + 3.0 * Om * Om
    D1 = 2.0 * V0**3 - 9.0 * V0**2 * d + 9.0 * V0 * d * d - 4.5 * V0 * Om * Om
    phi = np.arccos(np.clip(D1 / (2.0 * D0**1.5), -1.0, 1.0))
    base = (V0 - 3.0 * d) / 3.0
    r = (2.0 / 3.0) * np.sqrt(D0)
    third = phi / 3.0
    lo = base + r * np.cos(third + 2.0 * np.pi / 3.0)
    mid = base + r * np.cos(third + 4.0 * np.pi / 3.0)
    hi = base + r * np.cos(third)
    return np.stack([lo, mid, hi], axis=-1)


def _null_vector_3x3(A):
    # unit kernel vector of a (near-)singular 3x3 matrix via row cross
    # products; the analytic component formula divides by the eigenvalue
    # and is unusable when it vanishes
    best = None
    best_norm = 0.0
    for i, k in ((0, 1), (0, 2), (1, 2)):
        c = np.cross(A[i], A[k])
        n = float(np.linalg.norm(c))
        if n > best_norm:
            best, best_norm = c, n
    if best is None or best_norm == 0.0:
        raise DegenerateSpectrum(
            "eigenvector direction undetermined: two-dimensional kernel")
    return best / best_norm


def _three_level_arrays(s, deltas):
    _require_coupling(s)
    d = np.asarray(deltas, dtype=float)
    energies = _three_level_energies(s, d)
    assert_nondegenerate(energies, s.Omega)
    V0, Om = s.V0, s.Omega
    g = (V0 - 2.0 * d)[..., None] - energies
    small = np.abs(energies) < 1e-10 * Om
    E_safe = np.where(small, 1.0, energies)
    x1 = -g / E_safe
    x2 = -math.sqrt(2.0) * g / Om
    x3 = np.ones_like(energies)
    vecs = np.stack([x1, x2, x3], axis=-2)
    vecs = vecs / np.linalg.norm(vecs, axis=-2, keepdims=True)
    if np.any(small):
        # eigenvalue passes through zero (Delta = V0/2): rebuild those
        # columns from the kernel of H - E
        for at in np.argwhere(small):
            *point, j = at
            point = tuple(point)
            dd = float(d[point]) if point else float(d)
            A = hamiltonian_matrix(s, dd)
            A = A - energies[point + (j,)] * np.eye(3)
            vecs[point + (slice(None), j)] = _null_vector_3x3(A)
    return energies, _fix_phases(vecs)


def level_energies(s, deltas):
    """Ascending instantaneous energies only (no eigenvectors computed).

    Fast path for phase integrals: the single atom reduces to
    E_-/+ = -(W +/- ... ) with W = sqrt(Delta^2 + Omega^2), namely
    E_- = -(W + Delta)/2 and E_+ = (W - Delta)/2.
    """
    if s.arity == TWO_LEVEL:
        _require_coupling(s)
        d = np.asarray(deltas, dtype=float)
        W = np.hypot(d, s.Omega)
        return np.stack([-0.5 * (W + d), 0.5 * (W - d)], axis=-1)
    _require_coupling(s)
    return _three_level_energies(s, deltas)


def eigenbasis(s, deltas):
    """Vectorised instantaneous eigensystem.

    Returns (energies, eigvecs) with shapes (..., dim) and (..., dim, dim)
    for an array of detunings; energies ascend along the last axis and
    eigvecs columns follow the same ordering and phase convention as
    EigenFrame.
    """
    if s.arity == TWO_LEVEL:
        return _two_level_arrays(s, deltas)
    return _three_level_arrays(s, deltas)


def eigensystem_two_level(s, Delta):
    """Analytic spectrum of the single atom at one detuning."""
    if s.arity != TWO_LEVEL:
        raise ValueError("eigensystem_two_level needs a two-level SystemSpec")
    energies, vecs = _two_level_arrays(s, float(Delta))
    return EigenFrame(detuning=float(Delta), energies=energies, eigvecs=vecs)


def eigensystem_three_level(s, Delta):
    """Spectrum of the atom pair at one detuning via the trigonometric cubic."""
    if s.arity != THREE_LEVEL:
        raise ValueError("eigensystem_three_level needs a three-level SystemSpec")
    energies, vecs = _three_level_arrays(s, float(Delta))
    return EigenFrame(detuning=float(Delta), energies=energies, eigvecs=vecs)


def eigensystem(s, Delta):
    """Instantaneous eigensystem for either system arity."""
    if s.arity == TWO_LEVEL:
        return eigensystem_two_level(s, Delta)
    return eigensystem_three_level(s, Delta)


def diabatic_character(s, Delta):
    """Index of the dominant diabatic component of each ascending level.

    Serves as the label map between the energy-ordered levels and the
    diabatic states they follow far from the crossings.
    """
    frame = eigensystem(s, Delta)
    return tuple(int(np.argmax(np.abs(frame.eigvecs[:, j])))
                 for j in range(s.dim))


def gap_report(s):
    """Adjacent-level gaps of the atom pair at Delta in {0, V0/2, V0}.

    The avoided crossing at Delta = 0 (and equally at Delta = V0) couples
    the two lower levels; the one at Delta = V0/2 couples the two upper
    levels.
    """
    if s.arity != THREE_LEVEL:
        raise ValueError("gap_report needs a three-level SystemSpec")
    _require_coupling(s)
    V0 = s.V0
    e0 = _three_level_energies(s, 0.0)
    eh = _three_level_energies(s, 0.5 * V0)
    ef = _three_level_energies(s, V0)
    return GapReport(
        gap_zero=float(e0[1] - e0[0]),
        gap_half=float(eh[2] - eh[1]),
        gap_full=float(ef[1] - ef[0]),
        crossing_detunings=(0.0, 0.5 * V0, V0),
    )


def crossing_targets(s):
    """(index, detuning) pairs where diabatic levels cross.

    Single atom: only Delta = 0.  Atom pair: Delta = 0 (gg-s), V0/2
    (gg-rr) and V0 (s-rr).  At V0 = 0 the three merge into a single
    bow-tie crossing, reported once with index 1.
    """
    if s.arity == TWO_LEVEL or s.V0 == 0.0:
        return ((1, 0.0),)
    return ((1, 0.0), (2, 0.5 * s.V0), (3, s.V0))


def crossing_times(p, s, cycles=1, t_start=0.0):
    """Crossing passages of a periodic drive in [t_start, t_start + cycles*T).

    Returns CrossingEvents sorted by time.  A crossing detuning is reachable
    only when |target - Delta0| < delta, strictly: at tangency the sweep
    slope vanishes and no transition in the impulse sense occurs.  The
    window is half-open with a 1e-12-period guard against boundary
    round-off, so a passage sitting exactly on the end of the window
    belongs to the next cycle.
    """
    if p.kind != PERIODIC:
        raise ValueError("crossing enumeration requires a periodic drive")
    if cycles <= 0:
        raise ValueError("cycles must be a positive integer")
    T = p.period
    t_end = t_start + cycles * T
    eps = 1e-12 * T
    events = []
    for index, target in crossing_targets(s):
        if not abs(target - p.Delta0) < p.delta:
            continue
        a = math.asin((target - p.Delta0) / p.delta)
        speed = p.omega * math.sqrt(p.delta**2 - (target - p.Delta0)**2)
        m = int(math.floor(p.omega * t_start / math.pi)) - 2
        while True:
            t_m = (m * math.pi + (-1) ** m * a) / p.omega
            if t_m >= t_end - eps:
                break
            if t_m >= t_start - eps:
                events.append(CrossingEvent(
                    time=t_m, index=index, branch=m,
                    rate=(-1) ** m * speed))
            m += 1
    events.sort(key=lambda ev: ev.time)
    return events

r"""Imaginary part of log Gamma on the line z = 1 - i*gamma.

The Stokes phase of a Landau-Zener transition needs arg Gamma(1 - i*gamma)
on the *continuous* branch: the principal value wraps into (-pi, pi] once
gamma grows past ~4.6, which would destroy the gamma -> infinity limit of
the Stokes phase.  Im log Gamma is computed here directly, so no unwrapping
is ever needed.

Algorithm: upward recurrence followed by a Stirling tail,

    Im log Gamma(z) = Im log Gamma(z + n) - sum_{k=0}^{n-1} arg(z + k),

with n chosen so Re(z + n) >= 10.  Each arg(z + k) lies in (-pi/2, 0] and is
continuous in gamma, and the Stirling series for Re w >= 10 converges to
well below 1e-14 relative with seven Bernoulli terms.
"""

from __future__ import annotations

import numpy as np

# B_{2n} / (2n (2n-1)) for n = 1..7  (Bernoulli numbers 1/6, -1/30, 1/42,
# -1/30, 5/66, -691/2730, 7/6)
_STIRLING_COEFFS = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
)

_RE_SHIFT_TARGET = 10.0


def im_loggamma_one_minus_i(gamma):
    """Im log Gamma(1 - i*gamma) on the continuous branch.

    Accepts a float or an ndarray; gamma may be any real value >= 0.
    Accuracy is ~1e-14 relative across gamma in [0, 1e6].
    """
    g = np.asarray(gamma, dtype=float)
    scalar = g.ndim == 0
    g = np.atleast_1d(g)

    # recurrence: -arg(z + k) = -arg(k + 1 - i g) = +atan(g / (k + 1))
    rec = np.zeros_like(g)
    n = int(_RE_SHIFT_TARGET) - 1
    for k in range(n):
        rec += np.arctan2(g, k + 1.0)

    w = (n + 1.0) - 1j * g  # Re w = 10
    # Stirling: Im[(w - 1/2) log w] - Im w + Im sum c_m / w^(2m-1)
    logw = np.log(w)
    val = np.imag((w - 0.5) * logw) + g  # -Im w = +g
    winv2 = 1.0 / (w * w)
    term = 1.0 / w
    for c in _STIRLING_COEFFS:
        val += c * np.imag(term)
        term = term * winv2

    out = val + rec
    return float(out[0]) if scalar else out

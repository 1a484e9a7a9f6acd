"""Closed-form Ramsey fringe and characteristic-function formulas.

Everything here is exact algebra for the two-set SDK Ramsey sequence:
an opening pi/2 pulse, N spin-dependent kicks, a delay worth theta
radians of trap phase, N more kicks, and a closing pi/2 pulse with
analysis phase phi.  The slow but assumption-free counterpart lives in
`oracle`, which propagates truncated Fock-space vectors; the two are
held to agree by the test suite.

The characteristic function chi(alpha) = <D(alpha)> is the quantity the
interferometer actually samples: a delay scan at fixed kick number reads
chi along a circle through the origin of phase space, and the spin-up
probability encodes its real or imaginary part depending on phi.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ValidationError
from .validation import check_nonnegative

__all__ = [
    "fringe_phase",
    "spin_up_coherent",
    "spin_up_thermal",
    "spin_up_from_chi",
    "spin_up_state",
    "thermal_envelope",
    "fwhm_hot",
    "fwhm_exact",
    "chi_thermal",
    "chi_coherent",
    "chi_fock",
    "chi_custom",
    "chi_state",
    "displaced_overlap",
    "FringeModel",
]


def _half_angle_term(theta):
    """Numerically stable 1 - cos(theta) = 2 sin^2(theta/2)."""
    theta = np.asarray(theta, dtype=float)
    return 2.0 * np.sin(theta / 2.0) ** 2


def fringe_phase(alpha, n_kicks, eta, theta):
    """Interference phase contributed by an initial displacement alpha.

    Evaluates N*eta*[Re(alpha)*(1-cos(theta)) - Im(alpha)*sin(theta)]
    with N signed.  The measured fringe argument is four times this.
    """
    alpha = np.asarray(alpha, dtype=complex)
    theta = np.asarray(theta, dtype=float)
    out = n_kicks * eta * (alpha.real * _half_angle_term(theta) - alpha.imag * np.sin(theta))
    if out.ndim == 0:
        return float(out)
    return out


def _envelope_log(n_kicks, eta, theta, nbar=0.0):
    """log of the fringe contrast envelope, always <= 0."""
    return -4.0 * (n_kicks * eta) ** 2 * (2.0 * nbar + 1.0) * _half_angle_term(theta)


def spin_up_coherent(alpha, cfg, seq):
    """Spin-up probability for an initial coherent state alpha.

    Returns 1/2 + 1/2 * exp(-4(N eta)^2 (1-cos theta)) * cos(4 gamma - phi)
    where gamma = fringe_phase(alpha, ...).
    """
    env = np.exp(_envelope_log(seq.n_kicks, cfg.eta, seq.theta))
    four_gamma = 4.0 * fringe_phase(alpha, seq.n_kicks, cfg.eta, seq.theta)
    return 0.5 + 0.5 * env * np.cos(four_gamma - seq.phi)


def spin_up_thermal(nbar, cfg, seq):
    """Spin-up probability for an initial thermal state with mean phonon nbar.

    The Gaussian average over the thermal P-distribution collapses the
    coherent-state result to
    1/2 + 1/2 * exp(-4(N eta)^2 (2 nbar + 1)(1-cos theta)) * cos(phi).
    The exponent is formed directly in log space, so nbar as large as
    1e9 underflows cleanly to probability exactly 1/2 instead of losing
    precision.
    """
    nbar = check_nonnegative(nbar, "nbar")
    env = np.exp(_envelope_log(seq.n_kicks, cfg.eta, seq.theta, nbar))
    return 0.5 + 0.5 * env * math.cos(seq.phi)


def thermal_envelope(nbar, n_kicks, eta, theta):
    """Fringe contrast of a thermal state versus delay angle theta."""
    return np.exp(_envelope_log(n_kicks, eta, theta, nbar))


def spin_up_from_chi(chi, phi):
    """Invert the readout relation: spin-up probability from chi at one point.

    At phi = 0 this is (1 + Re chi)/2 and at phi = pi/2 it is
    (1 + Im chi)/2; intermediate analysis phases mix the two parts as
    1/2 + (Re chi * cos phi + Im chi * sin phi)/2.
    """
    chi = complex(chi)
    if abs(chi) > 1.0 + 1e-9:
        raise ValidationError(f"|chi| must be <= 1, got {abs(chi)}")
    return 0.5 + 0.5 * (chi.real * math.cos(phi) + chi.imag * math.sin(phi))


def spin_up_state(state, cfg, seq):
    """Spin-up probability for any supported motional state.

    Dispatches on the state kind; thermal and coherent states use their
    dedicated formulas, Fock and custom states go through chi_state and
    the ring geometry.
    """
    if state.kind == "thermal":
        return spin_up_thermal(state.nbar, cfg, seq)
    if state.kind == "coherent":
        return spin_up_coherent(state.alpha, cfg, seq)
    from .core import ring_alpha

    chi = chi_state(state, ring_alpha(cfg, seq.n_kicks, seq.theta))
    return spin_up_from_chi(chi, seq.phi)


def fwhm_hot(nbar, n_kicks, eta):
    """Width of the contrast revival for a hot ion, 0.83/(|N| eta sqrt(nbar)).

    Valid when nbar >> 1/(N eta)^2; a warning is emitted outside that
    regime (use fwhm_exact there, or a full-period scan).
    """
    nbar = check_nonnegative(nbar, "nbar")
    scale = (n_kicks * eta) ** 2
    if nbar * scale < 1.0:
        warnings.warn(
            "fwhm_hot assumes nbar >> 1/(N*eta)^2; "
            f"got nbar*(N*eta)^2 = {nbar * scale:.3g}",
            stacklevel=2,
        )
    return 0.83 / (abs(n_kicks) * eta * math.sqrt(nbar))


def fwhm_exact(nbar, n_kicks, eta):
    """Exact full width at half maximum of the thermal contrast revival.

    Solves exp(-4(N eta)^2 (2 nbar + 1)(1 - cos theta)) = 1/2 for theta.
    Returns nan when the envelope never falls to half (very cold ion),
    in which case the revival is wider than a trap period and has no
    meaningful width.
    """
    nbar = check_nonnegative(nbar, "nbar")
    drop = math.log(2.0) / (4.0 * (n_kicks * eta) ** 2 * (2.0 * nbar + 1.0))
    if drop > 2.0:
        return math.nan
    return 2.0 * math.acos(1.0 - drop)


def chi_thermal(nbar, alpha):
    """Characteristic function of a thermal state: exp(-(2 nbar + 1)|alpha|^2 / 2)."""
    nbar = check_nonnegative(nbar, "nbar")
    alpha = np.asarray(alpha, dtype=complex)
    out = np.exp(-(2.0 * nbar + 1.0) * np.abs(alpha) ** 2 / 2.0)
    if out.ndim == 0:
        return complex(out)
    return out


def chi_coherent(beta, alpha):
    """Characteristic function of the coherent state beta, evaluated at alpha."""
    beta = complex(beta)
    alpha = np.asarray(alpha, dtype=complex)
    out = np.exp(-np.abs(alpha) ** 2 / 2.0 + alpha * np.conj(beta) - np.conj(alpha) * beta)
    if out.ndim == 0:
        return complex(out)
    return out


def _laguerre_all(n, k, x):
    """Generalized Laguerre values L_i^{(k)}(x) for i = 0..n, upward recurrence.

    The three-term recurrence is stable in the upward direction for the
    modest orders used here.
    """
    x = np.asarray(x, dtype=float)
    values = np.empty((n + 1,) + x.shape)
    values[0] = 1.0
    if n >= 1:
        values[1] = 1.0 + k - x
    for i in range(1, n):
        values[i + 1] = ((2 * i + 1 + k - x) * values[i] - (i + k) * values[i - 1]) / (i + 1)
    return values


def laguerre(n, x):
    """Plain Laguerre polynomial L_n(x)."""
    return _laguerre_all(n, 0, x)[n]


def chi_fock(n, alpha):
    """Characteristic function of the Fock state |n>: exp(-|a|^2/2) L_n(|a|^2).

    Real for every alpha; for n = 1 the global minimum -2 exp(-3/2) sits
    on the circle |alpha|^2 = 3.
    """
    n = int(n)
    if n < 0:
        raise ValidationError(f"fock level must be >= 0, got {n}")
    alpha = np.asarray(alpha, dtype=complex)
    r2 = np.abs(alpha) ** 2
    out = np.exp(-r2 / 2.0) * laguerre(n, r2)
    if out.ndim == 0:
        return complex(out)
    return out + 0j


def displaced_overlap(m, n, alpha):
    """Matrix element <m|D(alpha)|n> of the displacement operator.

    Closed form in terms of generalized Laguerre polynomials; this is
    the analytic twin of the matrix-exponential route in `oracle`.
    """
    m, n = int(m), int(n)
    if m < 0 or n < 0:
        raise ValidationError("fock indices must be >= 0")
    alpha = complex(alpha)
    r2 = abs(alpha) ** 2
    lo, hi = min(m, n), max(m, n)
    d = hi - lo
    # sqrt(lo!/hi!) = 1/sqrt((lo+1)(lo+2)...hi)
    ratio = 1.0
    for j in range(lo + 1, hi + 1):
        ratio /= j
    amp = (alpha if m >= n else -np.conj(alpha)) ** d
    return math.sqrt(ratio) * amp * math.exp(-r2 / 2.0) * float(_laguerre_all(lo, d, np.float64(r2))[lo])


def chi_custom(amps, alpha):
    """Characteristic function of a pure state given by Fock amplitudes."""
    amps = np.asarray(amps, dtype=complex)
    dim = len(amps)
    total = 0j
    for m in range(dim):
        if amps[m] == 0:
            continue
        for n in range(dim):
            if amps[n] == 0:
                continue
            total += np.conj(amps[m]) * amps[n] * displaced_overlap(m, n, alpha)
    return total


def chi_state(state, alpha):
    """Characteristic function of a MotionalState at one or more alphas."""
    if state.kind == "thermal":
        return chi_thermal(state.nbar, alpha)
    if state.kind == "coherent":
        return chi_coherent(state.alpha, alpha)
    if state.kind == "fock":
        return chi_fock(state.n, alpha)
    alphas = np.asarray(alpha, dtype=complex)
    if alphas.ndim == 0:
        return chi_custom(state.amps, complex(alphas))
    return np.array([chi_custom(state.amps, a) for a in alphas.ravel()]).reshape(alphas.shape)


@dataclass(frozen=True)
class FringeModel:
    """Fringe law S(theta; phi) = 1/2 + (A/2) * C(theta) * cos(phi - phase_offset).

    amplitude absorbs every contrast loss that does not depend on the
    delay (kick infidelity, detection error); envelope carries the
    delay dependence and maps theta to [0, 1].
    """

    amplitude: float
    envelope: Callable[[np.ndarray], np.ndarray]
    phase_offset: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValidationError(f"amplitude must lie in [0, 1], got {self.amplitude}")

    def spin_up(self, theta, phi):
        env = np.asarray(self.envelope(np.asarray(theta, dtype=float)))
        return 0.5 + 0.5 * self.amplitude * env * np.cos(np.asarray(phi) - self.phase_offset)

    def contrast(self, theta):
        """Peak-to-valley fringe contrast at each delay."""
        return self.amplitude * np.asarray(self.envelope(np.asarray(theta, dtype=float)))

    @classmethod
    def thermal(cls, nbar, cfg, n_kicks, amplitude=1.0):
        """Model for a thermal state probed with n_kicks per set."""
        nbar = check_nonnegative(nbar, "nbar")

        def env(theta):
            return thermal_envelope(nbar, n_kicks, cfg.eta, theta)

        return cls(amplitude=amplitude, envelope=env)

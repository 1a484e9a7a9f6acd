"""Trap parameters, initial motional states, and kick-sequence kinematics.

Phase-space amplitudes are dimensionless throughout (zero-point units);
SI unit conversions happen only where momenta or heating rates are
reported.  The trap drives one secular mode of a single ion, and a
counter-propagating pulse pair flips the spin while displacing the
motion by eta along the momentum axis.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants as sc

from .errors import ValidationError
from .validation import (
    check_nonnegative,
    check_nonzero_int,
    check_positive,
    check_unit_interval,
)

# Atomic mass of 171Yb (CODATA-style value, in unified atomic mass units).
# The missing electron shifts this by ~3e-6 relative, ignorable here.
YB171_MASS_AMU = 170.936330
YB171_MASS_KG = YB171_MASS_AMU * sc.atomic_mass


@dataclass(frozen=True)
class TrapConfig:
    """Static hardware parameters of the trap and the kick laser.

    Parameters
    ----------
    omega_t : float
        Angular secular frequency of the addressed mode, rad/s.
    eta : float
        Lamb-Dicke parameter of the kick beams, dimensionless, in (0, 1).
    f_rep : float
        Pulse repetition rate of the kick laser, Hz.  Consecutive kicks
        can only be spaced by integer multiples of 1/f_rep, which sets
        the coarse delay resolution.
    mass : float
        Ion mass in kg.
    detection_fidelity : float
        Probability that a spin readout reports the true state.
    sdk_fidelity : float
        Success probability of a single spin-dependent kick.
    """

    omega_t: float = 2 * math.pi * 1.0e6
    eta: float = 0.2
    f_rep: float = 118.0e6
    mass: float = YB171_MASS_KG
    detection_fidelity: float = 0.997
    sdk_fidelity: float = 0.993

    def __post_init__(self):
        check_positive(self.omega_t, "omega_t")
        check_positive(self.f_rep, "f_rep")
        check_positive(self.mass, "mass")
        eta = check_positive(self.eta, "eta")
        if eta >= 1.0:
            raise ValidationError(f"eta must lie in (0, 1), got {eta}")
        check_unit_interval(self.detection_fidelity, "detection_fidelity")
        check_unit_interval(self.sdk_fidelity, "sdk_fidelity")

    @property
    def trap_period(self):
        """Secular oscillation period in seconds."""
        return 2 * math.pi / self.omega_t


@dataclass(frozen=True)
class MotionalState:
    """Tagged description of the initial motional state of the ion.

    Use the class methods rather than the constructor:

    >>> MotionalState.thermal(10.0)
    >>> MotionalState.coherent(1 + 0.5j)
    >>> MotionalState.fock(1)
    >>> MotionalState.custom([0.6, 0.8])
    """

    kind: str
    nbar: float = 0.0
    alpha: complex = 0j
    n: int = 0
    amps: tuple = field(default=(), repr=False)

    _KINDS = ("thermal", "coherent", "fock", "custom")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValidationError(f"unknown motional state kind {self.kind!r}")

    @classmethod
    def thermal(cls, nbar):
        nbar = check_nonnegative(nbar, "nbar")
        return cls(kind="thermal", nbar=nbar)

    @classmethod
    def coherent(cls, alpha):
        alpha = complex(alpha)
        if not (np.isfinite(alpha.real) and np.isfinite(alpha.imag)):
            raise ValidationError("coherent amplitude must be finite")
        return cls(kind="coherent", alpha=alpha)

    @classmethod
    def fock(cls, n):
        if int(n) != n:
            raise ValidationError(f"fock level must be an integer, got {n!r}")
        n = int(n)
        if n < 0:
            raise ValidationError(f"fock level must be >= 0, got {n}")
        return cls(kind="fock", n=n)

    @classmethod
    def custom(cls, amps):
        arr = np.asarray(amps, dtype=complex)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("custom amplitudes must be a nonempty 1-d vector")
        if not np.all(np.isfinite(arr.view(float))):
            raise ValidationError("custom amplitudes must be finite")
        norm = np.linalg.norm(arr)
        if abs(norm - 1.0) > 1e-10:
            raise ValidationError(f"custom amplitudes must be unit norm, got |psi| = {norm}")
        return cls(kind="custom", amps=tuple(arr))

    @classmethod
    def vacuum(cls):
        return cls.fock(0)

    def mean_occupation(self):
        """Mean phonon number of the described state."""
        if self.kind == "thermal":
            return self.nbar
        if self.kind == "coherent":
            return abs(self.alpha) ** 2
        if self.kind == "fock":
            return float(self.n)
        weights = np.abs(np.asarray(self.amps)) ** 2
        return float(np.sum(weights * np.arange(len(weights))))


@dataclass(frozen=True)
class KickSequence:
    """One Ramsey experiment: two SDK sets separated by a trap-phase delay.

    Parameters
    ----------
    n_kicks : int
        Signed kick count N per set.  |N| pulses are concatenated at
        half-trap-period spacing; the sign selects the direction of the
        momentum transfer tied to each spin flip.
    theta : float
        Trap phase accumulated between the last kick of the first set
        and the first kick of the second, radians, >= 0.
    phi : float
        Analysis phase of the closing Ramsey pulse, radians.
    """

    n_kicks: int
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        check_nonzero_int(self.n_kicks, "n_kicks")
        theta = check_nonnegative(self.theta, "theta")
        if not np.isfinite(self.phi):
            raise ValidationError("phi must be finite")
        object.__setattr__(self, "theta", float(theta))
        object.__setattr__(self, "phi", float(self.phi))
        object.__setattr__(self, "n_kicks", int(self.n_kicks))


def ring_alpha(cfg, n_kicks, theta):
    """Phase-space point probed by a delay scan, alpha = 2*N*eta*[sin(theta) + i*(1 - cos(theta))].

    As theta sweeps one trap period the point traces a circle of radius
    2*|N|*eta through the origin, centered at 2i*N*eta; the sign of
    n_kicks mirrors the ring through the origin.

    Parameters
    ----------
    cfg : TrapConfig
    n_kicks : int
        Signed kick count, nonzero.
    theta : float or ndarray
        Delay angle in radians.

    Returns
    -------
    complex or ndarray
        Dimensionless phase-space coordinate(s).
    """
    n_kicks = check_nonzero_int(n_kicks, "n_kicks")
    theta = np.asarray(theta, dtype=float)
    alpha = 2.0 * n_kicks * cfg.eta * (np.sin(theta) + 1j * (1.0 - np.cos(theta)))
    if alpha.ndim == 0:
        return complex(alpha)
    return alpha


def theta_resolution(cfg):
    """Smallest step of the delay angle reachable by re-timing pulses.

    The kick laser emits at f_rep, so delays move in steps of one pulse
    slot, worth omega_t / f_rep radians of trap phase.
    """
    return cfg.omega_t / cfg.f_rep


class KickMomentum(tuple):
    """Momentum transferred by one SDK set, as (si, zero_point).

    si is in kg*m/s; zero_point is in units of p0 = sqrt(2*m*hbar*omega_t).
    """

    __slots__ = ()

    def __new__(cls, si, zero_point):
        return super().__new__(cls, (si, zero_point))

    @property
    def si(self):
        return self[0]

    @property
    def zero_point(self):
        return self[1]


def zero_point_momentum(cfg):
    """Ground-state momentum scale p0 = sqrt(2*mass*hbar*omega_t), kg*m/s."""
    return math.sqrt(2.0 * cfg.mass * sc.hbar * cfg.omega_t)


def momentum_per_kick(cfg, n_kicks):
    """Net momentum imparted by a set of n_kicks spin-dependent kicks.

    Returns a KickMomentum carrying both the SI value N*eta*p0 and the
    dimensionless value N*eta.  Odd in n_kicks; n_kicks = 0 is allowed
    here (no kick, zero momentum).
    """
    n_kicks = int(n_kicks)
    zp = n_kicks * cfg.eta
    return KickMomentum(zp * zero_point_momentum(cfg), zp)

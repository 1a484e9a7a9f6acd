"""Brute-force simulator of the kick interferometer in a truncated Fock space.

This module is the ground truth the closed forms in `fringes` are tested
against.  It makes no rotating-wave or impulsive-average shortcuts beyond
the model itself: single kicks are unitary displacement-plus-spin-flip
operations, kicks within a set are separated by exactly half a trap
period of free evolution, and the truncation error is monitored rather
than assumed away.

States live in a (spin tensor Fock) space flattened to a complex vector
of length 2*dim, spin-down block first.  Registers are immutable; every
gate returns a fresh register, so independent experiment points can be
evaluated concurrently without shared state.

Conventions fixed here (and relied on by `fringes`):

* ``evolve_free(theta)`` multiplies Fock level n by exp(-i*n*theta).
* The kick operator is D(i*s*eta) sigma_+ + D(-i*s*eta) sigma_- with
  s the direction sign; sigma_+ = |up><down|.
* ``microwave_pulse(phase, angle)`` rotates the spin by `angle` about
  the equatorial axis at azimuth `phase`, with the sign convention
  chosen so a delay scan reads cos(4*gamma - phi) fringes, matching
  the closed forms in `fringes`.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .core import MotionalState
from .errors import TruncationError, ValidationError

__all__ = [
    "QuantumRegister",
    "OracleReport",
    "displacement_matrix",
    "apply_sdk",
    "evolve_free",
    "microwave_pulse",
    "run_ramsey",
    "char_function",
    "required_dim",
    "thermal_mixture",
]

# Population allowed beyond the trusted band (lowest 90% of levels)
# before a result is considered truncation-poisoned.
LEAKAGE_LIMIT = 1e-6
# Cumulative weight kept when a thermal state is expanded into Fock terms.
THERMAL_TAIL = 1e-6

DOWN, UP = 0, 1


class QuantumRegister:
    """Immutable pure state of the spin (x) motion system.

    amps is stored as a read-only complex array of shape (2, dim):
    row 0 is the spin-down motional amplitudes, row 1 spin-up.
    """

    __slots__ = ("_amps",)

    def __init__(self, amps, *, _skip_checks=False):
        arr = np.array(amps, dtype=complex)
        if arr.ndim == 1:
            if arr.size % 2:
                raise ValidationError("flat register length must be 2*dim")
            arr = arr.reshape(2, arr.size // 2)
        if arr.ndim != 2 or arr.shape[0] != 2 or arr.shape[1] < 2:
            raise ValidationError(f"register must have shape (2, dim>=2), got {arr.shape}")
        if not _skip_checks:
            norm = np.linalg.norm(arr)
            if abs(norm - 1.0) > 1e-9:
                raise ValidationError(f"register norm must be 1 within 1e-9, got {norm!r}")
        arr.setflags(write=False)
        self._amps = arr

    @property
    def amps(self):
        return self._amps

    @property
    def dim(self):
        return self._amps.shape[1]

    @property
    def flat(self):
        """Length 2*dim vector, spin-down block then spin-up block."""
        return self._amps.reshape(-1)

    def norm(self):
        return float(np.linalg.norm(self._amps))

    @property
    def spin_up_probability(self):
        return float(np.sum(np.abs(self._amps[UP]) ** 2))

    def leakage(self):
        """Population sitting above the trusted band (top 10% of levels)."""
        return _band_leakage(self._amps)

    def motional_density(self):
        """Reduced motional density matrix (spin traced out)."""
        a = self._amps
        return a[DOWN][:, None] * a[DOWN].conj()[None, :] + a[UP][:, None] * a[UP].conj()[None, :]

    # -- constructors ------------------------------------------------

    @classmethod
    def ground(cls, dim):
        return cls.fock(0, dim)

    @classmethod
    def fock(cls, n, dim, spin=DOWN):
        n = int(n)
        if not 0 <= n < dim:
            raise ValidationError(f"fock level {n} outside 0..{dim - 1}")
        amps = np.zeros((2, dim), dtype=complex)
        amps[spin, n] = 1.0
        return cls(amps, _skip_checks=True)

    @classmethod
    def coherent(cls, alpha, dim, spin=DOWN):
        """Coherent state built from its Fock expansion (no matrices involved)."""
        motion = coherent_amplitudes(alpha, dim)
        amps = np.zeros((2, dim), dtype=complex)
        amps[spin] = motion
        return cls(amps, _skip_checks=True)

    @classmethod
    def from_motional(cls, motion, dim, spin=DOWN):
        motion = np.asarray(motion, dtype=complex)
        if len(motion) > dim:
            raise ValidationError("motional amplitudes longer than dim")
        amps = np.zeros((2, dim), dtype=complex)
        amps[spin, : len(motion)] = motion
        return cls(amps)


def coherent_amplitudes(alpha, dim):
    """Fock amplitudes exp(-|a|^2/2) a^n / sqrt(n!) up to dim levels.

    Uses the ratio recurrence c_{n+1} = c_n * a / sqrt(n+1), which never
    overflows.  Raises TruncationError if dim cuts off more than 1e-9
    of the state's norm.
    """
    alpha = complex(alpha)
    c = np.empty(dim, dtype=complex)
    c[0] = math.exp(-abs(alpha) ** 2 / 2.0)
    for n in range(dim - 1):
        c[n + 1] = c[n] * alpha / math.sqrt(n + 1)
    tail = 1.0 - np.sum(np.abs(c) ** 2)
    if tail > 1e-9:
        raise TruncationError(
            f"coherent amplitude {alpha} needs more than {dim} levels (tail {tail:.2e})"
        )
    return c / np.linalg.norm(c)


@dataclass(frozen=True)
class OracleReport:
    """Outcome of one simulated experiment."""

    spin_up_probability: float
    leakage: float

    def __post_init__(self):
        if not 0.0 <= self.spin_up_probability <= 1.0:
            raise ValidationError("probability outside [0, 1]")
        if self.leakage < 0:
            raise ValidationError("leakage must be >= 0")


def _band_leakage(amps):
    """Population above the lowest 90% of Fock levels.

    amps may be (2, dim) or (2, dim, k); reduction is over spin and
    levels, leaving the batch axis if present.
    """
    dim = amps.shape[1]
    trusted = int(math.floor(0.9 * dim))
    pops = np.abs(amps[:, trusted:]) ** 2
    return pops.sum(axis=(0, 1))


@lru_cache(maxsize=64)
def _displacement_cached(alpha, dim):
    n = np.arange(1, dim)
    lower = np.diag(np.sqrt(n), -1)  # a_dagger without the coefficient
    gen = alpha * lower - np.conj(alpha) * lower.conj().T
    mat = expm(gen)
    mat.setflags(write=False)
    return mat

def displacement_matrix(alpha, dim):
    """Displacement operator D(alpha) = exp(alpha a+ - alpha* a), truncated.

    Computed as the exact matrix exponential of the truncated generator,
    which is exactly unitary on the truncated space and agrees with the
    infinite-dimensional operator on the trusted band.  Displacements
    with |alpha|^2 > dim/4 are rejected as truncation-unsafe.

    Parameters
    ----------
    alpha : complex
    dim : int
        Number of Fock levels; at least 2.

    Returns
    -------
    (dim, dim) complex ndarray, read-only (cached).
    """
    dim = int(dim)
    if dim < 2:
        raise ValidationError(f"dim must be >= 2, got {dim}")
    alpha = complex(alpha)
    if abs(alpha) ** 2 > dim / 4.0:
        raise TruncationError(
            f"displacement |alpha|^2 = {abs(alpha) ** 2:.3g} too large for dim {dim}"
        )
    return _displacement_cached(alpha, dim)


# -- gates ------------------------------------------------------------
#
# Each gate has an array-level worker (leading underscore) operating on
# (2, dim) or (2, dim, k) blocks, plus a register-level wrapper.  The
# workers are what run_ramsey batches mixtures through.


def _sdk_block(amps, d_plus, d_minus):
    return np.stack([
        np.tensordot(d_minus, amps[UP], axes=(1, 0)),
        np.tensordot(d_plus, amps[DOWN], axes=(1, 0)),
    ])


def apply_sdk(reg, cfg, direction=1):
    """One spin-dependent kick: D(i*s*eta) sigma+ + D(-i*s*eta) sigma-.

    The spin always flips; the motion is displaced along +i*eta or
    -i*eta depending on the incoming spin, with `direction` = -1
    reversing both (the optics-phase-flipped kick used for negative
    kick counts).
    """
    if direction not in (+1, -1):
        raise ValidationError(f"direction must be +1 or -1, got {direction}")
    kick = 1j * direction * cfg.eta
    d_plus = displacement_matrix(kick, reg.dim)
    d_minus = displacement_matrix(-kick, reg.dim)
    return QuantumRegister(_sdk_block(reg.amps, d_plus, d_minus), _skip_checks=True)


def _free_block(amps, theta):
    phases = np.exp(-1j * theta * np.arange(amps.shape[1]))
    shape = (1, amps.shape[1]) + (1,) * (amps.ndim - 2)
    return amps * phases.reshape(shape)


def evolve_free(reg, theta):
    """Free harmonic evolution worth theta radians of trap phase.

    Fock level n acquires exp(-i*n*theta); a coherent state |a> maps to
    |a exp(-i*theta)> with no extra phase.
    """
    return QuantumRegister(_free_block(reg.amps, float(theta)), _skip_checks=True)


def _pulse_matrix(phase, angle):
    c = math.cos(angle / 2.0)
    s = math.sin(angle / 2.0)
    return np.array(
        [
            [c, -1j * np.exp(1j * phase) * s],
            [-1j * np.exp(-1j * phase) * s, c],
        ]
    )


def _pulse_block(amps, phase, angle):
    r = _pulse_matrix(phase, angle)
    return np.stack([
        r[0, 0] * amps[DOWN] + r[0, 1] * amps[UP],
        r[1, 0] * amps[DOWN] + r[1, 1] * amps[UP],
    ])


def microwave_pulse(reg, phase, angle):
    """Spin rotation by `angle` about the equatorial axis at azimuth `phase`.

    Identity on the motion.  angle = pi/2, phase = 0 maps |down> to
    (|down> - i|up>)/sqrt(2); the phase sign convention is the one that
    makes a full delay-scan sequence produce cos(4*gamma - phi) fringes.
    """
    return QuantumRegister(_pulse_block(reg.amps, float(phase), float(angle)), _skip_checks=True)


# -- full experiment ---------------------------------------------------


def thermal_mixture(nbar, dim, tail=THERMAL_TAIL):
    """Geometric Fock mixture approximating a thermal state.

    Keeps levels until the retained cumulative weight exceeds 1 - tail,
    then renormalizes.  Returns a list of (weight, QuantumRegister).
    """
    if nbar < 0:
        raise ValidationError(f"nbar must be >= 0, got {nbar}")
    if nbar == 0:
        return [(1.0, QuantumRegister.ground(dim))]
    ratio = nbar / (1.0 + nbar)
    weights = []
    w = 1.0 / (1.0 + nbar)
    cum = 0.0
    n = 0
    while cum < 1.0 - tail:
        if n >= dim:
            raise TruncationError(
                f"thermal nbar={nbar} needs more than dim={dim} Fock levels"
            )
        weights.append(w)
        cum += w
        w *= ratio
        n += 1
    weights = np.array(weights) / cum
    return [(float(wi), QuantumRegister.fock(i, dim)) for i, wi in enumerate(weights)]


def required_dim(state, cfg, seq, alpha_probe=0.0):
    """Safe Fock truncation for run_ramsey on the given state and sequence.

    Implements the guard dim >= 4*(|alpha| + |N|*eta + 4*sqrt(nbar))^2,
    widened where the state's own Fock support (thermal mixture cutoff,
    custom vector length) demands more levels.
    """
    reach = abs(alpha_probe) + abs(seq.n_kicks) * cfg.eta
    support = 0.0
    if state.kind == "coherent":
        reach += abs(state.alpha)
    elif state.kind == "thermal":
        reach += 4.0 * math.sqrt(state.nbar)
        if state.nbar > 0:
            ratio = state.nbar / (1.0 + state.nbar)
            cutoff = math.log(THERMAL_TAIL) / math.log(ratio)
            support = cutoff + 6.0 * math.sqrt(cutoff) + 10.0
    elif state.kind == "fock":
        reach += 4.0 * math.sqrt(state.n)
        support = state.n + 10.0
    else:
        top = len(state.amps) - 1
        reach += 4.0 * math.sqrt(top) if top else 0.0
        support = top + 10.0
    # The +16 floor absorbs Poisson tails that the quadratic reach rule
    # underestimates when the total displacement is of order one.
    guard = 4.0 * reach**2 + 16.0
    return max(int(math.ceil(max(guard, support))), 8)


def _initial_components(state, dim):
    """(weight, (2, dim) array) pairs for the requested motional state, spin down."""
    if state.kind == "thermal":
        return [(w, reg.amps) for w, reg in thermal_mixture(state.nbar, dim)]
    if state.kind == "coherent":
        return [(1.0, QuantumRegister.coherent(state.alpha, dim).amps)]
    if state.kind == "fock":
        return [(1.0, QuantumRegister.fock(state.n, dim).amps)]
    amps = np.asarray(state.amps, dtype=complex)
    norm = np.linalg.norm(amps)
    if abs(norm - 1.0) > 1e-9:
        raise ValidationError(f"custom state norm {norm!r} is not 1")
    if len(amps) > dim:
        raise ValidationError("custom state has more levels than dim")
    return [(1.0, QuantumRegister.from_motional(amps, dim).amps)]


def run_ramsey(state, cfg, seq, dim=None):
    """Simulate one full interferometer sequence and report P(spin up).

    Sequence: pi/2 pulse, |N| kicks spaced by half a trap period, free
    evolution worth theta, |N| more kicks, closing pi/2 pulse with
    analysis phase phi, ideal spin readout.  Negative N reverses the
    kick direction.  Thermal states run as a truncated geometric Fock
    mixture.

    Parameters
    ----------
    state : MotionalState
    cfg : TrapConfig
    seq : KickSequence
    dim : int, optional
        Fock truncation.  Defaults to required_dim(state, cfg, seq);
        explicit values below that guard are rejected.

    Returns
    -------
    OracleReport
        Mixture-averaged spin-up probability and worst-case population
        found beyond the trusted band during the run.
    """
    if not isinstance(state, MotionalState):
        raise ValidationError("state must be a MotionalState")
    guard = required_dim(state, cfg, seq)
    if dim is None:
        dim = guard
    elif dim < guard:
        raise TruncationError(f"dim {dim} below the safe truncation {guard} for this run")

    direction = 1 if seq.n_kicks > 0 else -1
    count = abs(seq.n_kicks)
    kick = 1j * direction * cfg.eta
    d_plus = displacement_matrix(kick, dim)
    d_minus = displacement_matrix(-kick, dim)

    components = _initial_components(state, dim)
    weights = np.array([w for w, _ in components])
    # One batched state tensor (2, dim, k): mixture components evolve together.
    psi = np.stack([a for _, a in components], axis=-1)

    def kick_set(block):
        for i in range(count):
            if i:
                block = _free_block(block, math.pi)
            block = _sdk_block(block, d_plus, d_minus)
        return block

    psi = _pulse_block(psi, 0.0, math.pi / 2.0)
    psi = kick_set(psi)
    leak = _band_leakage(psi)
    psi = _free_block(psi, seq.theta)
    psi = kick_set(psi)
    leak = np.maximum(leak, _band_leakage(psi))
    psi = _pulse_block(psi, seq.phi, math.pi / 2.0)

    worst_leak = float(np.max(leak))
    if worst_leak > LEAKAGE_LIMIT:
        raise TruncationError(
            f"trusted band lost {worst_leak:.3e} population (limit {LEAKAGE_LIMIT}); "
            "increase dim"
        )

    p_up = np.sum(np.abs(psi[UP]) ** 2, axis=0)
    prob = float(np.dot(weights, np.atleast_1d(p_up)))
    # Guard against eps-level float excursions only.
    prob = min(max(prob, 0.0), 1.0)
    return OracleReport(spin_up_probability=prob, leakage=worst_leak)


def char_function(reg_or_mixture, alpha):
    """Characteristic function Tr[rho_motion D(alpha)] of a register.

    Accepts a pure QuantumRegister or a list of (weight, register)
    pairs.  The displacement is evaluated in the register's own
    truncated space, so |alpha|^2 must stay below dim/4.
    """
    if isinstance(reg_or_mixture, QuantumRegister):
        mixture = [(1.0, reg_or_mixture)]
    else:
        mixture = list(reg_or_mixture)
        total = sum(w for w, _ in mixture)
        if any(w < 0 for w, _ in mixture) or abs(total - 1.0) > 1e-9:
            raise ValidationError("mixture weights must be >= 0 and sum to 1")
    dim = mixture[0][1].dim
    if any(reg.dim != dim for _, reg in mixture):
        raise ValidationError("mixture components must share one dim")
    d = displacement_matrix(complex(alpha), dim)
    value = 0j
    for w, reg in mixture:
        a = reg.amps
        value += w * (np.vdot(a[DOWN], d @ a[DOWN]) + np.vdot(a[UP], d @ a[UP]))
    return complex(value)

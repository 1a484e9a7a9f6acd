"""Synthetic experimental records: finite shots, kick infidelity, detection error.

The generator evaluates the exact fringe law for the requested motional
state, squashes it through a simple imperfection model, and draws
binomial counts with fully deterministic seeding.  The imperfection
model is the one the analysis stage is built to tolerate: a delay-
independent contrast amplitude from imperfect kicks plus a symmetric
readout error.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import KickSequence, MotionalState
from .errors import ValidationError
from .fringes import spin_up_state
from .validation import as_float_array, check_positive

__all__ = [
    "FringeScan",
    "RingSample",
    "DEFAULT_RING_SET",
    "sdk_amplitude",
    "lift_probability",
    "synth_fringe",
    "synth_ring_samples",
]

# Signed kick counts of the canonical 16-ring tomography plan.
DEFAULT_RING_SET = (1, 2, 3, 4, 5, 6, 8, 10, -1, -2, -3, -4, -5, -6, -8, -10)


@dataclass(frozen=True)
class FringeScan:
    """Ramsey fringe versus microwave detuning at fixed delay and kick count."""

    n_kicks: int
    theta: float
    detunings: np.ndarray = field(repr=False)
    ramsey_time: float
    shots: int
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "detunings", np.asarray(self.detunings, dtype=float))
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=int))
        if len(self.detunings) != len(self.counts):
            raise ValidationError("detunings and counts must have equal length")
        if np.any(self.counts < 0) or np.any(self.counts > self.shots):
            raise ValidationError("counts must lie in [0, shots]")

    @property
    def phis(self):
        """Analysis phase per point, phi = detuning * ramsey_time."""
        return self.detunings * self.ramsey_time

    @property
    def estimates(self):
        return self.counts / self.shots


@dataclass(frozen=True)
class RingSample:
    """One direct spin-up measurement on a phase-space ring."""

    n_kicks: int
    theta: float
    phi: float
    shots: int
    count: int

    def __post_init__(self):
        if not 0 <= self.count <= self.shots:
            raise ValidationError("count must lie in [0, shots]")

    @property
    def estimate(self):
        return self.count / self.shots

    @property
    def stderr(self):
        """Binomial standard error with a rule-of-succession floor.

        Uses p~ = (count+1)/(shots+2) inside the variance so boundary
        outcomes (0 or shots) still get a positive, usable error bar.
        """
        p = (self.count + 1.0) / (self.shots + 2.0)
        return float(np.sqrt(p * (1.0 - p) / self.shots))


def sdk_amplitude(cfg, n_kicks, nbar=None, amplitude_model=None):
    """Fringe amplitude after 2*|N| kicks: sdk_fidelity**(2|N|).

    amplitude_model, if given, is called as amplitude_model(cfg, n_kicks,
    nbar) and overrides the default (hook for occupation-dependent kick
    loss; off unless supplied).
    """
    if amplitude_model is not None:
        return float(amplitude_model(cfg, n_kicks, nbar))
    return cfg.sdk_fidelity ** (2 * abs(int(n_kicks)))


def lift_probability(s_ideal, cfg, n_kicks, nbar=None, amplitude_model=None):
    """Map an ideal spin-up probability to the observed one.

    Applies the kick-amplitude contrast loss about 1/2, then the
    symmetric detection error p' = f*p + (1-f)*(1-p).  Affine and
    order-preserving; output confined to [1-f, f].
    """
    s_ideal = np.asarray(s_ideal)
    if np.any(s_ideal < 0.0) or np.any(s_ideal > 1.0):
        raise ValidationError(f"s_ideal must lie in [0, 1], got {s_ideal}")
    a = sdk_amplitude(cfg, n_kicks, nbar, amplitude_model)
    p = 0.5 + a * (s_ideal - 0.5)
    f = cfg.detection_fidelity
    return f * p + (1.0 - f) * (1.0 - p)


def _point_rngs(seed, count):
    """Independent per-point generators derived from one master seed."""
    root = np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in root.spawn(count)]


def _model_probability(state, cfg, seq, amplitude_model=None):
    nbar = state.nbar if state.kind == "thermal" else None
    s = spin_up_state(state, cfg, seq)
    return float(lift_probability(s, cfg, seq.n_kicks, nbar, amplitude_model))


def synth_fringe(state, cfg, n_kicks, theta, detuning_grid, ramsey_time, shots,
                 rng_seed, amplitude_model=None):
    """Simulate a fringe scan: binomial counts versus microwave detuning.

    Parameters
    ----------
    state : MotionalState
    cfg : TrapConfig
    n_kicks : int
        Signed kicks per SDK set.
    theta : float
        Delay angle of the scan, rad.
    detuning_grid : array
        Microwave detunings delta in rad/s; the analysis phase per point
        is delta * ramsey_time.
    ramsey_time : float
        Ramsey time T in seconds.
    shots : int
        Shots per detuning point, >= 1.
    rng_seed : int
        Master seed; each grid point draws from its own derived stream,
        so results are reproducible and order-independent.

    Returns
    -------
    FringeScan
    """
    if not isinstance(state, MotionalState):
        raise ValidationError("state must be a MotionalState")
    detunings = as_float_array(detuning_grid, "detuning_grid")
    shots = int(check_positive(shots, "shots"))
    check_positive(ramsey_time, "ramsey_time")
    rngs = _point_rngs(rng_seed, len(detunings))
    counts = np.empty(len(detunings), dtype=int)
    for i, (delta, rng) in enumerate(zip(detunings, rngs)):
        seq = KickSequence(n_kicks, theta, phi=float(delta * ramsey_time))
        p = _model_probability(state, cfg, seq, amplitude_model)
        counts[i] = rng.binomial(shots, p)
    return FringeScan(
        n_kicks=int(n_kicks),
        theta=float(theta),
        detunings=detunings,
        ramsey_time=float(ramsey_time),
        shots=shots,
        counts=counts,
    )


def synth_ring_samples(state, cfg, rings, theta_grid, phis=(0.0, np.pi / 2),
                       shots=500, seed=0, amplitude_model=None):
    """Simulate direct ring measurements at the requested analysis phases.

    For tomography the fringe is only needed at phi = 0 and phi = pi/2,
    so each (ring, theta, phi) triple is measured directly instead of
    scanning a detuning grid.

    Returns a list of RingSample ordered by (ring, theta, phi), one
    independent RNG stream per sample.
    """
    if not isinstance(state, MotionalState):
        raise ValidationError("state must be a MotionalState")
    rings = [int(n) for n in rings]
    if not rings:
        raise ValidationError("rings must be nonempty")
    if any(n == 0 for n in rings):
        raise ValidationError("ring kick counts must be nonzero")
    thetas = as_float_array(theta_grid, "theta_grid")
    phis = as_float_array(phis, "phis")
    shots = int(check_positive(shots, "shots"))

    jobs = [(n, float(t), float(p)) for n in rings for t in thetas for p in phis]
    rngs = _point_rngs(seed, len(jobs))
    samples = []
    for (n, theta, phi), rng in zip(jobs, rngs):
        seq = KickSequence(n, theta, phi)
        p = _model_probability(state, cfg, seq, amplitude_model)
        samples.append(
            RingSample(n_kicks=n, theta=theta, phi=phi, shots=shots,
                       count=int(rng.binomial(shots, p)))
        )
    return samples

"""Electric-field-noise heating of the trapped ion.

White voltage noise on a trap electrode heats the secular mode at a
constant rate, so the mean occupation grows linearly; this is the
calibration model that turns an applied noise spectral density into a
predicted nbar for the thermometry to recover.  The effective electrode
distance is calibrated by applying a static voltage offset and watching
the equilibrium displacement.
"""

from dataclasses import dataclass

from scipy import constants as sc

from .validation import check_nonnegative, check_positive

__all__ = [
    "NoiseDrive",
    "heating_rate",
    "predict_nbar",
    "static_displacement",
    "effective_distance",
]


@dataclass(frozen=True)
class NoiseDrive:
    """Applied white voltage noise and how long the ion sat in it.

    Parameters
    ----------
    s_v : float
        One-sided voltage noise power spectral density at the trap
        frequency, V^2/Hz.
    d_eff : float
        Effective electrode distance, m.
    duration : float
        Exposure time, s.
    nbar0 : float
        Occupation at the start of the exposure.
    """

    s_v: float
    d_eff: float
    duration: float
    nbar0: float = 0.0

    def __post_init__(self):
        check_nonnegative(self.s_v, "s_v")
        check_positive(self.d_eff, "d_eff")
        check_nonnegative(self.duration, "duration")
        check_nonnegative(self.nbar0, "nbar0")


def heating_rate(cfg, drive):
    """Occupation growth rate e^2 S_V / (4 M hbar omega_t d^2), quanta/s."""
    return sc.e**2 * drive.s_v / (4.0 * cfg.mass * sc.hbar * cfg.omega_t * drive.d_eff**2)


def predict_nbar(drive, cfg):
    """Mean occupation after the exposure: nbar0 + rate * duration."""
    return drive.nbar0 + heating_rate(cfg, drive) * drive.duration


def static_displacement(cfg, voltage, distance):
    """Equilibrium displacement from a static voltage offset, meters.

    Standard harmonic response x = e E / (M omega_t^2) with the field
    approximated as E = V / d.
    """
    check_positive(distance, "distance")
    return sc.e * voltage / (cfg.mass * cfg.omega_t**2 * distance)


def effective_distance(cfg, voltage, displacement):
    """Electrode distance inferred from a measured static displacement.

    Inverse of static_displacement: d = e V / (M omega_t^2 x), so
    effective_distance(cfg, V, static_displacement(cfg, V, d)) == d.
    """
    if displacement == 0:
        raise ZeroDivisionError("displacement must be nonzero")
    return sc.e * voltage / (cfg.mass * cfg.omega_t**2 * displacement)

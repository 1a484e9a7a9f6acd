"""Spin-dependent-kick Ramsey interferometry on a trapped ion.

Simulation, synthetic data generation, and analysis (thermometry and
phase-space tomography) for ultrafast two-set kick interferometers.
"""

__version__ = "0.1.0"

from .core import (
    KickSequence,
    MotionalState,
    TrapConfig,
    momentum_per_kick,
    ring_alpha,
    theta_resolution,
    zero_point_momentum,
)
from .errors import FitError, InfeasibleError, TruncationError, ValidationError

__all__ = [
    "KickSequence",
    "MotionalState",
    "TrapConfig",
    "momentum_per_kick",
    "ring_alpha",
    "theta_resolution",
    "zero_point_momentum",
    "ValidationError",
    "TruncationError",
    "FitError",
    "InfeasibleError",
    "__version__",
]

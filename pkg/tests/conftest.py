import numpy as np
import pytest

from phasekick import TrapConfig


@pytest.fixture
def cfg():
    """Default trap: omega_t = 2 pi MHz, eta = 0.2, f_rep = 118 MHz."""
    return TrapConfig()


@pytest.fixture
def ideal_cfg():
    """Same trap with perfect SDK and detection fidelities."""
    return TrapConfig(detection_fidelity=1.0, sdk_fidelity=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

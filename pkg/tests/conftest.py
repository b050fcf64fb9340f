import math

import pytest

from bomca import EckartBarrier, GaussianWavepacket, PhysicalConstants


@pytest.fixture(scope="session")
def paper_setup():
    """The barrier-scattering parameter set used across the suite."""
    return {
        "consts": PhysicalConstants(m=30.0, hbar=1.0),
        "wavepacket": GaussianWavepacket(alpha=30 * math.pi, x_c=-0.7, p_c=math.sqrt(300.0)),
        "potential": EckartBarrier(D=40.0, beta=4.32),
        "t_f": 0.995,
        "clearance": 0.004,
    }

import math

import numpy as np
import pytest

from bomca.errors import ConfigError, PoleProximityError
from bomca.potentials import (
    EckartBarrier,
    FreeParticle,
    HarmonicWell,
    pole_distance,
    potential_from_config,
    potential_jet,
)


@pytest.fixture
def eckart():
    return EckartBarrier(D=40.0, beta=4.32)


def test_eckart_at_origin(eckart):
    jet = potential_jet(eckart, 0.0, 1)
    assert np.allclose(jet.coeffs, [40.0, 0.0], atol=1e-12)


def test_free_jet_zero():
    jet = potential_jet(FreeParticle(), 1.3 - 0.2j, 3)
    assert np.allclose(jet.coeffs, 0.0)


def test_harmonic_jet_quadratic():
    z = 2 + 1j
    jet = potential_jet(HarmonicWell(k=1.0), z, 3)
    assert np.allclose(jet.coeffs, [0.5 * z * z, z, 1.0, 0.0])


def test_harmonic_higher_derivatives_vanish():
    jet = potential_jet(HarmonicWell(k=3.7), 0.4 + 0.1j, 6)
    assert np.allclose(jet.coeffs[3:], 0.0)


def test_pole_distance_examples(eckart):
    assert math.isclose(pole_distance(eckart, 0.0), math.pi / (2 * 4.32), rel_tol=1e-12)
    assert pole_distance(FreeParticle(), 123.0 + 45j) == math.inf
    assert pole_distance(eckart, 1j * math.pi / (2 * 4.32)) == pytest.approx(0.0, abs=1e-15)


def test_pole_distance_lattice(eckart):
    # second pole at 3 pi / (2 beta); distances measured to the nearest one
    z = 1j * (3 * math.pi / (2 * 4.32) + 0.01) + 0.02
    assert pole_distance(eckart, z) == pytest.approx(math.hypot(0.02, 0.01), rel=1e-12)


def test_pole_proximity_raises(eckart):
    near = 1j * math.pi / (2 * 4.32) + 0.001
    with pytest.raises(PoleProximityError):
        potential_jet(eckart, near, 2, clearance=0.02)


def test_eckart_symmetry(eckart):
    """V(-x) = V(x): even derivatives match, odd ones flip sign."""
    rng = np.random.default_rng(11)
    signs = np.array([(-1.0) ** k for k in range(5)])
    for _ in range(100):
        z = complex(rng.uniform(-1.5, 1.5), rng.uniform(-0.3, 0.3))
        a = potential_jet(eckart, z, 4).coeffs
        b = potential_jet(eckart, -z, 4).coeffs
        assert np.allclose(a, signs * b, rtol=1e-11, atol=1e-11)


def test_real_axis_coefficients_real(eckart):
    rng = np.random.default_rng(12)
    for _ in range(25):
        x = float(rng.uniform(-2, 2))
        c = potential_jet(eckart, x, 4).coeffs
        assert np.max(np.abs(c.imag)) < 1e-14 * max(1.0, np.max(np.abs(c.real)))


def test_parameter_validation():
    with pytest.raises(ValueError):
        EckartBarrier(D=-1.0, beta=4.32)
    with pytest.raises(ValueError):
        EckartBarrier(D=40.0, beta=0.0)
    with pytest.raises(ValueError):
        HarmonicWell(k=-0.1)


def test_from_config():
    pot = potential_from_config({"kind": "eckart", "D": 40.0, "beta": 4.32})
    assert isinstance(pot, EckartBarrier)
    assert potential_from_config({"kind": "free"}) == FreeParticle()
    with pytest.raises(ConfigError, match="potential.kind"):
        potential_from_config({"kind": "morse"})
    with pytest.raises(ConfigError, match="potential.beta"):
        potential_from_config({"kind": "eckart", "D": 40.0})

"""Analytic potentials evaluable with all derivatives at complex arguments.

Each potential knows how to produce the jet of V at a complex point and
where its analytic continuation is singular.  The Eckart barrier
V(x) = D / cosh^2(beta x) has double poles on the imaginary axis at
x = i pi (k + 1/2) / beta; complex trajectories can drift toward them, so
every evaluation is guarded by a distance check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PoleProximityError
from .jets import Jet, jet_scale, jet_sech2, jet_variable

# Below this distance from a pole the derivative magnitudes outrun the
# integrator's step control for barrier-scale parameters; tune via config.
DEFAULT_POLE_CLEARANCE = 0.02

KERNEL_FREE = 0
KERNEL_HARMONIC = 1
KERNEL_ECKART = 2


@dataclass(frozen=True)
class PoleSet:
    """Singularity lattice of a potential's analytic continuation.

    The supported potentials are either entire (empty lattice) or have
    poles evenly spaced along the imaginary axis, so the lattice is
    described by an offset and a period; ``clearance`` is the minimum
    allowed distance.
    """

    imag_offset: float
    imag_period: float
    clearance: float
    empty: bool = False

    def __post_init__(self):
        if self.clearance <= 0:
            raise ValueError("pole clearance must be positive")

    def distance(self, x) -> float:
        if self.empty:
            return math.inf
        z = complex(x)
        k = round((z.imag - self.imag_offset) / self.imag_period)
        d = math.inf
        for kk in (k - 1, k, k + 1):
            pole_im = self.imag_offset + kk * self.imag_period
            d = min(d, math.hypot(z.real, z.imag - pole_im))
        return d


@dataclass(frozen=True)
class EckartBarrier:
    """V(x) = D / cosh^2(beta x), D > 0, beta > 0."""

    D: float
    beta: float

    kind = "eckart"

    def __post_init__(self):
        if self.D <= 0:
            raise ValueError("Eckart D must be > 0")
        if self.beta <= 0:
            raise ValueError("Eckart beta must be > 0")

    def value_jet(self, x, order: int) -> Jet:
        u = jet_scale(jet_variable(x, order), self.beta)
        return jet_scale(jet_sech2(u), self.D)

    def pole_set(self, clearance: float = DEFAULT_POLE_CLEARANCE) -> PoleSet:
        return PoleSet(
            imag_offset=math.pi / (2.0 * self.beta),
            imag_period=math.pi / self.beta,
            clearance=clearance,
        )

    def pole_distance(self, x) -> float:
        return self.pole_set().distance(x)

    @property
    def kernel_code(self):
        return KERNEL_ECKART

    @property
    def kernel_params(self):
        return (self.D, self.beta)

    def to_config(self):
        return {"kind": "eckart", "D": self.D, "beta": self.beta}


@dataclass(frozen=True)
class HarmonicWell:
    """V(x) = k x^2 / 2, k >= 0."""

    k: float

    kind = "harmonic"

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("harmonic k must be >= 0")

    def value_jet(self, x, order: int) -> Jet:
        c = np.zeros(order + 1, dtype=np.complex128)
        z = complex(x)
        c[0] = 0.5 * self.k * z * z
        if order >= 1:
            c[1] = self.k * z
        if order >= 2:
            c[2] = self.k
        return Jet(c)

    def pole_set(self, clearance: float = DEFAULT_POLE_CLEARANCE) -> PoleSet:
        return PoleSet(0.0, 1.0, clearance, empty=True)

    def pole_distance(self, x) -> float:
        return math.inf

    @property
    def kernel_code(self):
        return KERNEL_HARMONIC

    @property
    def kernel_params(self):
        return (self.k, 0.0)

    def to_config(self):
        return {"kind": "harmonic", "k": self.k}


@dataclass(frozen=True)
class FreeParticle:
    """V(x) = 0."""

    kind = "free"

    def value_jet(self, x, order: int) -> Jet:
        return Jet(np.zeros(order + 1, dtype=np.complex128))

    def pole_set(self, clearance: float = DEFAULT_POLE_CLEARANCE) -> PoleSet:
        return PoleSet(0.0, 1.0, clearance, empty=True)

    def pole_distance(self, x) -> float:
        return math.inf

    @property
    def kernel_code(self):
        return KERNEL_FREE

    @property
    def kernel_params(self):
        return (0.0, 0.0)

    def to_config(self):
        return {"kind": "free"}


def potential_jet(potential, x, order: int, clearance: float = DEFAULT_POLE_CLEARANCE) -> Jet:
    """V and its derivatives through ``order`` at complex x.

    Raises PoleProximityError when x is within ``clearance`` of a
    singularity, signalling that the trajectory must be rejected or
    flagged.
    """
    d = potential.pole_distance(x)
    if d <= clearance:
        raise PoleProximityError(complex(x), d, clearance)
    return potential.value_jet(x, order)


def pole_distance(potential, x) -> float:
    """Distance from x to the nearest singularity; +inf for entire potentials."""
    return potential.pole_distance(x)


def potential_from_config(section: dict):
    """Build a potential from its config mapping; errors name the field."""
    kind = section.get("kind")
    if kind == "eckart":
        _require(section, "potential", ("D", "beta"))
        try:
            return EckartBarrier(float(section["D"]), float(section["beta"]))
        except ValueError as exc:
            raise ConfigError(f"potential: {exc}") from exc
    if kind == "harmonic":
        _require(section, "potential", ("k",))
        try:
            return HarmonicWell(float(section["k"]))
        except ValueError as exc:
            raise ConfigError(f"potential: {exc}") from exc
    if kind == "free":
        return FreeParticle()
    raise ConfigError(f"potential.kind: expected one of eckart/harmonic/free, got {kind!r}")


def _require(section, name, keys):
    for key in keys:
        if key not in section:
            raise ConfigError(f"{name}.{key}: missing required field")

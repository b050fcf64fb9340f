"""Closed-form solutions used as independent oracles in tests and checks.

Everything here is derived on paper for Gaussian initial data and is
deliberately decoupled from the trajectory engine and the grid
propagator; three-way agreement between this module and those two is the
backbone of the validation suite.
"""

from __future__ import annotations

import math

import numpy as np

from .dynamics import GaussianWavepacket, PhysicalConstants


def free_gaussian(x, t: float, wp: GaussianWavepacket, consts: PhysicalConstants):
    """psi(x, t) of a free Gaussian packet.

    The width parameter evolves through 1 + 2 i hbar alpha t / m; the
    envelope follows the classical center x_c + p_c t / m.
    """
    x = np.asarray(x, dtype=np.complex128)
    alpha = complex(wp.alpha)
    hbar, m = consts.hbar, consts.m
    spread = 1.0 + 2j * hbar * alpha * t / m
    xi = x - wp.x_c - wp.p_c * t / m
    phase = wp.p_c * (x - wp.x_c) / hbar - wp.p_c**2 * t / (2.0 * m * hbar)
    return (
        (2.0 * alpha / math.pi) ** 0.25
        / np.sqrt(spread)
        * np.exp(-alpha * xi * xi / spread + 1j * phase)
    )


def free_final_position(x0, t: float, wp: GaussianWavepacket, consts: PhysicalConstants):
    """x(t; x0) for a free packet; linear in x0 with slope 1 + 2 i hbar alpha t / m."""
    x0 = np.asarray(x0, dtype=np.complex128)
    return x0 + wp.initial_velocity(x0, consts) * t


def free_initial_position(x_f, t: float, wp: GaussianWavepacket, consts: PhysicalConstants):
    """Inverse of the free final-position map (the unique root for each x_f)."""
    x_f = np.asarray(x_f, dtype=np.complex128)
    alpha = complex(wp.alpha)
    hbar, m = consts.hbar, consts.m
    slope = 1.0 + 2j * hbar * alpha * t / m
    offset = (wp.p_c / m - 2j * hbar * alpha * wp.x_c / m) * t
    return (x_f - offset) / slope


def coherent_center(t: float, omega: float, wp: GaussianWavepacket, consts: PhysicalConstants):
    """Classical center of a coherent state in a harmonic well."""
    return wp.x_c * math.cos(omega * t) + wp.p_c / (consts.m * omega) * math.sin(omega * t)


def coherent_state_abs(x, t: float, omega: float, wp: GaussianWavepacket, consts: PhysicalConstants):
    """|psi(x, t)| of a coherent state (requires alpha = m omega / (2 hbar)).

    The packet translates rigidly along the classical orbit without
    changing shape, so only the center moves.
    """
    alpha = complex(wp.alpha)
    expected = consts.m * omega / (2.0 * consts.hbar)
    if abs(alpha - expected) > 1e-12 * expected:
        raise ValueError("coherent state needs alpha = m omega / (2 hbar)")
    x = np.asarray(x, dtype=np.float64)
    center = coherent_center(t, omega, wp, consts)
    return (2.0 * alpha.real / math.pi) ** 0.25 * np.exp(-alpha.real * (x - center) ** 2)


def gaussian_quantum_potential(x, wp: GaussianWavepacket, consts: PhysicalConstants):
    """Q(x) = (hbar^2 alpha / m)(1 - 2 alpha (x - x_c)^2) for a real-alpha Gaussian."""
    alpha = complex(wp.alpha)
    if abs(alpha.imag) > 1e-12 * abs(alpha):
        raise ValueError("closed form assumes real alpha")
    a = alpha.real
    dx = np.asarray(x, dtype=np.float64) - wp.x_c
    return consts.hbar**2 * a / consts.m * (1.0 - 2.0 * a * dx * dx)

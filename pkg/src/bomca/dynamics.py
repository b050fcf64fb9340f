"""Equations of motion for complex quantum trajectories.

The wavefunction ansatz psi = exp(i S / hbar) with complex S turns the
Schrodinger equation into a complex Hamilton-Jacobi equation.  Along a
trajectory dx/dt = v = S_x / m the spatial derivatives of the velocity
field, v^(n), obey a coupled chain

    dv^(n)/dt = -V^(n+1)/m + (i hbar / 2m) v^(n+2) - gtilde_n,

closed at truncation order N by setting v^(N+1) = v^(N+2) = 0, where
gtilde_n collects the quadratic advection terms.  The action accumulates

    dS/dt = m v^2 / 2 - V + (i hbar / 2) v_x,

and M = dx(t)/dx0 evolves by the variational equation dM/dt = v_x M,
providing the Jacobian for Newton root finding at no extra cost.

At N = 1 the trajectories are complex classical trajectories (the quantum
force vanishes with v^(2)); at N = 2 the quantum force (i hbar / 2m) v_xx
enters and v_xx obeys dv_xx/dt = -V_xxx/m - 3 v_x v_xx.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .potentials import DEFAULT_POLE_CLEARANCE, potential_jet

# Highest truncation the compiled kernel supports (jet order N+2 stays <= 8).
MAX_TRUNCATION = 6


@dataclass(frozen=True)
class PhysicalConstants:
    """Particle mass and Planck's constant over 2 pi, in consistent units."""

    m: float
    hbar: float = 1.0

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("mass must be > 0")
        if self.hbar <= 0:
            raise ValueError("hbar must be > 0")


@dataclass(frozen=True)
class GaussianWavepacket:
    """Initial state (2 alpha / pi)^(1/4) exp(-alpha (x-x_c)^2 + i p_c (x-x_c) / hbar).

    alpha may be complex with Re(alpha) > 0; the reference experiments use
    real alpha.  Because log psi is an explicit quadratic, initial actions
    and velocity fields are single-valued closed forms with no branch-cut
    bookkeeping.
    """

    alpha: complex
    x_c: float
    p_c: float

    def __post_init__(self):
        if complex(self.alpha).real <= 0:
            raise ValueError("Re(alpha) must be > 0 for a normalizable packet")

    @property
    def norm_constant(self) -> complex:
        return (2.0 * complex(self.alpha) / math.pi) ** 0.25

    def log_psi0(self, x, hbar: float):
        """log psi(x, 0) as the explicit quadratic exponent plus log norm."""
        dx = np.asarray(x, dtype=np.complex128) - self.x_c
        return (
            0.25 * cmath.log(2.0 * complex(self.alpha) / math.pi)
            - complex(self.alpha) * dx * dx
            + 1j * self.p_c * dx / hbar
        )

    def psi0(self, x, hbar: float):
        return np.exp(self.log_psi0(x, hbar))

    def initial_action(self, x, hbar: float):
        """S(x, 0) = -i hbar log psi(x, 0), single-valued by construction."""
        return -1j * hbar * self.log_psi0(x, hbar)

    def initial_velocity(self, x, consts: PhysicalConstants):
        """v(x, 0) = (p_c + 2 i hbar alpha (x - x_c)) / m."""
        dx = np.asarray(x, dtype=np.complex128) - self.x_c
        return (self.p_c + 2j * consts.hbar * complex(self.alpha) * dx) / consts.m

    def velocity_gradient(self, consts: PhysicalConstants) -> complex:
        """v_x(x, 0) = 2 i hbar alpha / m, independent of x."""
        return 2j * consts.hbar * complex(self.alpha) / consts.m


@dataclass
class TrajectoryState:
    """Instantaneous record of one complex trajectory.

    v[n] is the n-th spatial derivative of the velocity field evaluated
    along the trajectory; len(v) = N + 1 fixes the truncation order for
    the run.  M tracks dx(t)/dx0.
    """

    t: float
    x: complex
    v: np.ndarray
    S: complex
    M: complex = 1.0 + 0.0j

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=np.complex128)
        if self.v.ndim != 1 or self.v.size < 2:
            raise ValueError("v must hold v[0..N] with N >= 1")

    @property
    def n_trunc(self) -> int:
        return self.v.size - 1

    def is_finite(self) -> bool:
        vals = [self.x, self.S, self.M, *self.v.tolist()]
        return all(math.isfinite(z.real) and math.isfinite(z.imag) for z in map(complex, vals))


def initial_state(
    wavepacket: GaussianWavepacket,
    x0,
    n_trunc: int,
    consts: PhysicalConstants,
) -> TrajectoryState:
    """Initial trajectory data at complex starting point x0.

    v[0] and v[1] follow from differentiating -i hbar psi_x / psi of the
    Gaussian; all higher derivatives of a quadratic log psi vanish.
    """
    if n_trunc < 1:
        raise ValueError("truncation order must be >= 1 (the action equation needs v_x)")
    if n_trunc > MAX_TRUNCATION:
        raise ValueError(f"truncation order {n_trunc} exceeds supported maximum {MAX_TRUNCATION}")
    v = np.zeros(n_trunc + 1, dtype=np.complex128)
    v[0] = wavepacket.initial_velocity(x0, consts)
    v[1] = wavepacket.velocity_gradient(consts)
    return TrajectoryState(
        t=0.0,
        x=complex(x0),
        v=v,
        S=complex(wavepacket.initial_action(x0, consts.hbar)),
        M=1.0 + 0.0j,
    )


def gtilde(n: int, v) -> complex:
    """Quadratic advection coupling: sum_{j=1..n} C(n,j) v[j] v[n-j+1].

    Entries of v beyond the stored truncation are treated as zero.
    """
    if n == 0:
        return 0.0 + 0.0j
    acc = 0.0 + 0.0j
    for j in range(1, n + 1):
        a = v[j] if j < len(v) else 0.0
        b = v[n - j + 1] if n - j + 1 < len(v) else 0.0
        acc += math.comb(n, j) * a * b
    return acc


def hierarchy_rhs(
    state: TrajectoryState,
    potential,
    consts: PhysicalConstants,
    clearance: float = DEFAULT_POLE_CLEARANCE,
):
    """Time derivatives (dx, dv, dS, dM) of a trajectory state.

    Scalar reference implementation; the batched integration kernels in
    ``bomca.core`` reproduce it and are tested against it.
    """
    n = state.n_trunc
    vjet = potential_jet(potential, state.x, n + 1, clearance)
    vc = vjet.coeffs
    m = consts.m
    hbar = consts.hbar
    quantum_factor = 0.5j * hbar / m

    dx = complex(state.v[0])
    dv = np.zeros(n + 1, dtype=np.complex128)
    for k in range(n + 1):
        v_k2 = state.v[k + 2] if k + 2 <= n else 0.0
        dv[k] = -vc[k + 1] / m + quantum_factor * v_k2 - gtilde(k, state.v)
    dS = 0.5 * m * state.v[0] ** 2 - vc[0] + 0.5j * hbar * state.v[1]
    dM = state.v[1] * state.M
    return dx, dv, complex(dS), complex(dM)

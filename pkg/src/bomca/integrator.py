"""Adaptive propagation of trajectory states to a fixed final time.

The numerical scheme is an embedded Dormand-Prince 5(4) pair with PI
step-size control, applied to the complex state (x, v[0..N], S, M).  The
per-component error scale mixes an absolute floor, weighted by each
component's characteristic magnitude, with a relative term; without the
weights the higher velocity derivatives (which grow like alpha^(n/2))
would dominate step control.

The actual stepping happens in the selected ``bomca.core`` kernel; this
module owns configuration, state packing and the typed error surface.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import core
from .core import TrajectoryStatus
from .dynamics import GaussianWavepacket, PhysicalConstants, TrajectoryState
from .errors import (
    ActionOverflowError,
    MaxStepsExceededError,
    PoleProximityError,
    StepSizeUnderflowError,
)
from .potentials import DEFAULT_POLE_CLEARANCE

# exp(|Im S|/hbar) must stay inside double range during integration; the
# reconstruction layer applies its own much tighter amplitude cap.
ACTION_IM_LIMIT = 700.0


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and step bounds; max_steps budgets accepted plus rejected steps."""

    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    h_init: float = 1e-4
    h_min: float = 1e-12
    h_max: float | None = None  # None resolves to t_f / 100
    max_steps: int = 10**6

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if not 0 < self.h_min <= self.h_init:
            raise ValueError("require 0 < h_min <= h_init")
        if self.h_max is not None and self.h_max < self.h_init:
            raise ValueError("require h_init <= h_max")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be > 0")

    def resolved_h_max(self, t_f: float) -> float:
        return self.h_max if self.h_max is not None else t_f / 100.0


@dataclass
class StepDiagnostics:
    n_steps: int
    n_rejected: int
    min_pole_distance: float


def error_weights(alpha, n_trunc: int, hbar: float) -> np.ndarray:
    """Characteristic magnitudes for (x, v[0..N], S, M) used as absolute-error scales.

    v[n] carries one inverse length per derivative order, and the packet
    width sets the length scale, so its weight is |alpha|^(n/2).
    """
    a = abs(complex(alpha))
    w = np.empty(n_trunc + 4, dtype=np.float64)
    w[0] = 1.0
    for n in range(n_trunc + 1):
        w[1 + n] = a ** (0.5 * n)
    w[n_trunc + 2] = hbar
    w[n_trunc + 3] = 1.0
    return w


def pack_state(state: TrajectoryState) -> np.ndarray:
    y = np.empty(state.n_trunc + 4, dtype=np.complex128)
    y[0] = state.x
    y[1 : state.n_trunc + 2] = state.v
    y[state.n_trunc + 2] = state.S
    y[state.n_trunc + 3] = state.M
    return y


def unpack_state(y: np.ndarray, t: float, n_trunc: int) -> TrajectoryState:
    return TrajectoryState(
        t=t,
        x=complex(y[0]),
        v=y[1 : n_trunc + 2].copy(),
        S=complex(y[n_trunc + 2]),
        M=complex(y[n_trunc + 3]),
    )


_STATUS_ERRORS = {
    TrajectoryStatus.STEP_UNDERFLOW: StepSizeUnderflowError,
    TrajectoryStatus.MAX_STEPS: MaxStepsExceededError,
    TrajectoryStatus.OVERFLOW: ActionOverflowError,
}


def raise_for_status(status: int, x, min_pole_distance: float, clearance: float):
    code = TrajectoryStatus(int(status))
    if code == TrajectoryStatus.OK:
        return
    if code == TrajectoryStatus.POLE:
        raise PoleProximityError(complex(x), float(min_pole_distance), clearance)
    raise _STATUS_ERRORS[code](f"trajectory failed: {code.name.lower()}")


def propagate(
    state0: TrajectoryState,
    potential,
    t_f: float,
    cfg: IntegratorConfig,
    consts: PhysicalConstants,
    weights: np.ndarray | None = None,
    clearance: float = DEFAULT_POLE_CLEARANCE,
) -> tuple[TrajectoryState, StepDiagnostics]:
    """Propagate one trajectory state to exactly t_f.

    Raises the typed error matching the failure mode; on success the
    returned state's time equals t_f bitwise (the last step is clipped).
    """
    if not state0.t < t_f:
        raise ValueError("require state0.t < t_f")
    n = state0.n_trunc
    if weights is None:
        weights = np.ones(n + 4)
    p1, p2 = potential.kernel_params
    y, status, nsteps, nrej, minpole = core.propagate_final_batch(
        pack_state(state0)[None, :],
        state0.t,
        t_f,
        potential.kernel_code,
        p1,
        p2,
        n,
        consts.m,
        consts.hbar,
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.h_init,
        cfg.h_min,
        cfg.resolved_h_max(t_f),
        cfg.max_steps,
        weights,
        clearance,
        ACTION_IM_LIMIT,
    )
    diagnostics = StepDiagnostics(int(nsteps[0]), int(nrej[0]), float(minpole[0]))
    raise_for_status(status[0], y[0, 0], minpole[0], clearance)
    return unpack_state(y[0], t_f, n), diagnostics


@dataclass
class FinalBatch:
    """Endpoint data for a batch of trajectories launched from x0."""

    x0: np.ndarray
    y: np.ndarray
    status: np.ndarray
    n_steps: np.ndarray
    n_rejected: np.ndarray
    min_pole_distance: np.ndarray
    n_trunc: int

    @property
    def x(self) -> np.ndarray:
        return self.y[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.y[:, 1 : self.n_trunc + 2]

    @property
    def S(self) -> np.ndarray:
        return self.y[:, self.n_trunc + 2]

    @property
    def M(self) -> np.ndarray:
        return self.y[:, self.n_trunc + 3]

    @property
    def ok(self) -> np.ndarray:
        return self.status == int(TrajectoryStatus.OK)


class BatchPropagator:
    """Maps complex starting points to trajectory endpoints at t_f.

    Bundles the wavepacket, potential, constants and integrator settings
    for one experiment, builds the Gaussian initial data for arbitrary
    batches of x0, and fans work across threads when asked (the compiled
    kernel releases the GIL, so threads give real parallelism there).
    Results are deterministic and independent of batch composition and
    thread count.
    """

    def __init__(
        self,
        wavepacket: GaussianWavepacket,
        potential,
        n_trunc: int,
        t_f: float,
        consts: PhysicalConstants,
        cfg: IntegratorConfig | None = None,
        clearance: float = DEFAULT_POLE_CLEARANCE,
        threads: int = 1,
    ):
        if n_trunc < 1:
            raise ValueError("truncation order must be >= 1")
        self.wavepacket = wavepacket
        self.potential = potential
        self.n_trunc = n_trunc
        self.t_f = t_f
        self.consts = consts
        self.cfg = cfg or IntegratorConfig()
        self.clearance = clearance
        self.threads = max(1, int(threads))
        self.weights = error_weights(wavepacket.alpha, n_trunc, consts.hbar)

    def initial_batch(self, x0) -> np.ndarray:
        """Gaussian initial data packed as a (B, K) state block."""
        x0 = np.atleast_1d(np.asarray(x0, dtype=np.complex128))
        n = self.n_trunc
        y = np.zeros((x0.size, n + 4), dtype=np.complex128)
        y[:, 0] = x0
        y[:, 1] = self.wavepacket.initial_velocity(x0, self.consts)
        y[:, 2] = self.wavepacket.velocity_gradient(self.consts)
        y[:, n + 2] = self.wavepacket.initial_action(x0, self.consts.hbar)
        y[:, n + 3] = 1.0
        return y

    def propagate_block(self, y0: np.ndarray, t0: float = 0.0) -> FinalBatch:
        """Integrate an explicit state block (used by tests and reversal checks)."""
        p1, p2 = self.potential.kernel_params
        args = (
            self.potential.kernel_code,
            p1,
            p2,
            self.n_trunc,
            self.consts.m,
            self.consts.hbar,
            self.cfg.rel_tol,
            self.cfg.abs_tol,
            self.cfg.h_init,
            self.cfg.h_min,
            self.cfg.resolved_h_max(self.t_f - t0),
            self.cfg.max_steps,
            self.weights,
            self.clearance,
            ACTION_IM_LIMIT,
        )
        batch = y0.shape[0]
        if self.threads == 1 or batch < 2 * self.threads:
            y, status, nsteps, nrej, minpole = core.propagate_final_batch(
                y0, t0, self.t_f, *args
            )
        else:
            y = np.empty_like(y0)
            status = np.empty(batch, dtype=np.uint8)
            nsteps = np.empty(batch, dtype=np.int64)
            nrej = np.empty(batch, dtype=np.int64)
            minpole = np.empty(batch)
            bounds = np.linspace(0, batch, self.threads + 1, dtype=int)
            chunks = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

            def run(sl):
                out = core.propagate_final_batch(y0[sl], t0, self.t_f, *args)
                y[sl], status[sl], nsteps[sl], nrej[sl], minpole[sl] = out

            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                list(pool.map(run, chunks))
        return FinalBatch(y0[:, 0].copy(), y, status, nsteps, nrej, minpole, self.n_trunc)

    def final_states(self, x0) -> FinalBatch:
        """Launch trajectories from complex starting points x0 and return endpoints."""
        x0 = np.atleast_1d(np.asarray(x0, dtype=np.complex128))
        batch = self.propagate_block(self.initial_batch(x0))
        batch.x0 = x0
        return batch

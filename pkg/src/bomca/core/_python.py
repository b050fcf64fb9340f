"""Pure-numpy trajectory integration kernel.

Batched, lockstep implementation of the adaptive Dormand-Prince 5(4)
integrator for the truncated velocity-derivative hierarchy.  Every
trajectory keeps its own step size, error history and counters, so the
results are identical to integrating each trajectory alone; batching is
purely a vectorization device.  The compiled backend in ``_native.pyx``
implements the same arithmetic trajectory-by-trajectory.

State layout per trajectory (K = n_trunc + 4 complex entries):

    y[0]                 x        position
    y[1 .. n_trunc+1]    v[n]     velocity-field derivatives
    y[n_trunc+2]         S        action
    y[n_trunc+3]         M        dx(t)/dx0
"""

from __future__ import annotations

import math

import numpy as np

from ._status import TrajectoryStatus

# Dormand-Prince 5(4) tableau (FSAL; first row of A below is a2j, etc.).
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

# PI step controller constants, shared verbatim with the native backend.
SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0
BETA1 = 0.14
BETA2 = 0.08
REJECT_EXP = -0.2
REJECT_FAC_MIN = 0.1
ERR_FLOOR = 1e-10

_FACTORIAL = [math.factorial(k) for k in range(12)]
_BINOM = [[math.comb(n, k) for k in range(n + 1)] for n in range(12)]

FREE, HARMONIC, ECKART = 0, 1, 2


def potential_derivs(x, order, code, p1, p2):
    """V^(k)(x) for k = 0..order as an (order+1, B) complex array."""
    x = np.asarray(x, dtype=np.complex128)
    out = np.zeros((order + 1,) + x.shape, dtype=np.complex128)
    if code == FREE:
        return out
    if code == HARMONIC:
        out[0] = 0.5 * p1 * x * x
        if order >= 1:
            out[1] = p1 * x
        if order >= 2:
            out[2] = p1
        return out
    # Eckart: D / cosh^2(beta x) via Taylor recurrences around the point.
    d_barrier, beta = p1, p2
    u = beta * x
    c = np.zeros_like(out)
    s = np.zeros_like(out)
    c[0] = np.cosh(u)
    s[0] = np.sinh(u)
    for k in range(1, order + 1):
        c[k] = s[k - 1] / k
        s[k] = c[k - 1] / k
    w = np.zeros_like(out)
    for k in range(order + 1):
        for j in range(k + 1):
            w[k] += c[j] * c[k - j]
    r = np.zeros_like(out)
    r[0] = 1.0 / w[0]
    for k in range(1, order + 1):
        acc = w[1] * r[k - 1]
        for j in range(2, k + 1):
            acc = acc + w[j] * r[k - j]
        r[k] = -acc / w[0]
    scale = d_barrier
    for k in range(order + 1):
        out[k] = scale * _FACTORIAL[k] * r[k]
        scale *= beta
    return out


def rhs(y, code, p1, p2, n_trunc, mass, hbar):
    """Hierarchy right-hand side for a (B, K) state block."""
    x = y[:, 0]
    v = y[:, 1 : n_trunc + 2]
    vder = potential_derivs(x, n_trunc + 1, code, p1, p2)
    dy = np.empty_like(y)
    dy[:, 0] = v[:, 0]
    qf = 0.5j * hbar / mass
    for k in range(n_trunc + 1):
        acc = -vder[k + 1] / mass
        if k + 2 <= n_trunc:
            acc = acc + qf * v[:, k + 2]
        if k >= 1:
            g = _BINOM[k][1] * v[:, 1] * v[:, k]
            for j in range(2, k + 1):
                g = g + _BINOM[k][j] * v[:, j] * v[:, k - j + 1]
            acc = acc - g
        dy[:, 1 + k] = acc
    dy[:, n_trunc + 2] = 0.5 * mass * v[:, 0] ** 2 - vder[0] + 0.5j * hbar * v[:, 1]
    dy[:, n_trunc + 3] = v[:, 1] * y[:, n_trunc + 3]
    return dy


def rhs_single(y, code, p1, p2, n_trunc, mass, hbar):
    """Single-state convenience wrapper used by tests."""
    return rhs(np.asarray(y, dtype=np.complex128)[None, :], code, p1, p2, n_trunc, mass, hbar)[0]


def _pole_distance(x, code, p2):
    if code != ECKART:
        return np.full(np.shape(x), np.inf)
    period = math.pi / p2
    offset = 0.5 * period
    im = x.imag
    nearest = offset + period * np.round((im - offset) / period)
    return np.hypot(x.real, im - nearest)


def propagate_final_batch(
    y0,
    t0,
    t_f,
    pot_code,
    pot_p1,
    pot_p2,
    n_trunc,
    mass,
    hbar,
    rel_tol,
    abs_tol,
    h_init,
    h_min,
    h_max,
    max_steps,
    weights,
    pole_clearance,
    action_im_limit,
):
    """Integrate a batch of trajectories from t0 to exactly t_f.

    Returns (y_final, status, n_steps, n_rejected, min_pole_distance);
    trajectories that fail carry their state at the failure point and a
    nonzero status code.
    """
    y0 = np.ascontiguousarray(y0, dtype=np.complex128)
    if y0.ndim != 2 or y0.shape[1] != n_trunc + 4:
        raise ValueError("y0 must have shape (B, n_trunc + 4)")
    batch = y0.shape[0]
    k_dim = y0.shape[1]
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (k_dim,):
        raise ValueError("weights must have shape (n_trunc + 4,)")
    if not t0 < t_f:
        raise ValueError("require t0 < t_f")

    y_out = y0.copy()
    status = np.zeros(batch, dtype=np.uint8)
    nsteps_out = np.zeros(batch, dtype=np.int64)
    nrej_out = np.zeros(batch, dtype=np.int64)
    minpole_out = np.full(batch, np.inf)
    if batch == 0:
        return y_out, status, nsteps_out, nrej_out, minpole_out

    idx = np.arange(batch)
    y = y0.copy()
    t = np.full(batch, float(t0))
    h = np.full(batch, min(max(h_init, h_min), h_max, t_f - t0))
    err_prev = np.full(batch, 1.0)
    rejected_last = np.zeros(batch, dtype=bool)
    nsteps = np.zeros(batch, dtype=np.int64)
    nrej = np.zeros(batch, dtype=np.int64)
    minpole = _pole_distance(y[:, 0], pot_code, pot_p2)

    def retire(codes):
        """Move rows with a non-negative code to their output slots."""
        nonlocal idx, y, t, h, err_prev, rejected_last, nsteps, nrej, minpole, k1
        done = codes >= 0
        rows = np.flatnonzero(done)
        if rows.size == 0:
            return
        slots = idx[rows]
        y_out[slots] = y[rows]
        status[slots] = codes[rows].astype(np.uint8)
        nsteps_out[slots] = nsteps[rows]
        nrej_out[slots] = nrej[rows]
        minpole_out[slots] = minpole[rows]
        keep = ~done
        idx = idx[keep]
        y = y[keep]
        t = t[keep]
        h = h[keep]
        err_prev = err_prev[keep]
        rejected_last = rejected_last[keep]
        nsteps = nsteps[keep]
        nrej = nrej[keep]
        minpole = minpole[keep]
        k1 = k1[keep]

    def termination_codes(reached):
        """Highest-priority status per row, -1 where integration continues."""
        codes = np.full(idx.size, -1, dtype=np.int64)
        codes[h < h_min] = int(TrajectoryStatus.STEP_UNDERFLOW)
        codes[reached] = int(TrajectoryStatus.OK)
        codes[np.abs(y[:, n_trunc + 2].imag) / hbar > action_im_limit] = int(
            TrajectoryStatus.OVERFLOW
        )
        codes[minpole <= pole_clearance] = int(TrajectoryStatus.POLE)
        return codes

    with np.errstate(all="ignore"):
        k1 = rhs(y, pot_code, pot_p1, pot_p2, n_trunc, mass, hbar)
        # Starting point may already violate the clearance or overflow guard.
        retire(termination_codes(np.zeros(idx.size, dtype=bool)))

        while idx.size:
            budget = nsteps + nrej >= max_steps
            if np.any(budget):
                codes = np.where(budget, int(TrajectoryStatus.MAX_STEPS), -1)
                retire(codes)
                if not idx.size:
                    break

            hs = np.minimum(h, t_f - t)
            clipped = hs >= (t_f - t)
            hb = hs[:, None]

            y2 = y + hb * (A21 * k1)
            k2 = rhs(y2, pot_code, pot_p1, pot_p2, n_trunc, mass, hbar)
            y3 = y + hb * (A31 * k1 + A32 * k2)
            k3 = rhs(y3, pot_code, pot_p1, pot_p2, n_trunc, mass, hbar)
            y4 = y + hb * (A41 * k1 + A42 * k2 + A43 * k3)
            k4 = rhs(y4, pot_code, pot_p1, pot_p2, n_trunc, mass, hbar)
            y5 = y + hb * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)
            k5 = rhs(y5, pot_code, pot_p1, pot_p2, n_trunc, mass, hbar)
            y6 = y + hb * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)
            k6 = rhs(y6, pot_code, pot_p1, pot_p2, n_trunc, mass, hbar)
            y7 = y + hb * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
            k7 = rhs(y7, pot_code, pot_p1, pot_p2, n_trunc, mass, hbar)

            err_vec = hb * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
            scale = abs_tol * weights[None, :] + rel_tol * np.maximum(np.abs(y), np.abs(y7))
            err = np.sqrt(np.mean((np.abs(err_vec) / scale) ** 2, axis=1))
            finite = np.isfinite(y7).all(axis=1) & np.isfinite(err)
            err = np.where(finite, err, np.inf)
            accept = err <= 1.0

            # Accepted rows advance; the last step lands on t_f bitwise.
            if np.any(accept):
                rows = accept
                y[rows] = y7[rows]
                k1[rows] = k7[rows]
                t[rows] = np.where(clipped[rows], t_f, t[rows] + hs[rows])
                nsteps[rows] += 1
                d = _pole_distance(y[rows, 0], pot_code, pot_p2)
                minpole[rows] = np.minimum(minpole[rows], d)
                e = np.maximum(err[rows], ERR_FLOOR)
                fac = SAFETY * e**-BETA1 * np.maximum(err_prev[rows], ERR_FLOOR) ** BETA2
                fac = np.where(rejected_last[rows], np.minimum(fac, 1.0), fac)
                h[rows] = hs[rows] * np.clip(fac, FAC_MIN, FAC_MAX)
                err_prev[rows] = e
                rejected_last[rows] = False

            if np.any(~accept):
                rows = ~accept
                nrej[rows] += 1
                fac = np.where(
                    np.isfinite(err[rows]),
                    np.clip(SAFETY * err[rows] ** REJECT_EXP, REJECT_FAC_MIN, 1.0),
                    REJECT_FAC_MIN,
                )
                h[rows] = hs[rows] * fac
                rejected_last[rows] = True

            h = np.minimum(h, h_max)

            retire(termination_codes(reached=t >= t_f))

    return y_out, status, nsteps_out, nrej_out, minpole_out

# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled trajectory integration kernel.

Trajectory-by-trajectory port of the numpy backend in ``_python.py``:
same Dormand-Prince 5(4) tableau, same PI controller constants, same
state layout and termination codes.  The batch loop releases the GIL so
callers can spread chunks across threads.
"""

import numpy as np

from libc.math cimport INFINITY, M_PI, fabs, fmax, hypot, isfinite, isnan, pow, round, sqrt


cdef extern from "complex.h" nogil:
    double complex ccosh(double complex)
    double complex csinh(double complex)
    double cabs(double complex)

DEF MAX_K = 12
DEF MAX_ORDER = 9

# Dormand-Prince 5(4) tableau.
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double A71 = 35.0 / 384.0, A73 = 500.0 / 1113.0, A74 = 125.0 / 192.0
cdef double A75 = -2187.0 / 6784.0, A76 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0

# PI step controller, shared verbatim with the python backend.
cdef double SAFETY = 0.9
cdef double FAC_MIN = 0.2
cdef double FAC_MAX = 5.0
cdef double BETA1 = 0.14
cdef double BETA2 = 0.08
cdef double REJECT_EXP = -0.2
cdef double REJECT_FAC_MIN = 0.1
cdef double ERR_FLOOR = 1e-10

cdef int ST_OK = 0
cdef int ST_POLE = 1
cdef int ST_UNDERFLOW = 2
cdef int ST_MAX_STEPS = 3
cdef int ST_OVERFLOW = 4

cdef int FREE = 0
cdef int HARMONIC = 1
cdef int ECKART = 2

cdef double FACT[MAX_ORDER + 1]
cdef double BINOM[MAX_ORDER + 1][MAX_ORDER + 1]

FACT[0] = 1.0
for _k in range(1, MAX_ORDER + 1):
    FACT[_k] = FACT[_k - 1] * _k
for _n in range(MAX_ORDER + 1):
    BINOM[_n][0] = 1.0
    for _k in range(1, _n + 1):
        BINOM[_n][_k] = BINOM[_n][_k - 1] * (_n - _k + 1) / _k


cdef void _potential_derivs(double complex x, int order, int code,
                            double p1, double p2, double complex* out) noexcept nogil:
    cdef int k, j
    cdef double complex u, acc
    cdef double complex c[MAX_ORDER + 1]
    cdef double complex s[MAX_ORDER + 1]
    cdef double complex w[MAX_ORDER + 1]
    cdef double complex r[MAX_ORDER + 1]
    cdef double scale
    for k in range(order + 1):
        out[k] = 0.0
    if code == FREE:
        return
    if code == HARMONIC:
        out[0] = 0.5 * p1 * x * x
        if order >= 1:
            out[1] = p1 * x
        if order >= 2:
            out[2] = p1
        return
    u = p2 * x
    c[0] = ccosh(u)
    s[0] = csinh(u)
    for k in range(1, order + 1):
        c[k] = s[k - 1] / k
        s[k] = c[k - 1] / k
    for k in range(order + 1):
        acc = 0.0
        for j in range(k + 1):
            acc = acc + c[j] * c[k - j]
        w[k] = acc
    r[0] = 1.0 / w[0]
    for k in range(1, order + 1):
        acc = 0.0
        for j in range(1, k + 1):
            acc = acc + w[j] * r[k - j]
        r[k] = -acc / w[0]
    scale = p1
    for k in range(order + 1):
        out[k] = scale * FACT[k] * r[k]
        scale *= p2


cdef void _rhs(double complex* y, double complex* dy, int code, double p1, double p2,
               int n, double mass, double hbar) noexcept nogil:
    cdef double complex vder[MAX_ORDER + 2]
    cdef double complex acc, g
    cdef double complex qf = hbar / (2.0 * mass) * 1j
    cdef int k, j
    _potential_derivs(y[0], n + 1, code, p1, p2, vder)
    dy[0] = y[1]
    for k in range(n + 1):
        acc = -vder[k + 1] / mass
        if k + 2 <= n:
            acc = acc + qf * y[1 + k + 2]
        if k >= 1:
            g = BINOM[k][1] * y[2] * y[1 + k]
            for j in range(2, k + 1):
                g = g + BINOM[k][j] * y[1 + j] * y[1 + k - j + 1]
            acc = acc - g
        dy[1 + k] = acc
    dy[n + 2] = 0.5 * mass * y[1] * y[1] - vder[0] + 0.5 * hbar * 1j * y[2]
    dy[n + 3] = y[2] * y[n + 3]


cdef double _pole_distance(double complex x, int code, double p2) noexcept nogil:
    cdef double period, offset, im, nearest
    if code != ECKART:
        return INFINITY
    period = M_PI / p2
    offset = 0.5 * period
    im = x.imag
    nearest = offset + period * round((im - offset) / period)
    return hypot(x.real, im - nearest)


cdef int _propagate_one(double complex* y, double t0, double t_f,
                        int code, double p1, double p2, int n,
                        double mass, double hbar,
                        double rel_tol, double abs_tol,
                        double h_init, double h_min, double h_max,
                        long long max_steps, double* w,
                        double clearance, double im_limit,
                        long long* nsteps_out, long long* nrej_out,
                        double* minpole_out) noexcept nogil:
    cdef double complex k1[MAX_K]
    cdef double complex k2[MAX_K]
    cdef double complex k3[MAX_K]
    cdef double complex k4[MAX_K]
    cdef double complex k5[MAX_K]
    cdef double complex k6[MAX_K]
    cdef double complex k7[MAX_K]
    cdef double complex ytmp[MAX_K]
    cdef double complex y5[MAX_K]
    cdef double complex ev
    cdef int kk = n + 4
    cdef int i, finite, status, clipped
    cdef double t = t0
    cdef double h, hs, err, err_prev, fac, sc, a, d, minpole
    cdef long long nsteps = 0, nrej = 0
    cdef int rejected = 0

    h = h_init
    if h < h_min:
        h = h_min
    if h > h_max:
        h = h_max
    if h > t_f - t0:
        h = t_f - t0
    err_prev = 1.0
    minpole = _pole_distance(y[0], code, p2)

    status = -1
    if h < h_min:
        status = ST_UNDERFLOW
    if fabs(y[n + 2].imag) / hbar > im_limit:
        status = ST_OVERFLOW
    if minpole <= clearance:
        status = ST_POLE
    if status >= 0:
        nsteps_out[0] = nsteps
        nrej_out[0] = nrej
        minpole_out[0] = minpole
        return status

    _rhs(y, k1, code, p1, p2, n, mass, hbar)
    while True:
        if nsteps + nrej >= max_steps:
            status = ST_MAX_STEPS
            break

        hs = t_f - t
        clipped = 1
        if h < hs:
            hs = h
            clipped = 0

        for i in range(kk):
            ytmp[i] = y[i] + hs * (A21 * k1[i])
        _rhs(ytmp, k2, code, p1, p2, n, mass, hbar)
        for i in range(kk):
            ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i])
        _rhs(ytmp, k3, code, p1, p2, n, mass, hbar)
        for i in range(kk):
            ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        _rhs(ytmp, k4, code, p1, p2, n, mass, hbar)
        for i in range(kk):
            ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        _rhs(ytmp, k5, code, p1, p2, n, mass, hbar)
        for i in range(kk):
            ytmp[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                   + A64 * k4[i] + A65 * k5[i])
        _rhs(ytmp, k6, code, p1, p2, n, mass, hbar)
        for i in range(kk):
            y5[i] = y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i]
                                 + A75 * k5[i] + A76 * k6[i])
        _rhs(y5, k7, code, p1, p2, n, mass, hbar)

        finite = 1
        for i in range(kk):
            if not (isfinite(y5[i].real) and isfinite(y5[i].imag)):
                finite = 0
                break
        if finite:
            err = 0.0
            for i in range(kk):
                ev = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i]
                           + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
                sc = abs_tol * w[i] + rel_tol * fmax(cabs(y[i]), cabs(y5[i]))
                a = cabs(ev) / sc
                err += a * a
            err = sqrt(err / kk)
            if isnan(err):
                err = INFINITY
        else:
            err = INFINITY

        if err <= 1.0:
            for i in range(kk):
                y[i] = y5[i]
                k1[i] = k7[i]
            if clipped:
                t = t_f
            else:
                t = t + hs
            nsteps += 1
            d = _pole_distance(y[0], code, p2)
            if d < minpole:
                minpole = d
            a = fmax(err, ERR_FLOOR)
            fac = SAFETY * pow(a, -BETA1) * pow(fmax(err_prev, ERR_FLOOR), BETA2)
            if rejected and fac > 1.0:
                fac = 1.0
            if fac < FAC_MIN:
                fac = FAC_MIN
            if fac > FAC_MAX:
                fac = FAC_MAX
            h = hs * fac
            err_prev = a
            rejected = 0
        else:
            nrej += 1
            if isfinite(err):
                fac = SAFETY * pow(err, REJECT_EXP)
                if fac < REJECT_FAC_MIN:
                    fac = REJECT_FAC_MIN
                if fac > 1.0:
                    fac = 1.0
            else:
                fac = REJECT_FAC_MIN
            h = hs * fac
            rejected = 1

        if h > h_max:
            h = h_max

        status = -1
        if h < h_min:
            status = ST_UNDERFLOW
        if t >= t_f:
            status = ST_OK
        if fabs(y[n + 2].imag) / hbar > im_limit:
            status = ST_OVERFLOW
        if minpole <= clearance:
            status = ST_POLE
        if status >= 0:
            break

    nsteps_out[0] = nsteps
    nrej_out[0] = nrej
    minpole_out[0] = minpole
    return status


def propagate_final_batch(
    y0,
    double t0,
    double t_f,
    int pot_code,
    double pot_p1,
    double pot_p2,
    int n_trunc,
    double mass,
    double hbar,
    double rel_tol,
    double abs_tol,
    double h_init,
    double h_min,
    double h_max,
    max_steps,
    weights,
    double pole_clearance,
    double action_im_limit,
):
    """Integrate a batch of trajectories from t0 to exactly t_f.

    Mirrors ``bomca.core._python.propagate_final_batch``.
    """
    cdef double complex[:, ::1] yv
    cdef double[::1] wv
    cdef unsigned char[::1] statusv
    cdef long long[::1] nstepsv
    cdef long long[::1] nrejv
    cdef double[::1] minpolev
    cdef Py_ssize_t b, batch
    cdef long long msteps = int(max_steps)
    cdef int st

    y0 = np.ascontiguousarray(y0, dtype=np.complex128)
    if y0.ndim != 2 or y0.shape[1] != n_trunc + 4:
        raise ValueError("y0 must have shape (B, n_trunc + 4)")
    if n_trunc + 4 > MAX_K:
        raise ValueError("truncation order too large for the compiled kernel")
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if weights.shape != (n_trunc + 4,):
        raise ValueError("weights must have shape (n_trunc + 4,)")
    if not t0 < t_f:
        raise ValueError("require t0 < t_f")

    batch = y0.shape[0]
    y_out = y0.copy()
    status = np.zeros(batch, dtype=np.uint8)
    nsteps = np.zeros(batch, dtype=np.int64)
    nrej = np.zeros(batch, dtype=np.int64)
    minpole = np.full(batch, np.inf)
    if batch == 0:
        return y_out, status, nsteps, nrej, minpole

    yv = y_out
    wv = weights
    statusv = status
    nstepsv = nsteps
    nrejv = nrej
    minpolev = minpole

    with nogil:
        for b in range(batch):
            st = _propagate_one(
                &yv[b, 0], t0, t_f, pot_code, pot_p1, pot_p2, n_trunc,
                mass, hbar, rel_tol, abs_tol, h_init, h_min, h_max,
                msteps, &wv[0], pole_clearance, action_im_limit,
                &nstepsv[b], &nrejv[b], &minpolev[b],
            )
            statusv[b] = <unsigned char> st

    return y_out, status, nsteps, nrej, minpole


def rhs_single(y, int pot_code, double pot_p1, double pot_p2, int n_trunc,
               double mass, double hbar):
    """Single-state hierarchy right-hand side (test hook)."""
    cdef double complex yb[MAX_K]
    cdef double complex db[MAX_K]
    cdef int i
    y = np.ascontiguousarray(y, dtype=np.complex128)
    if y.ndim != 1 or y.shape[0] != n_trunc + 4:
        raise ValueError("y must have shape (n_trunc + 4,)")
    if n_trunc + 4 > MAX_K:
        raise ValueError("truncation order too large for the compiled kernel")
    for i in range(n_trunc + 4):
        yb[i] = y[i]
    _rhs(yb, db, pot_code, pot_p1, pot_p2, n_trunc, mass, hbar)
    out = np.empty(n_trunc + 4, dtype=np.complex128)
    for i in range(n_trunc + 4):
        out[i] = db[i]
    return out

"""Truncated Taylor (jet) arithmetic over complex scalars.

A jet of order M stores the values of a function and its first M
derivatives at a single complex point.  Coefficients use the derivative
convention: ``coeffs[k]`` holds f^(k)(x), not the Taylor coefficient
f^(k)(x)/k!.  With this convention the Leibniz product rule becomes a
binomial convolution, which is the same combinatorial structure as the
quadratic coupling terms in the velocity-derivative equations of motion,
so the physics layer never handles factorials.

Elementary-function jets (exp, cosh, sech^2, 1/u) are computed with the
standard Taylor-mode recurrences after an internal conversion to
normalized coefficients.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import JetOrderMismatchError, NonFiniteError, PoleProximityError

# Below this magnitude the leading value of cosh (or a recip operand) is
# treated as a pole hit rather than risking overflow downstream.
EPS_POLE = 1e-8


class Jet:
    """Value plus derivatives of an analytic function at one complex point."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=np.complex128)
        if c.ndim != 1 or c.size < 1:
            raise ValueError("jet coefficients must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(c.view(np.float64))):
            raise NonFiniteError(f"non-finite jet coefficients: {c}")
        self.coeffs = c

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @property
    def value(self) -> complex:
        return complex(self.coeffs[0])

    def __repr__(self):
        return f"Jet({list(self.coeffs)})"

    def __eq__(self, other):
        return isinstance(other, Jet) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())


def jet_variable(x, order: int) -> Jet:
    """Jet of the identity function at x: [x, 1, 0, ..., 0]."""
    if order < 0:
        raise ValueError("jet order must be >= 0")
    c = np.zeros(order + 1, dtype=np.complex128)
    c[0] = x
    if order >= 1:
        c[1] = 1.0
    return Jet(c)


def jet_constant(value, order: int) -> Jet:
    """Jet of a constant function: [value, 0, ..., 0]."""
    if order < 0:
        raise ValueError("jet order must be >= 0")
    c = np.zeros(order + 1, dtype=np.complex128)
    c[0] = value
    return Jet(c)


def jet_add(a: Jet, b: Jet) -> Jet:
    _check_orders(a, b)
    return Jet(a.coeffs + b.coeffs)


def jet_scale(a: Jet, factor) -> Jet:
    return Jet(a.coeffs * factor)


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Leibniz product: coeffs[n] = sum_j C(n,j) a[j] b[n-j]."""
    _check_orders(a, b)
    n = a.order
    out = np.zeros(n + 1, dtype=np.complex128)
    for k in range(n + 1):
        acc = 0.0 + 0.0j
        for j in range(k + 1):
            acc += math.comb(k, j) * a.coeffs[j] * b.coeffs[k - j]
        out[k] = acc
    return Jet(out)


def jet_exp(a: Jet) -> Jet:
    u = _to_taylor(a.coeffs)
    e = np.zeros_like(u)
    e[0] = np.exp(u[0])
    for k in range(1, u.size):
        acc = 0.0 + 0.0j
        for j in range(1, k + 1):
            acc += j * u[j] * e[k - j]
        e[k] = acc / k
    return Jet(_from_taylor(e))


def jet_cosh(a: Jet) -> Jet:
    c, _ = _cosh_sinh_taylor(_to_taylor(a.coeffs))
    return Jet(_from_taylor(c))


def jet_recip(a: Jet, eps_pole: float = EPS_POLE) -> Jet:
    """Jet of 1/u.  Raises PoleProximityError when |u(x)| < eps_pole."""
    u = _to_taylor(a.coeffs)
    return Jet(_from_taylor(_recip_taylor(u, eps_pole)))


def jet_sech2(a: Jet, eps_pole: float = EPS_POLE) -> Jet:
    """Jet of 1/cosh(u)^2.  Raises PoleProximityError when |cosh u(x)| < eps_pole."""
    u = _to_taylor(a.coeffs)
    c, _ = _cosh_sinh_taylor(u)
    if abs(c[0]) < eps_pole:
        raise PoleProximityError(complex(a.coeffs[0]), abs(c[0]), eps_pole)
    w = _cauchy(c, c)
    return Jet(_from_taylor(_recip_taylor(w, eps_pole**2)))


def _check_orders(a: Jet, b: Jet):
    if a.order != b.order:
        raise JetOrderMismatchError(f"orders differ: {a.order} vs {b.order}")


def _to_taylor(coeffs):
    return coeffs / _factorials(coeffs.size)


def _from_taylor(taylor):
    return taylor * _factorials(taylor.size)


def _factorials(n):
    return np.array([math.factorial(k) for k in range(n)], dtype=np.float64)


def _cauchy(a, b):
    n = a.size
    out = np.zeros(n, dtype=np.complex128)
    for k in range(n):
        out[k] = np.dot(a[: k + 1], b[k::-1])
    return out


def _cosh_sinh_taylor(u):
    c = np.zeros_like(u)
    s = np.zeros_like(u)
    c[0] = np.cosh(u[0])
    s[0] = np.sinh(u[0])
    for k in range(1, u.size):
        ck = 0.0 + 0.0j
        sk = 0.0 + 0.0j
        for j in range(1, k + 1):
            ck += j * u[j] * s[k - j]
            sk += j * u[j] * c[k - j]
        c[k] = ck / k
        s[k] = sk / k
    return c, s


def _recip_taylor(u, eps_pole):
    if abs(u[0]) < eps_pole:
        raise PoleProximityError(complex(u[0]), abs(u[0]), eps_pole)
    r = np.zeros_like(u)
    r[0] = 1.0 / u[0]
    for k in range(1, u.size):
        acc = 0.0 + 0.0j
        for j in range(1, k + 1):
            acc += u[j] * r[k - j]
        r[k] = -acc / u[0]
    return r

"""Directed rounding without touching the FPU rounding mode.

Every primitive is evaluated in round-to-nearest; an error-free transformation
(TwoSum, Dekker's TwoProduct, exact division remainder) then tells which side of
the exact result the float landed on, and only that endpoint is stepped one ULP
outward. Exact results are left untouched, so ``[1,2] + [3,4]`` stays ``[4,6]``.

Scalar helpers work on Python floats; the ``v``-prefixed twins take ndarrays.
"""

import math

import numpy as np

UNIT_ROUNDOFF = 2.0 ** -53
# Smallest positive subnormal; bounds the absolute error of an underflowing product.
ETA = 2.0 ** -1074
# Below this magnitude Dekker's split may lose bits to underflow.
_TINY = 2.0 ** -969
_SPLITTER = 134217729.0  # 2**27 + 1

_INF = math.inf


def gamma(n):
    """Classic bound ``n u / (1 - n u)`` on accumulated relative rounding error."""
    nu = n * UNIT_ROUNDOFF
    if nu >= 1.0:
        raise OverflowError("gamma(n) undefined for n*u >= 1")
    return nu / (1.0 - nu)


def down(x):
    return math.nextafter(x, -_INF)


def up(x):
    return math.nextafter(x, _INF)


# -- scalar error-free transformations ------------------------------------

def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod_err(a, b, p):
    ah, al = _split(a)
    bh, bl = _split(b)
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


def add_bounds(a, b):
    """Return ``(lo, hi)`` bracketing the exact ``a + b``."""
    s, e = _two_sum(a, b)
    if e == 0.0:
        return s, s
    return (s, up(s)) if e > 0.0 else (down(s), s)


def sub_bounds(a, b):
    return add_bounds(a, -b)


def mul_bounds(a, b):
    p = a * b
    if p != 0.0 and abs(p) >= _TINY:
        e = _two_prod_err(a, b, p)
        if e == 0.0:
            return p, p
        return (p, up(p)) if e > 0.0 else (down(p), p)
    if a == 0.0 or b == 0.0:
        return 0.0, 0.0
    # underflow region: widen by one ulp but keep the known sign
    if (a > 0.0) == (b > 0.0):
        return max(down(p), 0.0), up(p)
    return down(p), min(up(p), 0.0)


def div_bounds(a, b):
    q = a / b
    if q == 0.0 and a == 0.0:
        return 0.0, 0.0
    if abs(q) < _TINY or abs(b) < _TINY or abs(a) < _TINY:
        return down(q), up(q)
    p = q * b
    r = (a - p) - _two_prod_err(q, b, p)
    if r == 0.0:
        return q, q
    # a/b - q == r/b
    if (r > 0.0) == (b > 0.0):
        return q, up(q)
    return down(q), q


# -- vectorised twins --------------------------------------------------------

def _vtwo_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _vsplit(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _vtwo_prod_err(a, b, p):
    ah, al = _vsplit(a)
    bh, bl = _vsplit(b)
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


def vadd_down(a, b):
    s, e = _vtwo_sum(a, b)
    return np.where(e < 0.0, np.nextafter(s, -_INF), s)


def vadd_up(a, b):
    s, e = _vtwo_sum(a, b)
    return np.where(e > 0.0, np.nextafter(s, _INF), s)


def vmul_down(a, b):
    with np.errstate(invalid="ignore", over="ignore"):
        p = a * b
        e = _vtwo_prod_err(a, b, p)
    tiny = (np.abs(p) < _TINY) & (a != 0.0) & (b != 0.0)
    step = (e < 0.0) | tiny
    r = np.where(step, np.nextafter(p, -_INF), p)
    # an underflowed positive product never needs a negative lower bound
    return np.where(tiny & ((a > 0.0) == (b > 0.0)), np.maximum(r, 0.0), r)


def vmul_up(a, b):
    with np.errstate(invalid="ignore", over="ignore"):
        p = a * b
        e = _vtwo_prod_err(a, b, p)
    tiny = (np.abs(p) < _TINY) & (a != 0.0) & (b != 0.0)
    step = (e > 0.0) | tiny
    r = np.where(step, np.nextafter(p, _INF), p)
    return np.where(tiny & ((a > 0.0) != (b > 0.0)), np.minimum(r, 0.0), r)


def _vdiv_dir(a, b):
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        q = a / b
        p = q * b
        r = (a - p) - _vtwo_prod_err(q, b, p)
    tiny = (np.abs(q) < _TINY) | (np.abs(a) < _TINY) | (np.abs(b) < _TINY)
    tiny &= a != 0.0
    # +1: exact value above q, -1: below, 0: exact
    direction = np.sign(r) * np.sign(b)
    return q, direction, tiny


def vdiv_down(a, b):
    q, d, tiny = _vdiv_dir(a, b)
    return np.where((d < 0) | tiny, np.nextafter(q, -_INF), q)


def vdiv_up(a, b):
    q, d, tiny = _vdiv_dir(a, b)
    return np.where((d > 0) | tiny, np.nextafter(q, _INF), q)

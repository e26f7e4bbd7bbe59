"""Closed real intervals with outward-rounded arithmetic."""

import math

from ..errors import DomainError, UsageError
from . import rounding as rnd


class _Empty:
    """Result of intersecting disjoint intervals. Never a valid interval."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY"

    def __bool__(self):
        return False

    def __reduce__(self):
        return (_Empty, ())


EMPTY = _Empty()


class Interval:
    """Closed interval ``[lo, hi]`` of finite doubles.

    Arithmetic operators return enclosures of the exact real result; an
    endpoint is moved one ULP outward only when the floating-point operation
    that produced it was inexact.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = float(lo)
        hi = lo if hi is None else float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise DomainError(f"interval endpoints must be finite, got [{lo}, {hi}]")
        if lo > hi:
            raise UsageError(f"inverted interval endpoints [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("Interval is immutable")

    @classmethod
    def point(cls, x):
        return cls(x, x)

    @classmethod
    def from_midrad(cls, mid, rad):
        """Enclosure of ``[mid - rad, mid + rad]``."""
        if rad < 0:
            raise UsageError("radius must be non-negative")
        lo, _ = rnd.sub_bounds(mid, rad)
        _, hi = rnd.add_bounds(mid, rad)
        return cls(lo, hi)

    # -- properties ---------------------------------------------------------
    @property
    def is_thin(self):
        return self.lo == self.hi

    def midpoint(self):
        return 0.5 * self.lo + 0.5 * self.hi

    def radius(self):
        """Upper bound on ``(hi - lo) / 2``."""
        return 0.5 * self.width()

    def width(self):
        return rnd.sub_bounds(self.hi, self.lo)[1]

    def magnitude(self):
        return max(abs(self.lo), abs(self.hi))

    def mignitude(self):
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def contains_point(self, x):
        return self.lo <= x <= self.hi

    def contains_zero(self):
        return self.lo <= 0.0 <= self.hi

    def is_subset(self, other):
        return other.lo <= self.lo and self.hi <= other.hi

    def intersect(self, other):
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return EMPTY
        return Interval(lo, hi)

    def hull(self, other):
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    # -- arithmetic ---------------------------------------------------------
    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __pos__(self):
        return self

    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return Interval(rnd.add_bounds(self.lo, other.lo)[0], rnd.add_bounds(self.hi, other.hi)[1])

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return Interval(rnd.sub_bounds(self.lo, other.hi)[0], rnd.sub_bounds(self.hi, other.lo)[1])

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        a, b, c, d = self.lo, self.hi, other.lo, other.hi
        prods = (rnd.mul_bounds(a, c), rnd.mul_bounds(a, d), rnd.mul_bounds(b, c), rnd.mul_bounds(b, d))
        return Interval(min(p[0] for p in prods), max(p[1] for p in prods))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if other.lo <= 0.0 <= other.hi:
            raise DomainError(f"division by interval containing zero: {other!r}")
        a, b, c, d = self.lo, self.hi, other.lo, other.hi
        quots = (rnd.div_bounds(a, c), rnd.div_bounds(a, d), rnd.div_bounds(b, c), rnd.div_bounds(b, d))
        return Interval(min(q[0] for q in quots), max(q[1] for q in quots))

    def __rtruediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return other / self

    def sqr(self):
        """Tight enclosure of ``{x*x : x in self}``."""
        lo2 = rnd.mul_bounds(self.lo, self.lo)
        hi2 = rnd.mul_bounds(self.hi, self.hi)
        upper = max(lo2[1], hi2[1])
        if self.contains_zero():
            return Interval(0.0, upper)
        return Interval(min(lo2[0], hi2[0]), upper)

    def sqrt(self):
        if self.lo < 0.0:
            raise DomainError(f"sqrt of interval with negative part: {self!r}")
        lo = math.sqrt(self.lo)
        hi = math.sqrt(self.hi)
        # sqrt is correctly rounded; one step each way is enough
        return Interval(max(0.0, rnd.down(lo)) if lo * lo != self.lo else lo,
                        rnd.up(hi) if hi * hi != self.hi else hi)

    # -- comparisons / dunder ----------------------------------------------
    def __eq__(self, other):
        if isinstance(other, Interval):
            return self.lo == other.lo and self.hi == other.hi
        return NotImplemented

    def __hash__(self):
        return hash((self.lo, self.hi))

    def __contains__(self, x):
        if isinstance(x, Interval):
            return x.is_subset(self)
        return self.contains_point(x)

    def __iter__(self):
        yield self.lo
        yield self.hi

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __str__(self):
        return f"[{self.lo:.6g}, {self.hi:.6g}]"

    def __reduce__(self):
        return (Interval, (self.lo, self.hi))


def _coerce(x):
    if isinstance(x, Interval):
        return x
    if isinstance(x, (int, float)):
        return Interval(x, x)
    try:
        return Interval(float(x), float(x))
    except (TypeError, ValueError):
        return NotImplemented


# functional spellings
def add(a, b):
    return a + b


def sub(a, b):
    return a - b


def mul(a, b):
    return a * b


def div(a, b):
    return a / b


def neg(a):
    return -a


def intersect(a, b):
    return a.intersect(b)


def midpoint(a):
    return a.midpoint()


def radius(a):
    return a.radius()


def width(a):
    return a.width()


def magnitude(a):
    return a.magnitude()


def contains_point(a, x):
    return a.contains_point(x)


def is_subset(a, b):
    return a.is_subset(b)

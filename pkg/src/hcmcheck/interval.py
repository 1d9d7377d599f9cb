"""Outward-rounded real intervals.

Every operation returns an enclosure of the exact real result. Directed rounding
is emulated with error-free transformations (TwoSum, Dekker's TwoProduct): the
rounding error of each floating-point result is computed exactly and the bound is
stepped one ULP outward only when the result was inexact in the wrong direction.
"""

from __future__ import annotations

import math
from decimal import Decimal
from fractions import Fraction
from typing import NamedTuple

INF = math.inf
_SPLITTER = 134217729.0  # 2**27 + 1
_BIG = 2.0**995
_TINY = 2.0**-960


class EmptyOperand(ValueError):
    pass


def _down(x: float) -> float:
    return math.nextafter(x, -INF)


def _up(x: float) -> float:
    return math.nextafter(x, INF)


def _two_sum_err(a: float, b: float, s: float) -> float:
    bb = s - a
    return (a - (s - bb)) + (b - bb)


def _split(a: float) -> tuple[float, float]:
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod_err(a: float, b: float, p: float) -> float:
    ah, al = _split(a)
    bh, bl = _split(b)
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


def add_down(a: float, b: float) -> float:
    s = a + b
    if math.isinf(s):
        if math.isinf(a) or math.isinf(b):
            return s
        return s if s < 0 else math.nextafter(INF, 0)
    return _down(s) if _two_sum_err(a, b, s) < 0 else s


def add_up(a: float, b: float) -> float:
    s = a + b
    if math.isinf(s):
        if math.isinf(a) or math.isinf(b):
            return s
        return s if s > 0 else -math.nextafter(INF, 0)
    return _up(s) if _two_sum_err(a, b, s) > 0 else s


def _mul_exact_sign(a: float, b: float, p: float) -> int:
    """Sign of (a*b - p) for finite operands; 2 means "unknown, widen both ways"."""
    if abs(a) > _BIG or abs(b) > _BIG or (p != 0.0 and abs(p) < _TINY) or (p == 0.0 and a != 0.0 and b != 0.0):
        return 2
    e = _two_prod_err(a, b, p)
    return (e > 0) - (e < 0)


def mul_down(a: float, b: float) -> float:
    if a == 0.0 or b == 0.0:
        return 0.0
    p = a * b
    if math.isinf(p):
        if math.isinf(a) or math.isinf(b):
            return p
        return p if p < 0 else math.nextafter(INF, 0)
    s = _mul_exact_sign(a, b, p)
    return _down(p) if s in (-1, 2) else p


def mul_up(a: float, b: float) -> float:
    if a == 0.0 or b == 0.0:
        return 0.0
    p = a * b
    if math.isinf(p):
        if math.isinf(a) or math.isinf(b):
            return p
        return p if p > 0 else -math.nextafter(INF, 0)
    s = _mul_exact_sign(a, b, p)
    return _up(p) if s in (1, 2) else p


def _div_sign(a: float, b: float, q: float) -> int:
    """Sign of (a/b - q) for finite nonzero operands; 2 means unknown."""
    if abs(a) > _BIG or abs(b) > _BIG or abs(q) > _BIG or q == 0.0 or abs(q) < _TINY or abs(a) < _TINY:
        return 2
    p = q * b
    e = _two_prod_err(q, b, p)
    r = (a - p) - e
    if r == 0.0:
        return 0
    return 1 if (r > 0) == (b > 0) else -1


def div_down(a: float, b: float) -> float:
    if a == 0.0:
        return 0.0
    if math.isinf(b):
        if math.isinf(a):
            return -INF
        return 0.0
    q = a / b
    if math.isinf(q):
        if math.isinf(a):
            return q
        return q if q < 0 else math.nextafter(INF, 0)
    s = _div_sign(a, b, q)
    return _down(q) if s in (-1, 2) else q


def div_up(a: float, b: float) -> float:
    if a == 0.0:
        return 0.0
    if math.isinf(b):
        if math.isinf(a):
            return INF
        return 0.0
    q = a / b
    if math.isinf(q):
        if math.isinf(a):
            return q
        return q if q > 0 else -math.nextafter(INF, 0)
    s = _div_sign(a, b, q)
    return _up(q) if s in (1, 2) else q


class Interval(NamedTuple):
    lo: float
    hi: float

    # -- constructors -------------------------------------------------------
    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(float(x), float(x))

    @classmethod
    def entire(cls) -> "Interval":
        return cls(-INF, INF)

    @classmethod
    def empty(cls) -> "Interval":
        return EMPTY

    @classmethod
    def from_decimal(cls, lo, hi=None) -> "Interval":
        """Tightest float interval containing the exact decimal values ``lo`` and ``hi``."""
        hi = lo if hi is None else hi
        return cls(_decimal_down(lo), _decimal_up(hi))

    # -- queries ------------------------------------------------------------
    @property
    def is_empty(self) -> bool:
        return not (self.lo <= self.hi)

    @property
    def width(self) -> float:
        if self.is_empty:
            return 0.0
        return self.hi - self.lo

    @property
    def is_bounded(self) -> bool:
        return not (math.isinf(self.lo) or math.isinf(self.hi))

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    @property
    def mid(self) -> float:
        if self.is_empty:
            raise EmptyOperand("midpoint of empty interval")
        if self.lo == -INF and self.hi == INF:
            return 0.0
        if self.lo == -INF:
            return -math.nextafter(INF, 0)
        if self.hi == INF:
            return math.nextafter(INF, 0)
        m = 0.5 * self.lo + 0.5 * self.hi
        return min(max(m, self.lo), self.hi)

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def subset(self, other: "Interval") -> bool:
        if self.is_empty:
            return True
        return other.lo <= self.lo and self.hi <= other.hi

    def intersect(self, other: "Interval") -> "Interval":
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi or self.is_empty or other.is_empty:
            return EMPTY
        return Interval(lo, hi)

    def hull(self, other: "Interval") -> "Interval":
        if self.is_empty:
            return other
        if other.is_empty:
            return self
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def integer_hull(self) -> "Interval":
        if self.is_empty:
            return EMPTY
        lo = self.lo if math.isinf(self.lo) else float(math.ceil(self.lo))
        hi = self.hi if math.isinf(self.hi) else float(math.floor(self.hi))
        if lo > hi:
            return EMPTY
        return Interval(lo, hi)

    def __str__(self) -> str:
        if self.is_empty:
            return "[empty]"
        return f"[{_fmt(self.lo)}, {_fmt(self.hi)}]"

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        return add(self, _coerce(other))

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __neg__(self):
        return neg(self)


EMPTY = Interval(INF, -INF)


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _coerce(x) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval.point(float(x))


def _decimal_down(x) -> float:
    if isinstance(x, float):
        return x
    d = Decimal(str(x))
    f = float(d)
    if math.isinf(f):
        return f if f < 0 else math.nextafter(INF, 0)
    return _down(f) if Fraction(f) > Fraction(d) else f


def _decimal_up(x) -> float:
    if isinstance(x, float):
        return x
    d = Decimal(str(x))
    f = float(d)
    if math.isinf(f):
        return f if f > 0 else -math.nextafter(INF, 0)
    return _up(f) if Fraction(f) < Fraction(d) else f


def _check(*xs: Interval) -> bool:
    for x in xs:
        if x.is_empty:
            return False
    return True


def add(a: Interval, b: Interval) -> Interval:
    if not _check(a, b):
        return EMPTY
    return Interval(add_down(a.lo, b.lo), add_up(a.hi, b.hi))


def sub(a: Interval, b: Interval) -> Interval:
    if not _check(a, b):
        return EMPTY
    return Interval(add_down(a.lo, -b.hi), add_up(a.hi, -b.lo))


def neg(a: Interval) -> Interval:
    if a.is_empty:
        return EMPTY
    return Interval(-a.hi, -a.lo)


def mul(a: Interval, b: Interval) -> Interval:
    if not _check(a, b):
        return EMPTY
    pairs = ((a.lo, b.lo), (a.lo, b.hi), (a.hi, b.lo), (a.hi, b.hi))
    lo = min(mul_down(x, y) for x, y in pairs)
    hi = max(mul_up(x, y) for x, y in pairs)
    return Interval(lo, hi)


def div(a: Interval, b: Interval) -> Interval:
    """Interval quotient; when 0 is in ``b`` the hull of the unbounded pieces is returned."""
    if not _check(a, b):
        return EMPTY
    if b.lo == 0.0 and b.hi == 0.0:
        return EMPTY
    if a.lo == 0.0 and a.hi == 0.0:
        return Interval(0.0, 0.0)
    if b.lo > 0.0 or b.hi < 0.0:
        pairs = ((a.lo, b.lo), (a.lo, b.hi), (a.hi, b.lo), (a.hi, b.hi))
        lo = min(div_down(x, y) for x, y in pairs)
        hi = max(div_up(x, y) for x, y in pairs)
        if math.isnan(lo) or math.isnan(hi):
            return Interval.entire()
        return Interval(lo, hi)
    if b.lo == 0.0:
        # denominator in (0, b.hi]
        if a.lo >= 0.0:
            return Interval(div_down(a.lo, b.hi), INF)
        if a.hi <= 0.0:
            return Interval(-INF, div_up(a.hi, b.hi))
        return Interval.entire()
    if b.hi == 0.0:
        # denominator in [b.lo, 0)
        if a.lo >= 0.0:
            return Interval(-INF, div_up(a.lo, b.lo))
        if a.hi <= 0.0:
            return Interval(div_down(a.hi, b.lo), INF)
        return Interval.entire()
    return Interval.entire()


_OPS = {"add": add, "sub": sub, "mul": mul, "div": div}


def interval_op(kind: str, a: Interval, b: Interval) -> Interval:
    """Dispatch on ``kind``; raises :class:`EmptyOperand` on empty inputs."""
    if a.is_empty or b.is_empty:
        raise EmptyOperand(f"{kind} with empty operand")
    return _OPS[kind](a, b)

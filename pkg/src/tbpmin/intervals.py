"""Interval arithmetic kernels: outward-rounded machine intervals over IEEE
doubles, exact rational intervals, and interval-coefficient polynomials.

The machine layer refuses to guess: every operation first checks magnitude
guards and then widens the result by one ULP on each side, so a computed
interval always contains the true real-arithmetic result.  Guard violations
raise :class:`RigorAbort`, which callers must treat as "no conclusion".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

Rational = Fraction

#: Hard magnitude cutoff for representable endpoints.
R0 = 2.0 ** 50
#: Operand magnitude limit for addition and subtraction.
ADD_LIMIT = 2.0 ** 40
#: Operand magnitude limits for multiplication (one factor each).
MUL_BIG = 2.0 ** 40
MUL_SMALL = 2.0 ** 10
#: Numerator magnitude limit and denominator magnitude window for division.
DIV_NUM = 2.0 ** 40
DIV_DEN_LO = 2.0 ** -10
DIV_DEN_HI = 2.0 ** 10


class RigorAbort(ArithmeticError):
    """A magnitude guard failed; the computation carries no rigor past here."""


def succ(x: float) -> float:
    """Next double above x (one ULP up; +0 steps to the smallest positive)."""
    return math.nextafter(x, math.inf)


def pred(x: float) -> float:
    """Next double below x (one ULP down; +0 steps to -5e-324)."""
    return math.nextafter(x, -math.inf)


def _check_finite(x: float) -> None:
    if math.isnan(x) or math.isinf(x):
        raise RigorAbort(f"non-finite endpoint {x!r}")


@dataclass(frozen=True, slots=True)
class MachineInterval:
    """Closed interval [lo, hi] with double endpoints.

    Endpoints are finite and ordered; all arithmetic rounds outward by one
    ULP after the IEEE round-to-nearest operation, so the result interval
    contains every real attainable from reals in the operands.
    """

    lo: float
    hi: float

    def __post_init__(self) -> None:
        _check_finite(self.lo)
        _check_finite(self.hi)
        if self.lo > self.hi:
            raise RigorAbort(f"inverted interval [{self.lo}, {self.hi}]")

    @classmethod
    def from_value(cls, x: Union[int, float]) -> "MachineInterval":
        """Zero-width interval at an exactly representable value."""
        f = float(x)
        _check_finite(f)
        if Fraction(f) != Fraction(x):
            raise ValueError(f"{x!r} is not exactly representable")
        if abs(f) > R0:
            raise RigorAbort(f"value {f} exceeds the representable cutoff")
        return cls(f, f)

    @classmethod
    def from_fraction(cls, q: Fraction) -> "MachineInterval":
        """Smallest outward-rounded interval containing an exact rational."""
        f = float(q)
        _check_finite(f)
        lo = f if Fraction(f) <= q else pred(f)
        hi = f if Fraction(f) >= q else succ(f)
        if max(abs(lo), abs(hi)) > R0:
            raise RigorAbort(f"rational {q} exceeds the representable cutoff")
        return cls(lo, hi)

    @classmethod
    def hull(cls, lo: float, hi: float) -> "MachineInterval":
        return cls(min(lo, hi), max(lo, hi))

    @property
    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: Union[int, float, Fraction]) -> bool:
        return Fraction(self.lo) <= Fraction(x) <= Fraction(self.hi)

    def encloses(self, other: "MachineInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    @classmethod
    def _coerce(cls, x) -> "MachineInterval":
        if isinstance(x, MachineInterval):
            return x
        if isinstance(x, int):
            return cls.from_value(x)
        if isinstance(x, Fraction):
            return cls.from_fraction(x)
        return NotImplemented

    def __add__(self, other) -> "MachineInterval":
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else machine_add(self, o)

    __radd__ = __add__

    def __sub__(self, other) -> "MachineInterval":
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else machine_sub(self, o)

    def __rsub__(self, other) -> "MachineInterval":
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else machine_sub(o, self)

    def __mul__(self, other) -> "MachineInterval":
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else machine_mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "MachineInterval":
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else machine_div(self, o)

    def __rtruediv__(self, other) -> "MachineInterval":
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else machine_div(o, self)

    def __neg__(self) -> "MachineInterval":
        return MachineInterval(-self.hi, -self.lo)

    def __pow__(self, n: int) -> "MachineInterval":
        if not isinstance(n, int) or n < 0:
            raise ValueError("only nonnegative integer powers")
        out = MachineInterval.from_value(1)
        for _ in range(n):
            out = machine_mul(out, self)
        return out


def _round_out(lo: float, hi: float) -> MachineInterval:
    lo, hi = pred(lo), succ(hi)
    _check_finite(lo)
    _check_finite(hi)
    return MachineInterval(lo, hi)


def machine_add(a: MachineInterval, b: MachineInterval) -> MachineInterval:
    if a.mag > ADD_LIMIT or b.mag > ADD_LIMIT:
        raise RigorAbort("add: operand magnitude above 2^40")
    return _round_out(a.lo + b.lo, a.hi + b.hi)


def machine_sub(a: MachineInterval, b: MachineInterval) -> MachineInterval:
    if a.mag > ADD_LIMIT or b.mag > ADD_LIMIT:
        raise RigorAbort("sub: operand magnitude above 2^40")
    return _round_out(a.lo - b.hi, a.hi - b.lo)


def machine_mul(a: MachineInterval, b: MachineInterval) -> MachineInterval:
    big, small = max(a.mag, b.mag), min(a.mag, b.mag)
    if big > MUL_BIG or small > MUL_SMALL:
        raise RigorAbort("mul: operand magnitudes outside the 2^40/2^10 guard")
    ps = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return _round_out(min(ps), max(ps))


def machine_div(a: MachineInterval, b: MachineInterval) -> MachineInterval:
    if b.lo <= 0.0 <= b.hi:
        raise RigorAbort("div: divisor interval contains zero")
    if a.mag > DIV_NUM:
        raise RigorAbort("div: numerator magnitude above 2^40")
    bmin = min(abs(b.lo), abs(b.hi))
    if bmin < DIV_DEN_LO or b.mag > DIV_DEN_HI:
        raise RigorAbort("div: divisor magnitude outside [2^-10, 2^10]")
    qs = (a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi)
    return _round_out(min(qs), max(qs))


_MACHINE_OPS = {
    "add": machine_add,
    "sub": machine_sub,
    "mul": machine_mul,
    "div": machine_div,
}


def machine_op(op: str, a: MachineInterval, b: MachineInterval) -> MachineInterval:
    """Dispatch one guarded, outward-rounded machine operation."""
    return _MACHINE_OPS[op](a, b)


def _as_fraction(x: Union[int, Fraction]) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected int or Fraction, got {type(x).__name__}")


@dataclass(frozen=True, slots=True)
class RationalInterval:
    """Closed interval with exact rational endpoints; arithmetic is exact.

    Products take the min and max over all four endpoint products, so every
    result is the smallest interval containing the true range.  Powers are
    computed by repeated interval multiplication, deliberately ignoring the
    dependency between the factors.
    """

    lo: Fraction
    hi: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", _as_fraction(self.lo))
        object.__setattr__(self, "hi", _as_fraction(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"inverted interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: Union[int, Fraction]) -> "RationalInterval":
        q = _as_fraction(x)
        return cls(q, q)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def contains(self, x: Union[int, Fraction]) -> bool:
        return self.lo <= _as_fraction(x) <= self.hi

    def encloses(self, other: "RationalInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def _coerce(self, other) -> "RationalInterval":
        if isinstance(other, RationalInterval):
            return other
        return RationalInterval.point(other)

    def __add__(self, other) -> "RationalInterval":
        o = self._coerce(other)
        return RationalInterval(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __sub__(self, other) -> "RationalInterval":
        o = self._coerce(other)
        return RationalInterval(self.lo - o.hi, self.hi - o.lo)

    def __rsub__(self, other) -> "RationalInterval":
        return self._coerce(other) - self

    def __mul__(self, other) -> "RationalInterval":
        o = self._coerce(other)
        ps = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return RationalInterval(min(ps), max(ps))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "RationalInterval":
        o = self._coerce(other)
        if o.lo <= 0 <= o.hi:
            raise ZeroDivisionError("divisor interval contains zero")
        qs = (self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi)
        return RationalInterval(min(qs), max(qs))

    def __neg__(self) -> "RationalInterval":
        return RationalInterval(-self.hi, -self.lo)

    def __pow__(self, n: int) -> "RationalInterval":
        if not isinstance(n, int) or n < 0:
            raise ValueError("only nonnegative integer powers")
        out = RationalInterval.point(1)
        for _ in range(n):
            out = out * self
        return out


def rational_interval_op(op: str, a: RationalInterval, b: RationalInterval) -> RationalInterval:
    """Dispatch one exact rational-interval operation (add, sub, mul)."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise KeyError(op)


class IntervalPolynomial:
    """Polynomial with rational-interval coefficients.

    An interval polynomial *traps* an ordinary polynomial when every
    coefficient lies in the corresponding coefficient interval.  Ring
    operations preserve trapping, and for t >= 0 the endpoint polynomials
    bound every trapped polynomial pointwise.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[RationalInterval]):
        cs = [c if isinstance(c, RationalInterval) else RationalInterval.point(c) for c in coeffs]
        while len(cs) > 1 and cs[-1].lo == 0 == cs[-1].hi:
            cs.pop()
        self.coeffs = tuple(cs) if cs else (RationalInterval.point(0),)

    @classmethod
    def from_exact(cls, coeffs: Sequence[Union[int, Fraction]]) -> "IntervalPolynomial":
        return cls([RationalInterval.point(c) for c in coeffs])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def traps(self, poly: Sequence[Union[int, Fraction]]) -> bool:
        if len(poly) > len(self.coeffs):
            if any(c != 0 for c in poly[len(self.coeffs):]):
                return False
            poly = poly[: len(self.coeffs)]
        padded = list(poly) + [Fraction(0)] * (len(self.coeffs) - len(poly))
        return all(c.contains(p) for c, p in zip(self.coeffs, padded))

    def __add__(self, other: "IntervalPolynomial") -> "IntervalPolynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        zero = RationalInterval.point(0)
        a = list(self.coeffs) + [zero] * (n - len(self.coeffs))
        b = list(other.coeffs) + [zero] * (n - len(other.coeffs))
        return IntervalPolynomial([x + y for x, y in zip(a, b)])

    def __sub__(self, other: "IntervalPolynomial") -> "IntervalPolynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        zero = RationalInterval.point(0)
        a = list(self.coeffs) + [zero] * (n - len(self.coeffs))
        b = list(other.coeffs) + [zero] * (n - len(other.coeffs))
        return IntervalPolynomial([x - y for x, y in zip(a, b)])

    def __mul__(self, other: "IntervalPolynomial") -> "IntervalPolynomial":
        zero = RationalInterval.point(0)
        out = [zero] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a * b
        return IntervalPolynomial(out)

    def scale(self, c: Union[int, Fraction, RationalInterval]) -> "IntervalPolynomial":
        return IntervalPolynomial([a * c for a in self.coeffs])

    def enclose_at(self, t: Union[int, Fraction]) -> RationalInterval:
        """Interval enclosing p(t) for every trapped p (any rational t)."""
        tt = RationalInterval.point(t)
        out = RationalInterval.point(0)
        power = RationalInterval.point(1)
        for c in self.coeffs:
            out = out + c * power
            power = power * tt
        return out

    def lower_envelope(self) -> list[Fraction]:
        """Coefficients of a polynomial below every trapped p on t >= 0."""
        return [c.lo for c in self.coeffs]

    def upper_envelope(self) -> list[Fraction]:
        """Coefficients of a polynomial above every trapped p on t >= 0."""
        return [c.hi for c in self.coeffs]


def poly_eval(coeffs: Sequence[Union[int, Fraction]], t: Union[int, Fraction]) -> Fraction:
    """Horner evaluation of an exact-coefficient polynomial."""
    acc = Fraction(0)
    for c in reversed(list(coeffs)):
        acc = acc * t + c
    return acc

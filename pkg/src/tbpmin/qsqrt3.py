"""Exact arithmetic in the quadratic field Q(sqrt 3).

The optimal five-point configuration has planar coordinates in this field,
so energies, gradients, Hessians, and higher partials at the minimizer can
be evaluated with no rounding at all.  Sign decisions compare a^2 against
3 b^2, which keeps every comparison exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import isqrt
from typing import Union


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"cannot lift {type(x).__name__} into Q(sqrt 3)")


@dataclass(frozen=True, slots=True)
class QSqrt3:
    """The number a + b*sqrt(3) with exact rational a, b."""

    a: Fraction
    b: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", _as_fraction(self.a))
        object.__setattr__(self, "b", _as_fraction(self.b))

    # -------------------------------------------------------------- ring

    @classmethod
    def _coerce(cls, x) -> "QSqrt3":
        if isinstance(x, QSqrt3):
            return x
        if isinstance(x, (int, Fraction)):
            return cls(_as_fraction(x))
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return QSqrt3(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return QSqrt3(self.a - o.a, self.b - o.b)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return QSqrt3(o.a - self.a, o.b - self.b)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return QSqrt3(
            self.a * o.a + 3 * self.b * o.b,
            self.a * o.b + self.b * o.a,
        )

    __rmul__ = __mul__

    def inverse(self) -> "QSqrt3":
        n = self.a * self.a - 3 * self.b * self.b
        if n == 0:
            raise ZeroDivisionError("zero element of Q(sqrt 3)")
        return QSqrt3(self.a / n, -self.b / n)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o * self.inverse()

    def __neg__(self) -> "QSqrt3":
        return QSqrt3(-self.a, -self.b)

    def __pow__(self, n: int) -> "QSqrt3":
        if not isinstance(n, int) or n < 0:
            raise ValueError("only nonnegative integer powers")
        out, base = QSqrt3(Fraction(1)), self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # ------------------------------------------------------------- order

    def sign(self) -> int:
        """Exact sign of a + b*sqrt(3)."""
        a, b = self.a, self.b
        if b == 0:
            return (a > 0) - (a < 0)
        if a == 0:
            return 1 if b > 0 else -1
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # Opposite signs: compare a^2 with 3 b^2; the larger magnitude wins.
        diff = a * a - 3 * b * b
        major = 1 if a > 0 else -1  # sign of the |a| side
        if diff == 0:
            raise ArithmeticError("sqrt(3) is irrational; a^2 == 3 b^2 impossible")
        return major if diff > 0 else -major

    def __lt__(self, other):
        return (self - self._coerce(other)).sign() < 0

    def __le__(self, other):
        return (self - self._coerce(other)).sign() <= 0

    def __gt__(self, other):
        return (self - self._coerce(other)).sign() > 0

    def __ge__(self, other):
        return (self - self._coerce(other)).sign() >= 0

    def __abs__(self) -> "QSqrt3":
        return -self if self.sign() < 0 else self

    # ----------------------------------------------------------- exports

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    def to_fraction(self) -> Fraction:
        if self.b != 0:
            raise ValueError(f"{self} is irrational")
        return self.a

    def __float__(self) -> float:
        return float(self.a) + float(self.b) * 3.0 ** 0.5

    def rational_bounds(self, bits: int = 80) -> tuple[Fraction, Fraction]:
        """Exact rational lower/upper bounds using a dyadic sqrt(3) bracket."""
        lo3, hi3 = sqrt3_bracket(bits)
        if self.b >= 0:
            return self.a + self.b * lo3, self.a + self.b * hi3
        return self.a + self.b * hi3, self.a + self.b * lo3


SQRT3 = QSqrt3(Fraction(0), Fraction(1))
HALF = Fraction(1, 2)


def sqrt3_bracket(bits: int) -> tuple[Fraction, Fraction]:
    """Dyadic bracket lo <= sqrt(3) <= hi of width 2^-bits."""
    n = isqrt(3 << (2 * bits))
    return Fraction(n, 1 << bits), Fraction(n + 1, 1 << bits)


def sqrt_fraction_bounds(q: Fraction) -> tuple[Fraction, Fraction]:
    """Rational bracket around sqrt(q) for exact nonnegative rational q."""
    if q < 0:
        raise ValueError("negative radicand")
    n, d = q.numerator, q.denominator
    r = isqrt(n * d)
    return Fraction(r, d), Fraction(r + 1, d)

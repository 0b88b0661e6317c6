"""Sparse multivariate polynomials with exact coefficients.

Exponent vectors are packed into a single integer key, eight bits per
variable, so that term lookup and convolution run on plain int hashing.
Coefficients are arbitrary-precision ints (or Fractions where a caller
needs them); nothing here ever rounds.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

_SHIFT = 8
_MASK = (1 << _SHIFT) - 1
MAX_EXPONENT = _MASK


def pack_exponents(exps: Sequence[int]) -> int:
    key = 0
    for i, e in enumerate(exps):
        if not 0 <= e <= _MASK:
            raise ValueError(f"exponent {e} out of packed range")
        key |= e << (_SHIFT * i)
    return key


def unpack_exponents(key: int, nvars: int) -> tuple:
    return tuple((key >> (_SHIFT * i)) & _MASK for i in range(nvars))


class MultiPoly:
    """Immutable-by-convention sparse polynomial in ``nvars`` variables."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[int, object] | None = None):
        self.nvars = nvars
        self.terms = dict(terms) if terms else {}

    # ----------------------------------------------------------- builders

    @classmethod
    def zero(cls, nvars: int) -> "MultiPoly":
        return cls(nvars)

    @classmethod
    def constant(cls, nvars: int, c) -> "MultiPoly":
        return cls(nvars, {0: c} if c else {})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "MultiPoly":
        if not 0 <= i < nvars:
            raise ValueError("variable index out of range")
        return cls(nvars, {1 << (_SHIFT * i): 1})

    @classmethod
    def from_exponents(cls, nvars: int, entries: Mapping[Sequence[int], object]):
        return cls(nvars, {pack_exponents(e): c for e, c in entries.items() if c})

    # ---------------------------------------------------------------- ring

    def _check(self, other: "MultiPoly") -> None:
        if self.nvars != other.nvars:
            raise ValueError("variable count mismatch")

    def __add__(self, other: "MultiPoly") -> "MultiPoly":
        self._check(other)
        terms = dict(self.terms)
        for k, c in other.terms.items():
            s = terms.get(k, 0) + c
            if s:
                terms[k] = s
            else:
                terms.pop(k, None)
        return MultiPoly(self.nvars, terms)

    def __neg__(self) -> "MultiPoly":
        return MultiPoly(self.nvars, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other: "MultiPoly") -> "MultiPoly":
        return self + (-other)

    def __mul__(self, other) -> "MultiPoly":
        if not isinstance(other, MultiPoly):
            return self.scale(other)
        self._check(other)
        # Iterate the smaller operand on the outside.
        a, b = self.terms, other.terms
        if len(a) > len(b):
            a, b = b, a
        terms: dict = {}
        get = terms.get
        for ka, ca in a.items():
            for kb, cb in b.items():
                k = ka + kb
                s = get(k, 0) + ca * cb
                if s:
                    terms[k] = s
                else:
                    terms.pop(k, None)
        return MultiPoly(self.nvars, terms)

    __rmul__ = __mul__

    def scale(self, c) -> "MultiPoly":
        if not c:
            return MultiPoly(self.nvars)
        return MultiPoly(self.nvars, {k: c * v for k, v in self.terms.items()})

    def __pow__(self, n: int) -> "MultiPoly":
        if n < 0:
            raise ValueError("negative power")
        result = MultiPoly.constant(self.nvars, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base_needed = n >> 1
            if base_needed:
                base = base * base
            n = base_needed
        return result

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MultiPoly)
            and self.nvars == other.nvars
            and self.terms == other.terms
        )

    def __hash__(self):
        raise TypeError("MultiPoly is not hashable")

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __repr__(self) -> str:
        n = len(self.terms)
        return f"MultiPoly(nvars={self.nvars}, terms={n})"

    # ----------------------------------------------------------- calculus

    def diff(self, i: int) -> "MultiPoly":
        """Exact partial derivative with respect to variable ``i``."""
        if not 0 <= i < self.nvars:
            raise ValueError("variable index out of range")
        step = 1 << (_SHIFT * i)
        shift = _SHIFT * i
        terms = {}
        for k, c in self.terms.items():
            e = (k >> shift) & _MASK
            if e:
                terms[k - step] = c * e
        return MultiPoly(self.nvars, terms)

    # --------------------------------------------------------- inspection

    def degree(self, i: int) -> int:
        shift = _SHIFT * i
        return max(((k >> shift) & _MASK for k in self.terms), default=0)

    def total_degree(self) -> int:
        best = 0
        for k in self.terms:
            d = 0
            kk = k
            while kk:
                d += kk & _MASK
                kk >>= _SHIFT
            best = max(best, d)
        return best

    def coefficient(self, exps: Sequence[int]):
        return self.terms.get(pack_exponents(exps), 0)

    def abs_coefficient_sum(self):
        """Sum of |coefficients|; bounds the polynomial on regions where
        every monomial has magnitude at most 1."""
        return sum(abs(c) for c in self.terms.values())

    def leading_part(self, i: int) -> "MultiPoly":
        """Terms achieving the top degree in variable ``i``."""
        top = self.degree(i)
        shift = _SHIFT * i
        return MultiPoly(
            self.nvars,
            {k: c for k, c in self.terms.items() if (k >> shift) & _MASK == top},
        )

    # ---------------------------------------------------------- evaluation

    def evaluate(self, point: Sequence):
        """Evaluate at a point of any commutative ring containing int."""
        if len(point) != self.nvars:
            raise ValueError("point arity mismatch")
        powers: list[dict] = [{0: 1} for _ in range(self.nvars)]

        def power(i: int, e: int):
            cache = powers[i]
            got = cache.get(e)
            if got is None:
                got = power(i, e - 1) * point[i]
                cache[e] = got
            return got

        total = 0
        for k, c in self.terms.items():
            m = c
            kk = k
            i = 0
            while kk:
                e = kk & _MASK
                if e:
                    m = m * power(i, e)
                kk >>= _SHIFT
                i += 1
            total = total + m
        return total

    def substitute_affine(self, i: int, alpha, beta) -> "MultiPoly":
        """Replace variable ``i`` by alpha*x_i + beta, exactly."""
        if not 0 <= i < self.nvars:
            raise ValueError("variable index out of range")
        shift = _SHIFT * i
        step = 1 << shift
        # Binomial rows cached per exponent.
        rows: dict[int, list] = {}

        def row(e: int) -> list:
            got = rows.get(e)
            if got is None:
                # coefficients of (alpha*x + beta)^e by Pascal extension
                if e == 0:
                    got = [1]
                else:
                    prev = row(e - 1)
                    got = [0] * (e + 1)
                    for j, c in enumerate(prev):
                        got[j] += c * beta
                        got[j + 1] += c * alpha
                rows[e] = got
            return got

        terms: dict = {}
        for k, c in self.terms.items():
            e = (k >> shift) & _MASK
            base = k - e * step
            for j, w in enumerate(row(e)):
                if not w:
                    continue
                kk = base + j * step
                s = terms.get(kk, 0) + c * w
                if s:
                    terms[kk] = s
                else:
                    terms.pop(kk, None)
        return MultiPoly(self.nvars, terms)

    def exponents(self) -> Iterable[tuple]:
        for k in self.terms:
            yield unpack_exponents(k, self.nvars)


def univariate_coefficients(poly: MultiPoly) -> list:
    """Dense coefficient list [c0, c1, ...] of a 1-variable MultiPoly."""
    if poly.nvars != 1:
        raise ValueError("not univariate")
    out = [0] * (poly.degree(0) + 1) if poly.terms else [0]
    for k, c in poly.terms.items():
        out[k & _MASK] = c
    return out


def from_univariate(coeffs: Sequence) -> MultiPoly:
    return MultiPoly(1, {i: Fraction(c) for i, c in enumerate(coeffs) if c})

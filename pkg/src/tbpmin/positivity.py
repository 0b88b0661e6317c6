"""Positivity certificates for the radial interpolation coefficients.

The minimization argument needs, for every admissible exponent s, an
interpolant Gamma_s lying below the true power-law kernel.  Gamma_s is a
rational combination of the polynomial kernels with coefficients of the
form sum over m = 2,3,4 of (a_m + b_m s) m^(-s/2) ("power combos").  This
module proves the required sign conditions for all s at once:

  * rational brackets for log 2, log 3, log 4, verified against the
    exponential series;
  * degree-12 interval Taylor expansions of m^(-s/2) about even anchors,
    giving rational under/over polynomial approximations of any combo on
    unit s-intervals;
  * weak positive dominance (WPD) for univariate positivity and the
    subdividing positive-dominance prover for several variables;
  * the three fixed coefficient systems and their positivity schedules;
  * the no-double-root certificate for the derivative analysis of the
    third system, run as a parallel dominance search in (s, t).

Everything on the certification path is exact rational arithmetic.
Floating point appears only in diagnostic evaluation helpers.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from .hessian import CertificationError
from .intervals import IntervalPolynomial, RationalInterval, poly_eval
from .multipoly import MultiPoly

F = Fraction

# ----------------------------------------------------------------- logs

LOG_BRACKETS = {
    2: (F(25469, 36744), F(7050, 10171)),
    3: (F(5225, 4756), F(708784, 645163)),
    4: (F(25469, 18372), F(345197, 249007)),
}

_EXP_TERMS = 40


def _exp_bounds(x: Fraction) -> RationalInterval:
    """Rigorous rational bracket of e^x for 0 <= x < 2.

    Partial sums of the series underestimate; the dropped tail is a
    geometric series once the term ratio x/(n+1) drops below 1.
    """
    x = F(x)
    if not 0 <= x < 2:
        raise ValueError("exponential bracket only implemented for [0, 2)")
    total = F(0)
    term = F(1)
    for n in range(_EXP_TERMS):
        total += term
        term = term * x / (n + 1)
    ratio = x / (_EXP_TERMS + 1)
    tail = term / (1 - ratio)
    return RationalInterval(total, total + tail)


def log_enclosures() -> dict:
    """The three log brackets, verified before they are handed out.

    log m is in [lo, hi] exactly when e^lo <= m <= e^hi; both sides are
    checked with the rational exponential bracket.  The m = 4 bracket must
    also be consistent with doubling the m = 2 bracket.
    """
    out = {}
    for m, (lo, hi) in LOG_BRACKETS.items():
        if _exp_bounds(lo).hi > m:
            raise CertificationError(f"log bracket for {m}: lower end too high")
        if _exp_bounds(hi).lo < m:
            raise CertificationError(f"log bracket for {m}: upper end too low")
        if hi - lo >= F(1, 10**8):
            raise CertificationError(f"log bracket for {m} too wide")
        out[m] = RationalInterval(lo, hi)
    doubled = out[2] * 2
    if not (doubled.lo <= out[4].lo and out[4].hi <= doubled.hi + F(1, 10**9)):
        raise CertificationError("log bracket for 4 out of line with 2x log 2")
    if out[4].lo != 2 * out[2].lo:
        raise CertificationError("log bracket lower ends not exactly doubled")
    return out


def sqrt_enclosure(m: int, bits: int = 40) -> RationalInterval:
    """Bracket sqrt(m) by bisection on x^2 - m, width at most 2^-bits."""
    if m == 1:
        return RationalInterval.point(1)
    if not 1 < m <= 4:
        raise ValueError("only small radicands needed here")
    lo, hi = F(1), F(2)
    for _ in range(bits):
        mid = (lo + hi) / 2
        if mid * mid <= m:
            lo = mid
        else:
            hi = mid
    return RationalInterval(lo, hi)


# --------------------------------------------------------- power combos


@dataclass(frozen=True)
class PowerCombo:
    """sum over m = 2,3,4 of (a_m + b_m s) m^(-s/2), coefficients exact."""

    a2: Fraction
    a3: Fraction
    a4: Fraction
    b2: Fraction
    b3: Fraction
    b4: Fraction

    def __post_init__(self):
        for name in ("a2", "a3", "a4", "b2", "b3", "b4"):
            object.__setattr__(self, name, F(getattr(self, name)))

    def pair(self, m: int) -> tuple:
        return {
            2: (self.a2, self.b2),
            3: (self.a3, self.b3),
            4: (self.a4, self.b4),
        }[m]

    def __add__(self, other: "PowerCombo") -> "PowerCombo":
        return PowerCombo(
            self.a2 + other.a2, self.a3 + other.a3, self.a4 + other.a4,
            self.b2 + other.b2, self.b3 + other.b3, self.b4 + other.b4,
        )

    def __neg__(self) -> "PowerCombo":
        return self.scale(-1)

    def scale(self, c) -> "PowerCombo":
        c = F(c)
        return PowerCombo(
            self.a2 * c, self.a3 * c, self.a4 * c,
            self.b2 * c, self.b3 * c, self.b4 * c,
        )

    def evaluate_float(self, s: float) -> float:
        total = 0.0
        for m in (2, 3, 4):
            a, b = self.pair(m)
            total += (float(a) + float(b) * s) * m ** (-s / 2)
        return total

    def enclose_at_integer(self, s: int) -> RationalInterval:
        """Exact-interval value at an integer exponent.

        Even s stays rational; odd s brings in one factor of sqrt(2) or
        sqrt(3) per base, bracketed to 2^-40.
        """
        total = RationalInterval.point(0)
        for m in (2, 3, 4):
            a, b = self.pair(m)
            total = total + _integer_power_value(m, s) * (a + b * s)
        return total

    def quadratic(self) -> "QuadCombo":
        return QuadCombo(
            (
                (self.a2, self.b2, F(0)),
                (self.a3, self.b3, F(0)),
                (self.a4, self.b4, F(0)),
            )
        )


def _integer_power_value(m: int, s: int) -> RationalInterval:
    # m^(-s/2) = m^q * sqrt(m)^r with -s = 2q + r, r in {0, 1}
    q, r = divmod(-s, 2)
    base = RationalInterval.point(F(m) ** q)
    if r:
        base = base * sqrt_enclosure(m)
    return base


@dataclass(frozen=True)
class QuadCombo:
    """Combo whose per-base coefficients are quadratic polynomials in s.

    Needed because the root-certification polynomial multiplies linear
    combos by further linear factors of s.  ``quads`` holds one
    (c0, c1, c2) triple per base m = 2, 3, 4.
    """

    quads: tuple

    def __post_init__(self):
        fixed = tuple(tuple(F(c) for c in triple) for triple in self.quads)
        if len(fixed) != 3 or any(len(t) != 3 for t in fixed):
            raise ValueError("need a coefficient triple per base")
        object.__setattr__(self, "quads", fixed)

    def __add__(self, other: "QuadCombo") -> "QuadCombo":
        return QuadCombo(
            tuple(
                tuple(x + y for x, y in zip(a, b))
                for a, b in zip(self.quads, other.quads)
            )
        )

    def scale(self, c) -> "QuadCombo":
        c = F(c)
        return QuadCombo(tuple(tuple(x * c for x in t) for t in self.quads))

    def mul_affine(self, c0, c1) -> "QuadCombo":
        """Multiply by (c0 + c1 s); the degree budget allows this only
        for combos that are still linear in s."""
        c0, c1 = F(c0), F(c1)
        out = []
        for p0, p1, p2 in self.quads:
            if p2 and c1:
                raise ValueError("product would exceed quadratic degree")
            out.append(
                (p0 * c0, p1 * c0 + p0 * c1, p2 * c0 + p1 * c1)
            )
        return QuadCombo(tuple(out))

    def evaluate_float(self, s: float) -> float:
        total = 0.0
        for m, (p0, p1, p2) in zip((2, 3, 4), self.quads):
            total += (float(p0) + float(p1) * s + float(p2) * s * s) * m ** (
                -s / 2
            )
        return total

    def evaluate_even(self, s: int) -> Fraction:
        """Exact value at an even integer exponent."""
        if s % 2:
            raise ValueError("exact evaluation needs an even exponent")
        total = F(0)
        for m, (p0, p1, p2) in zip((2, 3, 4), self.quads):
            total += (p0 + p1 * s + p2 * s * s) * F(m) ** (-s // 2)
        return total


# ------------------------------------------------- interval Taylor traps

ANCHOR_RANGE = (-2, 16)
_SERIES_ORDER = 12
_FACT = [math.factorial(j) for j in range(_SERIES_ORDER + 1)]


@functools.cache
def twelfth_derivative_premise() -> Fraction:
    """Upper bound on |d^12/ds^12 m^(-s/2)| over the anchor range; the
    trap remainder interval [-1/12!, 1/12!] is valid because it is < 1."""
    worst = F(0)
    for m, (_, hi) in LOG_BRACKETS.items():
        # m^(-s/2) peaks at s = -2 where it equals m
        bound = (hi / 2) ** _SERIES_ORDER * m
        worst = max(worst, bound)
    if worst >= 1:
        raise CertificationError("twelfth-derivative premise failed")
    return worst


@functools.cache
def power_trap_series(m: int, two_k: int, side: str) -> IntervalPolynomial:
    """Interval polynomial in t trapping m^(-s/2) on a unit s-interval.

    side "left"  : s = two_k - t, so t in [0,1] sweeps [two_k-1, two_k];
    side "right" : s = two_k + t, sweeping [two_k, two_k+1].
    """
    _require_anchor(two_k, side)
    twelfth_derivative_premise()
    log_m = RationalInterval(*LOG_BRACKETS[m])
    sign = 1 if side == "left" else -1
    base = F(m) ** (-two_k // 2)
    coeffs = []
    power = RationalInterval.point(1)
    for j in range(_SERIES_ORDER):
        coeffs.append(power * F(sign**j * base, 2**j * _FACT[j]))
        power = power * log_m
    coeffs.append(RationalInterval(F(-1, _FACT[12]), F(1, _FACT[12])))
    return IntervalPolynomial(coeffs)


def _require_anchor(two_k: int, side: str) -> None:
    if side not in ("left", "right"):
        raise ValueError(f"side must be left or right, got {side!r}")
    lo, hi = ANCHOR_RANGE
    if two_k % 2 or not lo <= two_k <= hi:
        raise ValueError(f"anchor must be an even integer in [{lo}, {hi}]")
    if (two_k, side) in ((lo, "left"), (hi, "right")):
        raise ValueError("unit interval escapes the supported exponent range")


@dataclass(frozen=True)
class ApproxPair:
    """Rational polynomials bracketing a combo on one unit s-interval,
    as functions of the local variable t in [0, 1]."""

    under: tuple
    over: tuple
    two_k: int
    side: str

    @property
    def s_interval(self) -> tuple:
        if self.side == "left":
            return (self.two_k - 1, self.two_k)
        return (self.two_k, self.two_k + 1)

    def s_to_t(self, s) -> Fraction:
        s = F(s)
        return self.two_k - s if self.side == "left" else s - self.two_k


def _trap_quad(combo: QuadCombo, two_k: int, side: str) -> IntervalPolynomial:
    sign = -1 if side == "left" else 1
    total = IntervalPolynomial.from_exact([0])
    for m, (p0, p1, p2) in zip((2, 3, 4), combo.quads):
        # substitute s = two_k + sign*t exactly into the coefficient
        q0 = p0 + p1 * two_k + p2 * two_k * two_k
        q1 = sign * (p1 + 2 * p2 * two_k)
        q2 = p2
        factor = IntervalPolynomial.from_exact([q0, q1, q2])
        total = total + factor * power_trap_series(m, two_k, side)
    return total


def combo_approximations(
    combo: Union[PowerCombo, QuadCombo], two_k: int, side: str
) -> ApproxPair:
    """Under/over polynomial approximations of a combo near one anchor."""
    if isinstance(combo, PowerCombo):
        combo = combo.quadratic()
    trapped = _trap_quad(combo, two_k, side)
    return ApproxPair(
        under=tuple(trapped.lower_envelope()),
        over=tuple(trapped.upper_envelope()),
        two_k=two_k,
        side=side,
    )


# ------------------------------------------------------ dominance provers


def _mapped_coefficients(coeffs: Sequence, alpha, beta) -> list:
    """Dense coefficients of p(alpha t + beta)."""
    poly = MultiPoly(1, {i: F(c) for i, c in enumerate(coeffs) if c})
    if (alpha, beta) != (F(1), F(0)):
        poly = poly.substitute_affine(0, alpha, beta)
    if not poly.terms:
        return [F(0)]
    dense = [F(0)] * (poly.degree(0) + 1)
    for k, c in poly.terms.items():
        dense[k] = c
    return dense


def _prefix_dominant(dense: Sequence, strict: bool) -> bool:
    partial = F(0)
    for c in dense:
        partial += c
        if partial < 0 or (strict and partial <= 0):
            return False
    return partial > 0


def wpd(coeffs: Sequence, interval: tuple = (0, 1)) -> bool:
    """Weak positive dominance of a univariate polynomial on [a, b].

    After mapping [0,1] onto [a,b], every prefix coefficient sum must be
    nonnegative and the full sum positive; that certifies positivity on
    the half-open (a, b].
    """
    a, b = (F(x) for x in interval)
    if not b > a:
        raise ValueError("empty interval")
    return _prefix_dominant(_mapped_coefficients(coeffs, b - a, a), False)


def wpd_either(coeffs: Sequence, interval: tuple = (0, 1)) -> Optional[str]:
    """WPD under whichever of the two affine surjections [0,1] -> [a,b]
    works; a steeply decreasing positive polynomial often passes only
    after reversal.

    Returns "forward", "reversed", or None.  Either outcome certifies
    positivity on the open interval together with the endpoint the
    passing map sends t = 1 to.
    """
    a, b = (F(x) for x in interval)
    if not b > a:
        raise ValueError("empty interval")
    if _prefix_dominant(_mapped_coefficients(coeffs, b - a, a), False):
        return "forward"
    if _prefix_dominant(_mapped_coefficients(coeffs, a - b, b), False):
        return "reversed"
    return None


@dataclass(frozen=True)
class MarkedPolynomial:
    """A dominance-search node: polynomials on [0,1]^n plus the per-axis
    subdivision depths used to pick the next axis to split."""

    polys: tuple
    marker: tuple


@dataclass(frozen=True)
class DominanceReport:
    certified: bool
    expansions: int
    budget: int


def _dominant(poly: MultiPoly) -> bool:
    """All cumulative coefficient sums over the exponent lattice positive."""
    if not poly.terms:
        return False
    n = poly.nvars
    dims = [poly.degree(i) + 1 for i in range(n)]
    table = {}
    for exps, c in zip(poly.exponents(), poly.terms.values()):
        table[exps] = c
    # running prefix sums along each axis in turn
    grid = list(itertools.product(*(range(d) for d in dims)))
    dense = {e: table.get(e, F(0)) for e in grid}
    for axis in range(n):
        for e in grid:
            if e[axis]:
                prev = list(e)
                prev[axis] -= 1
                dense[e] += dense[tuple(prev)]
    return all(v > 0 for v in dense.values())


def _youngest_axis(marker: Sequence[int]) -> int:
    low = min(marker)
    return list(marker).index(low)


def _subdivide(node: MarkedPolynomial) -> list:
    axis = _youngest_axis(node.marker)
    marker = tuple(
        d + 1 if i == axis else d for i, d in enumerate(node.marker)
    )
    half = F(1, 2)
    out = []
    for beta in (F(0), half):
        polys = tuple(p.substitute_affine(axis, half, beta) for p in node.polys)
        out.append(MarkedPolynomial(polys, marker))
    return out


def parallel_positive_dominance(
    polys: Sequence[MultiPoly], budget: int = 1_000_000
) -> DominanceReport:
    """Certify that at each point of [0,1]^n at least one listed
    polynomial is positive, by synchronized subdivision.

    A node is discharged as soon as any of its polynomials passes the
    dominance test.  Budget counts node expansions; exhaustion is
    inconclusive, never a refutation.
    """
    polys = tuple(polys)
    if not polys:
        raise ValueError("need at least one polynomial")
    n = polys[0].nvars
    if any(p.nvars != n for p in polys):
        raise ValueError("variable count mismatch")
    stack = [MarkedPolynomial(polys, (0,) * n)]
    expansions = 0
    while stack:
        node = stack.pop()
        if any(_dominant(p) for p in node.polys):
            continue
        if expansions >= budget:
            return DominanceReport(False, expansions, budget)
        expansions += 1
        stack.extend(_subdivide(node))
    return DominanceReport(True, expansions, budget)


def positive_dominance(
    poly: MultiPoly, budget: int = 1_000_000
) -> DominanceReport:
    """Certify poly > 0 on [0,1]^n by subdividing dominance."""
    return parallel_positive_dominance((poly,), budget)


# ------------------------------------------------- coefficient systems

# Rows are integer vectors over the basis
# (2^(-s/2), 3^(-s/2), 4^(-s/2), s 2^(-s/2), s 3^(-s/2), s 4^(-s/2)),
# divided by the case denominator.
_CASE_TABLES = {
    1: (
        144,
        {
            "a0": (0, 0, -144, 0, 0, 0),
            "a1": (-312, -96, 408, 24, 80, 0),
            "a2": (684, -288, -396, -54, -144, 0),
            "a3": (-402, 264, 138, 33, 68, 0),
            "a4": (30, -24, -6, -3, -4, 0),
            "delta": (2496, 768, -3264, -192, -640, -144),
        },
    ),
    2: (
        792,
        {
            "a0": (0, 0, 792, 0, 0, 0),
            "a1": (792, 1152, -1944, -54, -288, 0),
            "a2": (-1254, -96, 1350, 87, 376, 0),
            "a3": (528, -312, -216, -39, -98, 0),
            "a4": (-66, 48, 18, 6, 10, 0),
            "delta": (-6336, -9216, 15552, 432, 2304, 792),
        },
    ),
    3: (
        268536,
        {
            "a0": (0, 0, 268536, 0, 0, 0),
            "a1": (88440, 503040, -591480, -4254, -65728, 0),
            "a2": (-77586, -249648, 327234, 2361, 65896, 0),
            "a3": (41808, -19440, -22368, -2430, -9076, 0),
            "a4": (-402, 264, 138, 33, 68, 0),
            "delta": (-707520, -4024320, 4731840, 34032, 525824, 268536),
        },
    ),
}

# basis functions as (kernel exponent, weight) sums; the last one in
# case 3 is the high-exponent combination
_CASE_BASIS = {
    1: (((1, 1),), ((2, 1),), ((3, 1),), ((5, 1),)),
    2: (((1, 1),), ((2, 1),), ((4, 1),), ((6, 1),)),
    3: (((1, 1),), ((2, 1),), ((5, 1),), ((10, 1), (5, 28), (2, 102))),
}

_CASE_RANGES = {1: (F(-2), F(0)), 2: (F(0), F(6)), 3: (F(6), F(13))}

POSITIVITY_FUNCTIONS = ("a1", "a2", "a3", "a4", "delta")


@dataclass(frozen=True)
class TumanovCase:
    case: int
    s_range: tuple
    basis: tuple
    denominator: int
    rows: dict

    def combo(self, name: str) -> PowerCombo:
        return self.rows[name]


def tumanov_coefficients(case: int) -> TumanovCase:
    if case not in _CASE_TABLES:
        raise ValueError("case must be 1, 2 or 3")
    den, table = _CASE_TABLES[case]
    rows = {
        name: PowerCombo(*(F(v, den) for v in vec))
        for name, vec in table.items()
    }
    return TumanovCase(
        case=case,
        s_range=_CASE_RANGES[case],
        basis=_CASE_BASIS[case],
        denominator=den,
        rows=rows,
    )


def interpolation_residual(case: int, s: float) -> float:
    """Residual of the compiled rows against a direct numeric solve of
    the defining interpolation conditions at exponent s.

    The interpolant must match the power kernel in value at sqrt 2,
    sqrt 3, 2 and in derivative at sqrt 2, sqrt 3; delta is twice the
    derivative gap at 2.  Returns the max row disagreement.
    """
    import numpy as np

    data = tumanov_coefficients(case)

    def basis_val(fn, r):
        return sum(w * (4 - r * r) ** k for k, w in fn)

    def basis_deriv(fn, r):
        return sum(w * k * (4 - r * r) ** (k - 1) * (-2 * r) for k, w in fn)

    sign = -1.0 if s < 0 else 1.0
    def rs(r):
        return sign * r ** (-s)

    def rs_deriv(r):
        return sign * (-s) * r ** (-s - 1)

    pts = [math.sqrt(2), math.sqrt(3), 2.0]
    rows = []
    rhs = []
    for r in pts:
        rows.append([1.0] + [basis_val(fn, r) for fn in data.basis])
        rhs.append(rs(r))
    for r in pts[:2]:
        rows.append([0.0] + [basis_deriv(fn, r) for fn in data.basis])
        rhs.append(rs_deriv(r))
    sol = np.linalg.solve(np.array(rows), np.array(rhs))
    gamma_deriv_2 = sum(
        c * basis_deriv(fn, 2.0) for c, fn in zip(sol[1:], data.basis)
    )
    delta = 2 * gamma_deriv_2 - 2 * rs_deriv(2.0)
    computed = dict(zip(("a0", "a1", "a2", "a3", "a4"), sol))
    computed["delta"] = delta
    worst = 0.0
    for name, value in computed.items():
        worst = max(
            worst, abs(value - data.combo(name).evaluate_float(float(s)))
        )
    return worst


# ------------------------------------------------ positivity schedules

# (anchor, side) covering each unit s-interval with the series whose
# envelope sits below the combo there
_SCHEDULES = {
    1: ((-2, "right"), (0, "left")),
    2: (
        (0, "right"),
        (2, "left"),
        (2, "right"),
        (4, "left"),
        (4, "right"),
        (6, "left"),
    ),
    3: (
        (6, "right"),
        (8, "left"),
        (8, "right"),
        (10, "left"),
        (10, "right"),
        (12, "left"),
        (12, "right"),
    ),
}

_ENDPOINTS = {1: (), 2: (1, 2, 3, 4, 5, 6), 3: (6, 7, 8, 9, 10, 11, 12, 13)}

EXTENDED_ANCHOR = (14, "left")
EXTENDED_T_WINDOW = (F(15, 16), F(1))  # t = 14 - s, so s in [13, 13 + 1/16]


@dataclass(frozen=True)
class PositivityEntry:
    function: str
    two_k: int
    side: str
    s_interval: tuple
    wpd_ok: bool
    orientation: Optional[str] = None
    pd_ok: Optional[bool] = None


@dataclass(frozen=True)
class PositivityReport:
    case: int
    entries: tuple
    endpoint_checks: tuple  # (s, function, verified)
    gamma_zero_negative: Optional[bool]
    extended_entries: tuple

    @property
    def certified(self) -> bool:
        if not all(e.wpd_ok for e in self.entries):
            return False
        if any(e.pd_ok is False for e in self.entries):
            return False
        if not all(ok for _, _, ok in self.endpoint_checks):
            return False
        if self.gamma_zero_negative is False:
            return False
        return all(e.wpd_ok for e in self.extended_entries)

    def to_json_dict(self) -> dict:
        return {
            "case": self.case,
            "certified": self.certified,
            "entries": [
                {
                    "function": e.function,
                    "anchor": e.two_k,
                    "side": e.side,
                    "s_interval": [str(x) for x in e.s_interval],
                    "wpd": e.wpd_ok,
                    **(
                        {"orientation": e.orientation}
                        if e.orientation is not None
                        else {}
                    ),
                    **({"pd": e.pd_ok} if e.pd_ok is not None else {}),
                }
                for e in self.entries + self.extended_entries
            ],
            "endpoints": [
                {"s": s, "function": fn, "positive": ok}
                for s, fn, ok in self.endpoint_checks
            ],
            **(
                {"gamma_zero_negative": self.gamma_zero_negative}
                if self.gamma_zero_negative is not None
                else {}
            ),
        }


def _gamma_at_origin(data: TumanovCase) -> PowerCombo:
    """Gamma_s evaluated at radial distance zero, as a power combo."""
    total = data.combo("a0")
    for fn, name in zip(data.basis, ("a1", "a2", "a3", "a4")):
        weight = sum(w * F(4) ** k for k, w in fn)
        total = total + data.combo(name).scale(weight)
    return total


def verify_coefficient_positivity(
    case: int, extended: bool = False
) -> PositivityReport:
    """Prove the five coefficient functions positive across the case's
    exponent range (and the interpolant negative at the origin for the
    negative-exponent case)."""
    data = tumanov_coefficients(case)
    entries = []
    for name in POSITIVITY_FUNCTIONS:
        combo = data.combo(name)
        for two_k, side in _SCHEDULES[case]:
            pair = combo_approximations(combo, two_k, side)
            if case == 1:
                # no integer-endpoint sweep here, so the orientation must
                # stay forward to keep t = 1 (the shared endpoint) covered
                ok = wpd(pair.under, (0, F(1, 2))) and wpd(
                    pair.under, (F(1, 2), 1)
                )
                orientation = "forward" if ok else None
            else:
                orientation = wpd_either(pair.under, (0, 1))
                ok = orientation is not None
            pd_flag = None
            if case == 3:
                pd_flag = _prefix_dominant(
                    _mapped_coefficients(pair.under, F(1), F(0)), True
                ) or _prefix_dominant(
                    _mapped_coefficients(pair.under, F(-1), F(1)), True
                )
            entries.append(
                PositivityEntry(
                    function=name,
                    two_k=two_k,
                    side=side,
                    s_interval=pair.s_interval,
                    wpd_ok=ok,
                    orientation=orientation,
                    pd_ok=pd_flag,
                )
            )

    endpoint_checks = []
    for s in _ENDPOINTS[case]:
        for name in POSITIVITY_FUNCTIONS:
            value = data.combo(name).enclose_at_integer(s)
            endpoint_checks.append((s, name, value.lo > 0))

    gamma_zero_negative = None
    if case == 1:
        negated = -_gamma_at_origin(data)
        flags = []
        for two_k, side in _SCHEDULES[1]:
            pair = combo_approximations(negated, two_k, side)
            flags.append(
                wpd(pair.under, (0, F(1, 2))) and wpd(pair.under, (F(1, 2), 1))
            )
        gamma_zero_negative = all(flags)

    extended_entries = []
    if extended:
        if case != 3:
            raise ValueError("the extended exponent window belongs to case 3")
        two_k, side = EXTENDED_ANCHOR
        for name in POSITIVITY_FUNCTIONS:
            pair = combo_approximations(data.combo(name), two_k, side)
            orientation = wpd_either(pair.under, EXTENDED_T_WINDOW)
            # exact endpoint values close the window on both sides
            ends = all(
                poly_eval(pair.under, t) > 0 for t in EXTENDED_T_WINDOW
            )
            extended_entries.append(
                PositivityEntry(
                    function=name,
                    two_k=two_k,
                    side=side,
                    s_interval=(F(13), F(13) + F(1, 16)),
                    wpd_ok=orientation is not None and ends,
                    orientation=orientation,
                )
            )

    return PositivityReport(
        case=case,
        entries=tuple(entries),
        endpoint_checks=tuple(endpoint_checks),
        gamma_zero_negative=gamma_zero_negative,
        extended_entries=tuple(extended_entries),
    )


# --------------------------------------------- simple roots for case 3

# The interpolation gap H(r) = R_s(r) - Gamma_s(r) has derivative
# -r^(s-1) (s Gamma + r Gamma') up to positive factors; substituting
# t = 4 - r^2 and using r G_k' = 2k G_k - 8k G_{k-1} turns
# s Gamma + r Gamma' into a polynomial in t whose coefficients are
# quadratic power combos.

PHI_KERNEL_EXPONENTS = (0, 1, 2, 5, 10)


def _case3_c_vector() -> dict:
    data = tumanov_coefficients(3)
    a4 = data.combo("a4")
    return {
        0: data.combo("a0"),
        1: data.combo("a1"),
        2: data.combo("a2") + a4.scale(102),
        5: data.combo("a3") + a4.scale(28),
        10: a4,
    }


def case3_phi() -> dict:
    """Coefficients (by power of t) of the scaled derivative polynomial."""
    c = _case3_c_vector()
    phi: dict = {}

    def add(power: int, combo: QuadCombo) -> None:
        if power in phi:
            phi[power] = phi[power] + combo
        else:
            phi[power] = combo

    for k, combo in c.items():
        quad = combo.quadratic()
        add(k, quad.mul_affine(2 * k, 1))  # (s + 2k) c_k t^k
        if k:
            add(k - 1, quad.scale(-8 * k))  # -8k c_k t^(k-1)
    return {p: q for p, q in phi.items() if any(any(t) for t in q.quads)}


def phi_derivative(phi: dict) -> dict:
    return {p - 1: combo.scale(p) for p, combo in phi.items() if p}


def phi_envelopes(phi: dict, two_k: int, side: str) -> tuple:
    """Two-variable under/over envelopes of the polynomial on one unit
    exponent interval, with the radial variable rescaled to [0, 1].

    Variable 0 is the local exponent offset t; variable 1 is u = t_r/4
    where t_r in [0, 4] is the polynomial variable.  u^j >= 0 keeps the
    per-coefficient envelopes valid.
    """
    under: dict = {}
    over: dict = {}
    for power, combo in phi.items():
        trapped = _trap_quad(combo, two_k, side)
        scale = F(4) ** power
        for i, c in enumerate(trapped.lower_envelope()):
            if c:
                under[(i, power)] = c * scale
        for i, c in enumerate(trapped.upper_envelope()):
            if c:
                over[(i, power)] = c * scale
    return (
        MultiPoly.from_exponents(2, under),
        MultiPoly.from_exponents(2, over),
    )


@dataclass(frozen=True)
class SimpleRootInterval:
    two_k: int
    side: str
    s_interval: tuple
    certified: bool
    expansions: int


@dataclass(frozen=True)
class SimpleRootReport:
    intervals: tuple
    budget: int

    @property
    def certified(self) -> bool:
        return all(e.certified for e in self.intervals)

    def to_json_dict(self) -> dict:
        return {
            "task": "simple-roots",
            "certified": self.certified,
            "budget": self.budget,
            "intervals": [
                {
                    "anchor": e.two_k,
                    "side": e.side,
                    "s_interval": [str(x) for x in e.s_interval],
                    "certified": e.certified,
                    "expansions": e.expansions,
                }
                for e in self.intervals
            ],
        }


def case3_simple_roots(budget: int = 1_000_000) -> SimpleRootReport:
    """No common zero of the gap derivative and its t-derivative.

    On each unit exponent interval, at every (s, t) one of phi > 0,
    phi < 0, phi' > 0, phi' < 0 must hold; the parallel dominance prover
    certifies this from the four envelope polynomials.
    """
    phi = case3_phi()
    dphi = phi_derivative(phi)
    results = []
    for two_k, side in _SCHEDULES[3]:
        targets = []
        for source in (phi, dphi):
            under, over = phi_envelopes(source, two_k, side)
            targets.append(under)
            targets.append(over.scale(-1))
        report = parallel_positive_dominance(targets, budget)
        lo = two_k - 1 if side == "left" else two_k
        results.append(
            SimpleRootInterval(
                two_k=two_k,
                side=side,
                s_interval=(F(lo), F(lo + 1)),
                certified=report.certified,
                expansions=report.expansions,
            )
        )
    return SimpleRootReport(intervals=tuple(results), budget=budget)

"""Exact second-order analysis of the energies at the bipyramid point.

Everything here happens at or near the critical configuration, in the
flattened coordinates (x1, ..., x7).  The energy splits into ten terms:
four involving the squared chordal distance to the north pole and six
involving pair interactions; both kinds are rational functions whose
denominators are products of factors (1 + u^2 + v^2), one per planar
point.  Derivatives stay inside that family, so symbolic differentiation
is a cheap closed operation and every evaluation at the critical point
lands in the quadratic field generated by sqrt(3).

The positive-definiteness certificate combines three exact ingredients:
an eigenvalue lower bound at the critical point (alternating sign test
on the shifted characteristic polynomial), a norm bound on the vector of
third partials, and Taylor control of everything of order four and up.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .energy import Potential
from .multipoly import MultiPoly
from .qsqrt3 import QSqrt3, sqrt_fraction_bounds

F = Fraction


class CertificationError(Exception):
    """A required exact inequality failed; the certificate cannot be issued."""


# ------------------------------------------------------------------ rational
# functions with pair-product denominators


def _pair_factor(nvars: int, p: int) -> MultiPoly:
    # 1 + x_{2p}^2 + x_{2p+1}^2
    one = MultiPoly.constant(nvars, 1)
    a = MultiPoly.variable(nvars, 2 * p)
    b = MultiPoly.variable(nvars, 2 * p + 1)
    return one + a * a + b * b


_FACTOR_CACHE: dict = {}


def pair_factor(nvars: int, p: int) -> MultiPoly:
    got = _FACTOR_CACHE.get((nvars, p))
    if got is None:
        got = _FACTOR_CACHE.setdefault((nvars, p), _pair_factor(nvars, p))
    return got


class PairRational:
    """poly / prod_p (1 + x_{2p}^2 + x_{2p+1}^2)^powers[p], exactly."""

    __slots__ = ("poly", "powers")

    def __init__(self, poly: MultiPoly, powers: Sequence[int]):
        if poly.nvars != 2 * len(powers):
            raise ValueError("need one denominator power per variable pair")
        self.poly = poly
        self.powers = tuple(powers)

    @property
    def nvars(self) -> int:
        return self.poly.nvars

    def diff(self, i: int) -> "PairRational":
        p = i // 2
        m = self.powers[p]
        factor = pair_factor(self.nvars, p)
        xi = MultiPoly.variable(self.nvars, i)
        num = factor * self.poly.diff(i) - (2 * m) * xi * self.poly
        powers = list(self.powers)
        powers[p] = m + 1
        return PairRational(num, powers)

    def evaluate(self, point: Sequence):
        value = self.poly.evaluate(point)
        for p, m in enumerate(self.powers):
            if m:
                den = 1 + point[2 * p] ** 2 + point[2 * p + 1] ** 2
                value = value / den ** m
        return value

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PairRational)
            and self.powers == other.powers
            and self.poly == other.poly
        )

    def __repr__(self) -> str:
        return f"PairRational(terms={len(self.poly.terms)}, powers={self.powers})"


def point_kernel(k: int) -> PairRational:
    """Kernel of the interaction with the north pole, in 2 variables."""
    if k < 1:
        raise ValueError("exponent must be positive")
    a = MultiPoly.variable(2, 0)
    b = MultiPoly.variable(2, 1)
    num = ((a * a + b * b) ** k).scale(4**k)
    return PairRational(num, (k,))


def pair_kernel(k: int) -> PairRational:
    """Kernel of the interaction between two finite points, 4 variables."""
    if k < 1:
        raise ValueError("exponent must be positive")
    a, b, c, d = (MultiPoly.variable(4, i) for i in range(4))
    one = MultiPoly.constant(4, 1)
    num = one + 2 * a * c + 2 * b * d + (a * a + b * b) * (c * c + d * d)
    return PairRational((num**k).scale(4**k), (k, k))


class DerivativeTable:
    """Memoized partial derivatives of a PairRational, keyed by exponent
    tuple.  Chains are built one differentiation at a time so shared
    prefixes are computed once."""

    def __init__(self, base: PairRational):
        self.base = base
        self.cache: dict = {(0,) * base.nvars: base}

    def get(self, exps: Sequence[int]) -> PairRational:
        key = tuple(exps)
        got = self.cache.get(key)
        if got is None:
            i = next(j for j, e in enumerate(key) if e)
            parent = list(key)
            parent[i] -= 1
            got = self.get(tuple(parent)).diff(i)
            self.cache[key] = got
        return got


def walk_derivatives(
    base: PairRational, max_weight: int, visit: Callable
) -> None:
    """Depth-first over all derivative multi-indices of weight <= max_weight.

    Only the current chain is held in memory, which matters for the
    weight-8 sweeps whose nodes have six-figure term counts.
    """
    exps = [0] * base.nvars

    def rec(node: PairRational, weight: int, min_var: int) -> None:
        visit(tuple(exps), weight, node)
        if weight == max_weight:
            return
        for i in range(min_var, base.nvars):
            exps[i] += 1
            rec(node.diff(i), weight + 1, i)
            exps[i] -= 1

    rec(base, 0, 0)


# ------------------------------------------------------------ energy at P0

HALF = F(1, 2)
ROOT3_HALF = QSqrt3(F(0), HALF)

# Planar coordinates of the four finite points of the critical configuration.
P0_PLANAR = (
    (QSqrt3(F(1)), QSqrt3(F(0))),
    (QSqrt3(-HALF), -ROOT3_HALF),
    (QSqrt3(F(0)), QSqrt3(F(0))),
    (QSqrt3(-HALF), ROOT3_HALF),
)

# Flattened coordinates: the first point is pinned to the x-axis.
P0_COORDS = (
    P0_PLANAR[0][0],
    P0_PLANAR[1][0],
    P0_PLANAR[1][1],
    P0_PLANAR[2][0],
    P0_PLANAR[2][1],
    P0_PLANAR[3][0],
    P0_PLANAR[3][1],
)

# The ten-term composition: which of the seven coordinates feed each
# kernel.  None marks the pinned zero coordinate of the first point.
POINT_SLOTS = ((0, None), (1, 2), (3, 4), (5, 6))
ENERGY_TERMS = tuple(
    [("f", POINT_SLOTS[i]) for i in range(4)]
    + [
        ("g", POINT_SLOTS[i] + POINT_SLOTS[j])
        for i in range(4)
        for j in range(i + 1, 4)
    ]
)


class EnergyExpression:
    """The 7-variable energy of one kernel exponent, term by term.

    Partials are computed per term: a multi-index over the seven flat
    coordinates translates into a multi-index over the two or four slots
    of each kernel, and terms not containing every differentiated
    variable drop out.
    """

    def __init__(self, k: int):
        self.k = k
        self._tables = {"f": DerivativeTable(point_kernel(k)),
                        "g": DerivativeTable(pair_kernel(k))}

    def _term_point(self, slots, point) -> tuple:
        return tuple(0 if v is None else point[v] for v in slots)

    def evaluate(self, point: Sequence):
        total = 0
        for kind, slots in ENERGY_TERMS:
            base = self._tables[kind].base
            total = total + base.evaluate(self._term_point(slots, point))
        return total

    def partial_at(self, exps: Sequence[int], point: Optional[Sequence] = None):
        """Exact value of the |exps|-th partial at a point (default: the
        critical configuration)."""
        if point is None:
            point = P0_COORDS
        if len(exps) != 7:
            raise ValueError("need a weight over 7 coordinates")
        support = {i for i, e in enumerate(exps) if e}
        total = 0
        for kind, slots in ENERGY_TERMS:
            placed = {v: slot for slot, v in enumerate(slots) if v is not None}
            if not support <= placed.keys():
                continue
            local = [0] * (2 if kind == "f" else 4)
            for v in support:
                local[placed[v]] = exps[v]
            node = self._tables[kind].get(tuple(local))
            total = total + node.evaluate(self._term_point(slots, point))
        return total

    def gradient(self, point: Optional[Sequence] = None) -> tuple:
        out = []
        for i in range(7):
            exps = [0] * 7
            exps[i] = 1
            out.append(self.partial_at(exps, point))
        return tuple(out)

    def hessian(self, point: Optional[Sequence] = None) -> tuple:
        rows = []
        for i in range(7):
            row = []
            for j in range(7):
                exps = [0] * 7
                exps[i] += 1
                exps[j] += 1
                row.append(self.partial_at(exps, point))
            rows.append(tuple(row))
        return tuple(rows)


_EXPRESSIONS: dict = {}


def build_energy_expression(k: int) -> EnergyExpression:
    if not 2 <= k <= 10:
        raise ValueError("kernel exponent out of range")
    got = _EXPRESSIONS.get(k)
    if got is None:
        got = _EXPRESSIONS.setdefault(k, EnergyExpression(k))
    return got


def _as_qsqrt3(value) -> QSqrt3:
    return value if isinstance(value, QSqrt3) else QSqrt3(F(value))


def _combine_matrices(potential: Potential, matrices: dict) -> tuple:
    rows = []
    for i in range(7):
        row = []
        for j in range(7):
            acc = QSqrt3(F(0))
            for k, weight in potential.terms:
                acc = acc + _as_qsqrt3(matrices[k][i][j]) * weight
            row.append(acc)
        rows.append(tuple(row))
    return tuple(rows)


def hessian_at_p0(potential: Potential) -> tuple:
    matrices = {
        k: build_energy_expression(k).hessian() for k, _ in potential.terms
    }
    return _combine_matrices(potential, matrices)


# --------------------------------------------------- eigenvalue certificate


def characteristic_polynomial(matrix: Sequence[Sequence[QSqrt3]]) -> list:
    """Coefficients [c_n, ..., c_0] of det(tI - M), leading first.

    Classical trace recursion; only divisions by small integers occur,
    so the arithmetic stays exact in the quadratic field.
    """
    n = len(matrix)
    zero = QSqrt3(F(0))
    m = [[_as_qsqrt3(matrix[i][j]) for j in range(n)] for i in range(n)]
    coeffs = [QSqrt3(F(1))]
    aux = [[zero] * n for _ in range(n)]
    for step in range(1, n + 1):
        # aux <- M (aux + c I)
        c = coeffs[-1]
        shifted = [
            [aux[i][j] + (c if i == j else zero) for j in range(n)]
            for i in range(n)
        ]
        aux = [
            [
                sum((m[i][t] * shifted[t][j] for t in range(n)), zero)
                for j in range(n)
            ]
            for i in range(n)
        ]
        trace = sum((aux[i][i] for i in range(n)), zero)
        coeffs.append(-(trace / step))
    return coeffs


def shift_polynomial(coeffs: Sequence[QSqrt3], lam: Fraction) -> list:
    """Coefficients of p(t + lam), leading first."""
    n = len(coeffs) - 1
    lam = F(lam)
    out = [QSqrt3(F(0)) for _ in range(n + 1)]
    for i, c in enumerate(coeffs):  # c multiplies t^(n-i)
        d = n - i
        for j in range(d + 1):
            out[n - j] = out[n - j] + c * (F(math.comb(d, j)) * lam ** (d - j))
    return out


def alternating_criterion(matrix, lam) -> bool:
    """True when the shifted characteristic polynomial has strictly
    alternating nonzero coefficients, certifying every eigenvalue > lam."""
    shifted = shift_polynomial(characteristic_polynomial(matrix), lam)
    signs = []
    for c in shifted:
        if c == QSqrt3(F(0)):
            return False
        signs.append(c.sign())
    return all(signs[i] == -signs[i + 1] for i in range(len(signs) - 1))


def hessian_lower_bound(potential: Potential, lam: Fraction):
    """Certify that the Hessian at the critical point has lowest
    eigenvalue above lam; returns the shifted-coefficient signs as a
    tiny audit trail."""
    matrix = hessian_at_p0(potential)
    if not alternating_criterion(matrix, lam):
        raise CertificationError(
            f"alternating criterion inconclusive for {potential.name} "
            f"at {lam}"
        )
    return matrix


# ------------------------------------------------ Taylor remainder material

# Evaluation tuples: the four finite critical points for the point
# kernel, their six unordered pairs for the pair kernel.
F_EVAL_POINTS = tuple(P0_PLANAR)
G_EVAL_POINTS = tuple(
    P0_PLANAR[i] + P0_PLANAR[j] for i in range(4) for j in range(i + 1, 4)
)

# Integer fast path for evaluation at configuration tuples.  Every
# coordinate there is 0, 1, -1/2 or +-sqrt(3)/2, so a monomial value is
# (integer) * 3^q * sqrt(3)^(0 or 1) / 2^e and a whole polynomial can be
# accumulated in two big ints over a common power-of-two denominator.

_TAG_BY_VALUE = {
    QSqrt3(F(0)): "zero",
    QSqrt3(F(1)): "one",
    QSqrt3(-HALF): "neghalf",
    ROOT3_HALF: "rootp",
    -ROOT3_HALF: "rootm",
}


def _tag_tables(tag: str, maxdeg: int):
    """(multiplier, sqrt3 parity, halving count) per exponent, or None
    when the coordinate is zero and the power kills the term."""
    out = []
    for e in range(maxdeg + 1):
        if tag == "zero":
            out.append((1, 0, 0) if e == 0 else None)
        elif tag == "one":
            out.append((1, 0, 0))
        elif tag == "neghalf":
            out.append(((-1) ** e, 0, e))
        else:
            m = 3 ** (e // 2) * ((-1) ** e if tag == "rootm" else 1)
            out.append((m, e & 1, e))
    return out


def _fast_eval(poly: MultiPoly, tags: Sequence[str]) -> QSqrt3:
    nvars = poly.nvars
    maxdeg = max((poly.degree(i) for i in range(nvars)), default=0)
    tables = [_tag_tables(t, maxdeg) for t in tags]
    dmax = sum(
        0 if t == "zero" else maxdeg if t != "one" else 0 for t in tags
    )
    acc = [0, 0]
    for key, coeff in poly.terms.items():
        m = coeff
        parity = 0
        halves = 0
        kk = key
        dead = False
        for i in range(nvars):
            e = kk & 0xFF
            kk >>= 8
            entry = tables[i][e]
            if entry is None:
                dead = True
                break
            mult, p, h = entry
            if mult != 1:
                m *= mult
            parity += p
            halves += h
        if dead:
            continue
        if parity >= 2:
            m *= 3 ** (parity // 2)
        acc[parity & 1] += m << (dmax - halves)
    den = F(1, 1 << dmax) if dmax else F(1)
    return QSqrt3(acc[0] * den, acc[1] * den)


def _prepared_points(points) -> list:
    out = []
    for pt in points:
        tags = tuple(_TAG_BY_VALUE[c] for c in pt)
        bases = tuple(
            (1 + pt[2 * p] ** 2 + pt[2 * p + 1] ** 2).to_fraction()
            for p in range(len(pt) // 2)
        )
        out.append((tags, bases))
    return out


def _fast_node_eval(node: PairRational, tags, bases) -> QSqrt3:
    value = _fast_eval(node.poly, tags)
    den = F(1)
    for base, m in zip(bases, node.powers):
        den *= F(base) ** m
    return QSqrt3(value.a / den, value.b / den)


@functools.cache
def m8_global_bound(k: int, kind: str = "g") -> int:
    """Largest coefficient-norm over the weight-8 partial numerators.

    Each partial is P / (A^(k+r) B^(k+s)) with r + s = 8 derivatives
    split between the pairs, and differentiation keeps the numerator's
    (a,b)-degree at most 2(k+r) and (c,d)-degree at most 2(k+s).  Every
    normalized monomial then has magnitude below 1 on the whole plane,
    so the absolute coefficient sum bounds the derivative everywhere.
    """
    if not 2 <= k <= 10:
        raise ValueError("kernel exponent out of range")
    base = point_kernel(k) if kind == "f" else pair_kernel(k)
    best = 0

    def visit(exps, weight, node):
        nonlocal best
        if weight != 8:
            return
        value = node.poly.abs_coefficient_sum()
        if value > best:
            best = value

    walk_derivatives(base, 8, visit)
    return best


def taylor_remainder_bound(k: int, epsilon0: Fraction) -> Fraction:
    """(7 eps)^5 / 5! times the global eighth-derivative bound of the
    full energy (one point term plus three pair terms per variable)."""
    m8 = m8_global_bound(k, "f") + 3 * m8_global_bound(k, "g")
    return (7 * F(epsilon0)) ** 5 / 120 * m8


@functools.cache
def mu_bounds(k: int) -> dict:
    """Exact bounds on the weight-j derivative maxima at the critical
    point, j = 4..7, via per-term maxima over the configuration tuples.
    Callers must not mutate the returned dict."""
    best = {kind: {j: QSqrt3(F(0)) for j in range(4, 8)} for kind in "fg"}
    for kind, base, points in (
        ("f", point_kernel(k), F_EVAL_POINTS),
        ("g", pair_kernel(k), G_EVAL_POINTS),
    ):
        table = best[kind]
        prepared = _prepared_points(points)

        def visit(exps, weight, node):
            if weight < 4:
                return
            for tags, bases in prepared:
                value = abs(_fast_node_eval(node, tags, bases))
                if value > table[weight]:
                    table[weight] = value

        walk_derivatives(base, 7, visit)
    return {
        j: best["f"][j] + best["g"][j] * 3 for j in range(4, 8)
    }


def mu_star_bounds(k: int, epsilon0: Fraction) -> tuple:
    """Scaled Taylor coefficients ((7e)^j / j!) mu_{j+3} for j = 1..4."""
    mus = mu_bounds(k)
    eps = F(epsilon0)
    out = []
    fac = 1
    for j in range(1, 5):
        fac *= j
        out.append(mus[j + 3] * ((7 * eps) ** j / fac))
    return tuple(out)


THIRD_PARTIAL_OFFSETS = {10: 500 * 12}  # 6000 for the high exponent
DEFAULT_OFFSET = 500


def third_partial_offset(k: int) -> int:
    return THIRD_PARTIAL_OFFSETS.get(k, DEFAULT_OFFSET)


def verify_offset(k: int, epsilon0: Fraction) -> Fraction:
    """Check mu* total plus remainder stays under the published offset;
    returns the slack."""
    offset = third_partial_offset(k)
    total = taylor_remainder_bound(k, epsilon0)
    for term in mu_star_bounds(k, epsilon0):
        total = term + total
    slack = QSqrt3(F(offset)) - total
    if not isinstance(slack, QSqrt3):
        slack = _as_qsqrt3(slack)
    if slack.sign() <= 0:
        raise CertificationError(
            f"offset {offset} too small for exponent {k}: " f"budget {total}"
        )
    return slack


def third_partial_vector(k: int) -> list:
    """The 343 ordered third partials at the critical point (ordered
    triples, so symmetric entries repeat, matching the matrix norm)."""
    expr = build_energy_expression(k)
    distinct: dict = {}
    values = []
    for i in range(7):
        for j in range(7):
            for l in range(7):
                exps = [0] * 7
                exps[i] += 1
                exps[j] += 1
                exps[l] += 1
                key = tuple(exps)
                got = distinct.get(key)
                if got is None:
                    got = _as_qsqrt3(expr.partial_at(key))
                    distinct[key] = got
                values.append(got)
    return values


def _rational_upper(value: QSqrt3, bits: int = 80) -> Fraction:
    lo, hi = value.rational_bounds(bits)
    return hi


def vbar_norm_upper(k: int, offset: int) -> Fraction:
    """Rational upper bound on the euclidean norm of the offset third
    partial vector."""
    total = QSqrt3(F(0))
    for v in third_partial_vector(k):
        padded = abs(v) + F(offset)
        total = total + padded * padded
    # total = p + q sqrt3 with q rational; bound sqrt3 from above.
    ub = _rational_upper(total)
    return sqrt_fraction_bounds(ub)[1]


@dataclass(frozen=True, slots=True)
class HessianCertificate:
    name: str
    lam: Fraction
    epsilon0: Fraction
    component_norm_bounds: dict  # k -> rational upper bound on ||Vbar_k||
    f_bound: Fraction  # rational upper bound on the third-derivative norm
    final_margin: Fraction
    offset_slack: dict  # k -> rational slack under the published offset

    def to_json_dict(self) -> dict:
        return {
            "task": "hessian",
            "potential": self.name,
            "eigenvalue_lower_bound": str(self.lam),
            "epsilon0": str(self.epsilon0),
            "third_partial_norm_bound": str(self.f_bound),
            "final_margin": str(self.final_margin),
            "component_norm_bounds": {
                str(k): str(v) for k, v in self.component_norm_bounds.items()
            },
            "offset_slack": {
                str(k): str(v) for k, v in self.offset_slack.items()
            },
        }


EIGENVALUE_TARGETS = {
    "g2": F(1),
    "g3": F(10),
    "g4": F(24),
    "g5": F(36),
    "g6": F(43),
    "g10sharp": F(1448),
}

DEFAULT_EPSILON0 = {"g10sharp": F(1, 1 << 18)}


def certify_local_minimum(
    potential: Potential, epsilon0: Optional[Fraction] = None
) -> HessianCertificate:
    """Full positive-definiteness certificate on the cube of in-radius
    epsilon0 around the critical point.

    Exact steps: eigenvalue floor via the alternating sign test, per-term
    offset verification, norm bound on the padded third-partial vector,
    and the final squared comparison 7 eps^2 ||Vbar||^2 < lambda^2.
    """
    lam = EIGENVALUE_TARGETS.get(potential.name)
    if lam is None:
        raise CertificationError(f"no eigenvalue target for {potential.name}")
    if epsilon0 is None:
        epsilon0 = DEFAULT_EPSILON0.get(potential.name, F(1, 1 << 15))
    epsilon0 = F(epsilon0)
    hessian_lower_bound(potential, lam)

    norm_bounds: dict = {}
    slack: dict = {}
    f_bound = F(0)
    for k, weight in potential.terms:
        slack[k] = verify_offset(k, epsilon0)
        norm_bounds[k] = vbar_norm_upper(k, third_partial_offset(k))
        f_bound += weight * norm_bounds[k]

    # sqrt(7) * eps * F < lambda, compared with both sides squared.
    lhs_sq = 7 * epsilon0**2 * f_bound**2
    if not lhs_sq < lam * lam:
        raise CertificationError(
            f"third-derivative budget exceeds the eigenvalue floor for "
            f"{potential.name}"
        )
    margin = lam - sqrt_fraction_bounds(lhs_sq)[1]
    if margin <= 0:
        raise CertificationError(f"empty margin for {potential.name}")
    return HessianCertificate(
        name=potential.name,
        lam=lam,
        epsilon0=epsilon0,
        component_norm_bounds=norm_bounds,
        f_bound=f_bound,
        final_margin=margin,
        offset_slack=slack,
    )

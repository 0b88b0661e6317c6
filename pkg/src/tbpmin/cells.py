"""Dyadic cells on the five-point moduli space and their sphere geometry.

A candidate configuration is coded by seven planar coordinates: one point
pinned to the positive x-axis, three free planar points, and a fifth point
fixed at infinity (the north pole after inverse stereographic projection).
The search tiles this space with *blocks*: a dyadic segment in [0, 4] times
three dyadic squares in [-2, 2]^2.  All cell bookkeeping is exact integer
arithmetic on centers scaled by S = 2**scale_log2.

The metrics d, d1, d2 and the patch defect delta computed here are exact
rationals; the search loop recomputes the same quantities in outward-rounded
machine arithmetic (see gradekernel) and the two must agree under
containment.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union


class ScaleExhausted(Exception):
    """Subdividing would need cell centers finer than the integer scale."""


class BadSquareError(ValueError):
    """Metrics were requested for a square that is not good."""


class _Infinity:
    """Sentinel cell for the point pinned at the north pole."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "INFINITY"


INFINITY = _Infinity()


def _check_scale(scale_log2: int) -> None:
    if scale_log2 < 2:
        raise ValueError("scale must be at least 2^2")


@dataclass(frozen=True, slots=True)
class DyadicSegment:
    """Segment [c - 2^(-k-1), c + 2^(-k-1)] in [0, 4], center scaled by S.

    ``center`` is S*c as an exact integer; ``depth`` is k, so the side is
    2^(-k).  The root segment [0, 4] sits at depth -2.
    """

    center: int
    depth: int
    scale_log2: int

    def __post_init__(self) -> None:
        _check_scale(self.scale_log2)
        h = self.half_side_scaled
        if self.center - h < 0 or self.center + h > 4 << self.scale_log2:
            raise ValueError(f"segment escapes [0, 4]: {self}")

    @classmethod
    def root(cls, scale_log2: int) -> "DyadicSegment":
        return cls(2 << scale_log2, -2, scale_log2)

    @property
    def half_side_scaled(self) -> int:
        shift = self.scale_log2 - self.depth - 1
        if shift < 0:
            raise ScaleExhausted(f"half-side below integer scale: {self}")
        return 1 << shift

    @property
    def side(self) -> Fraction:
        return Fraction(2) ** -self.depth

    @property
    def center_value(self) -> Fraction:
        return Fraction(self.center, 1 << self.scale_log2)

    def bounds(self) -> tuple[Fraction, Fraction]:
        s = 1 << self.scale_log2
        h = self.half_side_scaled
        return Fraction(self.center - h, s), Fraction(self.center + h, s)

    def vertices(self) -> list[Fraction]:
        lo, hi = self.bounds()
        return [lo, hi]

    def contains_value(self, x: Union[int, Fraction]) -> bool:
        lo, hi = self.bounds()
        return lo <= x <= hi

    def subdivide(self) -> list["DyadicSegment"]:
        shift = self.scale_log2 - self.depth - 2
        if shift < 0:
            raise ScaleExhausted(f"cannot subdivide {self}")
        off = 1 << shift
        k = self.depth + 1
        return [
            DyadicSegment(self.center - off, k, self.scale_log2),
            DyadicSegment(self.center + off, k, self.scale_log2),
        ]

    @property
    def key(self) -> tuple[int, int]:
        return (self.center, self.depth)


@dataclass(frozen=True, slots=True)
class DyadicSquare:
    """Axis-aligned square of side 2^(-k) in [-2, 2]^2, center scaled by S.

    The root square [-2, 2]^2 is coded (0, 0) at depth -2.  A square is
    *good* once it lies inside [-3/2, 3/2]^2 with side at most 1/2; only
    good squares are fed to the curvature metrics.
    """

    cx: int
    cy: int
    depth: int
    scale_log2: int

    def __post_init__(self) -> None:
        _check_scale(self.scale_log2)
        h = self.half_side_scaled
        lim = 2 << self.scale_log2
        if max(abs(self.cx), abs(self.cy)) + h > lim:
            raise ValueError(f"square escapes [-2, 2]^2: {self}")

    @classmethod
    def root(cls, scale_log2: int) -> "DyadicSquare":
        return cls(0, 0, -2, scale_log2)

    @property
    def half_side_scaled(self) -> int:
        shift = self.scale_log2 - self.depth - 1
        if shift < 0:
            raise ScaleExhausted(f"half-side below integer scale: {self}")
        return 1 << shift

    @property
    def side(self) -> Fraction:
        return Fraction(2) ** -self.depth

    @property
    def center_value(self) -> tuple[Fraction, Fraction]:
        s = 1 << self.scale_log2
        return Fraction(self.cx, s), Fraction(self.cy, s)

    def is_good(self) -> bool:
        if self.depth < 1:
            return False
        h = self.half_side_scaled
        lim = 3 << (self.scale_log2 - 1)
        return max(abs(self.cx), abs(self.cy)) + h <= lim

    def in_domain(self) -> bool:
        """Exact containment test against [-3/2, 3/2]^2."""
        h = self.half_side_scaled
        lim = 3 << (self.scale_log2 - 1)
        return max(abs(self.cx), abs(self.cy)) + h <= lim

    def vertices(self) -> list[tuple[Fraction, Fraction]]:
        """Corners ordered by sign bits: (-,-), (-,+), (+,-), (+,+)."""
        s = 1 << self.scale_log2
        h = self.half_side_scaled
        out = []
        for bx in (-1, 1):
            for by in (-1, 1):
                out.append(
                    (Fraction(self.cx + bx * h, s), Fraction(self.cy + by * h, s))
                )
        return out

    def contains_point(self, x: Union[int, Fraction], y: Union[int, Fraction]) -> bool:
        s = 1 << self.scale_log2
        h = self.half_side_scaled
        return (
            Fraction(self.cx - h, s) <= x <= Fraction(self.cx + h, s)
            and Fraction(self.cy - h, s) <= y <= Fraction(self.cy + h, s)
        )

    def subdivide(self) -> list["DyadicSquare"]:
        shift = self.scale_log2 - self.depth - 2
        if shift < 0:
            raise ScaleExhausted(f"cannot subdivide {self}")
        off = 1 << shift
        k = self.depth + 1
        return [
            DyadicSquare(self.cx + bx * off, self.cy + by * off, k, self.scale_log2)
            for bx in (-1, 1)
            for by in (-1, 1)
        ]

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.cx, self.cy, self.depth)


Cell = Union[DyadicSegment, DyadicSquare, _Infinity]


@dataclass(frozen=True, slots=True)
class DyadicBlock:
    """Search block: one segment cell and three square cells.

    Axis 0 is the pinned point's segment; axes 1..3 are the free planar
    points.  The fifth point is always the INFINITY cell.
    """

    segment: DyadicSegment
    squares: tuple[DyadicSquare, DyadicSquare, DyadicSquare]

    @classmethod
    def root(cls, scale_log2: int) -> "DyadicBlock":
        sq = DyadicSquare.root(scale_log2)
        return cls(DyadicSegment.root(scale_log2), (sq, sq, sq))

    def cells(self) -> tuple[Cell, ...]:
        """The five constraint cells, INFINITY last."""
        return (self.segment, *self.squares, INFINITY)

    def subdivide(self, axis: int) -> list["DyadicBlock"]:
        if axis == 0:
            return [
                DyadicBlock(child, self.squares)
                for child in self.segment.subdivide()
            ]
        if axis in (1, 2, 3):
            i = axis - 1
            out = []
            for child in self.squares[i].subdivide():
                sq = list(self.squares)
                sq[i] = child
                out.append(DyadicBlock(self.segment, tuple(sq)))
            return out
        raise ValueError(f"axis must be 0..3, got {axis}")

    @property
    def max_depth(self) -> int:
        return max(self.segment.depth, *(s.depth for s in self.squares))

    @property
    def key(self):
        return (self.segment.key, *(s.key for s in self.squares))


def format_block(block: DyadicBlock) -> str:
    """Serialize a block as ``k0 c0 | k1 x1 y1 | ... | k3 x3 y3``."""
    parts = [f"{block.segment.depth} {block.segment.center}"]
    for sq in block.squares:
        parts.append(f"{sq.depth} {sq.cx} {sq.cy}")
    return " | ".join(parts)


def parse_block(text: str, scale_log2: int) -> DyadicBlock:
    """Parse the ``format_block`` text representation."""
    chunks = [c.split() for c in text.strip().split("|")]
    if len(chunks) != 4 or len(chunks[0]) != 2 or any(len(c) != 3 for c in chunks[1:]):
        raise ValueError(f"malformed block code: {text!r}")
    seg = DyadicSegment(int(chunks[0][1]), int(chunks[0][0]), scale_log2)
    sqs = tuple(
        DyadicSquare(int(c[1]), int(c[2]), int(c[0]), scale_log2) for c in chunks[1:]
    )
    return DyadicBlock(seg, sqs)


def stereo_inverse(x, y):
    """Inverse stereographic projection of a planar point to the unit sphere.

    Works over any coordinate ring with exact division (Fraction, rational
    intervals, the quadratic field used for the minimizer, or machine
    intervals); the plane's origin maps to the south pole (0, 0, -1).
    """
    n = 1 + x * x + y * y
    return (2 * x) / n, (2 * y) / n, 1 - 2 / n


def sphere_dot(p, q):
    return p[0] * q[0] + p[1] * q[1] + p[2] * q[2]


def sphere_dist_sq(p, q):
    dx, dy, dz = p[0] - q[0], p[1] - q[1], p[2] - q[2]
    return dx * dx + dy * dy + dz * dz


def chi(d_scale: int, d_sq: Fraction) -> Fraction:
    """Patch-to-hull distance bound d^2/(4D) + d^4/(2D^3) as a function of d^2."""
    d_sq = Fraction(d_sq)
    return d_sq / (4 * d_scale) + d_sq * d_sq / (2 * d_scale ** 3)


def _disk_diam_sq(r_sq: Fraction, big_r_sq: Fraction) -> Fraction:
    """Squared diameter of the spherical image of a planar disk.

    ``r_sq`` is the disk's squared radius and ``big_r_sq`` the squared
    distance from the origin to its center.
    """
    gap = big_r_sq - r_sq
    return 16 * r_sq / (1 + 2 * r_sq + 2 * big_r_sq + gap * gap)


@dataclass(frozen=True, slots=True)
class SquareMetrics:
    """Exact cell metrics: hull diameter^2, longest edge^2, circumscribed
    disk image diameter^2, and the patch defect delta."""

    d_sq: Fraction
    d1_sq: Fraction
    d2_sq: Fraction
    delta: Fraction


_ZERO_METRICS = SquareMetrics(Fraction(0), Fraction(0), Fraction(0), Fraction(0))


def square_metrics(cell: Cell) -> SquareMetrics:
    """Exact rational metrics of a cell's spherical image.

    Segments are always allowed; squares must be good.  The infinity cell
    is a single point, so all its metrics vanish.
    """
    if cell is INFINITY:
        return _ZERO_METRICS
    if isinstance(cell, DyadicSegment):
        lo, hi = cell.bounds()
        p0 = stereo_inverse(lo, Fraction(0))
        p1 = stereo_inverse(hi, Fraction(0))
        d_sq = sphere_dist_sq(p0, p1)
        h = cell.side / 2
        c = cell.center_value
        d2_sq = _disk_diam_sq(h * h, c * c)
        return SquareMetrics(d_sq, d_sq, d2_sq, chi(2, d2_sq))
    if isinstance(cell, DyadicSquare):
        if not cell.is_good():
            raise BadSquareError(f"metrics need a good square, got {cell}")
        verts = cell.vertices()
        pts = [stereo_inverse(x, y) for x, y in verts]
        d_sq = max(
            sphere_dist_sq(pts[i], pts[j])
            for i in range(4)
            for j in range(i + 1, 4)
        )
        # Edges of the quadrilateral: vertex order is (--, -+, +-, ++).
        edges = ((0, 1), (0, 2), (1, 3), (2, 3))
        d1_sq = max(sphere_dist_sq(pts[i], pts[j]) for i, j in edges)
        h = cell.side / 2
        cx, cy = cell.center_value
        d2_sq = _disk_diam_sq(2 * h * h, cx * cx + cy * cy)
        delta = max(chi(1, d1_sq), chi(2, d2_sq))
        return SquareMetrics(d_sq, d1_sq, d2_sq, delta)
    raise TypeError(f"not a cell: {cell!r}")


def cell_sphere_vertices(cell: Cell) -> list[tuple[Fraction, Fraction, Fraction]]:
    """Exact spherical images of a cell's vertices (the pole for INFINITY)."""
    if cell is INFINITY:
        return [(Fraction(0), Fraction(0), Fraction(1))]
    if isinstance(cell, DyadicSegment):
        return [stereo_inverse(v, Fraction(0)) for v in cell.vertices()]
    return [stereo_inverse(x, y) for x, y in cell.vertices()]


def dot_product_max(a: Cell, b: Cell) -> Fraction:
    """Exact upper bound for dots between spherical patches over two cells.

    For finite cells the bound is the largest vertex-to-vertex dot product
    plus the first-order patch corrections; against INFINITY the vertex
    maximum alone already dominates the patch.
    """
    if a is INFINITY:
        raise ValueError("first cell must be finite")
    pa = cell_sphere_vertices(a)
    if b is INFINITY:
        return max(p[2] for p in pa)
    pb = cell_sphere_vertices(b)
    best = max(sphere_dot(p, q) for p in pa for q in pb)
    da = square_metrics(a).delta
    db = square_metrics(b).delta
    return best + da + db + da * db

"""Pair potentials, configuration energies, and rigorous block error bounds.

The potentials are powers of the chordal kernel: a pair at squared chordal
distance r^2 contributes (4 - r^2)^k, which equals (2 + 2 cos) in terms of
the dot product of the unit vectors.  Everything in this module is exact:
points with coordinates in any exact ring evaluate exactly, and the block
error terms come out as rationals.  The machine-float mirror of these
formulas lives in gradekernel and is only trusted because it encloses the
values computed here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

from .cells import (
    INFINITY,
    Cell,
    DyadicBlock,
    DyadicSegment,
    _Infinity,
    cell_sphere_vertices,
    dot_product_max,
    sphere_dot,
    square_metrics,
    stereo_inverse,
)
from .qsqrt3 import HALF, QSqrt3, SQRT3


@dataclass(frozen=True, slots=True)
class Potential:
    """Linear combination sum_k a_k * (4 - r^2)^k of chordal-power kernels."""

    name: str
    terms: tuple[tuple[int, Fraction], ...]

    def __post_init__(self) -> None:
        ks = [k for k, _ in self.terms]
        if len(set(ks)) != len(ks):
            raise ValueError("duplicate exponents")
        if any(k < 2 for k in ks):
            raise ValueError("error bounds need exponents >= 2")

    def kernel_value(self, x):
        """Evaluate sum a_k x^k in the ring of x (x = 2 + 2 dot)."""
        total = 0
        for k, a in self.terms:
            total = total + a * x ** k
        return total


def _power(name: str, k: int) -> Potential:
    return Potential(name, ((k, Fraction(1)),))


G2 = _power("g2", 2)
G3 = _power("g3", 3)
G4 = _power("g4", 4)
G5 = _power("g5", 5)
G6 = _power("g6", 6)
#: The high-exponent combination handled by the fine-scale search.
G10_SHARP = Potential(
    "g10sharp", ((10, Fraction(1)), (5, Fraction(28)), (2, Fraction(102)))
)

POTENTIALS = {p.name: p for p in (G2, G3, G4, G5, G6, G10_SHARP)}

Point = Union[tuple, _Infinity]


def optimal_planar_points() -> list[Point]:
    """The five-point minimizer in planar coordinates, exactly in Q(sqrt 3).

    One pole pins to infinity, the other to the plane's origin; the three
    remaining points sit on the unit circle at mutual angle 2 pi / 3 with
    the first rotated onto the positive x-axis.
    """
    one = QSqrt3(Fraction(1))
    zero = QSqrt3(Fraction(0))
    half = QSqrt3(HALF)
    apex = QSqrt3(HALF) * SQRT3
    return [
        (one, zero),
        (-half, -apex),
        (zero, zero),
        (-half, apex),
        INFINITY,
    ]


def optimal_coordinate_vector() -> list[QSqrt3]:
    """The minimizer as the seven free coordinates (x1, ..., x7)."""
    pts = optimal_planar_points()
    return [pts[0][0], *pts[1], *pts[2], *pts[3]]


def tbp_energy(potential: Potential) -> Fraction:
    """Exact energy of the optimal configuration: 3 + 6 * 2^k per kernel."""
    return sum((a * (3 + 6 * 2 ** k) for k, a in potential.terms), Fraction(0))


def _lift(p: Point):
    if p is INFINITY:
        return None
    return stereo_inverse(p[0], p[1])


def pair_energy(p: Point, q: Point, potential: Potential):
    """Exact pair energy of two distinct configuration points."""
    if p == q or (p is INFINITY and q is INFINITY):
        raise ValueError("pair energy needs distinct points")
    sp, sq_ = _lift(p), _lift(q)
    if sp is None and sq_ is None:
        raise ValueError("at most one point at infinity")
    if sp is None or sq_ is None:
        fin = sq_ if sp is None else sp
        dot = fin[2]  # dot with the north pole
    else:
        dot = sphere_dot(sp, sq_)
    return potential.kernel_value(2 + 2 * dot)


def config_energy(points: Sequence[Point], potential: Potential):
    """Exact total energy over all pairs of a five-point configuration."""
    if len(points) != 5:
        raise ValueError("a configuration has five points")
    total = 0
    for i in range(5):
        for j in range(i + 1, 5):
            total = total + pair_energy(points[i], points[j], potential)
    return total


def convex_power_bound_holds(k: int, lambdas: Sequence[Fraction], xs: Sequence[Fraction]) -> bool:
    """Exact check of (sum lambda_i x_i)^k <= sum lambda_i x_i^k.

    Requires nonnegative x and convex weights; this inequality is what lets
    a block's minimum vertex energy bound every interior configuration.
    """
    if len(lambdas) != len(xs):
        raise ValueError("weight/value length mismatch")
    if any(l < 0 for l in lambdas) or sum(lambdas) != 1:
        raise ValueError("weights must be a convex combination")
    if any(x < 0 for x in xs):
        raise ValueError("values must be nonnegative")
    mean = sum((l * x for l, x in zip(lambdas, xs)), Fraction(0))
    rhs = sum((l * x ** k for l, x in zip(lambdas, xs)), Fraction(0))
    return mean ** k <= rhs


def epsilon_term(cell: Cell, other: Cell, k: int) -> Fraction:
    """Exact one-pair error term of the energy bound.

    Bounds how far the k-kernel pair energy between the spherical patches
    over ``cell`` and ``other`` can drop below the vertex-sampled energy.
    Zero when the first cell is the infinity point.  A point paired with
    itself contributes nothing, but that diagonal is skipped by the caller;
    two *different* configuration points sharing an equal cell still need
    the full bound, so no set-equality shortcut happens here.
    """
    if k < 2:
        raise ValueError("error term needs k >= 2")
    if cell is INFINITY:
        return Fraction(0)
    m = square_metrics(cell)
    t = 2 + 2 * dot_product_max(cell, other)
    return Fraction(k * (k - 1), 2) * t ** (k - 2) * m.d_sq + 2 * k * t ** (k - 1) * m.delta


@dataclass(frozen=True, slots=True)
class BlockError:
    """Total and per-axis energy error bounds of a block."""

    by_index: tuple[Fraction, Fraction, Fraction, Fraction]
    total: Fraction


def block_error(block: DyadicBlock, potential: Potential) -> BlockError:
    """Exact energy error bound, split by the cell that sources it."""
    cells = block.cells()
    by_index = []
    for i in range(4):
        acc = Fraction(0)
        for j in range(5):
            if j == i:
                continue
            for k, a in potential.terms:
                acc += abs(a) * epsilon_term(cells[i], cells[j], k)
        by_index.append(acc)
    return BlockError(tuple(by_index), sum(by_index, Fraction(0)))


def _vertex_points(block: DyadicBlock) -> list[list[Point]]:
    """Candidate corner points per axis: 2 for the segment, 4 per square."""
    seg_pts = [(v, Fraction(0)) for v in block.segment.vertices()]
    out = [seg_pts]
    for sq in block.squares:
        out.append(list(sq.vertices()))
    return out


@dataclass(frozen=True, slots=True)
class EliminationResult:
    """Outcome of the rigorous block elimination test."""

    eliminated: bool
    subdivide_axis: Union[int, None]
    min_vertex_energy: Fraction
    error: BlockError


def eliminate_block(
    block: DyadicBlock, potential: Potential, target: Fraction
) -> EliminationResult:
    """Exact-arithmetic elimination: can every configuration in the block
    exceed the target energy?

    Minimizes the energy over all corner configurations, subtracts the
    block error bound, and compares against the target.  On failure the
    recommended subdivision axis is the one sourcing the largest error
    (ties to the smaller index).
    """
    axes = _vertex_points(block)
    lifted = [[stereo_inverse(x, y) for x, y in pts] for pts in axes]
    err = block_error(block, potential)

    def kernel(dot):
        return potential.kernel_value(2 + 2 * dot)

    # Pairwise energy tables; axis 4 is the fixed point at infinity.
    tables = {}
    for i in range(4):
        for j in range(i + 1, 4):
            tables[(i, j)] = [
                [kernel(sphere_dot(p, q)) for q in lifted[j]] for p in lifted[i]
            ]
        tables[(i, 4)] = [kernel(p[2]) for p in lifted[i]]

    best = None
    sizes = [len(a) for a in axes]
    for a0 in range(sizes[0]):
        for a1 in range(sizes[1]):
            e01 = tables[(0, 1)][a0][a1]
            for a2 in range(sizes[2]):
                e2 = e01 + tables[(0, 2)][a0][a2] + tables[(1, 2)][a1][a2]
                for a3 in range(sizes[3]):
                    e = (
                        e2
                        + tables[(0, 3)][a0][a3]
                        + tables[(1, 3)][a1][a3]
                        + tables[(2, 3)][a2][a3]
                        + tables[(0, 4)][a0]
                        + tables[(1, 4)][a1]
                        + tables[(2, 4)][a2]
                        + tables[(3, 4)][a3]
                    )
                    if best is None or e < best:
                        best = e
    assert best is not None
    if best - err.total > target:
        return EliminationResult(True, None, best, err)
    axis = max(range(4), key=lambda i: (err.by_index[i], -i))
    return EliminationResult(False, axis, best, err)

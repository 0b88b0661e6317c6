"""Tests for dyadic cells, stereographic lifting, and exact cell metrics."""

import math
import random
from fractions import Fraction

import numpy as np
import pytest

from tbpmin.cells import (
    INFINITY,
    BadSquareError,
    DyadicBlock,
    DyadicSegment,
    DyadicSquare,
    ScaleExhausted,
    chi,
    dot_product_max,
    format_block,
    parse_block,
    sphere_dist_sq,
    square_metrics,
    stereo_inverse,
)

S25 = 1 << 25


def F(a, b=1):
    return Fraction(a, b)


# ---------------------------------------------------------------- lifting


def test_stereo_origin_is_south_pole():
    assert stereo_inverse(F(0), F(0)) == (0, 0, -1)


def test_stereo_unit_circle_fixed():
    assert stereo_inverse(F(1), F(0)) == (1, 0, 0)


def test_stereo_distance_to_pole_example():
    p = stereo_inverse(F(3, 2), F(0))
    assert sphere_dist_sq(p, (F(0), F(0), F(1))) == F(16, 13)


def test_stereo_lands_on_unit_sphere_exactly():
    rng = random.Random(1)
    for _ in range(300):
        x = F(rng.randrange(-400, 400), rng.randrange(1, 64))
        y = F(rng.randrange(-400, 400), rng.randrange(1, 64))
        px, py, pz = stereo_inverse(x, y)
        assert px * px + py * py + pz * pz == 1


# ---------------------------------------------------------------- cells


def test_root_cells():
    seg = DyadicSegment.root(25)
    assert seg.bounds() == (F(0), F(4))
    sq = DyadicSquare.root(25)
    assert sq.vertices()[0] == (F(-2), F(-2))
    assert sq.vertices()[3] == (F(2), F(2))


def test_segment_subdivision_tiles_parent():
    seg = DyadicSegment.root(25)
    kids = seg.subdivide()
    assert [k.bounds() for k in kids] == [(F(0), F(2)), (F(2), F(4))]
    assert all(k.depth == -1 for k in kids)


def test_square_subdivision_offsets_are_quarter_side():
    sq = DyadicSquare.root(25)
    kids = sq.subdivide()
    assert sorted((k.cx, k.cy) for k in kids) == [
        (-S25, -S25),
        (-S25, S25),
        (S25, -S25),
        (S25, S25),
    ]
    deep = DyadicSquare(S25, S25, 3, 25)
    off = S25 >> 5  # quarter of the side 2^-3, scaled
    kids = deep.subdivide()
    assert sorted((k.cx, k.cy) for k in kids) == sorted(
        (S25 + bx * off, S25 + by * off) for bx in (-1, 1) for by in (-1, 1)
    )


def test_subdivision_tiles_exactly():
    rng = random.Random(5)
    for _ in range(50):
        k = rng.randrange(-1, 8)
        h = 1 << (25 - k - 1)
        cx = rng.randrange(-(2 << 25) + h, (2 << 25) - h + 1, h)
        cy = rng.randrange(-(2 << 25) + h, (2 << 25) - h + 1, h)
        sq = DyadicSquare(cx, cy, k, 25)
        kids = sq.subdivide()
        area = sum(c.side * c.side for c in kids)
        assert area == sq.side * sq.side
        for c in kids:
            for vx, vy in c.vertices():
                assert sq.contains_point(vx, vy)


def test_scale_exhaustion():
    seg = DyadicSegment(1 << 25, 23, 25)
    kids = seg.subdivide()
    assert kids[0].depth == 24
    with pytest.raises(ScaleExhausted):
        kids[0].subdivide()


def test_block_code_round_trip():
    root = DyadicBlock.root(25)
    text = format_block(root)
    assert text == f"-2 {2 << 25} | -2 0 0 | -2 0 0 | -2 0 0"
    back = parse_block(text, 25)
    assert back == root


def test_block_subdivision_axis_counts():
    root = DyadicBlock.root(25)
    assert len(root.subdivide(0)) == 2
    assert len(root.subdivide(2)) == 4
    with pytest.raises(ValueError):
        root.subdivide(4)


# ---------------------------------------------------------------- metrics


def unit_square_cell() -> DyadicSquare:
    # [1/2, 1] x [1/2, 1]: center (3/4, 3/4), side 1/2.
    return DyadicSquare(3 << 23, 3 << 23, 1, 25)


def test_disk_image_diameter_on_square_example():
    m = square_metrics(unit_square_cell())
    assert m.d2_sq == F(4, 9)
    # Independent oracle: the diametral planar points of the circumscribed
    # disk are (1/2, 1/2) and (1, 1); their spherical images realize it.
    a = stereo_inverse(F(1, 2), F(1, 2))
    b = stereo_inverse(F(1), F(1))
    assert sphere_dist_sq(a, b) == F(4, 9)


def test_square_metrics_example_values():
    m = square_metrics(unit_square_cell())
    assert m.d_sq == F(4, 9)
    assert m.d1_sq == F(8, 27)
    assert m.delta == max(chi(1, F(8, 27)), chi(2, F(4, 9))) == F(86, 729)


def test_segment_metrics_example_values():
    seg = DyadicSegment(S25, -1, 25)  # [0, 2]
    m = square_metrics(seg)
    assert m.d2_sq == F(16, 5)
    assert m.delta == F(26, 25)
    # Independent oracle via the endpoint images.
    a = stereo_inverse(F(0), F(0))
    b = stereo_inverse(F(2), F(0))
    assert m.d_sq == sphere_dist_sq(a, b) == F(16, 5)


def test_chi_example_and_domination():
    assert chi(1, F(1)) == F(3, 4)
    rng = random.Random(11)
    for _ in range(100_000):
        scale = rng.choice((1, 2))
        d_sq = rng.uniform(0.0, scale * scale)
        exact = (scale - math.sqrt(scale * scale - d_sq)) / 2
        assert float(chi(scale, Fraction(d_sq))) >= exact - 1e-12


def test_metrics_reject_bad_squares():
    with pytest.raises(BadSquareError):
        square_metrics(DyadicSquare.root(25))
    with pytest.raises(BadSquareError):
        # Good size but outside [-3/2, 3/2]^2.
        square_metrics(DyadicSquare((2 << 25) - (1 << 23), 0, 1, 25))


def test_infinity_metrics_vanish():
    m = square_metrics(INFINITY)
    assert (m.d_sq, m.d1_sq, m.d2_sq, m.delta) == (0, 0, 0, 0)


# ------------------------------------------------------- dot product bound


def test_dot_max_against_infinity_example():
    assert dot_product_max(unit_square_cell(), INFINITY) == F(1, 3)


def test_dot_max_dominates_sampled_patch_dots():
    rng = random.Random(314)
    cells = []
    for _ in range(12):
        k = rng.randrange(1, 5)
        h = 1 << (25 - k - 1)
        lim = (3 << 24) - h
        cx = rng.randrange(-lim, lim + 1, h)
        cy = rng.randrange(-lim, lim + 1, h)
        cells.append(DyadicSquare(cx, cy, k, 25))
    seg = DyadicSegment(3 << 24, 2, 25)
    cells.append(seg)
    for a in cells:
        for b in cells + [INFINITY]:
            if a is b or isinstance(a, DyadicSegment) and b is not INFINITY:
                continue
            bound = dot_product_max(a, b)
            for _ in range(60):
                pa = _random_point_in(a, rng)
                pb = (F(0), F(0), F(1)) if b is INFINITY else _random_point_in(b, rng)
                assert sphere_dot(pa, pb) <= bound


def sphere_dot(p, q):
    return p[0] * q[0] + p[1] * q[1] + p[2] * q[2]


def _random_point_in(cell, rng):
    if isinstance(cell, DyadicSegment):
        lo, hi = cell.bounds()
        t = F(rng.randrange(0, 257), 256)
        return stereo_inverse(lo + t * (hi - lo), F(0))
    verts = cell.vertices()
    (x0, y0), (x1, y1) = verts[0], verts[3]
    t = F(rng.randrange(0, 257), 256)
    u = F(rng.randrange(0, 257), 256)
    return stereo_inverse(x0 + t * (x1 - x0), y0 + u * (y1 - y0))


def test_patch_within_delta_of_hull():
    """Sampled form of the hull approximation bound.

    Spherical patch points over a good square must lie within delta of the
    planar quadrilateral spanned by the lifted vertices.
    """
    rng = random.Random(2718)
    for _ in range(100):
        k = rng.randrange(1, 6)
        h = 1 << (25 - k - 1)
        lim = (3 << 24) - h
        sq = DyadicSquare(rng.randrange(-lim, lim + 1, h), rng.randrange(-lim, lim + 1, h), k, 25)
        delta = float(square_metrics(sq).delta)
        corners = [np.array([float(c) for c in stereo_inverse(x, y)]) for x, y in sq.vertices()]
        tris = [(corners[0], corners[1], corners[3]), (corners[0], corners[2], corners[3])]
        for _ in range(100):
            p = _random_point_in(sq, rng)
            pf = np.array([float(c) for c in p])
            dist = min(_point_triangle_dist(pf, *t) for t in tris)
            assert dist <= delta + 1e-12


def _point_triangle_dist(p, a, b, c):
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return np.linalg.norm(ap)
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return np.linalg.norm(bp)
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        t = d1 / (d1 - d3)
        return np.linalg.norm(ap - t * ab)
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return np.linalg.norm(cp)
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        t = d2 / (d2 - d6)
        return np.linalg.norm(ap - t * ac)
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return np.linalg.norm(p - (b + t * (c - b)))
    n = np.cross(ab, ac)
    return abs(ap @ n) / np.linalg.norm(n)

"""Fast, rigorous elimination kernel backing the block search.

The exact-rational elimination in :mod:`tbpmin.energy` is the reference
semantics but is far too slow to grade millions of blocks.  This module
recomputes the same bounds in double precision with directed rounding:
every quantity that must not be underestimated is rounded up after each
operation, every quantity that must not be overestimated is rounded down.
A block is declared eliminated only when the rounded-down energy floor
still clears the target, so a kernel verdict of "eliminated" is always
implied by the exact verdict, never the other way around.

All per-cell and per-pair quantities are memoized: the depth-first search
revisits the same cells constantly, so warm blocks only pay dictionary
lookups plus one small vectorized minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .cells import (
    INFINITY,
    Cell,
    DyadicBlock,
    DyadicSegment,
    DyadicSquare,
)
from .energy import Potential, eliminate_block
from .intervals import RigorAbort

_INF = math.inf


def _up(x: float) -> float:
    return math.nextafter(x, _INF)


def _dn(x: float) -> float:
    return math.nextafter(x, -_INF)


def _nup(a: np.ndarray) -> np.ndarray:
    return np.nextafter(a, _INF)


def _ndn(a: np.ndarray) -> np.ndarray:
    return np.nextafter(a, -_INF)


def _exact_float(fr: Fraction) -> float:
    f = float(fr)
    if Fraction(f) != fr:
        raise RigorAbort(f"cell coordinate {fr} is not a machine number")
    return f


def _mul_iv(alo: float, ahi: float, blo: float, bhi: float) -> tuple[float, float]:
    p1, p2, p3, p4 = alo * blo, alo * bhi, ahi * blo, ahi * bhi
    return _dn(min(p1, p2, p3, p4)), _up(max(p1, p2, p3, p4))


def _sq_hi(lo: float, hi: float) -> float:
    m = max(abs(lo), abs(hi))
    return _up(m * m)


@dataclass(frozen=True, slots=True, eq=False)
class CellRecord:
    """Machine enclosures of one cell's spherical data.

    Vertex coordinates are enclosed component-wise; the metric fields are
    one-sided upper bounds matching :func:`tbpmin.cells.square_metrics`.
    """

    xlo: np.ndarray
    xhi: np.ndarray
    ylo: np.ndarray
    yhi: np.ndarray
    zlo: np.ndarray
    zhi: np.ndarray
    d_sq_hi: float
    delta_hi: float
    z_max_hi: float


@dataclass(frozen=True, slots=True, eq=False)
class PairRecord:
    """Kernel-value lower bounds and max-dot upper bound for a cell pair."""

    table_lo: np.ndarray
    max_dot_hi: float


@dataclass(frozen=True, slots=True)
class EliminationDecision:
    eliminated: bool
    subdivide_axis: Optional[int]
    energy_floor: float
    error_hi: float


def _lift_vertices(verts: list[tuple[Fraction, Fraction]]):
    """Enclose the spherical images of exact planar vertices."""
    n = len(verts)
    out = [np.empty(n) for _ in range(6)]
    for i, (fx, fy) in enumerate(verts):
        x = _exact_float(fx)
        y = _exact_float(fy)
        # x*x may be inexact at fine scales; bracket outward regardless.
        xxlo, xxhi = _dn(x * x), _up(x * x)
        yylo, yyhi = _dn(y * y), _up(y * y)
        nlo = _dn(_dn(1.0 + xxlo) + yylo)
        nhi = _up(_up(1.0 + xxhi) + yyhi)
        tx = 2.0 * x  # exact
        if tx >= 0.0:
            Xlo, Xhi = _dn(tx / nhi), _up(tx / nlo)
        else:
            Xlo, Xhi = _dn(tx / nlo), _up(tx / nhi)
        ty = 2.0 * y
        if ty >= 0.0:
            Ylo, Yhi = _dn(ty / nhi), _up(ty / nlo)
        else:
            Ylo, Yhi = _dn(ty / nlo), _up(ty / nhi)
        rlo, rhi = _dn(2.0 / nhi), _up(2.0 / nlo)
        Zlo, Zhi = _dn(1.0 - rhi), _up(1.0 - rlo)
        for arr, v in zip(out, (Xlo, Xhi, Ylo, Yhi, Zlo, Zhi)):
            arr[i] = v
    return out


def _dist_sq_hi(rec, i: int, j: int) -> float:
    total = 0.0
    for lo, hi in ((rec[0], rec[1]), (rec[2], rec[3]), (rec[4], rec[5])):
        dlo = _dn(lo[i] - hi[j])
        dhi = _up(hi[i] - lo[j])
        total = _up(total + _sq_hi(dlo, dhi))
    return total


def _chi_hi(d_scale: int, d_sq_hi: float) -> float:
    a = _up(d_sq_hi / (4 * d_scale))
    b = _up(_up(d_sq_hi * d_sq_hi) / (2 * d_scale ** 3))
    return _up(a + b)


def _disk_diam_sq_hi(r_sq: float, big_lo: float, big_hi: float) -> float:
    # r_sq is exact (a power of two); the center norm is an interval.
    gap_lo, gap_hi = _dn(big_lo - r_sq), _up(big_hi - r_sq)
    if gap_lo <= 0.0 <= gap_hi:
        gap_sq_lo = 0.0
    else:
        m = min(abs(gap_lo), abs(gap_hi))
        gap_sq_lo = _dn(m * m)
    den_lo = _dn(_dn(_dn(1.0 + 2.0 * r_sq) + _dn(2.0 * big_lo)) + gap_sq_lo)
    if den_lo <= 0.0:
        raise RigorAbort("disk denominator lost positivity")
    return _up(16.0 * r_sq / den_lo)


def _build_cell(cell: Union[DyadicSegment, DyadicSquare]) -> CellRecord:
    if isinstance(cell, DyadicSegment):
        verts = [(v, Fraction(0)) for v in cell.vertices()]
        rec = _lift_vertices(verts)
        d_sq_hi = _dist_sq_hi(rec, 0, 1)
        h = _exact_float(cell.side / 2)
        r_sq = h * h  # power of two, exact
        c = _exact_float(cell.center_value)
        big_lo, big_hi = _dn(c * c), _up(c * c)
        d2_hi = _disk_diam_sq_hi(r_sq, big_lo, big_hi)
        delta_hi = _chi_hi(2, d2_hi)
    else:
        verts = cell.vertices()
        rec = _lift_vertices(verts)
        d_sq_hi = max(
            _dist_sq_hi(rec, i, j) for i in range(4) for j in range(i + 1, 4)
        )
        d1_hi = max(_dist_sq_hi(rec, i, j) for i, j in ((0, 1), (0, 2), (1, 3), (2, 3)))
        h = _exact_float(cell.side / 2)
        r_sq = 2.0 * (h * h)
        cx, cy = (_exact_float(v) for v in cell.center_value)
        big_lo = _dn(_dn(cx * cx) + _dn(cy * cy))
        big_hi = _up(_up(cx * cx) + _up(cy * cy))
        d2_hi = _disk_diam_sq_hi(r_sq, big_lo, big_hi)
        delta_hi = max(_chi_hi(1, d1_hi), _chi_hi(2, d2_hi))
    return CellRecord(*rec, d_sq_hi, delta_hi, float(rec[5].max()))


def _cell_key(cell: Cell):
    if isinstance(cell, DyadicSegment):
        return (0, cell.center, cell.depth)
    return (1, cell.cx, cell.cy, cell.depth)


class MachineKernel:
    """Memoizing directed-rounding grader for one potential.

    ``eliminate`` mirrors :func:`tbpmin.energy.eliminate_block` with float
    bounds: the energy floor is rounded down, the error is rounded up, so
    eliminations are sound and failures merely conservative.
    """

    def __init__(self, potential: Potential, cache_limit: int = 2_500_000):
        self.potential = potential
        if any(a <= 0 for _, a in potential.terms):
            raise ValueError("kernel requires positive combination weights")
        self._terms = tuple(
            (k, _exact_float(Fraction(a))) for k, a in potential.terms
        )
        self._max_k = max(k for k, _ in self._terms)
        self.cache_limit = cache_limit
        self._cells: dict = {}
        self._pairs: dict = {}
        self._inf_tables: dict = {}
        self._eps: dict = {}
        self._folded: dict = {}

    # ------------------------------------------------------------ caches

    def _evict_if_needed(self) -> None:
        if (
            len(self._pairs) + len(self._eps) + len(self._folded)
            > self.cache_limit
        ):
            self._pairs.clear()
            self._eps.clear()
            self._folded.clear()
            self._inf_tables.clear()

    def cell_record(self, cell: Union[DyadicSegment, DyadicSquare]) -> CellRecord:
        key = _cell_key(cell)
        rec = self._cells.get(key)
        if rec is None:
            rec = _build_cell(cell)
            if len(self._cells) > self.cache_limit:
                self._cells.clear()
            self._cells[key] = rec
        return rec

    # --------------------------------------------------- kernel building

    def _kernel_lo(self, base_lo: np.ndarray) -> np.ndarray:
        """Lower bound of sum a_k x^k at x >= base_lo >= 0 (round down)."""
        total = None
        power = None
        want = dict(self._terms)
        for k in range(1, self._max_k + 1):
            power = base_lo if power is None else _ndn(power * base_lo)
            if k in want:
                term = _ndn(want[k] * power)
                total = term if total is None else _ndn(total + term)
        return total

    def pair_record(self, a: Cell, b: Cell) -> PairRecord:
        """Symmetric vertex-table record; call with the canonical key order."""
        ka, kb = _cell_key(a), _cell_key(b)
        if kb < ka:
            rec = self.pair_record(b, a)
            return PairRecord(rec.table_lo.T, rec.max_dot_hi)
        key = (ka, kb)
        rec = self._pairs.get(key)
        if rec is not None:
            return rec
        ra, rb = self.cell_record(a), self.cell_record(b)
        dot_lo = None
        dot_hi = None
        for axis in range(3):
            alo, ahi = getattr(ra, ("xlo", "ylo", "zlo")[axis]), getattr(
                ra, ("xhi", "yhi", "zhi")[axis]
            )
            blo, bhi = getattr(rb, ("xlo", "ylo", "zlo")[axis]), getattr(
                rb, ("xhi", "yhi", "zhi")[axis]
            )
            p1 = np.outer(alo, blo)
            p2 = np.outer(alo, bhi)
            p3 = np.outer(ahi, blo)
            p4 = np.outer(ahi, bhi)
            plo = _ndn(np.minimum(np.minimum(p1, p2), np.minimum(p3, p4)))
            phi = _nup(np.maximum(np.maximum(p1, p2), np.maximum(p3, p4)))
            dot_lo = plo if dot_lo is None else _ndn(dot_lo + plo)
            dot_hi = phi if dot_hi is None else _nup(dot_hi + phi)
        base_lo = np.maximum(0.0, _ndn(2.0 + 2.0 * dot_lo))
        table = self._kernel_lo(base_lo)
        rec = PairRecord(table, float(dot_hi.max()))
        self._evict_if_needed()
        self._pairs[key] = rec
        return rec

    def infinity_table(self, cell: Cell) -> np.ndarray:
        """Kernel lower bounds of a cell's vertices against the north pole."""
        key = _cell_key(cell)
        tab = self._inf_tables.get(key)
        if tab is None:
            rec = self.cell_record(cell)
            base_lo = np.maximum(0.0, _ndn(2.0 + 2.0 * rec.zlo))
            tab = self._kernel_lo(base_lo)
            self._inf_tables[key] = tab
        return tab

    # ----------------------------------------------------- error bounds

    def eps_hi(self, cell: Cell, other: Cell) -> float:
        """Upper bound of the combined per-pair error term."""
        ki, kj = _cell_key(cell), _cell_key(other) if other is not INFINITY else None
        key = (ki, kj)
        val = self._eps.get(key)
        if val is not None:
            return val
        rec = self.cell_record(cell)
        if other is INFINITY:
            m = rec.z_max_hi
        else:
            pair = self.pair_record(cell, other)
            dj = self.cell_record(other).delta_hi
            di = rec.delta_hi
            m = _up(pair.max_dot_hi + di)
            m = _up(m + dj)
            m = _up(m + _up(di * dj))
        t = max(0.0, _up(2.0 + 2.0 * m))
        val = 0.0
        for k, a in self._terms:
            tp = 1.0
            for _ in range(k - 2):
                tp = _up(tp * t)
            quad = _up(0.5 * k * (k - 1) * _up(tp * rec.d_sq_hi))
            tp = _up(tp * t)
            lin = _up(2.0 * k * _up(tp * rec.delta_hi))
            val = _up(val + _up(a * _up(quad + lin)))
        if not math.isfinite(val):
            raise RigorAbort("error bound overflowed")
        self._eps[key] = val
        return val

    def block_error_hi(self, block: DyadicBlock) -> tuple[float, float, float, float]:
        cells = block.cells()
        out = []
        for i in range(4):
            acc = 0.0
            for j in range(5):
                if j != i:
                    acc = _up(acc + self.eps_hi(cells[i], cells[j]))
            out.append(acc)
        return tuple(out)

    # ------------------------------------------------------ elimination

    def _folded_tables(self, block: DyadicBlock):
        """Segment-vs-square tables with the infinity column folded in."""
        seg = block.segment
        ks = _cell_key(seg)
        seg_inf = None
        out = []
        for idx, sq in enumerate(block.squares):
            key = (ks, _cell_key(sq), idx == 0)
            tab = self._folded.get(key)
            if tab is None:
                tab = self.pair_record(seg, sq).table_lo
                tab = _ndn(tab + self.infinity_table(sq)[None, :])
                if idx == 0:
                    if seg_inf is None:
                        seg_inf = self.infinity_table(seg)
                    tab = _ndn(tab + seg_inf[:, None])
                self._folded[key] = tab
            out.append(tab)
        return out

    def eliminate(self, block: DyadicBlock, target: Fraction) -> EliminationDecision:
        u1, u2, u3 = self._folded_tables(block)
        sq = block.squares
        t12 = self.pair_record(sq[0], sq[1]).table_lo
        t13 = self.pair_record(sq[0], sq[2]).table_lo
        t23 = self.pair_record(sq[1], sq[2]).table_lo
        e = _ndn(u1[:, :, None, None] + u2[:, None, :, None])
        e = _ndn(e + u3[:, None, None, :])
        e = _ndn(e + t12[None, :, :, None])
        e = _ndn(e + t13[None, :, None, :])
        e = _ndn(e + t23[None, None, :, :])
        floor = float(e.min())
        errs = self.block_error_hi(block)
        err_total = 0.0
        for v in errs:
            err_total = _up(err_total + v)
        if not (math.isfinite(floor) and math.isfinite(err_total)):
            raise RigorAbort("non-finite energy bound")
        margin_lo = _dn(floor - err_total)
        if margin_lo > target:
            return EliminationDecision(True, None, floor, err_total)
        axis = max(range(4), key=lambda i: (errs[i], -i))
        return EliminationDecision(False, axis, floor, err_total)


class ExactKernel:
    """Reference-grade adapter around the exact rational elimination."""

    def __init__(self, potential: Potential):
        self.potential = potential

    def eliminate(self, block: DyadicBlock, target: Fraction) -> EliminationDecision:
        res = eliminate_block(block, self.potential, target)
        return EliminationDecision(
            res.eliminated,
            res.subdivide_axis,
            float(res.min_vertex_energy),
            float(res.error.total),
        )

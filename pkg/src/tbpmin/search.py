"""Divide-and-conquer search over the block decomposition of the moduli cube.

The driver grades blocks with a five-step procedure: discard blocks that
only contain non-normalized configurations, force squares down to side at
most 1/2, discard blocks fully outside the working domain, stop on blocks
inside the certified neighborhood of the minimizer, and finally try the
rigorous energy elimination.  Failed blocks are subdivided along the
recommended axis and pushed back on a stack, depth first.

A finished run is a proof certificate: the popped-and-passed blocks tile
everything reachable from the start block, and each passed block either
cannot contain a normalized minimizer or has energy above the target.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import isqrt
from typing import Optional, Sequence, Union

from .cells import (
    DyadicBlock,
    DyadicSegment,
    DyadicSquare,
    ScaleExhausted,
    format_block,
    parse_block,
)
from .energy import Potential, tbp_energy
from .gradekernel import ExactKernel, MachineKernel
from .intervals import RigorAbort

PASS_IRRELEVANT = "pass_irrelevant"
FAIL_SUBDIVIDE = "fail_subdivide"
PASS_OUT_OF_DOMAIN = "pass_out_of_domain"
PASS_IN_B0 = "pass_in_b0"
PASS_ELIMINATED = "pass_eliminated"
FAIL_ENERGY = "fail_subdivide_by_energy"

PASS_VERDICTS = (PASS_IRRELEVANT, PASS_OUT_OF_DOMAIN, PASS_IN_B0, PASS_ELIMINATED)
ALL_VERDICTS = PASS_VERDICTS + (FAIL_SUBDIVIDE, FAIL_ENERGY)


@dataclass(frozen=True, slots=True)
class SearchParams:
    """Configuration of one search run.

    The integer scale and the neighborhood in-radius are tied: S*eps0 must
    be a positive integer so that every containment test stays in integer
    arithmetic.  The production runs use (2^25, 2^-15) for the degree 3..6
    kernels and (2^30, 2^-18) for the high-degree combination.
    """

    potential: Potential
    scale_log2: int = 25
    epsilon0_log2: int = -15
    thread_count: int = 1
    checkpoint_path: Optional[str] = None
    subregion: Optional[str] = None
    checkpoint_every: int = 1_000_000

    def __post_init__(self) -> None:
        if self.scale_log2 < 2:
            raise ValueError("scale must be at least 2^2")
        if self.scale_log2 + self.epsilon0_log2 < 0:
            raise ValueError("S*eps0 must be an integer")
        if self.thread_count < 1:
            raise ValueError("thread_count must be positive")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be positive")

    @property
    def scale(self) -> int:
        return 1 << self.scale_log2

    @property
    def eps_scaled(self) -> int:
        """S * eps0 as an integer."""
        return 1 << (self.scale_log2 + self.epsilon0_log2)


@dataclass(frozen=True, slots=True)
class GradeOutcome:
    verdict: str
    axis: Optional[int] = None

    @property
    def passed(self) -> bool:
        return self.verdict in PASS_VERDICTS


@dataclass(slots=True)
class SearchReport:
    status: str
    partition_size: int
    counts: dict
    max_depth: int
    elapsed_seconds: float
    popped: int = 0

    def to_json_dict(self, params: SearchParams) -> dict:
        return {
            "task": "search",
            "potential": params.potential.name,
            "scale_log2": params.scale_log2,
            "epsilon0_log2": params.epsilon0_log2,
            "status": self.status,
            "partition_size": self.partition_size,
            "counts": dict(self.counts),
            "max_depth": self.max_depth,
            "popped": self.popped,
            "elapsed_seconds": self.elapsed_seconds,
        }


def is_irrelevant(block: DyadicBlock) -> bool:
    """True when no configuration in the block satisfies the normalization.

    Five exact integer tests on scaled coordinates; any one suffices:
    the pinned coordinate is at most 1, the first free point stays on or
    below the x-axis, the second stays on or above, the second sits at or
    above the third in y, or the second is left of x = -1/2.
    """
    s = 1 << block.segment.scale_log2
    seg = block.segment
    if seg.center + seg.half_side_scaled <= s:
        return True
    q1, q2, q3 = block.squares
    h1, h2, h3 = (q.half_side_scaled for q in block.squares)
    if q1.cy - h1 >= 0:
        return True
    if q2.cy + h2 <= 0:
        return True
    if q2.cy - h2 >= q3.cy + h3:
        return True
    if 2 * (q2.cx + h2) <= -s:
        return True
    return False


def square_outside_domain(sq: DyadicSquare) -> bool:
    """Exact test that the square misses the open box (-3/2, 3/2)^2."""
    h = sq.half_side_scaled
    lim = 3 << (sq.scale_log2 - 1)
    return max(abs(sq.cx), abs(sq.cy)) - h >= lim


def scaled_sqrt3_half(scale_log2: int) -> int:
    """floor(S * sqrt(3)/2) by integer square root."""
    half = 1 << (scale_log2 - 1)
    return isqrt(3 * half * half)


def b0_bounds_scaled(params: SearchParams, a_star: Optional[int] = None):
    """Scaled-integer bounds of the certified boxes around the minimizer.

    The irrational coordinates +-sqrt(3)/2 get the dyadic bracket
    [a* - (eps - 1/S), a* + (eps - 1/S)]: one step tighter than eps so the
    result lies inside the true eps-cube for either rounding of a*.
    """
    s = params.scale
    e = params.eps_scaled
    a = scaled_sqrt3_half(params.scale_log2) if a_star is None else a_star
    shrunk = e - 1
    return (
        (s - e, s + e),
        ((-s // 2 - e, -s // 2 + e), (-a - shrunk, -a + shrunk)),
        ((-e, e), (-e, e)),
        ((-s // 2 - e, -s // 2 + e), (a - shrunk, a + shrunk)),
    )


def contained_in_b0(
    block: DyadicBlock, params: SearchParams, a_star: Optional[int] = None
) -> bool:
    """Exact integer test for containment in the minimizer neighborhood."""
    if block.segment.scale_log2 != params.scale_log2:
        raise ValueError("block scale does not match params")
    seg_b, *sq_bounds = b0_bounds_scaled(params, a_star)
    seg = block.segment
    h = seg.half_side_scaled
    if seg.center - h < seg_b[0] or seg.center + h > seg_b[1]:
        return False
    for sq, (bx, by) in zip(block.squares, sq_bounds):
        h = sq.half_side_scaled
        if sq.cx - h < bx[0] or sq.cx + h > bx[1]:
            return False
        if sq.cy - h < by[0] or sq.cy + h > by[1]:
            return False
    return True


def grade(block: DyadicBlock, params: SearchParams, kernel) -> GradeOutcome:
    """Apply the five grading steps in order and return the first verdict."""
    if is_irrelevant(block):
        return GradeOutcome(PASS_IRRELEVANT)
    for i, sq in enumerate(block.squares):
        if sq.depth < 1:
            return GradeOutcome(FAIL_SUBDIVIDE, i + 1)
    if any(square_outside_domain(sq) for sq in block.squares):
        return GradeOutcome(PASS_OUT_OF_DOMAIN)
    if contained_in_b0(block, params):
        return GradeOutcome(PASS_IN_B0)
    decision = kernel.eliminate(block, tbp_energy(params.potential))
    if decision.eliminated:
        return GradeOutcome(PASS_ELIMINATED)
    return GradeOutcome(FAIL_ENERGY, decision.subdivide_axis)


def make_kernel(params: SearchParams, exact: bool = False):
    return ExactKernel(params.potential) if exact else MachineKernel(params.potential)


def _start_block(params: SearchParams) -> DyadicBlock:
    if params.subregion is None:
        return DyadicBlock.root(params.scale_log2)
    return parse_block(params.subregion, params.scale_log2)


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_checkpoint(path: str, stack: list, state: dict) -> None:
    _atomic_write(path, "".join(format_block(b) + "\n" for b in stack))
    _atomic_write(path + ".meta.json", json.dumps(state, indent=1))


def _read_checkpoint(path: str, params: SearchParams):
    with open(path) as fh:
        stack = [parse_block(line, params.scale_log2) for line in fh if line.strip()]
    with open(path + ".meta.json") as fh:
        state = json.load(fh)
    if state["potential"] != params.potential.name:
        raise ValueError("checkpoint belongs to a different potential")
    return stack, state


def _new_state(params: SearchParams) -> dict:
    return {
        "potential": params.potential.name,
        "scale_log2": params.scale_log2,
        "counts": {v: 0 for v in ALL_VERDICTS},
        "popped": 0,
        "max_depth": -2,
        "elapsed_seconds": 0.0,
    }


def _report(state: dict, status: str) -> SearchReport:
    counts = state["counts"]
    return SearchReport(
        status=status,
        partition_size=sum(counts[v] for v in PASS_VERDICTS),
        counts=dict(counts),
        max_depth=state["max_depth"],
        elapsed_seconds=state["elapsed_seconds"],
        popped=state["popped"],
    )


def _run_sequential(
    params: SearchParams,
    stack: list,
    state: dict,
    kernel,
    max_pops: Optional[int] = None,
) -> SearchReport:
    counts = state["counts"]
    t0 = time.monotonic()
    base_elapsed = state["elapsed_seconds"]
    since_flush = 0
    status = "success"
    try:
        while stack:
            if max_pops is not None and state["popped"] >= max_pops:
                status = "aborted"
                break
            block = stack.pop()
            state["popped"] += 1
            if block.max_depth > state["max_depth"]:
                state["max_depth"] = block.max_depth
            outcome = grade(block, params, kernel)
            counts[outcome.verdict] += 1
            if not outcome.passed:
                stack.extend(reversed(block.subdivide(outcome.axis)))
            since_flush += 1
            if (
                params.checkpoint_path is not None
                and since_flush >= params.checkpoint_every
            ):
                state["elapsed_seconds"] = base_elapsed + time.monotonic() - t0
                _write_checkpoint(params.checkpoint_path, stack, state)
                since_flush = 0
    except ScaleExhausted:
        status = "scale_exhausted"
        state["exhausted_at"] = format_block(block)
    except RigorAbort:
        status = "aborted"
    state["elapsed_seconds"] = base_elapsed + time.monotonic() - t0
    if params.checkpoint_path is not None:
        _write_checkpoint(params.checkpoint_path, stack, state)
    return _report(state, status)


def _worker(args):
    params, code = args
    sub = replace(
        params, subregion=code, thread_count=1, checkpoint_path=None
    )
    report = search(sub)
    return report


def _merge_reports(reports: Sequence[SearchReport]) -> SearchReport:
    order = {"success": 0, "scale_exhausted": 1, "aborted": 2}
    counts = {v: 0 for v in ALL_VERDICTS}
    for r in reports:
        for v, n in r.counts.items():
            counts[v] += n
    return SearchReport(
        status=max((r.status for r in reports), key=order.__getitem__),
        partition_size=sum(r.partition_size for r in reports),
        counts=counts,
        max_depth=max(r.max_depth for r in reports),
        elapsed_seconds=max(r.elapsed_seconds for r in reports),
        popped=sum(r.popped for r in reports),
    )


def search(
    params: SearchParams,
    kernel=None,
    resume: bool = False,
    max_pops: Optional[int] = None,
) -> SearchReport:
    """Run the depth-first grading loop to completion.

    Success means the stack emptied: every graded block passed, possibly
    after subdivision.  ``resume`` restarts from the checkpoint written by
    a previous run with the same parameters.
    """
    if kernel is None:
        kernel = make_kernel(params)
    if resume:
        if params.checkpoint_path is None:
            raise ValueError("resume requires a checkpoint path")
        stack, state = _read_checkpoint(params.checkpoint_path, params)
    else:
        stack = [_start_block(params)]
        state = _new_state(params)
    if params.thread_count == 1:
        return _run_sequential(params, stack, state, kernel, max_pops)

    if params.checkpoint_path is not None:
        raise ValueError("checkpointing is only supported sequentially")
    # Expand the frontier a little, then farm out disjoint subtrees.
    import multiprocessing as mp

    want = 4 * params.thread_count
    while stack and len(stack) < want:
        block = stack.pop()
        state["popped"] += 1
        if block.max_depth > state["max_depth"]:
            state["max_depth"] = block.max_depth
        outcome = grade(block, params, kernel)
        state["counts"][outcome.verdict] += 1
        if not outcome.passed:
            stack.extend(reversed(block.subdivide(outcome.axis)))
    jobs = [(params, format_block(b)) for b in stack]
    with mp.Pool(params.thread_count) as pool:
        reports = pool.map(_worker, jobs)
    reports.append(_report(state, "success"))
    return _merge_reports(reports)


def block_containing(
    coords: Sequence[Union[Fraction, int]],
    depths: Sequence[int],
    scale_log2: int,
) -> DyadicBlock:
    """The subdivision-tree block at the given per-axis depths whose cells
    contain the given point (x0, x1, y1, x2, y2, x3, y3).

    Points on a cell boundary resolve to the lower-center cell.  Useful
    for carving test subregions around known configurations.
    """
    if len(coords) != 7 or len(depths) != 4:
        raise ValueError("need 7 coordinates and 4 depths")
    s = 1 << scale_log2

    def center(value: Fraction, depth: int) -> int:
        h = 1 << (scale_log2 - depth - 1)
        idx = Fraction(value) * s / h
        i = math.floor(idx)
        c = i if i % 2 else i - 1
        if Fraction(c - 1) * h <= Fraction(value) * s <= Fraction(c + 1) * h:
            return c * h
        return (c + 2) * h

    seg = DyadicSegment(center(coords[0], depths[0]), depths[0], scale_log2)
    squares = []
    for i in range(3):
        d = depths[i + 1]
        squares.append(
            DyadicSquare(
                center(coords[1 + 2 * i], d),
                center(coords[2 + 2 * i], d),
                d,
                scale_log2,
            )
        )
    return DyadicBlock(seg, tuple(squares))

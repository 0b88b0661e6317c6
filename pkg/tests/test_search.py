"""Grading rules and the depth-first search driver.

The driver tests run on small carved-out subregions so that a full pass
stays under a second or two; expected partition sizes and verdict counts
were frozen from instrumented runs and double-checked against an exact
conservation argument (the passed blocks must tile the start region).
"""

import json
from fractions import Fraction

import pytest

from tbpmin.cells import (
    DyadicBlock,
    DyadicSegment,
    DyadicSquare,
    format_block,
    parse_block,
)
from tbpmin.energy import G3, G4, POTENTIALS
from tbpmin.qsqrt3 import QSqrt3
from tbpmin.search import (
    FAIL_ENERGY,
    FAIL_SUBDIVIDE,
    PASS_ELIMINATED,
    PASS_IN_B0,
    PASS_IRRELEVANT,
    PASS_OUT_OF_DOMAIN,
    GradeOutcome,
    SearchParams,
    b0_bounds_scaled,
    block_containing,
    contained_in_b0,
    grade,
    is_irrelevant,
    make_kernel,
    scaled_sqrt3_half,
    search,
)

F = Fraction


class ForbiddenKernel:
    """Stand-in proving a grading step never reaches the energy bound."""

    def eliminate(self, block, target):
        raise AssertionError("energy kernel must not be consulted")


def _polar_squares():
    return (
        DyadicSquare(-112, -208, 3, 8),
        DyadicSquare(16, 16, 3, 8),
        DyadicSquare(-112, 208, 3, 8),
    )


def _near_minimizer_coords(scale_log2, nudge):
    a = scaled_sqrt3_half(scale_log2)
    s = 1 << scale_log2
    return (
        F(1) + nudge,
        F(-1, 2) + nudge,
        F(-a, s) + nudge,
        nudge,
        nudge,
        F(-1, 2) + nudge,
        F(a, s) + nudge,
    )


# ---------------------------------------------------------------- relevance


def test_irrelevant_when_pinned_coordinate_at_most_one():
    seg = DyadicSegment(128, 0, 8)  # covers [0, 1]
    assert is_irrelevant(DyadicBlock(seg, _polar_squares()))


def test_polar_bipyramid_block_is_relevant():
    block = DyadicBlock(DyadicSegment(272, 3, 8), _polar_squares())
    assert not is_irrelevant(block)


def test_equatorial_labelings_are_irrelevant():
    # Second point at (-1, 0): caught by the x <= -1/2 test.
    seg = DyadicSegment(272, 3, 8)
    q1 = DyadicSquare(16, -144, 3, 8)
    q3 = DyadicSquare(16, 144, 3, 8)
    left = DyadicSquare(-240, 16, 3, 8)
    assert is_irrelevant(DyadicBlock(seg, (q1, left, q3)))
    # Third point at (-1, 0) instead: caught by the y-ordering test.
    q2 = DyadicSquare(16, 144, 3, 8)
    assert is_irrelevant(DyadicBlock(seg, (q1, q2, left)))


def test_first_point_above_axis_is_irrelevant():
    seg = DyadicSegment(272, 3, 8)
    q1_up = DyadicSquare(16, 144, 3, 8)
    _, q2, q3 = _polar_squares()
    assert is_irrelevant(DyadicBlock(seg, (q1_up, q2, q3)))


def test_second_point_below_axis_is_irrelevant():
    seg = DyadicSegment(272, 3, 8)
    q1, _, q3 = _polar_squares()
    q2_down = DyadicSquare(16, -16, 3, 8)
    assert is_irrelevant(DyadicBlock(seg, (q1, q2_down, q3)))


# ----------------------------------------------------- minimizer neighborhood


def test_scaled_sqrt3_half_is_floor():
    for lg in (8, 25, 30):
        a = scaled_sqrt3_half(lg)
        half = 1 << (lg - 1)
        assert a * a <= 3 * half * half < (a + 1) * (a + 1)


@pytest.mark.parametrize("bump", [0, 1])
def test_b0_bracket_inside_true_cube_for_either_rounding(bump):
    # The dyadic bracket around +-sqrt(3)/2 must stay inside the true
    # eps0-cube whether a* rounds down or up.
    params = SearchParams(G3)
    s = params.scale
    eps0 = F(1, 1 << 15)
    root3half = QSqrt3(F(0), F(1, 2))
    a = scaled_sqrt3_half(25) + bump
    bounds = b0_bounds_scaled(params, a_star=a)
    (lo, hi) = bounds[3][1]  # y-bracket of the third point, around +sqrt(3)/2
    assert QSqrt3(F(lo, s)) >= root3half - eps0
    assert QSqrt3(F(hi, s)) <= root3half + eps0
    (lo, hi) = bounds[1][1]  # mirror bracket around -sqrt(3)/2
    assert QSqrt3(F(lo, s)) >= -root3half - eps0
    assert QSqrt3(F(hi, s)) <= -root3half + eps0
    # Rational coordinates get the full-width bracket, exactly centered.
    e = params.eps_scaled
    assert bounds[0] == (s - e, s + e)
    assert bounds[2] == ((-e, e), (-e, e))
    assert bounds[1][0] == bounds[3][0] == (-s // 2 - e, -s // 2 + e)


def test_contained_in_b0_accepts_tree_cell_near_minimizer():
    coords = _near_minimizer_coords(25, F(1, 1 << 20))
    block = block_containing(coords, (16, 16, 16, 16), 25)
    params = SearchParams(G3)
    assert contained_in_b0(block, params)
    # Either rounding of a* must accept it as well.
    a = scaled_sqrt3_half(25)
    assert contained_in_b0(block, params, a_star=a + 1)


def test_contained_in_b0_rejects_shifted_block():
    coords = _near_minimizer_coords(25, F(1, 1 << 20))
    block = block_containing(coords, (16, 16, 16, 16), 25)
    seg = block.segment
    far = DyadicSegment(seg.center + 8 * seg.half_side_scaled, 16, 25)
    assert not contained_in_b0(DyadicBlock(far, block.squares), SearchParams(G3))


def test_contained_in_b0_requires_matching_scale():
    block = DyadicBlock(DyadicSegment(272, 3, 8), _polar_squares())
    with pytest.raises(ValueError):
        contained_in_b0(block, SearchParams(G3))


# ------------------------------------------------------------------- grading


def test_grade_root_forces_square_subdivision_first():
    root = DyadicBlock.root(25)
    outcome = grade(root, SearchParams(G3), ForbiddenKernel())
    assert outcome == GradeOutcome(FAIL_SUBDIVIDE, 1)
    assert not outcome.passed


def test_grade_irrelevant_before_anything_else():
    block = DyadicBlock(DyadicSegment(128, 0, 8), _polar_squares())
    params = SearchParams(G3, scale_log2=8, epsilon0_log2=-4)
    assert grade(block, params, ForbiddenKernel()).verdict == PASS_IRRELEVANT


def test_grade_out_of_domain_square():
    q1, q2, _ = _polar_squares()
    corner = DyadicSquare(448, 448, 1, 8)
    block = DyadicBlock(DyadicSegment(272, 3, 8), (q1, q2, corner))
    params = SearchParams(G3, scale_log2=8, epsilon0_log2=-4)
    assert grade(block, params, ForbiddenKernel()).verdict == PASS_OUT_OF_DOMAIN


def test_grade_stops_inside_b0_without_kernel():
    coords = _near_minimizer_coords(25, F(1, 1 << 20))
    block = block_containing(coords, (16, 16, 16, 16), 25)
    outcome = grade(block, SearchParams(G3), ForbiddenKernel())
    assert outcome == GradeOutcome(PASS_IN_B0)
    assert outcome.passed


def test_grade_eliminates_clustered_block():
    # All three free points huddle near (1.4, 0): pair energies blow up.
    seg = DyadicSegment(514, 6, 8)
    squares = (
        DyadicSquare(358, -14, 6, 8),
        DyadicSquare(358, 14, 6, 8),
        DyadicSquare(358, 42, 6, 8),
    )
    block = DyadicBlock(seg, squares)
    params = SearchParams(G3, scale_log2=8, epsilon0_log2=-4)
    assert not is_irrelevant(block)
    assert grade(block, params, make_kernel(params)).verdict == PASS_ELIMINATED


def test_grade_fail_reports_energy_axis():
    block = DyadicBlock(DyadicSegment(272, 3, 8), _polar_squares())
    params = SearchParams(G3, scale_log2=8, epsilon0_log2=-4)
    outcome = grade(block, params, make_kernel(params))
    assert outcome.verdict == FAIL_ENERGY
    assert outcome.axis in (0, 1, 2, 3)


# -------------------------------------------------------------- search driver

# Subregions carved around a slightly perturbed minimizer at scale 2^25.
# The perturbation (2^-13) exceeds eps0, so everything eliminates.
TINY_REGION = (
    "7 33947648 | 7 -16384000 -28966912 | 7 393216 393216 | 7 -16384000 28966912"
)
SMALL_REGION = (
    "13 33556480 | 13 -16775168 -29067264 | 13 2048 2048 | 13 -16775168 29063168"
)
MID_REGION = (
    "12 33558528 | 12 -16773120 -29069312 | 12 4096 4096 | 12 -16773120 29061120"
)


def test_search_tiny_subregion_full_run():
    report = search(SearchParams(G3, subregion=TINY_REGION))
    assert report.status == "success"
    assert report.partition_size == 4
    assert report.popped == 5
    assert report.counts[PASS_ELIMINATED] == 4
    assert report.counts[FAIL_ENERGY] == 1
    assert report.counts[PASS_IRRELEVANT] == 0


def test_search_small_subregion_frozen_counts():
    report = search(SearchParams(G3, subregion=SMALL_REGION))
    assert report.status == "success"
    assert report.partition_size == 16
    assert report.popped == 21
    assert report.counts[PASS_ELIMINATED] == 16
    assert report.counts[FAIL_ENERGY] == 5


def test_search_block_inside_b0_stops_immediately():
    coords = _near_minimizer_coords(25, F(1, 1 << 20))
    block = block_containing(coords, (17, 17, 17, 17), 25)
    report = search(SearchParams(G3, subregion=format_block(block)))
    assert report.status == "success"
    assert report.partition_size == 1
    assert report.counts[PASS_IN_B0] == 1


def test_search_is_deterministic():
    a = search(SearchParams(G3, subregion=MID_REGION))
    b = search(SearchParams(G3, subregion=MID_REGION))
    assert a.counts == b.counts
    assert a.popped == b.popped == 395
    assert a.partition_size == b.partition_size == 280


def test_search_partition_tiles_the_start_region():
    # Exact conservation: passed blocks carry the full product measure of
    # the start block, counted in scaled integer units.
    params = SearchParams(G3, subregion=SMALL_REGION)
    kernel = make_kernel(params)
    start = parse_block(SMALL_REGION, 25)

    def volume(block):
        v = 2 * block.segment.half_side_scaled
        for sq in block.squares:
            v *= (2 * sq.half_side_scaled) ** 2
        return v

    stack = [start]
    covered = 0
    while stack:
        block = stack.pop()
        outcome = grade(block, params, kernel)
        if outcome.passed:
            covered += volume(block)
        else:
            stack.extend(block.subdivide(outcome.axis))
    assert covered == volume(start)


def test_search_report_json_shape():
    params = SearchParams(G3, subregion=TINY_REGION)
    report = search(params)
    payload = report.to_json_dict(params)
    assert payload["task"] == "search"
    assert payload["potential"] == "g3"
    assert payload["status"] == "success"
    assert payload["partition_size"] == 4
    assert set(payload["counts"]) == {
        PASS_IRRELEVANT,
        FAIL_SUBDIVIDE,
        PASS_OUT_OF_DOMAIN,
        PASS_IN_B0,
        PASS_ELIMINATED,
        FAIL_ENERGY,
    }
    json.dumps(payload)  # must be serializable as-is


def test_search_scale_exhausted_when_cells_hit_the_floor():
    # At scale 2^4 with eps0 = 2^-4 the shrunken bracket has zero width,
    # so the neighborhood test can never fire and subdivision bottoms out.
    report = search(SearchParams(G3, scale_log2=4, epsilon0_log2=-4))
    assert report.status == "scale_exhausted"


def test_search_resume_matches_uninterrupted_run(tmp_path):
    ck = str(tmp_path / "state.ck")
    params = SearchParams(
        G3, subregion=MID_REGION, checkpoint_path=ck, checkpoint_every=50
    )
    first = search(params, max_pops=100)
    assert first.status == "aborted"
    assert first.popped == 100
    meta = json.loads((tmp_path / "state.ck.meta.json").read_text())
    assert meta["potential"] == "g3"
    assert meta["popped"] == 100
    resumed = search(params, resume=True)
    assert resumed.status == "success"
    baseline = search(SearchParams(G3, subregion=MID_REGION))
    assert resumed.counts == baseline.counts
    assert resumed.popped == baseline.popped
    assert resumed.partition_size == baseline.partition_size


def test_search_resume_rejects_other_potential(tmp_path):
    ck = str(tmp_path / "state.ck")
    params = SearchParams(
        G3, subregion=MID_REGION, checkpoint_path=ck, checkpoint_every=50
    )
    search(params, max_pops=60)
    wrong = SearchParams(
        G4, subregion=MID_REGION, checkpoint_path=ck, checkpoint_every=50
    )
    with pytest.raises(ValueError):
        search(wrong, resume=True)


def test_search_resume_requires_checkpoint_path():
    with pytest.raises(ValueError):
        search(SearchParams(G3, subregion=TINY_REGION), resume=True)


def test_search_parallel_counts_match_sequential():
    seq = search(SearchParams(G3, subregion=MID_REGION))
    par = search(SearchParams(G3, subregion=MID_REGION, thread_count=2))
    assert par.status == "success"
    assert par.counts == seq.counts
    assert par.popped == seq.popped
    assert par.max_depth == seq.max_depth


def test_search_parallel_rejects_checkpointing(tmp_path):
    params = SearchParams(
        G3,
        subregion=TINY_REGION,
        thread_count=2,
        checkpoint_path=str(tmp_path / "x.ck"),
    )
    with pytest.raises(ValueError):
        search(params)


def test_search_params_validation():
    with pytest.raises(ValueError):
        SearchParams(G3, scale_log2=25, epsilon0_log2=-26)
    with pytest.raises(ValueError):
        SearchParams(G3, thread_count=0)
    with pytest.raises(ValueError):
        SearchParams(G3, checkpoint_every=0)
    assert SearchParams(G3).eps_scaled == 1 << 10
    assert SearchParams(G3, scale_log2=30, epsilon0_log2=-18).eps_scaled == 1 << 12


def test_block_containing_round_trips_through_format():
    coords = _near_minimizer_coords(25, F(1, 1 << 20))
    block = block_containing(coords, (9, 8, 7, 6), 25)
    assert parse_block(format_block(block), 25) == block
    # Each cell really contains its coordinate.
    s = 1 << 25
    seg = block.segment
    h = seg.half_side_scaled
    assert seg.center - h <= coords[0] * s <= seg.center + h
    for i, sq in enumerate(block.squares):
        h = sq.half_side_scaled
        assert sq.cx - h <= coords[1 + 2 * i] * s <= sq.cx + h
        assert sq.cy - h <= coords[2 + 2 * i] * s <= sq.cy + h


def test_block_containing_boundary_resolves_to_lower_cell():
    block = block_containing((F(1), F(-1, 2), F(-1, 2), 0, 0, F(-1, 2), F(1, 2)),
                             (4, 4, 4, 4), 25)
    s = 1 << 25
    h = block.segment.half_side_scaled
    assert block.segment.center + h == s  # [1 - side, 1], not [1, 1 + side]
    assert block.squares[1].cx + block.squares[1].half_side_scaled == 0


def test_every_potential_reaches_b0_on_deep_subregion():
    coords = _near_minimizer_coords(25, F(1, 1 << 20))
    code = format_block(block_containing(coords, (17, 17, 17, 17), 25))
    for potential in POTENTIALS.values():
        report = search(SearchParams(potential, subregion=code))
        assert report.status == "success"
        assert report.counts[PASS_IN_B0] == 1

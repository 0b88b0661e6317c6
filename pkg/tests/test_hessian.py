"""Second-derivative certificates around the critical configuration.

The expensive global quantities (coefficient-norm bounds, Taylor
coefficient maxima) are frozen here as exact integers or tight floats;
they were cross-checked against high-precision finite differences.
"""

import math
import random
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tbpmin.energy import POTENTIALS
from tbpmin.hessian import (
    CertificationError,
    DEFAULT_EPSILON0,
    EIGENVALUE_TARGETS,
    P0_COORDS,
    alternating_criterion,
    build_energy_expression,
    certify_local_minimum,
    characteristic_polynomial,
    hessian_at_p0,
    hessian_lower_bound,
    m8_global_bound,
    mu_star_bounds,
    pair_kernel,
    point_kernel,
    shift_polynomial,
    taylor_remainder_bound,
    third_partial_offset,
    third_partial_vector,
    vbar_norm_upper,
    verify_offset,
    walk_derivatives,
)
from tbpmin.multipoly import MultiPoly
from tbpmin.qsqrt3 import QSqrt3, sqrt_fraction_bounds

EPS15 = F(1, 1 << 15)
EPS18 = F(1, 1 << 18)


# ------------------------------------------------------------- kernels


def test_point_kernel_derivative_reduces():
    # d/da of 4(a^2+b^2)/A is 8a/A^2 after cancelling the common factor
    node = point_kernel(1).diff(0)
    assert node.powers == (2,)
    assert node.poly == MultiPoly.variable(2, 0) * 8


def test_pair_kernel_top_slice_is_point_kernel():
    # coefficient of the top (c,d)-degree slice of the pair numerator
    # equals the point numerator: one kernel is the far limit of the other
    for k in (2, 3):
        pair = pair_kernel(k).poly
        top = 2 * k
        got = {
            exps: c
            for exps, c in zip(pair.exponents(), pair.terms.values())
            if exps[2] + exps[3] == top
        }
        a, b, c, d = (MultiPoly.variable(4, i) for i in range(4))
        expect = (a * a + b * b) ** k * (c * c + d * d) ** k * 4 ** k
        want = dict(zip(expect.exponents(), expect.terms.values()))
        assert got == want


def test_mixed_partials_commute():
    base = pair_kernel(3)
    assert base.diff(0).diff(3) == base.diff(3).diff(0)
    assert base.diff(1).diff(1).diff(2) == base.diff(2).diff(1).diff(1)


def test_weight8_chain_counts():
    counts = {}
    for nv, base in ((2, point_kernel(2)), (4, pair_kernel(2))):
        n = 0

        def visit(exps, weight, node):
            nonlocal n
            if weight == 8:
                n += 1

        walk_derivatives(base, 8, visit)
        counts[nv] = n
    assert counts == {2: 9, 4: 165}


# ----------------------------------------------------- energy expression


def test_energy_values_at_critical_tuple():
    expect = {k: 3 + 6 * 2 ** k for k in (2, 3, 4, 5, 6, 10)}
    for k, v in expect.items():
        got = build_energy_expression(k).evaluate(P0_COORDS)
        assert got == QSqrt3(F(v))


def test_gradient_vanishes_at_critical_tuple():
    for k in (2, 3, 6, 10):
        for entry in build_energy_expression(k).gradient():
            value = entry if isinstance(entry, QSqrt3) else QSqrt3(F(entry))
            assert value.sign() == 0


def _numeric_energy(k, xs, mp):
    x1, x2, x3, x4, x5, x6, x7 = xs
    pts = [(x1, mp.mpf(0)), (x2, x3), (x4, x5), (x6, x7)]
    total = mp.mpf(0)
    for a, b in pts:
        total += (4 * (a * a + b * b) / (1 + a * a + b * b)) ** k
    for i in range(4):
        for j in range(i + 1, 4):
            a, b = pts[i]
            c, d = pts[j]
            num = 1 + 2 * a * c + 2 * b * d + (a * a + b * b) * (c * c + d * d)
            total += (4 * num / ((1 + a * a + b * b) * (1 + c * c + d * d))) ** k
    return total


def test_partials_match_finite_differences():
    mp = pytest.importorskip("mpmath").mp
    import mpmath

    mpmath.mp.dps = 50
    rng = random.Random(23)
    expr = build_energy_expression(3)
    h = mpmath.mpf(1) / 10 ** 10
    for _ in range(5):
        pt = [F(rng.randint(-8, 8), 9) for _ in range(7)]
        mpt = [mpmath.mpf(p.numerator) / p.denominator for p in pt]
        for exps in ((1, 0, 0, 0, 0, 0, 0), (0, 1, 1, 0, 0, 0, 0),
                     (2, 0, 0, 0, 0, 1, 0), (0, 0, 0, 3, 0, 0, 0)):
            exact = expr.partial_at(exps, pt)
            exact_f = float(exact)

            def fd(g, order_left):
                if not any(order_left):
                    return _numeric_energy(3, g, mpmath)
                i = next(j for j, e in enumerate(order_left) if e)
                rest = list(order_left)
                rest[i] -= 1
                up = list(g)
                up[i] += h
                dn = list(g)
                dn[i] -= h
                return (fd(up, rest) - fd(dn, rest)) / (2 * h)

            numeric = fd(mpt, list(exps))
            assert abs(float(numeric) - exact_f) <= 1e-6 * max(1.0, abs(exact_f))


def test_hessian_matches_numeric_eigenvalues():
    mat = hessian_at_p0(POTENTIALS["g3"])
    arr = np.array([[float(x) for x in row] for row in mat])
    assert np.allclose(arr, arr.T)
    low = np.linalg.eigvalsh(arr).min()
    assert 10 < low < 11


# --------------------------------------------------- eigenvalue criterion


def _det_shifted(matrix, t):
    """det(tI - M) by exact elimination in the quadratic field."""
    n = len(matrix)
    a = [[(QSqrt3(F(t)) if i == j else QSqrt3(F(0))) - matrix[i][j]
          for j in range(n)] for i in range(n)]
    det = QSqrt3(F(1))
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col].sign() != 0), None)
        if pivot is None:
            return QSqrt3(F(0))
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det = det * a[col][col]
        inv_rows = a[col]
        for r in range(col + 1, n):
            if a[r][col].sign() == 0:
                continue
            factor = a[r][col] / inv_rows[col]
            a[r] = [a[r][j] - factor * inv_rows[j] for j in range(n)]
    return det


def _eval_leading_first(coeffs, t):
    acc = QSqrt3(F(0))
    for c in coeffs:
        acc = acc * QSqrt3(F(t)) + c
    return acc


def test_characteristic_polynomial_against_determinant():
    mat = hessian_at_p0(POTENTIALS["g2"])
    coeffs = characteristic_polynomial(mat)
    assert len(coeffs) == 8
    assert coeffs[0] == QSqrt3(F(1))
    for t in (0, 2, F(-7, 3)):
        assert _eval_leading_first(coeffs, t) == _det_shifted(mat, t)


def test_shift_polynomial_is_composition():
    mat = hessian_at_p0(POTENTIALS["g2"])
    coeffs = characteristic_polynomial(mat)
    lam = F(5, 4)
    shifted = shift_polynomial(coeffs, lam)
    for t in (F(1, 3), F(-2), F(0)):
        assert _eval_leading_first(shifted, t) == _eval_leading_first(
            coeffs, t + lam
        )


def test_alternating_criterion_reference_pairs():
    for name, lam in (("g2", 1), ("g3", 10), ("g4", 24), ("g5", 36),
                      ("g6", 43)):
        assert alternating_criterion(hessian_at_p0(POTENTIALS[name]), F(lam))


def test_alternating_criterion_rejects_absurd_floor():
    assert not alternating_criterion(hessian_at_p0(POTENTIALS["g3"]), F(1000))
    with pytest.raises(CertificationError):
        hessian_lower_bound(POTENTIALS["g3"], F(1000))


def test_alternating_criterion_small_identity():
    ident = [[QSqrt3(F(1)), QSqrt3(F(0))], [QSqrt3(F(0)), QSqrt3(F(1))]]
    assert alternating_criterion(ident, F(1, 2))
    assert not alternating_criterion(ident, F(3, 2))


def test_combined_eigenvalue_floor_window():
    combo = POTENTIALS["g10sharp"]
    hessian_lower_bound(combo, F(1448))
    assert not alternating_criterion(hessian_at_p0(combo), F(1449))


# ------------------------------------------------------- global bounds


M8_G = {
    2: 274741770240,
    3: 31521541201920,
    4: 2740050142986240,
    5: 201952652112691200,
    6: 13400293856913653760,
    10: 162516942801336639946752000,
}
M8_F = {
    2: 4178442240,
    3: 70392913920,
    4: 980757872640,
    5: 15309058867200,
    6: 218439902822400,
    10: 8513037323049369600,
}


def test_m8_exact_values():
    for k, v in M8_G.items():
        assert m8_global_bound(k, "g") == v
    for k, v in M8_F.items():
        assert m8_global_bound(k, "f") == v
    assert max(M8_G[k] for k in range(2, 7)) == 13400293856913653760


def test_remainder_terms():
    for k in range(2, 7):
        assert taylor_remainder_bound(k, EPS15) < 1
    # pair-kernel part alone at the fine scale stays under 19
    assert (7 * EPS18) ** 5 / 120 * M8_G[10] < 19
    honest = taylor_remainder_bound(10, EPS18)
    assert 55 < honest < 56


MU_ROWS_15 = {2: (1, 1, 1, 1), 3: (3, 1, 1, 1), 4: (9, 1, 1, 1),
              5: (12, 1, 1, 1), 6: (122, 1, 1, 1), 10: (47480, 44, 1, 1)}


def test_mu_star_below_reference_rows():
    for k, row in MU_ROWS_15.items():
        got = mu_star_bounds(k, EPS15)
        for value, cap in zip(got, row):
            assert value <= QSqrt3(F(cap))
    for value, cap in zip(mu_star_bounds(10, EPS18), (5935, 1, 1, 1)):
        assert value <= QSqrt3(F(cap))


def test_offset_budgets():
    assert third_partial_offset(4) == 500
    assert third_partial_offset(10) == 6000
    for k in range(2, 7):
        assert verify_offset(k, EPS15).sign() > 0
    assert verify_offset(10, EPS18).sign() > 0
    # the coarse scale blows the k=10 budget: quartic term alone is ~47480
    with pytest.raises(CertificationError):
        verify_offset(10, EPS15)


def test_third_partial_vector_shape():
    vec = third_partial_vector(10)
    assert len(vec) == 343
    assert max(abs(v) for v in vec) == QSqrt3(F(4423680))
    assert sum(1 for v in vec if v.sign() != 0) == 210


def test_vbar_norm_frozen_values():
    ub2 = vbar_norm_upper(2, 500)
    ub10 = vbar_norm_upper(10, 6000)
    assert math.isclose(float(ub2), 9408.60223262514, rel_tol=1e-12)
    assert math.isclose(float(ub10), 13539810.796555873, rel_tol=1e-12)
    scaled = sqrt_fraction_bounds(7 * EPS18 ** 2 * ub10 * ub10)[1]
    assert math.isclose(float(scaled), 136.65379397031478, rel_tol=1e-10)
    # at the coarse scale the same vector lands just above 1093
    coarse = sqrt_fraction_bounds(7 * EPS15 ** 2 * ub10 * ub10)[1]
    assert 1093 < coarse < F(10933, 10)


# --------------------------------------------------------- certificates


COMPONENT_CAPS = {2: 1, 3: 1, 4: 2, 5: 4, 6: 12}


def test_certificates_single_exponents():
    margins = {}
    for name in ("g2", "g3", "g4", "g5", "g6"):
        cert = certify_local_minimum(POTENTIALS[name])
        assert cert.epsilon0 == EPS15
        assert cert.final_margin > 0
        (k,) = [kk for kk, _ in POTENTIALS[name].terms]
        ub = cert.component_norm_bounds[k]
        assert 7 * EPS15 ** 2 * ub * ub < COMPONENT_CAPS[k] ** 2
        margins[name] = float(cert.final_margin)
    expect = {"g2": 0.24033136925496834, "g3": 9.188352237829521,
              "g4": 22.80341731400138, "g5": 32.60586993355157,
              "g6": 31.00374490179887}
    for name, m in expect.items():
        assert math.isclose(margins[name], m, rel_tol=1e-9)


def test_certificate_combined_potential():
    cert = certify_local_minimum(POTENTIALS["g10sharp"])
    assert cert.epsilon0 == EPS18
    assert cert.final_margin > 0
    assert math.isclose(float(cert.final_margin), 1289.7809757551165,
                        rel_tol=1e-9)
    ub10 = cert.component_norm_bounds[10]
    assert 7 * EPS18 ** 2 * ub10 * ub10 < 1091 ** 2
    payload = cert.to_json_dict()
    assert payload["task"] == "hessian"
    assert payload["potential"] == "g10sharp"
    assert set(payload["component_norm_bounds"]) == {"2", "5", "10"}
    assert all(isinstance(v, str) for v in payload["offset_slack"].values())


def test_certificate_rejects_unknown_potential():
    from tbpmin.energy import Potential

    with pytest.raises(CertificationError):
        certify_local_minimum(Potential("quartic", ((4, F(1)),)))


def test_default_epsilon_table():
    assert DEFAULT_EPSILON0 == {"g10sharp": EPS18}
    assert EIGENVALUE_TARGETS["g6"] == 43


# --------------------------------------------- supporting linear algebra


def test_spectral_perturbation_keeps_definiteness():
    # ||D||_2 <= ||D||_F < lambda_min(H) forces H + D positive definite
    rng = np.random.default_rng(99)
    done = 0
    while done < 300:
        h = rng.uniform(-1, 1, (7, 7))
        h = (h + h.T) / 2 + np.eye(7) * rng.uniform(0.0, 2.0)
        lam = np.linalg.eigvalsh(h).min()
        if lam <= 1e-3:
            continue
        d = rng.uniform(-1, 1, (7, 7))
        d = (d + d.T) / 2
        d *= 0.999 * lam / np.linalg.norm(d, "fro")
        assert np.linalg.eigvalsh(h + d).min() > 0
        done += 1


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.integers(-20, 20), min_size=6, max_size=9),
    st.fractions(min_value=F(-1, 4), max_value=F(1, 4)),
)
def test_taylor_tail_bound_univariate(coeffs, t):
    # |p(t)| <= sum over j<=4 of |t|^j/j! |p^(j)(0)| + |t|^5/5! sup|p^(5)|
    e = F(1, 4)
    p = list(map(F, coeffs))

    def deriv(c):
        return [c[i] * i for i in range(1, len(c))]

    def value(c, x):
        acc = F(0)
        for ci in reversed(c):
            acc = acc * x + ci
        return acc

    bound = F(0)
    c = p
    fac = 1
    for j in range(0, 5):
        if j:
            fac *= j
        bound += abs(t) ** j / fac * abs(value(c, F(0)))
        c = deriv(c)
    sup5 = sum(abs(ci) * e ** i for i, ci in enumerate(c))
    bound += abs(t) ** 5 / 120 * sup5
    assert abs(value(p, t)) <= bound

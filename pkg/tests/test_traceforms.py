import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from webcurv.errors import NotNormalized, SlopeCollision, VanishingFx
from webcurv.jetlinalg import JetArray
from webcurv.traceforms import (TraceElement, abc_table, blaschke, closed_form_alpha,
                                closed_form_X, coefficient_sums_ABC, expansion_coeffs_abc,
                                gamma, gamma_additivity_check, gamma_closed_form_3,
                                gamma_expansion, lu_path_alpha, lu_path_X, relative, slopes,
                                subweb_curvatures, subweb_gamma_expansion, sum_subweb_curvatures,
                                symmetric_polys, trace_formula_check, trace_via_proposition)

from conftest import W4, W5, W6, random_normalized_web, web, well_separated

ORIGIN = (0.0, 0.0)
BL3 = ["x", "x + y + x^2*y", "y"]
W5N = ["x + y^2", "x + 2*y + x*y", "2*x - y + x^2", "x + 0.5*y + x*y^2", "y"]


def jets(texts, point, order=None):
    w = web(*texts)
    return w.jets(point, w.d + 1 if order is None else order)


def close(a, b, tol):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))) <= tol


# -- gamma and Blaschke -------------------------------------------------------------

def test_affine_gamma_is_zero():
    g = gamma(jets(["x", "2*x + y", "y - x"], (0.4, 0.7)))
    assert g.as_tuple() == pytest.approx((0, 0, 0), abs=1e-14)


def test_gamma_spot_value():
    g = gamma(jets(BL3, ORIGIN))
    assert g.value == pytest.approx(0.0, abs=1e-14)
    assert g.dx == pytest.approx(-2.0, rel=1e-12)


def test_closed_form_3_spot_value():
    f, g, _ = jets(BL3, ORIGIN, 3)
    te = gamma_closed_form_3(f, g)
    assert te.value == pytest.approx(0.0, abs=1e-14)
    assert te.dx == pytest.approx(-2.0, rel=1e-12)


def test_closed_form_3_affine():
    f, g, _ = jets(["x + 2*y", "3*x - y", "y"], (1.0, 2.0), 3)
    assert gamma_closed_form_3(f, g).as_tuple() == (0.0, 0.0, 0.0)


def test_closed_form_3_errors():
    f, g, _ = jets(["x + y", "2*x + 2*y + x^3", "y"], ORIGIN, 3)
    with pytest.raises(SlopeCollision):
        gamma_closed_form_3(f, g)
    f, g, _ = jets(["y + x^2", "x", "y"], ORIGIN, 3)
    with pytest.raises(VanishingFx):
        gamma_closed_form_3(f, g)


def test_closed_form_3_random(rng):
    done = 0
    while done < 100:
        w = random_normalized_web(rng, 3)
        p = tuple(rng.uniform(-0.5, 0.5, 2))
        try:
            if not well_separated(slopes(w, p)):
                continue
        except VanishingFx:
            continue
        js = w.jets(p, 4)
        a = gamma(js).as_tuple()
        b = gamma_closed_form_3(js[0], js[1]).as_tuple()
        assert close(b, a, 1e-8)
        done += 1


def test_hexagonal_blaschke():
    for p in [(0.1, 0.2), (-1.0, 3.0)]:
        assert blaschke(*jets(["x", "y", "x + y"], p)).coeff == pytest.approx(0.0, abs=1e-14)


def test_blaschke_spot_value():
    assert blaschke(*jets(BL3, ORIGIN)).coeff == pytest.approx(-2.0, rel=1e-12)


@pytest.mark.parametrize("lams", [(1, 2, 3), (1, 3, 5), (2, 4, 5)])
def test_decomposable_3web_is_hexagonal(lams):
    texts = [f"-exp(-x)/{k} + exp(y)" for k in lams]
    for p in [(0.2, 0.3), (0.6, 0.8), (0.9, 0.1)]:
        assert abs(blaschke(*jets(texts, p)).coeff) <= 1e-8


def test_gamma_needs_three():
    with pytest.raises(ValueError):
        gamma(jets(BL3, ORIGIN)[:2])


# -- trace and SC ---------------------------------------------------------------------------

def test_d3_trace_is_blaschke():
    w = web("x", "y + x^2", "x + y + x*y^2")
    p = (0.3, 0.4)
    assert trace_via_proposition(w, p).coeff == blaschke(*w.jets(p, 4)).coeff
    assert sum_subweb_curvatures(w, p).coeff == blaschke(*w.jets(p, 4)).coeff


def test_parallel_d5_vanishes():
    w = web(*[f"y - {k}*x" for k in range(1, 6)])
    assert abs(trace_via_proposition(w, (0.2, 0.5)).coeff) <= 1e-9
    assert abs(sum_subweb_curvatures(w, (0.2, 0.5)).coeff) <= 1e-9


def test_decomposable_d4_sc_vanishes():
    w = web(*[f"-exp(-x)/{k} + exp(y)" for k in range(1, 5)])
    for p in [(0.2, 0.2), (0.5, 0.7), (0.8, 0.4)]:
        assert abs(sum_subweb_curvatures(w, p).coeff) <= 1e-8


def test_subweb_listing_order():
    triples = [t[:3] for t in subweb_curvatures(web(*W5), (0.3, 0.2))]
    assert triples == list(itertools.combinations(range(1, 6), 3))


def test_w4_trace_two_path():
    w = web(*W4)
    from webcurv.connection import curvature
    tk = curvature(w, (0.3, 0.2)).trace_K
    tp = trace_via_proposition(w, (0.3, 0.2)).coeff
    assert relative(tk, tp) <= 1e-8


def test_w4_subwebs_cancel():
    # W4's only curved sub-webs are (1,3,4) and (2,3,4); they cancel
    curv = {t[:3]: t[3] for t in subweb_curvatures(web(*W4), (0.3, 0.2))}
    assert abs(curv[(1, 3, 4)]) > 1
    assert curv[(1, 3, 4)] == pytest.approx(-curv[(2, 3, 4)], rel=1e-12)


def test_trace_formula_report(rng):
    pts = [tuple(p) for p in rng.uniform(0.1, 0.9, (20, 2))]
    for texts in (W4, W5, W6):
        rep = trace_formula_check(web(*texts), pts)
        assert rep.max_residual <= 1e-7
        assert rep.max_two_path <= 1e-8
        assert len(rep.points) == 20


def test_d3_residual_is_fp_noise():
    rep = trace_formula_check(web("x", "y + x^2", "x + y + x*y^2"), [(0.3, 0.4), (0.7, 0.1)])
    assert rep.max_residual <= 1e-14


def test_report_skips_degenerate_points():
    rep = trace_formula_check(web(*W5), [(0.3, 0.3), (0.3, 0.2)])
    assert not rep.points[0].ok and rep.points[0].skip_reason
    assert rep.points[1].ok
    assert len(rep.evaluated) == 1


def test_prefix_failure_is_tagged():
    w = web("x", "y", "x + y", "x^2 + y^2")
    with pytest.raises(Exception) as info:
        trace_via_proposition(w, (0.5, 0.5))
    assert info.value.prefix_length == 4


# -- additivity -----------------------------------------------------------------------------

def test_additivity_affine():
    res = gamma_additivity_check(web("x", "x + y", "2*x - y", "y"), (0.3, 0.1))
    assert res.lhs.as_tuple() == pytest.approx((0, 0, 0), abs=1e-13)
    assert max(res.residual) <= 1e-13


def test_additivity_example():
    res = gamma_additivity_check(web("x", "x + y + x^2*y", "x - y + y^2", "y"), (0.1, 0.2))
    assert max(res.residual) <= 1e-8 * max(1.0, max(map(abs, res.lhs.as_tuple())))


def test_additivity_d3_definitional():
    res = gamma_additivity_check(web(*BL3), (0.2, 0.1))
    assert max(res.residual) <= 1e-15


def test_additivity_needs_normalized():
    with pytest.raises(NotNormalized):
        gamma_additivity_check(web(*W4), (0.3, 0.2))


# -- closed forms ---------------------------------------------------------------------------

def test_X_d3_example():
    X = closed_form_X(web("x", "x + y", "y"), (0.5, 0.5))
    assert list(X.val) == pytest.approx([1.0, -1.0])


def test_X_and_alpha_match_linear_algebra():
    w = web(*W5N)
    for p in [(0.1, 0.2), (0.4, -0.3)]:
        assert close(closed_form_X(w, p).data, lu_path_X(w, p).data, 1e-8)
        assert close(closed_form_alpha(w, p).data, lu_path_alpha(w, p).data, 1e-8)


def test_X_scaling():
    # f_i -> 2 f_i keeps slopes and multiplies f_ix by 2
    p = (0.2, 0.1)
    d = 5
    base = closed_form_X(web(*W5N), p).val
    scaled_texts = [f"2*({t})" for t in W5N[:-1]] + ["y"]
    scaled = closed_form_X(web(*scaled_texts), p).val
    assert np.allclose(scaled, base / 2 ** (d - 2), rtol=1e-12)
    assert np.allclose(lu_path_X(web(*scaled_texts), p).val, scaled, rtol=1e-10)


def test_alpha_d3():
    w = web("x + y^2", "x - 2*y + x*y", "y")
    m1, m2 = slopes(w, (0.3, 0.2))
    assert list(closed_form_alpha(w, (0.3, 0.2)).val) == pytest.approx([m1 * m2, -(m1 + m2), 1])


def test_alpha_zero_slopes():
    a = closed_form_alpha(web("x", "2*x", "x^2 + 1", "y"), (0.5, 0.0))
    assert list(a.val) == [0, 0, 0, 1]


def test_closed_forms_need_normalized():
    with pytest.raises(NotNormalized):
        closed_form_X(web(*W4), (0.3, 0.2))


def test_abc_table_d3_and_recurrence():
    assert abc_table(3) == [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    for d in range(4, 9):
        prev, cur = abc_table(d - 1), abc_table(d)
        for i in range(1, d):
            a, b, c = cur[i - 1]
            pa, pb, pc = prev[i - 1]
            assert (a, b, c) == (pa + d - 1 - i, pb + i - 1, pc)
    for i, (a, b, c) in enumerate(abc_table(6), start=1):
        assert a == abc_table(6)[6 - i][2] and b == abc_table(6)[6 - i][1]


def test_ABC_opposite_slopes():
    w = web("2*x + 2*y", "x - y", "y")
    A, B, C = coefficient_sums_ABC(w, (0.0, 0.0), 1)
    assert float(A) == pytest.approx(-1 / (2 * 2))
    assert float(B) == pytest.approx(0.0)
    assert float(C) == pytest.approx(1 / 2 / 2)


def test_ABC_follows_relabeling():
    p = (0.1, 0.2)
    perm = [2, 0, 3, 1]
    a = web(*W5N)
    b = web(*([W5N[k] for k in perm] + ["y"]))
    for new, old in enumerate(perm, start=1):
        x = [float(v) for v in coefficient_sums_ABC(a, p, old + 1)]
        y = [float(v) for v in coefficient_sums_ABC(b, p, new)]
        assert y == pytest.approx(x, rel=1e-12)


def test_d3_reduction_of_expansion_coeffs():
    w = web("x + y^2", "x - 2*y + x*y", "y")
    p = (0.3, 0.2)
    m1, m2 = slopes(w, p)
    for form in ("reduced", "direct"):
        a, b, c = (float(v) for v in expansion_coeffs_abc(w, p, 1, form))
        assert (a, b, c) == pytest.approx((m1 * m2, -(m1 + m2), 1.0), rel=1e-12)


def _random_admissible(rng, d, n):
    out = []
    while len(out) < n:
        w = random_normalized_web(rng, d)
        p = tuple(rng.uniform(-0.5, 0.5, 2))
        try:
            if not well_separated(slopes(w, p), 0.1):
                continue
        except VanishingFx:
            continue
        out.append((w, p))
    return out


@pytest.mark.parametrize("d", [4, 5, 6])
def test_expansion_identities(rng, d):
    for w, p in _random_admissible(rng, d, 20):
        X = closed_form_X(w, p)
        for s in range(1, d):
            A, B, C = coefficient_sums_ABC(w, p, s)
            red = expansion_coeffs_abc(w, p, s, "reduced")
            direct = expansion_coeffs_abc(w, p, s, "direct")
            for got, other, big in zip(red, direct, (A, B, C)):
                assert close(got.data, other.data, 1e-8)
                assert close(got.data, (-big / X[s - 1]).data, 1e-8)
        g = gamma(w.jets(p, d + 1)).as_tuple()
        assert close(gamma_expansion(w, p).as_tuple(), g, 1e-8)
        assert close(subweb_gamma_expansion(w, p).as_tuple(), g, 1e-8)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=7))
def test_symmetric_poly_deflation(ms):
    sym = symmetric_polys(ms)
    k = len(ms)
    assert len(sym.S) == k + 1 and sym.S[0] == 1
    for s, m in enumerate(ms):
        for j in range(k + 1):
            lhs = sym.S_(j)
            rhs = m * sym.S_minus(s, j - 1) + sym.S_minus(s, j)
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs), *map(abs, sym.S))
        assert sym.S_minus(s, -1) == 0 and sym.S_minus(s, k) == 0


def test_symmetric_polys_example():
    assert symmetric_polys([1, 2]).S == [1, 3, 2]


def test_symmetric_polys_on_jets():
    ms = [JetArray(np.array([1.0, 0.5, 0.0])), JetArray(np.array([2.0, 0.0, 1.0]))]
    sym = symmetric_polys(ms)
    assert sym.S[1].slots() == (3.0, 0.5, 1.0)
    assert sym.S[2].slots() == (2.0, 1.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=2, max_size=5, unique=True), st.floats(3, 5))
def test_partial_fraction_identities(ms, t):
    k = len(ms)
    P = np.poly1d(np.poly(ms))
    prod = math.prod(t - m for m in ms)
    lhs1 = prod * sum(t * m / (t - m) for m in ms)
    rhs1 = t * (t * P.deriv()(t) - k * P(t))
    lhs2 = prod * sum(1 / (t - m) for m in ms)
    rhs2 = P.deriv()(t)
    assert abs(lhs1 - rhs1) <= 1e-10 * max(1.0, abs(rhs1))
    assert abs(lhs2 - rhs2) <= 1e-10 * max(1.0, abs(rhs2))


def test_trace_element_roundtrip():
    te = TraceElement.from_jet(JetArray(np.array([1.0, 2.0, 3.0])))
    assert te.as_tuple() == (1.0, 2.0, 3.0)

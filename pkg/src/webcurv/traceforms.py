"""Trace elements, Blaschke curvatures and the trace formula.

The trace element of an ordered family ``f_1..f_s`` is the last
component of ``-P_s^{-1} G_s^2 (X_1, ..., X_{s-1}, 1)`` where
``(X, 1)`` spans the kernel of ``P_{s-1}``.  The trace of the web
curvature is ``-sum_r df_r ^ d gamma(f_1..f_r)``, and the trace formula
states that it equals the sum of the Blaschke curvatures
``-df_r ^ d gamma(f_i, f_j, f_r)`` over all sub-3-webs.

For webs whose last integral is literally ``y`` the module also provides
the closed forms (Vandermonde kernel, last row of ``P_d^{-1}`` through
elementary symmetric polynomials, the ``G_d^2`` coefficient table and
the expansion coefficients of the trace element) that serve as
independent oracles for the linear-algebra path.
"""

from __future__ import annotations

import functools
import itertools
import math
import statistics
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .connection import WebAtPoint, build_rows
from .errors import NotNormalized, SlopeCollision, VanishingFx, WebCurvError
from .expr import WebDefinition
from .jetlinalg import JetArray, jet_scalar, last_row_of_inverse, lu_solve, nullspace_vector
from .jets import Jet

#: |m_i - m_j| <= SLOPE_EPS (1 + |m_i| + |m_j|) is a collision
SLOPE_EPS = 1e-8
#: |f_x| <= FX_EPS max(1, |grad f|) counts as vanishing
FX_EPS = 1e-12


@dataclass(frozen=True)
class TraceElement:
    value: float
    dx: float
    dy: float

    @classmethod
    def from_jet(cls, j: JetArray):
        return cls(*j.slots())

    def as_tuple(self):
        return (self.value, self.dx, self.dy)


@dataclass(frozen=True)
class TwoForm:
    """Coefficient of ``dx ^ dy``."""

    coeff: float

    def __add__(self, other):
        return TwoForm(self.coeff + other.coeff)


def _grad(f: Jet):
    return f.coeffs[1, 0], f.coeffs[0, 1]


def _jets(web, point, order):
    if isinstance(web, WebDefinition):
        return web.jets(point, web.d + 1 if order is None else order)
    if isinstance(web, WebAtPoint):
        return web.jets
    return list(web)


# -- definitional path -------------------------------------------------------------

def gamma(f_jets: Sequence[Jet]) -> TraceElement:
    """Trace element of ``f_1..f_s`` (order matters), with its first partials."""
    return TraceElement.from_jet(gamma_jet(f_jets))


def gamma_jet(f_jets) -> JetArray:
    s = len(f_jets)
    if s < 3:
        raise ValueError("the trace element needs at least 3 integrals")
    X = nullspace_vector(build_rows(f_jets, s - 1).P)
    rows = build_rows(f_jets, s)
    v = lu_solve(rows.P, rows.G(2) @ X)
    return -v[s - 1]


def _wedge(f: Jet, g: TraceElement):
    # coefficient of dx^dy in df ^ dg
    fx, fy = _grad(f)
    return fx * g.dy - fy * g.dx


def blaschke(f: Jet, g: Jet, h: Jet) -> TwoForm:
    """Blaschke curvature ``-dh ^ d gamma(f, g, h)`` of a 3-web."""
    return TwoForm(-_wedge(h, gamma([f, g, h])))


def trace_via_proposition(web, point=None, order=None) -> TwoForm:
    """``-sum_{r=3}^d df_r ^ d gamma(f_1..f_r)``."""
    jets = _jets(web, point, order)
    total = 0.0
    for r in range(3, len(jets) + 1):
        try:
            g = gamma(jets[:r])
        except WebCurvError as exc:
            exc.prefix_length = r
            raise
        total -= _wedge(jets[r - 1], g)
    return TwoForm(total)


def subweb_curvatures(web, point=None, order=None):
    """``[(i, j, k, coeff), ...]`` (1-based) for every triple ``i < j < k``."""
    jets = _jets(web, point, order)
    out = []
    for i, j, k in itertools.combinations(range(len(jets)), 3):
        try:
            coeff = blaschke(jets[i], jets[j], jets[k]).coeff
        except WebCurvError as exc:
            exc.triple = (i + 1, j + 1, k + 1)
            raise
        out.append((i + 1, j + 1, k + 1, coeff))
    return out


def sum_subweb_curvatures(web, point=None, order=None) -> TwoForm:
    return TwoForm(math.fsum(c for *_, c in subweb_curvatures(web, point, order)))


# -- trace formula report -----------------------------------------------------------

@dataclass
class PointCheck:
    x: float
    y: float
    ok: bool
    skip_reason: Optional[str] = None
    trace_K: Optional[float] = None
    trace_prop: Optional[float] = None
    SC: Optional[float] = None
    residual: Optional[float] = None
    two_path: Optional[float] = None
    warnings: list = field(default_factory=list)


@dataclass
class TraceCheckReport:
    points: list

    @property
    def evaluated(self):
        return [p for p in self.points if p.ok]

    @property
    def max_residual(self):
        return max((p.residual for p in self.evaluated), default=0.0)

    @property
    def median_residual(self):
        res = [p.residual for p in self.evaluated]
        return statistics.median(res) if res else 0.0

    @property
    def max_two_path(self):
        return max((p.two_path for p in self.evaluated), default=0.0)


def relative(a, b):
    return abs(a - b) / max(1.0, abs(a))


def check_point(web: WebDefinition, point, order=None) -> PointCheck:
    x, y = float(point[0]), float(point[1])
    try:
        wp = WebAtPoint.from_web(web, (x, y), order)
        conn = wp.curvature()
        tr_prop = trace_via_proposition(wp).coeff
        sc = sum_subweb_curvatures(wp).coeff
    except WebCurvError as exc:
        return PointCheck(x, y, False, skip_reason=f"{type(exc).__name__}: {exc}")
    return PointCheck(x, y, True, trace_K=conn.trace_K, trace_prop=tr_prop, SC=sc,
                      residual=relative(conn.trace_K, sc),
                      two_path=relative(conn.trace_K, tr_prop),
                      warnings=list(conn.warnings))


def trace_formula_check(web: WebDefinition, points, order=None) -> TraceCheckReport:
    """Tr (both paths) against SC at every point; inadmissible points are skipped."""
    return TraceCheckReport([check_point(web, p, order) for p in points])


@dataclass(frozen=True)
class AdditivityResidual:
    lhs: TraceElement
    rhs: TraceElement

    @property
    def residual(self):
        return tuple(abs(a - b) for a, b in zip(self.lhs.as_tuple(), self.rhs.as_tuple()))


def gamma_additivity_check(web: WebDefinition, point, order=None) -> AdditivityResidual:
    """``gamma(f_1..f_d)`` against ``sum_{i<j<d} gamma(f_i, f_j, y)``."""
    _require_normalized(web)
    jets = _jets(web, point, order)
    lhs = gamma(jets)
    parts = [gamma([jets[i], jets[j], jets[-1]])
             for i, j in itertools.combinations(range(len(jets) - 1), 2)]
    rhs = TraceElement(*(math.fsum(p.as_tuple()[k] for p in parts) for k in range(3)))
    return AdditivityResidual(lhs, rhs)


# -- closed forms (last integral = y) ----------------------------------------------

def _require_normalized(web):
    if not isinstance(web, WebDefinition) or not web.is_normalized():
        raise NotNormalized("the last integral must be literally the expression y")


@dataclass
class _Partials:
    """First-order jets of the first and second partials of one integral."""

    fx: JetArray
    fy: JetArray
    fxx: JetArray
    fxy: JetArray
    fyy: JetArray

    @property
    def m(self):
        return self.fy / self.fx


def _partials(f: Jet) -> _Partials:
    c = f.coeffs
    return _Partials(
        fx=jet_scalar(c[1, 0], 2 * c[2, 0], c[1, 1]),
        fy=jet_scalar(c[0, 1], c[1, 1], 2 * c[0, 2]),
        fxx=jet_scalar(2 * c[2, 0], 6 * c[3, 0], 2 * c[2, 1]),
        fxy=jet_scalar(c[1, 1], 2 * c[2, 1], 2 * c[1, 2]),
        fyy=jet_scalar(2 * c[0, 2], 2 * c[1, 2], 6 * c[0, 3]),
    )


def _check_admissible(parts):
    for i, p in enumerate(parts, start=1):
        fx, fy = float(p.fx), float(p.fy)
        if abs(fx) <= FX_EPS * max(1.0, math.hypot(fx, fy)):
            raise VanishingFx(i, fx)
    slopes = [float(p.m) for p in parts]
    for (i, mi), (j, mj) in itertools.combinations(enumerate(slopes, start=1), 2):
        if abs(mi - mj) <= SLOPE_EPS * (1 + abs(mi) + abs(mj)):
            raise SlopeCollision(i, j, mi, mj)


def normalized_partials(web: WebDefinition, point, check_slopes=True):
    """Partials of ``f_1..f_{d-1}`` for a web with ``f_d = y``."""
    _require_normalized(web)
    parts = _cached_parts(web, (float(point[0]), float(point[1])))
    if check_slopes:
        _check_admissible(parts)
    else:
        for i, p in enumerate(parts, start=1):
            if abs(float(p.fx)) <= FX_EPS:
                raise VanishingFx(i, float(p.fx))
    return parts


@functools.lru_cache(maxsize=128)
def _cached_parts(web, point):
    # closed forms query the same (web, point) once per index s
    return tuple(_partials(f) for f in web.jets(point, 3)[:-1])


def gamma_closed_form_3(f: Jet, g: Jet) -> TraceElement:
    """Trace element ``gamma(f, g, y)`` from the explicit 3-web formula."""
    pf, pg = _partials(f), _partials(g)
    _check_admissible([pf, pg])
    mf, mg = pf.m, pg.m
    inner = (mf * mg * (pf.fxx / pf.fx - pg.fxx / pg.fx)
             - (mf + mg) * (pf.fxy / pf.fx - pg.fxy / pg.fx)
             + (pf.fyy / pf.fx - pg.fyy / pg.fx))
    return TraceElement.from_jet(inner / (mf - mg))


@dataclass
class SymmetricPolyBundle:
    """Elementary symmetric polynomials of ``slopes`` and their leave-one-out
    versions; entries may be floats or first-order jets."""

    slopes: list
    S: list
    loo: list  # loo[s][j] = S_j of the slopes without slopes[s]

    def S_(self, j):
        return self.S[j] if 0 <= j < len(self.S) else 0.0

    def S_minus(self, s, j):
        """``S^s_j`` (0-based ``s``), zero outside ``0 <= j <= k - 1``."""
        row = self.loo[s]
        return row[j] if 0 <= j < len(row) else 0.0


def symmetric_polys(slopes) -> SymmetricPolyBundle:
    slopes = list(slopes)
    S = [1.0]
    for m in slopes:
        # multiply the generating polynomial by (1 + m t)
        S = [S[0]] + [S[j] + m * S[j - 1] for j in range(1, len(S))] + [m * S[-1]]
    loo = []
    for m in slopes:
        # synthetic division of prod (t + m_i) by (t + m): S_j = m S^s_{j-1} + S^s_j
        row = [1.0]
        for j in range(1, len(slopes)):
            row.append(S[j] - m * row[j - 1])
        loo.append(row)
    return SymmetricPolyBundle(slopes, S, loo)


def closed_form_X(web: WebDefinition, point) -> JetArray:
    """``X_i = -1 / (f_ix^(d-2) prod_{j != i} (m_i - m_j))`` for ``i < d``."""
    parts = normalized_partials(web, point)
    d = web.d
    ms = [p.m for p in parts]
    out = []
    for i, p in enumerate(parts):
        prod = 1.0
        for j, mj in enumerate(ms):
            if j != i:
                prod = (ms[i] - mj) * prod
        out.append(-1.0 / (p.fx ** (d - 2) * prod))
    return JetArray.stack(out)


def closed_form_alpha(web: WebDefinition, point) -> JetArray:
    """Last row of ``P_d^{-1}``: ``((-1)^(d-1) S_{d-1}, ..., -S_1, 1)``."""
    parts = normalized_partials(web, point, check_slopes=False)
    d = web.d
    sym = symmetric_polys([p.m for p in parts])
    return JetArray.stack([_as_jet((-1) ** (d - j) * sym.S_(d - j)) for j in range(1, d + 1)])


def _as_jet(x):
    return x if isinstance(x, JetArray) else jet_scalar(x)


def abc_table(d: int):
    """Integer coefficients ``(a_i, b_i, c_i)``, ``i = 1..d``, of the ``G_d^2`` entries."""
    if d < 3:
        raise ValueError("d must be at least 3")
    return [((d - 1 - i) * (d - i) // 2, (i - 1) * (d - i), (i - 2) * (i - 1) // 2)
            for i in range(1, d + 1)]


def coefficient_sums_ABC(web: WebDefinition, point, s: int):
    """``(A_s, B_s, C_s)`` for 1-based ``s < d``."""
    parts = normalized_partials(web, point)
    ms = [p.m for p in parts]
    ps = parts[s - 1]
    m = ms[s - 1]
    A = B = C = 0.0
    for j, mj in enumerate(ms):
        if j == s - 1:
            continue
        diff = m - mj
        A = A + m * mj / diff
        B = B + (m + mj) / diff
        C = C + 1.0 / diff
    return A / ps.fx, -B / ps.fx, C / ps.fx


def expansion_coeffs_abc(web: WebDefinition, point, s: int, form="reduced"):
    """``(a^s, b^s, c^s)`` with ``alpha . G^d(f_s) = a^s f_sxx + b^s f_sxy + c^s f_syy``.

    ``form="direct"`` sums ``alpha_i`` against the coefficient table;
    ``form="reduced"`` uses the leave-one-out symmetric polynomials
    regrouped by powers of ``m_s``.
    """
    parts = normalized_partials(web, point)
    d = web.d
    ms = [p.m for p in parts]
    sym = symmetric_polys(ms)
    ps = parts[s - 1]
    m = ms[s - 1]
    scale = ps.fx ** (d - 3)
    a = b = c = 0.0
    if form == "direct":
        for i, (ai, bi, ci) in enumerate(abc_table(d), start=1):
            alpha = (-1) ** (d - i) * sym.S_(d - i)
            if ai:
                a = a + alpha * ai * m ** (i - 1)
            if bi:
                b = b + alpha * bi * m ** (i - 2)
            if ci:
                c = c + alpha * ci * m ** (i - 3)
    elif form == "reduced":
        Sm = lambda j: sym.S_minus(s - 1, j)  # noqa: E731
        # the i = 0 term is nonzero for b and c
        for i in range(0, d + 1):
            a = a + (-1) ** (d - i) * (d - i - 1) * Sm(d - i - 1) * m ** i
            b = b + (-1) ** (d - i) * (d - 2 * i - 2) * Sm(d - i - 2) * m ** i
            c = c + (-1) ** (d - i - 1) * (i + 1) * Sm(d - i - 3) * m ** i
    else:
        raise ValueError(f"unknown form {form!r}")
    return _as_jet(a) * scale, _as_jet(b) * scale, _as_jet(c) * scale


def gamma_expansion(web: WebDefinition, point, form="reduced") -> TraceElement:
    """``-sum_s X_s (a^s f_sxx + b^s f_sxy + c^s f_syy)``."""
    parts = normalized_partials(web, point)
    X = closed_form_X(web, point)
    total = jet_scalar(0.0)
    for s, p in enumerate(parts, start=1):
        a, b, c = expansion_coeffs_abc(web, point, s, form)
        total = total - X[s - 1] * (a * p.fxx + b * p.fxy + c * p.fyy)
    return TraceElement.from_jet(total)


def subweb_gamma_expansion(web: WebDefinition, point) -> TraceElement:
    """``sum_s A_s f_sxx + B_s f_sxy + C_s f_syy``."""
    parts = normalized_partials(web, point)
    total = jet_scalar(0.0)
    for s, p in enumerate(parts, start=1):
        A, B, C = coefficient_sums_ABC(web, point, s)
        total = total + A * p.fxx + B * p.fxy + C * p.fyy
    return TraceElement.from_jet(total)


def slopes(web: WebDefinition, point):
    return [float(p.m) for p in normalized_partials(web, point, check_slopes=False)]


def lu_path_X(web: WebDefinition, point) -> JetArray:
    """Kernel of ``P_{d-1}`` by linear algebra, for comparison with :func:`closed_form_X`."""
    jets = web.jets(point, web.d + 1)
    return nullspace_vector(build_rows(jets, web.d - 1).P)[:web.d - 1]


def lu_path_alpha(web: WebDefinition, point) -> JetArray:
    jets = web.jets(point, web.d + 1)
    return last_row_of_inverse(build_rows(jets, web.d).P)


__all__ = [
    "TraceElement", "TwoForm", "SymmetricPolyBundle", "PointCheck", "TraceCheckReport",
    "AdditivityResidual", "gamma", "gamma_jet", "blaschke", "trace_via_proposition",
    "subweb_curvatures", "sum_subweb_curvatures", "trace_formula_check", "check_point",
    "gamma_additivity_check", "gamma_closed_form_3", "symmetric_polys", "closed_form_X",
    "closed_form_alpha", "abc_table", "coefficient_sums_ABC", "expansion_coeffs_abc",
    "gamma_expansion", "subweb_gamma_expansion", "normalized_partials", "slopes",
    "lu_path_X", "lu_path_alpha", "relative",
]

"""Connection and curvature of a planar d-web given by first integrals.

Differentiating an abelian relation ``sum_i h_i(f_i) = 0`` produces, at
each derivative order ``n``, ``n + 1`` linear equations in the unknowns
``w^s_i = h_i^(s)(f_i)``.  Their coefficients are polynomials in the
partial derivatives of the ``f_i``; this module builds them by the
differentiation recurrence, assembles the block matrices (``P_r``,
``G_r^j``, ``MM``, ``Delta``), restricts the induced connection to the
kernel of ``MM`` and evaluates its curvature.

All matrix entries are first-order jets, so the connection matrices come
with their own x- and y-derivatives and no finite differences are used.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InsufficientJetOrder, SingularLeadingBlock, SingularMatrix, UnsupportedWebSize
from .expr import WebDefinition
from .jetlinalg import JetArray, lu_solve
from .jets import Jet, jet_partial, jet_truncate

MIN_D, MAX_D = 3, 8

#: largest tolerated relative size of a curvature row other than the last
REMARK_TOL = 1e-7


# -- equation rows ---------------------------------------------------------------

_STAGE_CACHE: "weakref.WeakKeyDictionary[Jet, list]" = weakref.WeakKeyDictionary()


def function_rows(f: Jet, n_max: int):
    """Coefficient rows contributed by one integral.

    ``function_rows(f, n)[n - 1][k][s - 1]`` is the jet multiplying
    ``w^s`` in the derivative ``d^n / dx^(n-k) dy^k`` of ``h(f)``.  Stage
    ``n`` coefficients have jet order ``f.order - n``.
    """
    if n_max > f.order:
        raise InsufficientJetOrder(
            f"derivative order {n_max} needs jets of order >= {n_max}, got {f.order}")
    stages = _STAGE_CACHE.get(f)
    if stages is None:
        stages = [[[jet_partial(f, "x")], [jet_partial(f, "y")]]]
        _STAGE_CACHE[f] = stages
    while len(stages) < n_max:
        n = len(stages) + 1
        order = f.order - n
        fx = jet_truncate(stages[0][0][0], order)
        fy = jet_truncate(stages[0][1][0], order)
        prev = stages[-1]
        rows = [_differentiate(prev[k], "x", fx, order) for k in range(n)]
        rows.append(_differentiate(prev[n - 1], "y", fy, order))
        stages.append(rows)
    return stages[:n_max]


def _differentiate(row, which, f_w, order):
    # d(c w^s) = (dc) w^s + c f_w w^(s+1)
    out = [None] * (len(row) + 1)
    for s, c in enumerate(row):
        dc = jet_partial(c, which)
        out[s] = dc if out[s] is None else out[s] + dc
        out[s + 1] = jet_truncate(c, order) * f_w
    return out


def _first_order(jet):
    c = jet.coeffs
    return c[0, 0], c[1, 0], c[0, 1]


@dataclass
class RowSystem:
    """Equations of derivative order ``r - 1`` for ``d`` integrals.

    ``coeffs[i][k][s - 1]`` is the jet multiplying ``w^s_i`` in row ``k``
    (row ``k`` is the derivative ``d^(r-1) / dx^(r-1-k) dy^k``).
    """

    r: int
    coeffs: list

    @property
    def d(self):
        return len(self.coeffs)

    def jet_block(self, s):
        """Jets multiplying ``w^s``: an ``r x d`` nested list."""
        return [[self.coeffs[i][k][s - 1] for i in range(self.d)] for k in range(self.r)]

    def block(self, s) -> JetArray:
        """First-order jets of the ``w^s`` coefficients, shape ``(r, d)``."""
        if not 1 <= s <= self.r - 1:
            raise ValueError(f"order-{self.r - 1} equations involve w^1..w^{self.r - 1}")
        out = np.empty((3, self.r, self.d))
        for k in range(self.r):
            for i in range(self.d):
                out[:, k, i] = _first_order(self.coeffs[i][k][s - 1])
        return JetArray(out)

    @property
    def P(self) -> JetArray:
        return self.block(self.r - 1)

    def G(self, j) -> JetArray:
        """``G_r^j``: coefficients of ``w^(r-j)``, ``2 <= j <= r - 1``."""
        if not 2 <= j <= self.r - 1:
            raise ValueError(f"G_{self.r}^j exists for 2 <= j <= {self.r - 1}")
        return self.block(self.r - j)


def build_rows(f_jets, r: int) -> RowSystem:
    """Equations of order ``r - 1`` (``P_r`` and the ``G_r^j``)."""
    if r < 2:
        raise ValueError("r must be at least 2")
    for f in f_jets:
        if f.order < r:
            raise InsufficientJetOrder(f"P_{r} needs jets of order >= {r}, got {f.order}")
    coeffs = [function_rows(f, r - 1)[r - 2] for f in f_jets]
    return RowSystem(r, coeffs)


# -- per-point assembly --------------------------------------------------------------

@dataclass
class KernelBasis:
    """Basis ``e^r_i`` (``1 <= r <= d-2``, ``r+2 <= i <= d``) of ker MM.

    ``vectors[:, b]`` is the basis vector labelled ``labels[b] = (r, i)``
    in the flat layout ``(w^1_1..w^1_d; ...; w^(d-2)_1..w^(d-2)_d)``.
    """

    d: int
    labels: list
    vectors: JetArray

    def __len__(self):
        return len(self.labels)

    def vector(self, r, i) -> JetArray:
        return self.vectors[:, self.labels.index((r, i))]


@dataclass
class ConnectionAtPoint:
    point: tuple
    d: int
    labels: list
    omega_x: JetArray
    omega_y: JetArray
    K: np.ndarray
    KK: np.ndarray
    trace_K: float
    warnings: list = field(default_factory=list)

    @property
    def trace_K_full(self):
        """Trace of ``K`` itself (commutator included)."""
        return float(np.trace(self.K))

    @property
    def curvature_matrix(self):
        """``d/dx Omega_y - d/dy Omega_x + [Omega_x, Omega_y]``.

        With basis images stored as columns this is the matrix of
        ``nabla_x nabla_y - nabla_y nabla_x``.  It differs from ``K`` by the
        sign of the derivative part; both vanish on flat webs and
        ``trace(curvature_matrix) = -trace_K``.
        """
        return -self.KK + (self.K - self.KK)

    @property
    def rows_above_last(self):
        """Largest |entry| of :attr:`curvature_matrix` outside its last row,
        relative to ``max(1, max |entry|)``."""
        R = self.curvature_matrix
        if R.shape[0] < 2:
            return 0.0
        return float(np.abs(R[:-1]).max() / max(1.0, np.abs(R).max()))


def flat_index(d, s, i):
    """Position of ``w^s_i`` (1-based ``s``, ``i``) in the flat layout."""
    return (s - 1) * d + (i - 1)


def basis_labels(d):
    return [(r, i) for r in range(1, d - 1) for i in range(r + 2, d + 1)]


class WebAtPoint:
    """Jets of a web's integrals at one point, with the derived matrices."""

    def __init__(self, f_jets, point=None):
        self.jets = list(f_jets)
        self.d = len(self.jets)
        if not MIN_D <= self.d <= MAX_D:
            raise UnsupportedWebSize(f"d = {self.d} outside supported range {MIN_D}..{MAX_D}")
        self.point = tuple(point) if point is not None else self.jets[0].base_point
        order = min(f.order for f in self.jets)
        if order < self.d:
            raise InsufficientJetOrder(
                f"a {self.d}-web needs jets of order >= {self.d}, got {order}")

    @classmethod
    def from_web(cls, web: WebDefinition, point, order=None):
        order = web.d + 1 if order is None else order
        return cls(web.jets(point, order), point)

    def rows(self, r) -> RowSystem:
        return build_rows(self.jets, r)

    @cached_property
    def gradients(self) -> JetArray:
        """``(f_ix, f_iy)`` as first-order jets, shape ``(2, d)``."""
        out = np.empty((3, 2, self.d))
        for i, f in enumerate(self.jets):
            c = f.coeffs
            out[:, 0, i] = (c[1, 0], 2 * c[2, 0], c[1, 1])
            out[:, 1, i] = (c[0, 1], c[1, 1], 2 * c[0, 2])
        return JetArray(out)

    @cached_property
    def MM(self) -> JetArray:
        d = self.d
        blocks = []
        for R in range(2, d):
            rows = self.rows(R)
            blocks.append([rows.block(s) if s <= R - 1 else JetArray.zeros((R, d))
                           for s in range(1, d - 1)])
        return JetArray.block(blocks)

    @cached_property
    def kernel_basis(self) -> KernelBasis:
        d = self.d
        labels = basis_labels(d)
        V = JetArray.zeros(((d - 2) * d, len(labels)))
        for b, (r, i) in enumerate(labels):
            V[flat_index(d, r, i), b] = 1.0
        for s in range(1, d - 1):
            rows = self.rows(s + 1)
            rhs = JetArray.zeros((s + 1, len(labels)))
            for t in range(1, s + 1):
                lvl = slice(flat_index(d, t, 1), flat_index(d, t, 1) + d)
                rhs = rhs - rows.block(t) @ V[lvl, :]
            try:
                sol = lu_solve(rows.block(s)[:, :s + 1], rhs)
            except SingularMatrix as exc:
                raise SingularLeadingBlock(s, str(exc)) from exc
            start = flat_index(d, s, 1)
            V[start:start + s + 1, :] = sol
        return KernelBasis(d, labels, V)

    @cached_property
    def delta(self):
        """``(Delta, Delta_x, Delta_y)``."""
        d = self.d
        n = (d - 2) * d
        rows = self.rows(d)
        G = JetArray.block([[rows.block(t) for t in range(1, d - 1)]])
        A = -lu_solve(rows.P, G)  # [A_{d-1} ... A_2]
        Delta = JetArray.zeros((n, n))
        for lvl in range(d - 3):
            Delta[lvl * d:(lvl + 1) * d, (lvl + 1) * d:(lvl + 2) * d] = JetArray.eye(d)
        Delta[(d - 3) * d:, :] = A
        grads = self.gradients
        Dx = JetArray(np.tile(grads.data[:, 0, :], (1, d - 2)))
        Dy = JetArray(np.tile(grads.data[:, 1, :], (1, d - 2)))
        return Delta, Dx[:, None] * Delta, Dy[:, None] * Delta

    def beta_indices(self):
        return [flat_index(self.d, r, i) for r, i in basis_labels(self.d)]

    @cached_property
    def omegas(self):
        """``(Omega_x, Omega_y)``; column ``(r, i)`` holds the beta-components
        of ``-Delta_x e^r_i`` (resp. y)."""
        V = self.kernel_basis.vectors
        _, Dx, Dy = self.delta
        beta = self.beta_indices()
        return (-(Dx @ V))[beta, :], (-(Dy @ V))[beta, :]

    def curvature(self) -> ConnectionAtPoint:
        ox, oy = self.omegas
        KK = ox.dy - oy.dx
        K = KK + ox.val @ oy.val - oy.val @ ox.val
        conn = ConnectionAtPoint(self.point, self.d, basis_labels(self.d), ox, oy,
                                 K, KK, float(np.trace(KK)))
        excess = conn.rows_above_last
        if excess > REMARK_TOL:
            conn.warnings.append(
                f"curvature rows above the last reach {excess:.3e} relative (> {REMARK_TOL:g})")
        return conn


# -- module-level API --------------------------------------------------------------

def _at(web, point, order):
    if isinstance(web, WebAtPoint):
        return web
    if isinstance(web, WebDefinition):
        return WebAtPoint.from_web(web, point, order)
    return WebAtPoint(web, point)


def build_MM(web, point=None, order=None) -> JetArray:
    return _at(web, point, order).MM


def kernel_basis(web, point=None, order=None) -> KernelBasis:
    return _at(web, point, order).kernel_basis


def build_Delta(web, point=None, order=None):
    return _at(web, point, order).delta


def omega_matrices(web, point=None, order=None):
    return _at(web, point, order).omegas


def curvature(web, point=None, order=None) -> ConnectionAtPoint:
    return _at(web, point, order).curvature()

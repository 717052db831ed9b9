"""Dense linear algebra over first-order jets.

Every entry is a triple ``(value, d/dx, d/dy)``; arithmetic drops
second-order terms, so solving a system with jet entries yields the
solution together with its exact first partial derivatives.

Storage is a numpy array whose leading axis of length 3 holds the
value, x-derivative and y-derivative slots.
"""

from __future__ import annotations

import numpy as np

from .errors import BadNormalization, RankDeficient, SingularMatrix

#: minimum |pivot| after each row is scaled by its largest |value|
EPS_PIVOT = 1e-10


def _mul(a, b):
    # slot-wise, so trailing dimensions broadcast like plain numpy arrays
    v = a[0] * b[0]
    out = np.empty((3,) + v.shape)
    out[0] = v
    out[1] = a[0] * b[1] + a[1] * b[0]
    out[2] = a[0] * b[2] + a[2] * b[0]
    return out


def _div(a, b):
    q = a[0] / b[0]
    out = np.empty((3,) + q.shape)
    out[0] = q
    out[1] = (a[1] - q * b[1]) / b[0]
    out[2] = (a[2] - q * b[2]) / b[0]
    return out


class JetArray:
    """An array of first-order jets (scalars, vectors or matrices)."""

    __slots__ = ("data",)
    __array_priority__ = 100

    def __init__(self, data):
        data = np.asarray(data, dtype=float)
        if data.shape[:1] != (3,):
            raise ValueError("leading axis must hold the (value, dx, dy) slots")
        self.data = data

    @classmethod
    def from_parts(cls, val, dx=None, dy=None):
        val = np.asarray(val, dtype=float)
        dx = np.zeros_like(val) if dx is None else np.broadcast_to(dx, val.shape)
        dy = np.zeros_like(val) if dy is None else np.broadcast_to(dy, val.shape)
        return cls(np.stack([val, dx, dy]))

    @classmethod
    def constant(cls, val):
        return cls.from_parts(val)

    @classmethod
    def zeros(cls, shape):
        if isinstance(shape, int):
            shape = (shape,)
        return cls(np.zeros((3,) + tuple(shape)))

    @classmethod
    def eye(cls, n):
        return cls.from_parts(np.eye(n))

    @classmethod
    def stack(cls, items, axis=0):
        if axis < 0:
            axis -= 1
        else:
            axis += 1
        return cls(np.stack([it.data for it in items], axis=axis))

    @classmethod
    def block(cls, rows):
        """Assemble a matrix from a nested list of matrix blocks."""
        return cls(np.concatenate(
            [np.concatenate([b.data for b in row], axis=2) for row in rows], axis=1))

    # -- views -------------------------------------------------------------

    @property
    def val(self):
        return self.data[0]

    @property
    def dx(self):
        return self.data[1]

    @property
    def dy(self):
        return self.data[2]

    @property
    def shape(self):
        return self.data.shape[1:]

    @property
    def ndim(self):
        return self.data.ndim - 1

    @property
    def T(self):
        axes = (0,) + tuple(range(self.ndim, 0, -1))
        return JetArray(self.data.transpose(axes))

    def __len__(self):
        return self.shape[0]

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return JetArray(self.data[(slice(None),) + idx])

    def __setitem__(self, idx, value):
        if not isinstance(idx, tuple):
            idx = (idx,)
        if isinstance(value, JetArray):
            value = value.data
        else:
            value = _lift(value, self.data[(slice(None),) + idx].shape[1:])
        self.data[(slice(None),) + idx] = value

    def copy(self):
        return JetArray(self.data.copy())

    def __repr__(self):
        return f"JetArray(shape={self.shape}, val={self.val!r})"

    # -- arithmetic --------------------------------------------------------

    def _other(self, other):
        if isinstance(other, JetArray):
            return other.data
        other = np.asarray(other, dtype=float)
        return _lift(other, other.shape)

    def __add__(self, other):
        return JetArray(self.data + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return JetArray(self.data - self._other(other))

    def __rsub__(self, other):
        return JetArray(self._other(other) - self.data)

    def __neg__(self):
        return JetArray(-self.data)

    def __mul__(self, other):
        return JetArray(_mul(self.data, self._other(other)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return JetArray(_div(self.data, self._other(other)))

    def __rtruediv__(self, other):
        return JetArray(_div(self._other(other), self.data))

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("only integer powers of jets are supported")
        v = self.data[0]
        if n == 0:
            return JetArray.from_parts(np.ones_like(v))
        dv = n * v ** (n - 1)
        return JetArray(np.stack([v ** n, dv * self.data[1], dv * self.data[2]]))

    def __matmul__(self, other):
        o = self._other(other)
        a, b = self.data, o
        val = a[0] @ b[0]
        return JetArray(np.stack([val, a[0] @ b[1] + a[1] @ b[0], a[0] @ b[2] + a[2] @ b[0]]))

    def __rmatmul__(self, other):
        return JetArray(self._other(other)) @ self

    def sum(self, axis=None):
        if axis is None:
            return JetArray(self.data.reshape(3, -1).sum(axis=1))
        return JetArray(self.data.sum(axis=axis + 1 if axis >= 0 else axis))

    def trace(self):
        return JetArray(np.trace(self.data, axis1=1, axis2=2))

    def slots(self):
        """``(value, dx, dy)`` as floats for a scalar jet."""
        if self.shape != ():
            raise ValueError("slots() needs a scalar jet")
        return float(self.data[0]), float(self.data[1]), float(self.data[2])

    def __float__(self):
        return float(self.val)


def _lift(x, shape):
    out = np.zeros((3,) + tuple(shape))
    out[0] = x
    return out


def jet_scalar(value, dx=0.0, dy=0.0):
    return JetArray(np.array([value, dx, dy], dtype=float))


def as_jet_array(x):
    return x if isinstance(x, JetArray) else JetArray.constant(x)


# -- solvers ---------------------------------------------------------------------

def lu_solve(M, b, eps_pivot=EPS_PIVOT):
    """Solve ``M z = b`` over first-order jets by Gaussian elimination.

    Rows are scaled by their largest ``|value|``; pivots are chosen on
    ``|value|`` (partial pivoting).  ``b`` may be a vector or a matrix of
    right-hand sides.
    """
    M = as_jet_array(M)
    b = as_jet_array(b)
    n = M.shape[0]
    if M.ndim != 2 or M.shape != (n, n):
        raise ValueError(f"lu_solve needs a square matrix, got shape {M.shape}")
    if b.shape[0] != n:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, matrix has {n}")
    vector = b.ndim == 1
    A = M.data.copy()
    B = (b.data[:, :, None] if vector else b.data).copy()

    scale = np.abs(A[0]).max(axis=1)
    bad = np.flatnonzero(scale == 0.0)
    if bad.size:
        raise SingularMatrix(0, 0.0)
    A /= scale[None, :, None]
    B /= scale[None, :, None]

    for k in range(n):
        p = k + int(np.argmax(np.abs(A[0, k:, k])))
        best = abs(A[0, p, k])
        if best <= eps_pivot:
            raise SingularMatrix(k, best)
        if p != k:
            A[:, [k, p]] = A[:, [p, k]]
            B[:, [k, p]] = B[:, [p, k]]
        if k + 1 == n:
            break
        piv = A[:, k, k]
        l = _div(A[:, k + 1:, k], piv[:, None])
        A[:, k + 1:, k:] -= _mul(l[:, :, None], A[:, None, k, k:])
        B[:, k + 1:, :] -= _mul(l[:, :, None], B[:, None, k, :])

    X = np.zeros_like(B)
    for k in range(n - 1, -1, -1):
        rhs = B[:, k, :]
        if k + 1 < n:
            rhs = rhs - _mul(A[:, k, k + 1:, None], X[:, k + 1:, :]).sum(axis=1)
        X[:, k, :] = _div(rhs, A[:, k, k][:, None])
    return JetArray(X[:, :, 0] if vector else X)


def last_row_of_inverse(M, eps_pivot=EPS_PIVOT):
    """Row vector ``rho`` with ``rho @ M = (0, ..., 0, 1)``."""
    M = as_jet_array(M)
    n = M.shape[0]
    e = np.zeros(n)
    e[-1] = 1.0
    return lu_solve(M.T, JetArray.constant(e), eps_pivot)


def nullspace_vector(M, eps_pivot=EPS_PIVOT):
    """Kernel vector of a full-row-rank ``(n-1) x n`` matrix, last component 1."""
    M = as_jet_array(M)
    rows, cols = M.shape
    if rows != cols - 1:
        raise ValueError(f"nullspace_vector needs rows == cols - 1, got {M.shape}")
    try:
        z = lu_solve(M[:, :cols - 1], -M[:, cols - 1], eps_pivot)
    except SingularMatrix as exc:
        scaled = M.val / np.maximum(np.abs(M.val).max(axis=1, keepdims=True), 1e-300)
        if np.linalg.matrix_rank(scaled, tol=eps_pivot) < rows:
            raise RankDeficient(f"matrix of shape {M.shape} has row rank < {rows}") from exc
        raise BadNormalization(
            f"kernel vector has (near) zero last component; {exc}") from exc
    out = JetArray.zeros(cols)
    out[:cols - 1] = z
    out[cols - 1] = 1.0
    return out

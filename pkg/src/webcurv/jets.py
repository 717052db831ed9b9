"""Truncated bivariate Taylor jets.

A :class:`Jet` of order ``K`` at a point ``P = (x0, y0)`` stores the
normalized Taylor coefficients::

    c[a, b] = (d^{a+b} f / dx^a dy^b)(P) / (a! b!),    a + b <= K

so that products are plain truncated Cauchy products.  Elementary
functions are applied by composing a univariate Taylor series with the
nilpotent part of a jet (Horner scheme).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import JetMismatch, NearZeroDivisor, ZeroOrderJet

#: constant terms at or below this magnitude are not inverted
EPS_INV = 1e-12


@lru_cache(maxsize=None)
def _triangle_mask(order):
    idx = np.arange(order + 1)
    mask = (idx[:, None] + idx[None, :]) <= order
    mask.flags.writeable = False
    return mask


def _wrap(coeffs, base_point, order):
    # trusted constructor: coeffs is already a fresh, truncated float table
    j = object.__new__(Jet)
    j.coeffs = coeffs
    j.base_point = base_point
    j.order = order
    return j


class Jet:
    """Order-``K`` Taylor jet of a scalar function of ``(x, y)``."""

    __slots__ = ("order", "coeffs", "base_point", "__weakref__")

    def __init__(self, coeffs, base_point=(0.0, 0.0), order=None):
        c = np.array(coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("jet coefficients must be a square (K+1)x(K+1) table")
        if order is None:
            order = c.shape[0] - 1
        if order != c.shape[0] - 1:
            raise ValueError("order does not match coefficient table")
        c[~_triangle_mask(order)] = 0.0
        self.order = order
        self.coeffs = c
        self.base_point = (float(base_point[0]), float(base_point[1]))

    # -- construction -----------------------------------------------------

    @classmethod
    def constant(cls, value, base_point=(0.0, 0.0), order=0):
        c = np.zeros((order + 1, order + 1))
        c[0, 0] = value
        return cls(c, base_point, order)

    @classmethod
    def from_triangle(cls, values, base_point=(0.0, 0.0), order=None):
        """Inverse of :meth:`triangle`."""
        values = list(values)
        if order is None:
            # n = (K+1)(K+2)/2
            order = int(round((math.sqrt(8 * len(values) + 1) - 3) / 2))
        if len(values) != (order + 1) * (order + 2) // 2:
            raise ValueError("wrong number of triangular coefficients")
        c = np.zeros((order + 1, order + 1))
        it = iter(values)
        for n in range(order + 1):
            for b in range(n + 1):
                c[n - b, b] = next(it)
        return cls(c, base_point, order)

    def triangle(self):
        """Coefficients as a flat list ordered by total degree, then by y-power."""
        return [self.coeffs[n - b, b]
                for n in range(self.order + 1) for b in range(n + 1)]

    def like(self, coeffs, order=None):
        return Jet(coeffs, self.base_point, self.order if order is None else order)

    def _like(self, coeffs):
        return _wrap(coeffs, self.base_point, self.order)

    # -- access -----------------------------------------------------------

    @property
    def value(self):
        return self.coeffs[0, 0]

    def extract(self, a, b):
        """The raw partial derivative d^{a+b}/dx^a dy^b at the base point."""
        if a + b > self.order:
            raise ValueError(f"derivative order {a + b} exceeds jet order {self.order}")
        return self.coeffs[a, b] * math.factorial(a) * math.factorial(b)

    def __repr__(self):
        return f"Jet(order={self.order}, base_point={self.base_point}, value={self.value!r})"

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.order != self.order:
                raise JetMismatch(f"jet orders differ: {self.order} vs {other.order}")
            if other.base_point != self.base_point:
                raise JetMismatch(
                    f"base points differ: {self.base_point} vs {other.base_point}")
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            c = np.zeros_like(self.coeffs)
            c[0, 0] = float(other)
            return self._like(c)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._like(self.coeffs + other.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._like(self.coeffs - other.coeffs)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __neg__(self):
        return self._like(-self.coeffs)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self._like(self.coeffs * float(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._like(_cauchy(self.coeffs, other.coeffs, self.order))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            if abs(other) <= EPS_INV:
                raise NearZeroDivisor(float(other))
            return self.like(self.coeffs / float(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return jet_div(self, other)

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return jet_div(other, self)

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("jets only support integer powers")
        return jet_pow(self, int(n))


@lru_cache(maxsize=None)
def _cauchy_plan(order):
    # flat index pairs (p, q) -> p + q for every product term of total order <= K
    n = order + 1
    src_a, src_b, dst = [], [], []
    for a1 in range(n):
        for b1 in range(n - a1):
            for a2 in range(n - a1 - b1):
                for b2 in range(n - a1 - b1 - a2):
                    src_a.append(a1 * n + b1)
                    src_b.append(a2 * n + b2)
                    dst.append((a1 + a2) * n + b1 + b2)
    return np.array(src_a), np.array(src_b), np.array(dst)


def _cauchy(a, b, order):
    src_a, src_b, dst = _cauchy_plan(order)
    n = order + 1
    terms = a.ravel()[src_a] * b.ravel()[src_b]
    return np.bincount(dst, weights=terms, minlength=n * n).reshape(n, n)


# -- coordinate functions -----------------------------------------------------

def jet_var(point, which, order):
    """Jet of the coordinate function ``x`` or ``y`` at ``point``."""
    if order < 0:
        raise ValueError("jet order must be non-negative")
    c = np.zeros((order + 1, order + 1))
    if which == "x":
        c[0, 0] = point[0]
        if order >= 1:
            c[1, 0] = 1.0
    elif which == "y":
        c[0, 0] = point[1]
        if order >= 1:
            c[0, 1] = 1.0
    else:
        raise ValueError(f"unknown variable {which!r}")
    return Jet(c, point, order)


def jet_add(a, b):
    return a + a._coerce(b)


def jet_sub(a, b):
    return a - a._coerce(b)


def jet_mul(a, b):
    return a * a._coerce(b)


def jet_div(a, b):
    """``a / b``; raises :class:`NearZeroDivisor` if ``b`` is not invertible."""
    b = a._coerce(b)
    b0 = b.value
    if abs(b0) <= EPS_INV:
        raise NearZeroDivisor(b0)
    return a * jet_compose(reciprocal_series(b0, a.order), b)


def jet_pow(a, n):
    if n == 0:
        return Jet.constant(1.0, a.base_point, a.order)
    if n < 0:
        return jet_div(Jet.constant(1.0, a.base_point, a.order), jet_pow(a, -n))
    result = None
    base = a
    while n:
        if n & 1:
            result = base if result is None else result * base
        n >>= 1
        if n:
            base = base * base
    return result


def jet_partial(a, which):
    """Partial derivative, returned as a jet of order ``a.order - 1``."""
    if a.order == 0:
        raise ZeroOrderJet("cannot differentiate an order-0 jet")
    k = a.order
    c = a.coeffs
    if which == "x":
        out = c[1:, :k] * np.arange(1, k + 1)[:, None]
    elif which == "y":
        out = c[:k, 1:] * np.arange(1, k + 1)[None, :]
    else:
        raise ValueError(f"unknown variable {which!r}")
    return _wrap(np.ascontiguousarray(out), a.base_point, k - 1)


def jet_truncate(a, new_order):
    if new_order > a.order:
        raise ValueError(f"cannot truncate order {a.order} jet to order {new_order}")
    if new_order < 0:
        raise ValueError("jet order must be non-negative")
    return _wrap(a.coeffs[:new_order + 1, :new_order + 1].copy(), a.base_point, new_order)


# -- univariate series and composition ---------------------------------------

@dataclass(frozen=True)
class UnivariateSeries:
    """Taylor coefficients ``g_0..g_K`` of ``g(center + t)`` in ``t``."""

    center: float
    coeffs: tuple

    @property
    def order(self):
        return len(self.coeffs) - 1


def _series(center, coeffs):
    return UnivariateSeries(float(center), tuple(float(c) for c in coeffs))


def exp_series(c, order):
    e = math.exp(c)
    return _series(c, [e / math.factorial(k) for k in range(order + 1)])


def log_series(c, order):
    if c <= 0.0:
        raise ValueError("log series needs a positive center")
    coeffs = [math.log(c)]
    coeffs += [(-1) ** (k + 1) / (k * c ** k) for k in range(1, order + 1)]
    return _series(c, coeffs)


def sin_series(c, order):
    return _series(c, [math.sin(c + k * math.pi / 2) / math.factorial(k)
                       for k in range(order + 1)])


def cos_series(c, order):
    return _series(c, [math.cos(c + k * math.pi / 2) / math.factorial(k)
                       for k in range(order + 1)])


def _binomial_series(c, p, order):
    # (c + t)^p = c^p * sum_k binom(p, k) (t / c)^k
    coeffs = []
    binom = 1.0
    for k in range(order + 1):
        coeffs.append(binom * c ** (p - k))
        binom *= (p - k) / (k + 1)
    return coeffs


def sqrt_series(c, order):
    if c < 0.0 or (c == 0.0 and order > 0):
        raise ValueError("sqrt series needs a positive center")
    if order == 0:
        return _series(c, [math.sqrt(c)])
    return _series(c, _binomial_series(c, 0.5, order))


def power_series(c, n, order):
    """Series of ``t -> t**n`` for integer ``n``; negative ``n`` needs ``c != 0``."""
    if n < 0 and abs(c) <= EPS_INV:
        raise NearZeroDivisor(c)
    if n >= 0:
        coeffs = [math.comb(n, k) * c ** (n - k) if k <= n else 0.0
                  for k in range(order + 1)]
        return _series(c, coeffs)
    return _series(c, _binomial_series(c, n, order))


def reciprocal_series(c, order):
    if abs(c) <= EPS_INV:
        raise NearZeroDivisor(c)
    return _series(c, [(-1) ** k / c ** (k + 1) for k in range(order + 1)])


def jet_compose(g, a):
    """Truncated jet of ``g(a)``; ``g`` must be centered at ``a``'s value."""
    if not math.isclose(g.center, a.value, rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError(f"series centered at {g.center!r}, jet value is {a.value!r}")
    coeffs = list(g.coeffs) + [0.0] * max(0, a.order - g.order)
    u = a._like(a.coeffs.copy())
    u.coeffs[0, 0] = 0.0
    # powers of u beyond the jet order vanish
    result = Jet.constant(coeffs[a.order], a.base_point, a.order)
    for k in range(a.order - 1, -1, -1):
        result = result * u
        result.coeffs[0, 0] += coeffs[k]
    return result


def jet_exp(a):
    return jet_compose(exp_series(a.value, a.order), a)


def jet_log(a):
    return jet_compose(log_series(a.value, a.order), a)


def jet_sin(a):
    return jet_compose(sin_series(a.value, a.order), a)


def jet_cos(a):
    return jet_compose(cos_series(a.value, a.order), a)


def jet_sqrt(a):
    return jet_compose(sqrt_series(a.value, a.order), a)

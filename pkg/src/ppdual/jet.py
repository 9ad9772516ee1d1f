"""Second-order forward-mode jets.

A :class:`Jet2` carries a value together with its gradient and Hessian with
respect to a fixed list of coordinates, and propagates all three through
arithmetic and the elementary functions used by wave profiles. Leading axes
are batch axes, so one jet can describe many points at once:

    value  shape (...,)
    grad   shape (..., n)
    hess   shape (..., n, n)   or None for first-order jets

Every operation builds the Hessian from symmetric pieces (``outer(a, b) +
outer(b, a)``, scalar multiples of symmetric matrices), so ``hess[i, j]`` and
``hess[j, i]`` are produced by identical floating point operations and agree
bit for bit.
"""

from __future__ import annotations

import numpy as np


_SEEDS: dict = {}


def _seed(dim: int, index, batch: tuple, order: int):
    # gradient and Hessian of a coordinate (or of a constant when index is None),
    # cached read-only since integrators request the same shapes over and over
    key = (dim, index, batch, order)
    hit = _SEEDS.get(key)
    if hit is None:
        if len(_SEEDS) > 512:
            _SEEDS.clear()
        grad = np.zeros(batch + (dim,))
        if index is not None:
            grad[..., index] = 1.0
        grad.flags.writeable = False
        hess = None
        if order == 2:
            hess = np.zeros(batch + (dim, dim))
            hess.flags.writeable = False
        hit = _SEEDS[key] = (grad, hess)
    return hit


def _ipow(a, k: int):
    out, base = None, a
    while k:
        if k & 1:
            out = base if out is None else out * base
        k >>= 1
        if k:
            base = base * base
    return np.ones_like(a) if out is None else out


class DomainError(ValueError):
    """Raised when a jet operation leaves the domain of its function."""


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _sym_outer(a, b):
    return _outer(a, b) + _outer(b, a)


class Jet2:
    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess=None):
        self.value = np.asarray(value, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = None if hess is None else np.asarray(hess, dtype=float)

    @classmethod
    def _raw(cls, value, grad, hess=None) -> "Jet2":
        # internal constructor for arrays that are already float ndarrays
        jet = object.__new__(cls)
        jet.value, jet.grad, jet.hess = value, grad, hess
        return jet

    @property
    def order(self) -> int:
        return 1 if self.hess is None else 2

    @property
    def dim(self) -> int:
        return self.grad.shape[-1]

    @classmethod
    def constant(cls, c, dim: int, batch=(), order: int = 2) -> "Jet2":
        batch = tuple(batch)
        value = np.full(batch, float(c))
        grad, hess = _seed(dim, None, batch, order)
        return cls._raw(value, grad, hess)

    @classmethod
    def variable(cls, x, index: int, order: int = 2) -> "Jet2":
        """Jet of the coordinate function ``x[..., index]``."""
        x = np.asarray(x, dtype=float)
        dim = x.shape[-1]
        batch = x.shape[:-1]
        grad, hess = _seed(dim, index, batch, order)
        return cls._raw(x[..., index].copy(), grad, hess)

    def _chain(self, f, f1, f2) -> "Jet2":
        # composition with a scalar function: f(a), f'(a), f''(a)
        grad = f1[..., None] * self.grad
        if self.hess is None:
            return Jet2._raw(f, grad)
        hess = f1[..., None, None] * self.hess + f2[..., None, None] * _outer(self.grad, self.grad)
        return Jet2._raw(f, grad, hess)

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Jet2):
            return Jet2._raw(self.value + float(other), self.grad, self.hess)
        hess = None if self.hess is None or other.hess is None else self.hess + other.hess
        return Jet2._raw(self.value + other.value, self.grad + other.grad, hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet2._raw(-self.value, -self.grad, None if self.hess is None else -self.hess)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            c = float(other)
            return Jet2._raw(c * self.value, c * self.grad, None if self.hess is None else c * self.hess)
        a, b = self, other
        value = a.value * b.value
        grad = a.value[..., None] * b.grad + b.value[..., None] * a.grad
        if a.hess is None or b.hess is None:
            return Jet2._raw(value, grad)
        hess = (
            a.value[..., None, None] * b.hess
            + b.value[..., None, None] * a.hess
            + _sym_outer(a.grad, b.grad)
        )
        return Jet2._raw(value, grad, hess)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet2":
        if np.any(self.value == 0.0):
            raise DomainError("division by zero")
        r = 1.0 / self.value
        return self._chain(r, -r * r, 2.0 * r * r * r)

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            return self * (1.0 / float(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k: int):
        if int(k) != k:
            raise TypeError("jets support integer exponents only")
        k = int(k)
        if k == 0:
            return Jet2.constant(1.0, self.dim, self.value.shape, self.order)
        if k == 1:
            return self
        if k < 0:
            return (self ** (-k)).reciprocal()
        a = self.value
        if k == 2:
            grad = (2.0 * a)[..., None] * self.grad
            if self.hess is None:
                return Jet2._raw(a * a, grad)
            hess = (2.0 * a)[..., None, None] * self.hess + 2.0 * _outer(self.grad, self.grad)
            return Jet2._raw(a * a, grad, hess)
        # a^(k-2) by repeated squaring keeps small integer powers cheap and exact
        low = _ipow(a, k - 2)
        mid = low * a
        return self._chain(mid * a, k * mid, (k * (k - 1)) * low)

    # elementary functions ----------------------------------------------------

    def sin(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return self._chain(s, c, -s)

    def cos(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return self._chain(c, -s, -c)

    def exp(self):
        e = np.exp(self.value)
        return self._chain(e, e, e)

    def log(self):
        if np.any(self.value <= 0.0):
            raise DomainError("log of a nonpositive number")
        r = 1.0 / self.value
        return self._chain(np.log(self.value), r, -r * r)

    def __repr__(self):
        return f"Jet2(value={self.value!r}, grad={self.grad!r}, hess={self.hess!r})"

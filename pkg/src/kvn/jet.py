"""Truncated multivariate Taylor jets for forward-mode differentiation.

A :class:`Jet3` carries a value together with its gradient, Hessian and
third-derivative tensor with respect to ``dim`` seeded variables.  Values
may be scalars or arrays (a batch of evaluation points); the derivative
tensors then carry the batch shape in front of the variable indices.
"""
from __future__ import annotations

import numpy as np


def _sym3(h, g):
    # h_ij g_k + h_ik g_j + h_jk g_i
    t = np.einsum("...ij,...k->...ijk", h, g)
    return t + np.swapaxes(t, -1, -2) + np.moveaxis(t, -1, -3)


def _outer(a, b):
    return np.einsum("...i,...j->...ij", a, b)


def _outer3(a, b, c):
    return np.einsum("...i,...j,...k->...ijk", a, b, c)


class Jet3:
    """Value plus derivatives up to ``order`` (at most 3).

    Attributes
    ----------
    value : ndarray
        Function value, shape ``S`` (``S`` is the batch shape, possibly ``()``).
    grad : ndarray
        Shape ``S + (dim,)``.
    hess : ndarray or None
        Shape ``S + (dim, dim)`` when ``order >= 2``.
    third : ndarray or None
        Shape ``S + (dim, dim, dim)`` when ``order == 3``.
    """

    __slots__ = ("value", "grad", "hess", "third", "order")
    __array_priority__ = 1000

    def __init__(self, value, grad, hess=None, third=None, order=3):
        if order not in (1, 2, 3):
            raise ValueError("jet order must be 1, 2 or 3")
        self.value = np.asarray(value)
        self.grad = np.asarray(grad)
        self.hess = None if order < 2 else np.asarray(hess)
        self.third = None if order < 3 else np.asarray(third)
        self.order = order

    # -- construction -------------------------------------------------
    @classmethod
    def variable(cls, value, index, dim, order=3):
        """Seed variable number ``index`` out of ``dim`` at ``value``."""
        v = np.asarray(value, dtype=float)
        s = v.shape
        grad = np.zeros(s + (dim,))
        grad[..., index] = 1.0
        hess = np.zeros(s + (dim, dim)) if order >= 2 else None
        third = np.zeros(s + (dim, dim, dim)) if order >= 3 else None
        return cls(v, grad, hess, third, order)

    @classmethod
    def constant(cls, value, dim, order=3):
        v = np.asarray(value)
        s = v.shape
        z = np.zeros(s + (dim,), dtype=v.dtype if np.iscomplexobj(v) else float)
        return cls(
            v,
            z,
            np.zeros(s + (dim, dim), dtype=z.dtype) if order >= 2 else None,
            np.zeros(s + (dim, dim, dim), dtype=z.dtype) if order >= 3 else None,
            order,
        )

    @property
    def dim(self):
        return self.grad.shape[-1]

    def _like(self, other):
        if isinstance(other, Jet3):
            if other.dim != self.dim or other.order != self.order:
                raise ValueError("jets with different dimension or order")
            return other
        return Jet3.constant(np.asarray(other), self.dim, self.order)

    # -- arithmetic ---------------------------------------------------
    def __neg__(self):
        return Jet3(-self.value, -self.grad,
                    None if self.hess is None else -self.hess,
                    None if self.third is None else -self.third, self.order)

    def __add__(self, other):
        if not isinstance(other, Jet3):
            return Jet3(self.value + other, self.grad, self.hess, self.third, self.order)
        o = self._like(other)
        return Jet3(
            self.value + o.value,
            self.grad + o.grad,
            None if self.order < 2 else self.hess + o.hess,
            None if self.order < 3 else self.third + o.third,
            self.order,
        )

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def _scale(self, c):
        c = np.asarray(c)
        c1 = c[..., None]
        return Jet3(
            self.value * c,
            self.grad * c1,
            None if self.order < 2 else self.hess * c1[..., None],
            None if self.order < 3 else self.third * c1[..., None, None],
            self.order,
        )

    def __mul__(self, other):
        if not isinstance(other, Jet3):
            return self._scale(other)
        a, b = self, self._like(other)
        val = a.value * b.value
        av, bv = a.value[..., None], b.value[..., None]
        grad = a.grad * bv + av * b.grad
        hess = third = None
        if self.order >= 2:
            av2, bv2 = av[..., None], bv[..., None]
            hess = a.hess * bv2 + _outer(a.grad, b.grad) + _outer(b.grad, a.grad) + av2 * b.hess
        if self.order >= 3:
            av3, bv3 = av2[..., None], bv2[..., None]
            third = (a.third * bv3 + _sym3(a.hess, b.grad)
                     + _sym3(b.hess, a.grad) + av3 * b.third)
        return Jet3(val, grad, hess, third, self.order)

    __rmul__ = __mul__

    def compose(self, f0, f1, f2=None, f3=None):
        """Chain rule for ``f(self)`` given ``f`` and its first three derivatives
        evaluated at ``self.value``."""
        f1e = np.asarray(f1)[..., None]
        g = self.grad
        grad = f1e * g
        hess = third = None
        if self.order >= 2:
            f2e = np.asarray(f2)[..., None, None]
            hess = f2e * _outer(g, g) + f1e[..., None] * self.hess
        if self.order >= 3:
            f3e = np.asarray(f3)[..., None, None, None]
            third = (f3e * _outer3(g, g, g) + f2e[..., None] * _sym3(self.hess, g)
                     + f1e[..., None, None] * self.third)
        return Jet3(f0, grad, hess, third, self.order)

    def reciprocal(self):
        x = self.value
        return self.compose(1.0 / x, -1.0 / x**2, 2.0 / x**3, -6.0 / x**4)

    def __truediv__(self, other):
        if not isinstance(other, Jet3):
            return self._scale(1.0 / np.asarray(other))
        return self * self._like(other).reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k):
        if isinstance(k, Jet3):
            return exp(k * log(self))
        k = float(k)
        x = self.value
        integral = k.is_integer()
        fs = []
        falling = 1.0
        for j in range(4):
            # integer powers have vanishing high derivatives; avoid 0 * inf at x = 0
            if integral and k - j < 0:
                fs.append(np.zeros_like(x, dtype=float))
            else:
                fs.append(falling * np.power(x, k - j))
            falling *= k - j
        return self.compose(*fs)

    def __rpow__(self, base):
        return exp(self * np.log(base))

    def __repr__(self):
        return f"Jet3(value={self.value!r}, order={self.order})"


def sin(x):
    if isinstance(x, Jet3):
        s, c = np.sin(x.value), np.cos(x.value)
        return x.compose(s, c, -s, -c)
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet3):
        s, c = np.sin(x.value), np.cos(x.value)
        return x.compose(c, -s, -c, s)
    return np.cos(x)


def exp(x):
    if isinstance(x, Jet3):
        e = np.exp(x.value)
        return x.compose(e, e, e, e)
    return np.exp(x)


def log(x):
    if isinstance(x, Jet3):
        v = x.value
        return x.compose(np.log(v), 1.0 / v, -1.0 / v**2, 2.0 / v**3)
    return np.log(x)


def sqrt(x):
    if isinstance(x, Jet3):
        return x ** 0.5
    return np.sqrt(x)

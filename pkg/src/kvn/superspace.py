"""Grassmann algebra, superfields and the superspace lift of observables.

Generators are ordered canonically as ``theta < thetabar < c1..c2n < cbar1..cbar2n``.
Elements are stored sparsely as ``{bitmask: coefficient}`` where bit ``k``
marks generator ``k`` and every monomial is kept in canonical order.

The superfield attached to an extended state is

    Phi^a = phi^a + theta c^a + thetabar omega^{ab} cbar_b + i thetabar theta omega^{ab} lam_b

and for a function ``O`` of phase space

    O(Phi) = O(phi) + theta N - thetabar Nbar + i theta thetabar calO .

The Berezin integral is normalised so that ``berezin(O(Phi)) == calO``:
it returns ``i`` times the coefficient of ``thetabar theta``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .jet import Jet3
from .state import ExtendedState, phi_names, symplectic_matrix

_TOL = 0.0


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _sign(a: int, b: int) -> int:
    """Sign from reordering the product of canonical monomials ``a`` and ``b``."""
    swaps = 0
    bb = b
    while bb:
        low = bb & -bb
        swaps += _popcount(a & ~((low << 1) - 1))
        bb ^= low
    return -1 if swaps & 1 else 1


@dataclass(frozen=True)
class GrassmannAlgebra:
    names: tuple

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate generator names")

    @property
    def size(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"{name!r} is not a generator of this algebra") from None

    def gen(self, name: str) -> "GrassmannElement":
        return GrassmannElement(self, {1 << self.index(name): 1.0})

    def scalar(self, value) -> "GrassmannElement":
        return GrassmannElement(self, {0: value} if value != 0 else {})

    def zero(self) -> "GrassmannElement":
        return GrassmannElement(self, {})

    def one(self) -> "GrassmannElement":
        return self.scalar(1.0)

    def monomial(self, *names: str) -> "GrassmannElement":
        """Product of the named generators in the order given."""
        out = self.one()
        for nm in names:
            out = out * self.gen(nm)
        return out


def ghost_names(n: int) -> tuple:
    return tuple(f"c{a + 1}" for a in range(2 * n)) + tuple(f"cbar{a + 1}" for a in range(2 * n))


def ghost_algebra(n: int) -> GrassmannAlgebra:
    return GrassmannAlgebra(ghost_names(n))


def superspace_algebra(n: int) -> GrassmannAlgebra:
    return GrassmannAlgebra(("theta", "thetabar") + ghost_names(n))


class GrassmannElement:
    __slots__ = ("algebra", "terms")
    __array_priority__ = 1000

    def __init__(self, algebra: GrassmannAlgebra, terms: dict | None = None):
        self.algebra = algebra
        self.terms = {k: v for k, v in (terms or {}).items() if v != 0}

    # -- helpers ------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, GrassmannElement):
            if other.algebra != self.algebra:
                raise ValueError("Grassmann elements from different generator sets")
            return other
        return self.algebra.scalar(other)

    @property
    def body(self):
        return self.terms.get(0, 0.0)

    def grade_part(self, k: int) -> "GrassmannElement":
        return GrassmannElement(self.algebra, {m: v for m, v in self.terms.items() if _popcount(m) == k})

    def is_even(self) -> bool:
        return all(_popcount(m) % 2 == 0 for m in self.terms)

    def is_odd(self) -> bool:
        return all(_popcount(m) % 2 == 1 for m in self.terms)

    def coefficient(self, *names: str):
        """Coefficient of the canonically ordered monomial made of ``names``."""
        mask = 0
        for nm in names:
            mask |= 1 << self.algebra.index(nm)
        return self.terms.get(mask, 0.0)

    def max_abs(self) -> float:
        return max((abs(v) for v in self.terms.values()), default=0.0)

    def allclose(self, other, atol=1e-12, rtol=1e-12) -> bool:
        d = self - other
        scale = max(self.max_abs(), self._coerce(other).max_abs(), 1.0)
        return d.max_abs() <= atol + rtol * scale

    def map_coefficients(self, f: Callable) -> "GrassmannElement":
        return GrassmannElement(self.algebra, {m: f(v) for m, v in self.terms.items()})

    def embed(self, target: GrassmannAlgebra) -> "GrassmannElement":
        """Re-express in a larger algebra (generators matched by name)."""
        src = self.algebra.names
        pos = [target.index(nm) for nm in src]
        if pos != sorted(pos):
            raise ValueError("target algebra orders the shared generators differently")
        out = {}
        for m, v in self.terms.items():
            t = 0
            for i, p in enumerate(pos):
                if m >> i & 1:
                    t |= 1 << p
            out[t] = v
        return GrassmannElement(target, out)

    def restrict(self, target: GrassmannAlgebra) -> "GrassmannElement":
        """Inverse of :meth:`embed`; fails if a term uses a generator not in ``target``."""
        pos = {self.algebra.index(nm): i for i, nm in enumerate(target.names) if nm in self.algebra.names}
        out = {}
        for m, v in self.terms.items():
            t = 0
            mm = m
            while mm:
                low = mm & -mm
                b = low.bit_length() - 1
                if b not in pos:
                    raise ValueError(f"term uses generator {self.algebra.names[b]!r} outside the target")
                t |= 1 << pos[b]
                mm ^= low
            out[t] = v
        return GrassmannElement(target, out)

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other):
        o = self._coerce(other)
        t = dict(self.terms)
        for m, v in o.terms.items():
            t[m] = t.get(m, 0.0) + v
        return GrassmannElement(self.algebra, t)

    __radd__ = __add__

    def __neg__(self):
        return GrassmannElement(self.algebra, {m: -v for m, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, GrassmannElement):
            return GrassmannElement(self.algebra, {m: v * other for m, v in self.terms.items()})
        return gmul(self, other)

    def __rmul__(self, other):
        # scalars commute with everything
        return self.__mul__(other)

    def __truediv__(self, other):
        return self * (1.0 / other)

    def __eq__(self, other):
        try:
            o = self._coerce(other)
        except (ValueError, TypeError):
            return NotImplemented
        return (self - o).terms == {}

    __hash__ = None

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, key=lambda k: (_popcount(k), k)):
            gens = [self.algebra.names[i] for i in range(self.algebra.size) if m >> i & 1]
            parts.append(f"({self.terms[m]:.6g})" + ("*" + "*".join(gens) if gens else ""))
        return " + ".join(parts)


def gmul(a: GrassmannElement, b: GrassmannElement) -> GrassmannElement:
    """Grassmann product with canonical reordering signs."""
    if a.algebra != b.algebra:
        raise ValueError("Grassmann elements from different generator sets")
    out: dict = {}
    for ma, va in a.terms.items():
        for mb, vb in b.terms.items():
            if ma & mb:
                continue
            m = ma | mb
            out[m] = out.get(m, 0.0) + _sign(ma, mb) * va * vb
    return GrassmannElement(a.algebra, out)


# -- Berezin integral and superfield components --------------------------

def _theta_bits(alg: GrassmannAlgebra):
    if alg.names[:2] != ("theta", "thetabar"):
        raise ValueError("algebra must start with the superspace generators theta, thetabar")
    return 1, 2


def _strip(e: GrassmannElement, want: int) -> GrassmannElement:
    """Collect ``X`` in ``e = (theta-monomial want) * X``; result lives in the ghost algebra."""
    t, tb = _theta_bits(e.algebra)
    rest = GrassmannAlgebra(e.algebra.names[2:])
    out = {}
    for m, v in e.terms.items():
        if m & (t | tb) == want:
            out[m >> 2] = v
    return GrassmannElement(rest, out)


def berezin(e: GrassmannElement) -> GrassmannElement:
    """``i`` times the coefficient of ``thetabar theta``, as a ghost-algebra element.

    Normalised so that ``berezin(O(Phi))`` returns the lifted observable.
    """
    # canonical monomial is theta thetabar = -thetabar theta
    return _strip(e, 3) * (-1j)


def theta_component(e: GrassmannElement) -> GrassmannElement:
    """``X`` in ``e = ... + theta X + ...``."""
    return _strip(e, 1)


def thetabar_component(e: GrassmannElement) -> GrassmannElement:
    """``Y`` in ``e = ... + thetabar Y + ...``."""
    return _strip(e, 2)


def body_component(e: GrassmannElement) -> GrassmannElement:
    return _strip(e, 0)


@dataclass
class Superfield:
    """Components of one superfield ``Phi^a``.

    ``theta_coeff`` is ``c^a``, ``thetabar_coeff`` is ``omega^{ab} cbar_b``
    and ``top_coeff`` is the coefficient of ``thetabar theta``, i.e.
    ``i omega^{ab} lam_b``.
    """

    body: float
    theta_coeff: GrassmannElement
    thetabar_coeff: GrassmannElement
    top_coeff: GrassmannElement

    @classmethod
    def from_element(cls, e: GrassmannElement) -> "Superfield":
        b = body_component(e)
        if any(m for m in b.terms):
            raise ValueError("superfield body must be a number")
        return cls(b.body, theta_component(e), thetabar_component(e), -_strip(e, 3))

    def element(self, algebra: GrassmannAlgebra) -> GrassmannElement:
        th, tb = algebra.gen("theta"), algebra.gen("thetabar")
        return (algebra.scalar(self.body) + th * self.theta_coeff.embed(algebra)
                + tb * self.thetabar_coeff.embed(algebra)
                + tb * th * self.top_coeff.embed(algebra))


def _ghosts(state: ExtendedState, galg: GrassmannAlgebra):
    n2 = state.phi.size
    if state.c is None:
        z = galg.zero()
        return [z] * n2, [z] * n2
    c = [g.embed(galg) if g.algebra != galg else g for g in state.c]
    cb = [g.embed(galg) if g.algebra != galg else g for g in state.cbar]
    return c, cb


def superfields(state: ExtendedState) -> list:
    """The ``2n`` superfields of ``state`` as elements of the superspace algebra."""
    n = state.n
    alg = superspace_algebra(n)
    galg = ghost_algebra(n)
    w = symplectic_matrix(n)
    c, cb = _ghosts(state, galg)
    lam = state.lam_body()
    out = []
    for a in range(2 * n):
        bar = galg.zero()
        for b in range(2 * n):
            if w[a, b]:
                bar = bar + w[a, b] * cb[b]
        sf = Superfield(float(state.phi[a]), c[a], bar, galg.scalar(1j * float(w[a] @ lam)))
        out.append(sf.element(alg))
    return out


@dataclass
class LiftResult:
    value: float
    N: GrassmannElement
    Nbar: GrassmannElement
    calH: GrassmannElement
    element: GrassmannElement


def _jet_of(H, state: ExtendedState) -> Jet3:
    if isinstance(H, Jet3):
        return H
    if hasattr(H, "jet"):
        names = phi_names(state.n)
        return H.jet(dict(zip(names, state.phi.tolist())), names, order=2)
    return H(state.phi)


def lift(H, state: ExtendedState) -> LiftResult:
    """Evaluate ``H(Phi)`` exactly via its second-order Taylor expansion.

    ``H`` is an expression over the phase-space names, a callable returning
    a :class:`Jet3` at ``phi``, or a precomputed jet.  Terms of order three
    and higher in ``Phi - phi`` vanish because they need a repeated theta.
    """
    n = state.n
    alg = superspace_algebra(n)
    J = _jet_of(H, state)
    if J.order < 2:
        raise ValueError("lift needs second derivatives")
    g = np.asarray(J.grad, dtype=float)
    h = np.asarray(J.hess, dtype=float)
    fields = superfields(state)
    delta = [f - float(state.phi[a]) for a, f in enumerate(fields)]
    e = alg.scalar(float(J.value))
    for a in range(2 * n):
        if g[a]:
            e = e + g[a] * delta[a]
    for a in range(2 * n):
        for b in range(2 * n):
            if h[a, b]:
                e = e + (0.5 * h[a, b]) * (delta[a] * delta[b])
    return LiftResult(float(J.value), theta_component(e), -thetabar_component(e), berezin(e), e)

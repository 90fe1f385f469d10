"""Small symbolic expression trees over named real variables.

Expressions support ``+ - * / **`` and the functions ``sin cos exp sqrt log``.
They can be evaluated on floats, numpy arrays or :class:`~kvn.jet.Jet3`
objects, differentiated symbolically, and have variables substituted by
other expressions.  :func:`parse` builds them from text with a restricted
grammar (no attribute access, no calls other than the five functions).
"""
from __future__ import annotations

import ast
import math
import numbers
from typing import Mapping, Sequence

import numpy as np

from . import jet as _jet
from .jet import Jet3

_FUNCS = ("sin", "cos", "exp", "sqrt", "log")


def _apply(name, x):
    return getattr(_jet, name)(x)


class Expr:
    __slots__ = ()

    # -- public API ---------------------------------------------------
    def evaluate(self, env: Mapping[str, object]):
        return self._eval(env)

    def __call__(self, **env):
        return self._eval(env)

    def jet(self, point: Mapping[str, object], wrt: Sequence[str], order: int = 3) -> Jet3:
        """Derivatives up to ``order`` with respect to the ordered names ``wrt``.

        Names in ``point`` that are not in ``wrt`` are held constant.
        """
        dim = len(wrt)
        env = dict(point)
        for i, name in enumerate(wrt):
            env[name] = Jet3.variable(point[name], i, dim, order)
        out = self._eval(env)
        if not isinstance(out, Jet3):
            shape = np.broadcast_shapes(*(np.shape(point[w]) for w in wrt)) if wrt else ()
            out = Jet3.constant(np.broadcast_to(out, shape), dim, order)
        return out

    def free_symbols(self) -> frozenset:
        return frozenset(self._symbols())

    def diff(self, name: str) -> "Expr":
        return self._diff(name)

    def substitute(self, mapping: Mapping[str, "Expr | float"]) -> "Expr":
        return self._subs({k: as_expr(v) for k, v in mapping.items()})

    # -- operators ----------------------------------------------------
    def __add__(self, o):
        return add(self, as_expr(o))

    def __radd__(self, o):
        return add(as_expr(o), self)

    def __sub__(self, o):
        return add(self, neg(as_expr(o)))

    def __rsub__(self, o):
        return add(as_expr(o), neg(self))

    def __mul__(self, o):
        return mul(self, as_expr(o))

    def __rmul__(self, o):
        return mul(as_expr(o), self)

    def __truediv__(self, o):
        return div(self, as_expr(o))

    def __rtruediv__(self, o):
        return div(as_expr(o), self)

    def __pow__(self, o):
        return power(self, as_expr(o))

    def __rpow__(self, o):
        return power(as_expr(o), self)

    def __neg__(self):
        return neg(self)

    def __pos__(self):
        return self


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value

    def _eval(self, env):
        return self.value

    def _symbols(self):
        return set()

    def _diff(self, name):
        return ZERO

    def _subs(self, m):
        return self

    def __repr__(self):
        return repr(self.value)


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def _eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise KeyError(f"no value bound for variable {self.name!r}") from None

    def _symbols(self):
        return {self.name}

    def _diff(self, name):
        return ONE if name == self.name else ZERO

    def _subs(self, m):
        return m.get(self.name, self)

    def __repr__(self):
        return self.name


class Add(Expr):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b

    def _eval(self, env):
        return self.a._eval(env) + self.b._eval(env)

    def _symbols(self):
        return self.a._symbols() | self.b._symbols()

    def _diff(self, name):
        return add(self.a._diff(name), self.b._diff(name))

    def _subs(self, m):
        return add(self.a._subs(m), self.b._subs(m))

    def __repr__(self):
        return f"({self.a!r} + {self.b!r})"


class Neg(Expr):
    __slots__ = ("a",)

    def __init__(self, a):
        self.a = a

    def _eval(self, env):
        return -self.a._eval(env)

    def _symbols(self):
        return self.a._symbols()

    def _diff(self, name):
        return neg(self.a._diff(name))

    def _subs(self, m):
        return neg(self.a._subs(m))

    def __repr__(self):
        return f"(-{self.a!r})"


class Mul(Expr):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b

    def _eval(self, env):
        return self.a._eval(env) * self.b._eval(env)

    def _symbols(self):
        return self.a._symbols() | self.b._symbols()

    def _diff(self, name):
        return add(mul(self.a._diff(name), self.b), mul(self.a, self.b._diff(name)))

    def _subs(self, m):
        return mul(self.a._subs(m), self.b._subs(m))

    def __repr__(self):
        return f"({self.a!r} * {self.b!r})"


class Div(Expr):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b

    def _eval(self, env):
        return self.a._eval(env) / self.b._eval(env)

    def _symbols(self):
        return self.a._symbols() | self.b._symbols()

    def _diff(self, name):
        da, db = self.a._diff(name), self.b._diff(name)
        return sub(div(da, self.b), div(mul(self.a, db), mul(self.b, self.b)))

    def _subs(self, m):
        return div(self.a._subs(m), self.b._subs(m))

    def __repr__(self):
        return f"({self.a!r} / {self.b!r})"


class Pow(Expr):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b

    def _eval(self, env):
        base = self.a._eval(env)
        if isinstance(self.b, Const):
            k = self.b.value
            if isinstance(base, Jet3):
                return base ** k
            if float(k).is_integer() and k >= 0:
                return base ** int(k)
            return np.power(base, k)
        ex = self.b._eval(env)
        return _apply("exp", ex * _apply("log", base))

    def _symbols(self):
        return self.a._symbols() | self.b._symbols()

    def _diff(self, name):
        da = self.a._diff(name)
        if isinstance(self.b, Const):
            k = self.b.value
            return mul(mul(Const(k), power(self.a, Const(k - 1))), da)
        db = self.b._diff(name)
        # d(a^b) = a^b (b' log a + b a'/a)
        return mul(self, add(mul(db, Func("log", self.a)), div(mul(self.b, da), self.a)))

    def _subs(self, m):
        return power(self.a._subs(m), self.b._subs(m))

    def __repr__(self):
        return f"({self.a!r} ** {self.b!r})"


class Func(Expr):
    __slots__ = ("name", "a")

    def __init__(self, name, a):
        if name not in _FUNCS:
            raise ValueError(f"unsupported function {name!r}")
        self.name, self.a = name, a

    def _eval(self, env):
        return _apply(self.name, self.a._eval(env))

    def _symbols(self):
        return self.a._symbols()

    def _diff(self, name):
        da = self.a._diff(name)
        if _is_zero(da):
            return ZERO
        a = self.a
        outer = {
            "sin": lambda: Func("cos", a),
            "cos": lambda: neg(Func("sin", a)),
            "exp": lambda: self,
            "sqrt": lambda: div(Const(0.5), self),
            "log": lambda: div(ONE, a),
        }[self.name]()
        return mul(outer, da)

    def _subs(self, m):
        return Func(self.name, self.a._subs(m))

    def __repr__(self):
        return f"{self.name}({self.a!r})"


ZERO = Const(0.0)
ONE = Const(1.0)


def _is_zero(e):
    return isinstance(e, Const) and not isinstance(e.value, Expr) and e.value == 0


def _is_one(e):
    return isinstance(e, Const) and e.value == 1


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, numbers.Number):
        return Const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


# light simplification keeps derivative trees small
def add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Add(a, b)


def sub(a, b):
    return add(a, neg(b))


def neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return ZERO
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Mul(a, b)


def div(a, b):
    if _is_zero(a):
        return ZERO
    if _is_one(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value / b.value)
    return Div(a, b)


def power(a, b):
    if isinstance(b, Const):
        if b.value == 0:
            return ONE
        if b.value == 1:
            return a
        if isinstance(a, Const):
            return Const(a.value ** b.value)
    return Pow(a, b)


def sin(x):
    return Func("sin", as_expr(x))


def cos(x):
    return Func("cos", as_expr(x))


def exp(x):
    return Func("exp", as_expr(x))


def sqrt(x):
    return Func("sqrt", as_expr(x))


def log(x):
    return Func("log", as_expr(x))


def symbols(names: str | Sequence[str]):
    if isinstance(names, str):
        names = names.replace(",", " ").split()
    return tuple(Var(n) for n in names)


def gradient(e: Expr, names: Sequence[str]) -> list:
    return [e.diff(n) for n in names]


def hessian(e: Expr, names: Sequence[str]) -> list:
    g = gradient(e, names)
    return [[gi.diff(n) for n in names] for gi in g]


# -- parsing -------------------------------------------------------------

_BINOPS = {ast.Add: add, ast.Sub: sub, ast.Mult: mul, ast.Div: div, ast.Pow: power}


def parse(text: str, params: Mapping[str, float] | None = None,
          variables: Sequence[str] | None = None) -> Expr:
    """Parse ``text`` into an expression.

    Names found in ``params`` become constants.  If ``variables`` is given,
    any other name is an error; otherwise unknown names become variables.
    ``pi`` is always available.
    """
    params = dict(params or {})
    params.setdefault("pi", math.pi)
    allowed = None if variables is None else set(variables)
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return Const(float(node.value))
        if isinstance(node, ast.Name):
            if node.id in params:
                return Const(float(params[node.id]))
            if allowed is not None and node.id not in allowed:
                raise ValueError(f"unknown name {node.id!r} in {text!r}")
            return Var(node.id)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](build(node.left), build(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            return neg(inner) if isinstance(node.op, ast.USub) else inner
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return Func(node.func.id, build(node.args[0]))
        raise ValueError(f"unsupported syntax in expression {text!r}")

    return build(tree)

"""Minimal coupling, the curly-A fields and gauge transformations.

Conventions: a gauge parameter ``alpha`` acts as

    A -> A + grad alpha,      Phi_s -> Phi_s - (1/c) d_t alpha
    p_i -> p_i + (e/c) d_i alpha,
    lam_{q_i} -> lam_{q_i} - (e/c) sum_j lam_{p_j} d_j d_i alpha,

with ``q`` and ``lam_p`` untouched.  In the (q, lam_p) representation the
wavefunction picks up ``exp(i (e/c) alpha_tilde)`` where
``alpha_tilde = -sum_j lam_{p_j} d_j alpha``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .dynamics import ExtObservable, epb
from .expr import Expr, Var, as_expr, parse
from .state import (ExtendedState, coordinate_names, lambda_names, momentum_names)

TIME = "t"


def _at_time(e: Expr, t: float) -> Expr:
    return e.substitute({TIME: float(t)}) if TIME in e.free_symbols() else e


@dataclass(frozen=True)
class GaugeField:
    """Vector potential ``A_i(q[, t])`` with optional scalar potential.

    Components are expressions over :func:`coordinate_names` (and ``t``).
    """

    components: tuple
    e: float = 1.0
    c_light: float = 1.0
    scalar: Expr | None = None

    def __post_init__(self):
        comps = tuple(as_expr(a) for a in self.components)
        object.__setattr__(self, "components", comps)
        if self.scalar is not None:
            object.__setattr__(self, "scalar", as_expr(self.scalar))
        allowed = set(coordinate_names(self.n)) | {TIME}
        for a in comps + ((self.scalar,) if self.scalar is not None else ()):
            bad = a.free_symbols() - allowed
            if bad:
                raise ValueError(f"field depends on non-coordinate names {sorted(bad)}")

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def coupling(self) -> float:
        return self.e / self.c_light

    def at_time(self, t: float) -> "GaugeField":
        return replace(self, components=tuple(_at_time(a, t) for a in self.components),
                       scalar=None if self.scalar is None else _at_time(self.scalar, t))

    def _env(self, q, t):
        env = dict(zip(coordinate_names(self.n), np.asarray(q, dtype=float).tolist()))
        env[TIME] = t
        return env

    def value(self, q, t: float = 0.0) -> np.ndarray:
        env = self._env(q, t)
        return np.array([float(a.evaluate(env)) for a in self.components])

    def jacobian(self, q, t: float = 0.0) -> np.ndarray:
        """``J[i, j] = d A_i / d q_j``."""
        env = self._env(q, t)
        names = coordinate_names(self.n)
        return np.array([a.jet(env, names, order=1).grad for a in self.components], dtype=float)

    def hessian(self, q, t: float = 0.0) -> np.ndarray:
        """``H[i, j, k] = d_j d_k A_i``."""
        env = self._env(q, t)
        names = coordinate_names(self.n)
        return np.array([a.jet(env, names, order=2).hess for a in self.components], dtype=float)

    def scalar_value(self, q, t: float = 0.0) -> float:
        return 0.0 if self.scalar is None else float(self.scalar.evaluate(self._env(q, t)))

    def scalar_grad(self, q, t: float = 0.0) -> np.ndarray:
        if self.scalar is None:
            return np.zeros(self.n)
        return np.asarray(self.scalar.jet(self._env(q, t), coordinate_names(self.n), order=1).grad,
                          dtype=float)

    def field_strength(self, q, t: float = 0.0) -> np.ndarray:
        """``F[i, j] = d_i A_j - d_j A_i``."""
        J = self.jacobian(q, t)
        return J.T - J


@dataclass(frozen=True)
class GaugeParam:
    """Gauge function ``alpha(q[, t])`` with exact symbolic derivatives."""

    expr: Expr
    n: int

    def __post_init__(self):
        object.__setattr__(self, "expr", as_expr(self.expr))
        bad = self.expr.free_symbols() - set(coordinate_names(self.n)) - {TIME}
        if bad:
            raise ValueError(f"gauge parameter depends on non-coordinate names {sorted(bad)}")

    @property
    def time_dependent(self) -> bool:
        return TIME in self.expr.free_symbols()

    def grad_exprs(self) -> list:
        return [self.expr.diff(q) for q in coordinate_names(self.n)]

    def hess_exprs(self) -> list:
        return [[g.diff(q) for q in coordinate_names(self.n)] for g in self.grad_exprs()]

    def _env(self, q, t):
        env = dict(zip(coordinate_names(self.n), np.asarray(q, dtype=float).tolist()))
        env[TIME] = t
        return env

    def value(self, q, t: float = 0.0) -> float:
        return float(self.expr.evaluate(self._env(q, t)))

    def grad(self, q, t: float = 0.0) -> np.ndarray:
        J = self.expr.jet(self._env(q, t), coordinate_names(self.n), order=2)
        return np.asarray(J.grad, dtype=float)

    def hess(self, q, t: float = 0.0) -> np.ndarray:
        J = self.expr.jet(self._env(q, t), coordinate_names(self.n), order=2)
        return np.asarray(J.hess, dtype=float)

    def time_derivative(self, q, t: float = 0.0) -> float:
        return float(self.expr.diff(TIME).evaluate(self._env(q, t)))

    def grad_on(self, env: Mapping[str, np.ndarray], t: float = 0.0) -> list:
        """Gradient components evaluated on arrays (used by grid code)."""
        env = dict(env)
        env[TIME] = t
        shape = np.broadcast_shapes(*(np.shape(v) for v in env.values()))
        return [np.broadcast_to(g.evaluate(env), shape) for g in self.grad_exprs()]


# -- coupling --------------------------------------------------------------

def kinetic(n: int, m: float = 1.0, potential: Expr | None = None) -> Expr:
    """``sum p_i^2 / 2m (+ V(q))``."""
    H = 0.0
    for p in momentum_names(n):
        H = Var(p) * Var(p) / (2 * m) + H
    if potential is not None:
        H = as_expr(H) + potential
    return as_expr(H)


def couple_H(H_free: Expr, A: GaugeField) -> Expr:
    """Replace every ``p_i`` by ``p_i - (e/c) A_i`` and add ``e Phi_s``."""
    mapping = {p: Var(p) - A.coupling * a for p, a in zip(momentum_names(A.n), A.components)}
    H = H_free.substitute(mapping)
    if A.scalar is not None:
        H = H + A.e * A.scalar
    return H


def curly_a_exprs(A: GaugeField) -> list:
    """``calA_i = -sum_j lam_{p_j} d_j A_i`` as expressions in ``(q, lam_p)``."""
    n = A.n
    lam_p = lambda_names(n)[n:]
    out = []
    for a in A.components:
        e = 0.0
        for j, q in enumerate(coordinate_names(n)):
            d = a.diff(q)
            e = e - Var(lam_p[j]) * d
        out.append(as_expr(e))
    return out


def curlyA(A: GaugeField, lam_p, q, t: float = 0.0) -> np.ndarray:
    return -A.jacobian(q, t) @ np.asarray(lam_p, dtype=float)


def free_calH_expr(H_free: Expr, n: int) -> Expr:
    """``lam_a omega^{ab} d_b H`` for a phase-space function ``H``."""
    qn, pn = coordinate_names(n), momentum_names(n)
    lam = lambda_names(n)
    e = 0.0
    for i in range(n):
        e = Var(lam[i]) * H_free.diff(pn[i]) - Var(lam[n + i]) * H_free.diff(qn[i]) + e
    return as_expr(e)


def couple_calH_expr(H_free: Expr, A: GaugeField) -> Expr:
    """Coupled ``calH`` by substitution: ``p -> p - (e/c)A``, ``lam_q -> lam_q - (e/c) calA``.

    For ``H_free = p^2/2m`` this is ``(1/m) sum (lam_q - (e/c) calA)(p - (e/c) A)``.
    A scalar potential contributes ``-e lam_p . grad Phi_s``.
    """
    n = A.n
    lam = lambda_names(n)
    base = free_calH_expr(H_free, n)
    mapping = {p: Var(p) - A.coupling * a for p, a in zip(momentum_names(n), A.components)}
    for i, ca in enumerate(curly_a_exprs(A)):
        mapping[lam[i]] = Var(lam[i]) - A.coupling * ca
    out = base.substitute(mapping)
    if A.scalar is not None:
        for j, q in enumerate(coordinate_names(n)):
            out = out - A.e * Var(lam[n + j]) * A.scalar.diff(q)
    return out


def couple_calH(H_free: Expr, A: GaugeField, s: ExtendedState, t: float = 0.0) -> float:
    return float(couple_calH_expr(H_free, A.at_time(t)).evaluate(s.env()))


def minimal_coupling_calH(A: GaugeField, s: ExtendedState, m: float = 1.0, t: float = 0.0) -> float:
    """Direct evaluation of ``(1/m) sum (lam_q - (e/c) calA)(p - (e/c) A)``."""
    n = A.n
    q, p = s.q, s.p
    lam = s.lam_body()
    k = A.coupling
    ca = curlyA(A, lam[n:], q, t)
    out = float(np.sum((lam[:n] - k * ca) * (p - k * A.value(q, t))) / m)
    if A.scalar is not None:
        out -= A.e * float(lam[n:] @ A.scalar_grad(q, t))
    return out


# -- gauge transformations --------------------------------------------------

def gauge_transform_state(s: ExtendedState, alpha: GaugeParam, e: float = 1.0,
                          c_light: float = 1.0, t: float = 0.0) -> ExtendedState:
    n = s.n
    k = e / c_light
    q = s.q
    lam = s.lam_body().copy()
    phi = s.phi.copy()
    phi[n:] += k * alpha.grad(q, t)
    lam[:n] -= k * (alpha.hess(q, t) @ lam[n:])
    return ExtendedState(phi, lam, c=s.c, cbar=s.cbar)


def gauge_transform_field(A: GaugeField, alpha: GaugeParam) -> GaugeField:
    """``A -> A + grad alpha`` and ``Phi_s -> Phi_s - (1/c) d_t alpha``."""
    if alpha.n != A.n:
        raise ValueError("gauge parameter and field have different dimension")
    comps = tuple(a + g for a, g in zip(A.components, alpha.grad_exprs()))
    scalar = A.scalar
    if alpha.time_dependent:
        dt = alpha.expr.diff(TIME) * (-1.0 / A.c_light)
        scalar = dt if scalar is None else scalar + dt
    return replace(A, components=comps, scalar=scalar)


def alpha_tilde(alpha: GaugeParam) -> Expr:
    """``-sum_j lam_{p_j} d_j alpha`` over ``(q, lam_p)``."""
    n = alpha.n
    lam_p = lambda_names(n)[n:]
    e = 0.0
    for j, g in enumerate(alpha.grad_exprs()):
        e = e - Var(lam_p[j]) * g
    return as_expr(e)


@dataclass
class VelocityReport:
    """``extra[i]``: bracket of ``v_i`` with ``calH'`` minus its gauge-invariant
    part, when ``A`` and ``p`` are transformed but ``lam`` is not.  ``expected``
    is ``(e/mc) sum_j d_i d_j alpha v_j``; ``extra_full`` is the same residual
    when ``lam`` is transformed too (it vanishes)."""

    extra: np.ndarray
    expected: np.ndarray
    extra_full: np.ndarray
    invariant: np.ndarray
    velocity: np.ndarray

    @property
    def mismatch(self) -> float:
        return float(np.max(np.abs(self.extra - self.expected)))


def velocity_evolution_check(A: GaugeField, alpha: GaugeParam, s: ExtendedState,
                             m: float = 1.0, potential: Expr | None = None,
                             t: float = 0.0) -> VelocityReport:
    """Evaluate the velocity evolution in the new gauge with and without the
    ``lam`` part of the transformation.  All brackets are taken in the
    original canonical variables, where only the full map is canonical."""
    n = A.n
    k = A.coupling
    A0 = A.at_time(t)
    Ap = gauge_transform_field(A, alpha).at_time(t)
    al = GaugeParam(_at_time(alpha.expr, t), n)
    H_free = kinetic(n, m, potential)
    calH_new = couple_calH_expr(H_free, Ap)
    pn, lam = momentum_names(n), lambda_names(n)
    grads = al.grad_exprs()
    hess = al.hess_exprs()
    shift_p = {pn[i]: Var(pn[i]) + k * grads[i] for i in range(n)}
    partial = calH_new.substitute(shift_p)
    full_map = dict(shift_p)
    for i in range(n):
        e = Var(lam[i])
        for j in range(n):
            e = e - k * Var(lam[n + j]) * hess[j][i]
        full_map[lam[i]] = e
    full = calH_new.substitute(full_map)
    vel = [(Var(pn[i]) - k * A0.components[i]) / m for i in range(n)]
    v = np.array([float(x.evaluate(s.env())) for x in vel])
    F = A0.field_strength(s.q)
    inv = (k / m) * (F @ v)
    # forces from V and from the new gauge's scalar potential
    qn = coordinate_names(n)
    for w, V in ((1.0, potential), (A.e, Ap.scalar)):
        if V is not None:
            inv = inv - (w / m) * np.array([float(V.diff(c).evaluate(s.env())) for c in qn])
    H_al = al.hess(s.q)
    expected = (k / m) * (H_al @ v)
    extra = np.array([epb(ExtObservable(x, n), ExtObservable(partial, n), s) for x in vel]) - inv
    extra_full = np.array([epb(ExtObservable(x, n), ExtObservable(full, n), s) for x in vel]) - inv
    return VelocityReport(extra, expected, extra_full, inv, v)


# -- grid-level identities ---------------------------------------------------

def liouville_gauge_covariance(psi0, A: GaugeField, alpha: GaugeParam, m: float = 1.0,
                               potential: Expr | None = None, dt: float = 1e-3,
                               steps: int = 1) -> float:
    """Relative L2 distance between the two sides of the gauge square.

    Path one evolves ``psi0`` with the operator of ``(A, Phi_s)`` and then
    applies the phase at the final time.  Path two applies the phase at
    ``t = 0`` and evolves with the operator of the transformed pair
    ``(A + grad alpha, Phi_s - (1/c) d_t alpha)``.  ``psi0`` is a
    (q, lam_p) wavefunction.
    """
    from .liouville import build_mixed_operator, evolve_spectral
    from .representations import gauge_phase_mixed

    grid = psi0.grid
    t = dt * steps
    Ap = gauge_transform_field(A, alpha)

    def op_for(field_):
        if any(TIME in c.free_symbols() for c in field_.components) or (
                field_.scalar is not None and TIME in field_.scalar.free_symbols()):
            return lambda tt: build_mixed_operator(grid, m=m, field=field_.at_time(tt), potential=potential)
        return build_mixed_operator(grid, m=m, field=field_, potential=potential)

    path1 = evolve_spectral(op_for(A), psi0, t, dt)
    path1 = gauge_phase_mixed(path1, alpha, A.e, A.c_light, t=t)
    start = gauge_phase_mixed(psi0, alpha, A.e, A.c_light, t=0.0)
    path2 = evolve_spectral(op_for(Ap), start, t, dt)
    return path1.distance(path2) / path1.norm()


def generalized_two_field_coupling(A_q: Expr, A_lam: Expr, grid, m: float = 1.0):
    """Grid operator ``(1/m)(-i d_q + A_q)(i d_lam - A_lam)`` for one degree of freedom.

    ``A_q`` and ``A_lam`` are expressions in ``q`` and ``lam_p``.
    """
    from .liouville import GridOperator
    from .representations import QLAMBDAP, spectral_derivative

    if grid.tag != QLAMBDAP or grid.n != 1:
        raise ValueError("two-field coupling is defined on a one-dof (q, lam_p) grid")
    env = grid.env()
    aq = np.broadcast_to(as_expr(A_q).evaluate(env), grid.shape)
    al = np.broadcast_to(as_expr(A_lam).evaluate(env), grid.shape)
    qa, la = grid.axes

    def action(a):
        chi = 1j * spectral_derivative(a, la, 1) - al * a
        return (-1j * spectral_derivative(chi, qa, 0) + aq * chi) / m

    bound = (np.pi / qa.spacing + np.max(np.abs(aq))) * (np.pi / la.spacing + np.max(np.abs(al))) / m
    return GridOperator(action, grid, {"kind": "two-field", "m": m}, float(bound))


def transform_two_fields(A_q: Expr, A_lam: Expr, alpha: Expr):
    """``A_q - d_q alpha``, ``A_lam - d_lam alpha`` for ``alpha(q, lam_p)``."""
    return as_expr(A_q) - alpha.diff("q"), as_expr(A_lam) - alpha.diff("lam_p")


def pass_through_residual(A_q: Expr, A_lam: Expr, alpha: Expr, psi, m: float = 1.0) -> float:
    """Relative L2 size of ``H'_A (e^{i alpha} psi) - e^{i alpha} H_A psi``."""
    grid = psi.grid
    phase = np.exp(1j * np.broadcast_to(as_expr(alpha).evaluate(grid.env()), grid.shape))
    H = generalized_two_field_coupling(A_q, A_lam, grid, m)
    Aq2, Al2 = transform_two_fields(A_q, A_lam, as_expr(alpha))
    H2 = generalized_two_field_coupling(Aq2, Al2, grid, m)
    lhs = H2(psi.with_amplitudes(phase * psi.amplitudes))
    rhs = psi.with_amplitudes(phase * H(psi).amplitudes)
    return lhs.distance(rhs) / max(rhs.norm(), 1e-300)


def standard_two_fields(A: GaugeField):
    """Fields reproducing ordinary minimal coupling: ``A_q = (e/c) lam_p A'``,
    ``A_lam = (e/c) A``."""
    if A.n != 1:
        raise ValueError("one degree of freedom only")
    a = A.components[0]
    k = A.coupling
    return k * Var("lam_p") * a.diff("q"), k * a


# -- scenario files ----------------------------------------------------------

@dataclass
class GaugeScenario:
    field: GaugeField
    alpha: GaugeParam
    m: float = 1.0
    potential: Expr | None = None
    params: dict = field(default_factory=dict)


_SCENARIO_SECTIONS = {
    "params": None,
    "units": {"e", "c", "m"},
    "field": None,
    "gauge": {"alpha"},
}


def parse_scenario(text: str) -> GaugeScenario:
    """Read a scenario of ``[section]`` blocks with ``key = value`` lines.

    ``[units]`` holds ``e``, ``c`` and ``m``; ``[params]`` defines named
    constants; ``[field]`` holds ``A_x``, ``A_y``, ``A_z`` (or ``A_q`` for one
    dimension) and optionally ``phi_s`` and ``V``; ``[gauge]`` holds ``alpha``.
    """
    import configparser

    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"malformed scenario: {exc}") from None
    for sec in cp.sections():
        if sec not in _SCENARIO_SECTIONS:
            raise ValueError(f"unknown scenario section [{sec}]")
        allowed = _SCENARIO_SECTIONS[sec]
        if allowed is not None:
            extra = set(cp[sec]) - allowed
            if extra:
                raise ValueError(f"unknown keys in [{sec}]: {sorted(extra)}")
    params = {k: float(v) for k, v in cp["params"].items()} if cp.has_section("params") else {}
    units = cp["units"] if cp.has_section("units") else {}
    e = float(units.get("e", 1.0))
    c = float(units.get("c", 1.0))
    m = float(units.get("m", 1.0))
    if not cp.has_section("field"):
        raise ValueError("scenario needs a [field] section")
    fsec = dict(cp["field"])
    keys = [k for k in fsec if k.startswith("A_")]
    if keys == ["A_q"]:
        n = 1
        order = ["A_q"]
    else:
        order = [k for k in ("A_x", "A_y", "A_z") if k in fsec]
        n = len(order)
        if n == 0 or order != ["A_x", "A_y", "A_z"][:n] or set(keys) != set(order):
            raise ValueError("field components must be A_q, or A_x[, A_y[, A_z]]")
    extra = set(fsec) - set(order) - {"phi_s", "V"}
    if extra:
        raise ValueError(f"unknown keys in [field]: {sorted(extra)}")
    names = list(coordinate_names(n)) + [TIME]
    comps = tuple(parse(fsec[k], params, names) for k in order)
    scalar = parse(fsec["phi_s"], params, names) if "phi_s" in fsec else None
    potential = parse(fsec["V"], params, coordinate_names(n)) if "V" in fsec else None
    alpha_text = cp["gauge"]["alpha"] if cp.has_section("gauge") and "alpha" in cp["gauge"] else "0"
    alpha = GaugeParam(parse(alpha_text, params, names), n)
    return GaugeScenario(GaugeField(comps, e=e, c_light=c, scalar=scalar), alpha, m, potential, params)

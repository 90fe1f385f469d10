"""Extended Poisson brackets, ghost-sector equations of motion and RK4 flows.

The extended bracket of two observables is

    {A, B} = A (d_phi d_lam - d_lam d_phi) B - i A (<-d_c d_cbar-> + <-d_cbar d_c->) B

so that ``{phi^a, lam_b} = delta`` and ``{cbar_b, c^a} = -i delta``.
Observables are bosonic expressions in ``(phi, lam)`` plus an optional ghost
bilinear ``factor * cbar_a M_ab(phi) c^b``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .expr import Expr, Var, as_expr, gradient
from .state import (ExtendedState, coordinate_names, lambda_names, momentum_names,
                    phi_names, symplectic_matrix)
from .superspace import GrassmannElement


class IntegrationError(FloatingPointError):
    pass


# -- observables ---------------------------------------------------------

@dataclass
class _Pieces:
    d_phi: list
    d_lam: list
    rd_c: list
    rd_cbar: list
    ld_c: list
    ld_cbar: list


class ExtObservable:
    """Even observable ``expr(phi, lam) + factor * cbar_a M_ab(phi) c^b``.

    Parameters
    ----------
    expr : Expr or float
        Bosonic part over the names of :func:`phi_names` and :func:`lambda_names`.
    n : int
        Degrees of freedom.
    ghost : 2n x 2n nested sequence of Expr, optional
        Matrix ``M`` of the ghost bilinear; entries may depend on ``phi``.
    ghost_factor : complex
        Overall factor of the bilinear.
    """

    def __init__(self, expr, n: int, ghost=None, ghost_factor: complex = 1.0):
        self.expr = as_expr(expr)
        self.n = n
        self.ghost = None if ghost is None else [[as_expr(m) for m in row] for row in ghost]
        self.ghost_factor = ghost_factor
        if self.ghost is not None and (len(self.ghost) != 2 * n or any(len(r) != 2 * n for r in self.ghost)):
            raise ValueError("ghost matrix must be 2n x 2n")

    @classmethod
    def coordinate(cls, kind: str, index: int, n: int):
        """``phi^a`` or ``lam_a`` as an observable; ghosts via :class:`GhostCoordinate`."""
        if kind == "phi":
            return cls(Var(phi_names(n)[index]), n)
        if kind == "lam":
            return cls(Var(lambda_names(n)[index]), n)
        if kind in ("c", "cbar"):
            return GhostCoordinate(kind, index, n)
        raise ValueError(f"unknown coordinate kind {kind!r}")

    def _names(self):
        return phi_names(self.n) + lambda_names(self.n)

    def _ghost_matrix(self, state, order):
        env = state.env()
        names = phi_names(self.n)
        n2 = 2 * self.n
        M = np.zeros((n2, n2), dtype=complex)
        dM = np.zeros((n2, n2, n2), dtype=complex)
        for a in range(n2):
            for b in range(n2):
                j = self.ghost[a][b].jet(env, names, order=1)
                M[a, b] = j.value
                dM[a, b] = j.grad
        return self.ghost_factor * M, self.ghost_factor * dM

    def value(self, state: ExtendedState):
        v = self.expr.evaluate(state.env())
        if self.ghost is None or not state.has_ghosts:
            return float(v) if np.isrealobj(v) else v
        M, _ = self._ghost_matrix(state, 0)
        return v + _bilinear(state.cbar, M, state.c)

    def pieces(self, state: ExtendedState) -> _Pieces:
        n2 = 2 * self.n
        J = self.expr.jet(state.env(), self._names(), order=1)
        d_phi = list(J.grad[:n2])
        d_lam = list(J.grad[n2:])
        zeros = [0.0] * n2
        rd_c = rd_cbar = ld_c = ld_cbar = zeros
        if self.ghost is not None and state.has_ghosts:
            M, dM = self._ghost_matrix(state, 1)
            c, cb = state.c, state.cbar
            for a in range(n2):
                d_phi[a] = d_phi[a] + _bilinear(cb, dM[:, :, a], c)
            rd_c = [_lin(M[:, a], cb) for a in range(n2)]
            ld_cbar = [_lin(M[a, :], c) for a in range(n2)]
            rd_cbar = [-_lin(M[a, :], c) for a in range(n2)]
            ld_c = [-_lin(M[:, a], cb) for a in range(n2)]
        return _Pieces(d_phi, d_lam, rd_c, rd_cbar, ld_c, ld_cbar)


class GhostCoordinate:
    """The odd coordinate ``c^a`` (kind ``'c'``) or ``cbar_a`` (kind ``'cbar'``)."""

    def __init__(self, kind: str, index: int, n: int):
        if kind not in ("c", "cbar"):
            raise ValueError("kind must be 'c' or 'cbar'")
        self.kind, self.index, self.n = kind, index, n

    def value(self, state):
        return (state.c if self.kind == "c" else state.cbar)[self.index]

    def pieces(self, state):
        n2 = 2 * self.n
        zeros = [0.0] * n2
        unit = [1.0 if a == self.index else 0.0 for a in range(n2)]
        if self.kind == "c":
            return _Pieces(zeros, zeros, unit, zeros, unit, zeros)
        return _Pieces(zeros, zeros, zeros, unit, zeros, unit)


def _lin(coeffs, items):
    out = 0.0
    for k, x in zip(coeffs, items):
        if k != 0:
            out = out + complex(k) * x if np.iscomplexobj(k) else out + float(k) * x
    return out


def _bilinear(cbar, M, c):
    out = 0.0
    n2 = len(c)
    for a in range(n2):
        for b in range(n2):
            if M[a, b] != 0:
                out = out + M[a, b] * (cbar[a] * c[b])
    return out


def _prod(x, y):
    if isinstance(x, (int, float, complex, np.number)) and x == 0:
        return 0.0
    if isinstance(y, (int, float, complex, np.number)) and y == 0:
        return 0.0
    return x * y


def epb(A, B, state: ExtendedState):
    """Extended Poisson bracket ``{A, B}`` at ``state``.

    ``A`` and ``B`` are :class:`ExtObservable` or :class:`GhostCoordinate`.
    Returns a number, or a Grassmann element when ghosts are involved.
    """
    if isinstance(state.lam, list):
        raise ValueError("brackets need a state with ordinary (number) lam")
    pa, pb = A.pieces(state), B.pieces(state)
    out = 0.0
    for a in range(2 * state.n):
        out = out + _prod(pa.d_phi[a], pb.d_lam[a]) - _prod(pa.d_lam[a], pb.d_phi[a])
        g = _prod(pa.rd_c[a], pb.ld_cbar[a]) + _prod(pa.rd_cbar[a], pb.ld_c[a])
        if not (isinstance(g, float) and g == 0.0):
            out = out - 1j * g
    return out


def calH_observable(H: Expr, n: int) -> ExtObservable:
    """``lam_a omega^{ab} d_b H + i cbar_a omega^{ad} d_d d_b H c^b`` built symbolically."""
    names = phi_names(n)
    lam = lambda_names(n)
    w = symplectic_matrix(n)
    g = gradient(H, names)
    bos = 0.0
    for a in range(2 * n):
        for b in range(2 * n):
            if w[a, b]:
                bos = Var(lam[a]) * (w[a, b] * g[b]) + bos
    hess = [[gi.diff(nm) for nm in names] for gi in g]
    M = []
    for a in range(2 * n):
        row = []
        for b in range(2 * n):
            e = 0.0
            for d in range(2 * n):
                if w[a, d]:
                    e = hess[d][b] * w[a, d] + e
            row.append(as_expr(e))
        M.append(row)
    return ExtObservable(bos, n, ghost=M, ghost_factor=1j)


# -- equations of motion --------------------------------------------------

def _hjet(H, phi, order=3):
    names = phi_names(phi.size // 2)
    return H.jet(dict(zip(names, phi.tolist())), names, order=order)


def eom(H: Expr, s: ExtendedState) -> ExtendedState:
    """Time derivative of every component of ``s`` under the lifted dynamics.

        phi'^a  = omega^{ab} d_b H
        c'^a    = omega^{ac} d_c d_b H c^b
        cbar'_b = -cbar_a omega^{ac} d_c d_b H
        lam'_b  = -omega^{ac} d_c d_b H lam_a - i cbar_a omega^{ac} d_c d_d d_b H c^d
    """
    n = s.n
    w = symplectic_matrix(n)
    J = _hjet(H, s.phi, order=3 if s.has_ghosts else 2)
    K = w @ J.hess
    phidot = w @ J.grad
    if not s.has_ghosts:
        lamdot = -(np.asarray(s.lam) @ K)
        return ExtendedState(phidot, lamdot)
    W = np.einsum("ac,cdb->adb", w, J.third)
    n2 = 2 * n
    cdot = [_lin(K[a, :], s.c) for a in range(n2)]
    cbdot = [-_lin(K[:, b], s.cbar) for b in range(n2)]
    lam = s.lam if isinstance(s.lam, list) else [float(v) for v in s.lam]
    lamdot = []
    for b in range(n2):
        v = -_lin(K[:, b], lam)
        src = _bilinear(s.cbar, W[:, :, b], s.c)
        if not (isinstance(src, float) and src == 0.0):
            v = v - 1j * src
        lamdot.append(v)
    alg = s.c[0].algebra
    lamdot = [x if isinstance(x, GrassmannElement) else alg.scalar(x) for x in lamdot]
    return ExtendedState(phidot, lamdot, c=_as_elems(cdot, alg), cbar=_as_elems(cbdot, alg))


def _as_elems(xs, alg):
    return [x if isinstance(x, GrassmannElement) else alg.scalar(x) for x in xs]


def _axpy(s: ExtendedState, a: float, d: ExtendedState) -> ExtendedState:
    """``s + a*d`` componentwise."""
    phi = s.phi + a * d.phi
    if not s.has_ghosts:
        return ExtendedState(phi, np.asarray(s.lam) + a * np.asarray(d.lam))
    alg = s.c[0].algebra
    lam0 = s.lam if isinstance(s.lam, list) else [alg.scalar(float(v)) for v in s.lam]
    lam = [x + a * y for x, y in zip(lam0, d.lam)]
    c = [x + a * y for x, y in zip(s.c, d.c)]
    cb = [x + a * y for x, y in zip(s.cbar, d.cbar)]
    return ExtendedState(phi, lam, c=c, cbar=cb)


def _finite(s: ExtendedState) -> bool:
    if not np.all(np.isfinite(s.phi)):
        return False
    if not s.has_ghosts:
        return bool(np.all(np.isfinite(s.lam)))
    items = list(s.lam) + list(s.c) + list(s.cbar)
    return all(np.isfinite(v) for x in items for v in x.terms.values())


def rk4_step(H: Expr, s: ExtendedState, dt: float) -> ExtendedState:
    k1 = eom(H, s)
    k2 = eom(H, _axpy(s, dt / 2, k1))
    k3 = eom(H, _axpy(s, dt / 2, k2))
    k4 = eom(H, _axpy(s, dt, k3))
    out = _axpy(s, dt / 6, k1)
    out = _axpy(out, dt / 3, k2)
    out = _axpy(out, dt / 3, k3)
    return _axpy(out, dt / 6, k4)


@dataclass
class Trajectory:
    times: np.ndarray
    states: list

    def phi(self) -> np.ndarray:
        return np.array([s.phi for s in self.states])

    def lam(self) -> np.ndarray:
        return np.array([s.lam_body() for s in self.states])

    def to_csv(self, fh=None) -> str:
        """Columns ``t, q_i, p_i, lam_q_i, lam_p_i`` (number parts)."""
        n = self.states[0].n
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *coordinate_names(n), *momentum_names(n), *lambda_names(n)])
        for t, s in zip(self.times, self.states):
            w.writerow([_fmt(t), *(_fmt(v) for v in s.phi), *(_fmt(v) for v in s.lam_body())])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def _fmt(x) -> str:
    return f"{float(x):.15g}"


def integrate(H: Expr, s0: ExtendedState, dt: float, steps: int, every: int = 1) -> Trajectory:
    """Fixed-step RK4 integration of the full extended dynamics.

    Raises :class:`IntegrationError` as soon as a component stops being finite.
    """
    if steps < 0 or dt == 0:
        raise ValueError("need steps >= 0 and dt != 0")
    s = s0
    times, states = [0.0], [s0]
    for k in range(1, steps + 1):
        # overflow is reported below as an IntegrationError
        with np.errstate(over="ignore", invalid="ignore"):
            s = rk4_step(H, s, dt)
        if not _finite(s):
            raise IntegrationError(f"non-finite state after step {k} (t = {k * dt:.6g})")
        if k % every == 0 or k == steps:
            times.append(k * dt)
            states.append(s)
    return Trajectory(np.array(times), states)


def hamiltonian_vector_field(H: Expr, points: np.ndarray) -> np.ndarray:
    """``omega^{ab} d_b H`` at a batch of phase-space points, shape ``(2n, ...)``."""
    n = points.shape[0] // 2
    names = phi_names(n)
    J = H.jet(dict(zip(names, points)), names, order=1)
    w = symplectic_matrix(n)
    grad = np.moveaxis(np.broadcast_to(J.grad, points.shape[1:] + (2 * n,)), -1, 0)
    return np.tensordot(w, grad, axes=1)


def flow(H: Expr, points, t: float, steps: int) -> np.ndarray:
    """Hamiltonian flow of a batch of points (first axis indexes phi) over time ``t``."""
    x = np.array(points, dtype=float)
    if steps <= 0:
        return x
    h = t / steps
    for _ in range(steps):
        k1 = hamiltonian_vector_field(H, x)
        k2 = hamiltonian_vector_field(H, x + 0.5 * h * k1)
        k3 = hamiltonian_vector_field(H, x + 0.5 * h * k2)
        k4 = hamiltonian_vector_field(H, x + h * k3)
        x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def tangent_map(traj: Trajectory) -> list:
    """Jacobians ``d phi(t) / d phi(0)`` read off ghosts that start as the generators."""
    out = []
    for s in traj.states:
        n2 = s.phi.size
        J = np.zeros((n2, n2), dtype=complex)
        for a in range(n2):
            for b in range(n2):
                J[a, b] = s.c[a].coefficient(f"c{b + 1}")
        out.append(J.real)
    return out


# -- Landau constants of motion ------------------------------------------

@dataclass
class LandauConstantsReport:
    max_abs: dict
    states: int
    rho2_drift: float | None = None
    details: dict = field(default_factory=dict)

    def ok(self, tol=1e-10) -> bool:
        return all(v <= tol for v in self.max_abs.values())


def landau_observables(B, e=1.0, m=1.0, c_light=1.0):
    """Velocity components, guiding centre and squared radius for ``A = (0, B x, 0)``."""
    if B == 0:
        raise ValueError("Larmor frequency undefined for B = 0")
    from .gauge_coupling import GaugeField, couple_calH_expr, kinetic

    n = 3
    x, y, z = (Var(s) for s in coordinate_names(n))
    px, py, pz = (Var(s) for s in momentum_names(n))
    field_ = GaugeField((0.0, B * x, 0.0), e=e, c_light=c_light)
    calH = ExtObservable(couple_calH_expr(kinetic(n, m), field_), n)
    om = e * B / (m * c_light)
    vx = px / m
    vy = (py - (e / c_light) * B * x) / m
    obs = {
        "x0": x + vy / om,
        "y0": y - vx / om,
        "rho2": (vx * vx + vy * vy) / (om * om),
    }
    return calH, obs, {"vx": vx, "vy": vy, "omega": om}


def check_constants_landau(B, e=1.0, m=1.0, c_light=1.0, samples=100, seed=0,
                           periods=None, steps_per_period=1000) -> LandauConstantsReport:
    """Brackets of the guiding centre and radius with the Landau ``calH``.

    With ``periods`` set, also integrate the radius along a trajectory at
    ``dt = T / steps_per_period`` and report its largest relative drift.
    """
    calH, obs, extra = landau_observables(B, e, m, c_light)
    rng = np.random.default_rng(seed)
    worst = {k: 0.0 for k in obs}
    for _ in range(samples):
        s = ExtendedState(rng.uniform(-2, 2, 6), rng.uniform(-2, 2, 6))
        for k, o in obs.items():
            r = epb(ExtObservable(o, 3), calH, s)
            worst[k] = max(worst[k], abs(r))
    rep = LandauConstantsReport(worst, samples)
    if periods:
        from .gauge_coupling import GaugeField, couple_H, kinetic

        x = Var("x")
        H = couple_H(kinetic(3, m), GaugeField((0.0, B * x, 0.0), e=e, c_light=c_light))
        om = extra["omega"]
        T = 2 * math.pi / abs(om)
        s0 = ExtendedState(rng.uniform(-1, 1, 6), rng.uniform(-1, 1, 6))
        traj = integrate(H, s0, T / steps_per_period, int(periods * steps_per_period),
                         every=steps_per_period // 10)
        rho = obs["rho2"]
        vals = np.array([rho.evaluate(s.env()) for s in traj.states])
        rep.rho2_drift = float(np.max(np.abs(vals - vals[0])) / abs(vals[0]))
        rep.details["rho2_samples"] = vals
    return rep

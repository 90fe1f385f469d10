"""Grid Liouvillians, spectral and characteristic evolution of KvN states."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import flow
from .expr import Expr, as_expr
from .representations import (QLAMBDAP, QP, PhaseGrid, WaveFunction, density,
                              spectral_derivative)
from .state import coordinate_names, phi_names

# RK4 is stable on the imaginary axis up to |z| = 2 sqrt(2)
RK4_LIMIT = 2.8
DENSE_LIMIT = 64 * 64


@dataclass
class GridOperator:
    """Matrix-free linear operator on wavefunction amplitudes.

    ``spectral_bound`` is an upper estimate of the operator norm used to
    check the RK4 step size.
    """

    action: Callable[[np.ndarray], np.ndarray]
    grid: PhaseGrid
    metadata: dict = field(default_factory=dict)
    spectral_bound: float = math.inf

    def __call__(self, psi):
        if isinstance(psi, WaveFunction):
            if psi.grid.axes != self.grid.axes or psi.grid.tag != self.grid.tag:
                raise ValueError("wavefunction and operator live on different grids")
            return psi.with_amplitudes(self.action(psi.amplitudes))
        return self.action(np.asarray(psi, dtype=complex))

    def to_dense(self) -> np.ndarray:
        size = int(np.prod(self.grid.shape))
        if size > DENSE_LIMIT:
            raise ValueError("dense matrices are only built for grids up to 64 x 64 points")
        M = np.empty((size, size), dtype=complex)
        e = np.zeros(size, dtype=complex)
        for k in range(size):
            e[:] = 0
            e[k] = 1
            M[:, k] = self.action(e.reshape(self.grid.shape)).ravel()
        return M


def _periodicity_warnings(coeffs, grid) -> list:
    out = []
    for k, c in enumerate(coeffs):
        c = np.broadcast_to(c, grid.shape)
        for ax in range(len(grid.axes)):
            first = np.take(c, 0, axis=ax)
            last = np.take(c, -1, axis=ax)
            scale = np.max(np.abs(c)) or 1.0
            if np.max(np.abs(first - last)) > 0.25 * scale:
                out.append(f"coefficient {k} is not periodic along axis {ax}; "
                           "states must vanish near that boundary")
                break
    return out


def build_liouvillian(H: Expr, grid: PhaseGrid) -> GridOperator:
    """``calH psi = -i (d_p H . d_q psi - d_q H . d_p psi)`` on a (q, p) grid.

    The coefficients are gradients of ``H`` evaluated pointwise with jets;
    derivatives of ``psi`` are periodic spectral derivatives.
    """
    if grid.tag != QP:
        raise ValueError("build_liouvillian needs a (q, p) grid")
    n = grid.n
    names = phi_names(n)
    env = {k: v for k, v in zip(names, grid.coords(sparse=False))}
    J = as_expr(H).jet(env, names, order=1)
    grad = np.broadcast_to(J.grad, grid.shape + (2 * n,))
    # coefficient of d/dphi^a is omega^{ab} d_b H
    coeffs = [grad[..., n + i] for i in range(n)] + [-grad[..., i] for i in range(n)]
    coeffs = [np.ascontiguousarray(c) for c in coeffs]
    axes = grid.axes

    def action(a):
        out = np.zeros(a.shape, dtype=complex)
        for k, c in enumerate(coeffs):
            out += c * spectral_derivative(a, axes[k], k)
        return -1j * out

    bound = sum(float(np.max(np.abs(c))) * math.pi / ax.spacing for c, ax in zip(coeffs, axes))
    meta = {"H": repr(H), "representation": QP, "scheme": "periodic spectral, pointwise jets",
            "warnings": _periodicity_warnings(coeffs, grid)}
    return GridOperator(action, grid, meta, bound)


def build_mixed_operator(grid: PhaseGrid, m: float = 1.0, field=None,
                         potential: Expr | None = None) -> GridOperator:
    """KvN operator of ``p^2/2m + V(q)`` minimally coupled to ``field``, on a
    (q, lam_p) grid:

        (1/m) sum_i (-i d_{q_i} + (e/c) sum_j lam_{p_j} d_j A_i)(i d_{lam_i} - (e/c) A_i)
            - lam_p . grad V - e lam_p . grad Phi_s

    The two factors of each term commute, so their order is immaterial.
    """
    if grid.tag != QLAMBDAP:
        raise ValueError("build_mixed_operator needs a (q, lam_p) grid")
    n = grid.n
    qn = coordinate_names(n)
    co = grid.coords()
    qenv = dict(zip(qn, grid.coords()[:n]))
    lam_p = co[n:]
    shape = grid.shape
    A_vals, mult_q = [], []
    if field is not None:
        if field.n != n:
            raise ValueError("field dimension differs from grid")
        k = field.coupling
        for i, a in enumerate(field.components):
            A_vals.append(k * np.broadcast_to(a.evaluate(qenv), shape))
            s = 0.0
            for j, q in enumerate(qn):
                s = s + lam_p[j] * a.diff(q).evaluate(qenv)
            mult_q.append(k * np.broadcast_to(s, shape))
    else:
        A_vals = [np.zeros(shape)] * n
        mult_q = [np.zeros(shape)] * n
    pot = np.zeros(shape)
    scal = []
    if potential is not None:
        scal.append((1.0, as_expr(potential)))
    if field is not None and field.scalar is not None:
        scal.append((field.e, field.scalar))
    for w, V in scal:
        for j, q in enumerate(qn):
            pot = pot - w * lam_p[j] * V.diff(q).evaluate(qenv)
    pot = np.broadcast_to(pot, shape)
    axes = grid.axes

    def action(a):
        out = pot * a
        for i in range(n):
            chi = 1j * spectral_derivative(a, axes[n + i], n + i) - A_vals[i] * a
            out = out + (-1j * spectral_derivative(chi, axes[i], i) + mult_q[i] * chi) / m
        return out

    bound = float(np.max(np.abs(pot)))
    for i in range(n):
        bound += ((math.pi / axes[i].spacing + float(np.max(np.abs(mult_q[i]))))
                  * (math.pi / axes[n + i].spacing + float(np.max(np.abs(A_vals[i])))) / m)
    meta = {"representation": QLAMBDAP, "m": m, "scheme": "periodic spectral",
            "field": None if field is None else [repr(c) for c in field.components],
            "potential": None if potential is None else repr(potential)}
    return GridOperator(action, grid, meta, bound)


def evolve_spectral(op, psi: WaveFunction, t: float, dt: float) -> WaveFunction:
    """Integrate ``i d_t psi = calH psi`` with classical RK4.

    ``op`` is a :class:`GridOperator` or a callable ``t -> GridOperator`` for
    time-dependent generators.  The number of steps is ``ceil(|t| / dt)``
    with the step shortened to land on ``t``.
    """
    if t == 0:
        return psi.with_amplitudes(psi.amplitudes.copy())
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = max(1, int(math.ceil(abs(t) / dt - 1e-9)))
    h = t / steps
    static = isinstance(op, GridOperator)
    first = op if static else op(0.0)
    if abs(h) * first.spectral_bound > RK4_LIMIT:
        raise ValueError(
            f"time step {abs(h):.3g} violates the RK4 stability limit for this operator; "
            f"use dt <= {RK4_LIMIT / first.spectral_bound:.3g}")
    a = psi.amplitudes.copy()

    def f(tt, x):
        o = op if static else op(tt)
        return -1j * o.action(x)

    tt = 0.0
    for _ in range(steps):
        k1 = f(tt, a)
        k2 = f(tt + h / 2, a + (h / 2) * k1)
        k3 = f(tt + h / 2, a + (h / 2) * k2)
        k4 = f(tt + h, a + h * k3)
        a = a + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        tt += h
        if not np.all(np.isfinite(a)):
            raise FloatingPointError("spectral evolution produced non-finite amplitudes")
    return psi.with_amplitudes(a)


def evolve_characteristics(H: Expr, psi0, t: float, grid: PhaseGrid | None = None,
                           steps: int | None = None) -> WaveFunction:
    """``psi(phi, t) = psi0(flow_{-t}(phi))`` on a (q, p) grid.

    ``psi0`` may be a callable ``psi0(*coords)`` (evaluated exactly at the
    back-traced points) or a :class:`WaveFunction`, which is interpolated
    with fifth-order splines; points traced back out of the box read zero.
    """
    if isinstance(psi0, WaveFunction):
        grid = psi0.grid
    if grid is None or grid.tag != QP:
        raise ValueError("characteristics need a (q, p) grid")
    if steps is None:
        steps = max(1, int(math.ceil(abs(t) * 200)))
    pts = np.array([c.ravel() for c in grid.coords(sparse=False)])
    back = flow(H, pts, -t, steps) if t != 0 else pts
    if callable(psi0) and not isinstance(psi0, WaveFunction):
        vals = np.asarray(psi0(*back), dtype=complex)
    else:
        from scipy.ndimage import map_coordinates

        idx = np.array([(b - ax.min) / ax.spacing for b, ax in zip(back, grid.axes)])
        re = map_coordinates(psi0.amplitudes.real, idx, order=5, mode="grid-constant")
        im = map_coordinates(psi0.amplitudes.imag, idx, order=5, mode="grid-constant")
        vals = re + 1j * im
    return WaveFunction(grid, vals.reshape(grid.shape))


@dataclass
class PeakTrack:
    times: np.ndarray
    peaks: np.ndarray  # grid coordinates of the density maximum
    classical: np.ndarray
    cells: np.ndarray  # largest per-axis deviation in units of grid cells

    @property
    def max_cells(self) -> float:
        return float(np.max(self.cells))


def track_peak(H: Expr, grid: PhaseGrid, center, t: float, samples: int = 8,
               dt: float | None = None) -> PeakTrack:
    """Evolve a two-cell Gaussian with the spectral Liouvillian and compare
    the density maximum with the classical trajectory through ``center``."""
    from .representations import delta_surrogate

    op = build_liouvillian(H, grid)
    if dt is None:
        dt = 0.5 * RK4_LIMIT / op.spectral_bound
    psi = delta_surrogate(grid, center)
    pts = [ax.points() for ax in grid.axes]
    times = np.linspace(0.0, t, samples + 1)
    peaks, classical, cells = [], [], []
    x0 = np.asarray(center, dtype=float).reshape(-1, 1)
    for k, tk in enumerate(times):
        if k:
            psi = evolve_spectral(op, psi, tk - times[k - 1], dt)
        idx = np.unravel_index(np.argmax(density(psi)), grid.shape)
        peak = np.array([pts[i][j] for i, j in enumerate(idx)])
        cl = flow(H, x0, tk, max(1, int(math.ceil(abs(tk) * 400))))[:, 0]
        d = np.array([abs(_wrap(a - b, ax.length)) / ax.spacing
                      for a, b, ax in zip(peak, cl, grid.axes)])
        peaks.append(peak)
        classical.append(cl)
        cells.append(np.max(d))
    return PeakTrack(times, np.array(peaks), np.array(classical), np.array(cells))


def _wrap(d, L):
    return (d + L / 2) % L - L / 2

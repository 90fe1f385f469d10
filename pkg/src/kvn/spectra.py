"""Closed-form KvN and quantum spectra of the oscillator and the Landau problem.

KvN oscillator eigenfunctions in the (q, lam_p) representation are products
of Hermite functions of ``Z_pm = (q +- Delta lam_p) / sqrt(2)`` with width
``sigma0 = sqrt(Delta / (m omega))``.  Their eigenvalues ``N omega`` do not
depend on the action scale ``Delta``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .representations import QLAMBDAP, QP, Axis, PhaseGrid, WaveFunction, spectral_derivative


@dataclass(frozen=True)
class Units:
    m: float = 1.0
    e: float = 1.0
    c_light: float = 1.0
    hbar: float = 1.0
    B: float = 1.0
    omega: float = 1.0
    Delta: float = 1.0

    @property
    def larmor(self) -> float:
        """``omega = e B / (m c)``."""
        return self.e * self.B / (self.m * self.c_light)


def hermite_functions(n_max: int, z, sigma: float = 1.0) -> np.ndarray:
    """Normalised Hermite functions ``psi_0 .. psi_{n_max}`` of width ``sigma``.

    ``psi_n(z) = (sqrt(pi) 2^n n! sigma)^{-1/2} H_n(z/sigma) exp(-z^2 / 2 sigma^2)``,
    computed with the stable three-term recurrence.
    """
    u = np.asarray(z, dtype=float) / sigma
    out = np.empty((n_max + 1,) + u.shape)
    out[0] = np.pi ** -0.25 * np.exp(-u * u / 2) / math.sqrt(sigma)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * u * out[0]
    for k in range(1, n_max):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * u * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def hermite_function(n: int, z, sigma: float = 1.0) -> np.ndarray:
    return hermite_functions(n, z, sigma)[n]


# -- oscillator -------------------------------------------------------------

@dataclass(frozen=True)
class OscillatorEigenpair:
    N: int
    n: int
    Delta: float
    m: float
    omega: float

    @property
    def eigenvalue(self) -> float:
        return self.N * self.omega

    @property
    def sigma0(self) -> float:
        return math.sqrt(self.Delta / (self.m * self.omega))

    def wavefunction(self, q, lam_p):
        zp = (q + self.Delta * lam_p) / math.sqrt(2.0)
        zm = (q - self.Delta * lam_p) / math.sqrt(2.0)
        s = self.sigma0
        return hermite_function(self.n, zp, s) * hermite_function(self.n + self.N, zm, s)

    def grid(self, count: int = 256, support: float = 12.0) -> PhaseGrid:
        """Mixed grid sized to the state: ``+-support`` widths along q and lam_p."""
        s = self.sigma0
        return PhaseGrid((Axis.centered(support * s, count),
                          Axis.centered(support * s / self.Delta, count)), QLAMBDAP)


def kvn_oscillator(N: int, n: int, Delta: float = 1.0, m: float = 1.0,
                   omega: float = 1.0) -> OscillatorEigenpair:
    if int(N) != N or int(n) != n:
        raise ValueError("N and n must be integers")
    if Delta <= 0 or m <= 0 or omega <= 0:
        raise ValueError("Delta, m and omega must be positive")
    if n < max(0, -N):
        raise ValueError(f"need n >= max(0, -N) = {max(0, -N)}, got n = {n}")
    return OscillatorEigenpair(int(N), int(n), float(Delta), float(m), float(omega))


def oscillator_mixed_operator(grid: PhaseGrid, m: float = 1.0, omega: float = 1.0):
    from .expr import Var
    from .liouville import build_mixed_operator

    q = Var("q")
    return build_mixed_operator(grid, m=m, potential=0.5 * m * omega ** 2 * q * q)


def eigen_residual(op, psi: WaveFunction, eigenvalue: float) -> float:
    """``||op psi - E psi|| / ||psi||``."""
    r = op(psi) - psi * eigenvalue
    return r.norm() / psi.norm()


def oscillator_residual(pair: OscillatorEigenpair, count: int = 256, support: float = 12.0) -> float:
    grid = pair.grid(count, support)
    psi = grid.sample(pair.wavefunction)
    return eigen_residual(oscillator_mixed_operator(grid, pair.m, pair.omega), psi, pair.eigenvalue)


@dataclass
class PolarCheck:
    N: float
    residual: float
    single_valued: bool
    periodicity_defect: float
    jump: float


def oscillator_polar_check(N: float, m: float = 1.0, omega: float = 1.0, count: int = 128,
                           half_width: float = 10.0, tol: float = 1e-9) -> PolarCheck:
    """Apply ``-i (p/m d_q - m omega^2 q d_p)`` to ``F(r) exp(-i N theta)``.

    Polar variables: ``sqrt(m) omega q = r cos theta``, ``p / sqrt(m) = r sin theta``.
    For integer ``N`` the test function is the smooth polynomial form
    ``(X -+ iY)^|N| exp(-r^2/2)`` and the residual against ``N omega`` is
    computed with spectral derivatives.  For non-integer ``N`` the function
    has a branch cut; the check reports the jump across it.
    """
    Xs = math.sqrt(m) * omega
    Ys = 1.0 / math.sqrt(m)
    grid = PhaseGrid((Axis.centered(half_width / Xs, count), Axis.centered(half_width / Ys, count)), QP)
    q, p = grid.coords(sparse=False)
    X, Y = Xs * q, Ys * p
    r2 = X * X + Y * Y
    env = np.exp(-r2 / 2)
    integral = float(N).is_integer()
    if integral:
        k = int(N)
        base = (X - 1j * Y) if k >= 0 else (X + 1j * Y)
        psi = base ** abs(k) * env
    else:
        theta = np.arctan2(Y, X)
        psi = np.sqrt(r2) ** abs(N) * np.exp(-1j * N * theta) * env
    dq = spectral_derivative(psi, grid.axes[0], 0)
    dp = spectral_derivative(psi, grid.axes[1], 1)
    Hpsi = -1j * (p / m * dq - m * omega ** 2 * q * dp)
    resid = float(np.linalg.norm(Hpsi - N * omega * psi) / np.linalg.norm(psi))
    defect = abs(np.exp(-2j * np.pi * N) - 1.0)
    # jump across theta = pi (negative X axis) at radius 1
    th = np.pi - 1e-9
    above = np.exp(-1j * N * th)
    below = np.exp(-1j * N * (-th))
    jump = float(abs(above - below))
    return PolarCheck(float(N), resid, defect <= tol and jump <= 1e-6, float(defect), jump)


# -- Landau problem ----------------------------------------------------------

def landau_spectrum_quantum(n_max: int, p_z0: float = 0.0, units: Units = Units()) -> list:
    """``E_n = (e hbar B / m c)(n + 1/2) + p_z0^2 / 2m`` for ``n = 0 .. n_max``."""
    w = units.e * units.hbar * units.B / (units.m * units.c_light)
    return [w * (n + 0.5) + p_z0 ** 2 / (2 * units.m) for n in range(n_max + 1)]


def landau_kvn_eigenvalue(N: int, lambda_z0: float, p_z0: float, units: Units = Units()) -> float:
    return N * units.larmor + lambda_z0 * p_z0 / units.m


@dataclass(frozen=True)
class LandauLabels:
    N: int
    n: int
    lambda_y0: float
    p_y0: float
    lambda_z0: float
    p_z0: float


@dataclass
class LandauLevel:
    N: int
    eigenvalue: float
    labels: list
    degeneracy_labels: list
    certificate_spread: float


QUANTUM_DEGENERACY_LABELS = ["p_y0"]
KVN_DEGENERACY_LABELS = ["n", "lambda_y0", "p_y0", "lambda_z0*p_z0 at fixed product"]


def landau_spectrum_kvn(N_range: Iterable[int], lambda_z0: float, p_z0: float,
                        units: Units = Units(), samples: int = 3, seed: int = 0) -> list:
    """KvN Landau levels ``N omega + lambda_z0 p_z0 / m`` with a degeneracy certificate.

    For each ``N`` the certificate lists label tuples obtained by varying one
    degeneracy label at a time; ``certificate_spread`` is the largest
    deviation of their eigenvalues from the level (zero up to rounding).
    """
    rng = np.random.default_rng(seed)
    out = []
    for N in N_range:
        N = int(N)
        n0 = max(0, -N)
        base = LandauLabels(N, n0, 0.0, 0.0, lambda_z0, p_z0)
        tuples = [base]
        for _ in range(samples):
            tuples.append(LandauLabels(N, n0 + int(rng.integers(0, 5)), 0.0, 0.0, lambda_z0, p_z0))
            tuples.append(LandauLabels(N, n0, float(rng.normal()), 0.0, lambda_z0, p_z0))
            tuples.append(LandauLabels(N, n0, 0.0, float(rng.normal()), lambda_z0, p_z0))
            s = float(rng.uniform(0.25, 4.0))
            if lambda_z0 != 0 or p_z0 != 0:
                tuples.append(LandauLabels(N, n0, 0.0, 0.0, lambda_z0 * s, p_z0 / s))
        E = landau_kvn_eigenvalue(N, lambda_z0, p_z0, units)
        spread = max(abs(landau_kvn_eigenvalue(t.N, t.lambda_z0, t.p_z0, units) - E) for t in tuples)
        out.append(LandauLevel(N, E, tuples, list(KVN_DEGENERACY_LABELS), spread))
    return out


def certificate_json(levels: Sequence[LandauLevel], units: Units = Units()) -> str:
    doc = {
        "quantum_degeneracy_labels": QUANTUM_DEGENERACY_LABELS,
        "kvn_degeneracy_labels": KVN_DEGENERACY_LABELS,
        "levels": [
            {
                "N": lv.N,
                "eigenvalue": round(lv.eigenvalue, 12),
                "max_spread": lv.certificate_spread,
                "labels": [[t.n, round(t.lambda_y0, 12), round(t.p_y0, 12),
                            round(t.lambda_z0, 12), round(t.p_z0, 12)] for t in lv.labels],
            }
            for lv in levels
        ],
        "label_order": ["n", "lambda_y0", "p_y0", "lambda_z0", "p_z0"],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def landau_change_of_variables(x, lambda_px, p_y0: float, lambda_y0: float, units: Units = Units()):
    """``x' = x - (c/eB) p_y0``, ``lam' = lam_px + (c/eB) lambda_y0``."""
    k = units.c_light / (units.e * units.B)
    return x - k * p_y0, lambda_px + k * lambda_y0


def landau_change_of_variables_inverse(xp, lamp, p_y0: float, lambda_y0: float, units: Units = Units()):
    k = units.c_light / (units.e * units.B)
    return xp + k * p_y0, lamp - k * lambda_y0


def landau_reduced_operator(grid: PhaseGrid, lambda_y0: float, p_y0: float,
                            units: Units = Units(), lambda_z0: float = 0.0, p_z0: float = 0.0):
    """Operator on ``(x, lam_px)`` left after separating ``y`` and ``z``:

        (1/m) d_x d_lam + (1/m)(lambda_y0 + (eB/c) lam)(p_y0 - (eB/c) x) + lambda_z0 p_z0 / m
    """
    from .liouville import GridOperator

    if grid.tag != QLAMBDAP or grid.n != 1:
        raise ValueError("reduced Landau operator acts on a one-dof (q, lam_p) grid")
    u = units
    k = u.e * u.B / u.c_light
    x, lam = grid.coords()
    mult = (lambda_y0 + k * lam) * (p_y0 - k * x) / u.m + lambda_z0 * p_z0 / u.m
    mult = np.broadcast_to(mult, grid.shape)
    qa, la = grid.axes

    def action(a):
        return spectral_derivative(spectral_derivative(a, la, 1), qa, 0) / u.m + mult * a

    bound = (math.pi / qa.spacing) * (math.pi / la.spacing) / u.m + float(np.max(np.abs(mult)))
    return GridOperator(action, grid, {"kind": "landau-reduced"}, bound)


def landau_eigenfunction(labels: LandauLabels, units: Units = Units(), n_dof: int = 3) -> Callable:
    """Mixed-representation eigenfunction for ``A = (0, B x, 0)``.

    Returns ``f(x, y[, z], lam_px, lam_py[, lam_pz])``; the (x, lam_px) factor is
    ``psi_n(Z+) psi_{n+N}(Z-)`` in the shifted variables.
    """
    u = units
    om = u.larmor
    sigma = math.sqrt(u.Delta / (u.m * om))
    L = labels
    if L.n < max(0, -L.N):
        raise ValueError("need n >= max(0, -N)")

    def radial(x, lam):
        xp, lp = landau_change_of_variables(x, lam, L.p_y0, L.lambda_y0, u)
        zp = (xp + u.Delta * lp) / math.sqrt(2.0)
        zm = (xp - u.Delta * lp) / math.sqrt(2.0)
        return hermite_function(L.n, zp, sigma) * hermite_function(L.n + L.N, zm, sigma)

    if n_dof == 2:
        def f(x, y, lam_px, lam_py):
            return (np.exp(1j * (L.lambda_y0 * y - lam_py * L.p_y0)) / (2 * np.pi)) * radial(x, lam_px)
        return f

    def f(x, y, z, lam_px, lam_py, lam_pz):
        plane = np.exp(1j * (L.lambda_y0 * y - lam_py * L.p_y0)) * np.exp(1j * (L.lambda_z0 * z - lam_pz * L.p_z0))
        return plane / (2 * np.pi) * radial(x, lam_px)
    return f


def landau_eigenvalue_for(labels: LandauLabels, units: Units = Units(), n_dof: int = 3) -> float:
    return landau_kvn_eigenvalue(labels.N, labels.lambda_z0 if n_dof == 3 else 0.0,
                                 labels.p_z0 if n_dof == 3 else 0.0, units)


LANDAU_GRID_LIMIT = 1 << 24


def landau_grid(labels: LandauLabels, units: Units = Units(), count: int = 128, plane_count: int = 4,
                support: float = 12.0, n_dof: int = 3) -> tuple:
    """Mixed grid for the Landau eigenfunction, and labels snapped to grid harmonics.

    The plane-wave factors are periodic only for ``lambda_y0`` and ``p_y0`` (and the
    z labels) equal to multiples of the grid's fundamental frequencies; the
    returned labels are the nearest such values.  ``plane_count`` is doubled
    until every label lies below the Nyquist frequency of its axis.
    """
    u = units
    sigma = math.sqrt(u.Delta / (u.m * u.larmor))
    k = u.c_light / (u.e * u.B)
    Ly = Lz = 2 * np.pi
    Llam = 2 * np.pi
    snap = lambda v, L: round(v * L / (2 * np.pi)) * 2 * np.pi / L
    L = LandauLabels(labels.N, labels.n, snap(labels.lambda_y0, Ly), snap(labels.p_y0, Llam),
                     snap(labels.lambda_z0, Lz), snap(labels.p_z0, Llam))
    # plane-wave labels must sit strictly below the Nyquist frequency of their axis
    top = max(abs(L.lambda_y0), abs(L.p_y0), abs(L.lambda_z0), abs(L.p_z0))
    while plane_count <= 2 * top:
        plane_count *= 2
    size = count ** 2 * plane_count ** (2 * n_dof - 2)
    if size > LANDAU_GRID_LIMIT:
        raise ValueError(f"Landau grid would hold {size} points (limit {LANDAU_GRID_LIMIT}); "
                         "use smaller plane-wave labels or a smaller count")
    xc = k * L.p_y0
    lc = -k * L.lambda_y0
    hx = support * sigma
    hl = support * sigma / u.Delta
    x_ax = Axis(xc - hx, xc + hx, count)
    l_ax = Axis(lc - hl, lc + hl, count)
    y_ax = Axis(0.0, Ly, plane_count)
    ly_ax = Axis(0.0, Llam, plane_count)
    if n_dof == 2:
        axes = (x_ax, y_ax, l_ax, ly_ax)
    else:
        axes = (x_ax, y_ax, Axis(0.0, Lz, plane_count), l_ax, ly_ax, Axis(0.0, Llam, plane_count))
    return PhaseGrid(axes, QLAMBDAP), L


def landau_field(units: Units = Units(), n_dof: int = 3):
    from .expr import Var
    from .gauge_coupling import GaugeField

    comps = (0.0, units.B * Var("x"), 0.0)[:n_dof]
    return GaugeField(comps, e=units.e, c_light=units.c_light)


def landau_residual(labels: LandauLabels, units: Units = Units(), count: int = 128,
                    plane_count: int = 4, n_dof: int = 3) -> tuple:
    """Residual of the eigenfunction against the full mixed Landau operator.

    Returns ``(residual, eigenvalue, labels_used)``.
    """
    from .liouville import build_mixed_operator

    grid, L = landau_grid(labels, units, count, plane_count, n_dof=n_dof)
    psi = grid.sample(landau_eigenfunction(L, units, n_dof))
    op = build_mixed_operator(grid, m=units.m, field=landau_field(units, n_dof))
    E = landau_eigenvalue_for(L, units, n_dof)
    return eigen_residual(op, psi, E), E, L

"""Real-order Bessel functions, the quantum Aharonov-Bohm spectrum of a disc,
cylindrical phase-space coordinates and the classical flux-invariance check.

Zero labelling: for ``nu > 0`` the function ``J_nu`` vanishes at the origin and
that zero is counted as ``k = 1`` (``bessel_zero(1, 2)`` is 3.8317...).  For
``nu = 0`` there is no zero at the origin and ``k`` counts positive zeros.
Pass ``count_origin=False`` to always count positive zeros only.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import Expr, Var
from .liouville import GridOperator
from .representations import Axis, PhaseGrid, QP, spectral_derivative

SERIES_MAX_X = 12.0

# Lanczos approximation, g = 7, nine terms
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma(x: float) -> float:
    """Gamma function for real ``x`` (not a non-positive integer)."""
    x = float(x)
    if x <= 0 and x.is_integer():
        raise ValueError("gamma has poles at non-positive integers")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma(1.0 - x))
    x -= 1.0
    s = _LANCZOS[0]
    for i in range(1, len(_LANCZOS)):
        s += _LANCZOS[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2 * math.pi) * t ** (x + 0.5) * math.exp(-t) * s


def _series(nu: float, x: float) -> float:
    h = x / 2.0
    term = (h ** nu if nu else 1.0) / gamma(nu + 1.0)
    total = term
    h2 = h * h
    k = 0
    while True:
        k += 1
        term *= -h2 / (k * (k + nu))
        total += term
        if abs(term) < 1e-17 * max(abs(total), 1e-300) and k > h:
            return total


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(160)


def _gauss(f, a, b):
    t = 0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)
    return 0.5 * (b - a) * float(np.dot(_GL_WEIGHTS, f(t)))


def _integral(nu: float, x: float) -> float:
    out = _gauss(lambda t: np.cos(nu * t - x * np.sin(t)), 0.0, math.pi) / math.pi
    s = math.sin(nu * math.pi)
    if abs(s) > 1e-15:
        # integrand below exp(-45) beyond x sinh t = 45
        top = math.asinh(45.0 / x)
        out -= s / math.pi * _gauss(lambda t: np.exp(-x * np.sinh(t) - nu * t), 0.0, top)
    return out


def bessel_j(nu: float, x: float) -> float:
    """``J_nu(x)`` for real ``nu >= 0`` and ``x >= 0``.

    Power series up to ``x = 12``; beyond that the integral representation
    ``(1/pi) int_0^pi cos(nu t - x sin t) dt - (sin nu pi / pi) int_0^inf exp(-x sinh t - nu t) dt``.
    """
    nu, x = float(nu), float(x)
    if nu < 0:
        raise ValueError("negative orders are not supported")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0 if nu == 0 else 0.0
    if x <= SERIES_MAX_X:
        return _series(nu, x)
    return _integral(nu, x)


def bessel_j_integer_recurrence(n: int, x: float) -> float:
    """``J_n(x)`` for integer ``n`` by Miller's downward recurrence,
    normalised with ``J_0 + 2 sum J_{2k} = 1``."""
    if n < 0 or int(n) != n:
        raise ValueError("order must be a non-negative integer")
    if x == 0:
        return 1.0 if n == 0 else 0.0
    start = 2 * ((max(n, int(x)) + 15 + int(math.sqrt(40 * max(n, x)))) // 2)
    jp, j = 0.0, 1e-300
    norm = 0.0
    want = 0.0
    for k in range(start, 0, -1):
        jm = 2 * k / x * j - jp
        jp, j = j, jm
        if abs(j) > 1e250:
            j *= 1e-250
            jp *= 1e-250
            norm *= 1e-250
            want *= 1e-250
        if k - 1 == n:
            want = j
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2 * j
    norm += j
    return want / norm


def bessel_jp(nu: float, x: float) -> float:
    """``J'_nu = (J_{nu-1} - J_{nu+1}) / 2`` (``nu >= 1``)."""
    if nu < 1:
        raise ValueError("derivative identity needs nu >= 1")
    return 0.5 * (bessel_j(nu - 1, x) - bessel_j(nu + 1, x))


def _refine(nu, a, b, fa, fb, tol=1e-15):
    """Newton (nu >= 1) or secant steps kept inside the bracket [a, b]."""
    x = 0.5 * (a + b)
    prev, fprev = (a, fa) if abs(fa) < abs(fb) else (b, fb)
    for _ in range(100):
        fx = bessel_j(nu, x)
        if fx == 0:
            return x
        if (fx > 0) == (fa > 0):
            a, fa = x, fx
        else:
            b, fb = x, fx
        if nu >= 1:
            step = fx / bessel_jp(nu, x)
        else:
            denom = fx - fprev
            step = fx * (x - prev) / denom if denom else 0.0
        prev, fprev = x, fx
        nxt = x - step
        if not a < nxt < b or step == 0:
            nxt = 0.5 * (a + b)
        if abs(nxt - x) <= tol * max(1.0, abs(x)) or b - a <= tol * max(1.0, abs(x)):
            return nxt
        x = nxt
    return x


def positive_bessel_zeros(nu: float, count: int, x_max: float = 200.0) -> list:
    """First ``count`` positive zeros of ``J_nu`` by scanning from ``nu + 1`` in
    steps of ``pi/8`` and refining each bracketed sign change."""
    if count < 1:
        return []
    if nu < 0:
        raise ValueError("negative orders are not supported")
    zeros = []
    step = math.pi / 8
    # the first positive zero of J_nu lies beyond nu + 1
    a = nu + 1.0
    fa = bessel_j(nu, a)
    while len(zeros) < count:
        b = a + step
        if b > x_max:
            raise ValueError(f"only {len(zeros)} zeros of J_{nu:g} below x = {x_max:g}; "
                             f"raise x_max to reach zero number {count}")
        fb = bessel_j(nu, b)
        if fb == 0:
            zeros.append(b)
            b += 1e-12
            fb = bessel_j(nu, b)
        elif (fa > 0) != (fb > 0):
            zeros.append(_refine(nu, a, b, fa, fb))
        a, fa = b, fb
    return zeros


def bessel_zero(nu: float, k: int, count_origin: bool = True, x_max: float = 200.0) -> float:
    """Zero number ``k`` of ``J_nu``; see the module docstring for the labelling."""
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    if count_origin and nu > 0:
        if k == 1:
            return 0.0
        return positive_bessel_zeros(nu, k - 1, x_max)[-1]
    return positive_bessel_zeros(nu, k, x_max)[-1]


def bisection_zero(f, a: float, b: float, tol: float = 1e-13) -> float:
    fa = f(a)
    if fa * f(b) > 0:
        raise ValueError("interval does not bracket a sign change")
    while b - a > tol:
        mid = 0.5 * (a + b)
        fm = f(mid)
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def zeros_csv(rows: Sequence[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["nu", "k", "zero"])
    for nu, k, z in rows:
        w.writerow([f"{nu:.12g}", k, f"{z:.15g}"])
    return buf.getvalue()


# -- quantum spectrum ---------------------------------------------------------

@dataclass(frozen=True)
class ABUnits:
    hbar: float = 1.0
    mu: float = 1.0
    b: float = 1.0
    e: float = 1.0
    c_light: float = 1.0

    @property
    def h(self) -> float:
        return 2 * math.pi * self.hbar

    def flux_from_alpha(self, alpha: float) -> float:
        """``Phi_B`` with ``alpha = e Phi_B / (c h)``."""
        return alpha * self.c_light * self.h / self.e

    def alpha_from_flux(self, flux: float) -> float:
        return self.e * flux / (self.c_light * self.h)


def ab_order(m: int, alpha: float) -> float:
    """Bessel order ``|m - alpha|``; the radial equation depends on ``(m - alpha)^2``."""
    return abs(m - alpha)


def ab_quantum_spectrum(k: int, m: int, alpha: float = 0.0, p_z0: float = 0.0,
                        units: ABUnits = ABUnits()) -> float:
    """``E = hbar^2 a^2 / (2 mu b^2) + p_z0^2 / (2 mu)`` with ``a`` the zero
    number ``k`` of ``J_{|m - alpha|}`` (origin counted for positive order)."""
    nu = ab_order(m, alpha)
    z = bessel_zero(nu, k)
    if z == 0.0:
        raise ValueError("k = 1 labels the zero at the origin, which gives the trivial solution R = 0")
    return units.hbar ** 2 * z * z / (2 * units.mu * units.b ** 2) + p_z0 ** 2 / (2 * units.mu)


def ab_spectrum_set(alpha: float, ms: Sequence[int], ks: Sequence[int] = (1, 2, 3),
                    units: ABUnits = ABUnits()) -> list:
    """Sorted energies built from the first positive zeros for the given ``m`` values."""
    out = []
    for m in ms:
        nu = ab_order(m, alpha)
        for z in positive_bessel_zeros(nu, len(ks)):
            out.append(units.hbar ** 2 * z * z / (2 * units.mu * units.b ** 2))
    return sorted(out)


# -- cylindrical coordinates ----------------------------------------------------

@dataclass(frozen=True)
class CylState:
    rho: float
    phi: float
    z: float
    p_rho: float
    p_phi: float
    p_z: float


def cyl_transform(x, y, z, px, py, pz) -> CylState:
    rho = math.hypot(x, y)
    if rho == 0:
        raise ValueError("cylindrical coordinates are singular at rho = 0")
    phi = math.atan2(y, x) % (2 * math.pi)
    c, s = x / rho, y / rho
    return CylState(rho, phi, z, px * c + py * s, x * py - y * px, pz)


def cart_transform(cs: CylState) -> tuple:
    c, s = math.cos(cs.phi), math.sin(cs.phi)
    x, y = cs.rho * c, cs.rho * s
    px = cs.p_rho * c - cs.p_phi / cs.rho * s
    py = cs.p_rho * s + cs.p_phi / cs.rho * c
    return x, y, cs.z, px, py, cs.p_z


def chain_rule_matrix(cs: CylState) -> np.ndarray:
    """Rows: d/dx, d/dy, d/dp_x, d/dp_y; columns: d/drho, d/dphi, d/dp_rho, d/dp_phi."""
    r, f, pr, pf = cs.rho, cs.phi, cs.p_rho, cs.p_phi
    if r == 0:
        raise ValueError("chain-rule matrix is singular at rho = 0")
    c, s = math.cos(f), math.sin(f)
    return np.array([
        [c, -s / r, -pf * s / r ** 2, pf / r * c + pr * s],
        [s, c / r, pf * c / r ** 2, pf / r * s - pr * c],
        [0.0, 0.0, c, -r * s],
        [0.0, 0.0, s, r * c],
    ])


CYL_NAMES = ("rho", "phi", "z", "p_rho", "p_phi", "p_z")


def ab_field(flux: float, e: float = 1.0, c_light: float = 1.0):
    """Thin-solenoid potential ``A = Phi_B / (2 pi (x^2 + y^2)) (-y, x, 0)``."""
    from .gauge_coupling import GaugeField

    x, y = Var("x"), Var("y")
    r2 = x * x + y * y
    return GaugeField((-y * flux / (2 * math.pi) / r2, x * flux / (2 * math.pi) / r2, 0.0),
                      e=e, c_light=c_light)


def _cyl_gradient(f: Expr, cs: CylState) -> np.ndarray:
    env = dict(zip(CYL_NAMES, (cs.rho, cs.phi, cs.z, cs.p_rho, cs.p_phi, cs.p_z)))
    return np.asarray(f.jet(env, CYL_NAMES, order=1).grad, dtype=float)


def cartesian_route(f: Expr, cs: CylState, flux: float, mu: float = 1.0,
                    e: float = 1.0, c_light: float = 1.0) -> complex:
    """Minimally coupled Liouvillian applied to ``f`` through cartesian variables.

    Uses ``-i sum_i v_i (d_{q_i} + (e/c) sum_j d_j A_i d_{p_j})`` with
    ``v = (p - eA/c)/mu``, where the cartesian derivatives of ``f`` come from
    the chain-rule matrix.
    """
    g = _cyl_gradient(f, cs)
    M = chain_rule_matrix(cs)
    planar = M @ g[[0, 1, 3, 4]]
    d = {"x": planar[0], "y": planar[1], "px": planar[2], "py": planar[3],
         "z": g[2], "pz": g[5]}
    x, y, z, px, py, pz = cart_transform(cs)
    A = ab_field(flux, e, c_light)
    k = A.coupling
    q3 = (x, y, z)
    Aval = A.value(q3)
    J = A.jacobian(q3)
    v = (np.array([px, py, pz]) - k * Aval) / mu
    dq = np.array([d["x"], d["y"], d["z"]])
    dp = np.array([d["px"], d["py"], d["pz"]])
    return complex(-1j * float(v @ (dq + k * (J @ dp))))


def cylindrical_route(f: Expr, cs: CylState, shift: float, mu: float = 1.0) -> complex:
    """Free cylindrical Liouvillian with ``p_phi -> p_phi - shift`` in the coefficients:

        -(i/mu) [p_rho d_rho + (p_phi/rho^2) d_phi + p_z d_z + (p_phi^2/rho^3) d_p_rho]
    """
    g = _cyl_gradient(f, cs)
    pf = cs.p_phi - shift
    r = cs.rho
    return complex(-1j / mu * (cs.p_rho * g[0] + pf / r ** 2 * g[1] + cs.p_z * g[2] + pf ** 2 / r ** 3 * g[3]))


def random_test_function(rng: np.random.Generator) -> Expr:
    """Smooth random function of the six cylindrical variables."""
    rho, phi, z, pr, pf, pz = (Var(s) for s in CYL_NAMES)
    from .expr import cos, exp, sin

    a = rng.normal(size=8)
    m = int(rng.integers(1, 4))
    poly = a[0] + a[1] * pr + a[2] * pf + a[3] * pr * pf + a[4] * pz * pz
    ang = sin(m * phi + float(a[5])) + float(a[6]) * cos(phi)
    radial = exp(-(rho - 1.5) ** 2 + float(a[7]) * z / 4)
    return poly * ang * radial


def random_cyl_state(rng: np.random.Generator) -> CylState:
    return CylState(float(rng.uniform(0.5, 3.0)), float(rng.uniform(0, 2 * np.pi)),
                    float(rng.normal()), float(rng.normal()), float(rng.normal()), float(rng.normal()))


def operator_shift_residual(flux: float, samples: int = 50, seed: int = 0, mu: float = 1.0,
                            e: float = 1.0, c_light: float = 1.0) -> float:
    """Largest relative gap between the cartesian coupled operator and the free
    cylindrical operator with ``p_phi -> p_phi - e Phi_B / (2 pi c)``."""
    rng = np.random.default_rng(seed)
    shift = e * flux / (2 * math.pi * c_light)
    worst = 0.0
    for _ in range(samples):
        f = random_test_function(rng)
        cs = random_cyl_state(rng)
        a = cartesian_route(f, cs, flux, mu, e, c_light)
        b = cylindrical_route(f, cs, shift, mu)
        worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    return worst


def build_cyl_liouvillian(grid: PhaseGrid, flux: float, n: int, p_phi0: float,
                          lambda_z0: float = 0.0, p_z0: float = 0.0, mu: float = 1.0,
                          e: float = 1.0, c_light: float = 1.0, label_shifted: bool = True) -> GridOperator:
    """Radial operator on a ``(rho, p_rho)`` grid after separating ``phi`` and ``z``.

    The ansatz carries ``exp(i n phi)``, ``exp(i lambda_z0 z)`` and a delta at
    ``p_phi = p_phi0 + shift`` (``label_shifted``) or ``p_phi = p_phi0``, with
    ``shift = e Phi_B / (2 pi c)``.  The operator is

        -(i/mu) p_rho d_rho + P n / (mu rho^2) - (i / mu rho^3) P^2 d_p_rho + lambda_z0 p_z0 / mu

    with ``P`` the label minus the shift.
    """
    shift = e * flux / (2 * math.pi * c_light)
    label = p_phi0 + shift if label_shifted else p_phi0
    P = label - shift
    rho, pr = grid.coords()
    if np.any(rho <= 0):
        raise ValueError("radial grid must have rho > 0")
    ra, pa = grid.axes
    mult = np.broadcast_to(P * n / (mu * rho ** 2) + lambda_z0 * p_z0 / mu, grid.shape)
    c_rho = np.broadcast_to(-1j / mu * pr, grid.shape)
    c_pr = np.broadcast_to(-1j / mu * P ** 2 / rho ** 3, grid.shape)

    def action(a):
        return c_rho * spectral_derivative(a, ra, 0) + c_pr * spectral_derivative(a, pa, 1) + mult * a

    bound = (float(np.max(np.abs(c_rho))) * math.pi / ra.spacing
             + float(np.max(np.abs(c_pr))) * math.pi / pa.spacing + float(np.max(np.abs(mult))))
    return GridOperator(action, grid, {"kind": "cylindrical radial", "flux": flux, "label": label,
                                       "effective_p_phi": P}, bound)


def radial_grid(count: int = 64, rho_range=(0.5, 4.5), p_half: float = 4.0) -> PhaseGrid:
    return PhaseGrid((Axis(rho_range[0], rho_range[1], count), Axis.centered(p_half, count)), QP)


@dataclass
class InvarianceRow:
    alpha: float
    flux: float
    label_shift: float
    operator_residual: float
    radial_residual: float
    note: str = ("the label p_phi0 is a continuous, integrated-over eigenvalue label; "
                 "shifting it leaves the set of Liouvillian eigenvalues unchanged")


def ab_classical_invariance_report(alphas: Sequence[float], units: ABUnits = ABUnits(),
                                   samples: int = 50, seed: int = 0) -> list:
    rows = []
    grid = radial_grid(32)
    rng = np.random.default_rng(seed)
    R = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    for a in alphas:
        flux = units.flux_from_alpha(a)
        res = operator_shift_residual(flux, samples, seed, units.mu, units.e, units.c_light)
        free = build_cyl_liouvillian(grid, 0.0, 1, 0.7, 0.3, 0.2, units.mu, units.e, units.c_light)
        coupled = build_cyl_liouvillian(grid, flux, 1, 0.7, 0.3, 0.2, units.mu, units.e, units.c_light)
        rr = float(np.max(np.abs(free(R) - coupled(R))) / np.max(np.abs(free(R))))
        shift = units.e * flux / (2 * math.pi * units.c_light)
        rows.append(InvarianceRow(float(a), flux, shift, res, rr))
    return rows


def ab_table_csv(alphas: Sequence[float], ks: Sequence[int], ms: Sequence[int],
                 units: ABUnits = ABUnits(), p_z0: float = 0.0) -> str:
    """Columns ``alpha, k, m, E_quantum, E_classical_shift``; the classical
    shift column is the change of the Liouvillian eigenvalue, always zero."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "k", "m", "zero", "E_quantum", "E_classical_shift"])
    for a in alphas:
        for m in ms:
            for k in ks:
                z = bessel_zero(ab_order(m, a), k)
                E = ab_quantum_spectrum(k, m, a, p_z0, units) if z else float("nan")
                w.writerow([f"{a:.12g}", k, m, f"{z:.12g}", f"{E:.12g}", "0"])
    return buf.getvalue()

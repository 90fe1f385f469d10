import numpy as np
import pytest

from kvn.aharonov import ab_field
from kvn.expr import Var, parse
from kvn.gauge_coupling import (GaugeField, GaugeParam, couple_calH, couple_H, curlyA,
                                gauge_transform_field, gauge_transform_state,
                                generalized_two_field_coupling, kinetic, liouville_gauge_covariance,
                                minimal_coupling_calH, parse_scenario, pass_through_residual,
                                standard_two_fields, velocity_evolution_check)
from kvn.liouville import build_mixed_operator
from kvn.representations import QLAMBDAP, Axis, PhaseGrid, gaussian
from kvn.state import ExtendedState
from kvn.superspace import lift

from conftest import random_poly

XYZ = ("x", "y", "z")
x, y, z, q = Var("x"), Var("y"), Var("z"), Var("q")


def random_field(rng, n=3, e=None, c=None):
    names = XYZ[:n]
    comps = tuple(random_poly(rng, names, degree=3, terms=4) for _ in range(n))
    return GaugeField(comps, e=float(rng.uniform(0.5, 2)) if e is None else e,
                      c_light=float(rng.uniform(0.5, 2)) if c is None else c)


def random_state(rng, n=3):
    return ExtendedState(rng.uniform(-1.5, 1.5, 2 * n), rng.uniform(-1.5, 1.5, 2 * n))


def test_zero_field_leaves_H_unchanged(rng):
    H = kinetic(3, 1.3, x * y)
    A = GaugeField((0.0, 0.0, 0.0))
    s = random_state(rng)
    assert couple_H(H, A).evaluate(s.env()) == pytest.approx(H.evaluate(s.env()))
    lam, p = s.lam_body(), s.p
    assert couple_calH(H, GaugeField((0.0,) * 3), ExtendedState(s.phi, s.lam)) == pytest.approx(
        float(lift(H, s).calH.body.real))
    free = kinetic(3, 1.3)
    assert couple_calH(free, A, s) == pytest.approx(float(lam[:3] @ p) / 1.3)


def test_constant_field_H(rng):
    B, e, c, m = 1.7, 0.9, 1.1, 1.3
    A = GaugeField((0.0, B * x, 0.0), e=e, c_light=c)
    s = random_state(rng)
    X, Y, Z, PX, PY, PZ = s.phi
    want = (PX ** 2 + (PY - e * B * X / c) ** 2 + PZ ** 2) / (2 * m)
    assert couple_H(kinetic(3, m), A).evaluate(s.env()) == pytest.approx(want, rel=1e-14)


def test_solenoid_field_H_by_hand(rng):
    flux = 0.8
    A = ab_field(flux, e=1.2, c_light=0.7)
    H = couple_H(kinetic(3, 1.0), A)
    for _ in range(5):
        s = random_state(rng)
        X, Y, Z, PX, PY, PZ = s.phi
        r2 = X * X + Y * Y
        k = 1.2 / 0.7 * flux / (2 * np.pi * r2)
        want = ((PX + k * Y) ** 2 + (PY - k * X) ** 2 + PZ ** 2) / 2
        assert H.evaluate(s.env()) == pytest.approx(want, rel=1e-13)


def test_curly_A():
    A = GaugeField((1.0, 2.0, 3.0))
    np.testing.assert_allclose(curlyA(A, [0.3, 0.4, 0.5], [1, 2, 3]), 0.0)
    B = 1.5
    A = GaugeField((0.0, B * x, 0.0))
    lam_p = np.array([0.3, -0.4, 0.5])
    np.testing.assert_allclose(curlyA(A, lam_p, [0.2, 0.1, 0.0]), [0.0, -lam_p[0] * B, 0.0])


def test_constant_field_calH_expanded(rng):
    """(1/m)[lam_x p_x + (lam_y + k B lam_px)(p_y - k B x) + lam_z p_z]."""
    B, e, c, m = 1.7, 0.9, 1.1, 1.3
    k = e / c
    A = GaugeField((0.0, B * x, 0.0), e=e, c_light=c)
    for _ in range(10):
        s = random_state(rng)
        X, Y, Z, PX, PY, PZ = s.phi
        lx, ly, lz, lpx, lpy, lpz = s.lam
        want = (lx * PX + (ly + k * B * lpx) * (PY - k * B * X) + lz * PZ) / m
        assert couple_calH(kinetic(3, m), A, s) == pytest.approx(want, rel=1e-12, abs=1e-12)
        assert minimal_coupling_calH(A, s, m) == pytest.approx(want, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_superfield_route_equals_substitution_route(seed):
    rng = np.random.default_rng(seed)
    A = random_field(rng)
    m = float(rng.uniform(0.5, 2))
    H = kinetic(3, m, random_poly(rng, XYZ, degree=2, terms=2))
    Hc = couple_H(H, A)
    s = random_state(rng)
    a = couple_calH(H, A, s)
    b = lift(Hc, s).calH.body
    assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


@pytest.mark.parametrize("seed", range(10))
def test_paired_transformation_invariants(seed):
    rng = np.random.default_rng(100 + seed)
    A = random_field(rng)
    al = GaugeParam(random_poly(rng, XYZ, degree=3, terms=4), 3)
    s = random_state(rng)
    s2 = gauge_transform_state(s, al, A.e, A.c_light)
    A2 = gauge_transform_field(A, al)
    k = A.coupling
    q_ = s.q
    kin1 = s.p - k * A.value(q_)
    kin2 = s2.p - k * A2.value(q_)
    np.testing.assert_allclose(kin1, kin2, atol=1e-10)
    lam1 = s.lam_body()[:3] - k * curlyA(A, s.lam_body()[3:], q_)
    lam2 = s2.lam_body()[:3] - k * curlyA(A2, s2.lam_body()[3:], q_)
    np.testing.assert_allclose(lam1, lam2, atol=1e-10)
    # lam_p is never touched
    np.testing.assert_array_equal(s.lam_body()[3:], s2.lam_body()[3:])
    H = kinetic(3, 1.2)
    assert couple_calH(H, A, s) == pytest.approx(couple_calH(H, A2, s2), rel=1e-10, abs=1e-10)


def test_trivial_gauge_parameters(rng):
    s = random_state(rng)
    same = gauge_transform_state(s, GaugeParam(parse("2.5"), 3))
    np.testing.assert_array_equal(same.phi, s.phi)
    np.testing.assert_array_equal(same.lam, s.lam)
    lin = gauge_transform_state(s, GaugeParam(parse("x - 2*y + 3*z"), 3), e=2.0, c_light=1.0)
    np.testing.assert_allclose(lin.p - s.p, [2.0, -4.0, 6.0])
    np.testing.assert_allclose(lin.lam, s.lam)


def test_velocity_extra_term_example():
    A = GaugeField((0.0, x, 0.0))
    al = GaugeParam(x * x / 2, 3)
    # v = (p - A) = (1, 0, 0)
    s = ExtendedState(np.array([0.3, 0.2, 0.1, 1.0, 0.3, 0.0]), np.array([0.2, -0.1, 0.4, 0.3, 0.5, -0.2]))
    rep = velocity_evolution_check(A, al, s)
    np.testing.assert_allclose(rep.velocity, [1.0, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(rep.extra, [1.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(rep.extra_full, 0.0, atol=1e-10)
    zero = velocity_evolution_check(A, GaugeParam(parse("0"), 3), s)
    np.testing.assert_allclose(zero.extra, 0.0, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_velocity_extra_term_random(seed):
    rng = np.random.default_rng(200 + seed)
    A = random_field(rng)
    al = GaugeParam(random_poly(rng, XYZ, degree=3, terms=4), 3)
    V = random_poly(rng, XYZ, degree=2, terms=2)
    rep = velocity_evolution_check(A, al, random_state(rng), m=1.4, potential=V)
    assert rep.mismatch <= 1e-8
    assert np.max(np.abs(rep.extra_full)) <= 1e-8


def _mixed_grid(count=256, half=12.0):
    return PhaseGrid((Axis.centered(half, count), Axis.centered(half, count)), QLAMBDAP)


def test_covariance_trivial_gauge():
    g = _mixed_grid(64, 10.0)
    psi = gaussian(g, [0.3, 0.1], 1.0)
    A = GaugeField((0.1 * q,))
    assert liouville_gauge_covariance(psi, A, GaugeParam(parse("0", variables=["q"]), 1), dt=1e-3,
                                      steps=5) < 1e-14


def test_covariance_static_gauge_free_particle():
    g = _mixed_grid()
    psi = gaussian(g, [0.3, 0.1], 1.0)
    A = GaugeField((parse("0", variables=["q"]),))
    al = GaugeParam(0.05 * q * q + 0.02 * q ** 3, 1)
    assert liouville_gauge_covariance(psi, A, al, dt=1e-3, steps=100) <= 1e-6


def test_covariance_time_dependent_gauge():
    g = _mixed_grid(128, 10.0)
    psi = gaussian(g, [0.3, 0.1], 1.0)
    A = GaugeField((0.2 * q * q,), scalar=0.1 * q, e=1.1, c_light=0.9)
    al = GaugeParam(0.1 * q * q * Var("t") + 0.05 * q ** 3, 1)
    assert liouville_gauge_covariance(psi, A, al, dt=4e-4, steps=250) <= 1e-6


def test_standard_two_fields_reproduce_minimal_coupling():
    g = _mixed_grid(64, 8.0)
    A = GaugeField((0.3 * q * q - 0.1 * q,), e=1.2, c_light=0.8)
    Aq, Al = standard_two_fields(A)
    H2 = generalized_two_field_coupling(Aq, Al, g, m=1.3)
    H1 = build_mixed_operator(g, m=1.3, field=A)
    psi = gaussian(g, [0.2, -0.1], 0.8)
    assert H1(psi).distance(H2(psi)) <= 1e-12 * H1(psi).norm()


def test_pass_through():
    g = _mixed_grid(128, 10.0)
    psi = gaussian(g, [0.3, 0.1], 1.0)
    Aq, Al = standard_two_fields(GaugeField((0.2 * q * q,)))
    assert pass_through_residual(Aq, Al, parse("0", variables=["q"]), psi) < 1e-15
    assert pass_through_residual(Aq, Al, parse("0.2*q*q + 0.1*sin(q)"), psi) <= 1e-6
    general = pass_through_residual(parse("0.3*q*lam_p"), parse("0.1*q + 0.2*lam_p"),
                                    parse("0.2*q*lam_p + 0.1*q*q + 0.05*sin(lam_p)"), psi)
    assert general <= 1e-6


SCENARIO = """
[params]
a = 0.3
[units]
e = 1.2
c = 0.9
m = 1.1
[field]
A_x = a*y*z
A_y = x*x - z
A_z = x*y*y
V = 0.1*x*x
[gauge]
alpha = x*y*z + a*x**3
"""


def test_parse_scenario():
    sc = parse_scenario(SCENARIO)
    assert sc.field.n == 3
    assert sc.m == 1.1 and sc.field.e == 1.2 and sc.field.c_light == 0.9
    assert sc.field.components[0].evaluate({"x": 0.0, "y": 2.0, "z": 3.0}) == pytest.approx(1.8)


@pytest.mark.parametrize("bad", [
    SCENARIO + "\n[extra]\nk = 1\n",
    SCENARIO.replace("m = 1.1", "m = 1.1\nmass = 2"),
    SCENARIO.replace("A_z = x*y*y", "A_w = x"),
    "[units]\ne = 1\n",
    SCENARIO.replace("alpha = x*y*z + a*x**3", "alpha = import os"),
])
def test_parse_scenario_rejects(bad):
    with pytest.raises(ValueError):
        parse_scenario(bad)

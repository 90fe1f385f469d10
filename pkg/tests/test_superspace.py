import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from kvn.expr import Var
from kvn.state import ExtendedState, phi_names
from kvn.superspace import (GrassmannAlgebra, Superfield, berezin, ghost_algebra, gmul, lift,
                            superspace_algebra)

from conftest import ghost_state, random_poly

ALG = GrassmannAlgebra(["a", "b", "c", "d", "e"])


def brute_force_product(x, y):
    """Product of two elements by sorting generator lists with bubble-sort sign counting."""
    out = {}
    for ma, va in x.terms.items():
        for mb, vb in y.terms.items():
            seq = [i for i in range(ALG.size) if ma >> i & 1] + [i for i in range(ALG.size) if mb >> i & 1]
            if len(set(seq)) < len(seq):
                continue
            sign = 1
            s = list(seq)
            for i in range(len(s)):
                for j in range(len(s) - 1 - i):
                    if s[j] > s[j + 1]:
                        s[j], s[j + 1] = s[j + 1], s[j]
                        sign = -sign
            m = sum(1 << i for i in s)
            out[m] = out.get(m, 0.0) + sign * va * vb
    return out


def random_element(draw_coeffs, parity=None):
    terms = {}
    for m, v in zip(range(1 << ALG.size), draw_coeffs):
        k = bin(m).count("1")
        if parity is None or k % 2 == parity:
            terms[m] = v
    return ALG.zero() + type(ALG.zero())(ALG, terms)


coeffs = st.lists(st.floats(-3, 3, allow_nan=False), min_size=32, max_size=32)


@settings(max_examples=60, deadline=None)
@given(ca=coeffs, cb=coeffs)
def test_odd_elements_anticommute_and_square_to_zero(ca, cb):
    a = random_element(ca, parity=1)
    b = random_element(cb, parity=1)
    assert gmul(a, b).allclose(-gmul(b, a), atol=1e-9)
    assert gmul(a, a).allclose(ALG.zero(), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(ca=coeffs, cb=coeffs)
def test_product_matches_brute_force_sign_count(ca, cb):
    a = random_element(ca)
    b = random_element(cb)
    ref = brute_force_product(a, b)
    got = gmul(a, b)
    for m in set(ref) | set(got.terms):
        assert np.isclose(got.terms.get(m, 0.0), ref.get(m, 0.0), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(ca=coeffs, cb=coeffs, cc=coeffs)
def test_product_is_associative(ca, cb, cc):
    a, b, c = random_element(ca), random_element(cb), random_element(cc)
    assert ((a * b) * c).allclose(a * (b * c), atol=1e-8, rtol=1e-10)


def test_basic_signs():
    alg = superspace_algebra(1)
    th, tb = alg.gen("theta"), alg.gen("thetabar")
    assert (th * tb).coefficient("theta", "thetabar") == 1
    assert (tb * th).coefficient("theta", "thetabar") == -1
    assert (th * th).terms == {}
    c, d = alg.gen("c1"), alg.gen("c2")
    prod = (1 + th * c) * (1 + tb * d)
    # theta c thetabar d = -theta thetabar c d
    assert prod.coefficient("theta", "thetabar", "c1", "c2") == -1
    assert prod.coefficient("theta", "c1") == 1
    assert prod.coefficient("thetabar", "c2") == 1


def test_mismatched_algebras_rejected():
    with pytest.raises(ValueError):
        gmul(ghost_algebra(1).gen("c1"), ghost_algebra(2).gen("c1"))


def test_berezin_normalisation_and_lower_components():
    alg = superspace_algebra(1)
    th, tb = alg.gen("theta"), alg.gen("thetabar")
    k = 2.5
    assert berezin(1j * tb * th * k).body == pytest.approx(-k)
    assert berezin(th * alg.gen("c1")).terms == {}


def test_free_particle_lift():
    m = 2.0
    H = Var("p") * Var("p") / (2 * m)
    s = ExtendedState(np.array([0.4, 1.3]), np.array([0.7, -0.2]))
    res = lift(H, s)
    assert res.calH.body == pytest.approx(0.7 * 1.3 / m)
    assert res.value == pytest.approx(1.3 ** 2 / (2 * m))


def test_lift_of_coordinate_and_oscillator():
    s = ExtendedState(np.array([0.4, 1.3]), np.array([0.7, -0.2]))
    # lam_a w^{ab} d_b q = lam_p w^{pq} = -lam_p
    assert lift(Var("q"), s).calH.body == pytest.approx(0.2)
    m, w = 1.5, 0.8
    H = Var("p") ** 2 / (2 * m) + 0.5 * m * w * w * Var("q") ** 2
    want = 0.7 * 1.3 / m - m * w * w * (-0.2) * 0.4
    assert lift(H, s).calH.body == pytest.approx(want, rel=1e-13)


def test_lift_with_zero_ghosts_and_lam(rng):
    H = random_poly(rng, phi_names(2), degree=4)
    phi = rng.normal(size=4)
    s = ExtendedState(phi, np.zeros(4))
    res = lift(H, s)
    assert res.value == pytest.approx(float(H.evaluate(dict(zip(phi_names(2), phi)))))
    assert res.N.terms == {} and res.Nbar.terms == {} and res.calH.terms == {}


def test_superfield_of_kinetic_momentum():
    k = 0.7
    O = Var("py") - k * Var("x")
    s = ghost_state(np.random.default_rng(2), 2)
    alg = superspace_algebra(2)
    sf = Superfield.from_element(lift(O, s).element)
    lam = s.lam_body()
    # lam_y picks up + k lam_px, exactly as for p_y -> p_y - k x
    want_top = -1j * (lam[1] + k * lam[2])
    assert np.isclose(sf.top_coeff.body, want_top)
    assert sf.body == pytest.approx(s.phi[3] - k * s.phi[0])
    want_c = (s.c[3] - k * s.c[0])
    assert sf.theta_coeff.allclose(want_c)
    assert sf.element(alg).allclose(lift(O, s).element)


@pytest.mark.parametrize("seed", range(6))
def test_berezin_of_lift_matches_direct_formula(seed):
    """calH = lam_a w^{ab} d_b H + i cbar_a w^{ad} d_d d_b H c^b, computed with sympy."""
    rng = np.random.default_rng(seed)
    n = 2
    names = phi_names(n)
    H = random_poly(rng, names, degree=4, terms=8)
    s = ghost_state(rng, n)
    syms = sp.symbols(names)
    Hs = sp.sympify(repr(H).replace("^", "**"), locals=dict(zip(names, syms)))
    sub = dict(zip(syms, s.phi))
    g = np.array([float(sp.diff(Hs, a).subs(sub)) for a in syms])
    h = np.array([[float(sp.diff(Hs, a, b).subs(sub)) for b in syms] for a in syms])
    w = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    lam = s.lam_body()
    boson = float(lam @ w @ g)
    M = w @ h
    ghost = 0.0
    for a in range(2 * n):
        for b in range(2 * n):
            ghost = ghost + 1j * M[a, b] * (s.cbar[a] * s.c[b])
    got = lift(H, s).calH
    want = ghost + boson
    scale = max(1.0, want.max_abs())
    assert (got - want).max_abs() <= 1e-10 * scale

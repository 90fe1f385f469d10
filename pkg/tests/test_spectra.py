import math

import numpy as np
import pytest
from scipy.special import eval_hermite

from kvn.representations import QLAMBDAP, PhaseGrid
from kvn.spectra import (KVN_DEGENERACY_LABELS, QUANTUM_DEGENERACY_LABELS, LandauLabels, Units,
                         certificate_json, eigen_residual, hermite_functions, kvn_oscillator,
                         landau_change_of_variables, landau_change_of_variables_inverse, landau_eigenfunction,
                         landau_grid, landau_kvn_eigenvalue, landau_reduced_operator, landau_residual,
                         landau_spectrum_kvn, landau_spectrum_quantum, oscillator_polar_check,
                         oscillator_residual)


def test_hermite_functions_against_closed_form():
    z = np.linspace(-6, 6, 101)
    sigma = 0.7
    H = hermite_functions(12, z, sigma)
    u = z / sigma
    for n in range(13):
        want = eval_hermite(n, u) * np.exp(-u * u / 2) / math.sqrt(math.sqrt(math.pi) * 2 ** n
                                                                   * math.factorial(n) * sigma)
        np.testing.assert_allclose(H[n], want, atol=1e-12)


def test_hermite_functions_are_orthonormal():
    z = np.linspace(-15, 15, 3001)
    H = hermite_functions(20, z, 1.3)
    G = H @ H.T * (z[1] - z[0])
    np.testing.assert_allclose(G, np.eye(21), atol=1e-10)


@pytest.mark.parametrize("Delta", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("N", [-2, 0, 1, 3])
def test_oscillator_eigenpairs(Delta, N):
    pair = kvn_oscillator(N, max(0, -N) + 1, Delta=Delta, m=1.3, omega=0.8)
    assert pair.eigenvalue == pytest.approx(N * 0.8)
    assert oscillator_residual(pair, count=128) <= 1e-8


def test_oscillator_label_constraints():
    with pytest.raises(ValueError):
        kvn_oscillator(-2, 1)
    with pytest.raises(ValueError):
        kvn_oscillator(1.5, 0)
    with pytest.raises(ValueError):
        kvn_oscillator(1, 0, Delta=0.0)
    assert kvn_oscillator(-2, 2).n == 2


def test_zero_point_state_has_zero_eigenvalue():
    pair = kvn_oscillator(0, 0)
    assert pair.eigenvalue == 0.0
    g = pair.grid(128)
    psi = g.sample(pair.wavefunction)
    # psi_0(Z+) psi_0(Z-) is the product Gaussian in q and lam_p
    Q, L = g.coords()
    want = np.exp(-(Q ** 2 + L ** 2) / 2) / math.sqrt(math.pi)
    np.testing.assert_allclose(psi.amplitudes.real, want, atol=1e-14)


def test_polar_check_single_valuedness():
    for N in (-2, 0, 1, 3):
        rep = oscillator_polar_check(N)
        assert rep.single_valued and rep.residual <= 1e-8
    rep = oscillator_polar_check(0.5)
    assert not rep.single_valued
    assert rep.periodicity_defect == pytest.approx(2.0)


def test_quantum_landau_spectrum():
    u = Units(m=1.3, e=0.9, c_light=1.1, hbar=0.7, B=2.0)
    w = 0.9 * 0.7 * 2.0 / (1.3 * 1.1)
    E = landau_spectrum_quantum(5, p_z0=0.4, units=u)
    assert E[0] == pytest.approx(w / 2 + 0.16 / 2.6)
    np.testing.assert_allclose(np.diff(E), w)
    small = landau_spectrum_quantum(3, units=Units(B=1e-12))
    assert max(small) < 1e-11


def test_kvn_landau_degeneracy():
    u = Units(m=1.3, e=0.9, c_light=1.1, B=2.0)
    E = landau_kvn_eigenvalue(2, 0.6, 0.5, u)
    assert E == pytest.approx(2 * u.larmor + 0.3 / 1.3)
    assert landau_kvn_eigenvalue(2, 1.2, 0.25, u) == pytest.approx(E)
    assert landau_kvn_eigenvalue(0, 0.0, 3.0, u) == 0.0
    levels = landau_spectrum_kvn(range(-2, 3), 0.6, 0.5, u)
    assert [lv.N for lv in levels] == [-2, -1, 0, 1, 2]
    assert max(lv.certificate_spread for lv in levels) <= 1e-12
    assert len(KVN_DEGENERACY_LABELS) == 4 and len(QUANTUM_DEGENERACY_LABELS) == 1


def test_certificate_json_is_deterministic():
    levels = landau_spectrum_kvn(range(0, 3), 0.5, 1.0)
    a = certificate_json(levels)
    assert a == certificate_json(landau_spectrum_kvn(range(0, 3), 0.5, 1.0))
    assert '"label_order"' in a


def test_change_of_variables_round_trip():
    u = Units(e=1.2, B=0.8, c_light=0.9)
    x = np.linspace(-2, 2, 7)
    lam = np.linspace(-1, 3, 7)
    xp, lp = landau_change_of_variables(x, lam, 0.0, 0.0, u)
    np.testing.assert_array_equal(xp, x)
    np.testing.assert_array_equal(lp, lam)
    xp, lp = landau_change_of_variables(x, lam, 0.7, -0.4, u)
    back = landau_change_of_variables_inverse(xp, lp, 0.7, -0.4, u)
    np.testing.assert_allclose(back[0], x, atol=1e-15)
    np.testing.assert_allclose(back[1], lam, atol=1e-15)


@pytest.mark.parametrize("N,n", [(0, 0), (1, 1), (-1, 2), (2, 0)])
def test_reduced_operator_eigenfunctions(N, n):
    u = Units(m=1.2, e=0.9, c_light=1.1, B=1.5)
    L = LandauLabels(N, n, 1.0, 2.0, 1.0, -1.0)
    full, L = landau_grid(L, u, count=128, n_dof=2)
    g = PhaseGrid((full.axes[0], full.axes[2]), QLAMBDAP)
    f = landau_eigenfunction(L, u, n_dof=3)
    psi = g.sample(lambda x, lam: f(x, 0.0, 0.0, lam, 0.0, 0.0))
    op = landau_reduced_operator(g, L.lambda_y0, L.p_y0, u, L.lambda_z0, L.p_z0)
    E = landau_kvn_eigenvalue(N, L.lambda_z0, L.p_z0, u)
    assert eigen_residual(op, psi, E) <= 1e-8


def test_full_two_dof_landau_residual():
    r, E, L = landau_residual(LandauLabels(1, 0, 1.0, 1.0, 0.0, 0.0), Units(B=1.3), count=128, n_dof=2)
    assert r <= 1e-8
    assert E == pytest.approx(1.3)


def test_landau_grid_snaps_labels():
    _, L = landau_grid(LandauLabels(0, 0, 1.2, -0.7, 0.4, 2.6), count=16, n_dof=3)
    assert (L.lambda_y0, L.p_y0, L.lambda_z0, L.p_z0) == (1.0, -1.0, 0.0, 3.0)


def test_eigenfunction_label_constraint():
    with pytest.raises(ValueError):
        landau_eigenfunction(LandauLabels(-2, 1, 0, 0, 0, 0))


def test_plane_wave_labels_stay_below_nyquist():
    # p_y0 = 2 on a four-point plane-wave axis would sit on the Nyquist frequency
    r, _, L = landau_residual(LandauLabels(1, 0, 1.0, 2.0, 0.0, 0.0), count=64, plane_count=4, n_dof=2)
    assert L.p_y0 == 2.0 and r <= 1e-8


def test_landau_grid_size_guard():
    with pytest.raises(ValueError, match="limit"):
        landau_grid(LandauLabels(0, 0, 5.0, 0.0, 0.0, 0.0), count=128, n_dof=3)

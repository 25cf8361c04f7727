import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from gdm_rd.core import tensor_eigenvalues
from gdm_rd.errors import InvalidParams, ZeroTensor
from gdm_rd.physics import (DiffusionField, ReactionTerm, TensorParams, bessel_i, bessel_ratio,
                            constant_initial, diffusion_tensor, dti_water_tensor,
                            fractional_anisotropy, gaussian_initial, glioma_initial,
                            principal_direction, reaction_derivative, reaction_eval, tensor_fa,
                            water_tensor)


def _mp_ratio(M):
    return float(mpmath.besseli(2, M) / mpmath.besseli(0, M))


# water tensor --------------------------------------------------------------

def test_water_tensor_origin():
    w = water_tensor(np.array([0.0, 0.0]))
    np.testing.assert_allclose(w.matrix, 0.5 * np.eye(2), atol=1e-16)
    np.testing.assert_allclose(w.eigenvalues, [0.5, 0.5])


def test_water_tensor_off_axis():
    w = water_tensor(np.array([0.0, 10.0]))
    d = 0.25 - 0.25 * np.exp(-50.0)
    np.testing.assert_allclose(w.matrix, np.diag([0.5 - d, 0.5 + d]), atol=1e-15)
    np.testing.assert_allclose(np.abs(w.phi1), [0.0, 1.0], atol=1e-15)


@given(st.floats(-20, 20), st.floats(-20, 20))
def test_water_tensor_even(x, y):
    T = dti_water_tensor(np.array([[x, y], [-x, y], [x, -y]]))
    np.testing.assert_allclose(T[1], T[0], atol=1e-15)
    np.testing.assert_allclose(T[2], T[0], atol=1e-15)
    lam = tensor_eigenvalues(T[0])
    assert lam[1] >= 0.0


def test_eigenvectors_orthonormal():
    pts = np.random.default_rng(1).uniform(-20, 20, (50, 2))
    w = water_tensor(pts)
    V = w.eigenvectors
    np.testing.assert_allclose(np.einsum("nij,nik->njk", V, V), np.broadcast_to(np.eye(2), (50, 2, 2)),
                               atol=1e-14)
    Av = np.einsum("nij,nj->ni", w.matrix, w.phi1)
    np.testing.assert_allclose(Av, w.eigenvalues[:, :1] * w.phi1, atol=1e-14)


def test_principal_direction_rotated():
    th = 0.4
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    T = R @ np.diag([2.0, 0.5]) @ R.T
    phi = principal_direction(T)
    assert abs(phi @ R[:, 0]) == pytest.approx(1.0, abs=1e-14)


# fractional anisotropy -----------------------------------------------------

def test_fa_values():
    assert fractional_anisotropy(0.4, 0.4) == 0.0
    assert fractional_anisotropy(0.75, 0.25) == pytest.approx(0.5 / np.sqrt(0.625), rel=1e-15)
    assert fractional_anisotropy(1.0, 0.0) == 1.0


def test_fa_zero_tensor():
    with pytest.raises(ZeroTensor):
        fractional_anisotropy(0.0, 0.0)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(1e-3, 1e3))
def test_fa_scale_invariant_and_bounded(l1, l2, c):
    if l1 + l2 < 1e-6:
        return
    fa = fractional_anisotropy(l1, l2)
    assert 0.0 <= fa <= 1.0
    assert fractional_anisotropy(c * l1, c * l2) == pytest.approx(fa, rel=1e-12, abs=1e-15)


# Bessel --------------------------------------------------------------------

def test_bessel_ratio_zero():
    assert bessel_ratio(0.0) == 0.0


@pytest.mark.parametrize("M", [1e-3, 0.5, 1.0, 7.3, 19.9, 20.0, 20.1, 50.0, 300.0, 1e4])
def test_bessel_ratio_against_mpmath(M):
    assert bessel_ratio(M) == pytest.approx(_mp_ratio(M), rel=1e-10)


def test_bessel_ratio_large_argument_oracle():
    # dividing the two Hankel expansions gives I2/I0 = 1 - 2/M + 1/M^2 + O(M^-3)
    M = 50.0
    series = 1 - 2 / M + 1 / M ** 2
    assert bessel_ratio(M) == pytest.approx(series, abs=2 / M ** 3)
    assert bessel_ratio(M) == pytest.approx(_mp_ratio(M), abs=1e-8)


def test_bessel_i_against_mpmath():
    for nu in (0, 2):
        for x in (0.0, 1.0, 15.0, 30.0):
            ref = float(mpmath.besseli(nu, x))
            assert bessel_i(nu, x) == pytest.approx(ref, rel=1e-12)


def test_bessel_ratio_monotone_and_bounded():
    M = np.linspace(0, 100, 2001)
    q = bessel_ratio(M)
    assert np.all(q >= 0) and np.all(q < 1)
    assert np.all(np.diff(q) > 0)


def test_bessel_ratio_rejects_negative():
    with pytest.raises(ValueError):
        bessel_ratio(-1.0)


# diffusion tensor ----------------------------------------------------------

def test_params_validation():
    for bad in (dict(delta=0.0), dict(delta=1.5), dict(kappa=-1), dict(turning=0.0),
                dict(speed=0.0)):
        with pytest.raises(InvalidParams):
            TensorParams(**bad)


def test_isotropic_when_kappa_zero():
    pts = np.random.default_rng(2).uniform(-20, 20, (20, 2))
    p = TensorParams(kappa=0.0, speed=2.0, turning=4.0)
    A = diffusion_tensor(pts, p)
    np.testing.assert_allclose(A, np.broadcast_to(np.eye(2), A.shape), atol=1e-15)


def test_isotropic_at_origin():
    A = diffusion_tensor(np.array([0.0, 0.0]), TensorParams(kappa=30.0))
    np.testing.assert_allclose(A, np.eye(2), atol=1e-15)


def test_chained_oracle_kappa30():
    x = np.array([0.0, 10.0])
    d = 0.25 * np.exp(0.0) - 0.25 * np.exp(-50.0)
    l1, l2 = 0.5 + d, 0.5 - d  # eigenvector of l1 is e_y
    fa = (l1 - l2) / np.hypot(l1, l2)
    q = _mp_ratio(30.0 * fa)
    delta = 0.05
    iso = delta + (1 - delta) * (1 - q)
    expected = np.diag([iso, iso + 2 * (1 - delta) * q])
    A = diffusion_tensor(x, TensorParams(kappa=30.0, delta=delta))
    np.testing.assert_allclose(A, expected, rtol=1e-12, atol=1e-15)
    lam = tensor_eigenvalues(A)
    assert lam[0] / lam[1] == pytest.approx(expected[1, 1] / expected[0, 0], rel=1e-12)


@given(st.floats(0, 200), st.floats(0.01, 1.0), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_trace_conserved(kappa, delta, r, mu):
    pts = np.random.default_rng(int(kappa * 10)).uniform(-20, 20, (30, 2))
    A = diffusion_tensor(pts, TensorParams(kappa, delta, r, mu))
    np.testing.assert_allclose(np.trace(A, axis1=1, axis2=2), 2 * r * r / mu, rtol=1e-12)
    assert np.all(tensor_eigenvalues(A)[:, 1] > 0)
    np.testing.assert_allclose(A[:, 0, 1], A[:, 1, 0])


def test_pipeline_fa_of_A():
    pts = np.array([[0.0, 10.0]])
    assert tensor_fa(diffusion_tensor(pts, TensorParams(kappa=0.0)))[0] == pytest.approx(0, abs=1e-15)
    assert tensor_fa(diffusion_tensor(pts, TensorParams(kappa=10.0)))[0] > 0.5


def test_diffusion_field_wrappers():
    f = DiffusionField.constant(np.diag([2.0, 1.0]))
    assert f(np.zeros((3, 2))).shape == (3, 2, 2)
    lo, hi = f.eigenvalue_bounds(np.zeros((3, 2)))
    assert (lo, hi) == (1.0, 2.0)
    g = DiffusionField(lambda p, t: (1 + t) * np.broadcast_to(np.eye(2), (len(p), 2, 2)),
                       time_dependent=True)
    np.testing.assert_allclose(g(np.zeros((1, 2)), 2.0)[0], 3 * np.eye(2))
    dti = DiffusionField.dti(TensorParams(kappa=5.0))
    np.testing.assert_allclose(dti(np.array([[1.0, 2.0]])), diffusion_tensor(np.array([[1.0, 2.0]]),
                                                                             TensorParams(kappa=5.0)))


# reaction ------------------------------------------------------------------

def test_bistable_roots_and_value():
    F = ReactionTerm("bistable", 1.0, 0.1)
    np.testing.assert_allclose(reaction_eval(F, np.array([0.0, 0.1, 1.0])), 0.0, atol=1e-16)
    assert reaction_eval(F, 0.5) == pytest.approx(0.1, rel=1e-14)


def test_logistic_and_exponential():
    assert ReactionTerm("logistic", 2.0)(0.5) == pytest.approx(0.5)
    assert ReactionTerm("exponential", 3.0)(0.5) == pytest.approx(1.5)
    assert ReactionTerm("none").is_zero


def test_polynomial_custom():
    F = ReactionTerm("polynomial", coefficients=(1.0, 0.0, -2.0))
    assert F(3.0) == pytest.approx(-17.0)
    assert reaction_derivative(F, 3.0) == pytest.approx(-12.0)


def test_reaction_validation():
    with pytest.raises(InvalidParams):
        ReactionTerm("cubic")
    with pytest.raises(InvalidParams):
        ReactionTerm("bistable", alpha=1.2)


def test_derivative_matches_finite_differences():
    rng = np.random.default_rng(5)
    s = rng.uniform(-0.4, 1.4, 100)
    h = 1e-6
    for F in (ReactionTerm("bistable", 1.3, 0.2), ReactionTerm("logistic", 0.7)):
        fd = (F(s + h) - F(s - h)) / (2 * h)
        d = F.derivative(s)
        np.testing.assert_allclose(d, fd, rtol=1e-6, atol=1e-8)


def test_clamp_bounds_reaction():
    F = ReactionTerm("bistable").with_clamp(-0.5, 1.5)
    assert F(10.0) == F(1.5)
    assert F(-7.0) == F(-0.5)
    assert F.derivative(10.0) == 0.0
    assert F(0.5) == ReactionTerm("bistable")(0.5)


# initial data --------------------------------------------------------------

def test_glioma_peaks():
    assert glioma_initial(1.0, 3.0) == pytest.approx(0.8, abs=2e-3)
    assert glioma_initial(1.0, 3.0) > 0.8
    v = glioma_initial(10.0, -9.0)
    assert 0.75 <= v < 0.75 + 1e-3


def test_glioma_far_field():
    assert glioma_initial(-20.0, -20.0) < 1e-6


@pytest.mark.parametrize("x, y, amp", [(-3.0, -4.0, 0.6), (-5.0, 1.0, 0.5)])
def test_glioma_other_peaks(x, y, amp):
    assert glioma_initial(x, y) == pytest.approx(amp, abs=0.05)
    assert glioma_initial(x, y) >= amp


def test_simple_initial_data():
    g = gaussian_initial(0.05, (1.0, 2.0), 1.5)
    assert g(1.0, 2.0) == pytest.approx(0.05)
    np.testing.assert_array_equal(constant_initial(3.0)(np.zeros(4), np.zeros(4)), 3.0)

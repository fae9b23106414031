import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from mch_istx import kernels
from mch_istx._jit import USE_NUMBA
from mch_istx.contour import Contour, legendre_matrix, panel_inverse, panel_map
from mch_istx.spectral import _k

needs_numba = pytest.mark.skipif(not USE_NUMBA, reason="numba path disabled")


def cauchy_rows(ct, z, backend=None):
    arr = ct.arrays()
    z = np.atleast_1d(np.asarray(z, complex))
    return kernels.cauchy_matrix(z, -np.ones(len(z), int), np.zeros(len(z)), arr, ct.q,
                                 legendre_matrix(ct.q), backend=backend)


def log_cauchy(a, b, z):
    """(1/2 pi i) int_a^b ds / (s - z) for z off the segment."""
    return np.log((b - z) / (a - z)) / (2j * np.pi)


@pytest.mark.parametrize("z", [0.3 + 0.5j, 0.3 + 1e-3j, 0.3 - 1e-6j, 1.0 + 1e-4j, 4.0 + 2.0j, -1.02 + 0j])
def test_cauchy_affine_panel_constant_density(z):
    ct = Contour(16)
    ct.add_affine(-1.0, 1.0, "x")
    val = cauchy_rows(ct, z) @ np.ones(ct.n)
    assert abs(val[0] - log_cauchy(-1.0, 1.0, z)) < 1e-12


def test_cauchy_principal_value_on_panel():
    ct = Contour(12)
    ct.add_affine(-1.0, 1.0, "x")
    arr = ct.arrays()
    C = kernels.cauchy_matrix(arr["lam"], arr["pan"], arr["tloc"], arr, ct.q, legendre_matrix(ct.q))
    x = arr["lam"].real
    # PV int_{-1}^{1} s^2 ds / (s - x) = 2x + x^2 log((1 - x)/(1 + x))
    ref = (2 * x + x**2 * np.log((1 - x) / (1 + x))) / (2j * np.pi)
    np.testing.assert_allclose(C @ x**2, ref, atol=1e-12)


@pytest.mark.parametrize("z", [0.5 + 0.2j, 1e-3 + 1e-3j, 0.9 - 0.05j, -0.01 + 0j])
def test_cauchy_quartic_panel_singular_density(z):
    # lam = s^4 on [0, 1], density lam^(-1/4) = 1/s
    ct = Contour(16)
    ct.add_quartic(0.0, 1.0, 0.0, 1.0, "g")
    lam = ct.arrays()["lam"]
    val = cauchy_rows(ct, z) @ (lam.real ** -0.25)
    f = lambda s: 4 * s**2 / (s**4 - z)  # noqa: E731
    ref = (quad(lambda s: f(s).real, 0, 1, epsabs=1e-14, limit=200)[0]
           + 1j * quad(lambda s: f(s).imag, 0, 1, epsabs=1e-14, limit=200)[0]) / (2j * np.pi)
    assert abs(val[0] - ref) < 1e-10


def test_cauchy_closed_circle():
    ct = Contour(12)
    ct.add_circle(0.2, 0.1, "pole0", n_half=2)
    inside = cauchy_rows(ct, [0.2 + 0.01j, 0.25]) @ np.ones(ct.n)
    outside = cauchy_rows(ct, [0.5, 0.2 + 0.3j]) @ np.ones(ct.n)
    np.testing.assert_allclose(inside, 1.0, atol=1e-12)
    np.testing.assert_allclose(outside, 0.0, atol=1e-12)
    # residue theorem for 1/(lam - 0.2)
    lam = ct.arrays()["lam"]
    val = cauchy_rows(ct, [0.6]) @ (1 / (lam - 0.2))
    assert abs(val[0] - 1 / (0.2 - 0.6)) < 1e-12


def test_panel_inverse_roundtrip():
    ct = Contour(8)
    ct.add_affine(0.2, 0.9, "a")
    ct.add_quartic(1.0, -0.1, -1.0, 0.0, "q")
    ct.add_arc(0.3, 0.05, 1j, -0.5, 0.5, "c")
    t = np.array([-0.7, 0.1, 0.8])
    for k, par in zip(ct.kind, ct.param):
        lam = panel_map(k, par, t)[0]
        back = np.array([panel_inverse(k, par, z) for z in lam])
        np.testing.assert_allclose(back.real, t, atol=1e-12)
    p, tl = ct.locate(panel_map(ct.kind[0], ct.param[0], np.array([0.25]))[0][0])
    assert p == 0 and tl == pytest.approx(0.25)


def test_legendre_matrix_reproduces_polynomials():
    q = 10
    t, _ = np.polynomial.legendre.leggauss(q)
    f = 1 + t - 3 * t**5 + t**9
    coef = legendre_matrix(q) @ f
    assert np.allclose(np.polynomial.legendre.legval(0.37, coef), 1 + 0.37 - 3 * 0.37**5 + 0.37**9)


# ---------------------------------------------------------------------------
# numba and numpy paths agree


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 900), seed=st.integers(0, 2**16), uniform=st.booleans())
def test_exp_recursion_backends_agree(n, seed, uniform):
    rng = np.random.default_rng(seed)
    d = np.full(n, 0.97) if uniform else np.exp(-rng.uniform(0.0, 0.5, n))
    c = rng.normal(size=n)
    ref = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = d[i] * acc + c[i]
        ref[i] = acc
    for b in ("numpy", "numba"):
        np.testing.assert_allclose(kernels.exp_recursion(d, c, backend=b), ref, rtol=1e-11, atol=1e-11)


@needs_numba
def test_jost_backends_agree(tanh):
    # both columns on the cut, only the analytic one off it (the other is
    # exponentially unstable and never requested)
    xs = np.array([-5.0, 0.0, 7.0])
    for lam, cols in (([1.2, -3.0, 4.5], 3), ([0.3 + 0.4j, 0.0, -2 + 1j], 1)):
        lam = np.asarray(lam, complex)
        k = _k(1.0, lam, 1)
        a = kernels.jost_batch(tanh.x, tanh.m_coef(), 1.0, lam, k, tanh.x[0], xs, cols, backend="numba")
        b = kernels.jost_batch(tanh.x, tanh.m_coef(), 1.0, lam, k, tanh.x[0], xs, cols, backend="numpy")
        assert np.abs(a - b).max() < 1e-9 * max(1.0, np.abs(a).max())


@needs_numba
def test_cauchy_backends_agree(tanh_data):
    ct = tanh_data.contour
    arr = ct.arrays()
    L = legendre_matrix(ct.q)
    rows = np.arange(0, ct.n, 7)
    args = (arr["base"][rows], arr["pan"][rows], arr["tloc"][rows], arr, ct.q, L)
    a = kernels.cauchy_matrix(*args, toff=arr["off"][rows], backend="numba")
    b = kernels.cauchy_matrix(*args, toff=arr["off"][rows], backend="numpy")
    assert np.abs(a - b).max() < 1e-11 * max(1.0, np.abs(a).max())

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mch_istx.spectral import (N_MINUS, N_PLUS, Backgrounds, Orientation, Side, SpectralError,
                               SpectralPoint, branch_k, branch_nu, branch_omega,
                               dinv_expansion_at_zero, matrix_D, matrix_D_inv, phase_hat)

BG = Backgrounds(1.0, 2.0)


def continue_k(A, lam_end, n=4000):
    """Follow k = sqrt(lam^2 - 1/A^2) from k(0) = i/A along a path through
    the upper half plane, picking the root closest to the previous value."""
    path = np.concatenate([np.linspace(0, 1j, n // 2), 1j + np.linspace(0, 1, n // 2) * (lam_end - 1j)])
    k = 1j / A
    for z in path[1:]:
        r = np.sqrt(complex(z * z - 1 / A**2))
        k = r if abs(r - k) < abs(r + k) else -r
    return k


class TestBranches:
    def test_k_at_origin(self):
        assert branch_k(1, 0.0, BG) == pytest.approx(1j)
        assert branch_k(2, 0.0, BG) == pytest.approx(0.5j)

    def test_k_plus_side_on_cut(self):
        assert branch_k(1, 2.0, BG, Side.PLUS) == pytest.approx(np.sqrt(3), abs=1e-14)
        # independent continuation oracle reaching the cut from above
        assert branch_k(1, 2.0, BG, Side.PLUS) == pytest.approx(continue_k(1.0, 2.0 + 1e-12j), abs=1e-8)

    def test_k_on_imaginary_axis(self):
        assert branch_k(1, 3j, BG) == pytest.approx(1j * np.sqrt(10))
        assert branch_k(1, -3j, BG) == pytest.approx(branch_k(1, 3j, BG))

    def test_k_minus_side_flips_sign(self):
        assert branch_k(2, 1.0, BG, Side.MINUS) == pytest.approx(-branch_k(2, 1.0, BG, Side.PLUS))

    def test_k_on_left_arm_plus_side(self):
        k = branch_k(1, -2.0, BG, Side.PLUS)
        assert k == pytest.approx(continue_k(1.0, -2.0 + 1e-12j), abs=1e-8)

    def test_omega_and_nu_at_origin(self):
        assert branch_omega(+1, 2, 0.0, BG) == pytest.approx(1j / np.sqrt(2))
        assert branch_omega(-1, 2, 0.0, BG) == pytest.approx(1 / np.sqrt(2))
        assert branch_nu(-1, 1, 0.0, BG) == pytest.approx(1.0)
        assert branch_nu(+1, 1, 0.0, BG) == pytest.approx(np.exp(1j * np.pi / 4))

    def test_spectral_point_wrapper(self):
        assert branch_k(1, SpectralPoint(2.0, Side.PLUS), BG) == pytest.approx(np.sqrt(3))

    def test_errors(self):
        with pytest.raises(SpectralError, match="side required"):
            branch_k(1, 2.0, BG)
        with pytest.raises(SpectralError):
            branch_k(1, np.nan, BG)
        with pytest.raises(SpectralError):
            branch_k(1, 0.5, BG, Side.PLUS)
        with pytest.raises(SpectralError, match="branch point singular"):
            matrix_D_inv(1, 1.0, BG, Side.PLUS)
        with pytest.raises(SpectralError, match="phase singular at origin"):
            phase_hat(1.0, 0.0, 0.0, BG)
        with pytest.raises(SpectralError, match="positive"):
            Backgrounds(-1.0, 2.0)


class TestBackgrounds:
    def test_orientation_and_index(self):
        assert BG.orientation is Orientation.ASCENDING and BG.phase_index == 2
        d = Backgrounds(2.0, 1.0)
        assert d.orientation is Orientation.DESCENDING and d.phase_index == 1
        assert Backgrounds(1.0, 1.0).orientation is Orientation.EQUAL

    def test_cut_geometry(self):
        g = BG.cuts()
        assert g.sigma0 == ((-1.0, -0.5), (0.5, 1.0))
        assert g.branch_points == (-1.0, -0.5, 0.5, 1.0)
        assert Backgrounds(1.0, 1.0).cuts().sigma0 == ()


class TestDmat:
    def test_dinv_at_origin(self):
        np.testing.assert_allclose(matrix_D_inv(2, 0.0, BG), [[0, 1j], [1j, 0]], atol=1e-15)

    def test_dinv_normalization_at_infinity(self):
        # D^{-1} - N+ decays like 1/lam
        errs = [np.abs(matrix_D_inv(1, 1j * L, BG) - N_PLUS).max() * L for L in (1e3, 1e4, 1e5)]
        assert errs[-1] == pytest.approx(errs[-2], rel=1e-3)
        assert np.abs(matrix_D_inv(1, -1e6j, BG) - N_MINUS).max() < 1e-5

    def test_expansion_linear_term(self):
        for j, A in ((1, 1.0), (2, 2.0)):
            c0, c1 = dinv_expansion_at_zero(j, BG)
            np.testing.assert_allclose(c1, np.diag([0.5j * A, 0.5j * A]))
            np.testing.assert_allclose(c0, matrix_D_inv(j, 0.0, BG), atol=1e-15)
            h = 1e-4
            fd = (matrix_D_inv(j, h, BG) - matrix_D_inv(j, -h, BG)) / (2 * h)
            np.testing.assert_allclose(fd, c1, atol=1e-8)

    def test_phase_hat_example(self):
        # k2(1+) = sqrt(1 - 1/4)
        assert phase_hat(1.0, 0.0, 1.0, BG, Side.PLUS) == pytest.approx(1j * np.sqrt(0.75))


finite = st.floats(-6, 6, allow_nan=False)
off_axis = st.tuples(finite, finite).filter(lambda z: abs(z[1]) > 1e-3).map(lambda z: complex(*z))


@settings(max_examples=60, deadline=None)
@given(lam=off_axis, A1=st.floats(0.2, 5), A2=st.floats(0.2, 5))
def test_k_symmetries_property(lam, A1, A2):
    bg = Backgrounds(A1, A2)
    for j in (1, 2):
        k = branch_k(j, lam, bg)
        assert k.imag >= 0
        assert abs(k * k - (lam * lam - 1 / bg.A(j) ** 2)) < 1e-10 * (1 + abs(lam) ** 2)
        assert abs(branch_k(j, -lam, bg) - k) < 1e-12 * (1 + abs(k))
        assert abs(np.conj(branch_k(j, np.conj(lam), bg)) + k) < 1e-12 * (1 + abs(k))


@settings(max_examples=60, deadline=None)
@given(lam=off_axis, A=st.floats(0.2, 5))
def test_D_unimodular_and_inverse_property(lam, A):
    bg = Backgrounds(A, A)
    D = matrix_D(1, lam, bg)
    Di = matrix_D_inv(1, lam, bg)
    assert abs(np.linalg.det(D) - 1) < 1e-10
    np.testing.assert_allclose(D @ Di, np.eye(2), atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(lam=off_axis, A=st.floats(0.2, 5))
def test_omega_nu_squares_property(lam, A):
    bg = Backgrounds(A, A)
    for s in (+1, -1):
        w = branch_omega(s, 1, lam, bg)
        nu = branch_nu(s, 1, lam, bg)
        assert abs(nu * nu - w) < 1e-11 * (1 + abs(w))
        target = lam - 1 / A if s > 0 else lam + 1 / A
        assert abs(w * w - target) < 1e-11 * (1 + abs(target))

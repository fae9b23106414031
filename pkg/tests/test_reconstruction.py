import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mch_istx.reconstruction import (BAND, MeshCache, ReconstructionError, band_of, reconstruct_point,
                                     reconstruct_profile, sweep, time_coefficient,
                                     ux_via_phase_derivative)
from mch_istx.rhp import build_rhdata
from mch_istx.solver import SmallLambdaCoeffs, small_lambda_coeffs, solve_rhp
from mch_istx.spectral import Backgrounds

BG = Backgrounds(1.0, 2.0)


@settings(max_examples=60, deadline=None)
@given(a1=st.floats(1e-3, 1e3), a2=st.floats(-5, 5), a3=st.floats(-5, 5), y=st.floats(-20, 20),
       t=st.floats(0, 2))
def test_point_formulas_property(a1, a2, a3, y, t):
    x, u, ux = reconstruct_point(SmallLambdaCoeffs(a1, a2, a3), y, t, BG)
    assert x == pytest.approx(y - 2 * np.log(a1) + 4.0 * t)
    assert u + ux == pytest.approx(2 * a3 / a1, abs=1e-9 * (1 + abs(a3 / a1)))
    assert u - ux == pytest.approx(2 * a1 * a2, abs=1e-9 * (1 + abs(a1 * a2)))


def test_time_coefficient_follows_orientation():
    assert time_coefficient(Backgrounds(1.0, 2.0)) == 4.0
    assert time_coefficient(Backgrounds(2.0, 1.0)) == 4.0
    assert time_coefficient(Backgrounds(3.0, 1.0)) == 9.0
    assert time_coefficient(Backgrounds(1.0, 3.0)) == 9.0


def test_constant_background_moves_with_speed(const, const_data):
    A = const.bg.A1
    for y, t in ((0.0, 0.0), (2.0, 0.5), (-3.0, 1.0)):
        c = small_lambda_coeffs(solve_rhp(y, t, const_data))
        x, u, ux = reconstruct_point(c, y, t, const.bg)
        assert x == pytest.approx(y + A * A * t, abs=1e-8)
        assert u == pytest.approx(A, abs=1e-8) and abs(ux) < 1e-8


def test_tanh_sweep_matches_profile(tanh):
    ys = np.linspace(-4, 4, 9)
    rec = sweep(tanh, ys, 0.0)
    assert not rec.failures
    err = np.abs(rec.u_hat - tanh.exact(rec.x_of_y)[0])
    assert err.max() < 1e-4
    assert np.all(np.diff(rec.x_of_y) > 0)
    assert np.all(rec.ux_hat > 0)     # u0' > 0 across the step
    np.testing.assert_allclose(rec.resample(rec.x_of_y[2:5]), rec.u_hat[2:5])
    assert np.isnan(rec.resample([100.0])[0])


def test_ux_from_mixed_derivative(tanh):
    d = build_rhdata(tanh, y_max=5.0, t_max=0.01)
    h = 1e-3
    ln = np.empty((3, 3))
    for i, t in enumerate((0.0, h, 2 * h)):
        for j, y in enumerate((-h, 0.0, h)):
            ln[i, j] = np.log(small_lambda_coeffs(solve_rhp(y, t, d)).a1_hat)
    _, _, ux = reconstruct_point(small_lambda_coeffs(solve_rhp(0.0, h, d)), 0.0, h, tanh.bg)
    assert abs(ux_via_phase_derivative(ln, h, h, tanh.bg) - ux) < 1e-3


def test_errors():
    with pytest.raises(ReconstructionError):
        reconstruct_point(SmallLambdaCoeffs(-1.0, 0.5, 0.5), 0.0, 0.0, BG)
    with pytest.raises(ReconstructionError):
        ux_via_phase_derivative(np.zeros((3, 3)), 0.0, 1e-3, BG)
    with pytest.raises(ReconstructionError):
        ux_via_phase_derivative(np.zeros((2, 3)), 1e-3, 1e-3, BG)
    folded = [SmallLambdaCoeffs(1.0, 0.5, 0.5), SmallLambdaCoeffs(np.exp(2.0), 0.5, 0.5)]
    with pytest.raises(ReconstructionError, match="parametric fold"):
        reconstruct_profile(folded, [0.0, 1.0], 0.0, BG)


def test_failed_points_are_kept_as_nan():
    c = [SmallLambdaCoeffs(1.0, 0.5, 0.5), None, SmallLambdaCoeffs(1.0, 0.5, 0.5)]
    rec = reconstruct_profile(c, [0.0, 1.0, 2.0], 0.0, BG)
    assert np.isnan(rec.x_of_y[1]) and rec.valid().sum() == 2


def test_band_cache(tanh):
    assert band_of(0.0) == BAND and band_of(5.0) == BAND and band_of(-5.2) == 2 * BAND
    cache = MeshCache(tanh)
    assert cache.get(1.0) is cache.get(-4.0)
    assert cache.get(7.0).y_max == 10.0


@pytest.mark.slow
def test_parallel_sweep_matches_serial(tanh):
    ys = np.array([-1.0, 0.0, 2.0])
    a = sweep(tanh, ys, workers=1)
    b = sweep(tanh, ys, workers=2)
    np.testing.assert_allclose(a.u_hat, b.u_hat, rtol=0, atol=1e-13)

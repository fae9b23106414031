"""Parametric reconstruction (x(y), u(y), u_x(y)) from the small-lam
coefficients of the RH solution."""
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .rhp import build_rhdata
from .solver import RHSolverError, SmallLambdaCoeffs, solve_rhp, small_lambda_coeffs
from .spectral import Orientation


class ReconstructionError(ValueError):
    pass


def time_coefficient(bg):
    """A_J^2 with J the phase background (A1 for descending data)."""
    return bg.A(bg.phase_index) ** 2


def reconstruct_point(c, y, t, bg):
    """(x, u, u_x) from one coefficient triple."""
    a1, a2, a3 = c.a1_hat, c.a2_hat, c.a3_hat
    if not a1 > 0:
        raise ReconstructionError("a1_hat must be positive")
    x = y - 2.0 * math.log(a1) + time_coefficient(bg) * t
    return x, a1 * a2 + a3 / a1, -a1 * a2 + a3 / a1


@dataclass
class Reconstruction:
    t: float
    y: np.ndarray
    x_of_y: np.ndarray
    u_hat: np.ndarray
    ux_hat: np.ndarray
    orientation: Orientation
    residual: np.ndarray = None
    failures: list = field(default_factory=list)

    def valid(self):
        return np.isfinite(self.x_of_y)

    def interpolant(self):
        ok = self.valid()
        return PchipInterpolator(self.x_of_y[ok], self.u_hat[ok], extrapolate=False)

    def resample(self, x):
        """u on an Eulerian grid by monotone cubic interpolation (nan outside)."""
        return self.interpolant()(np.asarray(x, float))

    def to_csv_rows(self):
        return np.column_stack([self.y, self.x_of_y, self.u_hat, self.ux_hat])


def reconstruct_profile(coeffs, y, t, bg):
    """Apply reconstruct_point over the grid; entries of ``coeffs`` may be
    None for failed solves.  Raises on a fold of x(y)."""
    y = np.asarray(y, float)
    x = np.full(len(y), np.nan)
    u = np.full(len(y), np.nan)
    ux = np.full(len(y), np.nan)
    for i, c in enumerate(coeffs):
        if c is not None:
            x[i], u[i], ux[i] = reconstruct_point(c, y[i], t, bg)
    ok = np.isfinite(x)
    if np.any(np.diff(x[ok]) <= 0):
        j = np.nonzero(np.diff(x[ok]) <= 0)[0][0]
        raise ReconstructionError(f"parametric fold near y={y[ok][j]:g}")
    return Reconstruction(float(t), y, x, u, ux, bg.orientation)


def ux_via_phase_derivative(ln_a1, hy, ht, bg):
    """-(1/A_J) d^2/dtdy ln a1 from a 3x3 stencil ln_a1[i_t, i_y]."""
    if hy <= 0 or ht <= 0:
        raise ReconstructionError("stencil spacing must be positive")
    f = np.asarray(ln_a1, float)
    if f.shape != (3, 3):
        raise ReconstructionError("stencil must be 3x3")
    mixed = (f[2, 2] - f[2, 0] - f[0, 2] + f[0, 0]) / (4 * hy * ht)
    return -mixed / bg.A(bg.phase_index)


# ---------------------------------------------------------------------------
# sweeps


BAND = 5.0


def band_of(y):
    return BAND * max(1, math.ceil(abs(y) / BAND - 1e-12))


def default_workers():
    try:
        return max(1, int(os.environ.get("MCH_ISTX_WORKERS", "1")))
    except ValueError:
        return 1


class MeshCache:
    """RH data per |y| band, built lazily; the y-independent Cauchy
    matrices are cached inside each RHData."""

    def __init__(self, p, t_max=0.0, **mesh):
        self.p = p
        self.t_max = t_max
        self.mesh = mesh
        self._data = {}
        self._disc = None

    def get(self, y):
        b = band_of(y)
        if b not in self._data:
            kw = dict(self.mesh)
            if self._disc is not None:
                kw.setdefault("discrete", self._disc)
            d = build_rhdata(self.p, y_max=b, t_max=self.t_max, **kw)
            self._disc = list(d.discrete)
            self._data[b] = d
        return self._data[b]


def solve_point(cache, y, t, tol=1e-6):
    """Returns (coeffs or None, jump residual, error message)."""
    try:
        sol = solve_rhp(y, t, cache.get(y), tol=tol)
        return small_lambda_coeffs(sol), sol.jump_residual, ""
    except RHSolverError as exc:
        return None, np.nan, str(exc)


def _sweep_chunk(args):
    p, ys, t, mesh, tol = args
    cache = MeshCache(p, t, **mesh)
    return [solve_point(cache, y, t, tol) for y in ys]


def sweep(p, ys, t=0.0, tol=1e-6, workers=None, cache=None, **mesh):
    """Solve at every y (fixed t) and reconstruct.  Failed points are kept
    as nan with their messages in ``failures``."""
    ys = np.asarray(ys, float)
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(ys) > 1:
        # contiguous chunks keep band meshes mostly private to one worker
        chunks = np.array_split(np.arange(len(ys)), workers)
        jobs = [(p, ys[c], t, mesh, tol) for c in chunks if len(c)]
        with ProcessPoolExecutor(workers) as ex:
            out = [r for part in ex.map(_sweep_chunk, jobs) for r in part]
    else:
        cache = cache or MeshCache(p, t, **mesh)
        out = [solve_point(cache, y, t, tol) for y in ys]
    coeffs = [o[0] for o in out]
    rec = reconstruct_profile(coeffs, ys, t, p.bg)
    rec.residual = np.array([o[1] for o in out])
    rec.failures = [(float(y), o[2]) for y, o in zip(ys, out) if o[0] is None]
    return rec


__all__ = ["Reconstruction", "ReconstructionError", "SmallLambdaCoeffs", "reconstruct_point",
           "reconstruct_profile", "sweep", "ux_via_phase_derivative", "MeshCache"]

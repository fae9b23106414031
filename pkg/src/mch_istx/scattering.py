"""Jost solutions, scattering matrix, reflection coefficient and the discrete
spectrum for a sampled profile."""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .kernels import jost_batch
from .profiles import exp_convolutions, tail_integrals
from .spectral import Orientation, Side, SpectralError, _dinv, _k


class ScatteringError(RuntimeError):
    pass


JOST_RTOL = 1e-11
# graded contour nodes come within ~1e-12 of a branch point; the ODE stays
# accurate there, only the exact branch point is excluded
JOST_EXCLUSION = 1e-14
# smallest |s11| / (|Phi_1^(1)| |Phi_2^(2)|) accepted at the matching point
MATCH_COND_MIN = 1e-13


def _as_arrays(lam, side):
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    side = np.broadcast_to(np.asarray(side, dtype=int), lam.shape).copy()
    if not np.all(np.isfinite(lam)):
        raise SpectralError("spectral parameter must be finite")
    return lam, side


def _check_branch(bg, lam):
    for A in (bg.A1, bg.A2):
        if np.any(np.minimum(abs(lam - 1 / A), abs(lam + 1 / A)) < JOST_EXCLUSION):
            raise SpectralError("branch point singular")


def _on_cut(A, lam):
    return (lam.imag == 0) & (np.abs(lam.real) >= 1 / A)


def _sides_for(A, lam, side):
    """Side to use for background A: keep the requested side on its cut,
    OFF elsewhere."""
    return np.where(_on_cut(A, lam), side, 0)


def jost_tilde(p, j, lam, x_eval, side=Side.OFF, t=0.0, cols=3, rtol=None):
    """Gauge-transformed Jost solution of background j at the points x_eval.

    Returns an array (n_lam, n_x, 2, 2).  Columns not requested by ``cols``
    (bit mask) are returned as NaN.  ``rtol`` defaults to the module-level
    JOST_RTOL, read at call time so a driver can tighten it.
    """
    rtol = JOST_RTOL if rtol is None else rtol
    lam, side = _as_arrays(lam, side)
    _check_branch(p.bg, lam)
    A = p.bg.A(j)
    s = _sides_for(A, lam, side)
    k = _k(A, lam, s)
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    if np.any(x_eval < p.x[0]) or np.any(x_eval > p.x[-1]):
        raise ScatteringError("evaluation point outside the profile grid")
    order = np.argsort(x_eval) if j == 1 else np.argsort(-x_eval)
    start = p.x[0] if j == 1 else p.x[-1]
    try:
        raw = jost_batch(p.x, p.m_coef(), A, lam, k, start, x_eval[order], cols=cols, rtol=rtol)
    except RuntimeError as exc:
        raise ScatteringError(str(exc)) from exc
    out = np.empty((len(lam), len(x_eval), 2, 2), dtype=complex)
    out[:, order] = raw.reshape(len(lam), len(x_eval), 2, 2)
    if not cols & 1:
        out[..., :, 0] = np.nan
    if not cols & 2:
        out[..., :, 1] = np.nan
    return out


def phase_p(p, j, lam, x, side=Side.OFF, t=0.0):
    """p_j(x, t, lam) = i A_j k_j ( int_{(-1)^j inf}^x (m - A_j) / (2 A_j) + x/2
    - t (1/lam^2 + A_j^2/2) ), shape (n_lam, n_x)."""
    lam, side = _as_arrays(lam, side)
    A = p.bg.A(j)
    k = _k(A, lam, _sides_for(A, lam, side))
    ti = tail_integrals(p)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    integ = ti.left(x) if j == 1 else -ti.right(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        tt = np.where(lam == 0, 0.0, t * (1 / lam**2 + A * A / 2))
    if t != 0 and np.any(lam == 0):
        raise SpectralError("phase singular at origin")
    return 1j * A * k[:, None] * (integ[None, :] / (2 * A) + x[None, :] / 2 - tt[:, None])


def jost(p, j, lam, x_eval, side=Side.OFF, t=0.0, cols=3):
    """Phi_j = D_j^{-1} tilde-Phi_j exp(-p_j sigma3), shape (n_lam, n_x, 2, 2)."""
    lam, side = _as_arrays(lam, side)
    A = p.bg.A(j)
    s = _sides_for(A, lam, side)
    tl = jost_tilde(p, j, lam, x_eval, side, t, cols)
    pj = phase_p(p, j, lam, x_eval, side, t)
    Dinv = _dinv(A, lam, s)
    out = np.einsum("nab,nxbc->nxac", Dinv, tl)
    out[..., 0] *= np.exp(-pj)[..., None]
    out[..., 1] *= np.exp(pj)[..., None]
    return out


def background_solution(j, x, t, lam, bg, side=Side.OFF):
    """Phi_{0,j} = D_j^{-1}(lam) exp(-p_j^0 sigma3) with the integral term absent."""
    lam, side = _as_arrays(lam, side)
    _check_branch(bg, lam)
    A = bg.A(j)
    s = _sides_for(A, lam, side)
    k = _k(A, lam, s)
    p0 = 1j * A * k * (x / 2 - t * (1 / lam**2 + A * A / 2)) if t else 1j * A * k * x / 2
    out = _dinv(A, lam, s)
    out[..., 0] *= np.exp(-p0)[..., None]
    out[..., 1] *= np.exp(p0)[..., None]
    return out[()] if out.shape[0] > 1 else out[0]


def _det(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _needed_cols(bg, lam, j):
    """Columns of Phi_j that stay bounded along the integration: the analytic
    column always, both when lam sits on the cut of k_j."""
    analytic = 1 if j == 1 else 2
    on = _on_cut(bg.A(j), lam)
    return np.where(on, 3, analytic)


def scattering_matrix(p, lam, side=Side.PLUS, t=0.0, x0=0.0):
    """Entries s11, s12, s21, s22 via Wronskians at the matching point x0.

    Entries that would need a column which is exponentially large on the
    given spectral point come back as NaN.  Output shape (n_lam, 2, 2).
    """
    lam, side = _as_arrays(lam, side)
    n = len(lam)
    phis = {}
    for j in (1, 2):
        need = _needed_cols(p.bg, lam, j)
        phi = np.full((n, 2, 2), np.nan, dtype=complex)
        for c in np.unique(need):
            idx = np.nonzero(need == c)[0]
            phi[idx] = jost(p, j, lam[idx], [x0], side[idx], t, cols=int(c))[:, 0]
        phis[j] = phi
    P1, P2 = phis[1], phis[2]
    s = np.empty((n, 2, 2), dtype=complex)
    s[:, 0, 0] = _det(P1[..., 0], P2[..., 1])
    size = np.linalg.norm(P1[..., 0], axis=-1) * np.linalg.norm(P2[..., 1], axis=-1)
    if np.any(np.abs(s[:, 0, 0]) < MATCH_COND_MIN * size):
        raise ScatteringError("ill-conditioned matching: s11 Wronskian cancels to rounding")
    s[:, 0, 1] = _det(P1[..., 1], P2[..., 1])
    s[:, 1, 0] = _det(P2[..., 0], P1[..., 0])
    s[:, 1, 1] = _det(P2[..., 0], P1[..., 1])
    return s


def scattering_entries(p, lam, side=Side.PLUS, t=0.0, x0=0.0):
    s = scattering_matrix(p, lam, side, t, x0)
    return s[:, 0, 0], s[:, 1, 0]


@dataclass
class DiscretePair:
    lam: float
    b: float
    s11_prime: float
    s11_prime_fd: float
    kappa: float


@dataclass
class ScatteringData:
    bg: object
    t: float
    lam: np.ndarray
    s: np.ndarray
    rho: np.ndarray
    discrete: list = field(default_factory=list)
    x0: float = 0.0

    @property
    def s11(self):
        return self.s[:, 0, 0]

    @property
    def s21(self):
        return self.s[:, 1, 0]


def rho_from_s(bg, s):
    if bg.orientation is Orientation.DESCENDING:
        return s[:, 0, 1] / s[:, 0, 0]
    return s[:, 1, 0] / s[:, 0, 0]


def reflection_rho(p, lam, t=0.0, x0=0.0, discrete=True):
    """Reflection coefficient at the PLUS side of real nodes on the cuts.

    rho = s21/s11 (ascending, equal) or s12/s11 (descending).
    """
    lam = np.asarray(lam, dtype=float)
    bg = p.bg
    if np.any(np.abs(lam) < bg.gap):
        raise ScatteringError("reflection nodes must lie on the cuts")
    s = scattering_matrix(p, lam.astype(complex), Side.PLUS, t, x0)
    s11 = s[:, 0, 0]
    if np.any(np.abs(s11) < 1e-12):
        raise ScatteringError("spectral singularity: s11 vanishes on the contour")
    rho = rho_from_s(bg, s)
    disc = locate_discrete_spectrum(p, t, x0) if discrete else []
    return ScatteringData(bg, t, lam, s, rho, disc, x0)


# ---------------------------------------------------------------------------
# discrete spectrum


def _gap_phase_difference(p, lam, x0, t):
    """p_2 - p_1 at real lam in the gap, with the t/lam^2 parts combined so
    the origin is regular: there i A_j k_j = -sqrt(1 - A_j^2 lam^2)."""
    bg = p.bg
    ti = tail_integrals(p)
    lam = np.asarray(lam, float)
    r1 = np.sqrt(1 - (bg.A1 * lam) ** 2)
    r2 = np.sqrt(1 - (bg.A2 * lam) ** 2)
    space = (-r2 * (-ti.right(x0) / (2 * bg.A2) + x0 / 2)
             + r1 * (ti.left(x0) / (2 * bg.A1) + x0 / 2))
    # -t [ -r2 (1/lam^2 + A2^2/2) + r1 (1/lam^2 + A1^2/2) ]
    diff = (bg.A2**2 - bg.A1**2) / (r1 + r2)
    time = -t * (diff + (r1 * bg.A1**2 - r2 * bg.A2**2) / 2)
    return space + time


def _s11_gap(p, lam, t, x0):
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    if t == 0:
        P1 = jost(p, 1, lam, [x0], 0, t, cols=1)[:, 0]
        P2 = jost(p, 2, lam, [x0], 0, t, cols=2)[:, 0]
        return _det(P1[..., 0], P2[..., 1])
    c1 = np.einsum("nab,nb->na", _dinv(p.bg.A1, lam, 0), jost_tilde(p, 1, lam, [x0], 0, t, 1)[:, 0, :, 0])
    c2 = np.einsum("nab,nb->na", _dinv(p.bg.A2, lam, 0), jost_tilde(p, 2, lam, [x0], 0, t, 2)[:, 0, :, 1])
    return _det(c1, c2) * np.exp(_gap_phase_difference(p, lam.real, x0, t))


def s11_on_gap(p, lam, t=0.0, x0=0.0):
    """s11 at real points of the gap, where it is real."""
    return _s11_gap(p, lam, t, x0).real


def locate_discrete_spectrum(p, t=0.0, x0=0.0, n_scan=200):
    """Zeros of s11 in (0, gap) with norming data.

    Scan, bracket the sign changes, refine with brentq, then compute the
    proportionality constant b, the derivative s11' both by a finite
    difference and by the Wronskian integral, and the residue constant.
    """
    bg = p.bg
    g = bg.gap
    if abs(s11_on_gap(p, 0.0, t, x0)[0]) < 1e-10:
        raise ScatteringError("s11 vanishes at the origin")
    grid = np.linspace(0.0, g, n_scan + 1)[1:-1]
    vals = s11_on_gap(p, grid, t, x0)
    out = []
    for i in np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]:
        f = lambda z: s11_on_gap(p, z, t, x0)[0]  # noqa: E731
        lk = brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200)
        out.append(_norming(p, lk, t, x0))
    return out


def _norming(p, lk, t, x0):
    bg = p.bg
    # proportionality Phi_1^(1) = b Phi_2^(2) by least squares near x0
    xs = x0 + np.linspace(-1.0, 1.0, 9)
    xs = xs[(xs > p.x[0]) & (xs < p.x[-1])]
    c1 = jost(p, 1, lk, xs, 0, t, cols=1)[0, :, :, 0].ravel()
    c2 = jost(p, 2, lk, xs, 0, t, cols=2)[0, :, :, 1].ravel()
    b = np.vdot(c2, c1) / np.vdot(c2, c2)
    # derivative by a 5-point stencil
    h = 1e-3 * min(lk, bg.gap - lk)
    f = s11_on_gap(p, lk + h * np.array([-2, -1, 1, 2]), t, x0)
    fd = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)
    # Wronskian integral s11' = (b/2) int m (g1^2 + g2^2), g the bound state
    x = p.x
    left = x[x <= x0]
    right = x[x >= x0]
    g_left = jost(p, 1, lk, left, 0, t, cols=1)[0, :, :, 0] / b
    g_right = jost(p, 2, lk, right, 0, t, cols=2)[0, :, :, 1]
    gg = np.concatenate([g_left[:-1], g_right])
    xx = np.concatenate([left[:-1], right])
    mm = p.m_spline(xx)
    integrand = mm * (gg[:, 0] ** 2 + gg[:, 1] ** 2)
    from scipy.integrate import simpson
    wi = 0.5 * b * simpson(integrand, x=xx)
    if abs(wi - fd) > 1e-4 * abs(fd):
        raise ScatteringError("derivative mismatch")
    wi = wi.real if abs(wi.imag) < 1e-8 * abs(wi) else wi
    b_r = b.real if abs(b.imag) < 1e-8 * abs(b) else b
    if bg.orientation is Orientation.DESCENDING:
        kappa = 1.0 / (b_r * wi)
    else:
        kappa = b_r / wi
    return DiscretePair(float(lk), b_r, wi, fd, kappa)


# ---------------------------------------------------------------------------
# small-lambda quantities straight from the profile


def small_lambda_direct(p, x=None, t=0.0):
    """Coefficients of the small-lam expansion computed from the profile.

    Returns (a1, a2, a3, u, u_x) on ``x`` (default: the profile grid).  For a
    descending profile the mirrored triple (b1, b2, b3) is returned instead,
    with the same reconstruction formulas.
    """
    bg = p.bg
    ti = tail_integrals(p)
    L, R = exp_convolutions(p.x, p.m, bg)
    if bg.orientation is Orientation.DESCENDING:
        a1 = np.exp(ti.left_values / (2 * bg.A1))
    else:
        a1 = np.exp(-ti.right_values / (2 * bg.A2))
    a2 = (L / 2 + bg.A1 / 2) / a1
    a3 = (R / 2 + bg.A2 / 2) * a1
    if x is not None:
        from scipy.interpolate import CubicSpline
        x = np.asarray(x, dtype=float)
        a1, a2, a3 = (CubicSpline(p.x, v)(x) for v in (a1, a2, a3))
    u = a1 * a2 + a3 / a1
    ux = -a1 * a2 + a3 / a1
    return a1, a2, a3, u, ux

"""Nystrom solution of the identity-normalized RH problem and the small-lam
extraction.

The unknown is mu = M~_- at the contour nodes.  With f = mu (J~ - I) the
representation M~ = I + C[f] turns M~_+ = M~_- J~ into
mu - C_-[mu (J~ - I)] = I, which decouples into one 2N x 2N system per row
of mu sharing a single LU factorization.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

from .contour import legendre_matrix, panel_map, panel_split
from .kernels import cauchy_matrix
from .spectral import N_PLUS

I2 = np.eye(2, dtype=complex)
ISIG1 = np.array([[0, 1j], [1j, 0]])
P_TILDE = np.linalg.inv(N_PLUS)

SOLVE_TOL = 1e-6
EXTRACT_TOL = 1e-6
RCOND_MIN = 1e-14


class RHSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SmallLambdaCoeffs:
    a1_hat: float
    a2_hat: float
    a3_hat: float


@dataclass(frozen=True, eq=False)
class RHSolution:
    y: float
    t: float
    data: object
    mu: np.ndarray       # (N, 2, 2) values of M~_- at the nodes
    f: np.ndarray        # mu (J~ - I)
    jump_residual: float
    rcond: float


def _operators(data):
    """y-independent pieces: C_- at the nodes, C_pv at the check points and
    the Legendre interpolation rows.  Cached on the data object."""
    if "ops" in data.cache:
        return data.cache["ops"]
    ct = data.contour
    arr = ct.arrays()
    q = ct.q
    L = legendre_matrix(q)
    C = cauchy_matrix(arr["base"], arr["pan"], arr["tloc"], arr, q, L, toff=arr["off"])
    C[np.diag_indices_from(C)] -= 0.5
    npan = ct.npanel
    cb, co = zip(*(panel_split(k, par, np.zeros(1)) for k, par in zip(ct.kind, ct.param)))
    Cchk = cauchy_matrix(np.concatenate(cb), np.arange(npan), np.zeros(npan), arr, q, L,
                         toff=np.concatenate(co))
    # value at local t = 0 of the Legendre interpolant on each panel
    P0 = np.polynomial.legendre.legval(0.0, np.eye(q))  # P_n(0)
    interp0 = P0 @ L                                     # (q,)
    jf_chk = np.array([panel_map(k, par, np.zeros(1))[2][0]
                       for k, par in zip(ct.kind, ct.param)])
    ops = {"C": C, "Cchk": Cchk, "interp0": interp0, "L": L, "jf_chk": jf_chk}
    data.cache["ops"] = ops
    return ops


def solve_rhp(y, t, data, tol=SOLVE_TOL, check=True):
    """Solve for M~ at the given (y, t)."""
    ops = _operators(data)
    C = ops["C"]
    N = data.n
    J = data.jump(y, t)
    W = J - I2
    A = np.empty((2 * N, 2 * N), complex)
    A[:N, :N] = -C * W[None, :, 0, 0]
    A[:N, N:] = -C * W[None, :, 1, 0]
    A[N:, :N] = -C * W[None, :, 0, 1]
    A[N:, N:] = -C * W[None, :, 1, 1]
    A[np.diag_indices(2 * N)] += 1.0
    anorm = np.abs(A).sum(axis=0).max()
    lu, piv = lu_factor(A, check_finite=False)
    rc, info = lapack.zgecon(lu, anorm, norm="1")
    if not np.isfinite(rc) or rc < RCOND_MIN:
        raise RHSolverError(f"RHP ill-conditioned at (y,t)=({y:g},{t:g}): rcond={rc:.2e}")
    rhs = np.zeros((2 * N, 2), complex)
    rhs[:N, 0] = 1.0
    rhs[N:, 1] = 1.0
    sol = lu_solve((lu, piv), rhs, check_finite=False)
    mu = np.empty((N, 2, 2), complex)
    mu[:, 0, 0] = sol[:N, 0]
    mu[:, 0, 1] = sol[N:, 0]
    mu[:, 1, 0] = sol[:N, 1]
    mu[:, 1, 1] = sol[N:, 1]
    f = mu @ W
    res = _jump_residual(data, ops, y, t, f)
    if check and res > tol:
        raise RHSolverError(f"jump residual {res:.2e} above tolerance {tol:.1e} at (y,t)=({y:g},{t:g})")
    return RHSolution(float(y), float(t), data, mu, f, res, float(rc))


def _panel_values(data, vals, interp0, jf_chk):
    # interpolate jf * f, which stays bounded on graded panels
    q = data.contour.q
    jf = data.contour.arrays()["jf"].reshape(-1, q)
    v = vals.reshape(-1, q, 2, 2) * jf[:, :, None, None]
    return np.einsum("j,pjab->pab", interp0, v) / jf_chk[:, None, None]


def _jump_residual(data, ops, y, t, f):
    """max |M~_+ - M~_- J~| / max(1, |M~_-| |J~|) at one off-node point per
    panel, with M~_pm from the Plemelj formulas and f interpolated on the
    panel.  The scaling makes this a backward error: near branch points and
    for large |y| the solution itself is large."""
    fc = _panel_values(data, f, ops["interp0"], ops["jf_chk"])
    pv = np.einsum("ij,jab->iab", ops["Cchk"], f)
    Mp = I2 + pv + 0.5 * fc
    Mm = I2 + pv - 0.5 * fc
    Jc = data.jump_check(y, t)
    err = np.abs(Mp - Mm @ Jc).max(axis=(1, 2))
    scale = np.maximum(1.0, np.abs(Mm).max(axis=(1, 2)) * np.abs(Jc).max(axis=(1, 2)))
    return float((err / scale).max())


def evaluate_M(sol, lam, side=0, native=False, min_dist=1e-8):
    """M~ (or the native M^ when ``native``) at off-contour points; on the
    contour pass ``side`` = +1/-1 for the boundary values."""
    data = sol.data
    arr = data.contour.arrays()
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    ops = _operators(data)
    q = data.contour.q
    if side == 0:
        d = np.abs(lam[:, None] - arr["lam"][None, :]).min(axis=1)
        if np.any(d < min_dist):
            raise RHSolverError("evaluation too close to contour")
        tp = -np.ones(len(lam), np.int64)
        tl = np.zeros(len(lam))
        C = cauchy_matrix(lam, tp, tl, arr, q, ops["L"])
        M = I2 + np.einsum("ij,jab->iab", C, sol.f)
        upper = lam.imag > 0
    else:
        tp, tl = zip(*(data.contour.locate(z) for z in lam))
        tp = np.array(tp, np.int64)
        tl = np.array(tl, float)
        if np.any(tp < 0):
            raise RHSolverError("boundary value requested off the contour")
        C = cauchy_matrix(lam, tp, tl, arr, q, ops["L"])
        fl = _interp_at(sol.f, tp, tl, data.contour, ops["L"])
        M = I2 + np.einsum("ij,jab->iab", C, sol.f) + 0.5 * side * fl
        upper = np.full(len(lam), side > 0)
    if not native:
        return M
    out = N_PLUS @ M
    out[~upper] = out[~upper] @ (-ISIG1)
    return out


def _interp_at(vals, pan, tloc, ct, L):
    q = ct.q
    jf = ct.arrays()["jf"].reshape(-1, q)
    v = vals.reshape(-1, q, 2, 2) * jf[:, :, None, None]
    Pn = np.polynomial.legendre.legvander(tloc, q - 1)  # (m, n)
    w = Pn @ L                                         # (m, q)
    jt = np.array([panel_map(ct.kind[p], ct.param[p], np.array([t]))[2][0]
                   for p, t in zip(pan, tloc)])
    return np.einsum("mj,mjab->mab", w, v[pan]) / jt[:, None, None]


def _gap_panel_at_zero(data):
    ct = data.contour
    for p, (k, par, tg) in enumerate(zip(ct.kind, ct.param, ct.tag)):
        if tg == "gap" and k == 0:
            t0 = (0.0 - par[0]) / par[1]
            if abs(t0.imag) < 1e-14 and -1 < t0.real < 1:
                return p, t0.real, par[1].real
    raise RHSolverError("origin not inside a gap panel")


def m_hat_at_zero(sol):
    """Native M^(0) and dM^/dlam(0) from the Legendre interpolant of the
    boundary values on the gap panel containing the origin."""
    data = sol.data
    q = data.contour.q
    L = _operators(data)["L"]
    p, t0, h = _gap_panel_at_zero(data)
    sl = slice(p * q, (p + 1) * q)
    Mh = N_PLUS @ sol.mu[sl] @ (-ISIG1)
    coef = np.einsum("nj,jab->nab", L, Mh)
    val = np.polynomial.legendre.legval(t0, coef)
    der = np.polynomial.legendre.legval(t0, np.polynomial.legendre.legder(coef)) / h
    # legval treats the leading axis as the coefficient index
    return np.asarray(val), np.asarray(der)


def small_lambda_coeffs(sol, tol=EXTRACT_TOL):
    M0, M1 = m_hat_at_zero(sol)
    a1 = M0[0, 1] / 1j
    a2 = M1[0, 0] / 1j
    a3 = M1[1, 1] / 1j
    scale = max(1.0, abs(a1), abs(1 / a1) if a1 != 0 else 1.0)
    bad = (abs(a1.imag) > tol * scale or a1.real <= 0
           or abs(M0[0, 0]) > tol * scale or abs(M0[1, 1]) > tol * scale
           or abs(M0[1, 0] * M0[0, 1] + 1) > tol * scale**2)
    if bad:
        raise RHSolverError(
            f"expansion structure violated at (y,t)=({sol.y:g},{sol.t:g}): "
            f"M(0)={M0.round(8).tolist()}")
    return SmallLambdaCoeffs(float(a1.real), float(a2.real), float(a3.real))


def solve_and_extract(y, t, data, tol=SOLVE_TOL):
    sol = solve_rhp(y, t, data, tol)
    return sol, small_lambda_coeffs(sol)

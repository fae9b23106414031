"""Hot loops with numba implementations and numpy fallbacks.

Three kernels live here: the first-order exponential recursion used by the
Helmholtz inversion, the adaptive Jost integrator, and the Cauchy-matrix
assembly.  ``USE_NUMBA`` (see ``_jit``) decides which version is exported.
"""
import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop
from scipy.signal import lfilter

from ._jit import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# exponential recursion  y[i] = d[i] * y[i-1] + c[i]


@njit
def _exp_recursion_nb(decay, inc):
    out = np.empty_like(inc)
    acc = 0.0
    for i in range(inc.shape[0]):
        acc = decay[i] * acc + inc[i]
        out[i] = acc
    return out


def _exp_recursion_np(decay, inc):
    d = np.asarray(decay)
    if np.all(d == d[0]):
        return lfilter([1.0], [1.0, -d[0]], inc)
    # non-uniform decay: y_i = P_i * cumsum(c_j / P_j), split in blocks to
    # keep the running products in range
    out = np.empty_like(inc)
    acc = 0.0
    block = 200
    for s in range(0, len(inc), block):
        dd = d[s:s + block]
        P = np.cumprod(dd)
        out[s:s + block] = P * (acc + np.cumsum(inc[s:s + block] / P))
        acc = out[s + len(dd) - 1]
    return out


def exp_recursion(decay, inc, backend=None):
    decay = np.ascontiguousarray(decay, dtype=float)
    inc = np.ascontiguousarray(inc, dtype=float)
    if (USE_NUMBA if backend is None else backend == "numba"):
        return _exp_recursion_nb(decay, inc)
    return _exp_recursion_np(decay, inc)


# ---------------------------------------------------------------------------
# adaptive DOP853 for the Jost system
#
# State y = (a, b, c, d) for the gauge-transformed solution [[a, b], [c, d]].
# With mu = m - A:  a' = beta a - i alpha c,  b' = -i k m b + beta b - i alpha d,
# c' = i k m c + i alpha a - beta c,  d' = i alpha b - beta d,
# alpha = lam mu / (2 A k),  beta = mu / (2 i A^2 k).

_NS = _dop.N_STAGES
H_MIN = 1e-13  # relative step floor of the Jost integrator
_A = np.ascontiguousarray(_dop.A[:_NS, :_NS])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:_NS])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)


@njit
def _spline_eval(x, xg, coef):
    n = xg.shape[0]
    if x <= xg[0]:
        return coef[0, 3]
    if x >= xg[n - 1]:
        i = n - 2
        s = xg[n - 1] - xg[i]
        return ((coef[i, 0] * s + coef[i, 1]) * s + coef[i, 2]) * s + coef[i, 3]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if xg[mid] <= x:
            lo = mid
        else:
            hi = mid
    s = x - xg[lo]
    return ((coef[lo, 0] * s + coef[lo, 1]) * s + coef[lo, 2]) * s + coef[lo, 3]


@njit
def _jost_rhs(x, y, xg, coef, A, ikm_fac, al, be, out):
    m = _spline_eval(x, xg, coef)
    mu = m - A
    th = ikm_fac * m
    a_ = al * mu
    b_ = be * mu
    out[0] = b_ * y[0] - 1j * a_ * y[2]
    out[1] = -th * y[1] + b_ * y[1] - 1j * a_ * y[3]
    out[2] = th * y[2] + 1j * a_ * y[0] - b_ * y[2]
    out[3] = 1j * a_ * y[1] - b_ * y[3]


@njit
def _jost_one(xg, coef, A, lam, k, x_start, x_out, rtol, atol, cols, A_tab, B_tab, C_tab, E3, E5):
    ns = B_tab.shape[0]
    K = np.zeros((ns + 1, 4), dtype=np.complex128)
    y = np.zeros(4, dtype=np.complex128)
    use = np.zeros(4, dtype=np.bool_)
    if cols & 1:
        y[0] = 1.0
        use[0] = True
        use[2] = True
    if cols & 2:
        y[3] = 1.0
        use[1] = True
        use[3] = True
    ikm_fac = 1j * k
    al = lam / (2.0 * A * k)
    be = 1.0 / (2j * A * A * k)
    res = np.empty((x_out.shape[0], 4), dtype=np.complex128)
    x = x_start
    direction = 1.0 if x_out[x_out.shape[0] - 1] >= x_start else -1.0
    h = 0.05 * direction
    f0 = np.empty(4, dtype=np.complex128)
    _jost_rhs(x, y, xg, coef, A, ikm_fac, al, be, f0)
    ytmp = np.empty(4, dtype=np.complex128)
    ynew = np.empty(4, dtype=np.complex128)
    fnew = np.empty(4, dtype=np.complex128)
    tmp = np.empty(4, dtype=np.complex128)
    nsteps = 0
    for io in range(x_out.shape[0]):
        target = x_out[io]
        while (target - x) * direction > 0.0:
            last = False
            if (x + h - target) * direction >= 0.0:
                hs = target - x
                last = True
            else:
                hs = h
            for q in range(4):
                K[0, q] = f0[q]
            for s in range(1, ns):
                for q in range(4):
                    acc = 0.0 + 0.0j
                    for r in range(s):
                        acc += A_tab[s, r] * K[r, q]
                    ytmp[q] = y[q] + hs * acc
                _jost_rhs(x + C_tab[s] * hs, ytmp, xg, coef, A, ikm_fac, al, be, tmp)
                for q in range(4):
                    K[s, q] = tmp[q]
            for q in range(4):
                acc = 0.0 + 0.0j
                for r in range(ns):
                    acc += B_tab[r] * K[r, q]
                ynew[q] = y[q] + hs * acc
            _jost_rhs(x + hs, ynew, xg, coef, A, ikm_fac, al, be, fnew)
            for q in range(4):
                K[ns, q] = fnew[q]
            e5 = 0.0
            e3 = 0.0
            for q in range(4):
                if not use[q]:
                    continue
                sc = atol + rtol * max(abs(y[q]), abs(ynew[q]))
                a5 = 0.0 + 0.0j
                a3 = 0.0 + 0.0j
                for r in range(ns + 1):
                    a5 += E5[r] * K[r, q]
                    a3 += E3[r] * K[r, q]
                e5 += abs(a5 / sc) ** 2
                e3 += abs(a3 / sc) ** 2
            if e5 == 0.0 and e3 == 0.0:
                err = 0.0
            else:
                err = abs(hs) * e5 / np.sqrt((e5 + 0.01 * e3) * 2.0 * (1 + (cols == 3)))
            nsteps += 1
            if err <= 1.0:
                x = x + hs
                if last:
                    x = target
                for q in range(4):
                    y[q] = ynew[q]
                    f0[q] = fnew[q]
                fac = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** (-1.0 / 8.0))
                if not last:
                    h = hs * fac
            else:
                fac = max(0.2, 0.9 * err ** (-1.0 / 8.0))
                h = hs * fac
            if abs(h) < H_MIN * max(1.0, abs(x)):
                raise RuntimeError("stiff region: Jost step size underflow")
            if nsteps > 2000000:
                raise RuntimeError("Jost integrator exceeded step budget")
        for q in range(4):
            res[io, q] = y[q]
    return res


@njit
def _jost_batch_nb(xg, coef, A, lams, ks, x_start, x_out, rtol, atol, cols, A_tab, B_tab, C_tab, E3, E5):
    n = lams.shape[0]
    out = np.empty((n, x_out.shape[0], 4), dtype=np.complex128)
    for i in range(n):
        out[i] = _jost_one(xg, coef, A, lams[i], ks[i], x_start, x_out, rtol, atol,
                           cols, A_tab, B_tab, C_tab, E3, E5)
    return out


def _spline_eval_np(x, xg, coef):
    i = np.clip(np.searchsorted(xg, x, side="right") - 1, 0, len(xg) - 2)
    s = np.clip(x, xg[0], xg[-1]) - xg[i]
    c = coef[i]
    return ((c[0] * s + c[1]) * s + c[2]) * s + c[3]


def _jost_batch_np(xg, coef, A, lams, ks, x_start, x_out, rtol, atol, cols):
    """All spectral points share one adaptive step sequence (worst-case error)."""
    n = lams.shape[0]
    ikm = (1j * ks)[:, None]
    al = (lams / (2.0 * A * ks))[:, None]
    be = (1.0 / (2j * A * A * ks))[:, None]

    def rhs(x, y):
        m = _spline_eval_np(x, xg, coef)
        mu = m - A
        a_ = 1j * al * mu
        b_ = be * mu
        th = ikm * m
        a, b, c, d = y[:, 0:1], y[:, 1:2], y[:, 2:3], y[:, 3:4]
        return np.hstack([b_ * a - a_ * c, (b_ - th) * b - a_ * d,
                          (th - b_) * c + a_ * a, a_ * b - b_ * d])

    y = np.zeros((n, 4), dtype=complex)
    use = np.zeros(4, dtype=bool)
    if cols & 1:
        y[:, 0] = 1.0
        use[[0, 2]] = True
    if cols & 2:
        y[:, 3] = 1.0
        use[[1, 3]] = True
    res = np.empty((n, len(x_out), 4), dtype=complex)
    x = x_start
    direction = 1.0 if x_out[-1] >= x_start else -1.0
    h = 0.05 * direction
    f0 = rhs(x, y)
    K = np.empty((_NS + 1, n, 4), dtype=complex)
    for io, target in enumerate(x_out):
        while (target - x) * direction > 0:
            last = (x + h - target) * direction >= 0
            hs = target - x if last else h
            K[0] = f0
            for s in range(1, _NS):
                dy = np.tensordot(_A[s, :s], K[:s], axes=(0, 0)) * hs
                K[s] = rhs(x + _C[s] * hs, y + dy)
            ynew = y + hs * np.tensordot(_B, K[:_NS], axes=(0, 0))
            fnew = rhs(x + hs, ynew)
            K[_NS] = fnew
            sc = (atol + rtol * np.maximum(np.abs(y), np.abs(ynew)))[:, use]
            e5 = np.sum(np.abs(np.tensordot(_E5, K, axes=(0, 0))[:, use] / sc) ** 2, axis=1)
            e3 = np.sum(np.abs(np.tensordot(_E3, K, axes=(0, 0))[:, use] / sc) ** 2, axis=1)
            den = np.sqrt((e5 + 0.01 * e3) * use.sum())
            err = np.where(den > 0, abs(hs) * e5 / np.where(den > 0, den, 1.0), 0.0).max()
            if err <= 1.0:
                x = target if last else x + hs
                y, f0 = ynew, fnew
                fac = 10.0 if err == 0 else min(10.0, 0.9 * err ** (-1 / 8))
                if not last:
                    h = hs * fac
            else:
                h = hs * max(0.2, 0.9 * err ** (-1 / 8))
            if abs(h) < H_MIN * max(1.0, abs(x)):
                raise RuntimeError("stiff region: Jost step size underflow")
        res[:, io] = y
    return res


def jost_batch(xg, coef, A, lams, ks, x_start, x_out, cols=3, rtol=1e-11, atol=1e-13,
               backend=None):
    """Integrate the gauge-transformed Jost system from ``x_start`` (where it
    equals the identity) to each point of ``x_out`` (monotone, moving away).
    ``cols`` is a bit mask of the columns to integrate (1, 2 or 3); columns
    left out stay zero and do not enter the step control.

    ``coef`` holds cubic pieces of m as rows (c3, c2, c1, c0) in powers of
    (x - xg[i]).  Returns an array (n_lam, n_out, 4) of (a, b, c, d).
    """
    lams = np.ascontiguousarray(np.atleast_1d(lams), dtype=complex)
    ks = np.ascontiguousarray(np.atleast_1d(ks), dtype=complex)
    x_out = np.ascontiguousarray(np.atleast_1d(x_out), dtype=float)
    xg = np.ascontiguousarray(xg, dtype=float)
    coef = np.ascontiguousarray(coef, dtype=float)
    use_nb = USE_NUMBA if backend is None else backend == "numba"
    if use_nb:
        return _jost_batch_nb(xg, coef, float(A), lams, ks, float(x_start), x_out,
                              rtol, atol, int(cols), _A, _B, _C, _E3, _E5)
    return _jost_batch_np(xg, coef, float(A), lams, ks, float(x_start), x_out, rtol, atol, int(cols))


# ---------------------------------------------------------------------------
# Cauchy matrix: (1/2 pi i) int f(s) ds / (s - lam0) on a panelled contour,
# principal value for targets sitting on a panel.  See ``contour`` for the
# panel maps; near targets use product integration against the Legendre
# functions of the second kind, far targets plain Gauss-Legendre.


@njit
def _bernstein(z):
    s = np.sqrt(z - 1.0 + 0j) * np.sqrt(z + 1.0 + 0j)
    return max(abs(z + s), abs(z - s))


MILLER_RHO = 1.25  # beyond this Bernstein radius Q_n is built downward


@njit
def _legendre_q(z, on_segment, out):
    """Q_0..Q_{q-1}.  Upward recurrence near the segment, where it is
    stable; Miller's downward ratio recurrence further out, where the
    upward one amplifies rounding like rho^n."""
    q = out.shape[0]
    if on_segment:
        x = z.real
        out[0] = 0.5 * np.log((1.0 + x) / (1.0 - x))
    else:
        out[0] = 0.5 * np.log((z + 1.0) / (z - 1.0))
    rho = 1.0 if on_segment else _bernstein(z)
    if rho < MILLER_RHO:
        if q > 1:
            out[1] = z * out[0] - 1.0
        for n in range(1, q - 1):
            out[n + 1] = ((2 * n + 1) * z * out[n] - n * out[n - 1]) / (n + 1)
        return
    nst = q + int(37.0 / np.log(rho * rho)) + 2
    r = 0.0j
    for n in range(nst, 0, -1):
        r = n / ((2 * n + 1) * z - (n + 1) * r)
        if n < q:
            out[n] = r  # ratio Q_n / Q_{n-1}, turned into values below
    for n in range(1, q):
        out[n] = out[n] * out[n - 1]


@njit
def _panel_roots(kind, par, zb, zo, selfp, tl, zs, cs, sf):
    # target = zb + zo; offsets keep points graded onto a branch point exact
    for r in range(5):
        sf[r] = False
    if kind == 0:
        if selfp:
            zs[0] = tl
            sf[0] = True
        else:
            zs[0] = ((zb - par[0]) + zo) / par[1]
        cs[0] = 1.0
        return 1
    if kind == 1:
        a = par[0]
        g = par[1]
        sm = par[2].real
        sh = par[3].real
        base = (((zb - a) + zo) / g) ** 0.25
        rot = 1.0 + 0j
        for r in range(4):
            s = base * rot
            zs[r] = (s - sm) / sh
            cs[r] = 1.0 / s
            rot = rot * 1j
        if selfp:
            best = 0
            for r in range(1, 4):
                if abs(zs[r] - tl) < abs(zs[best] - tl):
                    best = r
            zs[best] = tl
            cs[best] = 1.0 / (sm + sh * tl)
            sf[best] = True
        return 4
    center = par[0]
    rad = par[1].real
    zc = par[2]
    wm = par[3].real
    wh = par[4].real
    n = 0
    if selfp:
        zs[0] = tl
        sf[0] = True
        cs[0] = 1.0
        n = 1
    else:
        u = ((zb - center) + zo) / (rad * zc)
        if abs(1.0 + u) > 1e-14:
            w0 = 1j * (1.0 - u) / (1.0 + u)
            zs[0] = (w0 - wm) / wh
            cs[0] = 1.0
            n = 1
    zs[n] = (-1j - wm) / wh
    cs[n] = -1.0
    return n + 1


@njit
def _cauchy_nb(tgt, toff, tpan, tloc, nbase, noff, W, jf, kind, param, q, tref, wref, L,
               rho0):
    nt = tgt.shape[0]
    nn = nbase.shape[0]
    npan = kind.shape[0]
    C = np.zeros((nt, nn), dtype=np.complex128)
    zs = np.empty(5, dtype=np.complex128)
    cs = np.empty(5, dtype=np.complex128)
    sf = np.zeros(5, dtype=np.bool_)
    Qv = np.empty(q, dtype=np.complex128)
    for i in range(nt):
        zb = tgt[i]
        zo = toff[i]
        for p in range(npan):
            j0 = p * q
            selfp = tpan[i] == p
            nr = _panel_roots(kind[p], param[p], zb, zo, selfp, tloc[i], zs, cs, sf)
            near = False
            for r in range(nr):
                if sf[r] or _bernstein(zs[r]) < rho0:
                    near = True
            if not near:
                for jj in range(q):
                    C[i, j0 + jj] += W[j0 + jj] / ((nbase[j0 + jj] - zb)
                                                   + (noff[j0 + jj] - zo))
                continue
            for r in range(nr):
                if sf[r] or _bernstein(zs[r]) < rho0:
                    _legendre_q(zs[r], sf[r], Qv)
                    for jj in range(q):
                        acc = 0.0 + 0.0j
                        for n in range(q):
                            acc += L[n, jj] * Qv[n]
                        C[i, j0 + jj] += -2.0 * cs[r] * acc * jf[j0 + jj]
                else:
                    for jj in range(q):
                        C[i, j0 + jj] += cs[r] * wref[jj] / (tref[jj] - zs[r]) * jf[j0 + jj]
    return C / (2j * np.pi)


def _legendre_q_vec(z, on_segment, q):
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape + (q,), dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = z.real
        seg = 0.5 * np.log((1.0 + x) / (1.0 - x)) + 0j
        gen = 0.5 * np.log((z + 1.0) / (z - 1.0))
        out[..., 0] = np.where(on_segment, seg, gen)
        rho = np.where(on_segment, 1.0, _bernstein_vec(z))
    up = rho < MILLER_RHO
    if np.any(up):
        zu = z[up]
        Q = np.empty(zu.shape + (q,), complex)
        Q[..., 0] = out[up, 0]
        if q > 1:
            Q[..., 1] = zu * Q[..., 0] - 1.0
        for n in range(1, q - 1):
            Q[..., n + 1] = ((2 * n + 1) * zu * Q[..., n] - n * Q[..., n - 1]) / (n + 1)
        out[up] = Q
    dn = ~up
    if np.any(dn):
        zd = z[dn]
        Q = np.empty(zd.shape + (q,), complex)
        Q[..., 0] = out[dn, 0]
        nst = q + int(37.0 / np.log(rho[dn].min() ** 2)) + 2
        r = np.zeros(zd.shape, complex)
        for n in range(nst, 0, -1):
            r = n / ((2 * n + 1) * zd - (n + 1) * r)
            if n < q:
                Q[..., n] = r
        for n in range(1, q):
            Q[..., n] = Q[..., n] * Q[..., n - 1]
        out[dn] = Q
    return out


def _bernstein_vec(z):
    s = np.sqrt(z - 1.0 + 0j) * np.sqrt(z + 1.0 + 0j)
    return np.maximum(abs(z + s), abs(z - s))


def _cauchy_np(tgt, toff, tpan, tloc, nbase, noff, W, jf, kind, param, q, tref, wref, L,
               rho0):
    nt = len(tgt)
    with np.errstate(divide="ignore", invalid="ignore"):
        C = W[None, :] / ((nbase[None, :] - tgt[:, None]) + (noff[None, :] - toff[:, None]))
    for p in range(len(kind)):
        sl = slice(p * q, (p + 1) * q)
        par = param[p]
        selfp = tpan == p
        k = kind[p]
        if k == 0:
            zs = (((tgt - par[0]) + toff) / par[1])[:, None]
            zs[selfp, 0] = tloc[selfp]
            cs = np.ones_like(zs)
            sf = np.zeros(zs.shape, bool)
            sf[selfp, 0] = True
        elif k == 1:
            g, sm, sh = par[1], par[2].real, par[3].real
            base = (((tgt - par[0]) + toff) / g) ** 0.25
            s = base[:, None] * (1j ** np.arange(4))[None, :]
            zs = (s - sm) / sh
            cs = 1.0 / s
            sf = np.zeros(zs.shape, bool)
            idx = np.nonzero(selfp)[0]
            if len(idx):
                best = np.argmin(abs(zs[idx] - tloc[idx, None]), axis=1)
                zs[idx, best] = tloc[idx]
                cs[idx, best] = 1.0 / (sm + sh * tloc[idx])
                sf[idx, best] = True
        else:
            center, rad, zc, wm, wh = par[0], par[1].real, par[2], par[3].real, par[4].real
            u = ((tgt - center) + toff) / (rad * zc)
            with np.errstate(divide="ignore", invalid="ignore"):
                w0 = 1j * (1.0 - u) / (1.0 + u)
            z1 = (w0 - wm) / wh
            z1[selfp] = tloc[selfp]
            zinf = np.full(nt, (-1j - wm) / wh)
            zs = np.stack([z1, zinf], axis=1)
            cs = np.tile(np.array([1.0, -1.0], complex), (nt, 1))
            dead = abs(1.0 + u) <= 1e-14
            cs[dead & ~selfp, 0] = 0.0
            zs[dead & ~selfp, 0] = 10.0
            sf = np.zeros(zs.shape, bool)
            sf[selfp, 0] = True
        with np.errstate(invalid="ignore"):
            nearr = sf | (_bernstein_vec(zs) < rho0)
        rows = np.nonzero(nearr.any(axis=1))[0]
        if len(rows) == 0:
            continue
        block = np.zeros((len(rows), q), complex)
        for r in range(zs.shape[1]):
            z = zs[rows, r]
            c = cs[rows, r]
            nr = nearr[rows, r]
            if np.any(nr):
                Qv = _legendre_q_vec(z[nr], sf[rows, r][nr], q)
                block[nr] += -2.0 * c[nr, None] * (Qv @ L)
            fr = ~nr
            if np.any(fr):
                block[fr] += c[fr, None] * wref[None, :] / (tref[None, :] - z[fr, None])
        C[rows, sl] = block * jf[None, sl]
    return C / (2j * np.pi)


def cauchy_matrix(tgt, tpan, tloc, arr, q, L, rho0=3.2, backend=None, toff=None):
    """Matrix mapping node values f_j to (1/2 pi i) PV int f/(s - tgt_i).

    Targets are tgt + toff; pass the split from ``Contour.arrays`` (base,
    off) for targets graded onto a branch point so their distance to it
    survives rounding.
    """
    tgt = np.ascontiguousarray(np.atleast_1d(tgt), dtype=complex)
    toff = (np.zeros_like(tgt) if toff is None
            else np.ascontiguousarray(np.atleast_1d(toff), dtype=complex))
    tpan = np.ascontiguousarray(np.atleast_1d(tpan), dtype=np.int64)
    tloc = np.ascontiguousarray(np.atleast_1d(tloc), dtype=float)
    tref, wref = np.polynomial.legendre.leggauss(q)
    args = (tgt, toff, tpan, tloc, arr["base"], arr["off"], arr["W"], arr["jf"], arr["kind"],
            np.ascontiguousarray(arr["param"]), int(q), tref, wref,
            np.ascontiguousarray(L, dtype=float), float(rho0))
    use_nb = USE_NUMBA if backend is None else backend == "numba"
    if use_nb:
        return _cauchy_nb(*args)
    return _cauchy_np(*args)

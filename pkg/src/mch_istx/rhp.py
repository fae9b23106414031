"""Jump matrices, residue data and the panelled contour of the (y,t) RH problem.

The solver works with the identity-normalized function M~ = N+^{-1} M^ in the
upper half plane and N+^{-1} M^ (i sigma1) in the lower one.  Its jump is
e^{-p sigma3} J0 e^{p sigma3} on the cuts, the constant -i sigma1 on the gap,
and a unipotent triangular factor on small circles replacing each residue
condition.
"""
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .contour import Contour, panel_map
from .scattering import locate_discrete_spectrum, reflection_rho
from .spectral import Orientation, Side, SpectralError, _k, _phase


class RHDataError(ValueError):
    pass


class Normalization(str, Enum):
    NATIVE = "native"
    IDENTITY_TILDE = "identity_tilde"


# region codes per node
GAP, OUTER, SIGMA0, CIRC_UP, CIRC_DN = 0, 1, 2, 3, 4

ISIG1 = np.array([[0, 1j], [1j, 0]])
SIG3 = np.diag([1.0, -1.0]).astype(complex)


# ---------------------------------------------------------------------------
# pointwise jump algebra


def jump_J0(region, rho, orientation):
    """Unconjugated jump factor on the outer cut (region OUTER) or on the
    mismatch segments (region SIGMA0).  Vectorized over ``rho``."""
    rho = np.asarray(rho, dtype=complex)
    region = np.broadcast_to(np.asarray(region), rho.shape)
    orientation = Orientation(orientation)
    s0 = region == SIGMA0
    if np.any(s0 & (rho == 0)):
        raise RHDataError("division by reflection: rho = 0 on the mismatch segment")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inv = np.where(s0, 1.0 / np.where(rho == 0, 1, rho), 0)
    J = np.empty(rho.shape + (2, 2), complex)
    r2 = np.abs(rho) ** 2
    if orientation is Orientation.DESCENDING:
        J[..., 0, 0] = 1.0
        J[..., 0, 1] = -rho
        J[..., 1, 0] = np.where(s0, inv, np.conj(rho))
        J[..., 1, 1] = np.where(s0, 0.0, 1.0 - r2)
    else:
        J[..., 0, 0] = np.where(s0, 0.0, 1.0 - r2)
        J[..., 0, 1] = np.where(s0, -inv, -np.conj(rho))
        J[..., 1, 0] = rho
        J[..., 1, 1] = 1.0
    return J


def conjugate_phase(J0, p):
    """e^{-p sigma3} J0 e^{p sigma3}."""
    J = np.array(J0, dtype=complex, copy=True)
    e = np.exp(2 * np.asarray(p))
    J[..., 0, 1] = J[..., 0, 1] / e
    J[..., 1, 0] = J[..., 1, 0] * e
    return J


def phase_at(bg, y, t, lam, side=Side.PLUS):
    j = bg.phase_index
    return _phase(bg.A(j), y, t, lam, side)


def jump_hat(y, t, lam, rho, region, bg, normalization=Normalization.IDENTITY_TILDE):
    """Jump of M~ (IdentityTilde) or of the native M^ at real points.

    ``region`` is GAP, OUTER or SIGMA0 per point; ``rho`` is ignored on the gap.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    rho = np.broadcast_to(np.asarray(rho, dtype=complex), lam.shape)
    region = np.broadcast_to(np.asarray(region), lam.shape)
    norm = Normalization(normalization)
    out = np.empty(lam.shape + (2, 2), complex)
    gap = region == GAP
    out[gap] = -ISIG1
    cut = ~gap
    if np.any(cut):
        if np.any(lam[cut] == 0):
            raise SpectralError("phase singular at origin")
        p = phase_at(bg, y, t, lam[cut])
        out[cut] = conjugate_phase(jump_J0(region[cut], rho[cut], bg.orientation), p)
    if norm is Normalization.NATIVE:
        out = ISIG1 @ out
    return out


def residue_coefficient(kappa, lam_k, y, t, bg):
    """kappa e^{2p(lam_k)} (ascending/equal) or kappa e^{-2p(lam_k)}
    (descending), real because the phase is real inside the gap."""
    p = phase_at(bg, y, t, complex(lam_k), Side.OFF)
    s = -2.0 if bg.orientation is Orientation.DESCENDING else 2.0
    return float(kappa * np.exp(s * p).real)


def circle_jump(lam, center, c, upper, orientation):
    """Triangular circle factor removing the pole at ``center``."""
    lam = np.asarray(lam, dtype=complex)
    J = np.zeros(lam.shape + (2, 2), complex)
    J[..., 0, 0] = 1.0
    J[..., 1, 1] = 1.0
    v = -c / (lam - center)
    if orientation is Orientation.DESCENDING:
        J[..., 0, 1] = v
    else:
        J[..., 1, 0] = v
    if not upper:
        J = J[..., ::-1, ::-1]
    return J


# ---------------------------------------------------------------------------
# data container


@dataclass(frozen=True, eq=False)
class Pole:
    lam: float      # centre (+lam_k or -lam_k)
    kappa: float
    lam_k: float    # positive eigenvalue it belongs to
    radius: float


@dataclass(frozen=True, eq=False)
class RHData:
    bg: object
    contour: Contour
    region: np.ndarray      # per node
    pole_of: np.ndarray     # per node, index into poles or -1
    rho: np.ndarray         # per node (nan where unused)
    chk_lam: np.ndarray     # one check point per panel (local t = 0)
    chk_rho: np.ndarray
    chk_region: np.ndarray
    chk_pole: np.ndarray
    poles: tuple
    discrete: tuple
    Lambda: float
    y_max: float
    t_max: float
    normalization: Normalization = Normalization.IDENTITY_TILDE
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self):
        return self.contour.n

    def jump(self, y, t):
        """J~ at every node."""
        return self._jump(y, t, self.contour.arrays()["lam"], self.rho,
                          self.region, self.pole_of)

    def jump_check(self, y, t):
        return self._jump(y, t, self.chk_lam, self.chk_rho, self.chk_region, self.chk_pole)

    def _jump(self, y, t, lam, rho, region, pole_of):
        J = np.empty(lam.shape + (2, 2), complex)
        flat = region <= SIGMA0
        J[flat] = jump_hat(y, t, lam[flat].real, rho[flat], region[flat], self.bg)
        for i, pl in enumerate(self.poles):
            c = residue_coefficient(pl.kappa, pl.lam_k, y, t, self.bg)
            for reg, up in ((CIRC_UP, True), (CIRC_DN, False)):
                sel = (pole_of == i) & (region == reg)
                J[sel] = circle_jump(lam[sel], pl.lam, c, up, self.bg.orientation)
        return J

    def to_json(self):
        arr = self.contour.arrays()
        return json.dumps({
            "A1": self.bg.A1, "A2": self.bg.A2,
            "orientation": self.bg.orientation.value,
            "Lambda": self.Lambda, "y_max": self.y_max, "t_max": self.t_max,
            "q": self.contour.q,
            "panels": [{"kind": int(k), "tag": tg, "start": [complex(a).real, complex(a).imag],
                        "end": [complex(b).real, complex(b).imag]}
                       for k, tg, (a, b) in zip(self.contour.kind, self.contour.tag,
                                                 self.contour.span)],
            "nodes": {"re": arr["lam"].real.tolist(), "im": arr["lam"].imag.tolist(),
                      "rho_re": np.nan_to_num(self.rho.real).tolist(),
                      "rho_im": np.nan_to_num(self.rho.imag).tolist()},
            "poles": [{"lam": p.lam, "kappa": p.kappa, "radius": p.radius} for p in self.poles],
        })


# ---------------------------------------------------------------------------
# mesh construction


def _phase_rate(bg, lam, y_max, t_max):
    """Upper bound for |d/dlam| of the jump phase 2 Im p over |y| <= y_max."""
    j = bg.phase_index
    A = bg.A(j)
    lam = np.asarray(lam, float)
    # |k| rather than Re k: in the gap the same scale sets the exponential
    # variation of the solution near the branch points
    k = np.abs(_k(A, lam + 0j, 1))
    kp = np.abs(lam) / np.maximum(k, 1e-300)
    return A * (kp * (y_max + 2 * t_max / lam**2) + k * 4 * t_max / np.abs(lam) ** 3)


def _rho_weight(lam, scan, q=16):
    """Phase budget relaxation where the jump is close to I: the
    interpolation error (theta e / 4q)^q is multiplied by |rho|, so the
    allowed phase per panel grows like |rho|^(-1/q)."""
    if scan is None:
        return np.ones_like(lam)
    sl, sr = scan
    r = np.maximum(np.interp(np.abs(lam), sl, sr), 1e-300)
    return np.clip(r ** (1.0 / q), 0.2, 1.0)


# the rotation rate of rho on the mismatch segments peaks near resonances,
# where its analytic continuation has a nearby pole; weight it above the
# plain phase budget
RHO_RATE_WEIGHT = 4.0


def _mid_breaks(bg, a, b, y_max, t_max, theta0, hmax, scan, rho_rate=None):
    xs = np.linspace(a, b, 801)
    rate = _phase_rate(bg, xs, y_max, t_max) * _rho_weight(xs, scan)
    if rho_rate is not None:
        rate = rate + RHO_RATE_WEIGHT * np.interp(np.abs(xs), *rho_rate)
    dens = rate / theta0 + 1.0 / hmax
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))])
    n = max(1, int(np.ceil(cdf[-1])))
    return np.interp(np.linspace(0, cdf[-1], n + 1), cdf, xs)


def _grade_len(bg, b, direction, L, y_max, t_max, theta0, cap):
    """Largest delta <= cap such that the quartic panel b + delta s^4 never
    oscillates faster in its local variable than an affine panel carrying
    theta0: max |dtheta/dt| = max rate * 2 delta s^3 <= theta0 / 4."""
    s = np.linspace(1e-3, 1.0, 200)
    d = min(cap, L)
    for _ in range(80):
        lam = b + direction * d * s**4
        f = _phase_rate(bg, lam, y_max, t_max) * 2 * d * s**3
        if f.max() <= theta0 / 4:
            return d
        d *= 0.8
    return d


def _graded_breaks(a, b, da, db, mid):
    """Affine breaks on [a + da, b - db]: panels doubling in length away
    from each graded end until they reach the regular spacing of ``mid``,
    then the regular breaks."""
    idx = np.arange(len(mid), dtype=float)
    centers = 0.5 * (mid[1:] + mid[:-1])
    widths = np.diff(mid)

    def spacing(x):
        return np.interp(x, centers, widths)

    def walk(e, h, sign, stop):
        out = []
        while True:
            h2 = 2 * h
            nxt = e + sign * h2
            if h2 >= spacing(nxt) or sign * (stop - nxt) <= spacing(nxt):
                return out
            out.append(nxt)
            e, h = nxt, h2

    lo0, hi0 = a + da, b - db
    left = walk(lo0, da, 1, hi0) if da > 0 else []
    lo = left[-1] if left else lo0
    right = walk(hi0, db, -1, lo) if db > 0 else []
    hi = right[-1] if right else hi0
    u_lo, u_hi = np.interp([lo, hi], mid, idx)
    n = max(1, int(np.ceil(u_hi - u_lo - 1e-9)))
    inner = np.interp(np.linspace(u_lo, u_hi, n + 1)[1:-1], idx, mid)
    return np.array([lo0, *left, *inner, *right[::-1], hi0])


def _add_cut_interval(ct, bg, a, b, tag, grade_a, grade_b, y_max, t_max, theta0, hmax,
                      refine, scan, rho_rate=None):
    L = b - a
    cap = 0.25 * L / refine
    da = _grade_len(bg, a, 1, L, y_max, t_max, theta0, cap) if grade_a else 0.0
    db = _grade_len(bg, b, -1, L, y_max, t_max, theta0, cap) if grade_b else 0.0
    mid = _mid_breaks(bg, a + da, b - db, y_max, t_max, theta0, hmax, scan, rho_rate)
    br = _graded_breaks(a, b, da, db, mid)
    if grade_a:
        ct.add_quartic(a, da, 0.0, 1.0, tag)
    for s0, s1 in zip(br[:-1], br[1:]):
        ct.add_affine(s0, s1, tag)
    if grade_b:
        ct.add_quartic(b, -db, -1.0, 0.0, tag)


def circle_radius(lam_k, others, gap, radius=None):
    """Default radius min(dist/3, 0.05); an explicit radius is validated."""
    d = min(lam_k, gap - lam_k, *[abs(lam_k - o) for o in others if o != lam_k],
            *[lam_k + o for o in others])
    if radius is None:
        return min(d / 3.0, 0.05)
    if radius >= d / 3.0:
        raise RHDataError("circle radius too large for the pole separation")
    return float(radius)


def poles_to_circles(discrete, bg, radius=None):
    """Pole list (both +lam_k and -lam_k) with circle radii."""
    lams = [d.lam for d in discrete]
    poles = []
    for d in discrete:
        r = circle_radius(d.lam, lams, bg.gap, radius)
        poles.append(Pole(d.lam, d.kappa, d.lam, r))
        poles.append(Pole(-d.lam, d.kappa, d.lam, r))
    return tuple(poles)


def _gap_breaks(g, d, poles, refine):
    """Breakpoints of the affine part of the gap (-g+d, g-d) with a central
    panel around 0 and the circle crossings lam_k +- r as nodes."""
    must = {-g + d, g - d}
    cmin = g / 8
    for pl in poles:
        must.update({pl.lam - pl.radius, pl.lam + pl.radius})
        if pl.lam > 0:
            cmin = min(cmin, 0.5 * (pl.lam - pl.radius))
    c0 = cmin / refine
    must.update({-c0, c0})
    pts = np.array(sorted(must))
    hmax = g / (4 * refine)
    out = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(np.ceil((b - a) / hmax - 1e-9)))
        if a == -c0 and b == c0:
            n = 1
        out.extend(np.linspace(a, b, n + 1)[1:])
    return np.array(out)


def _pad_ends(pts, d):
    """Geometric breaks (lengths 2d, 4d, ...) inside the first and last
    intervals of ``pts`` so a short graded panel meets its neighbour
    gradually."""
    pts = list(pts)

    def fill(a, b):
        out, e, h = [], a, d
        while abs(b - e) > 3 * h:
            h *= 2
            e = e + np.sign(b - a) * h
            if abs(b - e) < h:
                break
            out.append(e)
        return out

    left = fill(pts[0], pts[1])
    right = fill(pts[-1], pts[-2])
    return np.array([pts[0], *left, *pts[1:-1], *right[::-1], pts[-1]])


def rho_scan(p, lam_max=60.0, n=48, x0=0.0):
    """Coarse |rho| on the right arm, used for Lambda and mesh weights."""
    bg = p.bg
    o = bg.outer
    lam = o + np.geomspace(1e-2, lam_max - o, n)
    if bg.A1 == bg.A2 and np.allclose(p.m, bg.A1, atol=0, rtol=0):
        return lam, np.zeros_like(lam)
    left = np.abs(reflection_rho(p, -lam, 0.0, x0, discrete=False).rho)
    right = np.abs(reflection_rho(p, lam, 0.0, x0, discrete=False).rho)
    return lam, np.maximum(left, right)


def sigma0_rho_rate(p, n=48, x0=0.0):
    """|d arg rho / dlam| on the mismatch segments (max over the two
    mirrored sides) as a function of |lam|; None when there is no
    mismatch segment."""
    bg = p.bg
    g, o = bg.gap, bg.outer
    if o <= g:
        return None
    s = 0.5 * (1 - np.cos(np.pi * (np.arange(n) + 0.5) / n))
    lam = g + (o - g) * s
    rates = []
    for sgn in (1, -1):
        r = reflection_rho(p, sgn * lam, 0.0, x0, discrete=False).rho
        rates.append(np.abs(np.gradient(np.unwrap(np.angle(r)), lam)))
    return lam, np.maximum(*rates)


def choose_lambda(scan, bg, rho_tol=1e-9, cap=60.0):
    lam, r = scan
    above = np.nonzero(r >= rho_tol)[0]
    if len(above) == 0:
        return bg.outer + 1.0
    i = above[-1]
    if i + 1 >= len(lam):
        return cap
    return float(min(cap, max(lam[i + 1], bg.outer + 1.0)))


def build_rhdata(p, y_max=20.0, t_max=0.0, refine=1, q=16, theta0=8.0, hmax=1.0,
                 rho_tol=1e-9, Lambda=None, Lambda_cap=60.0, radius=None, x0=0.0,
                 discrete=None):
    """Scatter the profile at t = 0 and lay out the (y-independent) contour,
    sized for |y| <= y_max and 0 <= t <= t_max."""
    bg = p.bg
    g, o = bg.gap, bg.outer
    theta = theta0 / refine
    scan = rho_scan(p, Lambda_cap, x0=x0)
    if Lambda is None:
        Lambda = choose_lambda(scan, bg, rho_tol, Lambda_cap)
    if Lambda <= o:
        raise RHDataError("truncation Lambda must exceed the outer branch point")
    if discrete is None:
        discrete = locate_discrete_spectrum(p, 0.0, x0)
    poles = poles_to_circles(discrete, bg, radius)

    ct = Contour(q)
    args = (y_max, t_max, theta, hmax / refine, refine, scan)
    _add_cut_interval(ct, bg, -Lambda, -o, "outer", False, True, *args)
    rrate = sigma0_rho_rate(p, x0=x0)
    if o > g:
        _add_cut_interval(ct, bg, -o, -g, "sigma0", True, True, *args, rrate)
    dg = _grade_len(bg, g, -1, 2 * g, y_max, t_max, theta, 0.25 * g / refine)
    for pl in poles:
        dg = min(dg, 0.5 * (g - abs(pl.lam) - pl.radius))
    ct.add_quartic(-g, dg, 0.0, 1.0, "gap")
    br = _pad_ends(_gap_breaks(g, dg, poles, refine), dg)
    for s0, s1 in zip(br[:-1], br[1:]):
        ct.add_affine(s0, s1, "gap")
    ct.add_quartic(g, -dg, -1.0, 0.0, "gap")
    if o > g:
        _add_cut_interval(ct, bg, g, o, "sigma0", True, True, *args, rrate)
    _add_cut_interval(ct, bg, o, Lambda, "outer", True, False, *args)
    for i, pl in enumerate(poles):
        ct.add_circle(pl.lam, pl.radius, f"pole{i}", n_half=2 * refine)

    arr = ct.arrays()
    region, pole_of = _regions(ct.tag, q)
    chk_t = np.zeros(1)
    chk_lam = np.array([panel_map(k, par, chk_t)[0][0] for k, par in zip(ct.kind, ct.param)])
    chk_region, chk_pole = _regions(ct.tag, 1)

    rho = np.full(ct.n, np.nan + 0j)
    crho = np.full(ct.npanel, np.nan + 0j)
    cut = (region == OUTER) | (region == SIGMA0)
    ccut = (chk_region == OUTER) | (chk_region == SIGMA0)
    lam_all = np.concatenate([arr["lam"][cut].real, chk_lam[ccut].real])
    if bg.A1 == bg.A2 and np.all(p.m == bg.A1):
        vals = np.zeros(len(lam_all), complex)
    else:
        vals = reflection_rho(p, lam_all, 0.0, x0, discrete=False).rho
    rho[cut] = vals[: cut.sum()]
    crho[ccut] = vals[cut.sum():]

    return RHData(bg, ct, region, pole_of, rho, chk_lam, crho, chk_region, chk_pole,
                  poles, tuple(discrete), float(Lambda), float(y_max), float(t_max))


def _regions(tags, rep):
    reg, pol = [], []
    for tg in tags:
        if tg == "gap":
            r, pi = GAP, -1
        elif tg == "outer":
            r, pi = OUTER, -1
        elif tg == "sigma0":
            r, pi = SIGMA0, -1
        else:
            name, half = tg.split("_")
            r = CIRC_UP if half == "up" else CIRC_DN
            pi = int(name[4:])
        reg.append(r)
        pol.append(pi)
    return np.repeat(np.array(reg), rep), np.repeat(np.array(pol), rep)

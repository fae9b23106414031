"""Panelled jump contours.

A contour is a list of panels, each carrying ``q`` Gauss-Legendre nodes in a
local variable t in [-1, 1].  Three panel maps are used:

* affine   lam = c + h t
* quartic  lam = a + g s^4, s = sm + sh t   (graded toward a branch point a)
* arc      lam = c + r z0 (i - w)/(i + w), w = wm + wh t   (circle pieces)

For each map the Cauchy kernel dlam/(lam - lam0) is a sum of simple poles
c_r dt/(t - z_r) in the local variable, acting on f * jf.  For the quartic
map phi'/(phi - lam0) = sum_r s/(s_r (s - s_r)), so jf = s and c_r = 1/s_r:
a density blowing up like |lam - a|^(-1/4) becomes bounded.  For the arc the
extra pole at w = -i carries residue -1; jf = 1 for arcs and affine panels.
"""
from dataclasses import dataclass, field

import numpy as np

AFFINE, QUARTIC, ARC = 0, 1, 2


@dataclass
class Contour:
    q: int
    kind: list = field(default_factory=list)
    param: list = field(default_factory=list)  # 6 complex numbers per panel
    tag: list = field(default_factory=list)
    span: list = field(default_factory=list)   # (lam_start, lam_end) per panel

    def __post_init__(self):
        self.tref, self.wref = np.polynomial.legendre.leggauss(self.q)

    # -- construction -------------------------------------------------------
    def add_affine(self, a, b, tag):
        c, h = (a + b) / 2, (b - a) / 2
        self._add(AFFINE, [c, h, 0, 0, 0, 0], tag, a, b)

    def add_quartic(self, a, g, s0, s1, tag):
        """Panel lam = a + g s^4 for s in [s0, s1] (same sign, |s| <= 1)."""
        sm, sh = (s0 + s1) / 2, (s1 - s0) / 2
        self._add(QUARTIC, [a, g, sm, sh, 0, 0], tag, a + g * s0**4, a + g * s1**4)

    def add_arc(self, center, r, z0, w0, w1, tag):
        wm, wh = (w0 + w1) / 2, (w1 - w0) / 2
        self._add(ARC, [center, r, z0, wm, wh, 0], tag,
                  _arc_map(center, r, z0, w0), _arc_map(center, r, z0, w1))

    def _add(self, kind, param, tag, a, b):
        self.kind.append(kind)
        self.param.append(np.asarray(param, dtype=complex))
        self.tag.append(tag)
        self.span.append((a, b))
        self._arrays = None

    def add_interval(self, a, b, tag, n_mid, grade_left=False, grade_right=False,
                     delta=None, n_grade=1, breaks=None):
        """Real interval [a, b] with optional quartic grading at either end
        and ``n_mid`` equal affine panels in between (or explicit ``breaks``)."""
        L = b - a
        if delta is None:
            delta = 0.25 * L
        lo, hi = a, b
        if grade_left:
            e = np.linspace(0, 1, n_grade + 1)
            for s0, s1 in zip(e[:-1], e[1:]):
                self.add_quartic(a, delta, s0, s1, tag)
            lo = a + delta
        if grade_right:
            hi = b - delta
        if breaks is None:
            breaks = np.linspace(lo, hi, n_mid + 1)
        for s0, s1 in zip(breaks[:-1], breaks[1:]):
            self.add_affine(s0, s1, tag)
        if grade_right:
            e = np.linspace(-1, 0, n_grade + 1)
            for s0, s1 in zip(e[:-1], e[1:]):
                self.add_quartic(b, -delta, s0, s1, tag)

    def add_circle(self, center, r, tag, n_half=2):
        """Counter-clockwise circle split into an upper and a lower arc."""
        e = np.linspace(-1, 1, n_half + 1)
        for z0, t in ((1j, tag + "_up"), (-1j, tag + "_dn")):
            for w0, w1 in zip(e[:-1], e[1:]):
                self.add_arc(center, r, z0, w0, w1, t)

    # -- node arrays --------------------------------------------------------
    @property
    def npanel(self):
        return len(self.kind)

    @property
    def n(self):
        return self.npanel * self.q

    def arrays(self):
        if self._arrays is None:
            self._arrays = self._build()
        return self._arrays

    def _build(self):
        q = self.q
        t, w = self.tref, self.wref
        lam = np.empty(self.n, complex)
        W = np.empty(self.n, complex)
        jf = np.empty(self.n, complex)
        base = np.empty(self.n, complex)
        off = np.empty(self.n, complex)
        for p, (k, par) in enumerate(zip(self.kind, self.param)):
            sl = slice(p * q, (p + 1) * q)
            lam[sl], dl, jf[sl] = panel_map(k, par, t)
            W[sl] = w * dl
            base[sl], off[sl] = panel_split(k, par, t)
        pan = np.repeat(np.arange(self.npanel), q)
        tloc = np.tile(t, self.npanel)
        return {"lam": lam, "W": W, "jf": jf, "pan": pan, "tloc": tloc,
                "base": base, "off": off,
                "kind": np.asarray(self.kind, np.int64),
                "param": np.asarray(self.param, complex).reshape(-1, 6)}

    def tags(self):
        return np.repeat(np.asarray(self.tag, dtype=object), self.q)

    def locate(self, lam0, tol=1e-13):
        """Panel index and local coordinate of a point on the contour, or
        (-1, nan) if it is not on any panel."""
        for p, (k, par) in enumerate(zip(self.kind, self.param)):
            t = panel_inverse(k, par, lam0)
            if t is not None and abs(t.imag) < tol and -1 <= t.real <= 1:
                lam_t = panel_map(k, par, np.array([t.real]))[0][0]
                if abs(lam_t - lam0) < 1e-10 * max(1.0, abs(lam0)):
                    return p, t.real
        return -1, np.nan


def _arc_map(center, r, z0, w):
    return center + r * z0 * (1j - w) / (1j + w)


def panel_map(kind, par, t):
    """Return lam(t), dlam/dt and the density factor at local points t."""
    t = np.asarray(t, dtype=float)
    if kind == AFFINE:
        c, h = par[0], par[1]
        return c + h * t, np.full(t.shape, h, complex), np.ones(t.shape, complex)
    if kind == QUARTIC:
        a, g, sm, sh = par[0], par[1], par[2].real, par[3].real
        s = sm + sh * t
        return a + g * s**4, 4 * g * s**3 * sh, s.astype(complex)
    center, r, z0, wm, wh = par[0], par[1].real, par[2], par[3].real, par[4].real
    w = wm + wh * t
    lam = _arc_map(center, r, z0, w)
    dl = r * z0 * (-2j) / (1j + w) ** 2 * wh
    return lam, dl, np.ones(t.shape, complex)


def panel_split(kind, par, t):
    """lam(t) as base + offset, exact offsets from the branch point on
    quartic panels."""
    t = np.asarray(t, dtype=float)
    if kind == QUARTIC:
        s = par[2].real + par[3].real * t
        return np.full(t.shape, par[0], complex), par[1] * s**4
    lam = panel_map(kind, par, t)[0]
    return lam, np.zeros(t.shape, complex)


def panel_inverse(kind, par, lam0):
    lam0 = complex(lam0)
    if kind == AFFINE:
        return (lam0 - par[0]) / par[1]
    if kind == QUARTIC:
        a, g, sm, sh = par[0], par[1], par[2].real, par[3].real
        w = (lam0 - a) / g
        if w.imag != 0 or w.real < 0:
            return None
        s = np.sign(sm) * w.real**0.25
        return complex((s - sm) / sh)
    center, r, z0, wm, wh = par[0], par[1].real, par[2], par[3].real, par[4].real
    u = (lam0 - center) / (r * z0)
    if abs(1 + u) < 1e-15:
        return None
    w = 1j * (1 - u) / (1 + u)
    return (w - wm) / wh


def legendre_matrix(q):
    """L[n, j] with f(t) ~ sum_n (sum_j L[n, j] f_j) P_n(t) on GL nodes."""
    t, w = np.polynomial.legendre.leggauss(q)
    V = np.polynomial.legendre.legvander(t, q - 1)  # (j, n)
    n = np.arange(q)
    return ((2 * n + 1) / 2)[:, None] * V.T * w[None, :]

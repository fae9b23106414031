"""Step-like initial data: families, Helmholtz inversion, tail integrals and
the x <-> y change of variables."""
from dataclasses import dataclass, field
from math import factorial
from functools import partial

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .kernels import exp_recursion
from .spectral import Backgrounds, Orientation


class ProfileError(ValueError):
    pass


MAX_CELL = 0.5  # coarsest spacing accepted by the exponential quadrature


@dataclass(frozen=True, eq=False)
class Profile:
    x: np.ndarray
    u: np.ndarray
    ux: np.ndarray
    m: np.ndarray
    bg: Backgrounds
    tail_decay: float
    exact: object = None  # callable x -> (u, ux, m) for analytic families
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def m_spline(self):
        if "ms" not in self._cache:
            self._cache["ms"] = CubicSpline(self.x, self.m, bc_type="not-a-knot")
        return self._cache["ms"]

    def m_coef(self):
        """Cubic coefficients of m per cell, rows (c3, c2, c1, c0)."""
        return np.ascontiguousarray(self.m_spline.c.T)


# ---------------------------------------------------------------------------
# families


def _tanh_eval(A1, A2, w, x):
    th = np.tanh(x / w)
    s2 = 1.0 - th**2
    u = A1 + (A2 - A1) * (1.0 + th) / 2
    ux = (A2 - A1) / (2 * w) * s2
    uxx = -(A2 - A1) / w**2 * s2 * th
    return u, ux, u - uxx


def _bump_eval(A1, A2, w, c, s, x):
    u, ux, m = _tanh_eval(A1, A2, w, x)
    g = c * np.exp(-(x / s) ** 2)
    gx = -2 * x / s**2 * g
    gxx = (4 * x**2 / s**4 - 2 / s**2) * g
    return u + g, ux + gx, m + g - gxx


def _constant_eval(A, x):
    x = np.asarray(x, dtype=float)
    return np.full_like(x, A), np.zeros_like(x), np.full_like(x, A)


# partials of module-level functions, so profiles pickle into worker processes
def _tanh_family(A1, A2, w):
    return partial(_tanh_eval, A1, A2, w)


def _bump_family(A1, A2, w, c, s):
    return partial(_bump_eval, A1, A2, w, c, s)


def _constant_family(A):
    return partial(_constant_eval, A)


_FAMILY_KEYS = {
    "tanh": {"A1", "A2", "w"},
    "bump": {"A1", "A2", "w", "c", "s"},
    "constant": {"A"},
    "file": {"path", "A1", "A2"},
}
_GRID_KEYS = {"L", "N", "tail_tol"}


def build_profile(spec):
    """Build a Profile from a dict such as
    ``{"family": "tanh", "A1": 1, "A2": 2, "w": 2, "L": 40, "N": 4001}``.

    Families: tanh, bump (tanh step plus c*exp(-x^2/s^2)), constant, file.
    """
    spec = dict(spec)
    fam = spec.pop("family", None)
    if fam not in _FAMILY_KEYS:
        raise ProfileError(f"unknown profile family {fam!r}")
    extra = set(spec) - _FAMILY_KEYS[fam] - _GRID_KEYS
    if extra:
        raise ProfileError(f"unknown profile keys {sorted(extra)}")
    tol = float(spec.get("tail_tol", 1e-10))
    defaults = {"w": 2.0, "c": 1.0, "s": 1.0}
    p = {**defaults, **spec}

    if fam == "file":
        x, u, m = read_grid_file(p["path"])
        bg = Backgrounds(p.get("A1", u[0]), p.get("A2", u[-1]))
        ux = CubicSpline(x, u, bc_type="not-a-knot")(x, 1)
        return _finish(x, u, ux, m, bg, tol, None)

    L = float(p.get("L", 40.0))
    N = int(p.get("N", 4001))
    if N < 3 or L <= 0:
        raise ProfileError("grid needs N >= 3 and L > 0")
    x = np.linspace(-L, L, N)
    if fam == "constant":
        bg = Backgrounds(p["A"], p["A"])
        f = _constant_family(bg.A1)
    else:
        bg = Backgrounds(p["A1"], p["A2"])
        if fam == "tanh":
            f = _tanh_family(bg.A1, bg.A2, float(p["w"]))
        else:
            f = _bump_family(bg.A1, bg.A2, float(p["w"]), float(p["c"]), float(p["s"]))
    u, ux, m = f(x)
    return _finish(x, u, ux, m, bg, tol, f)


def _finish(x, u, ux, m, bg, tol, exact):
    x = np.asarray(x, dtype=float)
    if np.any(np.diff(x) <= 0):
        raise ProfileError("grid must be strictly increasing")
    if not np.all(np.isfinite(m)) or np.min(m) <= 0:
        raise ProfileError("momentum not positive")
    if abs(u[0] - bg.A1) > tol or abs(u[-1] - bg.A2) > tol:
        raise ProfileError("domain too short")
    decay = max(abs(m[0] - bg.A1), abs(m[-1] - bg.A2))
    return Profile(x, np.asarray(u, float), np.asarray(ux, float), np.asarray(m, float),
                   bg, decay, exact)


def profile_from_samples(x, u, ux, m, bg, tail_tol=1e-10):
    return _finish(x, u, ux, m, bg, tail_tol, None)


def read_grid_file(path):
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 3:
        raise ProfileError("grid file needs three columns: x u m")
    x, u, m = data.T
    if np.any(np.diff(x) <= 0):
        raise ProfileError("grid must be strictly increasing")
    return x, u, m


# ---------------------------------------------------------------------------
# Helmholtz inversion


def _moments(h, kmax, reverse):
    """Per-cell integrals of s^k against exp(-(h-s)) (reverse=False) or
    exp(-s) (reverse=True) over [0, h], by a rapidly convergent series."""
    h = np.asarray(h, dtype=float)
    out = np.zeros((kmax + 1,) + h.shape)
    nterms = 30
    for k in range(kmax + 1):
        acc = np.zeros_like(h)
        term = np.ones_like(h)
        for n in range(nterms):
            if reverse:
                coef = 1.0 / (factorial(n) * (n + k + 1))
            else:
                coef = factorial(k) / factorial(n + k + 1)
            acc += coef * term
            term = term * (-h)
        out[k] = h ** (k + 1) * acc
    return out


def helmholtz_invert(x, m, bg, order=3):
    """Solve u - u_xx = m with u -> A1, A2 at the two ends.

    The two exponential convolutions are integrated exactly cell by cell
    against the piecewise cubic (order=3) or linear (order=1) interpolant of
    m - A_j.  Returns (u, u_x).
    """
    x = np.asarray(x, dtype=float)
    m = np.asarray(m, dtype=float)
    h = np.diff(x)
    if h.max() > MAX_CELL:
        raise ProfileError("grid too coarse for the exponential kernels")
    decay = np.exp(-h)

    def cell_coeffs(g):
        if order == 1:
            c = np.zeros((4, len(h)))
            c[3] = g[:-1]
            c[2] = np.diff(g) / h
            return c
        return CubicSpline(x, g, bc_type="not-a-knot").c

    g1 = cell_coeffs(m - bg.A1)  # rows: c3, c2, c1, c0
    g2 = cell_coeffs(m - bg.A2)
    Ml = _moments(h, 3, reverse=False)
    Mr = _moments(h, 3, reverse=True)
    inc_l = sum(g1[3 - k] * Ml[k] for k in range(4))
    inc_r = sum(g2[3 - k] * Mr[k] for k in range(4))

    left = np.empty_like(x)
    left[0] = 0.0
    left[1:] = exp_recursion(decay, inc_l)
    right = np.empty_like(x)
    right[-1] = 0.0
    right[:-1] = exp_recursion(decay[::-1], inc_r[::-1])[::-1]

    u = 0.5 * (bg.A1 + bg.A2) + 0.5 * (left + right)
    ux = 0.5 * (bg.A2 - bg.A1) + 0.5 * (right - left)
    return u, ux


def exp_convolutions(x, m, bg):
    """The two one-sided convolutions int_{-inf}^x e^{-(x-s)}(m-A1) and
    int_x^inf e^{(x-s)}(m-A2) on the grid (used by the small-lam formulas)."""
    u, ux = helmholtz_invert(x, m, bg)
    # u + ux = A2 + right, u - ux = A1 + left
    return u - ux - bg.A1, u + ux - bg.A2


# ---------------------------------------------------------------------------
# tail integrals and the y variable


@dataclass(frozen=True)
class TailIntegrals:
    x: np.ndarray
    left_values: np.ndarray
    right_values: np.ndarray
    _S: object
    bg: Backgrounds

    def left(self, x):
        """int_{-inf}^x (m - A1)."""
        x = np.clip(x, self.x[0], self.x[-1])
        return self._S(x) - self._S(self.x[0]) - self.bg.A1 * (x - self.x[0])

    def right(self, x):
        """int_x^{inf} (m - A2)."""
        x = np.clip(x, self.x[0], self.x[-1])
        return self._S(self.x[-1]) - self._S(x) - self.bg.A2 * (self.x[-1] - x)


def tail_integrals(p):
    S = p.m_spline.antiderivative()
    ti = TailIntegrals(p.x, None, None, S, p.bg)
    object.__setattr__(ti, "left_values", ti.left(p.x))
    object.__setattr__(ti, "right_values", ti.right(p.x))
    return ti


class YMap:
    """Monotone map x -> y at fixed t with a Newton-polished inverse."""

    def __init__(self, p, t):
        self.bg = p.bg
        self.t = float(t)
        self._ti = tail_integrals(p)
        self._ms = p.m_spline
        self.x = p.x
        self.y = self(p.x)
        if np.any(np.diff(self.y) <= 0):
            raise ProfileError("y-map degenerate")
        self._guess = PchipInterpolator(self.y, self.x, extrapolate=True)

    def __call__(self, x):
        bg, ti = self.bg, self._ti
        if bg.orientation is Orientation.DESCENDING:
            return x + ti.left(x) / bg.A1 - bg.A1**2 * self.t
        return x - ti.right(x) / bg.A2 - bg.A2**2 * self.t

    def dydx(self, x):
        A = self.bg.A1 if self.bg.orientation is Orientation.DESCENDING else self.bg.A2
        return self._ms(x) / A

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        x = self._guess(y)
        for _ in range(4):
            x = x - (self(x) - y) / self.dydx(x)
        return x


def y_of_x(p, t=0.0):
    """y = x - right(x)/A2 - A2^2 t (ascending/equal) or
    y = x + left(x)/A1 - A1^2 t (descending)."""
    return YMap(p, t)

"""Branch-aware spectral functions: k_j, omega_j, nu_j, D_j and the phases.

All functions accept scalar or array ``lam``.  ``side`` selects the boundary
value on a cut (PLUS is the limit from the upper half plane).
"""
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

BRANCH_EXCLUSION = 1e-10


class Orientation(str, Enum):
    ASCENDING = "ascending"
    DESCENDING = "descending"
    EQUAL = "equal"


class Side(IntEnum):
    MINUS = -1
    OFF = 0
    PLUS = 1


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class CutGeometry:
    sigma1: tuple
    sigma2: tuple
    sigma0: tuple
    branch_points: tuple


@dataclass(frozen=True)
class Backgrounds:
    A1: float
    A2: float

    def __post_init__(self):
        for name in ("A1", "A2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise SpectralError(f"{name} must be positive")
        object.__setattr__(self, "A1", float(self.A1))
        object.__setattr__(self, "A2", float(self.A2))

    @property
    def orientation(self):
        if self.A1 < self.A2:
            return Orientation.ASCENDING
        if self.A1 > self.A2:
            return Orientation.DESCENDING
        return Orientation.EQUAL

    def A(self, j):
        if j == 1:
            return self.A1
        if j == 2:
            return self.A2
        raise SpectralError("index must be 1 or 2")

    @property
    def phase_index(self):
        """Background whose k enters the (y,t) phase: 2 unless descending."""
        return 1 if self.orientation is Orientation.DESCENDING else 2

    @property
    def gap(self):
        """Half-width of the spectral gap (-gap, gap) free of any cut."""
        return 1.0 / max(self.A1, self.A2)

    @property
    def outer(self):
        """Inner endpoint of the common cut |lam| >= 1/min(A)."""
        return 1.0 / min(self.A1, self.A2)

    def cuts(self):
        inf = np.inf
        s1 = ((-inf, -1 / self.A1), (1 / self.A1, inf))
        s2 = ((-inf, -1 / self.A2), (1 / self.A2, inf))
        lo, hi = self.gap, self.outer
        s0 = () if lo == hi else ((-hi, -lo), (lo, hi))
        bps = tuple(sorted({-1 / self.A1, -1 / self.A2, 1 / self.A2, 1 / self.A1}))
        return CutGeometry(s1, s2, s0, bps)


@dataclass(frozen=True)
class SpectralPoint:
    lam: complex
    side: Side = Side.OFF


# ---------------------------------------------------------------------------
# elementary branches

def _sqrt_side(w, s):
    """Principal sqrt, except on the negative real axis where the sign of the
    vanishing imaginary perturbation is ``s`` (s=0 falls back to +)."""
    w = np.asarray(w, dtype=complex)
    r = np.sqrt(w)
    neg = (w.imag == 0) & (w.real < 0)
    if np.any(neg):
        sg = np.where(np.asarray(s) < 0, -1.0, 1.0)
        r = np.where(neg, 1j * sg * np.sqrt(np.abs(w.real)), r)
    return r


def _qroot_side(w, s):
    w = np.asarray(w, dtype=complex)
    r = np.sqrt(np.sqrt(w))
    neg = (w.imag == 0) & (w.real < 0)
    if np.any(neg):
        sg = np.where(np.asarray(s) < 0, -1.0, 1.0)
        r = np.where(neg, np.abs(w.real) ** 0.25 * np.exp(1j * sg * np.pi / 4), r)
    return r


def _sgn_re(lam):
    return np.where(np.real(lam) < 0, -1.0, 1.0)


def _r(A, lam, side):
    """r = sqrt(1 - A^2 lam^2) with k = i r / A; r has Re >= 0."""
    lam = np.asarray(lam, dtype=complex)
    return _sqrt_side(1.0 - A * A * lam * lam, -np.asarray(side) * _sgn_re(lam))


def _k(A, lam, side=0):
    return 1j * _r(A, lam, side) / A


def _dinv_parts(A, lam, side=0):
    lam = np.asarray(lam, dtype=complex)
    r = _r(A, lam, side)
    q = lam * A / (1.0 + r)
    S = 1j * np.sqrt(1.0 + 1.0 / r) * np.sqrt(0.5)
    return q, S


def _dinv(A, lam, side=0):
    q, S = _dinv_parts(A, lam, side)
    out = np.empty(np.shape(q) + (2, 2), dtype=complex)
    out[..., 0, 0] = S * q
    out[..., 0, 1] = S
    out[..., 1, 0] = S
    out[..., 1, 1] = S * q
    return out


def _d(A, lam, side=0):
    q, S = _dinv_parts(A, lam, side)
    out = np.empty(np.shape(q) + (2, 2), dtype=complex)
    out[..., 0, 0] = S * q
    out[..., 0, 1] = -S
    out[..., 1, 0] = -S
    out[..., 1, 1] = S * q
    return out


# ---------------------------------------------------------------------------
# validated public surface

def _unpack(lam, side):
    if isinstance(lam, SpectralPoint):
        return lam.lam, lam.side
    return lam, side


def _check(lam, side, on_cut):
    lam = np.asarray(lam, dtype=complex)
    if not np.all(np.isfinite(lam)):
        raise SpectralError("spectral parameter must be finite")
    side = np.broadcast_to(np.asarray(side, dtype=int), lam.shape)
    cut = on_cut(lam)
    if np.any(cut & (side == 0)):
        raise SpectralError("side required")
    if np.any(~cut & (side != 0)):
        raise SpectralError("side given for a point off the cut")
    return lam, side


def _on_halfline(lam, a, right):
    real = lam.imag == 0
    return real & ((lam.real >= a) if right else (lam.real <= a))


def branch_k(j, lam, bg, side=Side.OFF):
    """k_j = sqrt(lam^2 - 1/A_j^2) with k_j(0) = i/A_j and Im k_j >= 0."""
    lam, side = _unpack(lam, side)
    A = bg.A(j)
    lam, side = _check(lam, side, lambda z: (z.imag == 0) & (np.abs(z.real) >= 1 / A))
    return _k(A, lam, side)[()]


def branch_omega(sign, j, lam, bg, side=Side.OFF):
    """omega_j^+ = sqrt(lam - 1/A_j) (cut to the right), omega_j^- = sqrt(lam + 1/A_j)."""
    lam, side = _unpack(lam, side)
    A = bg.A(j)
    if sign > 0:
        lam, side = _check(lam, side, lambda z: _on_halfline(z, 1 / A, True))
        return (1j * _sqrt_side(1 / A - lam, -side))[()]
    lam, side = _check(lam, side, lambda z: _on_halfline(z, -1 / A, False))
    return _sqrt_side(lam + 1 / A, side)[()]


def branch_nu(sign, j, lam, bg, side=Side.OFF):
    """Quarter roots with (nu_j^pm)^2 = omega_j^pm."""
    lam, side = _unpack(lam, side)
    A = bg.A(j)
    if sign > 0:
        lam, side = _check(lam, side, lambda z: _on_halfline(z, 1 / A, True))
        return (np.exp(1j * np.pi / 4) * _qroot_side(1 / A - lam, -side))[()]
    lam, side = _check(lam, side, lambda z: _on_halfline(z, -1 / A, False))
    return _qroot_side(lam + 1 / A, side)[()]


def _check_dmat(j, lam, bg, side):
    lam, side = _unpack(lam, side)
    A = bg.A(j)
    lam, side = _check(lam, side, lambda z: (z.imag == 0) & (np.abs(z.real) >= 1 / A))
    near = np.minimum(np.abs(lam - 1 / A), np.abs(lam + 1 / A))
    if np.any(near < BRANCH_EXCLUSION):
        raise SpectralError("branch point singular")
    return A, lam, side


def matrix_D_inv(j, lam, bg, side=Side.OFF):
    """D_j^{-1}(lam); trailing axes are the 2x2 matrix."""
    A, lam, side = _check_dmat(j, lam, bg, side)
    return _dinv(A, lam, side)[()]


def matrix_D(j, lam, bg, side=Side.OFF):
    A, lam, side = _check_dmat(j, lam, bg, side)
    return _d(A, lam, side)[()]


def dinv_expansion_at_zero(j, bg):
    """Constant and linear Taylor coefficients of D_j^{-1} at the origin."""
    A = bg.A(j)
    c0 = np.array([[0, 1j], [1j, 0]])
    c1 = np.diag([0.5j * A, 0.5j * A])
    return c0, c1


# normalisations of D^{-1} at infinity in the upper / lower half plane
N_PLUS = np.sqrt(0.5) * np.array([[-1, 1j], [1j, -1]])
N_MINUS = np.sqrt(0.5) * np.array([[1, 1j], [1j, 1]])


def _phase(A, y, t, lam, side=0):
    lam = np.asarray(lam, dtype=complex)
    return 0.5j * A * _k(A, lam, side) * (y - 2.0 * t / lam**2)


def phase_hat(y, t, lam, bg, side=Side.OFF):
    """(i A_J k_J / 2)(y - 2t/lam^2) with J the phase index of ``bg``."""
    lam, side = _unpack(lam, side)
    if np.any(np.asarray(lam) == 0):
        raise SpectralError("phase singular at origin")
    j = bg.phase_index
    k = branch_k(j, lam, bg, side)
    return (0.5j * bg.A(j) * k * (y - 2.0 * t / np.asarray(lam, dtype=complex) ** 2))[()]

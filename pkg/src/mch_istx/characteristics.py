"""Forward evolution by characteristics: an independent oracle for the
inverse transform.

Labels x0 are the initial grid.  Along each characteristic
    dq/dt  = (u^2 - u_x^2)(q),
    dqx/dt = 2 m0 u_x(q),
the second line being the label derivative of the first once m(q) qx = m0 is
used.  m on the moving nodes is m0 / qx and (u, u_x) come from the Helmholtz
inversion on those nodes.  The drift diagnostic compares m0 / qx with the
stretch of q measured by finite differences in the labels.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .profiles import ProfileError, helmholtz_invert, profile_from_samples

HORIZON = 2.0
DRIFT_TOL = 1e-6
FD_ORDER = 6


class BreakingError(RuntimeError):
    def __init__(self, t):
        super().__init__(f"characteristics crossed at t={t:.6g}")
        self.t = t


class OracleError(ValueError):
    pass


@dataclass
class LagrangianState:
    x0: np.ndarray
    q: np.ndarray
    qx: np.ndarray
    m0: np.ndarray
    t: float

    @property
    def m(self):
        return self.m0 / self.qx


@dataclass
class EvolutionTrace:
    times: list = field(default_factory=list)
    drift: list = field(default_factory=list)
    min_qx: list = field(default_factory=list)
    min_m: list = field(default_factory=list)
    max_mux: list = field(default_factory=list)
    log_qx_integral: np.ndarray = None   # int_0^t 2 (m u_x)(q) ds per label
    final: LagrangianState = None


def _fd_weights(offsets, h):
    """First-derivative weights on the given integer offsets."""
    off = np.asarray(offsets, float)
    n = len(off)
    V = np.vander(off, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs) / h


def label_derivative(q, h, order=FD_ORDER):
    """d q / d label on a uniform label grid; central stencils inside,
    one-sided near the ends."""
    n = len(q)
    w = order + 1
    half = order // 2
    if n < w:
        raise OracleError("label grid too short for the difference stencil")
    out = np.empty(n)
    c = _fd_weights(np.arange(-half, half + 1), h)
    out[half:n - half] = sum(c[k] * q[k:n - w + 1 + k] for k in range(w))
    for i in range(half):
        cl = _fd_weights(np.arange(w) - i, h)
        out[i] = cl @ q[:w]
        cr = _fd_weights(np.arange(w) - (w - 1 - i), h)
        out[n - 1 - i] = cr @ q[n - w:]
    return out


def _velocity(q, qx, m0, bg):
    m = m0 / qx
    u, ux = helmholtz_invert(q, m, bg)
    return u * u - ux * ux, 2.0 * m0 * ux, 2.0 * m * ux


def _drift(q, qx, m0, h):
    dq = label_derivative(q, h)
    return float(np.max(np.abs(m0 * dq / qx - m0))), dq


def evolve(p, T, steps=2000, horizon=HORIZON, drift_tol=DRIFT_TOL, record_every=1):
    """Evolve the profile to time T with `steps` RK4 steps.

    Returns (Profile at T on a uniform grid, EvolutionTrace).
    """
    steps = int(steps)
    if steps < 1:
        raise OracleError("steps must be a positive integer")
    if not 0 <= T <= horizon:
        raise OracleError(f"T must lie in [0, {horizon:g}]")
    x0 = np.asarray(p.x, float)
    h = np.diff(x0)
    if np.ptp(h) > 1e-9 * h.mean():
        raise OracleError("label grid must be uniform")
    h = float(h.mean())
    m0 = np.asarray(p.m, float)
    if np.min(m0) <= 0:
        raise OracleError("initial momentum must be positive")
    bg = p.bg

    q = x0.copy()
    qx = np.ones_like(q)
    dt = T / steps
    tr = EvolutionTrace()
    logI = np.zeros_like(q)

    def record(t, q, qx, g=None):
        d, _ = _drift(q, qx, m0, h)
        tr.times.append(t)
        tr.drift.append(d)
        tr.min_qx.append(float(qx.min()))
        tr.min_m.append(float((m0 / qx).min()))
        tr.max_mux.append(np.nan if g is None else float(np.abs(g).max() / 2))

    record(0.0, q, qx)
    for n in range(steps):
        t = n * dt
        v1, w1, g1 = _velocity(q, qx, m0, bg)
        v2, w2, g2 = _velocity(q + 0.5 * dt * v1, qx + 0.5 * dt * w1, m0, bg)
        v3, w3, g3 = _velocity(q + 0.5 * dt * v2, qx + 0.5 * dt * w2, m0, bg)
        v4, w4, g4 = _velocity(q + dt * v3, qx + dt * w3, m0, bg)
        q = q + dt / 6 * (v1 + 2 * v2 + 2 * v3 + v4)
        qx = qx + dt / 6 * (w1 + 2 * w2 + 2 * w3 + w4)
        logI += dt / 6 * (g1 + 2 * g2 + 2 * g3 + g4)
        tn = (n + 1) * dt
        if qx.min() <= 0 or np.any(np.diff(q) <= 0):
            raise BreakingError(tn)
        if (n + 1) % record_every == 0 or n + 1 == steps:
            record(tn, q, qx, g1)
            if tr.drift[-1] > drift_tol:
                raise OracleError(f"conservation drift {tr.drift[-1]:.2e} above {drift_tol:.1e} "
                                  f"at t={tn:.6g}")
    tr.log_qx_integral = logI
    tr.final = LagrangianState(x0, q, qx, m0, float(T))
    return eulerian_profile(tr.final, bg), tr


def eulerian_profile(state, bg, n=None):
    """Resample the state onto a uniform grid over the moving nodes and
    recompute (u, u_x) there."""
    q, m = state.q, state.m
    n = len(q) if n is None else n
    x = np.linspace(q[0], q[-1], n)
    mx = CubicSpline(q, m, bc_type="not-a-knot")(x)
    u, ux = helmholtz_invert(x, mx, bg)
    try:
        return profile_from_samples(x, u, ux, mx, bg)
    except ProfileError as exc:
        raise OracleError(f"evolved profile invalid: {exc}") from exc


def conservation_report(trace):
    """(max drift of m qx - m0, min qx, min m) over the recorded steps."""
    return float(np.max(trace.drift)), float(np.min(trace.min_qx)), float(np.min(trace.min_m))


def log_qx_crosscheck(trace):
    """max |log(dq/dlabel) - int 2 m u_x ds| at the final time."""
    st = trace.final
    h = float(np.mean(np.diff(st.x0)))
    dq = label_derivative(st.q, h)
    return float(np.max(np.abs(np.log(dq) - trace.log_qx_integral)))


__all__ = ["BreakingError", "OracleError", "LagrangianState", "EvolutionTrace", "evolve",
           "conservation_report", "log_qx_crosscheck", "label_derivative", "eulerian_profile"]

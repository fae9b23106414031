"""Invariant checks shared by the ``verify`` command and the test-suite.

Each check returns a Check record; ``run_suite`` collects them.  Mesh
sizes are small so a full suite runs in well under a minute.
"""
from dataclasses import asdict, dataclass

import numpy as np

from .profiles import tail_integrals
from .rhp import build_rhdata, jump_hat, Normalization, OUTER, SIGMA0
from .scattering import jost_tilde, reflection_rho, rho_from_s, scattering_matrix
from .solver import evaluate_M, small_lambda_coeffs, solve_rhp
from .spectral import Side, branch_k, matrix_D, matrix_D_inv

SIG1 = np.array([[0, 1], [1, 0]], complex)
SIG3 = np.diag([1.0 + 0j, -1.0])


@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name:<34s} {self.value:.3e}  (tol {self.tol:.1e})"


def _check(name, value, tol):
    value = float(value)
    return Check(name, value, tol, bool(np.isfinite(value) and value <= tol))


def outer_mesh(bg, n=64, span=8.0):
    """n/2 points on each outer half-line, graded toward the branch point."""
    o = bg.outer
    s = np.linspace(0, 1, n // 2 + 2)[1:-1]
    lam = o + (span - 1) * o * s**2
    return np.concatenate([lam, -lam])


def sigma0_mesh(bg, n=64):
    g, o = bg.gap, bg.outer
    s = 0.5 * (1 - np.cos(np.pi * np.linspace(0, 1, n // 2 + 2)[1:-1]))
    lam = g + (o - g) * s
    return np.concatenate([lam, -lam])


# ---------------------------------------------------------------------------
# spectral functions


def check_spectral(bg, n=50, seed=0):
    rng = np.random.default_rng(seed)
    lam = rng.normal(size=n) + 1j * rng.normal(size=n)
    out = []
    for j in (1, 2):
        k = branch_k(j, lam, bg)
        out.append(_check(f"k{j}(-lam)=k{j}(lam)", np.abs(branch_k(j, -lam, bg) - k).max(), 1e-13))
        out.append(_check(f"conj k{j}(conj lam)=-k{j}", np.abs(np.conj(branch_k(j, lam.conj(), bg)) + k).max(),
                          1e-13))
        out.append(_check(f"Im k{j} >= 0", max(0.0, -k.imag.min()), 1e-15))
        dets = np.linalg.det(matrix_D(j, lam, bg))
        out.append(_check(f"det D{j} = 1", np.abs(dets - 1).max(), 1e-12))
        prod = matrix_D(j, lam, bg) @ matrix_D_inv(j, lam, bg)
        out.append(_check(f"D{j} D{j}^-1 = I", np.abs(prod - np.eye(2)).max(), 1e-13))
    return out


# ---------------------------------------------------------------------------
# direct scattering


def check_scattering(p, n=64, tol=1e-8):
    bg = p.bg
    out = []
    lo = outer_mesh(bg, n)
    s = scattering_matrix(p, lo + 0j, Side.PLUS)
    rho_entry = s[:, 0, 1] if bg.orientation.value == "descending" else s[:, 1, 0]
    out.append(_check("unitarity on outer cut",
                      np.abs(np.abs(s[:, 0, 0]) ** 2 - np.abs(rho_entry) ** 2 - 1).max(), tol))
    out.append(_check("s = sig1 conj(s) sig1 on outer cut",
                      np.abs(s - SIG1 @ s.conj() @ SIG1).max(), tol))
    h = len(lo) // 2
    out.append(_check("s11((-lam)+) = conj s11(lam+)", np.abs(s[h:, 0, 0] - s[:h, 0, 0].conj()).max(), tol))
    rho = rho_from_s(bg, s)
    out.append(_check("|rho| <= 1 on outer cut", max(0.0, np.abs(rho).max() - 1), tol))
    if bg.outer > bg.gap:
        l0 = sigma0_mesh(bg, n)
        s0 = scattering_matrix(p, l0 + 0j, Side.PLUS)
        out.append(_check("|rho| = 1 on sigma0", np.abs(np.abs(rho_from_s(bg, s0)) - 1).max(), tol))
        h0 = len(l0) // 2
        out.append(_check("s11 mirror on sigma0", np.abs(s0[h0:, 0, 0] - s0[:h0, 0, 0].conj()).max(), tol))
    xs = np.linspace(p.x[0] / 3, p.x[-1] / 3, 7)
    for j in (1, 2):
        A = bg.A(j)
        lj = np.linspace(1.05 / A, 6.0 / A, 8)
        lj = np.concatenate([lj, -lj])
        P = jost_tilde(p, j, lj, xs, Side.PLUS)
        out.append(_check(f"conj Phi{j}~ = sig1 Phi{j}~ sig1", np.abs(P.conj() - SIG1 @ P @ SIG1).max(), tol))
        out.append(_check(f"det Phi{j}~ = 1", np.abs(np.linalg.det(P) - 1).max(), 1e-9))
    out.extend(check_lambda_zero(p, tol=tol))
    return out


def check_lambda_zero(p, n=20, tol=1e-8):
    """Jost solutions at lam = 0 against the closed-form exponential; the
    error is taken relative to the diagonal entries, which grow like
    exp(|int (m - A)| / 2A)."""
    bg = p.bg
    ti = tail_integrals(p)
    xs = np.linspace(p.x[0] * 0.4, p.x[-1] * 0.4, n)
    out = []
    for j in (1, 2):
        A = bg.A(j)
        integ = ti.left(xs) if j == 1 else -ti.right(xs)
        P = jost_tilde(p, j, 0.0, xs)[0]
        ref = np.stack([np.exp(-integ / (2 * A)), np.exp(integ / (2 * A))], axis=1)
        diag = np.diagonal(P, axis1=1, axis2=2)
        err = max(np.abs(diag / ref - 1).max(),
                  (np.abs(P[:, 0, 1]) / np.abs(ref[:, 0])).max(),
                  (np.abs(P[:, 1, 0]) / np.abs(ref[:, 1])).max())
        out.append(_check(f"lam=0 closed form, j={j}", err, tol))
    return out


def check_truncation(p, Lambda, rho_tol=1e-8, n=16):
    """|rho| small on the far part of the arms from the truncation point on."""
    lam = Lambda * np.linspace(1.0, 2.0, n)
    r = np.abs(reflection_rho(p, np.concatenate([lam, -lam]), discrete=False).rho)
    return [_check("truncation |rho(Lambda..2Lambda)|", r.max(), rho_tol)]


def check_discrete(p, data):
    out = []
    for i, d in enumerate(data.discrete):
        rel = abs(d.s11_prime - d.s11_prime_fd) / abs(d.s11_prime_fd)
        out.append(_check(f"s11' two routes, pair {i}", rel, 1e-5))
        out.append(_check(f"kappa {i} real", abs(np.imag(d.kappa)), 1e-8))
    return out


# ---------------------------------------------------------------------------
# RH problem


def check_jumps(p, data, y=1.0, t=0.0, n=24):
    J = data.jump(y, t)
    out = [_check("det of assembled jumps", np.abs(np.linalg.det(J) - 1).max(), 1e-12)]
    # M^(-lam) = -sig3 M^(lam) sig3 swaps the sides, so the native jumps
    # satisfy J^(lam) sig3 J^(-lam) sig3 = I at mirrored points
    bg = p.bg
    lam = outer_mesh(bg, n)[: n // 2]
    region = np.full(len(lam), OUTER)
    if bg.outer > bg.gap:
        l0 = sigma0_mesh(bg, n)[: n // 2]
        lam = np.concatenate([lam, l0])
        region = np.concatenate([region, np.full(len(l0), SIGMA0)])
    rp = reflection_rho(p, lam, discrete=False).rho
    rn = reflection_rho(p, -lam, discrete=False).rho
    Jp = jump_hat(y, t, lam, rp, region, bg, Normalization.NATIVE)
    Jn = jump_hat(y, t, -lam, rn, region, bg, Normalization.NATIVE)
    dev = np.abs(Jp @ SIG3 @ Jn @ SIG3 - np.eye(2)).max()
    out.append(_check("jump mirror symmetry", dev, 1e-10))
    return out


def check_rh(p, data, tol=1e-6):
    sol = solve_rhp(0.0, 0.0, data, tol=tol, check=False)
    out = [_check("jump residual at (0,0)", sol.jump_residual, tol)]
    z = np.array([5 + 5j, 0.3 + 0.7j, -1.3 + 0.4j])
    Mt = evaluate_M(sol, z)
    out.append(_check("det M~ = 1", np.abs(np.linalg.det(Mt) - 1).max(), 10 * tol))
    out.append(_check("M~ - I = O(1/lam) along i*R", decay_defect(sol), 0.05))
    M1 = evaluate_M(sol, z, native=True)
    M2 = evaluate_M(sol, -z, native=True)
    out.append(_check("M(-lam) = -sig3 M sig3", np.abs(M2 + SIG3 @ M1 @ SIG3).max(), 1e-7))
    M3 = evaluate_M(sol, z.conj(), native=True)
    out.append(_check("conj M(conj lam) = -M", np.abs(M3.conj() + M1).max(), 1e-7))
    out.extend(check_quarter_power(sol))
    c = small_lambda_coeffs(sol)
    out.append(_check("a1_hat > 0", 0.0 if c.a1_hat > 0 else 1.0, 0.0))
    from .scattering import small_lambda_direct
    from .profiles import y_of_x
    x0 = float(y_of_x(p).inverse(0.0))
    a1, a2, a3, _, _ = small_lambda_direct(p, [x0])
    err = max(abs(c.a1_hat - a1[0]), abs(c.a2_hat - a2[0]), abs(c.a3_hat - a3[0]))
    out.append(_check("a_hat vs direct at y=0", err, 1e-4))
    return out


def decay_defect(sol, n=8):
    """Relative spread of |lam| |M~(lam) - I| over a dyadic sequence up the
    imaginary axis; tends to zero when M~ - I decays like 1/lam."""
    lam = 10j * 2.0 ** np.arange(n)
    v = np.abs(lam) * np.abs(evaluate_M(sol, lam) - np.eye(2)).max(axis=(1, 2))
    if v[-1] < 1e-12:
        return 0.0
    return float(abs(v[-1] / v[-2] - 1))


def quarter_power_sequence(sol, b, n=8, d0=1e-2, ratio=4.0, angle=np.pi / 3):
    d = d0 * ratio ** -np.arange(n)
    lam = b + d * np.exp(1j * angle)
    M = evaluate_M(sol, lam, native=True)
    return np.abs(M).max(axis=(1, 2)) * d**0.25


def growth_trend(v, contraction=0.75):
    """Relative growth still ahead of the sequence v: the geometric tail of
    its last rising step, extrapolated and compared with max(v).  Returns
    1.0 if the rising steps do not shrink geometrically, which is what a
    stronger singularity produces (ratios stuck above one)."""
    inc = np.diff(v)
    up = inc[inc > 0]
    if len(up) > 1 and np.any(up[1:] > contraction * up[:-1]):
        return 1.0
    if inc[-1] <= 0:
        return 0.0
    c = inc[-1] / inc[-2] if inc[-2] > 0 else contraction
    limit = v[-1] + inc[-1] * c / (1 - c)
    return max(0.0, limit / v.max() - 1.0)


def check_quarter_power(sol):
    """|M| |lam - b|^{1/4} along a geometric approach to each branch point
    has no growth trend and its extrapolated limit stays within 1% of the
    largest observed value."""
    bg = sol.data.bg
    out = []
    for b in sorted({bg.gap, -bg.gap, bg.outer, -bg.outer}):
        v = quarter_power_sequence(sol, b)
        out.append(_check(f"quarter-power bound at {b:+.4g}", growth_trend(v), 1e-2))
    return out


# ---------------------------------------------------------------------------


def run_suite(p, mesh=None, tol=1e-8, solve_tol=1e-6):
    mesh = dict(mesh or {})
    mesh.setdefault("y_max", 5.0)
    data = build_rhdata(p, **mesh)
    checks = check_spectral(p.bg)
    checks += check_scattering(p, tol=tol)
    checks += check_truncation(p, data.Lambda)
    checks += check_discrete(p, data)
    checks += check_jumps(p, data)
    checks += check_rh(p, data, tol=solve_tol)
    return checks


def suite_report(checks):
    return {"passed": all(c.passed for c in checks), "checks": [asdict(c) for c in checks]}


__all__ = ["Check", "run_suite", "suite_report", "check_scattering", "check_lambda_zero",
           "check_truncation", "check_rh", "decay_defect", "check_quarter_power", "growth_trend", "quarter_power_sequence",
           "outer_mesh", "sigma0_mesh"]

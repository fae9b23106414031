"""Command line driver: scatter | solve | evolve | roundtrip | verify.

Configuration is one JSON document; unknown keys are rejected.  Outputs go
to --out (default ./out).  Exit codes: 0 ok, 2 config error, 3 breaking,
4 invariant failure, 5 solver failure.
"""
import argparse
import copy
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import scattering as scat
from .characteristics import HORIZON, BreakingError, OracleError, conservation_report, evolve, \
    log_qx_crosscheck
from .invariants import outer_mesh, run_suite, sigma0_mesh, suite_report
from .profiles import ProfileError, build_profile
from .reconstruction import ReconstructionError, default_workers, sweep
from .rhp import RHDataError
from .solver import RHSolverError
from .spectral import SpectralError

log = logging.getLogger("mch_istx")

EXIT_OK, EXIT_CONFIG, EXIT_BREAKING, EXIT_INVARIANT, EXIT_SOLVER = 0, 2, 3, 4, 5

DEFAULTS = {
    "profile": None,
    "mesh": {"q": 16, "refine": 1, "grading_exponent": 4, "theta0": 8.0, "hmax": 1.0,
             "rho_tol": 1e-9, "Lambda_cap": 60.0, "Lambda": None, "radius": None},
    "tolerances": {"ode": 1e-11, "solve": 1e-6, "extract": 1e-6, "invariant": 1e-8,
                   "compare": 1e-3, "drift": 1e-6, "max_failure_fraction": 0.05},
    "sweep": {"y_min": -20.0, "y_max": 20.0, "y_count": 201, "t_list": [0.0]},
    "evolve": {"T": 0.5, "steps": 2000},
    "scatter": {"n": 64},
    "workers": None,
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and base[k] is not None:
            if not isinstance(v, dict):
                raise ConfigError(f"{path + k} must be an object")
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


def load_config(source):
    """Merge a JSON document (path, string or dict) over the defaults and
    validate it."""
    if isinstance(source, dict):
        raw = source
    else:
        text = Path(source).read_text() if not str(source).lstrip().startswith("{") else source
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg = _merge(DEFAULTS, raw)
    validate(cfg)
    return cfg


def validate(cfg):
    prof = cfg["profile"]
    if not isinstance(prof, dict) or "family" not in prof:
        raise ConfigError("profile must be an object with a 'family'")
    for key in ("A", "A1", "A2"):
        if key in prof and not (isinstance(prof[key], (int, float)) and prof[key] > 0):
            raise ConfigError(f"{key} must be positive")
    for k, v in cfg["tolerances"].items():
        if not (isinstance(v, (int, float)) and v > 0):
            raise ConfigError(f"tolerance {k} must be positive")
    m = cfg["mesh"]
    if m["grading_exponent"] != 4:
        raise ConfigError("grading_exponent: only 4 is supported")
    if int(m["q"]) < 4 or m["refine"] <= 0:
        raise ConfigError("mesh needs q >= 4 and refine > 0")
    sw = cfg["sweep"]
    if int(sw["y_count"]) < 1:
        raise ConfigError("y_count must be at least 1")
    if not isinstance(sw["t_list"], list) or any(not isinstance(t, (int, float)) or t < 0
                                                for t in sw["t_list"]):
        raise ConfigError("t_list must be a list of non-negative times")
    if sw["y_min"] > sw["y_max"]:
        raise ConfigError("y_min must not exceed y_max")
    ev = cfg["evolve"]
    if not isinstance(ev["steps"], int) or ev["steps"] < 1:
        raise ConfigError("evolve.steps must be a positive integer")
    if not 0 <= ev["T"] <= HORIZON:
        raise ConfigError(f"evolve.T must lie in [0, {HORIZON:g}]")


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def mesh_kwargs(cfg):
    m = dict(cfg["mesh"])
    m.pop("grading_exponent")
    if m["Lambda"] is None:
        m.pop("Lambda")
    return m


def make_profile(cfg):
    try:
        return build_profile(cfg["profile"])
    except ProfileError as exc:
        raise ConfigError(str(exc)) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad profile spec: {exc}") from exc


# ---------------------------------------------------------------------------
# output helpers


def write_csv(path, header, cols, cfg):
    arr = np.column_stack([np.asarray(c, float) for c in cols])
    with open(path, "w") as fh:
        fh.write(f"# config {config_hash(cfg)}\n")
        fh.write(",".join(header) + "\n")
        for row in arr:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, complex):
        return [v.real, v.imag]
    raise TypeError(f"not serializable: {type(v)}")


def _t_tag(t):
    return f"{t:g}".replace(".", "p")


PLOT_SCRIPT = '''"""Plot u against x for every reconstruction_*.csv next to this script."""
import glob
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = os.path.dirname(os.path.abspath(__file__))
fig, ax = plt.subplots()
for path in sorted(glob.glob(os.path.join(here, "reconstruction_*.csv"))):
    d = np.genfromtxt(path, delimiter=",", skip_header=1, names=True)
    ok = np.isfinite(d["x"])
    ax.plot(d["x"][ok], d["u"][ok], label=os.path.basename(path))
ax.set_xlabel("x")
ax.set_ylabel("u")
ax.legend()
fig.savefig(os.path.join(here, "reconstruction.png"), dpi=120)
'''


# ---------------------------------------------------------------------------
# commands


def cmd_scatter(cfg, out, workers):
    p = make_profile(cfg)
    n = int(cfg["scatter"]["n"])
    bg = p.bg
    lam = outer_mesh(bg, n)
    if bg.outer > bg.gap:
        lam = np.concatenate([lam, sigma0_mesh(bg, n)])
    lam = np.sort(lam)
    sd = scat.reflection_rho(p, lam)
    s = sd.s
    entry = s[:, 0, 1] if bg.orientation.value == "descending" else s[:, 1, 0]
    on_outer = np.abs(lam) > bg.outer
    unit = float(np.abs(np.abs(s[on_outer, 0, 0]) ** 2 - np.abs(entry[on_outer]) ** 2 - 1).max())
    sig0 = float(np.abs(np.abs(sd.rho[~on_outer]) - 1).max()) if np.any(~on_outer) else 0.0
    summary = {"unitarity_defect": unit, "sigma0_rho_defect": sig0, "zero_count": len(sd.discrete)}
    write_json(out / "scattering.json", {
        "A1": bg.A1, "A2": bg.A2, "orientation": bg.orientation.value, "t": sd.t, "x0": sd.x0,
        "lambda": lam, "side": "+",
        "s11": {"re": s[:, 0, 0].real, "im": s[:, 0, 0].imag},
        "s21": {"re": entry.real, "im": entry.imag},
        "rho": {"re": sd.rho.real, "im": sd.rho.imag},
        "discrete": [{"lambda": d.lam, "b": d.b, "s11_prime": d.s11_prime,
                      "s11_prime_fd": d.s11_prime_fd, "kappa": d.kappa} for d in sd.discrete],
        "invariants": summary, "config_hash": config_hash(cfg)})
    write_csv(out / "scattering.csv",
              ["lambda", "side", "re_s11", "im_s11", "re_s21", "im_s21", "re_rho", "im_rho"],
              [lam, np.ones_like(lam), s[:, 0, 0].real, s[:, 0, 0].imag, entry.real, entry.imag,
               sd.rho.real, sd.rho.imag], cfg)
    print(f"unitarity defect {unit:.3e}; |rho|-1 on sigma0 {sig0:.3e}; zeros {len(sd.discrete)}")
    tol = cfg["tolerances"]["invariant"]
    return EXIT_OK if unit <= tol and sig0 <= tol else EXIT_INVARIANT


def _y_grid(cfg):
    sw = cfg["sweep"]
    return np.linspace(sw["y_min"], sw["y_max"], int(sw["y_count"]))


def _sweep_at(p, cfg, t, workers, ys=None):
    ys = _y_grid(cfg) if ys is None else ys
    mesh = mesh_kwargs(cfg)
    return sweep(p, ys, t, tol=cfg["tolerances"]["solve"], workers=workers, **mesh)


def cmd_solve(cfg, out, workers):
    p = make_profile(cfg)
    frac = cfg["tolerances"]["max_failure_fraction"]
    worst = 0.0
    for t in cfg["sweep"]["t_list"]:
        rec = _sweep_at(p, cfg, float(t), workers)
        tag = _t_tag(t)
        write_csv(out / f"reconstruction_{tag}.csv", ["y", "x", "u", "ux", "residual"],
                  [rec.y, rec.x_of_y, rec.u_hat, rec.ux_hat, rec.residual], cfg)
        nf = len(rec.failures)
        worst = max(worst, nf / len(rec.y))
        write_json(out / f"reconstruction_{tag}.json", {
            "t": float(t), "A1": p.bg.A1, "A2": p.bg.A2, "orientation": p.bg.orientation.value,
            "tolerances": cfg["tolerances"], "mesh": cfg["mesh"], "n_points": len(rec.y),
            "failures": [{"y": y, "message": m} for y, m in rec.failures],
            "config_hash": config_hash(cfg)})
        print(f"t={t:g}: {len(rec.y) - nf}/{len(rec.y)} points solved")
    (out / "plot_reconstruction.py").write_text(PLOT_SCRIPT)
    return EXIT_SOLVER if worst > frac else EXIT_OK


def cmd_evolve(cfg, out, workers):
    p = make_profile(cfg)
    ev = cfg["evolve"]
    P, tr = evolve(p, float(ev["T"]), int(ev["steps"]), drift_tol=cfg["tolerances"]["drift"])
    drift, min_qx, min_m = conservation_report(tr)
    with open(out / "evolved_profile.txt", "w") as fh:
        fh.write(f"# config {config_hash(cfg)}\n# T {float(ev['T']):.17g}\n# x u m\n")
        for row in zip(P.x, P.u, P.m):
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
    rep = {"T": float(ev["T"]), "steps": int(ev["steps"]), "max_drift": drift, "min_qx": min_qx,
           "min_m": min_m, "log_qx_crosscheck": log_qx_crosscheck(tr),
           "config_hash": config_hash(cfg)}
    write_json(out / "conservation.json", rep)
    print(f"drift {drift:.3e}; min qx {min_qx:.6g}; min m {min_m:.6g}")
    return EXIT_OK


def roundtrip_report(p, cfg, t, workers):
    """Evolve to t, reconstruct by IST at t, compare on the overlap window."""
    from scipy.interpolate import CubicSpline
    ev = cfg["evolve"]
    base = max(float(ev["T"]), 1e-12)
    steps = max(1, int(round(ev["steps"] * t / base))) if t > 0 else 1
    P, tr = evolve(p, t, steps, drift_tol=cfg["tolerances"]["drift"]) if t > 0 else (p, None)
    rec = _sweep_at(p, cfg, t, workers)
    ok = rec.valid() & (rec.x_of_y > P.x[0]) & (rec.x_of_y < P.x[-1])
    xs = rec.x_of_y[ok]
    err_u = float(np.abs(rec.u_hat[ok] - CubicSpline(P.x, P.u)(xs)).max()) if ok.any() else np.inf
    err_ux = float(np.abs(rec.ux_hat[ok] - CubicSpline(P.x, P.ux)(xs)).max()) if ok.any() else np.inf
    bg = p.bg
    lam = np.concatenate([outer_mesh(bg, 16), sigma0_mesh(bg, 16) if bg.outer > bg.gap else []])
    r0 = scat.reflection_rho(p, lam)
    r1 = scat.reflection_rho(P, lam, t=t)
    lk0 = np.array([d.lam for d in r0.discrete])
    lk1 = np.array([d.lam for d in r1.discrete])
    dlk = float(np.abs(lk0 - lk1).max()) if len(lk0) == len(lk1) and len(lk0) else (
        0.0 if len(lk0) == len(lk1) else np.inf)
    return {"t": t, "u_error": err_u, "ux_error": err_ux, "n_compared": int(ok.sum()),
            "failures": len(rec.failures), "window": [float(xs.min()), float(xs.max())] if ok.any() else None,
            "rho_defect": float(np.abs(r0.rho - r1.rho).max()), "lambda_k_defect": dlk,
            "drift": conservation_report(tr)[0] if tr else 0.0}


def cmd_roundtrip(cfg, out, workers, raw=None):
    if raw is not None and "t_list" not in raw.get("sweep", {}):
        raise ConfigError("roundtrip needs sweep.t_list")
    ts = cfg["sweep"]["t_list"]
    if not ts:
        raise ConfigError("roundtrip needs at least one time in sweep.t_list")
    p = make_profile(cfg)
    reps = [roundtrip_report(p, cfg, float(t), workers) for t in ts]
    tol = cfg["tolerances"]["compare"]
    passed = all(r["u_error"] <= tol and r["rho_defect"] <= 1e-4 and r["lambda_k_defect"] <= 1e-5
                 for r in reps)
    write_json(out / "report.json", {"passed": passed, "compare_tol": tol, "times": reps,
                                     "config_hash": config_hash(cfg)})
    for r in reps:
        print(f"t={r['t']:g}: |u - u_oracle| {r['u_error']:.3e}; rho defect {r['rho_defect']:.3e}")
    return EXIT_OK if passed else EXIT_INVARIANT


def cmd_verify(cfg, out, workers):
    p = make_profile(cfg)
    checks = run_suite(p, mesh_kwargs(cfg), tol=cfg["tolerances"]["invariant"],
                       solve_tol=cfg["tolerances"]["solve"])
    rep = suite_report(checks)
    rep["config_hash"] = config_hash(cfg)
    write_json(out / "verify.json", rep)
    for c in checks:
        print(c.line())
    return EXIT_OK if rep["passed"] else EXIT_INVARIANT


COMMANDS = {"scatter": cmd_scatter, "solve": cmd_solve, "evolve": cmd_evolve,
            "roundtrip": cmd_roundtrip, "verify": cmd_verify}


def main(argv=None):
    ap = argparse.ArgumentParser(prog="mch-istx", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON config file (or inline JSON)")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--workers", type=int, default=None,
                    help="parallel workers for sweeps (default: MCH_ISTX_WORKERS or 1)")
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        raw_text = Path(args.config).read_text() if os.path.exists(args.config) else args.config
        raw = json.loads(raw_text)
        cfg = load_config(raw)
    except (ConfigError, json.JSONDecodeError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    workers = args.workers if args.workers is not None else (cfg["workers"] or default_workers())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scat.JOST_RTOL = float(cfg["tolerances"]["ode"])
    log.debug("config %s, workers %d", config_hash(cfg), workers)
    try:
        if args.command == "roundtrip":
            return cmd_roundtrip(cfg, out, workers, raw)
        return COMMANDS[args.command](cfg, out, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BreakingError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_BREAKING
    except OracleError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVARIANT
    except (RHSolverError, RHDataError, ReconstructionError, scat.ScatteringError,
            SpectralError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

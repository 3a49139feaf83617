"""Command-line driver: run checks on a scenario and emit a JSON report.

    warpcheck <command> --scenario <path> [--seed N] [--out dir] [--grid-scale k]

Every check yields ``{"pass", "margin", "tolerance", "parameters"}`` and
passes iff margin >= -tolerance.  Reports are deterministic given the
scenario, seed and grid scale; floats are written with 12 significant
digits.  Exit status: 0 when every check passes, 1 when some margin
fails, 2 when a command raised.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import subprocess
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import bochner as bo
from . import geometry as geo
from .analysis import check_fK_concavity, pythagorean_residual
from .errors import NotApplicable, WarpcheckError
from .fiber import fiber_distance, fiber_spectrum, lichnerowicz_check
from .scenario import Scenario, bundled_dir, load_scenario
from .schrodinger import (assemble, product_eigenvalue, resolved_eigenvalues,
                          resolved_schrodinger_eigenvalues, spectrum, tensor_spectrum)
from .verdict import classify_rcd, is_fK_affine

SCHEMA_VERSION = "1"
COMMANDS = ("check", "classify", "distance", "geodesic", "spectrum", "bochner", "brunn-minkowski", "mcp")
DRIFT_TOL = 1e-6
LAMBDA0_TOL = 1e-10
PYTHAGOREAN_TOL = 1e-10


def _result(margin, tolerance, **parameters):
    margin, tolerance = float(margin) + 0.0, float(tolerance)
    return {"pass": bool(margin >= -tolerance), "margin": margin, "tolerance": tolerance,
            "parameters": parameters}


def _canon(obj):
    """JSON-ready copy with floats rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _canon(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canon(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
        x = float(f"{x:.12g}")
        return 0.0 if x == 0 else x
    if isinstance(obj, np.ndarray):
        return _canon(obj.tolist())
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _git_describe():
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"


def _version():
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:
        return "unknown"


@dataclass
class Report:
    scenario: str
    command: str
    seed: int
    grid_scale: float = 1.0
    results: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    timestamps: dict = field(default_factory=dict)

    @property
    def passed(self):
        return not self.errors and all(r["pass"] for r in self.results.values())

    @property
    def exit_code(self):
        if self.errors:
            return 2
        return 0 if self.passed else 1

    def to_dict(self):
        prov = {"git_describe": _git_describe(), "version": _version(), "seed": self.seed}
        if self.timestamps:
            prov["timestamps"] = self.timestamps
        return {
            "schema": SCHEMA_VERSION, "scenario": self.scenario, "command": self.command,
            "seed": self.seed, "grid_scale": self.grid_scale, "provenance": prov,
            "results": self.results, "skipped": self.skipped, "errors": self.errors,
            "artifacts": sorted(self.artifacts), "passed": self.passed,
        }

    def to_json(self):
        return json.dumps(_canon(self.to_dict()), indent=2, sort_keys=True) + "\n"


@dataclass
class Context:
    scenario: Scenario
    seed: int
    grid: dict
    scale: float
    out: Path | None
    report: Report

    def __post_init__(self):
        self.W = self.scenario.product()
        self.tol = self.scenario.tolerances

    def rng(self, command):
        # one independent stream per command so `all` reproduces single commands
        return np.random.default_rng([self.seed, COMMANDS.index(command)])

    def csv(self, stem, header, rows):
        if self.out is None:
            return
        name = f"{self.scenario.name}-{stem}.csv"
        with open(self.out / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([f"{v:.12g}" if isinstance(v, (float, np.floating)) else v for v in row])
        self.report.artifacts.append(name)


def _window(ctx):
    lo, hi = ctx.W.B.window(ctx.grid["truncation_R"])
    if ctx.W.B.kind == "circle":
        lo, hi = 0.0, ctx.W.B.period
    return float(lo), float(hi)


def _fiber_sample(F, rng, size):
    if F.kind == "circle":
        return rng.uniform(0, F.circumference, size)
    if F.kind == "interval":
        return rng.uniform(0, F.length, size)
    return rng.integers(0, F.weights.size, size)


# commands ----------------------------------------------------------------

def cmd_check(ctx):
    W = ctx.W
    rep = check_fK_concavity(W.B, W.f, tol=ctx.tol["concavity"])
    out = {"concavity": _result(-rep.worst_violation, rep.tolerance, K=W.K, K_F=rep.K_F,
                                lattice_pairs=rep.n_pairs)}
    margins = [dn for _, dn in rep.boundary_margins]
    out["boundary"] = _result(min(margins) if margins else 0.0, rep.tolerance,
                              points=[p for p, _ in rep.boundary_margins])
    if is_fK_affine(W.B, W.f, rep.K_F):
        res = pythagorean_residual(W.B, W.f, rep.K_F)
        out["pythagorean"] = _result(-res, PYTHAGOREAN_TOL * max(1.0, abs(rep.K_F)), K_F=rep.K_F)
    return out


def _conclusion_string(v):
    return "Inconclusive" if v.conclusion is None else f"RCD({v.conclusion.K:g},{v.conclusion.N:g})"


def cmd_classify(ctx):
    W, s = ctx.W, ctx.scenario
    rep = check_fK_concavity(W.B, W.f, tol=ctx.tol["concavity"])
    v = classify_rcd(W.B, W.f, W.N, W.F, assume_product_rcd=s.assume_product_rcd, report=rep)
    got = {"route": v.route, "conclusion": _conclusion_string(v)}
    ok = s.expected is None or got == s.expected
    return {"verdict": _result(0.0 if ok else -1.0, 0.0, **got, expected=s.expected,
                               K_F=v.K_F, trace=v.to_dict()["hypothesis_trace"])}


def cmd_distance(ctx, triples=8):
    W, rng = ctx.W, ctx.rng("distance")
    lo, hi = _window(ctx)
    R = rng.uniform(lo, hi, (triples, 3))
    X = _fiber_sample(W.F, rng, (triples, 3))
    asym, excess, dmax = 0.0, -math.inf, 0.0
    for i in range(triples):
        p = [(float(R[i, j]), X[i, j].item()) for j in range(3)]
        d01, d10 = geo.distance(W, p[0], p[1]), geo.distance(W, p[1], p[0])
        d12, d02 = geo.distance(W, p[1], p[2]), geo.distance(W, p[0], p[2])
        asym = max(asym, abs(d01 - d10))
        excess = max(excess, d02 - d01 - d12)
        dmax = max(dmax, d01, d12, d02)
    tol = ctx.tol["geodesic"] * max(1.0, dmax)
    return {"symmetry": _result(-asym, tol, triples=triples),
            "triangle": _result(-excess, tol, triples=triples, max_distance=dmax)}


def _geodesic_endpoints(ctx):
    g = ctx.scenario.checks.get("geodesic")
    if g:
        return g["r0"], g["r1"], g["L"]
    lo, hi = _window(ctx)
    F = ctx.W.F
    L = 1.0 if F.kind != "finite" else float(fiber_distance(F, 0, 1))
    if F.kind == "interval":
        L = min(L, F.length / 2)
    return lo + 0.4 * (hi - lo), lo + 0.6 * (hi - lo), L


def cmd_geodesic(ctx):
    W = ctx.W
    r0, r1, L = _geodesic_endpoints(ctx)
    path = geo.geodesic_2d(W, r0, r1, L)
    d = geo.height_distance(W, r0, r1, L)
    grid = geo.grid_geodesic(W, r0, r1, L, n=ctx.grid["oracle_n"])
    params = {"r0": r0, "r1": r1, "L": L}
    out = {}
    if path.smooth:
        out["clairaut_drift"] = _result(-path.clairaut_drift, DRIFT_TOL, c=path.c, **params)
        out["speed_drift"] = _result(-path.speed_drift, DRIFT_TOL, E=path.E, **params)
    else:
        ctx.report.skipped["geodesic.drift"] = "shortest path is broken through a zero of f"
    rel = abs(d - grid.length) / max(grid.length, 1e-300)
    out["oracle"] = _result(-rel, ctx.tol["geodesic"], distance=d, oracle_length=grid.length,
                            oracle_n=ctx.grid["oracle_n"], mode=path.mode, **params)
    ctx.csv("geodesic", ["t", "r", "fiber_arclength"], zip(path.t, path.alpha, path.z))
    return out


def cmd_spectrum(ctx, k=5):
    W, g = ctx.W, ctx.grid
    n, R = g["base_n"], g["truncation_R"]
    op = assemble(W.B, W.f, W.N, 0.0, n, R)
    pairs = spectrum(op, k)
    v0 = pairs.eigenvectors[:, 0]
    spread = float(np.ptp(v0) / np.max(np.abs(v0)))
    out = {"lambda0": _result(-abs(pairs.eigenvalues[0]), LAMBDA0_TOL, lambda0=pairs.eigenvalues[0],
                              eigenvector_spread=spread, base_n=n)}
    lam = float(ctx.scenario.checks.get("schrodinger_lambda", 0.0))
    a = resolved_eigenvalues(W.B, W.f, W.N, lam, n, k, R)
    b = resolved_schrodinger_eigenvalues(W.B, W.f, W.N, lam, n, k, R)
    h = assemble(W.B, W.f, W.N, lam, n, R).h
    out["schrodinger"] = _result(-float(np.max(np.abs(a - b))), 10 * h * h, lam=lam, h=h, k=k)
    ctx.csv("spectrum", ["k", "laplacian", "schrodinger"], ((j, a[j], b[j]) for j in range(k)))

    rep = check_fK_concavity(W.B, W.f, tol=ctx.tol["concavity"])
    K_F = rep.K_F
    att = W.F.rcd
    if K_F > 0 and att is not None and att.implies(K_F * (W.N - 1), W.N, 1e-8) and W.F.kind != "finite":
        lich = lichnerowicz_check(fiber_spectrum(W.F, g["fiber_n"], 3), K_F, W.N)
        out["lichnerowicz"] = _result(lich.margin, ctx.tol["spectral"], lambda1=lich.lambda1,
                                      bound=lich.bound, fiber_n=g["fiber_n"])
    else:
        ctx.report.skipped["spectrum.lichnerowicz"] = "needs K_F > 0 and an attested RCD(K_F(N-1), N) fiber"

    # full product spectrum against separation of variables, on a coarse grid
    nb = max(16, n // 4)
    nf = max(16, g["fiber_n"] // 4) if W.F.kind != "finite" else 16
    kt = 6
    tvals, _ = tensor_spectrum(W.B, W.f, W.N, W.F, nb, nf, kt, R)
    fvals = fiber_spectrum(W.F, nf, kt).eigenvalues
    sep = sorted(product_eigenvalue(W.B, W.f, W.N, max(float(mu), 0.0), j, nb, R)
                 for mu in fvals for j in range(kt))[:kt]
    diff = float(np.max(np.abs(np.array(sep) - tvals)))
    out["tensor"] = _result(-diff, ctx.tol["spectral"] * max(1.0, float(np.max(np.abs(tvals)))),
                            base_n=nb, fiber_n=nf, k=kt)
    ctx.csv("tensor-spectrum", ["k", "tensor", "separated"], ((j, tvals[j], sep[j]) for j in range(kt)))
    return out


def cmd_bochner(ctx, samples=3):
    W, g, rng = ctx.W, ctx.grid, ctx.rng("bochner")
    if W.F.kind == "finite":
        raise NotApplicable("Gamma_2 terms need a 1D fiber")
    lo, hi = _window(ctx)
    win = ctx.scenario.checks.get("bochner_window")
    center, width = win if win else (0.5 * (lo + hi), 0.3 * (hi - lo))
    phi = bo.window_weight(W, center, width)
    n, nf, R = g["base_n"], g["fiber_n"], g["truncation_R"]
    Bop, h = bo.base_operator(W, n, R)
    x = bo.fiber_op(W, nf).x
    rep = check_fK_concavity(W.B, W.f, tol=ctx.tol["concavity"])
    v = classify_rcd(W.B, W.f, W.N, W.F, assume_product_rcd=ctx.scenario.assume_product_rcd, report=rep)
    be_applies = v.conclusion is not None and v.conclusion.subject == "product"
    gap, worst_be, terms = 0.0, math.inf, None
    for _ in range(samples):
        u = bo.random_separable(W, rng, lo, hi)
        report = bo.gamma2_terms(W, u, phi, n, nf, R)
        direct = bo.direct_for(W, u, phi, Bop.x, x)[0]
        gap = max(gap, abs(report.total - direct))
        terms = terms or report.terms
        if be_applies:
            worst_be = min(worst_be, bo.be_inequality(report, W.K, W.N))
    tol = ctx.tol["be"] * h
    out = {"terms_vs_direct": _result(-gap, tol, samples=samples, h=h, window=[center, width],
                                      first_terms=terms)}
    if be_applies:
        out["be_margin"] = _result(worst_be, tol, K=W.K * W.N, N=W.N + 1, samples=samples)
    else:
        ctx.report.skipped["bochner.be_margin"] = "classify does not conclude RCD for the product"

    a, b = rng.normal(size=(2, 1000)) * 10
    Ns = rng.uniform(1, 10, 1000)
    lhs, rhs = bo.dimension_identity(a, b, Ns)
    err = float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(lhs))))
    out["dimension_identity"] = _result(-err, 1e-12, triples=1000)

    u_base = bo.TensorFunction(bo.random_separable(W, rng, lo, hi).u1, lambda s: np.ones_like(np.asarray(s, float)))
    full = bo.gamma2_terms(W, u_base, phi, n, nf, R).terms["base_gamma2"]
    Fop = bo.fiber_op(W, nf)
    one_d = bo.bochner_1d(W, u_base.u1, phi.u1, n, R) * float(np.sum(Fop.mass * phi.u2(Fop.x)))
    out["base_reduction"] = _result(-abs(full - one_d), 1e-10 * max(1.0, abs(one_d)))
    return out


def _require_convex_boundary(ctx):
    rep = check_fK_concavity(ctx.W.B, ctx.W.f, tol=ctx.tol["concavity"])
    if not rep.boundary_ok:
        raise NotApplicable("f decreases outward at the base boundary, so shortest paths can run "
                            "along it and shooting does not find them")


def _set_count(ctx):
    return int(ctx.scenario.checks.get("sets", 1))


def _lattice(ctx, base):
    return max(6, int(round(base * ctx.scale)))


def cmd_brunn_minkowski(ctx, t=0.5):
    _require_convex_boundary(ctx)
    W, rng = ctx.W, ctx.rng("brunn-minkowski")
    R = ctx.grid["truncation_R"]
    nb = _lattice(ctx, 16)
    out = {}
    for i in range(_set_count(ctx)):
        A0, A1 = geo.random_product_set(W, rng, R=R), geo.random_product_set(W, rng, R=R)
        res = geo.brunn_minkowski_check(W, A0, A1, t, nb, nb)
        out[f"random_{i}"] = _result(res.margin, res.tolerance, t=t, A0=A0.to_dict(), A1=A1.to_dict(),
                                     Theta=res.Theta, exponent=res.exponent)
    A = geo.random_product_set(W, rng, R=R)
    res = geo.brunn_minkowski_check(W, A, A, t, nb, nb)
    out["identical"] = _result(res.margin, 0.0, t=t, A=A.to_dict())
    return out


def _apex(ctx):
    a = ctx.scenario.checks.get("apex")
    if a:
        return float(a[0]), float(a[1])
    lo, hi = _window(ctx)
    F = ctx.W.F
    return 0.5 * (lo + hi), (F.length / 2 if F.kind == "interval" else 0.0)


def cmd_mcp(ctx, ts=(0.5,)):
    _require_convex_boundary(ctx)
    W, rng = ctx.W, ctx.rng("mcp")
    R = ctx.grid["truncation_R"]
    apex = _apex(ctx)
    n = _lattice(ctx, 24)
    out = {}
    for i in range(_set_count(ctx)):
        for _ in range(100):
            A = geo.random_product_set(W, rng, R=R)
            if not A.r_lo - 0.05 <= apex[0] <= A.r_hi + 0.05:
                break
        else:
            raise NotApplicable("no seeded set avoids the apex")
        for t in ts:
            res = geo.mcp_check(W, apex, A, t, n=n)
            out[f"set_{i}_t{t:g}"] = _result(res.margin, res.tolerance, t=t, apex=list(apex), A=A.to_dict(),
                                             worst_point=list(res.worst_point), lattice=n)
    return out


DISPATCH = {
    "check": cmd_check, "classify": cmd_classify, "distance": cmd_distance, "geodesic": cmd_geodesic,
    "spectrum": cmd_spectrum, "bochner": cmd_bochner, "brunn-minkowski": cmd_brunn_minkowski, "mcp": cmd_mcp,
}


def run(command, scenario, seed=0, out=None, grid_scale=1.0, timestamps=False):
    """Run ``command`` (or ``all``) on a loaded scenario and return the Report."""
    if command != "all" and command not in DISPATCH:
        raise ValueError(f"unknown command {command!r}")
    report = Report(scenario.name, command, int(seed), float(grid_scale))
    if timestamps:
        report.timestamps["start"] = datetime.now(timezone.utc).isoformat()
    out = None if out is None else Path(out)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    ctx = Context(scenario, int(seed), scenario.scaled_grid(grid_scale), float(grid_scale), out, report)
    for name in (COMMANDS if command == "all" else (command,)):
        try:
            with np.errstate(all="ignore"):
                results = DISPATCH[name](ctx)
        except NotApplicable as exc:
            report.skipped[name] = str(exc)
            continue
        except (WarpcheckError, ValueError, ArithmeticError) as exc:
            report.errors[name] = {"type": type(exc).__name__, "message": str(exc)}
            continue
        for key, val in results.items():
            report.results[f"{name}.{key}"] = val
    if timestamps:
        report.timestamps["end"] = datetime.now(timezone.utc).isoformat()
    if out is not None:
        (out / f"{scenario.name}-{command}.json").write_text(report.to_json())
    return report


def _resolve(path):
    p = Path(path)
    if not p.exists() and (bundled_dir() / f"{path}.json").exists():
        return bundled_dir() / f"{path}.json"
    return p


def _configure_threads():
    n = os.environ.get("WARPCHECK_THREADS")
    if not n:
        return
    import numba
    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def main(argv=None):
    ap = argparse.ArgumentParser(prog="warpcheck", description="Numerical checks for warped products.")
    ap.add_argument("command", choices=COMMANDS + ("all",))
    ap.add_argument("--scenario", required=True, help="scenario JSON path or bundled scenario name")
    ap.add_argument("--seed", type=int, default=0, help="seed for the Monte-Carlo commands (default 0)")
    ap.add_argument("--out", default=".", help="directory for the report and CSV files")
    ap.add_argument("--grid-scale", type=float, default=1.0, help="multiply base_n and fiber_n by this factor (min 16)")
    ap.add_argument("--timestamps", action="store_true", help="record start/end times (breaks byte-identity)")
    args = ap.parse_args(argv)
    if args.grid_scale <= 0:
        ap.error("--grid-scale must be positive")
    _configure_threads()
    out = Path(args.out)
    try:
        scenario = load_scenario(_resolve(args.scenario))
    except (WarpcheckError, OSError) as exc:
        report = Report(str(args.scenario), args.command, args.seed, args.grid_scale)
        report.errors["load"] = {"type": type(exc).__name__, "message": str(exc)}
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{Path(args.scenario).stem}-{args.command}.json").write_text(report.to_json())
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = run(args.command, scenario, args.seed, out, args.grid_scale, args.timestamps)
    for key, r in report.results.items():
        print(f"{'PASS' if r['pass'] else 'FAIL'} {key} margin={r['margin']:.6g} tol={r['tolerance']:.3g}")
    for key, reason in report.skipped.items():
        print(f"SKIP {key}: {reason}")
    for key, e in report.errors.items():
        print(f"ERROR {key}: {e['type']}: {e['message']}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())

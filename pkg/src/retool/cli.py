"""Command line front end.

    retool stability --model lagrange_top --params lambda=5
    retool branch    --model lagrange_top --subgroup S1 --grid rho=-0.5:0.5:21
    retool bifurcate --model two_vortices --along eta --window 0.2,0.8
    retool integrate --model toy_so3_s1 --params c=1 --eta 5 --t-end 10 --dt 1e-3
    retool scan      --model lagrange_top --over lambda=3:6:31

Exit status: 0 on success, 1 on usage or input errors, 2 when a checked
hypothesis fails (the report names it).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, lie
from .bifurcation import ParameterLine, detect_crossing, kernel_analysis, lyapunov_schmidt
from .dynamics import BundleState, integrate_bundle
from .examples import BUILTINS, builtin_model
from .model import LocalModel, fixed_spaces, hbar_eta_derivs, model_from_dict, slice_pencil
from .pencil import certify_definite, lambda_min_profile
from .resolve import HypothesisError, continue_branch, orbit_type_branch, solve_re

SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------- parsing helpers

def parse_params(text: str | None) -> dict:
    out = {}
    if not text:
        return out
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise UsageError(f"malformed parameter '{item}' (expected key=value)")
        k, v = item.split("=", 1)
        try:
            val = float(v)
        except ValueError as exc:
            raise UsageError(f"parameter '{k}' is not a number: {v!r}") from exc
        if not math.isfinite(val):
            raise UsageError(f"parameter '{k}' is not finite")
        out[k.strip()] = val
    return out


def parse_range(text: str) -> tuple:
    """'name=a:b:n' -> (name, linspace)."""
    if "=" not in text:
        raise UsageError(f"malformed range '{text}' (expected name=a:b:n)")
    name, body = text.split("=", 1)
    parts = body.split(":")
    if len(parts) != 3:
        raise UsageError(f"malformed range '{text}' (expected name=a:b:n)")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise UsageError(f"malformed range '{text}'") from exc
    if n < 1 or not (math.isfinite(a) and math.isfinite(b)):
        raise UsageError(f"malformed range '{text}'")
    return name.strip(), np.linspace(a, b, n)


def parse_pair(text: str, what: str) -> tuple:
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"{what} must be 'a,b'") from exc
    if not (math.isfinite(a) and math.isfinite(b)) or a > b:
        raise UsageError(f"{what} must be finite with a <= b")
    return a, b


def parse_vector(text: str | None, n: int, what: str):
    if text is None:
        return None
    try:
        vals = np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError as exc:
        raise UsageError(f"{what} must be comma-separated numbers") from exc
    if vals.size != n:
        raise UsageError(f"{what} must have {n} entries")
    return vals


def load_model(name: str, params: dict) -> LocalModel:
    if name in BUILTINS:
        return builtin_model(name, params)
    path = Path(name)
    if not path.exists():
        raise UsageError(f"unknown model '{name}': not a built-in ({', '.join(BUILTINS)}) or a file")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"model file is not valid JSON: {exc}") from exc
    if params:
        ham = data.get("hamiltonian", {})
        if "builtin" in ham:
            ham.setdefault("params", {}).update(params)
    return model_from_dict(data)


def _clean(obj):
    """JSON-safe copy: numpy to lists, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def threads() -> int:
    try:
        return max(1, int(os.environ.get("RETOOL_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------- helpers

def _base_eta(m: LocalModel, args, seed: int):
    """Velocity multiplier for the base point: explicit, else the certificate optimum."""
    if getattr(args, "eta", None) is not None:
        return parse_vector(args.eta, m.dim_gz, "--eta")
    if m.N_dim:
        cert = certify_definite(slice_pencil(m), seed=seed)
        if cert.definite:
            return np.asarray(cert.eta_star, float)
    return np.zeros(m.dim_gz)


def _cocentral(m: LocalModel) -> dict:
    res = lie.check_cocentral(m.alg, m.splitting.gz, m.splitting.gmu)
    detail = "g_z has a central complement in g_mu"
    if not res.cocentral:
        a, b, c = res.witness
        detail = f"[{np.round(a, 12).tolist()}, {np.round(b, 12).tolist()}] = {np.round(c, 12).tolist()}"
    return {"name": "co-central", "passed": bool(res.cocentral), "detail": detail}


# ---------------------------------------------------------------------- subcommands

def cmd_stability(m, args, out: Path, seed: int):
    box = parse_pair(args.eta_box, "--eta-box") if args.eta_box else None
    pen = slice_pencil(m)
    cert = certify_definite(pen, None if box is None else [box] * pen.n_eta, seed=seed)
    return {"certificate": cert.to_dict()}, [], {}


def _branch_csv(branch):
    rows = []
    for n in branch.nodes:
        if not n.converged:
            continue
        rows.append(list(n.rho_coords) + list(n.eta_coords) + list(n.eig_full)
                    + [max(n.point.r1, n.point.r2)])
    return rows


def cmd_branch(m, args, out: Path, seed: int):
    rho_axes, eta_axes = {}, {}
    for g in args.grid or []:
        name, vals = parse_range(g)
        if name.startswith("rho"):
            rho_axes[name] = vals
        elif name.startswith("eta"):
            eta_axes[name] = vals
        else:
            raise UsageError(f"grid axis '{name}' must be rho... or eta...")
    eta0 = _base_eta(m, args, seed)
    base = solve_re(m, (np.zeros(m.dim_mstar), eta0, np.zeros(m.N_dim)), args.subgroup)
    Bm, _, Bz = fixed_spaces(m, args.subgroup)
    ra = [rho_axes[k] for k in sorted(rho_axes)] or None
    ea = [eta_axes[k] for k in sorted(eta_axes)] or None
    if ra is not None and len(ra) == 1 and Bm.shape[1] > 1:
        ra = ra + [np.zeros(1)] * (Bm.shape[1] - 1)
    if ea is not None and len(ea) == 1 and Bz.shape[1] > 1:
        ea = ea + [np.zeros(1)] * (Bz.shape[1] - 1)
    try:
        if args.orbit_type:
            br = orbit_type_branch(m, base, ra[0] if ra else None)
        else:
            br = continue_branch(m, base, args.subgroup, ra, ea)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    header = [f"rho_{i + 1}" for i in range(len(br.rho_axes))] + [f"eta_{i + 1}" for i in range(len(br.eta_axes))]
    header += [f"eig_{i + 1}" for i in range(m.N_dim)] + ["residual"]
    hyps = [{"name": "branch-converged", "passed": br.all_converged, "detail": f"{br.flags['holes']} holes"}]
    return {"branch": br.to_dict()}, hyps, {"branch.csv": (header, _branch_csv(br))}


def cmd_bifurcate(m, args, out: Path, seed: int):
    hyps = [_cocentral(m)]
    if not hyps[0]["passed"]:
        return {"bifurcation": None}, hyps, {}
    lo, hi = parse_pair(args.window, "--window")
    eta0 = _base_eta(m, args, seed) if args.eta is not None or args.along == "rho" else np.zeros(m.dim_gz)
    if args.along == "eta":
        if m.dim_gz == 0:
            raise UsageError("model has no isotropy directions to move along")
        d_eta = np.zeros(m.dim_gz)
        d_eta[0] = 1.0
        line = ParameterLine(np.zeros(m.dim_mstar), np.zeros(m.dim_mstar), eta0, d_eta, lo, hi)
    else:
        if m.dim_mstar == 0:
            raise UsageError("model has no m* directions to move along")
        d_rho = np.zeros(m.dim_mstar)
        d_rho[0] = 1.0
        line = ParameterLine(np.zeros(m.dim_mstar), d_rho, eta0, np.zeros(m.dim_gz), lo, hi)
    _, BN, _ = fixed_spaces(m, args.subgroup)

    def restricted(t):
        rho, eta = line.at(t)
        H = hbar_eta_derivs(m, eta, rho, np.zeros(m.N_dim))[3]
        return np.linalg.eigvalsh(BN.T @ H @ BN)

    w_mid = restricted(0.5 * (lo + hi)) if BN.size else np.zeros(0)
    if BN.size == 0:
        crossings = []
    else:
        # follow every eigenvalue by its rank; report the sign changes
        crossings = []
        for k in range(w_mid.size):
            crossings += detect_crossing(lambda t, k=k: restricted(t)[k], lo, hi, args.samples_grid)
    crossings.sort(key=lambda c: c.location)
    seen, uniq = [], []
    for c in crossings:
        if all(abs(c.location - s) > 1e-8 for s in seen):
            seen.append(c.location)
            uniq.append(c)
    hyps.append({"name": "crossing", "passed": bool(uniq),
                 "detail": f"{len(uniq)} crossing(s) in [{lo}, {hi}]"})
    if not uniq:
        return {"bifurcation": None}, hyps, {}
    reports, rows = [], []
    coh_ok = True
    for c in uniq:
        rho_c, eta_c = line.at(c.location)
        kd = kernel_analysis(m, eta_c, rho_c, args.subgroup)
        coh_ok &= kd.cohomogeneity_one
        if not kd.cohomogeneity_one:
            reports.append({"crossing": c.location, "kernel": kd.to_dict()})
            continue
        half = min(args.half_width, 0.5 * (hi - lo))
        sub = ParameterLine(rho_c, line.drho, eta_c, line.deta, -half, half)
        ys = [r * kd.basis[:, 0] for r in np.logspace(np.log10(args.ymin), np.log10(args.ymax), args.samples)]
        rep = lyapunov_schmidt(m, kd, sub, ys, args.subgroup)
        reports.append(rep.to_dict() | {"crossing": c.location})
        rows += [(p.y_norm, c.location + p.t, max(p.point.r1, p.point.r2)) for p in rep.points]
    hyps.append({"name": "cohomogeneity-one", "passed": bool(coh_ok),
                 "detail": "kernel at every crossing" if coh_ok else "failed at some crossing"})
    return ({"bifurcation": reports}, hyps,
            {"bifurcation.csv": (["y_norm", "lambda_y", "residual"], rows)})


def cmd_integrate(m, args, out: Path, seed: int):
    rng = np.random.default_rng(seed)
    eta = parse_vector(args.eta, m.dim_gz, "--eta") if args.eta is not None else np.zeros(m.dim_gz)
    rho0 = parse_vector(args.rho0, m.dim_mstar, "--rho0")
    v0 = parse_vector(args.v0, m.N_dim, "--v0")
    rho0 = args.scale * rng.standard_normal(m.dim_mstar) if rho0 is None else rho0
    v0 = args.scale * rng.standard_normal(m.N_dim) if v0 is None else v0
    if not (args.dt > 0 and math.isfinite(args.t_end)):
        raise UsageError("--dt must be positive and --t-end finite")
    g0 = m.group().identity()
    rep = integrate_bundle(m, eta, BundleState(g0, rho0, v0), args.t_end, args.dt,
                           sample_every=max(1, args.sample_every))
    header = ["t"] + [f"rho_{i + 1}" for i in range(m.dim_mstar)] + [f"v_{i + 1}" for i in range(m.N_dim)]
    header += ["jy_drift", "impliedcond_residual"]
    res = {"max_jy_drift": rep.max_jy_drift, "max_implied_residual": rep.max_implied_residual,
           "max_departure": rep.max_departure, "max_group_error": rep.max_group_error,
           "aborted": rep.aborted, "message": rep.message,
           "initial": {"rho": rho0, "v": v0, "eta": eta}}
    return {"trajectory": res}, [], {"trajectory.csv": (header, rep.rows().tolist())}


def _scan_cell(name, value, base_params, model_arg, box, seed):
    params = dict(base_params)
    params[name] = value
    m = load_model(model_arg, params)
    cert = certify_definite(slice_pencil(m), None if box is None else [box] * m.dim_gz, seed=seed)
    return [value, cert.verdict.value] + list(np.atleast_1d(cert.eta_star)) + [cert.margin]


def cmd_scan(m, args, out: Path, seed: int):
    name, vals = parse_range(args.over)
    box = parse_pair(args.eta_box, "--eta-box") if args.eta_box else None
    n_thr = threads()
    if name.startswith("eta"):
        pen = slice_pencil(m)
        if pen.n_eta != 1:
            grids = np.array(np.meshgrid(*[vals] * pen.n_eta, indexing="ij")).reshape(pen.n_eta, -1).T
        else:
            grids = vals
        rows = lambda_min_profile(pen, grids, n_thr).tolist()
        header = [f"eta_{i + 1}" for i in range(pen.n_eta)] + ["lambda_min", "lambda_max"]
        return {"scan": {"over": name, "points": len(rows)}}, [], {"scan.csv": (header, rows)}
    params = parse_params(args.params)
    work = [(name, float(v), params, args.model, box, seed) for v in vals]
    if n_thr > 1:
        with ThreadPoolExecutor(max_workers=n_thr) as ex:
            rows = list(ex.map(lambda a: _scan_cell(*a), work))
    else:
        rows = [_scan_cell(*a) for a in work]
    header = [name, "verdict"] + [f"eta_star_{i + 1}" for i in range(m.dim_gz)] + ["margin"]
    summary = {"over": name, "points": len(rows),
               "definite": [r[0] for r in rows if r[1] in ("PositiveDefinite", "NegativeDefinite")]}
    return {"scan": summary}, [], {"scan.csv": (header, rows)}


COMMANDS = {"stability": cmd_stability, "branch": cmd_branch, "bifurcate": cmd_bifurcate,
            "integrate": cmd_integrate, "scan": cmd_scan}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="retool", description="Relative equilibria in the slice model: stability, "
                                           "branches, bifurcations, integration.")
    p.add_argument("--version", action="version", version=f"retool {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--model", required=True, help=f"built-in ({', '.join(BUILTINS)}) or model JSON file")
        sp.add_argument("--params", default="", help="key=value,... model parameters")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--quiet", action="store_true")

    s = sub.add_parser("stability", help="certify formal stability of the base point")
    common(s)
    s.add_argument("--eta-box", default=None, help="a,b bounds of the eta search")

    s = sub.add_parser("branch", help="continue a branch of relative equilibria")
    common(s)
    s.add_argument("--subgroup", default="e")
    s.add_argument("--grid", action="append", help="rho=a:b:n or eta=a:b:n (repeatable)")
    s.add_argument("--eta", default=None, help="base velocity multiplier")
    s.add_argument("--orbit-type", action="store_true", help="continue with K = G_z and check symplecticity")

    s = sub.add_parser("bifurcate", help="locate crossings and bifurcating points")
    common(s)
    s.add_argument("--along", choices=("eta", "rho"), default="eta")
    s.add_argument("--window", required=True, help="a,b parameter window")
    s.add_argument("--eta", default=None, help="base eta (for --along rho, or as origin of the eta line)")
    s.add_argument("--subgroup", default="e")
    s.add_argument("--samples", type=int, default=6)
    s.add_argument("--samples-grid", type=int, default=201)
    s.add_argument("--ymin", type=float, default=1e-3)
    s.add_argument("--ymax", type=float, default=1e-1)
    s.add_argument("--half-width", type=float, default=0.05)

    s = sub.add_parser("integrate", help="integrate the lifted flow")
    common(s)
    s.add_argument("--eta", default=None)
    s.add_argument("--t-end", type=float, default=10.0)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--rho0", default=None)
    s.add_argument("--v0", default=None)
    s.add_argument("--scale", type=float, default=0.1, help="size of the random initial state")
    s.add_argument("--sample-every", type=int, default=10)

    s = sub.add_parser("scan", help="stability region over a parameter")
    common(s)
    s.add_argument("--over", required=True, help="name=a:b:n (a model parameter, or eta)")
    s.add_argument("--eta-box", default=None)
    return p


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([(repr(float(x)) if isinstance(x, (float, np.floating)) else x) for x in r])


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    t0 = time.perf_counter()
    report = {"schema_version": SCHEMA_VERSION, "tool": "retool", "tool_version": __version__,
              "subcommand": args.command, "seed": args.seed}
    try:
        params = parse_params(args.params)
        m = load_model(args.model, params)
        report["model"] = {"name": m.name, "source": args.model, "params": params,
                           "descriptor": m.to_dict()}
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        results, hyps, csvs = COMMANDS[args.command](m, args, out, args.seed)
    except HypothesisError as exc:
        results, hyps, csvs = {}, [{"name": exc.hypothesis, "passed": False, "detail": str(exc)}], {}
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report.setdefault("model", {"source": args.model})
    except (UsageError, ValueError) as exc:
        print(f"retool: error: {exc}", file=sys.stderr)
        return 1
    report["hypotheses"] = hyps
    report["results"] = results
    report["wall_time_s"] = time.perf_counter() - t0
    report = _clean(report)
    (out / f"{args.command}_report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    for name, (header, rows) in csvs.items():
        _write_csv(out / name, header, rows)
    failed = [h["name"] for h in hyps if not h["passed"]]
    if not args.quiet:
        if args.command == "stability":
            c = results["certificate"]
            print(f"{c['verdict']}  eta*={c['eta_star']}  margin={c['margin']:.6g}")
        for h in hyps:
            print(f"hypothesis {h['name']}: {'pass' if h['passed'] else 'FAIL'} ({h['detail']})")
        print(f"report: {out / (args.command + '_report.json')}")
    if failed:
        print(f"retool: hypothesis failed: {', '.join(failed)}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Command-line front end.

Every subcommand writes its artifacts plus ``manifest.json`` into ``--out``.
Numbers are written with 17 significant digits and nothing depends on the
clock, so identical invocations give identical bytes.
"""

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import GeoRiemannError, ModelValidationError, NoSequenceFound, NumericalError
from .model import PhaseState, check_state, desk3_path, read_model, validate_model

EXIT_CODES = {"ok": 0, "incompatible": 2, "model": 3, "numerical": 4}
CSV_SCHEMA = "1"


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not np.isfinite(v):
            return None
        # round-trip through 17 significant digits
        return float(format(v, ".17g"))
    return obj


def write_json(path, obj):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"# schema {CSV_SCHEMA}"])
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def load_model(path):
    """Read and validate a model file (Assumption-1 scan, derivative check, domain)."""
    cfg = read_model(path)
    validate_model(cfg)
    return cfg


def _floats(text):
    return [float(v) for v in text.split(",")]


def _state(text, cfg, with_u=True):
    v = _floats(text)
    need = cfg.n + (1 if with_u else 0)
    if len(v) != need:
        raise ModelValidationError("state", f"expected {need} comma-separated values, got {len(v)}")
    U = PhaseState(v[0], tuple(v[1:cfg.n]), v[cfg.n] if with_u else 1.0)
    check_state(U, cfg)
    return U


# --------------------------------------------------------------- commands

def cmd_eigen_at(args, cfg, out):
    from .eigen import assemble_eigenpairs, eigen_ordering

    U = _state(args.state, cfg)
    pairs = assemble_eigenpairs(U, cfg)
    order, ties, label, speeds = eigen_ordering(U, cfg)
    res = {"state": U.array, "order": order, "ties": ties, "region": label,
           "families": [{"family": p.family, "lambda": p.lam, "Lambda": p.Lam, "r": p.r, "l": p.l,
                         "degenerate": p.degenerate, "status": p.status, "grad_lambda_dot_r": p.dd}
                        for p in pairs]}
    write_json(out / "eigen.json", res)
    return 0, ["eigen.json"]


def cmd_rarefaction(args, cfg, out):
    from .rarefaction import integrate_rarefaction

    U = _state(args.state, cfg)
    hint = _floats(args.hint) if args.hint else None
    c = integrate_rarefaction(U, args.family, args.direction, cfg, tangent_hint=hint, launch=args.launch)
    names = ["tau", "s"] + [f"y{i + 1}" for i in range(cfg.m)] + ["u", "lambda"]
    write_csv(out / "rarefaction.csv", names,
              [[t, *z, lam] for t, z, lam in zip(c.tau, c.states, c.lam)])
    write_json(out / "rarefaction.json", {"family": c.family, "stop_reason": c.stop_reason,
                                          "length": c.length, "end": c.states[-1]})
    return 0, ["rarefaction.csv", "rarefaction.json"]


def cmd_hugoniot(args, cfg, out):
    from .hugoniot import trace_hugoniot

    U = _state(args.state, cfg)
    files, meta = [], []
    for br in trace_hugoniot(U, cfg):
        tag = br.kind.replace("(", "_").replace(")", "").replace("Branch", "").lower()
        tag = f"{tag}_{'plus' if br.direction > 0 else 'minus'}"
        name = f"hugoniot_{tag}.csv"
        cols = ["s"] + [f"y{i + 1}" for i in range(cfg.m)] + ["u", "sigma", "lax"]
        labels = [d.get("label", "") if isinstance(d, dict) else str(d) for d in br.lax]
        labels += [""] * (len(br.points) - len(labels))
        write_csv(out / name, cols, [[*p, uu, sg, lab] for p, uu, sg, lab in
                                     zip(br.points, br.u, br.sigma, labels)])
        files.append(name)
        meta.append({"file": name, "kind": br.kind, "direction": br.direction,
                     "stop_reason": br.stop_reason, "samples": len(br.points)})
    write_json(out / "hugoniot.json", {"left": U.array, "branches": meta})
    return 0, files + ["hugoniot.json"]


def cmd_surfaces(args, cfg, out):
    from .bifurcation import sample_surfaces

    grid = args.grid or 100
    ss = sample_surfaces(cfg, grid=grid)
    files, meta = [], []
    for mesh in ss.meshes:
        tag = mesh.kind.replace("(", "_").replace(")", "").replace(",", "_").lower()
        name = f"{tag}_sheet{mesh.sheet}.csv"
        cols = ["s"] + [f"y{i + 1}" for i in range(cfg.m)] + ["residual", "factor"]
        fac = mesh.factor if mesh.factor else [""] * len(mesh.points)
        write_csv(out / name, cols, [[*p, r, f] for p, r, f in zip(mesh.points, mesh.residual, fac)])
        files.append(name)
        meta.append({"file": name, "kind": mesh.kind, "sheet": mesh.sheet, "vertices": len(mesh.points),
                     "s_range": mesh.s_range, "max_residual": float(np.max(mesh.residual))})
    summary = {"grid": list(ss.grid), "coincidence_sheets": ss.count("Coincidence"),
               "inflection_sheets": ss.count("Inflection"), "notes": ss.notes, "meshes": meta}
    write_json(out / "surfaces.json", summary)
    return 0, files + ["surfaces.json"]


def _solution_json(sol):
    segs = []
    for seg in sol.segments:
        d = {"kind": seg.kind, "family": seg.family, "wave": seg.short if seg.kind != "ConstantState" else "",
             "left": seg.left_state.array, "right": seg.right_state.array, "speed_range": seg.speed_range}
        if "sigma" in seg.payload:
            d["sigma"] = seg.payload["sigma"]
        segs.append(d)
    return {"template": sol.template, "sequence": sol.sequence, "compatible": sol.compatible,
            "u_R": sol.u_R, "states": [U.array for U in sol.states], "segments": segs,
            "report": sol.report}


def _profile_rows(sol, xi):
    from .riemann import evaluate_profile

    return [[x, *row] for x, row in zip(xi, evaluate_profile(sol, xi))]


def _xi_range(sol, num):
    lo = min(seg.speed_range[0] for seg in sol.segments)
    hi = max(seg.speed_range[1] for seg in sol.segments)
    pad = 0.1 * max(hi - lo, 1.0)
    return np.linspace(lo - pad, hi + pad, num)


def cmd_solve(args, cfg, out):
    from .riemann import solve_riemann

    L = _state(args.left, cfg)
    R = _state(args.right, cfg, with_u=False)
    try:
        sol = solve_riemann(L, R.sy, cfg)
    except NoSequenceFound as exc:
        write_json(out / "solution.json", {"error": "NoSequenceFound", "message": str(exc), "trace": exc.trace})
        return EXIT_CODES["incompatible"], ["solution.json"]
    write_json(out / "solution.json", _solution_json(sol))
    xi = _xi_range(sol, args.samples)
    cols = ["xi", "s"] + [f"y{i + 1}" for i in range(cfg.m)] + ["u"]
    write_csv(out / "profile.csv", cols, _profile_rows(sol, xi))
    code = 0 if sol.compatible else EXIT_CODES["incompatible"]
    return code, ["solution.json", "profile.csv"]


def cmd_profile(args, cfg, out):
    from .riemann import solve_riemann

    L = _state(args.left, cfg)
    R = _state(args.right, cfg, with_u=False)
    sol = solve_riemann(L, R.sy, cfg)
    if args.xi:
        a, b, k = _floats(args.xi)
        xi = np.linspace(a, b, int(k))
    else:
        xi = _xi_range(sol, args.samples)
    cols = ["xi", "s"] + [f"y{i + 1}" for i in range(cfg.m)] + ["u"]
    write_csv(out / "profile.csv", cols, _profile_rows(sol, xi))
    return (0 if sol.compatible else EXIT_CODES["incompatible"]), ["profile.csv"]


def cmd_verify(args, cfg, out):
    from .verify import run_suite

    rep = run_suite(cfg, args.suite, seed=args.seed, count=args.count)
    ok = all(r["pass"] for r in rep.values())
    write_json(out / "verify.json", {"pass": ok, "suites": rep})
    return (0 if ok else EXIT_CODES["numerical"]), ["verify.json"]


COMMANDS = {"eigen-at": cmd_eigen_at, "rarefaction": cmd_rarefaction, "hugoniot": cmd_hugoniot,
            "surfaces": cmd_surfaces, "solve": cmd_solve, "profile": cmd_profile, "verify": cmd_verify}


def build_parser():
    p = argparse.ArgumentParser(prog="georiemann", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", default=None, help="model JSON (default: shipped DESK3)")
    common.add_argument("--out", default="georiemann-out", help="output directory")
    common.add_argument("--grid", type=int, default=None, help="surface grid per axis")
    common.add_argument("--tol", type=float, default=None, help="reserved tolerance override")
    common.add_argument("--seed", type=int, default=0, help="seed for random test states")
    sub = p.add_subparsers(dest="command", required=True)
    e = sub.add_parser("eigen-at", parents=[common])
    e.add_argument("--state", required=True, help="s,y1,...,u")
    r = sub.add_parser("rarefaction", parents=[common])
    r.add_argument("--state", required=True)
    r.add_argument("--family", required=True, help="s, L1, L2, ...")
    r.add_argument("--direction", type=int, default=1, choices=[1, -1])
    r.add_argument("--hint", default=None, help="(s, y) tangent hint")
    r.add_argument("--launch", action="store_true", help="allow starting on a bifurcation surface")
    h = sub.add_parser("hugoniot", parents=[common])
    h.add_argument("--state", required=True)
    sub.add_parser("surfaces", parents=[common])
    for name in ("solve", "profile"):
        q = sub.add_parser(name, parents=[common])
        q.add_argument("--left", required=True, help="s,y1,...,u")
        q.add_argument("--right", required=True, help="s,y1,...")
        q.add_argument("--samples", type=int, default=401)
        if name == "profile":
            q.add_argument("--xi", default=None, help="start,stop,count")
    v = sub.add_parser("verify", parents=[common])
    v.add_argument("--suite", default="all", choices=["eigen", "rh", "fv", "all"])
    v.add_argument("--count", type=int, default=200, help="random states for the eigen suite")
    return p


def _config_hash(cfg):
    text = json.dumps(_jsonable(cfg.to_dict()), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()


def dispatch(args):
    """Run one subcommand; returns (exit code, files written)."""
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_path = args.model or str(desk3_path())
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "out", "model")}
    manifest = {"tool": "georiemann", "version": __version__, "subcommand": args.command,
                "model": Path(model_path).name if args.model is None else args.model,
                "parameters": params, "output_dir": str(args.out)}
    try:
        cfg = load_model(model_path)
        manifest["config_hash"] = _config_hash(cfg)
        code, files = COMMANDS[args.command](args, cfg, out)
    except ModelValidationError as exc:
        manifest["error"] = {"class": type(exc).__name__, "message": str(exc)}
        code, files = EXIT_CODES["model"], []
    except NoSequenceFound as exc:
        manifest["error"] = {"class": type(exc).__name__, "message": str(exc)}
        code, files = EXIT_CODES["incompatible"], []
    except (NumericalError, GeoRiemannError, FloatingPointError, ValueError) as exc:
        manifest["error"] = {"class": type(exc).__name__, "message": str(exc)}
        code, files = EXIT_CODES["numerical"], []
    manifest["files"] = files
    manifest["exit_code"] = code
    write_json(out / "manifest.json", manifest)
    if "error" in manifest:
        print(f"georiemann {args.command}: {manifest['error']['class']}: {manifest['error']['message']}",
              file=sys.stderr)
    return code, files


def main(argv=None):
    args = build_parser().parse_args(argv)
    with np.errstate(all="ignore"):
        code, _ = dispatch(args)
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Acceptance checks, one test per criterion.

Each test records a PASS/FAIL line; conftest prints them in the terminal
summary, and running this file directly prints them as they finish.
"""

import time

import numpy as np
import pytest
from scipy.optimize import brentq, minimize_scalar

from georiemann import PhaseState, assemble_eigenpairs, frac_flow, h_factor, sample_surfaces, solve_riemann
from georiemann.cli import main as cli_main
from georiemann.eigen import fields
from georiemann.hugoniot import rh_residual, saturation_branch, shock_speed, trace_branch
from georiemann.verify import compare_eigen, fv_l1_error, random_states

from conftest import CROSS_R, LEFT, SHARED_R
from oracles import fd_directional, speed

RESULTS = {}


def report(k, ok, detail):
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[k] = line
    print(line)
    return ok


# ---------------------------------------------------------------- 1

def test_criterion_1_eigen_equivalence(cfg):
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    states = random_states(cfg, 1000, rng)
    res = np.array([compare_eigen(U, cfg) for U in states])
    dt = time.perf_counter() - t0
    rel, resid = res.max(axis=0)
    ok = rel <= 1e-10 and resid <= 1e-10 and dt < 30
    assert report(1, ok, f"states=1000 max_rel={rel:.2e} max_residual={resid:.2e} time={dt:.1f}s")


# ---------------------------------------------------------------- 2

def test_criterion_2_corollaries(cfg):
    rng = np.random.default_rng(7)
    s = np.linspace(0.01, 0.99, 100)
    drift = 0.0
    for _ in range(20):
        y = rng.uniform(cfg.box[:, 0], cfg.box[:, 1])
        u = rng.uniform(0.3, 3.0, size=s.size)
        Lam = fields(s, np.broadcast_to(y, (s.size, cfg.m)), u, cfg, level=0).Lam
        ref = Lam[0]
        drift = max(drift, float(np.max(np.abs(Lam - ref) / np.maximum(np.abs(ref), 1e-300))))
    fd_worst = 0.0
    for U in random_states(cfg, 200, rng):
        for i, p in enumerate(assemble_eigenpairs(U, cfg)):
            if p.family != "s" and p.Lam in (0.0, 1.0):
                fd_worst = max(fd_worst, abs(fd_directional(U.array, p.r, i, cfg)))
    ok = drift <= 1e-12 and fd_worst <= 1e-7
    assert report(2, ok, f"Lambda drift={drift:.2e} (20 y x 100 s, random u) "
                         f"degenerate |grad lambda.r| fd max={fd_worst:.2e}")


# ---------------------------------------------------------------- 3

def _factor_roots(y, cfg, grid):
    fns = [lambda s: float(frac_flow(s, y, cfg).f) - s,
           lambda s: (lambda p: p[0].lam - p[1].lam)(assemble_eigenpairs(PhaseState(s, y, 1.0), cfg)),
           lambda s: h_factor(PhaseState(s, y, 1.0), "L1", cfg)]
    roots = []
    for g in fns:
        v = np.array([g(t) for t in grid])
        for i in np.nonzero(v[:-1] * v[1:] < 0)[0]:
            roots.append(brentq(g, grid[i], grid[i + 1], xtol=1e-14))
    return np.array(roots)


def _fd_l1(s, y, cfg):
    U = PhaseState(s, y, 1.0)
    return fd_directional(U.array, assemble_eigenpairs(U, cfg)[1].r, 1, cfg)


def test_criterion_3_inflection_product(cfg):
    rng = np.random.default_rng(11)
    worst = 0.0
    for U in random_states(cfg, 500, rng):
        pairs = assemble_eigenpairs(U, cfg)
        p = pairs[1]
        f = float(frac_flow(U.s, U.yarr, cfg).f)
        prod = (U.s - f) / (cfg.phi * (U.s - p.Lam) ** 2) * (pairs[0].lam - p.lam) * h_factor(U, "L1", cfg)
        fd = fd_directional(U.array, p.r, 1, cfg)
        worst = max(worst, abs(prod - fd) / abs(fd))
    # zeros of the FD directional derivative along s-lines sit on a factor root
    grid = np.linspace(0.005, 0.995, 200)
    h = grid[1] - grid[0]
    zeros, off = 0, 0.0
    for y in [(0.05, 2.8), (0.2, 3.3), (0.35, 3.9), (0.12, 3.6), (0.3, 2.9)]:
        v = np.abs([_fd_l1(t, y, cfg) for t in grid])
        fac = _factor_roots(y, cfg, grid)
        for i in range(1, grid.size - 1):
            if v[i] <= v[i - 1] and v[i] <= v[i + 1]:
                r = minimize_scalar(lambda t: abs(_fd_l1(t, y, cfg)), bounds=(grid[i - 1], grid[i + 1]),
                                    method="bounded", options={"xatol": 1e-12})
                lam = speed((r.x, *y, 1.0), 1, cfg)
                if r.fun <= 1e-6 * max(1.0, lam):
                    zeros += 1
                    off = max(off, float(np.min(np.abs(fac - r.x))) if fac.size else np.inf)
    ok = worst <= 1e-5 and zeros > 0 and off <= h
    assert report(3, ok, f"states=500 max_rel={worst:.2e}; fd zeros={zeros} max distance to factor "
                         f"root={off:.2e} (grid {h:.1e})")


# ---------------------------------------------------------------- 4

def test_criterion_4_rankine_hugoniot(cfg):
    rng = np.random.default_rng(3)
    worst, samples = 0.0, 0
    orders = []
    for U in random_states(cfg, 6, rng, margin=1e-2):
        for fam in ("L1", "L2"):
            for d in (1, -1):
                br = trace_branch(U, fam, d, cfg, max_samples=80, classify=False)
                for x, uu, sg in zip(br.points[1:], br.u[1:], br.sigma[1:]):
                    worst = max(worst, rh_residual(U, PhaseState.from_sy(x, uu), sg, cfg))
                    samples += 1
                lam = {p.family: p.lam for p in assemble_eigenpairs(U, cfg)}[fam]
                e = [abs(trace_branch(U, fam, d, cfg, first_step=hh, max_samples=1, classify=False).sigma[0] - lam)
                     for hh in (1e-3, 5e-4, 2.5e-4)]
                if max(e) <= 1e-10 * max(1.0, lam):
                    orders.append(1.0)       # contact: the secant speed is exact
                else:
                    orders.extend(np.log2([e[0] / e[1], e[1] / e[2]]))
    bl = 0.0
    U = PhaseState(0.2, (0.2, 3.0), 1.3)
    b = saturation_branch(U, cfg)
    fm = float(frac_flow(U.s, U.yarr, cfg).f)
    for x, uu in zip(b.points, b.u):
        if abs(x[0] - U.s) < 1e-9:
            continue
        Up = PhaseState.from_sy(x, uu)
        sg = shock_speed(U, Up, cfg)
        ref = U.u / cfg.phi * (float(frac_flow(x[0], x[1:], cfg).f) - fm) / (x[0] - U.s)
        bl = max(bl, abs(uu - U.u) / U.u, abs(sg - ref) / abs(ref))
    lo, hi = min(orders), max(orders)
    ok = worst <= 1e-8 and bl <= 1e-12 and 0.8 <= lo and hi <= 1.2
    assert report(4, ok, f"samples={samples} max_rh={worst:.2e}; BL u+/sigma rel={bl:.2e}; "
                         f"secant order in [{lo:.3f}, {hi:.3f}]")


# ---------------------------------------------------------------- 5

def test_criterion_5_scalar_fv(cfg):
    y = tuple(cfg.box.mean(axis=1))
    parts, ok = [], True
    for s_L, s_R in [(0.8, 0.2), (0.95, 0.05)]:
        t0 = time.perf_counter()
        sol = solve_riemann(PhaseState(s_L, y, 1.0), (s_R, *y), cfg)
        e1 = fv_l1_error(sol, 2000, cfg)
        e2 = fv_l1_error(sol, 4000, cfg)
        dt = time.perf_counter() - t0
        ratio = e2 / e1
        ok &= e1 <= 2e-2 and 0.35 <= ratio <= 0.65 and dt < 60
        parts.append(f"{s_L}->{s_R}: L1(2000)={e1:.2e} ratio={ratio:.3f} time={dt:.1f}s")
    assert report(5, ok, "; ".join(parts))


# ---------------------------------------------------------------- 6

def _junction_states(sol):
    return sum(1 for j in sol.report["junctions"] if not j["characteristic"])


def test_criterion_6_structural_replicas(cfg):
    parts, ok = [], True
    for name, R, seq, interior in [("cross-plane", CROSS_R, ["R_s", "R_L1", "C_L2", "H_s"], 2),
                                   ("shared-plane", SHARED_R, ["R_s", "R_L1", "H_s"], None)]:
        t0 = time.perf_counter()
        sol = solve_riemann(LEFT, R, cfg)
        dt = time.perf_counter() - t0
        shock = sol.report["shocks"][-1]
        Cl = sol.segments[-1].left_state
        lam = speed(Cl.array, 0, cfg)
        char = abs(shock["sigma"] - lam) / lam
        good = (sol.compatible and sol.template == name and sol.sequence == seq and char <= 1e-9
                and "s" in shock["char_left"] and dt < 10)
        if interior is not None:
            good &= _junction_states(sol) == interior
        ok &= good
        parts.append(f"{name} {' -> '.join(sol.sequence)} compatible={sol.compatible} "
                     f"interior={_junction_states(sol)} |sigma-lambda|/lambda={char:.1e} time={dt:.1f}s")
    assert report(6, ok, "; ".join(parts))


# ---------------------------------------------------------------- 7

def test_criterion_7_surfaces(cfg):
    t0 = time.perf_counter()
    ss = sample_surfaces(cfg, grid=(100, 100))
    dt = time.perf_counter() - t0
    nc, ni = ss.count("Coincidence"), ss.count("Inflection")
    res = max(float(m.residual.max()) for m in ss.meshes)
    ok = nc == 4 and ni == 4 and res <= 1e-9 and dt < 60
    assert report(7, ok, f"coincidence={nc} inflection={ni} max_residual={res:.2e} time={dt:.1f}s")


# ---------------------------------------------------------------- 8

def _join(values):
    return ",".join(format(float(v), ".17g") for v in values)


def test_criterion_8_determinism(tmp_path):
    runs = [
        ["eigen-at", "--state", "0.6,0.2,3,1"],
        ["rarefaction", "--state", "0.77,0.03,3.0,1", "--family", "L1"],
        ["hugoniot", "--state", "0.2,0.2,3,1"],
        ["surfaces", "--grid", "20"],
        ["solve", "--left", _join(LEFT.array), "--right", _join(CROSS_R)],
        ["profile", "--left", "0.8,0.2,3,1", "--right", "0.2,0.2,3", "--xi", "0,10,41"],
        ["verify", "--suite", "eigen", "--count", "20", "--seed", "9"],
    ]
    same, files = True, 0
    for k, argv in enumerate(runs):
        out = tmp_path / f"run{k}"
        snaps = []
        for _ in range(2):
            cli_main([*argv, "--out", str(out)])
            snaps.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        same &= snaps[0] == snaps[1]
        files += len(snaps[0])
    assert report(8, same, f"subcommands={len(runs)} files compared={files} byte-identical={same}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))

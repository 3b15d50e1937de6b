"""Independent oracles.

* dense_eigen_oracle: QZ on the full (n+1) x (n+1) pencil (A, B), with no
  use of the elimination reduction.
* scalar_hull_waves: the entropy solution of the fixed-composition
  Buckley-Leverett problem read off a discrete convex hull of f.
* scalar_bl_fv: first-order Godunov finite volumes for phi s_t + u f(s)_x = 0.
* run_suite: the eigen / rh / fv cross-checks behind ``georiemann verify``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from .eigen import OK, assemble_eigenpairs, fields
from .hugoniot import rh_residual, shock_speed, trace_branch
from .model import PhaseState, frac_flow, jacobians

MULT_TOL = 1e-8


@dataclass
class DenseEigen:
    lam: np.ndarray             # finite eigenvalues, ascending
    r: np.ndarray               # columns, unit (s, y) part, largest (s, y) entry positive
    multiplicity: list          # (value, count) for clusters within MULT_TOL
    n_infinite: int


def _solve_ld(M, b):
    """Gaussian elimination with partial pivoting in extended precision."""
    M = M.astype(np.longdouble).copy()
    b = b.astype(np.longdouble).copy()
    n = b.size
    for k in range(n):
        p = k + int(np.argmax(np.abs(M[k:, k])))
        if p != k:
            M[[k, p]] = M[[p, k]]
            b[[k, p]] = b[[p, k]]
        for i in range(k + 1, n):
            m = M[i, k] / M[k, k]
            M[i, k:] -= m * M[k, k:]
            b[i] -= m * b[k]
    x = np.zeros(n, dtype=np.longdouble)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - M[k, k + 1:] @ x[k + 1:]) / M[k, k]
    return x


def _refine_pair(A, B, lam, r, iters=4):
    """Newton on (A - lam B) r = 0, c.r = 1 in extended precision.

    QZ is normwise backward stable, which leaves eigenvalues much smaller
    than |A| with a poor relative error; the bordered Newton iteration
    restores it without leaving the full pencil.
    """
    A = A.astype(np.longdouble)
    B = B.astype(np.longdouble)
    n = A.shape[0]
    c = r.astype(np.longdouble) / np.longdouble(r @ r)
    x = r.astype(np.longdouble)
    lam = np.longdouble(lam)
    for _ in range(iters):
        J = np.zeros((n + 1, n + 1), dtype=np.longdouble)
        J[:n, :n] = A - lam * B
        J[:n, n] = -(B @ x)
        J[n, :n] = c
        F = np.concatenate([(A - lam * B) @ x, [c @ x - 1]])
        try:
            d = _solve_ld(J, -F)
        except (FloatingPointError, ZeroDivisionError):
            break
        if not np.all(np.isfinite(d)):
            break
        x = x + d[:n]
        lam = lam + d[n]
    return float(lam), np.asarray(x, dtype=float)


def pencil_ld(state, cfg):
    """The pencil of ``jacobians`` assembled in extended precision.

    Inputs (coefficients, f, f_s) are the same float64 model values; only
    the assembly is carried out in long double. Small eigenvalues come from
    cancellation between O(1) entries, so float64 assembly alone limits
    their relative accuracy to about eps |A| / |lambda|.
    """
    ld = np.longdouble
    c = cfg.coeffs(state.yarr)
    fe = frac_flow(state.s, state.yarr, cfg)
    f, f_s = ld(float(fe.f)), ld(float(fe.f_s))
    s, u, phi = ld(state.s), ld(state.u), ld(cfg.phi)
    rw, ro, rr, dw, do, dr = (np.asarray(a, dtype=ld) for a in
                              (c.rho_w, c.rho_o, c.rho_r, c.d_rho_w, c.d_rho_o, c.d_rho_r))
    n1 = cfg.n + 1
    A = np.zeros((n1, n1), dtype=ld)
    B = np.zeros((n1, n1), dtype=ld)
    B[:, 0] = phi * (rw - ro)
    B[:, 1:-1] = phi * (dw * s + do * (1 - s)) + (1 - phi) * dr
    A[:, 0] = u * (rw - ro) * f_s
    A[:, 1:-1] = u * (dw * f + do * (1 - f))
    A[:, -1] = rw * f + ro * (1 - f)
    return A, B


def _pair_residual(A, B, lam, r):
    r = np.asarray(r, dtype=A.dtype)
    return float(np.linalg.norm(A @ r - A.dtype.type(lam) * (B @ r)) / np.linalg.norm(r))


def dense_eigen_oracle(state, cfg, refine=True):
    """Finite generalized eigenpairs of (A, B) by QZ, Newton-polished."""
    A, B = jacobians(state, cfg)
    w, V = scipy.linalg.eig(A, B, homogeneous_eigvals=True)
    alpha, beta = w
    scale = np.linalg.norm(A, 1) + np.linalg.norm(B, 1)
    finite = np.abs(beta) > 1e-12 * np.maximum(np.abs(alpha), 1.0) * max(1.0, scale) / scale
    lam = (alpha[finite] / beta[finite])
    V = V[:, finite]
    if np.any(np.abs(lam.imag) > 1e-9 * np.maximum(np.abs(lam.real), 1.0)):
        lam_r, V_r = lam, V
    else:
        lam_r, V_r = lam.real, V.real
    if refine and np.isrealobj(lam_r):
        A, B = pencil_ld(state, cfg)
        # clustered values may be defective, where the bordered system is singular
        gap = np.abs(lam_r[:, None] - lam_r[None, :]) + np.diag(np.full(lam_r.size, np.inf))
        isolated = np.min(gap, axis=1) > MULT_TOL * np.maximum(np.abs(lam_r), 1.0)
        for i in np.flatnonzero(isolated):
            lam_i, r_i = _refine_pair(A, B, lam_r[i], V_r[:, i])
            if _pair_residual(A, B, lam_i, r_i) <= _pair_residual(A, B, lam_r[i], V_r[:, i]):
                lam_r[i], V_r[:, i] = lam_i, r_i
    order = np.argsort(lam_r.real, kind="stable")
    lam_r, V_r = lam_r[order], V_r[:, order]
    nsy = cfg.n
    V_r = V_r / np.linalg.norm(V_r[:nsy], axis=0)
    piv = np.argmax(np.abs(V_r[:nsy]), axis=0)
    V_r = V_r * np.sign(V_r[piv, np.arange(V_r.shape[1])].real)
    mult = []
    i = 0
    lr = np.asarray(lam_r.real)
    while i < lr.size:
        j = i + 1
        while j < lr.size and abs(lr[j] - lr[i]) <= MULT_TOL * max(abs(lr[i]), 1.0):
            j += 1
        if j - i > 1:
            mult.append((float(lr[i]), j - i))
        i = j
    return DenseEigen(lam_r, V_r, mult, int(np.sum(~finite)))


def random_states(cfg, count, rng, margin=1e-3, u_range=(0.5, 2.0)):
    """Uniform interior states away from resonance s = Lambda and from f = s."""
    out = []
    lo, hi = cfg.box[:, 0], cfg.box[:, 1]
    while len(out) < count:
        s = rng.uniform(0.0, 1.0)
        y = rng.uniform(lo, hi)
        u = rng.uniform(*u_range)
        F = fields(np.array(s), y, np.array(u), cfg, level=0)
        if abs(s - float(F.f)) <= margin or np.any(np.abs(s - F.Lam) <= margin) or np.any(F.status != OK):
            continue
        out.append(PhaseState(s, tuple(y), u))
    return out


def compare_eigen(state, cfg):
    """Worst relative eigenvalue gap to the dense oracle and worst scaled residual."""
    pairs = assemble_eigenpairs(state, cfg)
    lam = np.sort([p.lam for p in pairs])
    dense = dense_eigen_oracle(state, cfg)
    if dense.lam.size != lam.size:
        return np.inf, np.inf
    rel = float(np.max(np.abs(lam - dense.lam.real) / np.maximum(np.abs(dense.lam.real), 1e-300)))
    A, B = jacobians(state, cfg)
    nA, nB = np.linalg.norm(A, 2), np.linalg.norm(B, 2)
    res = max(float(np.linalg.norm(A @ p.r - p.lam * (B @ p.r)) / (nA + abs(p.lam) * nB)) for p in pairs)
    return rel, res


# ----------------------------------------------------------- scalar oracles

def _hull(x, fx, upper):
    """Andrew's monotone chain: indices of the upper (or lower) hull, x ascending."""
    keep = []
    sgn = 1.0 if upper else -1.0
    for i in range(x.size):
        while len(keep) >= 2:
            a, b = keep[-2], keep[-1]
            cross = (x[b] - x[a]) * (fx[i] - fx[a]) - (fx[b] - fx[a]) * (x[i] - x[a])
            if sgn * cross >= 0:
                keep.pop()
            else:
                break
        keep.append(i)
    return np.array(keep)


@dataclass
class HullWave:
    kind: str       # "Rarefaction" or "Shock"
    s_left: float
    s_right: float
    speeds: tuple


def scalar_hull_waves(s_L, s_R, y, u, cfg, grid=20001):
    """Waves of the scalar problem from the hull of sampled f.

    Hull edges longer than one sample are shocks; an interior end of such
    an edge is refined to the extremal chord slope.
    """
    y = np.asarray(y, dtype=float)
    if s_L == s_R:
        return []
    a, b = min(s_L, s_R), max(s_L, s_R)
    x = np.linspace(a, b, grid)
    fx = frac_flow(x, np.broadcast_to(y, (grid, y.size)), cfg).f
    upper = s_L > s_R
    idx = _hull(x, fx, upper)
    h = x[1] - x[0]
    fac = u / cfg.phi

    def f(s):
        return float(frac_flow(s, y, cfg).f)

    def fs(s):
        return float(frac_flow(s, y, cfg).f_s)

    pieces = []
    for i, j in zip(idx[:-1], idx[1:]):
        if j - i == 1:
            if pieces and pieces[-1][0] == "R":
                pieces[-1][2] = x[j]
            else:
                pieces.append(["R", x[i], x[j]])
        else:
            pieces.append(["S", x[i], x[j]])
    # refine tangency ends of shock edges
    for k, p in enumerate(pieces):
        if p[0] != "S":
            continue
        for end in (1, 2):
            other = p[3 - end]
            if p[end] in (a, b):
                continue
            sgn = -1.0 if (upper == (end == 2)) else 1.0

            def neg_slope(t, other=other, sgn=sgn):
                return sgn * (f(t) - f(other)) / (t - other)
            c = p[end]
            lo, hi = max(c - 2 * h, a), min(c + 2 * h, b)
            if (lo - other) * (hi - other) <= 0:
                continue
            t = minimize_scalar(neg_slope, bounds=(lo, hi), method="bounded",
                                options={"xatol": 1e-13}).x
            p[end] = t
            nb = k - 1 if end == 1 else k + 1
            if 0 <= nb < len(pieces):
                pieces[nb][2 if end == 1 else 1] = t
    waves = []
    for p in pieces:
        lo_s, hi_s = p[1], p[2]
        if hi_s - lo_s <= 1e-12:
            continue
        if p[0] == "R":
            waves.append(("Rarefaction", lo_s, hi_s))
        else:
            waves.append(("Shock", lo_s, hi_s))
    # traverse from s_L to s_R
    if upper:
        waves = waves[::-1]
    out = []
    for kind, lo_s, hi_s in waves:
        sl, sr = (hi_s, lo_s) if upper else (lo_s, hi_s)
        if kind == "Shock":
            sig = fac * (f(sr) - f(sl)) / (sr - sl)
            out.append(HullWave(kind, sl, sr, (sig, sig)))
        else:
            out.append(HullWave(kind, sl, sr, (fac * fs(sl), fac * fs(sr))))
    return out


def scalar_bl_fv(left_s, right_s, y_fixed, u_fixed, cfg, cells=2000, t_end=None, cfl=0.9,
                 x_range=(0.0, 1.0), x0=0.0, record=False):
    """Godunov finite volumes for phi s_t + u f(s, y)_x = 0 with a jump at x0.

    The Godunov flux takes the minimum of f over [a, b] when a <= b and the
    maximum over [b, a] otherwise; f is nondecreasing, so the extremum is
    attained at an end point. The left ghost cell holds ``left_s`` (inflow,
    all speeds are nonnegative) and the right one copies its neighbour.
    ``t_end`` defaults to the time at which the fastest characteristic
    covers 80% of the domain. Returns (x centres, s, t_end, diagnostics).
    """
    if cells < 100:
        raise ValueError("cells must be at least 100")
    if not 0 < cfl <= 0.9:
        raise ValueError("cfl must lie in (0, 0.9]")
    y = np.asarray(y_fixed, dtype=float)
    u = float(u_fixed)
    xa, xb = x_range
    dx = (xb - xa) / cells
    x = xa + (np.arange(cells) + 0.5) * dx
    sg = np.linspace(min(left_s, right_s), max(left_s, right_s), 2001)
    fs_max = float(np.max(frac_flow(sg, np.broadcast_to(y, (sg.size, y.size)), cfg).f_s))
    amax = u / cfg.phi * max(fs_max, 1e-300)
    if t_end is None:
        t_end = 0.8 * (xb - x0) / amax
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    s = np.where(x < x0, float(left_s), float(right_s))
    yb = np.broadcast_to(y, (cells + 2, y.size))

    def f_of(v):
        return frac_flow(v, yb, cfg).f

    t = 0.0
    mass, tv = [], []
    dt_full = cfl * dx / amax
    while t < t_end:
        dt = min(dt_full, t_end - t)
        ext = np.concatenate([[float(left_s)], s, [s[-1]]])
        fe = f_of(ext)
        fa, fb = fe[:-1], fe[1:]
        flux = np.where(ext[:-1] <= ext[1:], np.minimum(fa, fb), np.maximum(fa, fb))
        s = s - dt * u / (cfg.phi * dx) * (flux[1:] - flux[:-1])
        t += dt
        if record:
            # mass change should equal the net boundary flux
            mass.append((float(np.sum(s) * dx), float(dt * u / cfg.phi * (flux[0] - flux[-1]))))
            # variation including the inflow ghost cannot grow for a monotone scheme
            tv.append(float(np.sum(np.abs(np.diff(np.concatenate([[float(left_s)], s]))))))
    return x, s, t_end, {"mass": mass, "tv": tv, "dt": dt_full}


def fv_l1_error(sol, cells, cfg, x_range=(0.0, 1.0)):
    """L1 distance between the FV profile and the self-similar solution."""
    from .riemann import evaluate_profile

    L, R = sol.left, sol.right
    x, s, t_end, _ = scalar_bl_fv(L.s, R.s, L.yarr, L.u, cfg, cells=cells, x_range=x_range)
    prof = evaluate_profile(sol, x / t_end)[:, 0]
    dx = x[1] - x[0]
    return float(np.sum(np.abs(s - prof)) * dx)


# ------------------------------------------------------------------ suites

def _suite_eigen(cfg, rng, count):
    worst_rel, worst_res = 0.0, 0.0
    for U in random_states(cfg, count, rng):
        rel, res = compare_eigen(U, cfg)
        worst_rel, worst_res = max(worst_rel, rel), max(worst_res, res)
    return {"pass": worst_rel <= 1e-10 and worst_res <= 1e-10, "states": count,
            "max_rel_eigenvalue_error": worst_rel, "max_scaled_residual": worst_res}


def _suite_rh(cfg, rng, count):
    worst, samples = 0.0, 0
    for U in random_states(cfg, count, rng):
        for fam in ("L1", "L2")[:cfg.m]:
            for d in (1, -1):
                br = trace_branch(U, fam, d, cfg, max_samples=60, classify=False)
                for p, uu in zip(br.points[1:], br.u[1:]):
                    Up = PhaseState.from_sy(p, uu)
                    try:
                        sig = shock_speed(U, Up, cfg)
                    except Exception:
                        continue
                    worst = max(worst, rh_residual(U, Up, sig, cfg))
                    samples += 1
    return {"pass": worst <= 1e-8, "samples": samples, "max_rh_residual": worst}


def _suite_fv(cfg, cells=2000):
    from .riemann import solve_riemann

    y = cfg.box.mean(axis=1)
    L = PhaseState(0.8, tuple(y), 1.0)
    sol = solve_riemann(L, (0.2, *y), cfg)
    e1 = fv_l1_error(sol, cells, cfg)
    e2 = fv_l1_error(sol, 2 * cells, cfg)
    ratio = e2 / e1 if e1 > 0 else 0.0
    return {"pass": e1 <= 2e-2 and 0.35 <= ratio <= 0.65, "l1": e1, "l1_refined": e2, "ratio": ratio}


def run_suite(cfg, suite="all", seed=0, count=200):
    """Run oracle suites; returns {suite: report}."""
    rng = np.random.default_rng(seed)
    names = ["eigen", "rh", "fv"] if suite == "all" else [suite]
    out = {}
    for name in names:
        if name == "eigen":
            out[name] = _suite_eigen(cfg, rng, count)
        elif name == "rh":
            out[name] = _suite_rh(cfg, rng, max(count // 40, 2))
        elif name == "fv":
            out[name] = _suite_fv(cfg)
        else:
            raise ValueError(f"unknown suite {name!r}")
    return out

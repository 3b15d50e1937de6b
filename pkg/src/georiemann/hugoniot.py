"""Rankine-Hugoniot locus, shock speeds and admissibility.

For a left state U- the right states (s+, y+) on the locus are those for
which the (n+1) x 3 matrix with rows Phi_i = ([G_i], -F_i+, F_i-) has rank
at most two, so that Phi (sigma, u+, u-) = 0 has a solution.  Rank deficiency
is written as n-1 determinant conditions against a fixed pair of rows.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import brentq

from .eigen import fields, family_names
from .errors import NumericalError, ShockSpeedUndefined, UPlusIndeterminate
from .model import PhaseState, accumulation_arr, flux_hat_arr, frac_flow

CHAR_TOL = 1e-9
LAX_TOL = 1e-12


@dataclass
class PhiVectors:
    G_jump: np.ndarray      # Phi_i1 = [G_i]
    F_plus: np.ndarray      # -Phi_i2
    F_minus: np.ndarray     # Phi_i3

    @property
    def table(self):
        return np.stack([self.G_jump, -self.F_plus, self.F_minus], axis=-1)


def phi_vectors(Uminus, plus, cfg):
    """Rows Phi_i = ([G_i], -F_i(U+), F_i(U-)) with Phi_i . (sigma, u+, u-) = 0 on the locus."""
    plus = np.asarray(plus, dtype=float)
    ym, yp = Uminus.yarr, plus[1:]
    Gm = accumulation_arr(Uminus.s, ym, cfg)
    Gp = accumulation_arr(plus[0], yp, cfg)
    return PhiVectors(Gp - Gm, flux_hat_arr(plus[0], yp, cfg), flux_hat_arr(Uminus.s, ym, cfg))


def _scaled_columns(Uminus, x, cfg):
    """Columns ([G]/h, [F]/h, F-) with h = |x - x-|; same rank structure, O(1) near U-."""
    P = phi_vectors(Uminus, x, cfg)
    h = float(np.linalg.norm(np.asarray(x) - Uminus.sy))
    if h == 0:
        raise NumericalError("coincident states")
    return np.stack([P.G_jump / h, (P.F_plus - P.F_minus) / h, P.F_minus], axis=-1)


def best_pair(M):
    """Row pair whose 2 x 3 stack has the largest smallest singular value."""
    best, pair = -1.0, (0, 1)
    for i, j in combinations(range(M.shape[0]), 2):
        sv = np.linalg.svd(M[[i, j]], compute_uv=False)[-1]
        if sv > best:
            best, pair = sv, (i, j)
    return pair


def _dets(M, pair):
    i1, i2 = pair
    rows = [k for k in range(M.shape[0]) if k not in pair]
    return np.array([np.linalg.det(M[[k, i1, i2]]) for k in rows])


def hugoniot_residuals(Uminus, plus, cfg, pair=None):
    """det(Phi_k, Phi_i1, Phi_i2) for the n-1 rows k outside the chosen pair."""
    P = phi_vectors(Uminus, plus, cfg).table
    if pair is None:
        pair = best_pair(P)
    return _dets(P, pair)


def u_plus(Uminus, plus, cfg):
    """u+ = u- (F_i-[G_j] - F_j-[G_i]) / (F_i+[G_j] - F_j+[G_i]) with the best-conditioned pair."""
    P = phi_vectors(Uminus, plus, cfg)
    G, Fp, Fm = P.G_jump, P.F_plus, P.F_minus
    den = Fp[:, None] * G[None, :] - Fp[None, :] * G[:, None]
    num = Fm[:, None] * G[None, :] - Fm[None, :] * G[:, None]
    i, j = np.unravel_index(np.argmax(np.abs(den)), den.shape)
    scale = np.max(np.abs(Fp)) * max(np.max(np.abs(G)), 1e-300)
    if abs(den[i, j]) <= 1e-12 * scale or scale == 0:
        raise UPlusIndeterminate("every u+ denominator vanishes")
    return float(Uminus.u * num[i, j] / den[i, j])


def shock_speed(Uminus, Uplus, cfg, spread=False):
    """sigma from the component with the largest accumulation jump.

    With ``spread=True`` also return the largest relative disagreement
    among the components whose jump is not negligible.
    """
    Gm = accumulation_arr(Uminus.s, Uminus.yarr, cfg)
    Gp = accumulation_arr(Uplus.s, Uplus.yarr, cfg)
    Fm = Uminus.u * flux_hat_arr(Uminus.s, Uminus.yarr, cfg)
    Fp = Uplus.u * flux_hat_arr(Uplus.s, Uplus.yarr, cfg)
    dG = Gp - Gm
    i = int(np.argmax(np.abs(dG)))
    if abs(dG[i]) <= 1e-14 * max(np.max(np.abs(Gm)), 1.0):
        raise ShockSpeedUndefined("all accumulation jumps vanish")
    sigma = float((Fp[i] - Fm[i]) / dG[i])
    if not spread:
        return sigma
    big = np.abs(dG) > 1e-6 * abs(dG[i])
    sig = (Fp[big] - Fm[big]) / dG[big]
    return sigma, float(np.max(np.abs(sig - sigma)) / max(abs(sigma), 1e-300))


def rh_residual(Uminus, Uplus, sigma, cfg):
    """max_i |sigma [G_i] - [u F_i]| relative to |F| + |sigma| |G|."""
    Gm = accumulation_arr(Uminus.s, Uminus.yarr, cfg)
    Gp = accumulation_arr(Uplus.s, Uplus.yarr, cfg)
    Fm = Uminus.u * flux_hat_arr(Uminus.s, Uminus.yarr, cfg)
    Fp = Uplus.u * flux_hat_arr(Uplus.s, Uplus.yarr, cfg)
    res = sigma * (Gp - Gm) - (Fp - Fm)
    scale = np.linalg.norm(np.concatenate([Fm, Fp])) + abs(sigma) * np.linalg.norm(np.concatenate([Gm, Gp]))
    return float(np.max(np.abs(res)) / scale)


def _speeds(U, cfg):
    F = fields(np.array(U.s), U.yarr, np.array(U.u), cfg, level=0)
    names = family_names(cfg)
    sp = {"s": float(F.lam_s)}
    for k in range(cfg.m):
        sp[names[k + 1]] = float(F.lam[k])
    return sp


def lax_classify(Uminus, Uplus, sigma, cfg):
    """Lax bookkeeping for a discontinuity of speed sigma.

    Returns a dict with ``label`` ("Lax-k", "Characteristic" or
    "Inadmissible"), the family at position k in the speed order of U-,
    the raw counts p- = #{lambda(U-) > sigma}, p+ = #{lambda(U+) < sigma},
    and which families are characteristic on each side.
    """
    n = cfg.n
    lm, lp = _speeds(Uminus, cfg), _speeds(Uplus, cfg)
    tol = LAX_TOL * max(abs(sigma), 1e-300)
    ctol = CHAR_TOL * max(abs(sigma), 1e-300)
    p_minus = sum(1 for v in lm.values() if v > sigma + tol)
    p_plus = sum(1 for v in lp.values() if v < sigma - tol)
    char_left = [k for k, v in lm.items() if abs(v - sigma) <= ctol]
    char_right = [k for k, v in lp.items() if abs(v - sigma) <= ctol]
    order = sorted(lm, key=lm.get)
    out = {"p_minus": p_minus, "p_plus": p_plus, "char_left": char_left, "char_right": char_right,
           "speeds_minus": lm, "speeds_plus": lp}
    both = [k for k in char_left if k in char_right]
    if both and p_minus + p_plus == n - 1:
        out.update(label="Contact", family=both[0], k=order.index(both[0]) + 1)
    elif p_minus + p_plus == n + 1:
        k = p_plus  # 1-based position in the speed order
        out.update(label=f"Lax-{k}", family=order[k - 1], k=k)
    elif (char_left or char_right) and p_minus + p_plus == n:
        # one inequality holds with equality
        k = p_plus + (1 if char_right else 0)
        out.update(label="Characteristic", family=order[min(max(k, 1), n) - 1], k=k)
    else:
        out.update(label="Inadmissible", family=None, k=None)
    return out


@dataclass
class HugoniotBranch:
    kind: str                       # "SaturationBranch" or "ChemicalBranch(Lk)"
    direction: int
    points: np.ndarray              # rows (s+, y+)
    u: np.ndarray
    sigma: np.ndarray
    lax: list = field(default_factory=list)
    stop_reason: str = ""

    @property
    def samples(self):
        return [(float(p[0]), tuple(p[1:]), float(uu), float(sg))
                for p, uu, sg in zip(self.points, self.u, self.sigma)]


def _domain_violation(x, cfg, tol=0.0):
    """(index, bound) of the most violated constraint, or None."""
    lo = np.concatenate([[0.0], cfg.box[:, 0]])
    hi = np.concatenate([[1.0], cfg.box[:, 1]])
    worst, out = tol, None
    for j in range(x.size):
        if lo[j] - x[j] > worst:
            worst, out = lo[j] - x[j], (j, lo[j])
        if x[j] - hi[j] > worst:
            worst, out = x[j] - hi[j], (j, hi[j])
    return out


def _fd_jac(fun, x, h):
    f0 = fun(x)
    J = np.empty((f0.size, x.size))
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        J[:, j] = (fun(x + e) - fun(x - e)) / (2 * h)
    return f0, J


def _newton(fun, x0, extra, tol, maxit=12):
    """Solve fun(x) = 0 together with one scalar condition extra(x) = (value, gradient)."""
    x = x0.copy()
    for it in range(maxit):
        r, J = _fd_jac(fun, x, 1e-7)
        e, g = extra(x)
        F = np.concatenate([r, [e]])
        if np.max(np.abs(F)) <= tol:
            return x, it
        K = np.vstack([J, g[None, :]])
        try:
            dx = np.linalg.solve(K, -F)
        except np.linalg.LinAlgError:
            return None, it
        step = 1.0
        for _ in range(6):
            xn = x + step * dx
            rn = np.concatenate([fun(xn), [extra(xn)[0]]])
            if np.max(np.abs(rn)) < np.max(np.abs(F)):
                break
            step *= 0.5
        x = xn
    r = np.concatenate([fun(x), [extra(x)[0]]])
    return (x, maxit) if np.max(np.abs(r)) <= tol else (None, maxit)


def _tangent(J):
    # null direction of the (n-1) x n Jacobian
    return np.linalg.svd(J)[2][-1]


def saturation_branch(Uminus, cfg, num=201):
    """Closed form: y+ = y-, u+ = u-, sigma = (u/phi) [f]/[s]."""
    s = np.linspace(0.0, 1.0, num)
    s = s[np.abs(s - Uminus.s) > 1e-12]
    f = frac_flow(s, np.broadcast_to(Uminus.yarr, (s.size, cfg.m)), cfg).f
    fm = float(frac_flow(Uminus.s, Uminus.yarr, cfg).f)
    sig = Uminus.u / cfg.phi * (f - fm) / (s - Uminus.s)
    pts = np.column_stack([s, np.broadcast_to(Uminus.yarr, (s.size, cfg.m))])
    br = HugoniotBranch("SaturationBranch", 0, pts, np.full(s.size, Uminus.u), sig, stop_reason="Closed form")
    br.lax = [lax_classify(Uminus, PhaseState.from_sy(p, Uminus.u), sg, cfg)["label"] for p, sg in zip(pts, sig)]
    return br


def trace_branch(Uminus, family, direction, cfg, *, first_step=None, max_step=None, max_samples=20000,
                 max_length=None, classify=True):
    """Pseudo-arclength continuation of the chemical branch of ``family``.

    The seed is U- displaced along the family's eigenvector; residuals are the
    determinant conditions divided by |x - x-|^2, which stay O(1) at U-.
    """
    names = family_names(cfg)
    k = names.index(family) - 1
    if k < 0:
        raise ValueError("use saturation_branch for the saturation family")
    x0 = Uminus.sy
    diam = float(np.sqrt(1.0 + np.sum((cfg.box[:, 1] - cfg.box[:, 0]) ** 2)))
    h = 1e-3 * diam if first_step is None else float(first_step)
    hmax = 0.02 * diam if max_step is None else float(max_step)
    F = fields(np.array(Uminus.s), Uminus.yarr, np.array(Uminus.u), cfg, level=1)
    t = direction * F.r[:-1, k]
    t = t / np.linalg.norm(t)
    tol = 1e-10

    def make_fun(pair):
        def fun(x):
            return _dets(_scaled_columns(Uminus, x, cfg), pair)
        return fun

    pts, us, sigs, labels = [], [], [], []
    x = x0
    reason = "MaxSamples"
    length = 0.0
    Lmax = 10 * diam if max_length is None else float(max_length)
    first = True
    while len(pts) < max_samples:
        xp = x + h * t
        M = _scaled_columns(Uminus, xp, cfg)
        pair = best_pair(M)
        fun = make_fun(pair)
        xc = None
        if first:
            # on the sphere |x - x-| = h
            def extra(z):
                d = z - x0
                return float(d @ d - h * h) / h, 2 * d / h
        else:
            def extra(z, xp=xp, t=t):
                return float(t @ (z - xp)), t
        xc, its = _newton(fun, xp, extra, tol)
        if xc is None or float((xc - x) @ t) <= 0:
            h *= 0.5
            if h < 1e-10 * diam:
                reason = "CorrectorFailure"
                break
            continue
        viol = _domain_violation(xc, cfg)
        if viol is not None:
            j, b = viol

            def extra_b(z, j=j, b=b):
                g = np.zeros_like(z)
                g[j] = 1.0
                return float(z[j] - b), g

            xb, _ = _newton(fun, x + (xc - x) * max(0.0, min(1.0, (b - x[j]) / (xc[j] - x[j]))), extra_b, tol)
            if xb is not None and _domain_violation(xb, cfg, 1e-12) is None:
                xc = xb
            else:
                xc = None
            reason = "Boundary"
        if xc is not None:
            length += float(np.linalg.norm(xc - x))
            _, J = _fd_jac(fun, xc, 1e-7)
            tn = _tangent(J)
            if tn @ t < 0:
                tn = -tn
            Up = PhaseState.from_sy(xc, 1.0)
            try:
                up = u_plus(Uminus, xc, cfg)
                Up = Up.with_u(up)
                sg = shock_speed(Uminus, Up, cfg)
            except NumericalError:
                up, sg = float("nan"), float("nan")
            pts.append(xc)
            us.append(up)
            sigs.append(sg)
            if classify and np.isfinite(sg):
                labels.append(lax_classify(Uminus, Up, sg, cfg)["label"])
            else:
                labels.append("Undefined")
            x, t = xc, tn
            first = False
            if its <= 3:
                h = min(1.5 * h, hmax)
        if reason == "Boundary":
            break
        if length >= Lmax:
            reason = "MaxLength"
            break
    return HugoniotBranch(f"ChemicalBranch({family})", direction, np.array(pts).reshape(-1, cfg.n),
                          np.array(us), np.array(sigs), labels, reason)


def trace_hugoniot(Uminus, cfg, **kw):
    """Saturation branch in closed form plus both halves of every real chemical branch."""
    out = [saturation_branch(Uminus, cfg)]
    F = fields(np.array(Uminus.s), Uminus.yarr, np.array(Uminus.u), cfg, level=0)
    for k, name in enumerate(family_names(cfg)[1:]):
        if F.status[k] != 0:
            continue
        for d in (+1, -1):
            out.append(trace_branch(Uminus, name, d, cfg, **kw))
    return out


def bl_tangent_partners(s_b, y, cfg, grid=2000):
    """All s != s_b with (f(s) - f(s_b))/(s - s_b) = f_s(s_b) at fixed y."""
    fe = frac_flow(s_b, y, cfg)
    fb, fsb = float(fe.f), float(fe.f_s)

    def g(s):
        return float(frac_flow(s, y, cfg).f) - fb - fsb * (s - s_b)

    ss = np.linspace(0.0, 1.0, grid + 1)
    gv = np.array([g(v) for v in ss])
    roots = []
    for a, b, ga, gb in zip(ss[:-1], ss[1:], gv[:-1], gv[1:]):
        if min(abs(a - s_b), abs(b - s_b)) < 2.0 / grid:
            continue  # the double root at s_b itself
        if ga == 0:
            roots.append(a)
        elif ga * gb < 0:
            roots.append(brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return roots


def extension_point(curve, target_family, cfg, points=None):
    """Pairs (X, B), B on the curve, with sigma(X, B) = lambda_target(B).

    For the saturation family X lies on the line y = y_B and is found by the
    tangency condition; for chemical families the target branch through B is
    traced and sigma - lambda is bisected along it.
    """
    idx = range(len(curve.tau)) if points is None else points
    out = []
    for i in idx:
        B = PhaseState.from_array(curve.states[i])
        if target_family == "s":
            for sx in bl_tangent_partners(B.s, B.yarr, cfg):
                out.append((PhaseState(sx, B.y, B.u), B))
            continue
        lamB = _speeds(B, cfg)[target_family]
        for d in (+1, -1):
            br = trace_branch(B, target_family, d, cfg, max_samples=400)
            g = br.sigma - lamB
            for a in range(len(g) - 1):
                if np.isfinite(g[a]) and np.isfinite(g[a + 1]) and g[a] * g[a + 1] < 0:
                    w = g[a] / (g[a] - g[a + 1])
                    xs = br.points[a] + w * (br.points[a + 1] - br.points[a])
                    out.append((PhaseState.from_sy(xs, br.u[a] + w * (br.u[a + 1] - br.u[a])), B))
    return out

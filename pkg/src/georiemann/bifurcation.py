"""Coincidence and inflection surfaces.

Every surface is treated as a union of graphs s = s(y): on a y-grid each
column is scanned in s, sign changes are refined by a safeguarded
regula falsi, and roots in neighbouring columns are linked into sheets.
All defining functions are evaluated at u = 1; they only scale with u.
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .eigen import DEGEN_TOL, EPS_RES, OK, family_names, fields
from .errors import Resonant
from .model import frac_flow

RESID_TOL = 1e-9


def _family_index(cfg, family):
    return family_names(cfg).index(family) - 1


def coincidence_fn(s, y, family, cfg):
    """G = f_s - (f - Lambda)/(s - Lambda); zero exactly where lambda_s = lambda_family."""
    k = _family_index(cfg, family)
    s = np.asarray(s, dtype=float)
    F = fields(s, y, 1.0, cfg, level=0)
    Lam = F.Lam[..., k]
    sm = F.s - Lam
    near = np.abs(sm) <= EPS_RES
    if np.ndim(s) == 0 and np.all(near):
        raise Resonant(f"s = Lambda for family {family}")
    with np.errstate(divide="ignore", invalid="ignore"):
        g = F.f_s - (F.f - Lam) / sm
    return np.where(near, np.nan, g)


def family_coincidence(s, y, i, j, cfg, u=1.0):
    """lambda_i - lambda_j for two chemical families."""
    ki, kj = _family_index(cfg, i), _family_index(cfg, j)
    F = fields(np.asarray(s, dtype=float), y, u, cfg, level=0)
    return F.lam[..., ki] - F.lam[..., kj]


def h_factor(state, family, cfg):
    """H = w . v with v oriented along increasing speed (the sign convention of the eigenpairs)."""
    k = _family_index(cfg, family)
    F = fields(np.array(state.s), state.yarr, np.array(state.u), cfg, level=2, orient=True)
    if abs(state.s - float(F.Lam[k])) <= EPS_RES:
        raise Resonant(f"s = Lambda for family {family}")
    return float(F.H[k])


@dataclass
class SurfaceMesh:
    kind: str                   # e.g. "Coincidence(s,L1)", "Inflection(L1)"
    sheet: int
    points: np.ndarray          # rows (s, y...)
    residual: np.ndarray
    column: np.ndarray          # flat y-grid index of each vertex
    factor: list = field(default_factory=list)  # Inflection(Lk): "Cs", "Gamma" or "J_H"

    @property
    def s_range(self):
        return float(self.points[:, 0].min()), float(self.points[:, 0].max())


@dataclass
class SurfaceSet:
    meshes: list
    grid: tuple
    y_axes: list
    notes: list = field(default_factory=list)

    def count(self, prefix):
        return sum(1 for m in self.meshes if m.kind.startswith(prefix))


def _y_grid(cfg, grid):
    axes = [np.linspace(lo, hi, g) for (lo, hi), g in zip(cfg.box, grid)]
    Y = np.array(list(product(*axes)))
    return axes, Y


def _brackets(G):
    """(column, left index) of sign changes between finite neighbours."""
    a, b = G[:, :-1], G[:, 1:]
    ok = np.isfinite(a) & np.isfinite(b)
    return np.nonzero(ok & (np.sign(a) * np.sign(b) < 0))


def _refine(g, a, b, ga, gb, iters=80, xtol=1e-15):
    """Vectorised Illinois regula falsi on brackets [a, b] with g(a) g(b) < 0."""
    a, b, ga, gb = a.copy(), b.copy(), ga.copy(), gb.copy()
    side = np.zeros(a.shape, dtype=int)
    for _ in range(iters):
        live = (b - a) > xtol * np.maximum(1.0, np.abs(a))
        if not np.any(live):
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(live, b - gb * (b - a) / (gb - ga), a)
        bad = ~np.isfinite(c) | (c <= a) | (c >= b)
        c = np.where(bad, 0.5 * (a + b), c)
        gc = g(c)
        gc = np.where(np.isfinite(gc), gc, 0.0)
        left = np.sign(gc) == np.sign(ga)
        upd = live & left
        a = np.where(upd, c, a)
        ga = np.where(upd, gc, ga)
        gb = np.where(upd & (side == 1), 0.5 * gb, gb)
        side = np.where(upd, 1, side)
        upd = live & ~left
        b = np.where(upd, c, b)
        gb = np.where(upd, gc, gb)
        ga = np.where(upd & (side == -1), 0.5 * ga, ga)
        side = np.where(upd, -1, side)
        hit = live & (gc == 0)
        a = np.where(hit, c, a)
        b = np.where(hit, c, b)
    return np.where(np.abs(ga) <= np.abs(gb), a, b)


def _column_roots(gvec, gpt, Y, s_grid, chunk=2000):
    """Roots of g(s, y) along s for every row of Y.

    gvec(s (K,), Yc (C,1,m)) -> (C, K); gpt(s (R,), Y (R,m)) -> (R,).
    """
    cols, roots = [], []
    for c0 in range(0, Y.shape[0], chunk):
        Yc = Y[c0:c0 + chunk]
        G = gvec(s_grid, Yc[:, None, :])
        ci, ki = _brackets(G)
        if ci.size == 0:
            continue
        yb = Yc[ci]
        r = _refine(lambda s: gpt(s, yb), s_grid[ki], s_grid[ki + 1], G[ci, ki], G[ci, ki + 1])
        cols.append(ci + c0)
        roots.append(r)
    if not cols:
        return np.zeros(0, dtype=int), np.zeros(0)
    return np.concatenate(cols), np.concatenate(roots)


def _link(cols, svals, grid, max_jump):
    """Union-find over roots of neighbouring columns matched by nearest s."""
    N = cols.size
    parent = np.arange(N)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    by_col = {}
    for idx, c in enumerate(cols):
        by_col.setdefault(int(c), []).append(idx)
    shape = tuple(grid)
    for c, members in by_col.items():
        pos = np.unravel_index(c, shape)
        for ax in range(len(shape)):
            if pos[ax] + 1 >= shape[ax]:
                continue
            npos = list(pos)
            npos[ax] += 1
            nc = int(np.ravel_multi_index(npos, shape))
            other = by_col.get(nc)
            if not other:
                continue
            so = svals[other]
            for i in members:
                d = np.abs(so - svals[i])
                j = int(np.argmin(d))
                if d[j] > max_jump:
                    continue
                # mutual nearest match, ties toward the smaller jump
                back = np.abs(svals[members] - so[j])
                if members[int(np.argmin(back))] != i:
                    continue
                ri, rj = find(i), find(other[j])
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    return np.array([find(i) for i in range(N)])


def _sheets(kind, cols, svals, resid, Y, grid, min_frac, max_jump, factor=None):
    if cols.size == 0:
        return []
    lab = _link(cols, svals, grid, max_jump)
    ncols = int(np.prod(grid))
    meshes = []
    groups = sorted(set(lab.tolist()), key=lambda g: float(np.mean(svals[lab == g])))
    for g in groups:
        sel = np.nonzero(lab == g)[0]
        if sel.size < min_frac * ncols:
            continue
        order = sel[np.argsort(cols[sel], kind="stable")]
        pts = np.column_stack([svals[order], Y[cols[order]]])
        fac = [factor[i] for i in order] if factor is not None else []
        meshes.append(SurfaceMesh(kind, len(meshes), pts, resid[order], cols[order], fac))
    return meshes


def sample_surfaces(cfg, grid=(100, 100), ns=200, min_frac=0.02, max_jump=0.05):
    """Mesh every coincidence and inflection surface over a y-grid.

    Linearly degenerate chemical families contribute no inflection sheet
    (their directional derivative vanishes identically).
    """
    if isinstance(grid, int):
        grid = (grid,) * cfg.m
    grid = tuple(int(g) for g in grid)
    if min(grid) < 8:
        raise ValueError("grid resolution must be at least 8 per axis")
    axes, Y = _y_grid(cfg, grid)
    s_grid = np.linspace(1e-3, 1 - 1e-3, ns)
    names = family_names(cfg)
    meshes, notes = [], []

    # saturation inflection: f_ss = 0
    def fss(s, y):
        return frac_flow(s, y, cfg).f_ss

    cols, r = _column_roots(fss, fss, Y, s_grid)
    res = fss(r, Y[cols])
    scale = np.max(np.abs(fss(s_grid, Y[:, None, :])))
    meshes += _sheets("Inflection(s)", cols, r, np.abs(res) / scale, Y, grid, min_frac, max_jump)

    # lambda_s = lambda_k
    for k, name in enumerate(names[1:]):
        def g(s, y, name=name):
            return coincidence_fn(s, y, name, cfg)
        cols, r = _column_roots(g, g, Y, s_grid)
        res = np.abs(g(r, Y[cols]))
        keep = res <= RESID_TOL  # sign changes through poles are not roots
        meshes += _sheets(f"Coincidence(s,{name})", cols[keep], r[keep], res[keep], Y, grid, min_frac, max_jump)

    # lambda_i = lambda_j
    for i in range(cfg.m):
        for j in range(i + 1, cfg.m):
            a, b = names[i + 1], names[j + 1]

            def g(s, y, a=a, b=b):
                return family_coincidence(s, y, a, b, cfg)
            cols, r = _column_roots(g, g, Y, s_grid)
            res = np.abs(g(r, Y[cols]))
            keep = res <= RESID_TOL
            meshes += _sheets(f"Coincidence({a},{b})", cols[keep], r[keep], res[keep], Y, grid, min_frac,
                              max_jump)

    # chemical inflection: zeros of the directional derivative with r oriented continuously in s
    F0 = fields(s_grid[len(s_grid) // 2], Y, 1.0, cfg, level=0)
    for k, name in enumerate(names[1:]):
        Lam = F0.Lam[..., k]
        if np.all((np.abs(Lam) <= DEGEN_TOL) | (np.abs(Lam - 1) <= DEGEN_TOL)):
            notes.append(f"{name}: linearly degenerate, no inflection sheet")
            continue
        cols, r, fac, res = _chem_inflection(cfg, k, Y, s_grid)
        meshes += _sheets(f"Inflection({name})", cols, r, res, Y, grid, min_frac, max_jump, factor=fac)
    return SurfaceSet(meshes, grid, axes, notes)


def _chem_inflection(cfg, k, Y, s_grid, chunk=1000):
    """Roots of grad(lambda_k).r_k along each column, labelled by the vanishing factor."""
    out_c, out_r, out_f, out_res = [], [], [], []
    for c0 in range(0, Y.shape[0], chunk):
        Yc = Y[c0:c0 + chunk]
        F = fields(s_grid, Yc[:, None, :], 1.0, cfg, level=2)
        # P v times the back-substitution pivot is smooth through Gamma, so
        # sign(pivot) r is a continuous orientation along the column
        dd = F.dd[..., k] * np.sign(F.piv_s[..., k])
        dd = np.where(F.status[..., k] == OK, dd, np.nan)
        scale = np.nanmax(np.abs(dd), axis=1)
        ci, ki = _brackets(dd)
        if ci.size == 0:
            continue
        yb = Yc[ci]

        def g(s):
            Fp = fields(s, yb, 1.0, cfg, level=2)
            return Fp.dd[..., k] * np.sign(Fp.piv_s[..., k])

        root = _refine(g, s_grid[ki], s_grid[ki + 1], dd[ci, ki], dd[ci, ki + 1])
        Fr = fields(root, yb, 1.0, cfg, level=2)
        res = np.abs(Fr.dd[..., k]) / scale[ci]
        keep = res <= RESID_TOL
        gap_cs = np.abs(root - Fr.f)
        gap_g = np.abs(Fr.lam_s - Fr.lam[..., k]) / np.maximum(np.abs(Fr.lam_s), 1.0)
        fac = np.where(gap_cs <= 1e-8, "Cs", np.where(gap_g <= 1e-8, "Gamma", "J_H"))
        out_c.append(ci[keep] + c0)
        out_r.append(root[keep])
        out_f += list(fac[keep])
        out_res.append(res[keep])
    if not out_c:
        return np.zeros(0, dtype=int), np.zeros(0), [], np.zeros(0)
    return np.concatenate(out_c), np.concatenate(out_r), out_f, np.concatenate(out_res)


def lemma_roots(cfg, family, y, ns=1000):
    """Sign-change count of the coincidence function at fixed y on a 1/ns grid, and refined roots."""
    s = np.arange(1, ns) / ns
    g = coincidence_fn(s, np.asarray(y, dtype=float), family, cfg)
    idx = np.nonzero(np.isfinite(g[:-1]) & np.isfinite(g[1:]) & (np.sign(g[:-1]) * np.sign(g[1:]) < 0))[0]
    yv = np.broadcast_to(np.asarray(y, dtype=float), (idx.size, cfg.m))
    roots = _refine(lambda x: coincidence_fn(x, yv, family, cfg), s[idx], s[idx + 1], g[idx], g[idx + 1])
    return roots[np.abs(coincidence_fn(roots, yv, family, cfg)) <= RESID_TOL]

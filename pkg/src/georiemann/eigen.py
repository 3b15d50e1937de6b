"""Characteristic structure through the elimination reduction.

Row operations on the (n+1)x(n+1) pencil (A, B) remove the saturation and
velocity unknowns and leave an (n-1)-dimensional pencil in the composition
directions,

    ((calA + calA1) - Lambda (calB + calB1)) v = 0,

whose eigenvalues Lambda give the chemical speeds
lambda = (u/phi) (f - Lambda)/(s - Lambda). The saturation field is always
(lambda_s, e_1) with lambda_s = (u/phi) f_s.

The heavy lifting is vectorised: ``fields`` accepts arrays of saturations and
compositions so that surface sampling can evaluate whole columns at once.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (BackSubstitutionSingular, DegenerateModel, NonHyperbolicRegion,
                     Resonant, StateOnCs)
from .model import frac_flow, flux_hat_arr, jacobians

EPS_SF = 1e-10
EPS_RES = 1e-10
DEGEN_TOL = 1e-9
TIE_TOL = 1e-9

OK, COMPLEX, INFINITE = 0, 1, 2


def _row(a, idx, nb):
    """a[..., idx, ...] along axis nb (first non-batch axis), kept as length 1."""
    if nb == 0:
        i = int(idx)
        return a[i:i + 1]
    idx = np.asarray(idx)
    shape = idx.shape + (1,) * (a.ndim - idx.ndim)
    return np.take_along_axis(a, idx.reshape(shape), axis=nb)


def _rows(a, idx, nb):
    """Select several rows: idx has batch shape + (k,)."""
    if nb == 0:
        return a[np.asarray(idx)]
    idx = np.asarray(idx)
    shape = idx.shape + (1,) * (a.ndim - idx.ndim)
    full = np.broadcast_to(idx.reshape(shape), a.shape[:nb] + idx.shape[-1:] + a.shape[nb + 1:])
    return np.take_along_axis(a, full, axis=nb)


@dataclass
class EliminationCoeffs:
    """Elimination coefficients of every species row, functions of y only.

    ``first`` is the pivot row used to remove the saturation unknown (the
    largest |[rho]|), ``last`` the row used to remove u (largest |nu| among
    the rest); ``middle`` lists the remaining rows in increasing order and
    indexes the reduced pencil.
    """

    first: np.ndarray
    last: np.ndarray
    middle: np.ndarray
    jump: np.ndarray
    gamma: np.ndarray
    varrho: np.ndarray
    pi: np.ndarray
    nu: np.ndarray
    vartheta: np.ndarray
    varsigma: np.ndarray
    tau: np.ndarray
    nb: int = 0
    coeffs: object = field(default=None, repr=False)
    d_nu: np.ndarray = None
    d_vartheta: np.ndarray = None
    d_varsigma: np.ndarray = None
    d_tau: np.ndarray = None


def elimination_coeffs(y, cfg, derivs=False):
    y = np.asarray(y, dtype=float)
    nb = y.ndim - 1
    phi = cfg.phi
    c = cfg.coeffs(y, hessians=derivs)
    D = c.jump
    Dabs = np.abs(D)
    first = np.argmax(Dabs, axis=-1)
    if np.any(np.max(Dabs, axis=-1) == 0):
        raise DegenerateModel("coefficients", "all [rho_i] vanish; no pivot for the saturation unknown")
    Dp = _row(D, first, nb)                   # (..., 1)
    Jw, Jo, Jr = c.d_rho_w, c.d_rho_o, c.d_rho_r
    Jwp, Jop, Jrp = _row(Jw, first, nb), _row(Jo, first, nb), _row(Jr, first, nb)
    gamma = Jw * Dp[..., None] - Jwp * D[..., None]
    varrho = Jo * Dp[..., None] - Jop * D[..., None]
    pi = (1 - phi) * (Jr * Dp[..., None] - Jrp * D[..., None])
    rop = _row(c.rho_o, first, nb)
    nu = Dp * c.rho_o - D * rop
    absnu = np.abs(nu)
    np.put_along_axis(absnu, first[..., None], -1.0, axis=-1)
    last = np.argmax(absnu, axis=-1)
    nuL = _row(nu, last, nb)
    scale = np.max(np.abs(D), axis=-1) * np.max(np.abs(c.rho_o) + np.abs(c.rho_w), axis=-1)
    if np.any(np.abs(nuL[..., 0]) <= 1e-14 * scale):
        raise DegenerateModel("coefficients", "every nu_i vanishes; velocity cannot be eliminated")
    gL, rL, pL = _row(gamma, last, nb), _row(varrho, last, nb), _row(pi, last, nb)
    vartheta = gamma * nuL[..., None] - gL * nu[..., None]
    varsigma = varrho * nuL[..., None] - rL * nu[..., None]
    tau = pi * nuL[..., None] - pL * nu[..., None]
    n1 = D.shape[-1]
    key = np.broadcast_to(np.arange(n1), D.shape).copy()
    np.put_along_axis(key, first[..., None], n1, axis=-1)
    np.put_along_axis(key, last[..., None], n1 + 1, axis=-1)
    middle = np.sort(key, axis=-1)[..., :n1 - 2]
    ec = EliminationCoeffs(first, last, middle, D, gamma, varrho, pi, nu,
                           vartheta, varsigma, tau, nb, c)
    if derivs:
        dD = c.d_jump
        dDp = _row(dD, first, nb)             # (..., 1, m)

        def dprod(J, Jp, H):
            Hp = _row(H, first, nb)
            return (H * Dp[..., None, None] + J[..., None] * dDp[..., :, None, :]
                    - Hp * D[..., None, None] - Jp[..., None] * dD[..., :, None, :])

        dgamma = dprod(Jw, Jwp, c.h_rho_w)
        dvarrho = dprod(Jo, Jop, c.h_rho_o)
        dpi = (1 - phi) * dprod(Jr, Jrp, c.h_rho_r)
        dnu = (dDp * c.rho_o[..., None] + Dp[..., None] * Jo
               - dD * rop[..., None] - D[..., None] * _row(Jo, first, nb))
        dnuL = _row(dnu, last, nb)

        def dcomb(X, dX):
            XL, dXL = _row(X, last, nb), _row(dX, last, nb)
            return (dX * nuL[..., None, None] + X[..., None] * dnuL[..., :, None, :]
                    - dXL * nu[..., None, None] - XL[..., None] * dnu[..., :, None, :])

        ec.d_nu = dnu
        ec.d_vartheta = dcomb(gamma, dgamma)
        ec.d_varsigma = dcomb(varrho, dvarrho)
        ec.d_tau = dcomb(pi, dpi)
    return ec


@dataclass
class ReducedProblem:
    """Reduced pencil matrices; calA, calB depend on y only."""

    calA: np.ndarray
    calB: np.ndarray
    calA1: np.ndarray
    calB1: np.ndarray
    s: float = None
    y: tuple = None

    @property
    def M(self):
        return self.calA + self.calA1

    @property
    def N(self):
        return self.calB + self.calB1


def _reduced_parts(ec, s, f, phi):
    nb = ec.nb
    calA = _rows(ec.varsigma, ec.middle, nb)
    calB = _rows(ec.varsigma - ec.vartheta, ec.middle, nb)
    T = _rows(ec.tau, ec.middle, nb)
    gap = np.asarray(s - f, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(gap != 0, 1.0 / (phi * np.where(gap != 0, gap, 1.0)), 0.0)
    calB1 = -c[..., None, None] * T
    calA1 = np.asarray(f)[..., None, None] * calB1
    return calA, calB, calA1, calB1, T, c


def reduced_matrices(state, cfg, ec=None):
    ec = elimination_coeffs(state.yarr, cfg) if ec is None else ec
    f = float(frac_flow(state.s, state.yarr, cfg).f)
    T = _rows(ec.tau, ec.middle, ec.nb)
    if abs(state.s - f) <= EPS_SF and np.any(T != 0):
        raise StateOnCs("state lies on f = s; the reduced pencil is singular there")
    calA, calB, calA1, calB1, _, _ = _reduced_parts(ec, state.s, f, cfg.phi)
    return ReducedProblem(calA, calB, calA1, calB1, state.s, state.y)


def _canon(v):
    """Unit length, first coordinate above 1e-12 made positive."""
    v = v / np.linalg.norm(v, axis=-2, keepdims=True)
    big = np.abs(v) > 1e-12
    k = np.argmax(big, axis=-2)
    lead = np.take_along_axis(v, k[..., None, :], axis=-2)
    return v * np.where(lead < 0, -1.0, 1.0)


def _null2(K, transpose=False):
    # null vector of a (numerically) singular 2x2 matrix from its larger row
    if transpose:
        K = np.swapaxes(K, -1, -2)
    r0, r1 = K[..., 0, :], K[..., 1, :]
    use0 = (np.abs(r0).sum(-1) >= np.abs(r1).sum(-1))[..., None]
    row = np.where(use0, r0, r1)
    v = np.stack([-row[..., 1], row[..., 0]], axis=-1)
    tiny = np.abs(v).sum(-1) == 0
    if np.any(tiny):
        v = np.where(tiny[..., None], np.array([1.0, 0.0]), v)
    return v


def _snap(lam, status):
    """Round reduced eigenvalues lying within a few ulps of 0 or 1 onto them.

    Lambda in {0, 1} is structural (linear degeneracy), but the elimination
    leaves roundoff of order eps * |Lambda| scale, which (f - Lambda)/(s - Lambda)
    amplifies by 1/f where f is tiny.
    """
    fin = np.isfinite(lam) & (status == OK)
    scale = np.max(np.where(fin, np.abs(lam), 0.0), axis=-1, keepdims=True)
    tol = 16 * np.finfo(float).eps * np.maximum(scale, 1.0)
    lam = np.where(fin & (np.abs(lam) <= tol), 0.0, lam)
    return np.where(fin & (np.abs(lam - 1.0) <= tol), 1.0, lam)


def pencil_eig(M, N):
    """Eigen-triples of (M - Lambda N), batched over leading axes.

    Returns Lam (..., m) ascending by real part, right and left eigenvectors
    as columns (..., m, m), and a status array (0 ok, 1 complex, 2 infinite).
    """
    M = np.asarray(M, dtype=float)
    N = np.asarray(N, dtype=float)
    m = M.shape[-1]
    bshape = M.shape[:-2]
    if m == 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = M[..., 0, :] / N[..., 0, :]
        status = np.where(np.abs(N[..., 0, :]) <= 1e-14 * np.abs(M[..., 0, :]), INFINITE, OK)
        ones = np.ones(bshape + (1, 1))
        return _snap(lam, status), ones, ones.copy(), status
    if m == 2:
        a = N[..., 0, 0] * N[..., 1, 1] - N[..., 0, 1] * N[..., 1, 0]
        b = -(M[..., 0, 0] * N[..., 1, 1] + M[..., 1, 1] * N[..., 0, 0]
              - M[..., 0, 1] * N[..., 1, 0] - M[..., 1, 0] * N[..., 0, 1])
        c = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
        sc = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.abs(c))
        disc = b * b - 4 * a * c
        cplx = disc < -1e-14 * b * b
        sq = np.sqrt(np.maximum(disc, 0.0))
        q = -0.5 * (b + np.where(b >= 0, sq, -sq))
        with np.errstate(divide="ignore", invalid="ignore"):
            l1 = np.where(q != 0, q / np.where(a != 0, a, 1.0), 0.0)
            l2 = np.where(q != 0, c / np.where(q != 0, q, 1.0), 0.0)
            re = -b / (2 * np.where(a != 0, a, 1.0))
        inf = np.abs(a) <= 1e-14 * sc
        with np.errstate(divide="ignore", invalid="ignore"):
            lin = -c / np.where(b != 0, b, 1.0)
        l1 = np.where(cplx, re, l1)
        l2 = np.where(cplx, re, l2)
        l1 = np.where(inf, lin, l1)
        l2 = np.where(inf, np.inf, l2)
        lam = np.stack([np.minimum(l1, l2), np.maximum(l1, l2)], axis=-1)
        status = np.zeros(lam.shape, dtype=int)
        status[cplx] = COMPLEX
        status[..., 1] = np.where(inf, INFINITE, status[..., 1])
        V = np.zeros(bshape + (2, 2))
        W = np.zeros(bshape + (2, 2))
        for k in range(2):
            lk = np.where(np.isfinite(lam[..., k]), lam[..., k], 0.0)
            K = M - lk[..., None, None] * N
            if k == 1:
                K = np.where(inf[..., None, None], N, K)
            V[..., :, k] = _null2(K)
            W[..., :, k] = _null2(K, transpose=True)
        return _snap(lam, status), _canon(V), _canon(W), status
    # general size: dense QZ per batch element
    flat_M = M.reshape(-1, m, m)
    flat_N = N.reshape(-1, m, m)
    lam = np.zeros((flat_M.shape[0], m))
    V = np.zeros((flat_M.shape[0], m, m))
    W = np.zeros((flat_M.shape[0], m, m))
    status = np.zeros((flat_M.shape[0], m), dtype=int)
    for i in range(flat_M.shape[0]):
        ab, wl, vr = scipy.linalg.eig(flat_M[i], flat_N[i], left=True, right=True,
                                      homogeneous_eigvals=True)
        alpha, beta = ab
        fin = np.abs(beta) > 1e-14 * np.abs(alpha)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(fin, alpha / np.where(fin, beta, 1.0), np.inf)
        order = np.lexsort((vals.imag, vals.real))
        vals, wl, vr = vals[order], wl[:, order], vr[:, order]
        status[i] = np.where(~np.isfinite(vals.real), INFINITE,
                             np.where(np.abs(vals.imag) > 1e-12 * np.maximum(1, np.abs(vals.real)), COMPLEX, OK))
        lam[i] = vals.real
        V[i] = vr.real
        W[i] = wl.real
    lam = _snap(lam, status)
    return (lam.reshape(bshape + (m,)), _canon(V.reshape(bshape + (m, m))),
            _canon(W.reshape(bshape + (m, m))), status.reshape(bshape + (m,)))


@dataclass
class Fields:
    """Batched characteristic data.  Chemical arrays carry a family axis."""

    s: np.ndarray
    u: np.ndarray
    f: np.ndarray
    f_s: np.ndarray
    f_ss: np.ndarray
    f_y: np.ndarray
    lam_s: np.ndarray
    dd_s: np.ndarray
    Lam: np.ndarray
    status: np.ndarray
    lam: np.ndarray = None
    v: np.ndarray = None
    lv: np.ndarray = None
    r: np.ndarray = None        # (..., n+1, fam) with unit (s, y) part
    r_norm: np.ndarray = None   # |(P v)_{s,y}|
    a: np.ndarray = None
    b: np.ndarray = None
    g_u: np.ndarray = None      # u-component of P v divided by u
    piv_s: np.ndarray = None    # first-row pivot of the back substitution
    dLam: np.ndarray = None     # (..., fam, n): d/ds, d/dy
    grad: np.ndarray = None     # (..., fam, n+1)
    dd: np.ndarray = None
    w: np.ndarray = None
    H: np.ndarray = None
    orient: np.ndarray = None
    ec: object = None


def fields(s, y, u, cfg, level=2, ec=None, orient=False):
    """Evaluate characteristic fields on arrays of states.

    level 0: eigenvalues only; 1: plus right eigenvectors; 2: plus the
    derivatives of Lambda, the directional derivatives and the inflection
    factor. ``y`` may have fewer batch axes than ``s`` as long as they
    broadcast (e.g. y of shape (C, 1, m) against s of shape (C, K)).
    """
    # nan and inf mark singular points (pivot, resonance, f = s); callers test status
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return _fields(s, y, u, cfg, level, ec, orient)


def _fields(s, y, u, cfg, level, ec, orient):
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    phi = cfg.phi
    fe = frac_flow(s, y, cfg)
    shape = np.broadcast_shapes(s.shape, y.shape[:-1], np.shape(u))
    s = np.broadcast_to(s, shape)
    u = np.broadcast_to(np.asarray(u, dtype=float), shape)
    f, f_s = np.broadcast_to(fe.f, shape), np.broadcast_to(fe.f_s, shape)
    f_ss = np.broadcast_to(fe.f_ss, shape)
    f_y = np.broadcast_to(fe.f_y, shape + (cfg.m,))
    if ec is None:
        ec = elimination_coeffs(y, cfg, derivs=level >= 2)
    nb = ec.nb
    calA, calB, calA1, calB1, T, cinv = _reduced_parts(ec, s, f, phi)
    M = calA + calA1
    N = calB + calB1
    Lam, V, W, status = pencil_eig(np.broadcast_to(M, shape + M.shape[-2:]),
                                   np.broadcast_to(N, shape + N.shape[-2:]))
    # chemical families are numbered by decreasing Lambda
    Lam, V, W, status = Lam[..., ::-1], V[..., ::-1], W[..., ::-1], status[..., ::-1]
    out = Fields(s, u, f, f_s, f_ss, f_y, u / phi * f_s, u / phi * f_ss, Lam, status, ec=ec)
    sm = s[..., None] - Lam
    fm = f[..., None] - Lam
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = u[..., None] / phi * fm / sm
    out.lam = lam
    if level == 0:
        return out

    c = ec.coeffs
    Dp = _row(ec.jump, ec.first, nb)[..., 0]
    rop = _row(c.rho_o, ec.first, nb)[..., 0]
    Jwp = _row(c.d_rho_w, ec.first, nb)[..., 0, :]
    Jop = _row(c.d_rho_o, ec.first, nb)[..., 0, :]
    Jrp = _row(c.d_rho_r, ec.first, nb)[..., 0, :]
    nuL = _row(ec.nu, ec.last, nb)[..., 0]
    gL = _row(ec.gamma, ec.last, nb)[..., 0, :]
    rL = _row(ec.varrho, ec.last, nb)[..., 0, :]
    pL = _row(ec.pi, ec.last, nb)[..., 0, :]

    ul = u[..., None]
    xi1 = ul * f_s[..., None] - phi * lam
    xi2 = ul * f[..., None] - phi * lam * s[..., None]
    xi3 = ul * (1 - f[..., None]) - phi * lam * (1 - s[..., None])
    piv = Dp[..., None] * xi1                                  # (..., fam)
    Gp = (Jwp[..., None, :] * xi2[..., None] + Jop[..., None, :] * xi3[..., None]
          - (1 - phi) * Jrp[..., None, :] * lam[..., None])    # (..., fam, m)
    G1 = gL[..., None, :] * xi2[..., None] + rL[..., None, :] * xi3[..., None] - pL[..., None, :] * lam[..., None]
    a = -G1 / nuL[..., None, None]
    Fp = Dp * f + rop
    with np.errstate(divide="ignore", invalid="ignore"):
        b = -(Fp[..., None, None] * a + Gp) / piv[..., None]
    r1 = np.einsum("...fj,...jf->...f", b, V)
    ru = np.einsum("...fj,...jf->...f", a, V)
    norm = np.sqrt(r1 * r1 + 1.0)
    with np.errstate(invalid="ignore"):   # nan where the pivot vanishes
        r = np.concatenate([(r1 / norm)[..., None, :], V / norm[..., None, :], (ru / norm)[..., None, :]],
                           axis=-2)
    out.v, out.lv, out.r, out.r_norm = V, W, r, norm
    out.a, out.b, out.piv_s = a, b, piv
    out.g_u = ru / norm / u[..., None]
    if level == 1:
        if orient:
            _orient_by(out, np.ones_like(lam))
        return out

    # derivatives of Lambda by first-order perturbation of the reduced pencil
    m = cfg.m
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = s - f
        fc = f * cinv
        dfc_ds = np.where(gap != 0, (s * f_s - f) / (phi * gap ** 2), 0.0)
        dc_ds = np.where(gap != 0, -(1 - f_s) / (phi * gap ** 2), 0.0)
        dfc_dy = np.where(gap[..., None] != 0, s[..., None] * f_y / (phi * gap[..., None] ** 2), 0.0)
        dc_dy = np.where(gap[..., None] != 0, f_y / (phi * gap[..., None] ** 2), 0.0)
    dS = _rows(ec.d_varsigma, ec.middle, nb)
    dTh = _rows(ec.d_vartheta, ec.middle, nb)
    dT = _rows(ec.d_tau, ec.middle, nb)
    Tl = T
    dM = np.empty(shape + (m + 1, m, m))
    dN = np.empty(shape + (m + 1, m, m))
    dM[..., 0, :, :] = -Tl * dfc_ds[..., None, None]
    dN[..., 0, :, :] = -Tl * dc_ds[..., None, None]
    for k in range(m):
        dM[..., k + 1, :, :] = dS[..., k] - fc[..., None, None] * dT[..., k] - Tl * dfc_dy[..., k, None, None]
        dN[..., k + 1, :, :] = (dS[..., k] - dTh[..., k] - cinv[..., None, None] * dT[..., k]
                                - Tl * dc_dy[..., k, None, None])
    Nfull = np.broadcast_to(N, shape + (m, m))
    den = np.einsum("...if,...ij,...jf->...f", W, Nfull, V)
    num = (np.einsum("...if,...tij,...jf->...ft", W, dM, V)
           - Lam[..., None] * np.einsum("...if,...tij,...jf->...ft", W, dN, V))
    with np.errstate(divide="ignore", invalid="ignore"):
        dLam = num / den[..., None]
    out.dLam = dLam
    Ls, Ly = dLam[..., 0], dLam[..., 1:]
    sm2 = sm * sm
    ufac = ul / phi
    with np.errstate(divide="ignore", invalid="ignore"):
        dlam_ds = ufac * ((f_s[..., None] - Ls) * sm - fm * (1 - Ls)) / sm2
        dlam_dy = ufac[..., None] * ((f_y[..., None, :] - Ly) * sm[..., None] + fm[..., None] * Ly) / sm2[..., None]
        dlam_du = lam / ul
    grad = np.concatenate([dlam_ds[..., None], dlam_dy, dlam_du[..., None]], axis=-1)
    out.grad = grad
    raw = dlam_ds * r1 + np.einsum("...fj,...jf->...f", dlam_dy, V) + dlam_du * ru
    dd = raw / norm
    out.dd = dd
    # w-vector of the inflection factorisation; H = w.v
    kappa = (gap[..., None]) * (out.lam_s[..., None] - lam) * norm
    with np.errstate(divide="ignore", invalid="ignore"):
        wfac = phi * sm2 / kappa
        w = wfac[..., None] * (dlam_ds[..., None] * b + dlam_dy + dlam_du[..., None] * a)
    out.w = w
    out.H = np.einsum("...fj,...jf->...f", w, V)
    if orient:
        _orient_by(out, np.where(dd < 0, -1.0, 1.0))
    return out


def _orient_by(out, sign):
    out.orient = sign
    out.v = out.v * sign[..., None, :]
    out.r = out.r * sign[..., None, :]
    out.g_u = out.g_u * sign
    if out.dd is not None:
        out.dd = out.dd * sign
        # w does not depend on the sign of v, so H = w.v flips with v
        out.H = out.H * sign


@dataclass
class EigenPair:
    family: str
    lam: float
    r: np.ndarray
    l: np.ndarray
    Lam: float = None
    v: np.ndarray = None
    degenerate: bool = False
    status: str = "ok"
    dd: float = None
    H: float = None


def family_names(cfg):
    """Family labels; chemical families L1, L2, ... in order of decreasing Lambda."""
    return ["s"] + [f"L{i + 1}" for i in range(cfg.m)]


def _left_chemical(ec, lv, n1):
    """Left eigenvector of the full pencil from the reduced one via the row operations."""
    p, L = int(ec.first), int(ec.last)
    D, nu = ec.jump, ec.nu
    out = np.zeros(n1)
    for r, i in enumerate(ec.middle):
        i = int(i)
        out[i] += lv[r] * nu[L] * D[p]
        out[p] += lv[r] * (-nu[L] * D[i] + nu[i] * D[L])
        out[L] += -lv[r] * nu[i] * D[p]
    return out / np.linalg.norm(out)


def _left_null(K):
    _, _, vh = np.linalg.svd(K.T)
    return vh[-1]


def assemble_eigenpairs(state, cfg, orient=True, strict=False):
    """All n characteristic pairs at a state, saturation first then L1.. by Lambda.

    Chemical right eigenvectors are P v rescaled so the (s, y) part has unit
    length; with ``orient`` they point to increasing characteristic speed.
    """
    y = state.yarr
    ec = elimination_coeffs(y, cfg, derivs=True)
    F = fields(np.array(state.s), y, np.array(state.u), cfg, level=2, ec=ec, orient=orient)
    A, B = jacobians(state, cfg)
    n1 = cfg.n + 1
    pairs = []
    lam_s = float(F.lam_s)
    r_s = np.zeros(n1)
    r_s[0] = 1.0
    l_s = _left_null(A - lam_s * B)
    pairs.append(EigenPair("s", lam_s, r_s, l_s, dd=float(F.dd_s)))
    scale = abs(float(ec.jump[int(ec.first)])) * max(abs(state.u), 1.0)
    for i in range(cfg.m):
        name = f"L{i + 1}"
        Lam = float(F.Lam[i])
        st = int(F.status[i])
        if st == COMPLEX:
            if strict:
                raise NonHyperbolicRegion(f"complex reduced eigenvalues at {state}")
            pairs.append(EigenPair(name, np.nan, None, None, Lam, status="nonhyperbolic"))
            continue
        if st == INFINITE:
            pairs.append(EigenPair(name, np.nan, None, None, np.inf, status="infinite"))
            continue
        degenerate = abs(Lam) <= DEGEN_TOL or abs(Lam - 1) <= DEGEN_TOL
        if abs(state.s - Lam) <= EPS_RES:
            if strict:
                raise Resonant(f"s = Lambda for family {name}")
            pairs.append(EigenPair(name, np.nan, None, None, Lam, degenerate=degenerate, status="resonant"))
            continue
        lam = float(F.lam[i])
        status = "ok"
        if abs(float(F.piv_s[i])) <= 1e-14 * scale * max(1.0, abs(lam)):
            if strict:
                raise BackSubstitutionSingular("saturation (first-row pivot)")
            status = "singular"
        lv = F.lv[:, i]
        l = _left_chemical(ec, lv, n1)
        pairs.append(EigenPair(name, lam, F.r[:, i].copy(), l, Lam, F.v[:, i].copy(),
                               degenerate, status, float(F.dd[i]), float(F.H[i])))
    return pairs


def eigen_ordering(state, cfg):
    """Families sorted by speed, near-ties, and a label for the saturation position."""
    F = fields(np.array(state.s), state.yarr, np.array(state.u), cfg, level=0)
    names = family_names(cfg)
    speeds = np.concatenate([[float(F.lam_s)], np.asarray(F.lam, dtype=float)])
    ok = np.concatenate([[True], F.status == OK])
    idx = [i for i in np.argsort(speeds, kind="stable") if ok[i]]
    order = [names[i] for i in idx]
    ties = []
    for a, b in zip(idx[:-1], idx[1:]):
        gap = abs(speeds[b] - speeds[a])
        if gap <= TIE_TOL * max(abs(speeds[a]), abs(speeds[b]), 1e-300):
            ties.append((names[a], names[b]))
    pos = order.index("s")
    label = ("saturation-slowest" if pos == 0 else
             "saturation-fastest" if pos == len(order) - 1 else "saturation-middle")
    return order, ties, label, {names[i]: float(speeds[i]) for i in idx}


def chemical_reduced_eigen(prob):
    """Eigen-triples (Lambda, v, l, status) of the reduced pencil, ascending Lambda."""
    lam, V, W, status = pencil_eig(prob.M, prob.N)
    names = {OK: "ok", COMPLEX: "nonhyperbolic", INFINITE: "infinite"}
    return [(float(lam[i]), V[:, i], W[:, i], names[int(status[i])]) for i in range(lam.shape[-1])]

"""Physical model: coefficients, fractional flow, accumulation, flux, Jacobians.

The system is G(s, y)_t + (u F(s, y))_x = 0 with n+1 equations and unknowns
(s, y_1..y_{n-1}, u). Species j has molar concentrations rho_w[j](y),
rho_o[j](y) in the water and oil phases and rho_r[j](y) on the rock.

    G_j = phi*rho_wj*s + phi*rho_oj*(1-s) + (1-phi)*rho_rj
    F_j = rho_wj*f + rho_oj*(1-f)

Every coefficient is a multivariate polynomial in y. Functions in this module
accept NumPy arrays: ``s`` of shape ``(...)`` and ``y`` of shape ``(..., n-1)``
broadcast against each other.
"""

from dataclasses import dataclass, field
from functools import cached_property
import json
from pathlib import Path

import numpy as np

from .errors import AssumptionViolation, ModelValidationError


@dataclass(frozen=True)
class PhaseState:
    """A point (s, y, u) of phase space."""

    s: float
    y: tuple
    u: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "y", tuple(float(v) for v in np.atleast_1d(self.y)))
        object.__setattr__(self, "u", float(self.u))

    @property
    def array(self):
        return np.array([self.s, *self.y, self.u])

    @property
    def sy(self):
        return np.array([self.s, *self.y])

    @property
    def yarr(self):
        return np.array(self.y)

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float)
        return cls(a[0], tuple(a[1:-1]), a[-1])

    @classmethod
    def from_sy(cls, sy, u):
        sy = np.asarray(sy, dtype=float)
        return cls(sy[0], tuple(sy[1:]), u)

    def with_u(self, u):
        return PhaseState(self.s, self.y, u)


class PolyTable:
    """Several polynomials in m variables evaluated on a shared monomial basis.

    Each polynomial is a list of ``(coef, powers)`` terms. Values, gradients
    and Hessians of all polynomials come from one pass over the monomials.
    """

    def __init__(self, polys, nvar):
        self.nvar = nvar
        basis = sorted({tuple(int(p) for p in pw) for poly in polys for _, pw in poly})
        if not basis:
            basis = [(0,) * nvar]
        index = {pw: k for k, pw in enumerate(basis)}
        self.powers = np.array(basis, dtype=int).reshape(len(basis), nvar)
        self.coef = np.zeros((len(polys), len(basis)))
        for i, poly in enumerate(polys):
            for c, pw in poly:
                self.coef[i, index[tuple(int(p) for p in pw)]] += float(c)
        self.is_constant = np.all(self.coef[:, self.powers.sum(axis=1) > 0] == 0, axis=1)

    def _mono(self, y, shift):
        # prod_k y_k**(p_k - shift_k) with zero where the exponent goes negative
        y = np.asarray(y, dtype=float)[..., None, :]
        p = self.powers - np.asarray(shift)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0, y ** np.maximum(p, 0), np.where(p == 0, 1.0, 0.0))
        return terms.prod(axis=-1)

    def values(self, y):
        return self._mono(y, np.zeros(self.nvar, dtype=int)) @ self.coef.T

    def jac(self, y):
        out = []
        for k in range(self.nvar):
            e = np.zeros(self.nvar, dtype=int)
            e[k] = 1
            out.append(self._mono(y, e) @ (self.coef * self.powers[:, k]).T)
        return np.stack(out, axis=-1)

    def hess(self, y):
        m = self.nvar
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape[:-1] + (self.coef.shape[0], m, m))
        for k in range(m):
            for j in range(k, m):
                e = np.zeros(m, dtype=int)
                e[k] += 1
                e[j] += 1
                factor = self.powers[:, k] * (self.powers[:, j] - (1 if j == k else 0))
                val = self._mono(y, e) @ (self.coef * factor).T
                out[..., k, j] = val
                out[..., j, k] = val
        return out


def _parse_poly(spec, nvar, where):
    """A coefficient is a number or a list of [coef, [powers...]] terms."""
    if isinstance(spec, (int, float)):
        return [(float(spec), (0,) * nvar)]
    if not isinstance(spec, list):
        raise ModelValidationError(where, "expected a number or a list of [coef, powers] terms")
    terms = []
    for t in spec:
        if not (isinstance(t, list) and len(t) == 2 and isinstance(t[1], list)):
            raise ModelValidationError(where, f"malformed term {t!r}")
        c, pw = t
        if len(pw) != nvar or any((not isinstance(p, int)) or p < 0 for p in pw):
            raise ModelValidationError(where, f"term powers must be {nvar} non-negative integers")
        terms.append((float(c), tuple(pw)))
    return terms


def _poly_json(terms):
    if len(terms) == 1 and not any(terms[0][1]):
        return terms[0][0]
    return [[c, list(pw)] for c, pw in terms]


@dataclass
class CoeffSet:
    """Species coefficients at given y, with partials along the last axes."""

    rho_w: np.ndarray
    rho_o: np.ndarray
    rho_r: np.ndarray
    d_rho_w: np.ndarray
    d_rho_o: np.ndarray
    d_rho_r: np.ndarray
    h_rho_w: np.ndarray = None
    h_rho_o: np.ndarray = None
    h_rho_r: np.ndarray = None

    @property
    def jump(self):
        return self.rho_w - self.rho_o

    @property
    def d_jump(self):
        return self.d_rho_w - self.d_rho_o


@dataclass
class ModelConfig:
    """Model parameters and polynomial coefficient tables.

    ``rho_w``, ``rho_o``, ``rho_r`` hold one term list per species;
    ``mu_w``, ``mu_o`` are term lists too (constants in the usual case).
    """

    n: int
    phi: float
    mu_w: list
    mu_o: list
    s_wc: float
    lambda_bc: float
    rho_w: list
    rho_o: list
    rho_r: list
    box: np.ndarray
    name: str = "model"
    source: dict = field(default=None, repr=False)

    def __post_init__(self):
        self.box = np.asarray(self.box, dtype=float).reshape(self.n - 1, 2)
        self._table = PolyTable(self.rho_w + self.rho_o + self.rho_r + [self.mu_w, self.mu_o], self.n - 1)

    @property
    def m(self):
        return self.n - 1

    @cached_property
    def rho_r_constant(self):
        n1 = self.n + 1
        return bool(np.all(self._table.is_constant[2 * n1:3 * n1]))

    @cached_property
    def viscosity_constant(self):
        return bool(np.all(self._table.is_constant[-2:]))

    def coeffs(self, y, hessians=False):
        n1 = self.n + 1
        val = self._table.values(y)
        jac = self._table.jac(y)
        out = CoeffSet(val[..., :n1], val[..., n1:2 * n1], val[..., 2 * n1:3 * n1],
                       jac[..., :n1, :], jac[..., n1:2 * n1, :], jac[..., 2 * n1:3 * n1, :])
        if hessians:
            h = self._table.hess(y)
            out.h_rho_w = h[..., :n1, :, :]
            out.h_rho_o = h[..., n1:2 * n1, :, :]
            out.h_rho_r = h[..., 2 * n1:3 * n1, :, :]
        return out

    def viscosities(self, y):
        """Return (mu_w, mu_o, grad mu_w, grad mu_o)."""
        val = self._table.values(y)[..., -2:]
        jac = self._table.jac(y)[..., -2:, :]
        return val[..., 0], val[..., 1], jac[..., 0, :], jac[..., 1, :]

    def in_box(self, y, tol=0.0):
        y = np.asarray(y, dtype=float)
        return bool(np.all(y >= self.box[:, 0] - tol) and np.all(y <= self.box[:, 1] + tol))

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ModelValidationError("<root>", "model must be a JSON object")
        for key in ("n", "porosity", "mu_w", "mu_o", "lambda_bc", "domain", "species"):
            if key not in d:
                raise ModelValidationError(key, "missing required field")
        n = d["n"]
        if not isinstance(n, int) or n < 2:
            raise ModelValidationError("n", "must be an integer >= 2")
        m = n - 1
        phi = d["porosity"]
        if not isinstance(phi, (int, float)) or not 0.0 < phi < 1.0:
            raise ModelValidationError("porosity", "must lie in (0, 1)")
        s_wc = d.get("s_wc", 0.0)
        if not isinstance(s_wc, (int, float)) or not 0.0 <= s_wc < 1.0:
            raise ModelValidationError("s_wc", "must lie in [0, 1)")
        lam = d["lambda_bc"]
        if not isinstance(lam, (int, float)) or not lam > 0.0:
            raise ModelValidationError("lambda_bc", "must be positive")
        box = d["domain"]
        if (not isinstance(box, list) or len(box) != m
                or any(not isinstance(b, list) or len(b) != 2 for b in box)):
            raise ModelValidationError("domain", f"expected {m} [lo, hi] pairs")
        box = np.array(box, dtype=float)
        if np.any(box[:, 0] >= box[:, 1]):
            raise ModelValidationError("domain", "every interval needs lo < hi")
        species = d["species"]
        if not isinstance(species, list) or len(species) != n + 1:
            raise ModelValidationError("species", f"expected {n + 1} entries")
        rw, ro, rr = [], [], []
        for j, sp in enumerate(species):
            for key, dest in (("rho_w", rw), ("rho_o", ro), ("rho_r", rr)):
                if key not in sp:
                    raise ModelValidationError(f"species[{j}].{key}", "missing")
                dest.append(_parse_poly(sp[key], m, f"species[{j}].{key}"))
        mu_w = _parse_poly(d["mu_w"], m, "mu_w")
        mu_o = _parse_poly(d["mu_o"], m, "mu_o")
        cfg = cls(n=n, phi=float(phi), mu_w=mu_w, mu_o=mu_o, s_wc=float(s_wc),
                  lambda_bc=float(lam), rho_w=rw, rho_o=ro, rho_r=rr, box=box,
                  name=str(d.get("name", "model")), source=d)
        # viscosity positivity on the box corners and centre
        for yv in box_probe_points(cfg):
            mw, mo, _, _ = cfg.viscosities(yv)
            if not mw > 0:
                raise ModelValidationError("mu_w", "viscosity must be positive on the domain")
            if not mo > 0:
                raise ModelValidationError("mu_o", "viscosity must be positive on the domain")
        return cfg

    def to_dict(self):
        return {
            "name": self.name,
            "n": self.n,
            "porosity": self.phi,
            "mu_w": _poly_json(self.mu_w),
            "mu_o": _poly_json(self.mu_o),
            "s_wc": self.s_wc,
            "lambda_bc": self.lambda_bc,
            "domain": self.box.tolist(),
            "species": [{"rho_w": _poly_json(a), "rho_o": _poly_json(b), "rho_r": _poly_json(c)}
                        for a, b, c in zip(self.rho_w, self.rho_o, self.rho_r)],
        }


def box_probe_points(cfg):
    """Box corners plus centre, used for cheap domain-wide sanity checks."""
    lo, hi = cfg.box[:, 0], cfg.box[:, 1]
    m = cfg.m
    pts = [lo + (hi - lo) * np.array([(k >> i) & 1 for i in range(m)], dtype=float)
           for k in range(2 ** m)]
    pts.append(0.5 * (lo + hi))
    return pts


def read_model(path):
    """Parse a model file without the Assumption-1 validation."""
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelValidationError("<file>", f"invalid JSON: {exc}") from exc
    return ModelConfig.from_dict(d)


def desk3_path():
    return Path(__file__).with_name("data") / "desk3.json"


def desk3():
    """The shipped four-equation reference model."""
    return read_model(desk3_path())


@dataclass
class FluxEval:
    f: np.ndarray
    f_s: np.ndarray
    f_ss: np.ndarray
    f_y: np.ndarray


def _pow(x, a):
    # x**a for x in [0, 1]; 0**a with a < 0 is inf (only reached at the end points)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, np.power(np.maximum(x, 1e-300), a), 0.0 if a > 0 else (1.0 if a == 0 else np.inf))


def frac_flow(s, y, cfg):
    """Brooks-Corey water fractional flow and its derivatives."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    mu_w, mu_o, dmu_w, dmu_o = cfg.viscosities(y)
    p = 2.0 / cfg.lambda_bc + 3.0
    q = 2.0 / cfg.lambda_bc + 1.0
    scale = 1.0 / (1.0 - cfg.s_wc)
    se_raw = (s - cfg.s_wc) * scale
    se = np.clip(se_raw, 0.0, 1.0)
    ds = np.where(se_raw < 0, 0.0, scale)

    krw = _pow(se, p)
    krw_e = p * _pow(se, p - 1)
    krw_ee = p * (p - 1) * _pow(se, p - 2)
    g, g_e, g_ee = (1 - se) ** 2, -2 * (1 - se), 2.0
    h, h_e, h_ee = 1 - _pow(se, q), -q * _pow(se, q - 1), -q * (q - 1) * _pow(se, q - 2)
    with np.errstate(invalid="ignore"):
        kro = g * h
        kro_e = g_e * h + g * h_e
        kro_ee = g_ee * h + 2 * g_e * h_e + g * h_ee

    mw, mw1, mw2 = krw / mu_w, krw_e * ds / mu_w, krw_ee * ds * ds / mu_w
    mo, mo1, mo2 = kro / mu_o, kro_e * ds / mu_o, kro_ee * ds * ds / mu_o
    tot = mw + mo
    if np.any(tot <= 0):
        raise ModelValidationError("relative_permeability", "total mobility vanished")
    tot1 = mw1 + mo1
    num1 = mw1 * mo - mw * mo1
    f = mw / tot
    with np.errstate(invalid="ignore"):
        f_s = num1 / tot ** 2
        f_ss = (mw2 * mo - mw * mo2) / tot ** 2 - 2 * tot1 * num1 / tot ** 3
    f_s = np.where(np.isfinite(f_s), f_s, 0.0)
    # y-dependence enters only through the viscosities
    fy_fac = f * (1 - f)
    f_y = fy_fac[..., None] * (-dmu_w / mu_w[..., None] + dmu_o / mu_o[..., None])
    return FluxEval(f, f_s, f_ss, f_y)


def _scan_grid():
    return np.arange(1, 1000) / 1000.0


def inflection_root(fss):
    """Unique sign change of a vectorised ``fss`` on (0, 1): grid scan then bisection."""
    grid = _scan_grid()
    vals = np.asarray(fss(grid), dtype=float)
    sg = np.sign(vals)
    nz = sg != 0
    idx = np.nonzero(sg[nz][:-1] * sg[nz][1:] < 0)[0]
    if idx.size != 1:
        raise AssumptionViolation(
            "inflection", f"f_ss changes sign {idx.size} times on (0,1); exactly one required")
    pts = grid[nz]
    lo, hi = pts[idx[0]], pts[idx[0] + 1]
    flo = vals[nz][idx[0]]

    def at(x):
        return float(np.asarray(fss(np.array([x])))[0])

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = at(mid)
        if fm == 0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return lo if abs(at(lo)) <= abs(at(hi)) else hi


def sstar(y, cfg):
    """Inflection point of f(., y)."""
    y = np.asarray(y, dtype=float)
    return inflection_root(lambda s: frac_flow(s, np.broadcast_to(y, (s.size, cfg.m)), cfg).f_ss)


def unit_speed_points(y, cfg):
    """The two roots of f_s = 1, one on each side of the inflection."""
    from scipy.optimize import brentq

    ss = sstar(y, cfg)

    def g(x):
        return float(frac_flow(x, y, cfg).f_s) - 1.0

    if g(ss) <= 0:
        raise AssumptionViolation("unit_speed", "f_s never exceeds 1, so f_s = 1 has no two roots")
    lo_end = cfg.s_wc
    a = brentq(g, lo_end, ss, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    b = brentq(g, ss, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return a, b


def accumulation_arr(s, y, cfg, c=None):
    c = cfg.coeffs(y) if c is None else c
    s = np.asarray(s, dtype=float)[..., None]
    return cfg.phi * (c.rho_w * s + c.rho_o * (1 - s)) + (1 - cfg.phi) * c.rho_r


def flux_hat_arr(s, y, cfg, c=None, f=None):
    c = cfg.coeffs(y) if c is None else c
    f = frac_flow(s, y, cfg).f if f is None else f
    f = np.asarray(f)[..., None]
    return c.rho_w * f + c.rho_o * (1 - f)


def accumulation(state, cfg):
    """G_j = phi rho_wj s + phi rho_oj (1-s) + (1-phi) rho_rj."""
    return accumulation_arr(state.s, state.yarr, cfg)


def flux(state, cfg):
    """Return (u F, F) where F_j = rho_wj f + rho_oj (1-f)."""
    fh = flux_hat_arr(state.s, state.yarr, cfg)
    return state.u * fh, fh


def jacobians(state, cfg):
    """Return (A, B) with A = d(uF)/dU and B = dG/dU, U = (s, y, u).

    A omits the u [rho] f_y term (y-dependent viscosity); see the README.
    """
    y = state.yarr
    c = cfg.coeffs(y)
    fe = frac_flow(state.s, y, cfg)
    f, f_s = float(fe.f), float(fe.f_s)
    s, u, phi = state.s, state.u, cfg.phi
    n1 = cfg.n + 1
    A = np.zeros((n1, n1))
    B = np.zeros((n1, n1))
    jump = c.jump
    B[:, 0] = phi * jump
    B[:, 1:-1] = phi * (c.d_rho_w * s + c.d_rho_o * (1 - s)) + (1 - phi) * c.d_rho_r
    A[:, 0] = u * jump * f_s
    A[:, 1:-1] = u * (c.d_rho_w * f + c.d_rho_o * (1 - f))
    A[:, -1] = c.rho_w * f + c.rho_o * (1 - f)
    return A, B


def check_state(state, cfg, tol=1e-12):
    if len(state.y) != cfg.m:
        raise ModelValidationError("state", f"expected {cfg.m} composition values")
    if not (-tol <= state.s <= 1 + tol):
        raise ModelValidationError("state", "saturation outside [0, 1]")
    if not cfg.in_box(state.y, tol):
        raise ModelValidationError("state", "composition outside the domain box")
    if not state.u > 0:
        raise ModelValidationError("state", "Darcy velocity must be positive")


def validate_model(cfg, rng=None):
    """Assumption-1 scan and derivative cross-checks (raises on failure)."""
    rng = np.random.default_rng(0) if rng is None else rng
    for yv in box_probe_points(cfg):
        fe0 = frac_flow(np.array([0.0, 1.0]), np.broadcast_to(yv, (2, cfg.m)), cfg)
        if abs(fe0.f[0]) > 1e-14 or abs(fe0.f[1] - 1) > 1e-14:
            raise AssumptionViolation("endpoints", "f(0) = 0 and f(1) = 1 required")
        grid = _scan_grid()
        fe = frac_flow(grid, np.broadcast_to(yv, (grid.size, cfg.m)), cfg)
        inner = grid > cfg.s_wc
        if np.any(fe.f_s[inner] <= 0):
            raise AssumptionViolation("monotone", "f_s must be positive on (s_wc, 1)")
        sstar(yv, cfg)
        unit_speed_points(yv, cfg)
    # analytic coefficient partials against central differences
    lo, hi = cfg.box[:, 0], cfg.box[:, 1]
    for _ in range(5):
        yv = lo + (hi - lo) * (0.1 + 0.8 * rng.random(cfg.m))
        c = cfg.coeffs(yv)
        for k in range(cfg.m):
            h = 1e-6 * max(1.0, abs(yv[k]))
            e = np.zeros(cfg.m)
            e[k] = h
            cp, cm = cfg.coeffs(yv + e), cfg.coeffs(yv - e)
            for name in ("rho_w", "rho_o", "rho_r"):
                fd = (getattr(cp, name) - getattr(cm, name)) / (2 * h)
                an = getattr(c, "d_" + name)[:, k]
                scale = max(1.0, np.max(np.abs(an)))
                if np.max(np.abs(fd - an)) > 1e-6 * scale:
                    raise ModelValidationError(name, "analytic partials disagree with finite differences")
    return cfg

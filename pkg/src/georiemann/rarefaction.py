"""Rarefaction curves with the velocity split off.

The (s, y) part of a right eigenvector field is integrated in arclength with
an embedded 4(5) Runge-Kutta pair; the Darcy velocity follows from
u = u0 exp(int g), g being the u-component of the eigenvector divided by u,
which does not depend on u. Integration stops at the first event: loss of
monotonicity of the speed (inflection), speed coincidence with another
family, the domain boundary, resonance s = Lambda or the surface f = s.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45
from scipy.optimize import brentq

from .eigen import COMPLEX, DEGEN_TOL, EPS_RES, EPS_SF, OK, family_names, fields
from .errors import NonHyperbolicRegion
from .model import PhaseState

EVENT_TOL = 1e-10


def _family_index(cfg, family):
    names = family_names(cfg)
    if family not in names:
        raise ValueError(f"unknown family {family!r}; expected one of {names}")
    return names.index(family) - 1  # -1 for saturation


class _Field:
    """Point evaluator of one family's unit tangent, speed and event values."""

    def __init__(self, cfg, family):
        self.cfg = cfg
        self.family = family
        self.k = _family_index(cfg, family)
        self.n = cfg.n
        self.names = family_names(cfg)

    def eval(self, x, level):
        x = np.asarray(x, dtype=float)
        return fields(np.array(x[0]), x[1:], np.array(1.0), self.cfg, level=level)

    def tangent(self, F):
        """Unit (s, y) tangent with canonical sign, and g = r_u/u."""
        if self.k < 0:
            t = np.zeros(self.n)
            t[0] = 1.0
            return t, 0.0
        r = F.r[:, self.k]
        return r[:-1].copy(), float(F.g_u[self.k])

    def speed(self, F):
        return float(F.lam_s) if self.k < 0 else float(F.lam[self.k])

    def dd(self, F):
        return float(F.dd_s) if self.k < 0 else float(F.dd[self.k])

    def degenerate(self, F):
        if self.k < 0:
            return False
        L = float(F.Lam[self.k])
        return abs(L) <= DEGEN_TOL or abs(L - 1) <= DEGEN_TOL

    def events(self, x, F, mono, stop_plane):
        """Event functions at x; a sign change ends the curve.

        ``mono`` is direction times the orientation of the canonical
        tangent, so mono * dd stays positive while the speed is monotone.
        """
        cfg = self.cfg
        ev = {}
        if not self.degenerate(F):
            ev["Inflection"] = mono * self.dd(F)
        lam = self.speed(F)
        others = [("s", float(F.lam_s))] + [(self.names[i + 1], float(F.lam[i]))
                                            for i in range(cfg.m) if F.status[i] == OK]
        for name, val in others:
            if name != self.family:
                ev[f"Coincidence({name})"] = lam - val
        lo, hi = cfg.box[:, 0], cfg.box[:, 1]
        width = hi - lo
        ev["Boundary"] = min(x[0], 1 - x[0], *((x[1:] - lo) / width), *((hi - x[1:]) / width))
        if self.k >= 0:
            ev["ResonanceSingular"] = float(x[0] - F.Lam[self.k])
            ev["CsSurface"] = float(x[0] - F.f)
        if stop_plane is not None:
            idx, val = stop_plane
            ev["Plane"] = x[idx] - val
        return ev


def _on_surface(key, val, speed):
    if key.startswith("Coincidence"):
        return abs(val) <= 1e-9 * max(1.0, abs(speed))
    if key in ("ResonanceSingular", "CsSurface"):
        return abs(val) <= EPS_RES
    return abs(val) <= EVENT_TOL


@dataclass
class RarefactionCurve:
    family: str
    tau: np.ndarray
    states: np.ndarray          # rows (s, y..., u) from the direct ODE for ln u
    lam: np.ndarray
    stop_reason: str
    orientation: int
    h_nodes: np.ndarray = None  # g along the curve at the samples
    h_mid: np.ndarray = None    # g at step midpoints (Simpson)
    steps: list = field(default_factory=list, repr=False)
    g_int: np.ndarray = None    # integral of g over each step (adaptive Simpson)

    @property
    def samples(self):
        return [(float(l), PhaseState.from_array(z), float(l)) for z, l in zip(self.states, self.lam)]

    @property
    def start(self):
        return PhaseState.from_array(self.states[0])

    @property
    def end(self):
        return PhaseState.from_array(self.states[-1])

    @property
    def length(self):
        return float(self.tau[-1])

    def state_at(self, t):
        """Dense (s, y, u) at arclength t."""
        t = float(np.clip(t, self.tau[0], self.tau[-1]))
        if len(self.steps) == 0:
            return self.states[0].copy()
        i = int(np.searchsorted(self.tau, t, side="right") - 1)
        i = min(max(i, 0), len(self.steps) - 1)
        z = self.steps[i](t)
        return np.concatenate([z[:-1], [np.exp(z[-1])]])


def _adaptive_simpson(g, a, b, ga, gm, gb, tol, depth=0):
    m = 0.5 * (a + b)
    gl, gr = g(0.5 * (a + m)), g(0.5 * (m + b))
    whole = (b - a) / 6 * (ga + 4 * gm + gb)
    left = (m - a) / 6 * (ga + 4 * gl + gm)
    right = (b - m) / 6 * (gm + 4 * gr + gb)
    err = left + right - whole
    if depth >= 40 or abs(err) <= 15 * tol:
        return left + right + err / 15
    return (_adaptive_simpson(g, a, m, ga, gl, gm, 0.5 * tol, depth + 1)
            + _adaptive_simpson(g, m, b, gm, gr, gb, 0.5 * tol, depth + 1))


def _orient_sign(t, ref):
    return -1.0 if float(np.dot(t, ref)) < 0 else 1.0


def integrate_rarefaction(U0, family, direction, cfg, *, tangent_hint=None, launch=False,
                          stop_plane=None, max_length=10.0, rtol=1e-9, atol=1e-12, max_step=0.02):
    """Integrate the rarefaction curve of ``family`` from U0.

    direction +1 follows increasing characteristic speed, -1 decreasing.
    For linearly degenerate fields the sense comes from ``tangent_hint``
    (an (s, y) vector); it also overrides the speed-based choice otherwise.
    With ``launch=True`` events already satisfied at U0 are disarmed until
    the curve leaves them, which allows starting on a bifurcation surface.
    ``stop_plane=(index, value)`` ends the curve where (s, y)[index] = value.
    """
    fe = _Field(cfg, family)
    direction = 1 if direction >= 0 else -1
    x0 = U0.sy
    F0 = fe.eval(x0, 2)
    if fe.k >= 0 and F0.status[fe.k] == COMPLEX:
        raise NonHyperbolicRegion(f"complex eigenvalues at {U0}")
    t0, g0 = fe.tangent(F0)
    if tangent_hint is not None:
        sign = _orient_sign(t0, np.asarray(tangent_hint, dtype=float))
    elif fe.degenerate(F0) or fe.dd(F0) == 0:
        sign = float(direction)
    else:
        sign = direction * (1.0 if fe.dd(F0) > 0 else -1.0)
    ref = {"t": sign * t0}

    def local(z):
        F = fe.eval(z[:-1], 2)
        t, g = fe.tangent(F)
        sg = _orient_sign(t, ref["t"])
        return F, t, sg, g

    def rhs(_t, z):
        F = fe.eval(z[:-1], 1)
        t, g = fe.tangent(F)
        sg = _orient_sign(t, ref["t"])
        return np.concatenate([sg * t, [sg * g]])

    ev_prev = fe.events(x0, F0, direction * sign, stop_plane)
    speed0 = fe.speed(F0)
    armed = {key: not _on_surface(key, val, speed0) for key, val in ev_prev.items()}
    on = [key for key, ok in armed.items() if not ok]
    if on and not launch:
        # a requested plane outranks the other surfaces through the same point
        key = "Plane" if "Plane" in on else on[0]
        z = np.concatenate([x0, [U0.u]])
        return RarefactionCurve(family, np.zeros(1), z[None, :], np.array([speed0 * U0.u]), key,
                                direction, np.array([sign * g0]), np.zeros(0), g_int=np.zeros(0))

    z0 = np.concatenate([x0, [np.log(U0.u)]])
    solver = RK45(rhs, 0.0, z0, float(max_length), rtol=rtol, atol=atol, max_step=max_step)
    taus, zs, lams, hs, hmid, steps, gint = [0.0], [z0.copy()], [speed0], [sign * g0], [], [], []
    reason = "MaxLength"

    def midpoint_g(dense, t):
        F = fe.eval(dense(t)[:-1], 1)
        tv, g = fe.tangent(F)
        return _orient_sign(tv, ref["t"]) * g

    def step_integral(dense, a, b, ga, gb):
        # g turns sharply where curves meet a coincidence, so refine per step
        gm = midpoint_g(dense, 0.5 * (a + b))
        val = _adaptive_simpson(lambda t: midpoint_g(dense, t), a, b, ga, gm, gb, 1e-12)
        return gm, val

    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            reason = f"IntegratorFailure({msg})"
            break
        ta, tb = solver.t_old, solver.t
        zb = solver.y.copy()
        dense = solver.dense_output()
        Fb, tvb, sgb, gb = local(zb)
        evb = fe.events(zb[:-1], Fb, direction * sgb, stop_plane)
        hit = None
        for key, vb in evb.items():
            va = ev_prev.get(key)
            if va is None:
                continue
            if not armed.get(key, True):
                if not _on_surface(key, vb, fe.speed(Fb)):
                    armed[key] = True
                continue
            if va == 0 or np.sign(va) == np.sign(vb):
                continue

            def gfun(t, key=key):
                z = dense(t)
                F, _, sg, _ = local(z)
                return fe.events(z[:-1], F, direction * sg, stop_plane)[key]

            try:
                te = brentq(gfun, ta, tb, xtol=EVENT_TOL, rtol=4 * np.finfo(float).eps)
            except ValueError:
                continue
            if hit is None or te < hit[0]:
                hit = (te, key)
        if hit is not None:
            te, reason = hit
            ze = dense(te)
            Fe, _, sge, ge = local(ze)
            steps.append(dense)
            taus.append(te)
            zs.append(ze)
            lams.append(fe.speed(Fe))
            hs.append(sge * ge)
            gm, gi = step_integral(dense, ta, te, hs[-2], hs[-1])
            hmid.append(gm)
            gint.append(gi)
            break
        steps.append(dense)
        gm, gi = step_integral(dense, ta, tb, hs[-1], sgb * gb)
        hmid.append(gm)
        gint.append(gi)
        taus.append(tb)
        zs.append(zb)
        lams.append(fe.speed(Fb))
        hs.append(sgb * gb)
        ev_prev.update(evb)
        ref["t"] = sgb * tvb

    zs = np.array(zs)
    states = np.concatenate([zs[:, :-1], np.exp(zs[:, -1:])], axis=1)
    return RarefactionCurve(family, np.array(taus), states, np.array(lams) * states[:, -1], reason,
                            direction, np.array(hs), np.array(hmid), steps, np.array(gint))


def u_along(curve, u0=None):
    """u at every sample from u0 * exp(int g), Simpson's rule on each integrator step.

    Steps are refined adaptively during integration when ``g_int`` is
    present; otherwise one Simpson panel per step is used.
    """
    u0 = float(curve.states[0, -1]) if u0 is None else float(u0)
    if curve.tau.size <= 1:
        return np.full(curve.tau.size, u0)
    if curve.g_int is not None and curve.g_int.size == curve.tau.size - 1:
        incr = curve.g_int
    else:
        dt = np.diff(curve.tau)
        incr = dt / 6.0 * (curve.h_nodes[:-1] + 4 * curve.h_mid + curve.h_nodes[1:])
    return u0 * np.exp(np.concatenate([[0.0], np.cumsum(incr)]))


def directional_derivative(state, family, cfg):
    """grad(lambda) . r for the family, r with unit (s, y) part, speed-increasing sense.

    For chemical families this is evaluated from the inflection factorisation
    (1/phi) (s - f)/(s - Lambda)^2 (lambda_s - lambda) H.
    """
    k = _family_index(cfg, family)
    F = fields(np.array(state.s), state.yarr, np.array(state.u), cfg, level=2, orient=True)
    if k < 0:
        return float(F.dd_s)
    if abs(state.s - float(F.Lam[k])) <= EPS_RES:
        return float("nan")
    gap = state.s - float(F.f)
    if abs(gap) <= EPS_SF:
        return 0.0
    sm = state.s - float(F.Lam[k])
    return float(gap / (cfg.phi * sm * sm) * (float(F.lam_s) - float(F.lam[k])) * float(F.H[k]))

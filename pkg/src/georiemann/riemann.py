"""Riemann solutions assembled from elementary waves.

Three constructions are available. When L and R share the composition the
problem is the scalar Buckley-Leverett problem at that composition and is
solved through the concave/convex envelope of f. Otherwise L is first
connected by a saturation rarefaction to the state A where lambda_s meets
the slowest chemical speed, and A is continued along that chemical family:

* shared plane: R lies in a level set of the coordinates left invariant by
  the chemical rarefaction; the rarefaction is stopped on the level of R and
  a saturation wave finishes the sequence;
* cross plane: contacts of the other chemical family are launched from the
  rarefaction onto the level of R (the surface Upsilon); the launch point whose
  contact lands on the composition of R is found by a 1-D root search, and a
  saturation wave again finishes the sequence.

The velocity u is given on the left and propagated through every wave.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .eigen import eigen_ordering, family_names, fields
from .errors import NoSequenceFound
from .hugoniot import lax_classify, rh_residual
from .model import PhaseState, frac_flow, sstar
from .rarefaction import integrate_rarefaction

SLACK = 1e-9        # relative slack on speed ordering and characteristic equalities
ROOT_TOL = 1e-8     # launch-parameter root tolerance on the y offset
SAME_TOL = 1e-12


def _speed(U, family, cfg):
    F = fields(np.array(U.s), U.yarr, np.array(U.u), cfg, level=0)
    if family == "s":
        return float(F.lam_s)
    return float(F.lam[family_names(cfg).index(family) - 1])


@dataclass
class WaveSegment:
    kind: str                   # "Rarefaction", "Shock", "Contact" or "ConstantState"
    family: str                 # "s", "L1", ... or "" for a constant state
    left_state: PhaseState
    right_state: PhaseState
    speed_range: tuple
    payload: dict = field(default_factory=dict, repr=False)

    @property
    def label(self):
        if self.kind == "ConstantState":
            return "ConstantState"
        return f"{self.kind}({self.family})"

    @property
    def short(self):
        """Wave-curve notation: R_s, H_s, R_L1, C_L2 ..."""
        return {"Rarefaction": "R", "Shock": "H", "Contact": "C"}.get(self.kind, "U") + "_" + self.family

    def state_at_speed(self, xi, cfg):
        """State inside a rarefaction fan with characteristic speed xi."""
        if self.kind != "Rarefaction":
            return self.left_state
        lo, hi = self.speed_range
        xi = min(max(xi, lo), hi)
        if self.family == "s":
            s0, s1 = self.payload["s_range"]
            y, u = self.left_state.yarr, self.left_state.u
            fac = u / cfg.phi

            def g(s):
                return fac * float(frac_flow(s, y, cfg).f_s) - xi
            ga, gb = g(s0), g(s1)
            if ga == 0 or s0 == s1:
                return self.left_state
            if gb == 0:
                return self.right_state
            s = brentq(g, min(s0, s1), max(s0, s1), xtol=1e-15, rtol=4 * np.finfo(float).eps)
            return PhaseState(s, self.left_state.y, u)
        curve, t_end = self.payload["curve"], self.payload["t_end"]
        c = self.payload.get("u_scale", 1.0)

        def at(t):
            z = curve.state_at(t)
            z[-1] *= c
            return PhaseState.from_array(z)

        keep = curve.tau < t_end
        tt = np.append(curve.tau[keep], t_end)
        ll = np.append(c * curve.lam[keep], self.speed_range[1])
        j = int(np.clip(np.searchsorted(ll, xi), 1, len(ll) - 1))

        def g(t):
            return _speed(at(t), self.family, cfg) - xi
        a, b = tt[j - 1], tt[j]
        ga, gb = g(a), g(b)
        if ga == 0:
            return at(a)
        if ga * gb > 0:
            t = a if abs(ga) < abs(gb) else b
        else:
            t = brentq(g, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        return at(t)


@dataclass
class RiemannSolution:
    segments: list
    states: list                # intermediate constant states, left to right
    compatible: bool
    report: dict
    u_R: float
    template: str
    cfg: object = field(default=None, repr=False)

    @property
    def sequence(self):
        return [s.short for s in self.segments if s.kind != "ConstantState"]

    @property
    def left(self):
        return self.segments[0].left_state

    @property
    def right(self):
        return self.segments[-1].right_state


# ---------------------------------------------------------------- scalar waves

def chord_tangency(s_a, y, cfg):
    """Point t where the chord from (s_a, f(s_a)) touches f tangentially.

    t lies in the concave part when s_a is left of the inflection and in the
    convex part otherwise.
    """
    y = np.asarray(y, dtype=float)
    fa = float(frac_flow(s_a, y, cfg).f)
    ss = sstar(y, cfg)

    def h(t):
        fe = frac_flow(t, y, cfg)
        return float(fe.f_s) * (t - s_a) - (float(fe.f) - fa)

    if s_a < ss:
        lo, hi = ss, 1.0
    else:
        lo, hi = cfg.s_wc, ss
    if h(lo) * h(hi) > 0:
        return hi if s_a < ss else lo
    return brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _bl_rarefaction(s0, s1, y, u, cfg):
    fe = frac_flow(np.array([s0, s1]), y, cfg)
    sp = u / cfg.phi * fe.f_s
    return WaveSegment("Rarefaction", "s", PhaseState(s0, y, u), PhaseState(s1, y, u),
                       (float(sp[0]), float(sp[1])), {"s_range": (s0, s1)})


def _bl_shock(s0, s1, y, u, cfg):
    fe = frac_flow(np.array([s0, s1]), y, cfg)
    sigma = u / cfg.phi * float((fe.f[1] - fe.f[0]) / (s1 - s0))
    return WaveSegment("Shock", "s", PhaseState(s0, y, u), PhaseState(s1, y, u), (sigma, sigma),
                       {"sigma": sigma, "u_plus": u})


def scalar_waves(s_L, s_R, y, u, cfg, tol=1e-9):
    """Entropy solution of the Buckley-Leverett problem at fixed y, u.

    For s_L > s_R the upper concave envelope of f over [s_R, s_L] is used,
    otherwise the lower convex envelope; with one inflection each envelope
    is a rarefaction, a shock, or a rarefaction ending in a shock that is
    characteristic on its left.
    """
    y = tuple(np.atleast_1d(np.asarray(y, dtype=float)))
    if abs(s_L - s_R) <= SAME_TOL:
        return []
    ss = sstar(np.array(y), cfg)
    if s_L > s_R:
        if s_R >= ss:
            return [_bl_rarefaction(s_L, s_R, y, u, cfg)]
        if s_L <= ss:
            return [_bl_shock(s_L, s_R, y, u, cfg)]
        t = chord_tangency(s_R, y, cfg)
        if t >= s_L - tol:
            return [_bl_shock(s_L, s_R, y, u, cfg)]
    else:
        if s_R <= ss:
            return [_bl_rarefaction(s_L, s_R, y, u, cfg)]
        if s_L >= ss:
            return [_bl_shock(s_L, s_R, y, u, cfg)]
        t = chord_tangency(s_R, y, cfg)
        if t <= s_L + tol:
            return [_bl_shock(s_L, s_R, y, u, cfg)]
    return [_bl_rarefaction(s_L, t, y, u, cfg), _bl_shock(t, s_R, y, u, cfg)]


@dataclass
class BackwardShock:
    s: np.ndarray               # candidate left saturations on the line y = y_R
    sigma: np.ndarray
    char_left: np.ndarray       # sigma = lambda_s(left) within SLACK
    char_right: np.ndarray
    admissible: np.ndarray
    interval: tuple             # closed admissible range of left saturations
    y: tuple
    s_R: float


def backward_bl_shock(Rproj, cfg, u=1.0, num=401):
    """Saturation shocks (s, y_R) -> R on the composition line of R.

    A left state is admissible when the shock alone solves the scalar
    problem, which by the envelope construction means s lies between s_R
    and the tangency point of the chord from s_R.
    """
    s_R, y_R = float(Rproj[0]), tuple(float(v) for v in Rproj[1:])
    y = np.array(y_R)
    t = chord_tangency(s_R, y, cfg)
    interval = (min(s_R, t), max(s_R, t))
    s = np.linspace(cfg.s_wc, 1.0, num)
    s = s[np.abs(s - s_R) > SAME_TOL]
    fe = frac_flow(s, np.broadcast_to(y, (s.size, cfg.m)), cfg)
    fR = frac_flow(s_R, y, cfg)
    fac = u / cfg.phi
    sigma = fac * (fe.f - float(fR.f)) / (s - s_R)
    lam_l = fac * fe.f_s
    lam_r = fac * float(fR.f_s)
    sc = SLACK * np.maximum(np.abs(sigma), 1e-300)
    adm = (s >= interval[0]) & (s <= interval[1])
    return BackwardShock(s, sigma, np.abs(sigma - lam_l) <= sc, np.abs(sigma - lam_r) <= sc,
                         adm, interval, y_R, s_R)


# ------------------------------------------------------------------ Upsilon

@dataclass
class UpsilonSurface:
    launch_t: np.ndarray        # arclength of each launch point on the base curve
    launch: np.ndarray          # rows (s, y, u) of the launch points
    curves: list
    reached: np.ndarray         # the launched contact ended on the target plane
    ends: np.ndarray            # end rows (s, y, u)
    stop_reasons: list
    plane: tuple

    @property
    def phi_c(self):
        """Intersection polyline with the target plane, ordered by launch index."""
        return self.ends[self.reached]


def _launch(base, t, family, plane, cfg, max_step):
    B = PhaseState.from_array(base.state_at(t))
    idx, val = plane
    hint = np.zeros(cfg.n)
    hint[idx] = 1.0 if val >= B.sy[idx] else -1.0
    # tight tolerances keep the contact speed constant to 1e-9 over long launches
    return integrate_rarefaction(B, family, +1, cfg, tangent_hint=hint, stop_plane=plane,
                                 max_step=max_step, rtol=1e-10, atol=1e-12)


def build_upsilon_surface(base, target_plane, cfg, N=64, family=None, max_step=0.2):
    """Launch contacts from N points of ``base`` and clip them at a plane.

    ``target_plane`` is (index into (s, y...), value); ``family`` defaults
    to the chemical family other than the base family when n = 3.
    """
    if family is None:
        others = [f for f in family_names(cfg)[1:] if f != base.family]
        family = others[0]
    ts = np.linspace(base.tau[0], base.tau[-1], int(N))
    curves, reached, ends, reasons, pts = [], [], [], [], []
    for t in ts:
        c = _launch(base, t, family, target_plane, cfg, max_step)
        curves.append(c)
        pts.append(c.states[0])
        ends.append(c.states[-1])
        reasons.append(c.stop_reason)
        reached.append(c.stop_reason == "Plane")
    return UpsilonSurface(ts, np.array(pts), curves, np.array(reached), np.array(ends), reasons,
                          tuple(target_plane))


# ------------------------------------------------------------------- solver

def _chem_segment(kind, curve, cfg, t_end=None):
    t_end = curve.length if t_end is None else t_end
    left = PhaseState.from_array(curve.states[0])
    right = PhaseState.from_array(curve.state_at(t_end))
    lo, hi = _speed(left, curve.family, cfg), _speed(right, curve.family, cfg)
    if kind == "Contact":
        sig = lo
        return WaveSegment(kind, curve.family, left, right, (sig, sig),
                           {"curve": curve, "t_end": t_end, "lambda_spread": abs(hi - lo)})
    return WaveSegment(kind, curve.family, left, right, (lo, hi), {"curve": curve, "t_end": t_end})


def _invariant_coords(U, family, cfg, tol=1e-8):
    """Indices (into (s, y)) of the y-coordinates fixed along the family's curves."""
    F = fields(np.array(U.s), U.yarr, np.array(1.0), cfg, level=1)
    k = family_names(cfg).index(family) - 1
    r = F.r[1:cfg.n, k]
    scale = float(np.max(np.abs(r)))
    return [i + 1 for i in range(cfg.m) if abs(r[i]) <= tol * scale]


def _finish(segments, cfg, template):
    states = [seg.left_state for seg in segments[1:]]
    sol = RiemannSolution(segments, states, False, {}, segments[-1].right_state.u, template, cfg)
    sol.report = check_compatibility(sol)
    sol.compatible = sol.report["compatible"]
    return sol


def _trace(msg, **kw):
    return {"message": msg, **{k: (v if not isinstance(v, np.ndarray) else v.tolist()) for k, v in kw.items()}}


def solve_riemann(L, Rproj, cfg, N=24):
    """Wave sequence from L (with u) to R = (s_R, y_R); u_R is reconstructed.

    ``N`` is the number of contacts launched for the cross-plane search
    before the launch parameter is refined by root finding.
    """
    Rproj = np.asarray(Rproj, dtype=float)
    s_R, y_R = float(Rproj[0]), tuple(Rproj[1:])
    if np.max(np.abs(L.sy - Rproj)) <= SAME_TOL:
        seg = WaveSegment("ConstantState", "", L, L, (0.0, 0.0))
        return _finish([seg], cfg, "constant")
    if np.max(np.abs(L.yarr - np.array(y_R))) <= SAME_TOL:
        return _finish(scalar_waves(L.s, s_R, L.y, L.u, cfg), cfg, "scalar")

    order, ties, label, speeds = eigen_ordering(L, cfg)
    trace = [_trace("ordering at L", order=order, label=label)]
    chem = [f for f in order if f != "s"]
    if cfg.n != 3 or len(chem) != 2:
        raise NoSequenceFound("templates cover n = 3 with two real chemical families", trace)
    slow = chem[0]
    if order.index("s") != 0 or speeds["s"] >= speeds[slow]:
        raise NoSequenceFound("templates need lambda_s(L) below every chemical speed", trace)

    # saturation rarefaction up to the coincidence with the slowest chemical family
    rs = integrate_rarefaction(L, "s", +1, cfg)
    trace.append(_trace("R_s from L", stop=rs.stop_reason, end=rs.end.array))
    if rs.stop_reason != f"Coincidence({slow})":
        raise NoSequenceFound(f"saturation rarefaction from L ended by {rs.stop_reason}", trace)
    A = rs.end
    seg_s = _bl_rarefaction(L.s, A.s, L.y, L.u, cfg)
    seg_s.right_state = A

    hint = np.zeros(cfg.n)
    hint[0] = np.sign(A.s - L.s)
    inv = _invariant_coords(L, slow, cfg)
    if len(inv) != 1:
        raise NoSequenceFound(f"{slow} rarefaction does not keep exactly one coordinate fixed", trace)
    j_inv = inv[0]
    j_var = [i for i in range(1, cfg.n) if i != j_inv][0]
    shared = abs(L.sy[j_inv] - Rproj[j_inv]) <= SAME_TOL

    if shared:
        r1 = integrate_rarefaction(A, slow, +1, cfg, tangent_hint=hint, launch=True,
                                   stop_plane=(j_var, Rproj[j_var]))
        trace.append(_trace(f"R_{slow} from A", stop=r1.stop_reason, end=r1.end.array))
        if r1.stop_reason != "Plane":
            raise NoSequenceFound(f"{slow} rarefaction ended by {r1.stop_reason} before the level of R",
                                  trace)
        seg_1 = _chem_segment("Rarefaction", r1, cfg)
        B = seg_1.right_state
        B = PhaseState(B.s, tuple(Rproj[1:]), B.u)  # snap the plane coordinate
        seg_1.right_state = B
        tail = scalar_waves(B.s, s_R, B.y, B.u, cfg)
        return _finish([seg_s, seg_1] + tail, cfg, "shared-plane")

    r1 = integrate_rarefaction(A, slow, +1, cfg, tangent_hint=hint, launch=True)
    trace.append(_trace(f"R_{slow} from A", stop=r1.stop_reason, end=r1.end.array))
    if r1.length <= 0:
        raise NoSequenceFound(f"{slow} rarefaction from A has zero length ({r1.stop_reason})", trace)
    contact = chem[1]
    plane = (j_inv, float(Rproj[j_inv]))
    ups = build_upsilon_surface(r1, plane, cfg, N=N, family=contact)
    off = np.where(ups.reached, ups.ends[:, j_var] - Rproj[j_var], np.nan)
    trace.append(_trace("Upsilon offsets", t=ups.launch_t, offset=off, reasons=ups.stop_reasons))
    hits = [i for i in range(len(off) - 1)
            if np.isfinite(off[i]) and np.isfinite(off[i + 1]) and off[i] * off[i + 1] <= 0]
    if not hits:
        raise NoSequenceFound("the level curve of R does not meet the Upsilon surface", trace)

    def offset(t):
        c = _launch(r1, t, contact, plane, cfg, 0.2)
        if c.stop_reason != "Plane":
            return np.nan
        return c.states[-1, j_var] - Rproj[j_var]

    i = hits[0]
    ta, tb = ups.launch_t[i], ups.launch_t[i + 1]
    if off[i] == 0:
        tB = ta
    elif off[i + 1] == 0:
        tB = tb
    else:
        tB = brentq(offset, ta, tb, xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps)
    seg_1 = _chem_segment("Rarefaction", r1, cfg, t_end=tB)
    cc = _launch(r1, tB, contact, plane, cfg, 0.2)
    seg_c = _chem_segment("Contact", cc, cfg)
    C = seg_c.right_state
    C = PhaseState(C.s, tuple(Rproj[1:]), C.u)
    seg_c.right_state = C
    seg_1.right_state = seg_c.left_state
    tail = scalar_waves(C.s, s_R, C.y, C.u, cfg)
    return _finish([seg_s, seg_1, seg_c] + tail, cfg, "cross-plane")


def cross_plane_point(L, y_R, cfg, N=24):
    """The state C on the composition of R reached by the cross-plane construction.

    It does not depend on s_R, so it can be used to choose R.
    """
    probe = solve_riemann(L, (0.5, *y_R), cfg, N=N)
    if probe.template != "cross-plane":
        raise NoSequenceFound("data do not use the cross-plane construction", [])
    return [seg for seg in probe.segments if seg.kind == "Contact"][0].right_state


def with_right_velocity(sol, u_R):
    """The same sequence with u prescribed on the right instead of the left.

    Every velocity relation is homogeneous of degree one in u, so all
    states and speeds scale by u_R / u_R(sol).
    """
    c = float(u_R) / sol.u_R

    def sc(U):
        return U.with_u(U.u * c)

    segs = []
    for seg in sol.segments:
        pay = dict(seg.payload)
        if "sigma" in pay:
            pay["sigma"] *= c
            pay["u_plus"] *= c
        if "curve" in pay:
            pay["u_scale"] = pay.get("u_scale", 1.0) * c
        segs.append(WaveSegment(seg.kind, seg.family, sc(seg.left_state), sc(seg.right_state),
                                (seg.speed_range[0] * c, seg.speed_range[1] * c), pay))
    return _finish(segs, sol.cfg, sol.template)


# -------------------------------------------------------------- diagnostics

def check_compatibility(sol):
    """Speed ordering, state continuity, velocity propagation and shock labels."""
    cfg = sol.cfg
    segs = sol.segments
    junctions, issues = [], []
    for a, b in zip(segs[:-1], segs[1:]):
        va, vb = a.speed_range[1], b.speed_range[0]
        ok = vb >= va - SLACK * max(abs(va), abs(vb), 1e-300)
        gap = float(np.max(np.abs(a.right_state.array - b.left_state.array)))
        char = abs(va - vb) <= SLACK * max(abs(va), abs(vb), 1e-300)
        junctions.append({"pair": f"{a.short} {b.short}", "left_speed": va, "right_speed": vb,
                          "ordered": bool(ok), "characteristic": bool(char), "state_gap": gap})
        if not ok:
            issues.append(f"speed decreases at {a.short} {b.short}")
        if gap > 1e-12 * max(1.0, float(np.max(np.abs(a.right_state.array)))):
            issues.append(f"state jump {gap:.3g} at {a.short} {b.short}")
    shocks, u_ok = [], True
    for seg in segs:
        if seg.left_state.u <= 0 or seg.right_state.u <= 0:
            u_ok = False
            issues.append(f"non-positive u in {seg.short}")
        if seg.kind == "Rarefaction" and seg.speed_range[0] > seg.speed_range[1] * (1 + SLACK) + SLACK:
            issues.append(f"speed decreases inside {seg.short}")
        if seg.kind == "Shock":
            sigma = seg.speed_range[0]
            lab = lax_classify(seg.left_state, seg.right_state, sigma, cfg)
            res = rh_residual(seg.left_state, seg.right_state, sigma, cfg)
            adm = lab["label"] != "Inadmissible"
            shocks.append({"wave": seg.short, "sigma": sigma, "label": lab["label"], "rh_residual": res,
                           "char_left": lab["char_left"], "char_right": lab["char_right"]})
            if res > 1e-8:
                u_ok = False
                issues.append(f"Rankine-Hugoniot residual {res:.3g} in {seg.short}")
            if not adm:
                issues.append(f"inadmissible shock {seg.short}")
        if seg.kind == "Contact":
            spread = seg.payload.get("lambda_spread", 0.0)
            if spread > SLACK * max(abs(seg.speed_range[0]), 1.0):
                issues.append(f"contact speed varies by {spread:.3g}")
    return {"compatible": not issues, "junctions": junctions, "shocks": shocks, "u_positive": u_ok,
            "issues": issues}


def _bl_invert(seg, xi, cfg, iters=100):
    """Vectorised bisection for (u/phi) f_s(s) = xi on the saturation range of a BL fan."""
    s0, s1 = seg.payload["s_range"]
    y, u = seg.left_state.yarr, seg.left_state.u
    yb = np.broadcast_to(y, (xi.size, y.size))
    a, b = np.full(xi.size, s0), np.full(xi.size, s1)
    ga = u / cfg.phi * frac_flow(a, yb, cfg).f_s - xi
    for _ in range(iters):
        c = 0.5 * (a + b)
        gc = u / cfg.phi * frac_flow(c, yb, cfg).f_s - xi
        same = np.sign(gc) == np.sign(ga)
        a, ga = np.where(same, c, a), np.where(same, gc, ga)
        b = np.where(same, b, c)
        if np.all(np.abs(b - a) <= 1e-15):
            break
    return 0.5 * (a + b)


def evaluate_profile(sol, xi_list):
    """Rows (s, y..., u) of the self-similar solution at the given x/t."""
    cfg = sol.cfg
    xi = np.atleast_1d(np.asarray(xi_list, dtype=float))
    out = np.empty((xi.size, cfg.n + 1))
    out[:] = sol.left.array
    waves = [s for s in sol.segments if s.kind != "ConstantState"]
    for seg in waves:
        lo, hi = seg.speed_range
        out[xi >= hi] = seg.right_state.array
        if seg.kind == "Rarefaction":
            inside = np.nonzero((xi >= lo) & (xi < hi))[0]
            if inside.size == 0:
                continue
            if seg.family == "s":
                out[inside, 0] = _bl_invert(seg, xi[inside], cfg)
                out[inside, 1:] = seg.left_state.array[1:]
            else:
                for q in inside:
                    out[q] = seg.state_at_speed(xi[q], cfg).array
    return out

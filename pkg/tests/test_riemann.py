import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from georiemann import (PhaseState, backward_bl_shock, build_upsilon_surface, check_compatibility,
                        evaluate_profile, frac_flow, integrate_rarefaction, solve_riemann, sstar)
from georiemann.errors import NoSequenceFound
from georiemann.riemann import RiemannSolution, scalar_waves, with_right_velocity
from georiemann.verify import scalar_hull_waves

from conftest import LEFT
from oracles import hausdorff, speed

Y0 = (0.2, 3.0)
A = PhaseState(0.7446363059752384, (0.03, 2.74), 1.0)
FAMILY_INDEX = {"s": 0, "L1": 1, "L2": 2}


@pytest.fixture(scope="module")
def base_curve(cfg):
    return integrate_rarefaction(A, "L1", +1, cfg, launch=True)


def _non_characteristic(sol):
    return sum(1 for j in sol.report["junctions"] if not j["characteristic"])


def test_equal_states_give_constant(cfg):
    U = PhaseState(0.4, Y0, 1.2)
    sol = solve_riemann(U, (0.4, *Y0), cfg)
    assert [s.kind for s in sol.segments] == ["ConstantState"]
    assert sol.compatible and sol.u_R == 1.2


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
@settings(max_examples=25, deadline=None)
def test_fixed_composition_matches_hull_oracle(cfg, s_L, s_R):
    if abs(s_L - s_R) < 1e-3:
        return
    sol = solve_riemann(PhaseState(s_L, Y0, 1.0), (s_R, *Y0), cfg)
    ref = scalar_hull_waves(s_L, s_R, Y0, 1.0, cfg)
    assert sol.template == "scalar" and sol.compatible
    got = [(seg.kind, seg.left_state.s, seg.right_state.s, seg.speed_range) for seg in sol.segments]
    assert [g[0] for g in got] == [w.kind for w in ref]
    for g, w in zip(got, ref):
        assert_allclose([g[1], g[2]], [w.s_left, w.s_right], atol=1e-6)
        assert_allclose(g[3], w.speeds, rtol=1e-6)


def test_cross_plane_replica(cfg, cross_solution):
    sol = cross_solution
    assert sol.template == "cross-plane"
    assert sol.sequence == ["R_s", "R_L1", "C_L2", "H_s"]
    assert sol.compatible, sol.report["issues"]
    assert _non_characteristic(sol) == 2
    C = sol.segments[-1].left_state
    assert C.y == (0.3, 3.9)
    shock = sol.report["shocks"][0]
    assert shock["char_left"] == ["s"]
    lam_C = speed(C.array, 0, cfg)
    assert shock["sigma"] == pytest.approx(lam_C, rel=1e-9)
    contact = sol.segments[2]
    assert contact.payload["lambda_spread"] <= 1e-9 * contact.speed_range[0]


def test_shared_plane_replica(cfg, shared_solution):
    sol = shared_solution
    assert sol.template == "shared-plane"
    assert sol.sequence == ["R_s", "R_L1", "H_s"]
    assert sol.compatible
    B = sol.segments[-1].left_state
    shock = sol.report["shocks"][0]
    assert shock["sigma"] == pytest.approx(speed(B.array, 0, cfg), rel=1e-9)
    assert B.y == sol.right.y


@pytest.mark.parametrize("which", ["cross_solution", "shared_solution"])
def test_solution_invariants(which, request, cfg):
    sol = request.getfixturevalue(which)
    assert sol.left == LEFT
    assert all(seg.left_state.u > 0 and seg.right_state.u > 0 for seg in sol.segments)
    for a, b in zip(sol.segments[:-1], sol.segments[1:]):
        assert a.right_state == b.left_state
        assert b.speed_range[0] >= a.speed_range[1] * (1 - 1e-9)
    for seg in sol.segments:
        assert seg.speed_range[0] <= seg.speed_range[1]
    # the saturation rarefaction keeps y and u
    first = sol.segments[0]
    assert first.right_state.y == LEFT.y and first.right_state.u == LEFT.u


def test_profile_outside_waves(cfg, cross_solution):
    sol = cross_solution
    lo, hi = sol.segments[0].speed_range[0], sol.segments[-1].speed_range[1]
    prof = evaluate_profile(sol, [lo - 1.0, hi + 1.0])
    assert_allclose(prof[0], LEFT.array, rtol=0)
    assert_allclose(prof[1], sol.right.array, rtol=0)
    assert prof[1, -1] == pytest.approx(sol.u_R)


@pytest.mark.parametrize("index", [0, 1])
def test_profile_self_similar_inside_fans(cfg, cross_solution, index):
    seg = cross_solution.segments[index]
    lo, hi = seg.speed_range
    xi = np.linspace(lo, hi, 12)[1:-1]
    prof = evaluate_profile(cross_solution, xi)
    for x, row in zip(xi, prof):
        assert speed(row, FAMILY_INDEX[seg.family], cfg) == pytest.approx(x, rel=1e-6)


def test_profile_constant_between_waves(cfg, cross_solution):
    segs = cross_solution.segments
    xi = 0.5 * (segs[1].speed_range[1] + segs[2].speed_range[0])
    assert_allclose(evaluate_profile(cross_solution, [xi])[0], segs[2].left_state.array)


def test_right_velocity_prescribed(cfg, shared_solution):
    sol = with_right_velocity(shared_solution, 1.0)
    assert sol.compatible
    assert sol.u_R == pytest.approx(1.0, rel=1e-15)
    assert sol.left.u == pytest.approx(1.0 / shared_solution.u_R, rel=1e-12)
    assert_allclose([s.speed_range[1] for s in sol.segments],
                    [s.speed_range[1] / shared_solution.u_R for s in shared_solution.segments], rtol=1e-12)


def test_single_rarefaction_compatible(cfg):
    sol = solve_riemann(PhaseState(0.1, Y0), (0.3, *Y0), cfg)
    assert sol.sequence == ["R_s"] and check_compatibility(sol)["compatible"]


def test_swapped_segments_flagged(cfg):
    sol = solve_riemann(PhaseState(0.9, Y0), (0.1, *Y0), cfg)
    assert sol.sequence == ["R_s", "H_s"]
    swapped = RiemannSolution(sol.segments[::-1], [], True, {}, sol.u_R, sol.template, cfg)
    rep = check_compatibility(swapped)
    assert not rep["compatible"]
    assert "speed decreases at H_s R_s" in rep["issues"]
    assert not rep["junctions"][0]["ordered"]


def test_outside_templates_reported(cfg):
    with pytest.raises(NoSequenceFound) as err:
        solve_riemann(PhaseState(0.3, Y0, 1.0), (0.9, 0.1, 3.5), cfg)
    assert "lambda_s" in str(err.value)


def test_backward_shock_excludes_right_state(cfg):
    bs = backward_bl_shock((0.1, *Y0), cfg)
    assert np.all(np.abs(bs.s - 0.1) > 0) and np.all(np.isfinite(bs.sigma))


@pytest.mark.parametrize("s_R", [0.05, 0.2, 0.8, 0.95])
def test_backward_shock_interval_matches_hull(cfg, s_R):
    bs = backward_bl_shock((s_R, *Y0), cfg)
    far = 1.0 if s_R < sstar(Y0, cfg) else 0.0
    ref = scalar_hull_waves(far, s_R, Y0, 1.0, cfg)
    tangent = [w for w in ref if w.kind == "Shock"][0].s_left
    end = bs.interval[1] if far == 1.0 else bs.interval[0]
    assert end == pytest.approx(tangent, abs=1e-8)


def test_backward_shock_speed_monotone(cfg):
    bs = backward_bl_shock((0.1, *Y0), cfg, num=801)
    s, sig = bs.s[bs.admissible], bs.sigma[bs.admissible]
    assert np.all(np.diff(sig) > 0)
    # beyond the tangency the chord slope falls again, since f is concave there
    beyond = (bs.s > bs.interval[1]) & (bs.s < 1.0)
    assert np.all(np.diff(bs.sigma[beyond]) < 0)
    assert np.all(frac_flow(bs.s[beyond], np.broadcast_to(Y0, (beyond.sum(), 2)), cfg).f_ss < 0)


def test_scalar_waves_empty_for_equal_states(cfg):
    assert scalar_waves(0.3, 0.3, Y0, 1.0, cfg) == []


def test_upsilon_plane_through_base(cfg, base_curve):
    ups = build_upsilon_surface(base_curve, (1, 0.03), cfg, N=5)
    assert np.all(ups.reached)
    assert_allclose(ups.phi_c, ups.launch, atol=1e-15)


@pytest.fixture(scope="module")
def upsilon_pair(cfg, base_curve):
    coarse = build_upsilon_surface(base_curve, (1, 0.3), cfg, N=8)
    fine = build_upsilon_surface(base_curve, (1, 0.3), cfg, N=15)
    return coarse, fine


def test_upsilon_contacts_keep_speed(upsilon_pair):
    for c in upsilon_pair[1].curves:
        assert np.ptp(c.lam) <= 1e-9 * abs(c.lam[0])


def _first_run(ups):
    # launches past the first miss end on the saturation coincidence instead
    stop = np.argmin(ups.reached) if not ups.reached.all() else ups.reached.size
    return ups.launch_t[:stop], ups.ends[:stop, :3]


def test_upsilon_reaches_plane_and_refines(upsilon_pair):
    coarse, fine = upsilon_pair
    tc, pc = _first_run(coarse)
    tf, pf = _first_run(fine)
    assert tc.size >= 3
    assert_allclose(pc[:, 1], 0.3, atol=1e-9)
    pf = pf[tf <= tc[-1]]
    step = np.linalg.norm(np.diff(pc, axis=0), axis=1).max()
    assert hausdorff(pc, pf) < step
    # neighbouring launches land close together, so the run is one connected polyline
    assert np.linalg.norm(np.diff(pf, axis=0), axis=1).max() < step


def test_frozen_right_state_is_tangency_partner(cfg):
    from georiemann.hugoniot import bl_tangent_partners
    from georiemann.riemann import cross_plane_point
    from conftest import CROSS_R
    C = cross_plane_point(LEFT, CROSS_R[1:], cfg)
    assert bl_tangent_partners(C.s, C.yarr, cfg) == [pytest.approx(CROSS_R[0], abs=1e-12)]

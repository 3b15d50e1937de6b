import numpy as np
import pytest
from numpy.testing import assert_allclose

from georiemann import (PhaseState, accumulation, assemble_eigenpairs, extension_point, flux, frac_flow,
                        hugoniot_residuals, integrate_rarefaction, lax_classify, phi_vectors, shock_speed,
                        trace_hugoniot, u_plus)
from georiemann.errors import ShockSpeedUndefined
from georiemann.hugoniot import rh_residual, saturation_branch, trace_branch

from oracles import angle, bc_flux_mp

UM = PhaseState(0.2, (0.2, 3.0), 1.0)


@pytest.fixture(scope="module")
def branches(cfg):
    return trace_hugoniot(UM, cfg)


def _chem(branches):
    return [b for b in branches if b.kind.startswith("Chemical")]


def test_phi_at_coincident_states(cfg):
    P = phi_vectors(UM, UM.sy, cfg)
    assert np.all(P.table[:, 0] == 0)
    assert_allclose(P.table[:, 1], -P.table[:, 2], rtol=0, atol=0)


def test_phi_golden(cfg):
    P = phi_vectors(UM, (0.8, 0.2, 3.0), cfg)
    jump = np.array([0.6, 3.0, 0.9 - 4.02, -1.0])
    assert_allclose(P.G_jump, cfg.phi * 0.6 * jump, rtol=1e-14)
    f_p, f_m = float(bc_flux_mp(0.8)), float(bc_flux_mp(0.2))
    rho_w = np.array([0.6, 3.0, 0.9, 0.0])
    rho_o = np.array([0.0, 0.0, 4.02, 1.0])
    assert_allclose(P.F_plus, rho_w * f_p + rho_o * (1 - f_p), rtol=1e-13)
    assert_allclose(P.F_minus, rho_w * f_m + rho_o * (1 - f_m), rtol=1e-13)
    assert f_m == pytest.approx(0.005181, abs=5e-7) and f_p == pytest.approx(0.98273, abs=5e-6)


def test_phi_form_equivalent_to_jump_conditions(cfg, branches):
    # Phi . (sigma, u+, u-) is exactly sigma [G] - [u F]
    for b in _chem(branches):
        for x, up, sg in zip(b.points[::3], b.u[::3], b.sigma[::3]):
            Up = PhaseState.from_sy(x, up)
            lhs = phi_vectors(UM, x, cfg).table @ np.array([sg, up, UM.u])
            rhs = sg * (accumulation(Up, cfg) - accumulation(UM, cfg)) - (flux(Up, cfg)[0] - flux(UM, cfg)[0])
            assert_allclose(lhs, rhs, atol=1e-13)


def test_residuals_vanish_on_saturation_line(cfg):
    for s in (0.0, 0.35, 0.9, 1.0):
        assert_allclose(hugoniot_residuals(UM, (s, 0.2, 3.0), cfg), 0.0, atol=1e-13)


def test_residuals_detect_off_locus_point(cfg, rng):
    for _ in range(5):
        x = np.array([rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.35), rng.uniform(2.8, 3.9)])
        res = hugoniot_residuals(UM, x, cfg)
        scale = np.abs(phi_vectors(UM, x, cfg).table).max() ** 3
        assert np.abs(res).max() > 1e-6 * scale


def test_u_plus_on_saturation_branch(cfg):
    for s in (0.05, 0.6, 0.95):
        assert u_plus(UM, (s, 0.2, 3.0), cfg) == pytest.approx(UM.u, rel=1e-12)


def test_u_plus_continuity(cfg):
    r = assemble_eigenpairs(UM, cfg)[1].r[:-1]
    for h in (1e-3, 1e-5):
        x = UM.sy + h * r
        # a point near U- on the L1 branch tangent; u+ is close to u-
        assert abs(u_plus(UM, x, cfg) - UM.u) < 100 * h


def test_u_plus_chemical_golden(cfg, branches):
    b = [b for b in branches if b.kind == "ChemicalBranch(L1)" and b.direction == 1][0]
    x = b.points[10]
    up = u_plus(UM, x, cfg)
    assert up == pytest.approx(b.u[10], rel=1e-12)
    assert abs(up - UM.u) > 1e-3
    sg = shock_speed(UM, PhaseState.from_sy(x, up), cfg)
    assert rh_residual(UM, PhaseState.from_sy(x, up), sg, cfg) < 1e-10


def test_bl_shock_speed(cfg):
    Up = PhaseState(0.8, (0.2, 3.0), 1.0)
    sg, spread = shock_speed(UM, Up, cfg, spread=True)
    f = frac_flow(np.array([0.2, 0.8]), np.array([(0.2, 3.0)] * 2), cfg).f
    assert sg == pytest.approx(1 / cfg.phi * (f[1] - f[0]) / 0.6, rel=1e-12)
    assert sg == pytest.approx(5.4308, abs=5e-5)
    assert spread < 1e-12


def test_shock_speed_undefined_for_equal_states(cfg):
    with pytest.raises(ShockSpeedUndefined):
        shock_speed(UM, UM, cfg)


def test_secant_speed_converges_first_order(cfg):
    pairs = assemble_eigenpairs(UM, cfg)
    for p in pairs[1:]:
        errs = []
        hs = [1e-2, 5e-3, 2.5e-3]
        for h in hs:
            b = trace_branch(UM, p.family, +1, cfg, first_step=h, max_samples=1, classify=False)
            errs.append(abs(b.sigma[0] - p.lam))
        # O(h) with a bounded constant, and shrinking with h
        assert all(e <= 10 * h * max(1.0, abs(p.lam)) for e, h in zip(errs, hs))
        assert errs[2] <= errs[0] or errs[0] < 1e-12


def test_saturation_branch_closed_form(cfg):
    b = saturation_branch(UM, cfg)
    assert b.kind == "SaturationBranch"
    assert_allclose(b.points[:, 1:], np.broadcast_to([0.2, 3.0], (len(b.points), 2)))
    assert_allclose(b.u, UM.u)
    f = frac_flow(b.points[:, 0], b.points[:, 1:], cfg).f
    fm = float(frac_flow(0.2, (0.2, 3.0), cfg).f)
    assert_allclose(b.sigma, (f - fm) / (b.points[:, 0] - 0.2) / cfg.phi, rtol=1e-12)


def test_traced_samples_satisfy_jump_conditions(cfg, branches):
    worst = 0.0
    for b in _chem(branches):
        assert len(b.points) > 5
        for x, up, sg in zip(b.points, b.u, b.sigma):
            worst = max(worst, rh_residual(UM, PhaseState.from_sy(x, up), sg, cfg))
    assert worst <= 1e-8


def test_branches_end_on_boundary(branches):
    assert all(b.stop_reason == "Boundary" for b in _chem(branches))


def test_branch_tangent_matches_eigenvector(cfg):
    pairs = {p.family: p for p in assemble_eigenpairs(UM, cfg)}
    for fam in ("L1", "L2"):
        b = trace_branch(UM, fam, +1, cfg, first_step=1e-5, max_samples=1, classify=False)
        assert angle(b.points[0] - UM.sy, pairs[fam].r[:-1]) <= 1e-4


def test_symmetry_of_locus(cfg, branches):
    b = [b for b in branches if b.kind == "ChemicalBranch(L1)" and b.direction == 1][0]
    x, up, sg = b.points[5], b.u[5], b.sigma[5]
    Up = PhaseState.from_sy(x, up)
    res = hugoniot_residuals(Up, UM.sy, cfg)
    scale = np.abs(phi_vectors(Up, UM.sy, cfg).table).max() ** 3
    assert np.abs(res).max() <= 1e-9 * scale
    assert u_plus(Up, UM.sy, cfg) == pytest.approx(UM.u, rel=1e-9)
    assert shock_speed(Up, UM, cfg) == pytest.approx(sg, rel=1e-9)


def test_lax_characteristic_at_equal_states(cfg):
    for p in assemble_eigenpairs(UM, cfg):
        out = lax_classify(UM, UM, p.lam, cfg)
        assert p.family in out["char_left"] and p.family in out["char_right"]


def test_lax_inadmissible_when_too_fast(cfg):
    Up = PhaseState(0.8, (0.2, 3.0), 1.0)
    assert lax_classify(UM, Up, 1e3, cfg)["label"] == "Inadmissible"


def test_bl_tangent_shock_is_characteristic_on_left(cfg):
    from georiemann.riemann import chord_tangency
    y = (0.2, 3.0)
    s_t = chord_tangency(0.1, y, cfg)
    Um, Up = PhaseState(s_t, y), PhaseState(0.1, y)
    sg = shock_speed(Um, Up, cfg)
    out = lax_classify(Um, Up, sg, cfg)
    assert "s" in out["char_left"] and out["label"] == "Characteristic"


def test_extension_point_scalar(cfg):
    base = integrate_rarefaction(PhaseState(0.3, (0.2, 3.0)), "s", -1, cfg)
    pairs = extension_point(base, "s", cfg, points=[len(base.tau) - 1])
    for X, B in pairs:
        sg = shock_speed(X, B, cfg)
        assert sg == pytest.approx(float(frac_flow(B.s, B.yarr, cfg).f_s) / cfg.phi, rel=1e-9)


def test_extension_point_empty_for_zero_length_curve(cfg):
    from georiemann.rarefaction import RarefactionCurve
    z = np.array([[0.5, 0.2, 3.0, 1.0]])
    curve = RarefactionCurve("s", np.zeros(1), z, np.array([1.0]), "Inflection", 1)
    assert extension_point(curve, "s", cfg, points=[]) == []


def test_extension_point_shared_plane_data(cfg):
    from conftest import SHARED_R
    A = PhaseState(0.7446363059752384, (0.03, 2.74), 1.0)
    curve = integrate_rarefaction(A, "L1", +1, cfg, launch=True, stop_plane=(2, 3.9))
    found = extension_point(curve, "s", cfg, points=[len(curve.tau) - 1])
    assert len(found) == 1
    X, B = found[0]
    assert X.s == pytest.approx(SHARED_R[0], abs=1e-8)
    assert X.y == B.y
    sg = shock_speed(B, X, cfg)
    lam_B = B.u / cfg.phi * float(frac_flow(B.s, B.yarr, cfg).f_s)
    assert sg == pytest.approx(lam_B, rel=1e-9)

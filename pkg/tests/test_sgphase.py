import math

import numpy as np
import pytest

from phasecert import expr as ex
from phasecert.catalog import SCENARIOS
from phasecert.exceptions import CollarBoundsError
from phasecert.grammar import parse_expr
from phasecert.grids import sg_ladder
from phasecert.phase import GeneratingPhase
from phasecert.sgphase import (Cutoff, StarPhaseFamily,
                               build_star_phi, calibrate, check_uniformity,
                               cutoff_expr, phi_envelope)

from oracles import central_diff


def build_phase(name):
    sc = SCENARIOS[name]
    return GeneratingPhase(parse_expr(sc["phase"]), n=sc["n"],
                           collar_halfwidth=sc["collar_halfwidth"], name=name)


IDENTITY = build_phase("identity")
DILATION = build_phase("dilation")
QUADRATIC = build_phase("quadratic-collar")
SHEAR = build_phase("boundary-shear")


# ----------------------------------------------------------------- cutoff

def test_cutoff_plateau_support_and_symmetry():
    w = Cutoff(1.0)
    s = np.linspace(-2, 2, 1601)
    v = w(s)
    assert np.all(v[np.abs(s) <= 0.5] == 1.0)
    assert np.all(v[np.abs(s) >= 1.0] == 0.0)
    assert np.allclose(v, v[::-1], atol=0)          # even
    pos = v[s >= 0]
    assert np.all(np.diff(pos) <= 1e-12)            # non-increasing on R+


def test_cutoff_monotone_at_thousand_points():
    w = Cutoff(1.0)
    s = np.linspace(0.0, 1.0, 1000)
    v = w(s)
    assert np.all(np.diff(v) <= 1e-12)


def test_cutoff_derivatives_vanish_at_transition_endpoints():
    e = cutoff_expr(ex.var("s"))
    for order in range(1, 7):
        d = ex.derivative_multi(e, {"s": order})
        for s0 in (0.5, 0.5 - 1e-6, 1.0, 1.0 - 1e-3):
            assert abs(ex.evaluate(d, {"s": s0})) <= 1e-8, (order, s0)


def test_cutoff_slope_sign_fact():
    # literal grid fact: omega'(s) * s <= 0 for s >= 0
    e = cutoff_expr(ex.var("s"))
    d = ex.differentiate(e, "s")
    s = np.linspace(0.0, 1.5, 400)
    assert np.all(ex.eval_array(d, {"s": s}) * s <= 1e-15)


def test_cutoff_scaled():
    w = Cutoff(0.25)
    assert w(0.1) == 1.0
    assert w(0.3) == 0.0
    assert 0.0 < w(0.18) < 1.0


# ------------------------------------------------------------ *Phi build

def test_star_phi_identity_is_t_tau_exactly():
    rp = build_star_phi(IDENTITY, 0.3, 2.0, 0.5, 1.0)
    t = sg_ladder()
    tau = sg_ladder()
    V = rp.value(t[:, None], tau[None, :])
    target = t[:, None] * tau[None, :]
    assert np.max(np.abs(V - target) / (1.0 + np.abs(target))) <= 1e-12


def test_star_phi_zero_dilation_factor_is_identity():
    ph = GeneratingPhase(parse_expr("x1*k1 + xn*kn*exp(0*sin(x1))"))
    rp = build_star_phi(ph, 0.1, 1.0, 0.5, 1.0)
    t = sg_ladder()
    tau = sg_ladder()
    V = rp.value(t[:, None], tau[None, :])
    target = t[:, None] * tau[None, :]
    assert np.max(np.abs(V - target) / (1.0 + np.abs(target))) <= 1e-12


def test_star_phi_vanishes_at_t_zero():
    for ph in (IDENTITY, DILATION, QUADRATIC):
        k = ph.collar_halfwidth / 2
        rp = build_star_phi(ph, 0.4, 1.5, k, 2.0)
        tau = np.linspace(-50, 50, 31)
        assert np.max(np.abs(rp.value(0.0, tau))) == 0.0


def test_star_phi_transition_value_dilation():
    # independent scalar evaluation of the two-term blend at one点 point
    x1, k = 0.3, 0.25
    K = 2.0
    xi = 4.0
    r = math.sqrt(1.0 + xi * xi)
    rp = build_star_phi(DILATION, x1, xi, k, K)
    t0, tau0 = 1.7, 1.0
    s = t0 / (r * k)
    p = s * s
    F = lambda u: math.exp(-1.0 / u) if u > 0 else 0.0
    w = F(1 - p) / (F(1 - p) + F(p - 0.25))
    g = math.sin(x1) / 2.0
    phi_val = (t0 / r) * (tau0 * r) * math.exp(g)
    want = w * phi_val + (1 - w) * K * t0 * tau0
    got = float(rp.value(t0, tau0))
    assert got == pytest.approx(want, rel=1e-13)


def test_star_phi_rejects_large_k():
    with pytest.raises(CollarBoundsError):
        build_star_phi(QUADRATIC, 0.0, 1.0, 0.4, 1.0)


def test_star_phi_derivatives_match_fd():
    rp = build_star_phi(DILATION, -0.4, 3.0, 0.5, 2.0)
    for (a, al) in [(1, 0), (0, 1), (1, 1), (2, 1)]:
        d = rp.deriv_value(a, al, 0.9, 1.3)
        if a > 0:
            lower = rp.deriv_value(a - 1, al, 0.9, 1.3)
            f = lambda t: float(rp.deriv_value(a - 1, al, t, 1.3))
            fd = central_diff(f, 0.9, 1e-5)
        else:
            f = lambda u: float(rp.deriv_value(0, al - 1, 0.9, u))
            fd = central_diff(f, 1.3, 1e-5)
        assert abs(float(d) - fd) <= 1e-6 * max(1.0, abs(fd))


# ------------------------------------------------------------- P1 P2 P3

def test_identity_constants():
    rp = build_star_phi(IDENTITY, 0.0, 1.0, 0.5, 1.0)
    cs = rp.constants()
    assert all(v <= 1.0 + 1e-12 for v in cs.table.values())
    assert cs.table[(1, 1)] == pytest.approx(1.0, abs=1e-12)
    assert cs.c_t == pytest.approx(1.0, abs=1e-12)
    assert cs.C_t == pytest.approx(1.0, abs=1e-12)
    assert cs.c_tau == pytest.approx(1.0, abs=1e-12)
    assert cs.C_tau == pytest.approx(1.0, abs=1e-12)
    assert cs.eps == pytest.approx(1.0, abs=1e-12)


def test_dilation_constants_stable_under_grid_refinement():
    fam = StarPhaseFamily(DILATION, 0.5, 2.0)
    t = sg_ladder()
    t2 = sg_ladder(n_half=40)
    cs = fam.constants_at(0.3, 4.0, 1, t, t)
    cs2 = fam.constants_at(0.3, 4.0, 1, t2, t2)
    for key, v in cs.table.items():
        v2 = cs2.table[key]
        if max(v, v2) > 1e-9:
            assert v2 <= 2.0 * v + 1e-9 and v <= 2.0 * v2 + 1e-9, key
    assert abs(cs2.eps - cs.eps) <= 0.1 * cs.eps


def test_dilation_p2_lower_bound_closed_form():
    # in the plateau the tau-coefficient is exp(g); with K >= sup exp(g)
    # the transition term is nonnegative, so c is exp(min g) up to bracket
    fam = StarPhaseFamily(DILATION, 0.5, 2.0)
    cs = fam.constants_at(-1.0, 4.0, 1)
    assert cs.c_t >= 0.5
    assert cs.eps >= math.exp(math.sin(-1.0) / 2.0) - 1e-9


def test_k_sensitivity_small_K_fails():
    # halving K below the dilation factor's sup makes the transition term
    # overpower the plateau: P3 loses its sign or its floor
    rep = check_uniformity(DILATION, 0.5, 0.5,
                           xprimes=np.linspace(-1, 1, 3),
                           rungs=[1.0, 4.0, 16.0])
    assert rep.failures


def test_tiny_K_with_large_variation_fails():
    steep = GeneratingPhase(parse_expr("x1*k1 + xn*kn*exp(sin(3*x1))"))
    rep = check_uniformity(steep, 0.5, 0.01,
                           xprimes=np.linspace(-1, 1, 3),
                           rungs=[1.0, 4.0])
    assert rep.failures


def test_p3_region_where_mixing_is_pure_K():
    # for |t|/r >= k the cutoff vanishes identically: d2*Phi = K exactly
    for K in (2.0, 4.0):
        rp = build_star_phi(DILATION, 0.3, 1.0, 0.25, K)
        r = rp.rung
        t = np.array([v for v in sg_ladder() if abs(v) >= 0.25 * r + 0.01])
        tau = sg_ladder()
        d11 = rp.deriv_value(1, 1, t[:, None], tau[None, :])
        assert np.allclose(d11, K, atol=1e-12)


def test_monotone_robustness_increasing_K():
    rp2 = build_star_phi(DILATION, 0.3, 1.0, 0.25, 2.0)
    rp4 = build_star_phi(DILATION, 0.3, 1.0, 0.25, 4.0)
    r = rp2.rung
    t = np.array([v for v in sg_ladder() if abs(v) >= 0.25 * r])
    tau = sg_ladder()
    e2 = np.min(np.abs(rp2.deriv_value(1, 1, t[:, None], tau[None, :])))
    e4 = np.min(np.abs(rp4.deriv_value(1, 1, t[:, None], tau[None, :])))
    assert e4 >= e2 - 1e-12


# ---------------------------------------------------------- uniformity

def test_uniformity_identity_ratio_one():
    rep = check_uniformity(IDENTITY, 0.5, 1.0)
    assert rep.passed
    assert rep.spread == pytest.approx(1.0, abs=1e-9)


def test_uniformity_dilation_within_e():
    rep = check_uniformity(DILATION, 0.5, 2.0)
    assert rep.passed
    assert rep.spread <= 2.0 or rep.spread <= math.e
    assert len(rep.per_combo) == 81


def test_uniformity_shear_within_bound():
    rep = check_uniformity(SHEAR, 0.5, 1.0)
    assert rep.passed
    assert rep.spread <= 3.0


# ----------------------------------------------------------- calibrate

def test_calibrate_identity_first_trial():
    cal = calibrate(IDENTITY)
    assert (cal.k, cal.K) == (0.5, 1.0)
    assert cal.trials == 1


def test_calibrate_dilation_small_K():
    cal = calibrate(DILATION)
    assert cal.K <= 8.0
    assert cal.k >= 1.0 / 32.0
    assert cal.report.passed


def test_calibrate_quadratic():
    cal = calibrate(QUADRATIC)
    assert cal.K <= 16.0
    assert cal.k <= 0.25 + 1e-12
    assert cal.k >= 0.5 / 32.0


def test_calibrate_exhaustion():
    from phasecert.exceptions import CalibrationError
    # an inadmissible phase whose mixed derivative changes sign inside any
    # collar cutoff: psi = x.k with the normal term reversed mid-collar
    bad = GeneratingPhase(parse_expr("x1*k1 + xn*kn*(1 - 40*xn^2)"),
                          collar_halfwidth=1.0)
    with pytest.raises(CalibrationError):
        calibrate(bad, max_steps=3)


# -------------------------------------------------- remainder envelope

def test_phi_envelope_stable_across_rungs():
    # constants of the cutoff-localized remainder bound: factor-2 stable on
    # rungs with xi' != 0; the rung at <xi'> = 1 (the excluded axis xi' = 0)
    # sees a strictly smaller t-window, so its sup can only drop below
    rungs = [1.0, 2.0, 4.0, 16.0, 64.0, 256.0]
    for ph in (DILATION, QUADRATIC):
        k = ph.collar_halfwidth
        per_rung = {r: phi_envelope(ph, 0.3, r, alpha_max=3, k=k)
                    for r in rungs}
        for alpha in range(4):
            vals = np.array([per_rung[r][alpha] for r in rungs[1:]])
            live = vals[vals > 1e-12]
            if len(live) >= 2:
                assert live.max() <= 2.0 * live.min(), (ph.name, alpha)
            assert per_rung[1.0][alpha] <= vals.max() + 1e-12

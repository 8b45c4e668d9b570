"""Weight-function tests.

Frozen reference values were produced by an independent oracle script
(scipy CubicHermiteSpline for the bridge branch, scipy brentq bisection for
the lambda calibration — no linearity assumption) before this package was
implemented.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochum import (
    BACKWARD_CONTROL,
    FORWARD_CONTROL,
    ParameterError,
    WeightParams,
    build_spatial_weight,
    calibrate_lambda,
    carleman_fields,
    make_grid,
    sigma_value,
    temporal_gamma,
    temporal_gamma_regularized,
)

# ---------------------------------------------------------------- frozen oracles
ALPHA_N63 = 0.875  # exact: beta = 4x(1-x), beta' = 4-8x, nearest outside node x = 25/64
LAMBDA_STAR = 0.1321573266261431  # brentq on range(lam) = 20; mu=.3, m=1, T=.5, n=63, K=8
SIGMA_UNIT_MU03 = 0.1639906920351458  # lam=1, mu=0.3, m=1
# bridge values (T=0.5, m=1), scipy CubicHermiteSpline([0.25,0.375],[1,8],[0,64]):
BRIDGE_ORACLE = {
    0.26: 1.0801280000000002,
    0.30: 2.6959999999999993,
    0.34375: 5.78125,
    0.372: 7.805202944,
}
CRITICAL_MU_M1 = 0.26534493304844003  # root of mu*exp(5*mu) = 1


def default_params(variant=FORWARD_CONTROL, lam=1.0, mu=0.3, m=1.0, T=0.5):
    return WeightParams(lam=lam, mu=mu, m=m, T=T, variant=variant)


# ------------------------------------------------------------------- sigma
def test_sigma_unit_parameters():
    assert abs(sigma_value(WeightParams(1, 1, 1, 0.5)) - math.e**2) < 1e-12


def test_sigma_linear_in_lambda():
    assert abs(sigma_value(WeightParams(2, 1, 1, 0.5)) - 2 * math.e**2) < 1e-12


def test_sigma_exceeds_two_in_theory_regime():
    assert sigma_value(WeightParams(1, 1, 1, 0.5)) > 2


def test_sigma_default_numeric_regime():
    assert abs(sigma_value(default_params()) - SIGMA_UNIT_MU03) < 1e-15


# ------------------------------------------------------------------- gamma
def test_gamma_endpoint_and_plateau():
    p = default_params()
    assert temporal_gamma(0.0, p) == pytest.approx(2.0, abs=1e-15)
    assert temporal_gamma(p.T / 4, p) == pytest.approx(1.0, abs=1e-15)
    assert temporal_gamma(0.2, p) == 1.0


def test_gamma_tail_branch():
    p = default_params(m=1.0)
    t = 7 * p.T / 8
    assert temporal_gamma(t, p) == pytest.approx(1.0 / (p.T / 8), rel=1e-14)


def test_gamma_bridge_frozen_values():
    p = default_params()
    for t, ref in BRIDGE_ORACLE.items():
        assert temporal_gamma(t, p) == pytest.approx(ref, rel=1e-13), t


def test_gamma_backward_is_exact_mirror():
    pf = default_params()
    pb = default_params(variant=BACKWARD_CONTROL)
    rng = np.random.default_rng(0)
    ts = rng.uniform(1e-6, pf.T - 1e-12, size=64)
    fwd = temporal_gamma(pf.T - ts, pf)
    bwd = temporal_gamma(ts, pb)
    np.testing.assert_array_equal(fwd, bwd)
    assert temporal_gamma(pb.T / 2, pb) == 1.0
    assert temporal_gamma(pb.T, pb) == pytest.approx(2.0, abs=1e-15)


def test_gamma_domain_errors():
    pf = default_params()
    pb = default_params(variant=BACKWARD_CONTROL)
    for bad in (pf.T, -1e-9, pf.T + 0.1):
        with pytest.raises(ParameterError):
            temporal_gamma(bad, pf)
    for bad in (0.0, -0.1, pb.T + 1e-9):
        with pytest.raises(ParameterError):
            temporal_gamma(bad, pb)


@given(
    lam=st.floats(0.5, 2.0),
    mu=st.floats(1.0, 1.5),
    m=st.floats(1.0, 2.0),
    T=st.floats(0.1, 0.9),
)
@settings(max_examples=60, deadline=None)
def test_gamma_junction_continuity(lam, mu, m, T):
    # theory regime (sigma > 2): junctions are C^1, so nearby values agree.
    # For sigma < 1 the initial branch is merely Holder-sigma at T/4 and a
    # value probe at finite distance would not resolve continuity.
    p = WeightParams(lam=lam, mu=mu, m=m, T=T)
    assert p.sigma > 2
    d = 1e-8 * T
    for tj in (T / 4, T / 2, 3 * T / 4):
        left = temporal_gamma(tj - d, p)
        right = temporal_gamma(tj + d, p)
        mid = temporal_gamma(tj, p)
        scale = max(1.0, abs(mid))
        assert abs(left - mid) < 1e-5 * scale
        assert abs(right - mid) < 1e-5 * scale


def test_gamma_junctions_c1_matching():
    # one-sided difference quotients agree across each junction at O(dt);
    # C^1 matching at T/4 needs sigma > 2, so probe at theory-scale lam, mu
    p = WeightParams(lam=1.0, mu=1.0, m=1.0, T=0.5)
    assert p.sigma > 2
    d = 1e-7
    for tj in (p.T / 4, p.T / 2, 3 * p.T / 4):
        dl = (temporal_gamma(tj, p) - temporal_gamma(tj - d, p)) / d
        dr = (temporal_gamma(tj + d, p) - temporal_gamma(tj, p)) / d
        scale = max(1.0, abs(dl), abs(dr))
        assert abs(dl - dr) < 1e-3 * scale, tj


def test_gamma_flat_left_derivative_at_quarter_when_sigma_large():
    # for sigma > 2 the initial branch lands at T/4 with zero slope
    p = WeightParams(lam=1.0, mu=1.0, m=1.0, T=0.5)
    assert p.sigma > 2
    d = 1e-4
    slope = (temporal_gamma(p.T / 4, p) - temporal_gamma(p.T / 4 - d, p)) / d
    assert abs(slope) < 1e-6


def test_gamma_monotone_from_plateau_to_singularity():
    p = default_params()
    ts = np.linspace(p.T / 2, p.T - 1e-9, 400)
    vals = temporal_gamma(ts, p)
    assert np.all(np.diff(vals) >= -1e-12)


# --------------------------------------------------------- regularized gamma
def test_gamma_regularized_branches():
    p = default_params()
    eps = p.T / 16
    assert temporal_gamma_regularized(0.0, eps, p) == pytest.approx(2.0, abs=1e-15)
    assert temporal_gamma_regularized(p.T / 3, eps, p) == 1.0
    assert temporal_gamma_regularized(p.T / 2 + eps, eps, p) == 1.0
    got = temporal_gamma_regularized(p.T, eps, p)
    assert got == pytest.approx(temporal_gamma(p.T - eps, p), rel=1e-14)
    assert math.isfinite(got)


def test_gamma_regularized_eps_validation():
    p = default_params()
    for bad in (0.0, -1e-3, p.T / 4, p.T):
        with pytest.raises(ParameterError):
            temporal_gamma_regularized(0.1, bad, p)


def test_gamma_regularized_below_gamma_eps_sweep():
    p = default_params()
    ts = np.linspace(0.0, p.T - 1e-9, 500)
    g = temporal_gamma(ts, p)
    for eps in (p.T / 64, p.T / 32, p.T / 16):
        ge = temporal_gamma_regularized(ts, eps, p)
        assert np.all(ge <= g + 1e-12)


def test_gamma_regularized_backward_mirror():
    pf = default_params()
    pb = default_params(variant=BACKWARD_CONTROL)
    eps = pf.T / 20
    ts = np.linspace(0.0, pf.T, 101)
    np.testing.assert_array_equal(
        temporal_gamma_regularized(ts, eps, pb),
        temporal_gamma_regularized(pf.T - ts, eps, pf),
    )


# ------------------------------------------------------------- spatial weight
def test_beta_boundary_and_peak():
    grid = make_grid(63)
    w = build_spatial_weight((0.3, 0.7), (0.4, 0.6), grid)
    assert w.beta_at(0.0) == 0.0
    assert w.beta_at(1.0) == 0.0
    assert w.beta_at(w.c) == pytest.approx(1.0, abs=1e-15)
    assert np.all(w.beta > 0.0)
    assert np.all(w.beta <= 1.0 + 1e-12)


def test_beta_alpha_frozen_default_geometry():
    grid = make_grid(63)
    w = build_spatial_weight((0.3, 0.7), (0.4, 0.6), grid)
    assert w.alpha == pytest.approx(ALPHA_N63, abs=1e-15)
    assert w.alpha > 0


def test_beta_alpha_is_min_over_outside_nodes():
    grid = make_grid(47)
    w = build_spatial_weight((0.25, 0.8), (0.35, 0.55), grid)
    outside = (grid.x <= 0.35) | (grid.x >= 0.55)
    brute = np.min(np.abs(w.beta_deriv_at(grid.x[outside])))
    assert w.alpha == pytest.approx(brute, rel=1e-15)


def test_beta_geometry_validation():
    grid = make_grid(31)
    with pytest.raises(ParameterError):
        build_spatial_weight((0.4, 0.6), (0.3, 0.7), grid)  # D' not inside D0
    with pytest.raises(ParameterError):
        build_spatial_weight((0.0, 0.7), (0.4, 0.6), grid)  # touches boundary
    with pytest.raises(ParameterError):
        build_spatial_weight((0.3, 0.7), (0.5, 0.5), grid)  # empty D'


@given(x=st.floats(0.02, 0.98))
@settings(max_examples=50, deadline=None)
def test_beta_analytic_derivative_matches_fd(x):
    grid = make_grid(31)
    w = build_spatial_weight((0.3, 0.7), (0.4, 0.6), grid)
    d = 1e-7
    fd = (w.beta_at(x + d) - w.beta_at(x - d)) / (2 * d)
    assert abs(fd - w.beta_deriv_at(x)) < 5e-6


# ------------------------------------------------------------ composite fields
def lattice(K=8, T=0.5):
    dt = T / K
    return dt * (np.arange(K) + 0.5)


def test_fields_phi_negative_and_identities():
    grid = make_grid(63)
    w = build_spatial_weight((0.3, 0.7), (0.4, 0.6), grid)
    p = default_params(lam=LAMBDA_STAR)
    f = carleman_fields(p, w, grid, lattice(), eps=1e-4)
    assert np.all(f.phi < 0)
    gam = temporal_gamma(f.time_nodes, p)
    np.testing.assert_allclose(
        f.xi, gam[:, None] * np.exp(p.mu * (w.beta + 6 * p.m))[None, :], rtol=1e-14
    )
    np.testing.assert_array_equal(f.ell, p.lam * f.phi)
    np.testing.assert_array_equal(f.log_theta, f.ell)
    # normalized weight is exactly 1 at the lattice argmax of ell
    tbl = f.weight_table(2.0, 0.0)
    assert tbl.max() == pytest.approx(1.0, abs=1e-14)


def test_fields_mu_too_small_rejected():
    grid = make_grid(31)
    w = build_spatial_weight((0.3, 0.7), (0.4, 0.6), grid)
    p = default_params(mu=0.9 * CRITICAL_MU_M1)
    with pytest.raises(ParameterError):
        carleman_fields(p, w, grid, lattice())


def test_fields_reject_singular_time_node():
    grid = make_grid(31)
    w = build_spatial_weight((0.3, 0.7), (0.4, 0.6), grid)
    p = default_params()
    with pytest.raises(ParameterError):
        carleman_fields(p, w, grid, np.array([0.1, p.T]))
    with pytest.raises(ParameterError):
        carleman_fields(default_params(variant=BACKWARD_CONTROL), w, grid, np.array([0.0, 0.1]))


def test_fields_normalization_offset_invariance():
    # shifting kappa while compensating in the constant leaves tables unchanged
    grid = make_grid(63)
    w = build_spatial_weight((0.3, 0.7), (0.4, 0.6), grid)
    f = carleman_fields(default_params(lam=LAMBDA_STAR), w, grid, lattice())
    a, b = -2.0, -3.0
    base = f.weight_table(a, b, 0.25)
    f.norm_offset += 5.0
    shifted = f.weight_table(a, b, 0.25 + 5.0 * a)
    np.testing.assert_allclose(shifted, base, rtol=1e-12)


def test_fields_clamp_counted():
    grid = make_grid(31)
    w = build_spatial_weight((0.3, 0.7), (0.4, 0.6), grid)
    p = default_params(lam=50.0)  # log-range in the thousands
    f = carleman_fields(p, w, grid, lattice(), clamp=200.0)
    assert f.clamp_events == 0
    tbl = f.weight_table(-2.0, 0.0)
    assert f.clamp_events > 0
    assert np.all(np.isfinite(tbl))


def test_fields_regularized_table_uses_eps_profile():
    grid = make_grid(63)
    w = build_spatial_weight((0.3, 0.7), (0.4, 0.6), grid)
    p = default_params(lam=LAMBDA_STAR)
    f = carleman_fields(p, w, grid, lattice(), eps=1e-2)
    plain = f.weight_table(-2.0, 0.0)
    reg = f.weight_table(-2.0, 0.0, regularized=True)
    # gamma_eps <= gamma and phi < 0 give ell_eps >= ell, hence theta_eps^-2 <= theta^-2
    assert np.all(reg <= plain * (1.0 + 1e-12))
    assert np.any(reg < plain)


def test_fields_trace_weight_matches_manual():
    grid = make_grid(31)
    w = build_spatial_weight((0.3, 0.7), (0.4, 0.6), grid)
    p = default_params(lam=LAMBDA_STAR)
    f = carleman_fields(p, w, grid, lattice())
    row = f.trace_weight(0.0, 2.0, 1.0, 0.5)
    gam = temporal_gamma(0.0, p)
    bump = np.exp(p.mu * (w.beta + 6 * p.m))
    ell0 = p.lam * gam * (bump - p.mu * math.exp(6 * p.mu * (p.m + 1)))
    manual = np.exp(2.0 * (ell0 - f.norm_offset) + 1.0 * (np.log(gam) + np.log(bump)) + 0.5)
    np.testing.assert_allclose(row, manual, rtol=1e-12)


# ---------------------------------------------------------------- calibration
def test_calibrate_lambda_frozen_value():
    grid = make_grid(63)
    w = build_spatial_weight((0.3, 0.7), (0.4, 0.6), grid)
    lam = calibrate_lambda(20.0, 0.3, 1.0, 0.5, w, grid, lattice(K=8, T=0.5))
    assert lam == pytest.approx(LAMBDA_STAR, rel=1e-12)


def test_calibrate_lambda_hits_target_range():
    grid = make_grid(63)
    w = build_spatial_weight((0.3, 0.7), (0.4, 0.6), grid)
    tn = lattice(K=8, T=0.5)
    lam = calibrate_lambda(20.0, 0.3, 1.0, 0.5, w, grid, tn)
    f = carleman_fields(WeightParams(lam, 0.3, 1.0, 0.5), w, grid, tn)
    assert f.ell.max() - f.ell.min() == pytest.approx(20.0, rel=1e-9)


def test_calibrate_lambda_linear_in_target():
    grid = make_grid(63)
    w = build_spatial_weight((0.3, 0.7), (0.4, 0.6), grid)
    tn = lattice()
    l1 = calibrate_lambda(10.0, 0.3, 1.0, 0.5, w, grid, tn)
    l2 = calibrate_lambda(20.0, 0.3, 1.0, 0.5, w, grid, tn)
    assert l2 == pytest.approx(2 * l1, rel=1e-12)


def test_calibrate_lambda_rejects_empty_lattice():
    grid = make_grid(63)
    w = build_spatial_weight((0.3, 0.7), (0.4, 0.6), grid)
    with pytest.raises(ParameterError):
        calibrate_lambda(20.0, 0.3, 1.0, 0.5, w, grid, np.array([]))


# ------------------------------------------------------------------ params
def test_weight_params_validation():
    with pytest.raises(ParameterError):
        WeightParams(0.0, 0.3, 1.0, 0.5)
    with pytest.raises(ParameterError):
        WeightParams(1.0, -0.1, 1.0, 0.5)
    with pytest.raises(ParameterError):
        WeightParams(1.0, 0.3, 0.5, 0.5)
    with pytest.raises(ParameterError):
        WeightParams(1.0, 0.3, 1.0, 1.0)
    with pytest.raises(ParameterError):
        WeightParams(1.0, 0.3, 1.0, 0.5, variant="sideways")

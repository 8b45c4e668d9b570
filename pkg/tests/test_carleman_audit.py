"""Inequality audits: term transcription, ratio bookkeeping, invariances.

The audited quantities are empirical statistics (no closed-form targets
exist), so the tests pin what can be pinned exactly: the term tables, a
fully manual re-evaluation of every term for one sample, quadratic
homogeneity in the data, invariance of ratios under weight renormalization,
and the zero-record / counterexample bookkeeping.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from stochum import (
    BACKWARD_CONTROL,
    BACKWARD_STOCHASTIC,
    DETERMINISTIC_FORWARD,
    FORWARD_CONTROL,
    FORWARD_STOCHASTIC,
    RANDOM_FORWARD,
    TERM_TABLES,
    ParameterError,
    WeightParams,
    audit_backward_carleman,
    audit_deterministic_carleman,
    audit_forward_carleman,
    build_spatial_weight,
    build_tree,
    calibrate_lambda,
    carleman_fields,
    gaussian_field,
    gaussian_leaf_vectors,
    make_grid,
    solve_backward_spde,
    temporal_gamma,
)
from stochum.carleman_audit import (
    _SampleData,
    _eval_side,
    _ratio_statistics,
    _term_weights,
)
from stochum.reference import implicit_heat_forward


def make_setup(variant, n=15, K=4, T=0.5, mu=0.3, m=1):
    grid = make_grid(n)
    tree = build_tree(K, T)
    spatial = build_spatial_weight(grid.d0, (0.4, 0.6), grid)
    mids = tree.dt * (np.arange(K) + 0.5)
    lam = calibrate_lambda(20.0, mu, m, T, spatial, grid, mids)
    params = WeightParams(lam=lam, mu=mu, m=m, T=T, variant=variant)
    return params, tree, grid, spatial


# ------------------------------------------------------------- term tables
def test_term_tables_match_the_transcribed_structure():
    # independent transcription: (target, domain, lam, mu, xi, gauge factor)
    expected = {
        BACKWARD_STOCHASTIC: {
            "lhs": [
                ("state_gradient", "trace_start", 0, 0, 0, False),
                ("state", "trace_start", 2, 3, 0, True),
                ("state_gradient", "bulk", 1, 2, 1, False),
                ("state", "bulk", 3, 4, 3, False),
            ],
            "rhs": [
                ("state", "bulk_d0", 3, 4, 3, False),
                ("source", "bulk", 0, 0, 0, False),
                ("martingale", "bulk", 2, 2, 3, False),
            ],
        },
        DETERMINISTIC_FORWARD: {
            "lhs": [
                ("state_gradient", "bulk", 1, 2, 1, False),
                ("state", "bulk", 3, 4, 3, False),
                ("state_gradient", "trace_end", 0, 0, 0, False),
                ("state", "trace_end", 2, 3, 0, True),
            ],
            "rhs": [
                ("source", "bulk", 0, 0, 0, False),
                ("state", "bulk_d0", 3, 4, 3, False),
            ],
        },
        FORWARD_STOCHASTIC: {
            "lhs": [
                ("state_gradient", "bulk", 1, 2, 1, False),
                ("state", "bulk", 3, 4, 3, False),
                ("state", "trace_end", 2, 2, 0, False),
            ],
            "rhs": [
                ("source", "bulk", 0, 0, 0, False),
                ("noise_source", "bulk", 2, 2, 2, False),
                ("state", "bulk_d0", 3, 4, 3, False),
            ],
        },
    }
    expected[RANDOM_FORWARD] = expected[DETERMINISTIC_FORWARD]
    assert set(TERM_TABLES) == set(expected)
    for ineq, sides in expected.items():
        for side, terms in sides.items():
            got = TERM_TABLES[ineq][side]
            assert len(got) == len(terms)
            for spec, (target, domain, lp, mp, xp, gauge) in zip(got, terms):
                assert (spec.target, spec.domain) == (target, domain)
                assert (spec.lam_pow, spec.mu_pow, spec.xi_pow) == (lp, mp, xp)
                assert spec.exp_mu_factor == gauge


# ---------------------------------------------------------- backward audit
def test_backward_audit_reports_finite_positive_ratios():
    params, tree, grid, _ = make_setup(FORWARD_CONTROL)
    report = audit_backward_carleman(6, params, tree, grid, seed=11)
    assert report.inequality == BACKWARD_STOCHASTIC
    assert report.samples == 6
    assert len(report.ratios) == 6
    assert all(math.isfinite(r) and r > 0.0 for r in report.ratios)
    assert report.max_ratio == max(report.ratios)
    assert report.median_ratio == float(np.median(report.ratios))
    assert report.zero_records == () and report.counterexamples == ()
    lhs_names, rhs_names = report.term_order()
    for lhs, rhs in zip(report.lhs_terms, report.rhs_terms):
        assert tuple(lhs) == lhs_names and tuple(rhs) == rhs_names
        assert all(math.isfinite(v) and v >= 0.0 for v in lhs.values())
        assert all(math.isfinite(v) and v >= 0.0 for v in rhs.values())


def test_backward_terms_match_a_manual_reevaluation():
    params, tree, grid, spatial = make_setup(FORWARD_CONTROL)
    report = audit_backward_carleman(1, params, tree, grid, seed=7)

    K, n, h, dt = tree.depth, grid.n, grid.h, tree.dt
    zT = gaussian_leaf_vectors(tree, n, 7, "audit.backward_stochastic.zT.0")
    xi_src = gaussian_field(tree, n, 7, "audit.backward_stochastic.Xi.0", levels=K)
    z, zrep = solve_backward_spde(zT, xi_src, tree, grid)

    mids = dt * (np.arange(K) + 0.5)
    flds = carleman_fields(params, spatial, grid, mids)
    theta2 = np.exp(2.0 * (flds.ell - flds.norm_offset))
    lam, mu, m = params.lam, params.mu, params.m

    def grad(rows):
        return np.diff(rows, axis=-1, append=0.0) / h

    def bulk(weight_rows, cells):
        return dt * h * sum(
            float(np.mean(np.square(arr) @ weight_rows[k])) for k, arr in enumerate(cells)
        )

    zc = z.values[:K]
    expected_lhs = {
        "bulk_gradient": lam * mu**2 * bulk(flds.xi * theta2, [grad(v) for v in zc]),
        "bulk_state": lam**3 * mu**4 * bulk(flds.xi**3 * theta2, zc),
    }
    # initial-time traces, weights rebuilt from the definitions
    gam0 = float(temporal_gamma(0.0, params))
    ell0 = lam * gam0 * (
        np.exp(mu * (spatial.beta + 6.0 * m)) - mu * math.exp(6.0 * mu * (m + 1.0))
    )
    theta2_0 = np.exp(2.0 * (ell0 - flds.norm_offset))
    expected_lhs["trace_gradient"] = h * float(np.mean(np.square(grad(z.values[0])) @ theta2_0))
    expected_lhs["trace_state"] = (
        lam**2 * mu**3 * math.exp(2.0 * mu * (6.0 * m + 1.0))
        * h * float(np.mean(np.square(z.values[0]) @ theta2_0))
    )
    expected_rhs = {
        "observation_state": lam**3 * mu**4
        * bulk(flds.xi**3 * theta2 * grid.mask_d0, zc),
        "drift_source": bulk(theta2, xi_src.values),
        "martingale_state": lam**2 * mu**2 * bulk(flds.xi**3 * theta2, zrep.values),
    }
    for name, val in expected_lhs.items():
        assert report.lhs_terms[0][name] == pytest.approx(val, rel=1e-12)
    for name, val in expected_rhs.items():
        assert report.rhs_terms[0][name] == pytest.approx(val, rel=1e-12)
    assert report.ratios[0] == pytest.approx(
        sum(expected_lhs.values()) / sum(expected_rhs.values()), rel=1e-12
    )


# ------------------------------------------------------------- invariances
def test_ratios_are_invariant_under_weight_renormalization():
    params, tree, grid, _ = make_setup(FORWARD_CONTROL)
    base = audit_backward_carleman(4, params, tree, grid, seed=3)
    shifted = audit_backward_carleman(4, params, tree, grid, seed=3, kappa_shift=4.0)
    for a, b in zip(base.ratios, shifted.ratios):
        assert abs(a - b) <= 1e-12 * abs(a)

    params_b, tree_b, grid_b, _ = make_setup(BACKWARD_CONTROL)
    base_f = audit_forward_carleman(4, params_b, tree_b, grid_b, seed=3)
    shifted_f = audit_forward_carleman(4, params_b, tree_b, grid_b, seed=3, kappa_shift=-2.5)
    for a, b in zip(base_f.ratios, shifted_f.ratios):
        assert abs(a - b) <= 1e-12 * abs(a)


def test_every_term_is_quadratic_in_the_data():
    params, tree, grid, _ = make_setup(FORWARD_CONTROL)
    one = audit_backward_carleman(3, params, tree, grid, seed=5, scale=1.0)
    three = audit_backward_carleman(3, params, tree, grid, seed=5, scale=3.0)
    for lhs1, lhs3, rhs1, rhs3 in zip(
        one.lhs_terms, three.lhs_terms, one.rhs_terms, three.rhs_terms
    ):
        for name in lhs1:
            assert lhs3[name] == pytest.approx(9.0 * lhs1[name], rel=1e-12)
        for name in rhs1:
            assert rhs3[name] == pytest.approx(9.0 * rhs1[name], rel=1e-12)


def test_zero_data_is_skipped_with_zero_records():
    params, tree, grid, _ = make_setup(FORWARD_CONTROL)
    report = audit_backward_carleman(3, params, tree, grid, seed=5, scale=0.0)
    assert report.zero_records == (0, 1, 2)
    assert report.counterexamples == ()
    assert all(math.isnan(r) for r in report.ratios)
    assert math.isnan(report.max_ratio) and math.isnan(report.median_ratio)


def test_counterexamples_are_recorded_never_dropped():
    ratios, zeros, counters, max_ratio, median_ratio = _ratio_statistics(
        [1.0, 0.0, 2.0], [0.5, 0.0, 0.0]
    )
    assert ratios[0] == 2.0
    assert math.isnan(ratios[1]) and zeros == [1]
    assert math.isinf(ratios[2]) and counters == [2]
    assert math.isinf(max_ratio)
    assert median_ratio == 2.0


# ------------------------------------------------------ deterministic audit
def test_deterministic_audit_and_lambda_sweep():
    params, _, grid, _ = make_setup(BACKWARD_CONTROL)
    maxima = []
    for factor in (1.0, 2.0, 4.0):
        prm = dataclasses.replace(params, lam=factor * params.lam)
        report = audit_deterministic_carleman(4, prm, grid, 24, seed=9)
        assert report.inequality == DETERMINISTIC_FORWARD
        assert all(math.isfinite(r) and r > 0.0 for r in report.ratios)
        maxima.append(report.max_ratio)
    assert all(math.isfinite(v) and v > 0.0 for v in maxima)


def test_mirrored_weights_keep_lhs_finite_despite_the_initial_singularity():
    # smooth data, no source: the trace and bulk terms all stay finite
    # because theta^2 collapses faster than gamma blows up as t -> 0+
    params, _, grid, spatial = make_setup(BACKWARD_CONTROL)
    steps = 48
    dt = params.T / steps
    mids = dt * (np.arange(steps) + 0.5)
    lam = calibrate_lambda(20.0, params.mu, params.m, params.T, spatial, grid, mids)
    prm = dataclasses.replace(params, lam=lam)
    flds = carleman_fields(prm, spatial, grid, mids)
    weights = _term_weights(DETERMINISTIC_FORWARD, flds, grid, 0.0)

    traj = implicit_heat_forward(np.sin(np.pi * grid.x), None, prm.T, steps, grid)
    cells = [traj[k][None, :] for k in range(steps)]
    sample = _SampleData(
        bulk={
            "state": cells,
            "state_gradient": [np.diff(v, axis=-1, append=0.0) / grid.h for v in cells],
            "source": [np.zeros((1, grid.n)) for _ in range(steps)],
        },
        trace={
            "state": traj[steps][None, :],
            "state_gradient": np.diff(traj[steps][None, :], axis=-1, append=0.0) / grid.h,
        },
    )
    lhs = _eval_side(TERM_TABLES[DETERMINISTIC_FORWARD]["lhs"], "lhs", weights, sample, dt, grid.h)
    assert all(math.isfinite(v) and v > 0.0 for v in lhs.values())


# ------------------------------------------------------------ forward audit
def test_forward_audit_with_and_without_the_noise_source():
    params, tree, grid, _ = make_setup(BACKWARD_CONTROL)
    full = audit_forward_carleman(4, params, tree, grid, seed=13)
    assert full.inequality == FORWARD_STOCHASTIC
    assert "noise_source" in full.rhs_terms[0]
    assert all(math.isfinite(r) and r > 0.0 for r in full.ratios)

    reduced = audit_forward_carleman(4, params, tree, grid, seed=13, include_g2=False)
    assert reduced.inequality == RANDOM_FORWARD
    assert reduced.term_order() == (
        tuple(t.name for t in TERM_TABLES[DETERMINISTIC_FORWARD]["lhs"]),
        tuple(t.name for t in TERM_TABLES[DETERMINISTIC_FORWARD]["rhs"]),
    )
    assert "trace_gradient" in reduced.lhs_terms[0]
    assert all(math.isfinite(r) and r > 0.0 for r in reduced.ratios)


# --------------------------------------------------------------- validation
def test_variant_and_argument_validation():
    params_f, tree, grid, _ = make_setup(FORWARD_CONTROL)
    params_b = dataclasses.replace(params_f, variant=BACKWARD_CONTROL)
    with pytest.raises(ParameterError, match="variant"):
        audit_backward_carleman(2, params_b, tree, grid, seed=1)
    with pytest.raises(ParameterError, match="variant"):
        audit_forward_carleman(2, params_f, tree, grid, seed=1)
    with pytest.raises(ParameterError, match="variant"):
        audit_deterministic_carleman(2, params_f, grid, 16, seed=1)
    with pytest.raises(ParameterError, match="n_samples"):
        audit_backward_carleman(0, params_f, tree, grid, seed=1)
    with pytest.raises(ParameterError, match="time_steps"):
        audit_deterministic_carleman(2, params_b, grid, 1, seed=1)


def test_reports_are_deterministic_in_the_seed():
    params, tree, grid, _ = make_setup(FORWARD_CONTROL)
    a = audit_backward_carleman(3, params, tree, grid, seed=21)
    b = audit_backward_carleman(3, params, tree, grid, seed=21)
    c = audit_backward_carleman(3, params, tree, grid, seed=22)
    assert a.ratios == b.ratios
    assert a.lhs_terms == b.lhs_terms
    assert a.ratios != c.ratios

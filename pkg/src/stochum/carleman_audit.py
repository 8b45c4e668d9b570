"""Numerical audits of the Carleman-type observability inequalities.

Each audit draws random data for the relevant equation, solves it with the
discrete solvers, evaluates every weighted term on both sides of the
inequality, and reports the per-sample ratio LHS/RHS together with summary
statistics.  Four inequalities are covered:

* ``backward_stochastic``  — backward SPDE with the weights that stay
  regular at t = 0 (trace terms at the initial time);
* ``deterministic_forward`` — deterministic heat equation with the mirrored
  weights (trace terms at the final time), on a dense time grid;
* ``random_forward``       — the same term set for the random (pathwise
  deterministic) forward equation on the scenario tree;
* ``forward_stochastic``   — forward SPDE with both a drift and a noise
  source, with a single final-time trace term.

The term lists are hard-coded tables of exponent triples (powers of lambda,
mu, xi); evaluators are driven entirely by those tables so tests can assert
the transcription term by term.  Every term carries exactly one factor of
theta^2 under the shared lattice normalization, so per-sample ratios are
invariant under a global renormalization of theta (`kappa_shift` exposes
this as a probe).  The audits validate boundedness and trends of the
ratios; the inequality constants themselves are not estimated, and a ratio
that grows under parameter refinement at fixed discretization is a
discretization artifact, not a counterexample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ParameterError
from .grids import Grid1D
from .pde import solve_backward_spde, solve_forward_spde, solve_random_forward
from .probability import (
    NoiseTree,
    gaussian_field,
    gaussian_leaf_vectors,
    gaussian_root_vector,
)
from .reference import implicit_heat_forward
from .weights import (
    BACKWARD_CONTROL,
    FORWARD_CONTROL,
    CarlemanFields,
    WeightParams,
    build_spatial_weight,
    carleman_fields,
)

__all__ = [
    "BACKWARD_STOCHASTIC",
    "DETERMINISTIC_FORWARD",
    "RANDOM_FORWARD",
    "FORWARD_STOCHASTIC",
    "INEQUALITIES",
    "TermSpec",
    "TERM_TABLES",
    "AuditReport",
    "audit_backward_carleman",
    "audit_deterministic_carleman",
    "audit_forward_carleman",
]

BACKWARD_STOCHASTIC = "backward_stochastic"
DETERMINISTIC_FORWARD = "deterministic_forward"
RANDOM_FORWARD = "random_forward"
FORWARD_STOCHASTIC = "forward_stochastic"
INEQUALITIES = (
    BACKWARD_STOCHASTIC,
    DETERMINISTIC_FORWARD,
    RANDOM_FORWARD,
    FORWARD_STOCHASTIC,
)


@dataclass(frozen=True)
class TermSpec:
    """One weighted quadratic term of an inequality.

    The term value is

        lam^lam_pow * mu^mu_pow * [e^{2 mu (6m+1)}] *
            integral of xi^xi_pow theta^2 |field|^2

    over the stated domain, with the bracketed gauge factor only when
    ``exp_mu_factor`` is set (the initial/final-time state traces carry it).
    ``target`` names the solution piece the square applies to; ``domain``
    is one of "bulk", "bulk_d0" (restricted to the control region),
    "trace_start" (t = 0) or "trace_end" (t = T).
    """

    name: str
    target: str
    domain: str
    lam_pow: int
    mu_pow: int
    xi_pow: int
    exp_mu_factor: bool = False

    def scalar_factor(self, params: WeightParams) -> float:
        fac = params.lam**self.lam_pow * params.mu**self.mu_pow
        if self.exp_mu_factor:
            fac *= math.exp(2.0 * params.mu * (6.0 * params.m + 1.0))
        return fac


# Term-by-term transcriptions of the four inequalities.  Order follows the
# statements; tuples are (name, target, domain, lam_pow, mu_pow, xi_pow).
_MIRRORED_LHS = (
    TermSpec("bulk_gradient", "state_gradient", "bulk", 1, 2, 1),
    TermSpec("bulk_state", "state", "bulk", 3, 4, 3),
    TermSpec("trace_gradient", "state_gradient", "trace_end", 0, 0, 0),
    TermSpec("trace_state", "state", "trace_end", 2, 3, 0, exp_mu_factor=True),
)
_MIRRORED_RHS = (
    TermSpec("drift_source", "source", "bulk", 0, 0, 0),
    TermSpec("observation_state", "state", "bulk_d0", 3, 4, 3),
)

TERM_TABLES: dict[str, dict[str, tuple[TermSpec, ...]]] = {
    BACKWARD_STOCHASTIC: {
        "lhs": (
            TermSpec("trace_gradient", "state_gradient", "trace_start", 0, 0, 0),
            TermSpec("trace_state", "state", "trace_start", 2, 3, 0, exp_mu_factor=True),
            TermSpec("bulk_gradient", "state_gradient", "bulk", 1, 2, 1),
            TermSpec("bulk_state", "state", "bulk", 3, 4, 3),
        ),
        "rhs": (
            TermSpec("observation_state", "state", "bulk_d0", 3, 4, 3),
            TermSpec("drift_source", "source", "bulk", 0, 0, 0),
            TermSpec("martingale_state", "martingale", "bulk", 2, 2, 3),
        ),
    },
    DETERMINISTIC_FORWARD: {"lhs": _MIRRORED_LHS, "rhs": _MIRRORED_RHS},
    RANDOM_FORWARD: {"lhs": _MIRRORED_LHS, "rhs": _MIRRORED_RHS},
    FORWARD_STOCHASTIC: {
        "lhs": (
            TermSpec("bulk_gradient", "state_gradient", "bulk", 1, 2, 1),
            TermSpec("bulk_state", "state", "bulk", 3, 4, 3),
            TermSpec("trace_state", "state", "trace_end", 2, 2, 0),
        ),
        "rhs": (
            TermSpec("drift_source", "source", "bulk", 0, 0, 0),
            TermSpec("noise_source", "noise_source", "bulk", 2, 2, 2),
            TermSpec("observation_state", "state", "bulk_d0", 3, 4, 3),
        ),
    },
}


@dataclass(frozen=True)
class AuditReport:
    """Ratio statistics for one inequality over a batch of random samples.

    ``lhs_terms``/``rhs_terms`` hold one name -> value dict per sample, in
    table order.  ``ratios`` has one entry per sample: LHS/RHS, ``nan`` for
    samples whose data (hence both sides) vanished (indices also listed in
    ``zero_records``), and ``inf`` when the RHS vanished with a positive
    LHS (a counterexample, listed in ``counterexamples`` and never
    dropped).  ``max_ratio`` ignores zero records; ``median_ratio`` is over
    the finite ratios.
    """

    inequality: str
    samples: int
    lhs_terms: tuple[dict[str, float], ...]
    rhs_terms: tuple[dict[str, float], ...]
    ratios: tuple[float, ...]
    max_ratio: float
    median_ratio: float
    params: WeightParams
    zero_records: tuple[int, ...] = ()
    counterexamples: tuple[int, ...] = ()

    def term_order(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        """Term names (lhs, rhs) in the order of the transcription tables."""
        table = TERM_TABLES[self.inequality]
        return (
            tuple(t.name for t in table["lhs"]),
            tuple(t.name for t in table["rhs"]),
        )


@dataclass
class _SampleData:
    """Solution pieces of one sample: per-cell arrays and endpoint traces.

    ``bulk[target]`` is a list over time cells of (nodes, n) arrays (a
    dense solution uses a single node per cell); ``trace[target]`` is the
    (nodes, n) array at the non-singular endpoint.
    """

    bulk: dict[str, list[np.ndarray]]
    trace: dict[str, np.ndarray]


def _grad(rows: np.ndarray, h: float) -> np.ndarray:
    """Forward differences on interior nodes with a zero Dirichlet ghost."""
    out = np.empty_like(rows)
    out[..., :-1] = (rows[..., 1:] - rows[..., :-1]) / h
    out[..., -1] = -rows[..., -1] / h
    return out


def _term_weights(
    inequality: str, flds: CarlemanFields, grid: Grid1D, kappa_shift: float
) -> dict[tuple[str, str], np.ndarray]:
    """Precompute the full weight (scalar factor folded in) for every term.

    Bulk terms get a (cells, n) table on the midpoint lattice; trace terms
    a single (n,) row at the stated endpoint.  ``kappa_shift`` enters every
    exponent as -2*shift, i.e. a global renormalization theta -> c*theta.
    """
    table = TERM_TABLES[inequality]
    shift = -2.0 * kappa_shift
    out: dict[tuple[str, str], np.ndarray] = {}
    for side in ("lhs", "rhs"):
        for term in table[side]:
            if term.domain in ("bulk", "bulk_d0"):
                w = flds.weight_table(2.0, float(term.xi_pow), shift)
                if term.domain == "bulk_d0":
                    w = w * grid.mask_d0
            elif term.domain in ("trace_start", "trace_end"):
                t = 0.0 if term.domain == "trace_start" else flds.params.T
                w = flds.trace_weight(t, 2.0, float(term.xi_pow), shift)
            else:  # pragma: no cover - table is module-local
                raise ParameterError(f"unknown term domain {term.domain!r}")
            out[(side, term.name)] = term.scalar_factor(flds.params) * w
    return out


def _eval_side(
    terms: tuple[TermSpec, ...],
    side: str,
    weights: dict[tuple[str, str], np.ndarray],
    sample: _SampleData,
    dt: float,
    h: float,
) -> dict[str, float]:
    out: dict[str, float] = {}
    for term in terms:
        w = weights[(side, term.name)]
        if term.domain in ("bulk", "bulk_d0"):
            total = 0.0
            for k, arr in enumerate(sample.bulk[term.target]):
                # mean over equally probable nodes = tree expectation
                total += float(np.mean(np.square(arr) @ w[k]))
            value = dt * h * total
        else:
            arr = sample.trace[term.target]
            value = h * float(np.mean(np.square(arr) @ w))
        if not (np.isfinite(value) and value >= 0.0):
            raise NumericError(
                f"audit term {term.name!r} must be finite and nonnegative, got {value}"
            )
        out[term.name] = value
    return out


def _ratio_statistics(
    lhs_totals: list[float], rhs_totals: list[float]
) -> tuple[list[float], list[int], list[int], float, float]:
    """Per-sample ratios plus zero-record / counterexample bookkeeping."""
    ratios: list[float] = []
    zeros: list[int] = []
    counters: list[int] = []
    for i, (lhs, rhs) in enumerate(zip(lhs_totals, rhs_totals)):
        if rhs == 0.0:
            if lhs == 0.0:
                zeros.append(i)
                ratios.append(math.nan)
            else:
                counters.append(i)
                ratios.append(math.inf)
        else:
            ratios.append(lhs / rhs)
    valid = [r for r in ratios if not math.isnan(r)]
    max_ratio = max(valid) if valid else math.nan
    finite = [r for r in valid if math.isfinite(r)]
    median_ratio = float(np.median(finite)) if finite else math.nan
    return ratios, zeros, counters, max_ratio, median_ratio


def _check_common(n_samples: int, params: WeightParams, required_variant: str) -> None:
    if not (isinstance(n_samples, (int, np.integer)) and n_samples >= 1):
        raise ParameterError(f"n_samples must be a positive integer, got {n_samples!r}")
    if params.variant != required_variant:
        raise ParameterError(
            f"this inequality uses the {required_variant!r} weights, "
            f"got variant {params.variant!r}"
        )


def _run_audit(
    inequality: str,
    n_samples: int,
    flds: CarlemanFields,
    grid: Grid1D,
    dt: float,
    kappa_shift: float,
    draw_sample,
) -> AuditReport:
    table = TERM_TABLES[inequality]
    weights = _term_weights(inequality, flds, grid, kappa_shift)
    lhs_terms: list[dict[str, float]] = []
    rhs_terms: list[dict[str, float]] = []
    lhs_totals: list[float] = []
    rhs_totals: list[float] = []
    for i in range(n_samples):
        sample = draw_sample(i)
        lhs = _eval_side(table["lhs"], "lhs", weights, sample, dt, grid.h)
        rhs = _eval_side(table["rhs"], "rhs", weights, sample, dt, grid.h)
        lhs_terms.append(lhs)
        rhs_terms.append(rhs)
        lhs_totals.append(sum(lhs.values()))
        rhs_totals.append(sum(rhs.values()))
    ratios, zeros, counters, max_ratio, median_ratio = _ratio_statistics(
        lhs_totals, rhs_totals
    )
    return AuditReport(
        inequality=inequality,
        samples=int(n_samples),
        lhs_terms=tuple(lhs_terms),
        rhs_terms=tuple(rhs_terms),
        ratios=tuple(ratios),
        max_ratio=max_ratio,
        median_ratio=median_ratio,
        params=flds.params,
        zero_records=tuple(zeros),
        counterexamples=tuple(counters),
    )


def audit_backward_carleman(
    n_samples: int,
    params: WeightParams,
    tree: NoiseTree,
    grid: Grid1D,
    seed: int,
    *,
    d_prime: tuple[float, float] = (0.4, 0.6),
    kappa_shift: float = 0.0,
    scale: float = 1.0,
    substeps: int = 1,
) -> AuditReport:
    """Audit the backward-SPDE inequality with initial-time trace terms.

    Each sample draws random terminal data z_T and a drift source, solves
    the backward SPDE on the scenario tree, and evaluates the weighted
    terms; the martingale part of the solution appears on the right-hand
    side.  Requires the weight variant that is regular at t = 0.  ``scale``
    multiplies the drawn data (the terms are exactly quadratic in it), and
    ``kappa_shift`` renormalizes theta globally; neither changes a ratio.
    """
    _check_common(n_samples, params, FORWARD_CONTROL)
    spatial = build_spatial_weight(grid.d0, d_prime, grid)
    K = tree.depth
    mids = tree.dt * (np.arange(K) + 0.5)
    flds = carleman_fields(params, spatial, grid, mids)

    def draw(i: int) -> _SampleData:
        zT = gaussian_leaf_vectors(
            tree, grid.n, seed, f"audit.{BACKWARD_STOCHASTIC}.zT.{i}", scale=scale
        )
        xi = gaussian_field(
            tree, grid.n, seed, f"audit.{BACKWARD_STOCHASTIC}.Xi.{i}", levels=K, scale=scale
        )
        z, zrep = solve_backward_spde(zT, xi, tree, grid, substeps)
        cells = z.values[:K]
        return _SampleData(
            bulk={
                "state": cells,
                "state_gradient": [_grad(v, grid.h) for v in cells],
                "source": xi.values,
                "martingale": zrep.values,
            },
            trace={
                "state": z.values[0],
                "state_gradient": _grad(z.values[0], grid.h),
            },
        )

    return _run_audit(BACKWARD_STOCHASTIC, n_samples, flds, grid, tree.dt, kappa_shift, draw)


def audit_deterministic_carleman(
    n_samples: int,
    params: WeightParams,
    grid: Grid1D,
    time_steps: int,
    seed: int,
    *,
    d_prime: tuple[float, float] = (0.4, 0.6),
    kappa_shift: float = 0.0,
    scale: float = 1.0,
    substeps: int = 1,
) -> AuditReport:
    """Audit the deterministic heat-equation inequality on a dense time grid.

    Each sample draws a random initial state and source, integrates the
    heat equation with the dense implicit solver over ``time_steps`` uniform
    steps, and evaluates the mirrored-weight terms with final-time traces.
    Requires the weight variant that is regular at t = T.
    """
    _check_common(n_samples, params, BACKWARD_CONTROL)
    if not (isinstance(time_steps, (int, np.integer)) and time_steps >= 2):
        raise ParameterError(f"time_steps must be an integer >= 2, got {time_steps!r}")
    spatial = build_spatial_weight(grid.d0, d_prime, grid)
    dt = params.T / time_steps
    mids = dt * (np.arange(time_steps) + 0.5)
    flds = carleman_fields(params, spatial, grid, mids)

    def draw(i: int) -> _SampleData:
        q0 = gaussian_root_vector(
            grid.n, seed, f"audit.{DETERMINISTIC_FORWARD}.q0.{i}", scale=scale
        )
        g = np.stack(
            [
                gaussian_root_vector(
                    grid.n, seed, f"audit.{DETERMINISTIC_FORWARD}.g.{i}.{k}", scale=scale
                )
                for k in range(time_steps)
            ]
        )
        traj = implicit_heat_forward(q0, g, params.T, time_steps, grid, substeps)
        cells = [traj[k][None, :] for k in range(time_steps)]
        return _SampleData(
            bulk={
                "state": cells,
                "state_gradient": [_grad(v, grid.h) for v in cells],
                "source": [g[k][None, :] for k in range(time_steps)],
            },
            trace={
                "state": traj[time_steps][None, :],
                "state_gradient": _grad(traj[time_steps][None, :], grid.h),
            },
        )

    return _run_audit(DETERMINISTIC_FORWARD, n_samples, flds, grid, dt, kappa_shift, draw)


def audit_forward_carleman(
    n_samples: int,
    params: WeightParams,
    tree: NoiseTree,
    grid: Grid1D,
    seed: int,
    *,
    include_g2: bool = True,
    d_prime: tuple[float, float] = (0.4, 0.6),
    kappa_shift: float = 0.0,
    scale: float = 1.0,
    substeps: int = 1,
) -> AuditReport:
    """Audit the forward-equation inequalities with final-time trace terms.

    With ``include_g2=True`` each sample drives the forward SPDE with both
    a drift and a noise source and the single final-time state trace is
    audited.  With ``include_g2=False`` the noise source is dropped, the
    equation degenerates to the random (pathwise deterministic) forward
    equation, and the audited term set gains the final-time gradient trace
    and the gauge-weighted state trace of the deterministic inequality.
    Requires the weight variant that is regular at t = T.
    """
    _check_common(n_samples, params, BACKWARD_CONTROL)
    spatial = build_spatial_weight(grid.d0, d_prime, grid)
    K = tree.depth
    mids = tree.dt * (np.arange(K) + 0.5)
    flds = carleman_fields(params, spatial, grid, mids)
    inequality = FORWARD_STOCHASTIC if include_g2 else RANDOM_FORWARD

    def draw(i: int) -> _SampleData:
        q0 = gaussian_root_vector(grid.n, seed, f"audit.{inequality}.q0.{i}", scale=scale)
        if include_g2:
            g1 = gaussian_field(
                tree, grid.n, seed, f"audit.{inequality}.G1.{i}", levels=K, scale=scale
            )
            g2 = gaussian_field(
                tree, grid.n, seed, f"audit.{inequality}.G2.{i}", levels=K, scale=scale
            )
            q = solve_forward_spde(q0, g1, g2, None, None, tree, grid, substeps)
        else:
            g1 = gaussian_field(
                tree, grid.n, seed, f"audit.{inequality}.g.{i}", levels=K, scale=scale
            )
            g2 = None
            q = solve_random_forward(q0, g1, tree, grid, substeps)
        cells = q.values[:K]
        bulk = {
            "state": cells,
            "state_gradient": [_grad(v, grid.h) for v in cells],
            "source": g1.values,
        }
        if g2 is not None:
            bulk["noise_source"] = g2.values
        return _SampleData(
            bulk=bulk,
            trace={
                "state": q.values[K],
                "state_gradient": _grad(q.values[K], grid.h),
            },
        )

    return _run_audit(inequality, n_samples, flds, grid, tree.dt, kappa_shift, draw)

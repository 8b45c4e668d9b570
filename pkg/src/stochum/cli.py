"""Experiment orchestration: JSON configs in, reproducible artifacts out.

``stochum run config.json`` validates the configuration against a strict
schema (unknown keys are errors), resolves documented defaults, executes
the named experiment and persists CSV/JSON artifacts plus rendered PNG
figures and a ``manifest.json`` sufficient to re-run the experiment
exactly.  ``stochum validate config.json`` performs the full validation
(schema, geometry, numeric regime) without computing anything.

Determinism contract: a fixed (config, seed) pair produces byte-identical
artifacts across runs and across ``--workers`` counts.  All random data is
drawn from counter-based streams keyed on (seed, role, node), workers only
fan out independent jobs, and results are always collected in a fixed
order before anything is written.

Exit codes: 0 success, 2 validation error, 3 numeric failure, 4
non-convergence (artifacts are still written).
"""
from __future__ import annotations

import csv
import importlib.metadata
import json
import math
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import click
import jsonschema
import numpy as np
import scipy

from . import __version__, report
from .carleman_audit import (
    audit_backward_carleman,
    audit_deterministic_carleman,
    audit_forward_carleman,
)
from .errors import StochumError
from .grids import Grid1D, make_grid
from .hum import (
    BACKWARD_ONE_CONTROL,
    FORWARD_TWO_CONTROLS,
    ControlSolution,
    HUMConfig,
    solve_hum,
)
from .probability import NoiseTree, build_tree, gaussian_leaf_vectors, gaussian_root_vector
from .semilinear import (
    NONLINEARITY_KINDS,
    SCALED_SIN,
    FixedPointTrace,
    NonlinearitySpec,
    fixed_point_backward,
    fixed_point_forward,
)
from .weights import (
    BACKWARD_CONTROL,
    FORWARD_CONTROL,
    SpatialWeight,
    WeightParams,
    build_spatial_weight,
    calibrate_lambda,
    carleman_fields,
)

EXPERIMENTS = (
    "weights-dump",
    "forward-linear",
    "backward-linear",
    "forward-semilinear",
    "backward-semilinear",
    "carleman-audit",
    "eps-sweep",
)

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_INTERVAL = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 8},
                "d0": _INTERVAL,
                "d_prime": _INTERVAL,
            },
        },
        "tree": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "K": {"type": "integer", "minimum": 1},
                "substeps": {"type": "integer", "minimum": 1},
            },
        },
        "weights": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mu": _POSITIVE,
                "m": {"type": "number", "minimum": 1},
                "T": _POSITIVE,
                "lambda": _POSITIVE,
                "auto_log_range": _POSITIVE,
            },
        },
        "hum": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eps": _POSITIVE,
                "eps_list": {"type": "array", "items": _POSITIVE, "minItems": 2},
                "cg_tol": _POSITIVE,
                "cg_max_iter": {"type": "integer", "minimum": 1},
            },
        },
        "nonlinearity": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(NONLINEARITY_KINDS)},
                "L": {"type": "number", "minimum": 0},
                "g_const": {"type": "number", "minimum": 0},
            },
        },
        "audit": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_samples": {"type": "integer", "minimum": 1},
                "time_steps": {"type": "integer", "minimum": 2},
                "include_g2": {"type": "boolean"},
            },
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "out_dir": {"type": "string"},
    },
}

DEFAULTS = {
    "geometry": {"n": 63, "d0": [0.3, 0.7], "d_prime": [0.4, 0.6]},
    "tree": {"K": 8, "substeps": 1},
    "weights": {"mu": 0.3, "m": 1, "T": 0.5, "auto_log_range": 20.0},
    "hum": {"eps": 1e-4, "cg_tol": 1e-8, "cg_max_iter": 500},
    "nonlinearity": {"kind": SCALED_SIN, "L": 0.5, "g_const": 0.2},
    "audit": {"n_samples": 20, "time_steps": 64, "include_g2": True},
    "seed": 42,
    "out_dir": "out",
}

_DEFAULT_EPS_LIST = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]


# ------------------------------------------------------------ configuration
def _merge_defaults(raw: dict) -> dict:
    cfg: dict = {"experiment": raw["experiment"]}
    for key, default in DEFAULTS.items():
        if isinstance(default, dict):
            section = dict(default)
            section.update(raw.get(key, {}))
            cfg[key] = section
        else:
            cfg[key] = raw.get(key, default)
    return cfg


def diagnose_config(raw) -> tuple[dict | None, list[str], list[str]]:
    """Validate and resolve a raw config; returns (resolved, errors, warnings).

    ``resolved`` is None whenever errors are present.  Warnings (currently:
    weight dynamic range beyond the exponent clamp) never block a run.
    """
    errors: list[str] = []
    warnings: list[str] = []
    if not isinstance(raw, dict):
        return None, ["config: top level must be a JSON object"], warnings
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    for err in sorted(validator.iter_errors(raw), key=lambda e: e.json_path):
        errors.append(f"{err.json_path}: {err.message}")
    if errors:
        return None, errors, warnings

    cfg = _merge_defaults(raw)
    user_weights = raw.get("weights", {})
    if "lambda" in user_weights and "auto_log_range" in user_weights:
        errors.append("$.weights: specify either lambda or auto_log_range, not both")
    elif "lambda" in user_weights:
        cfg["weights"].pop("auto_log_range", None)
    user_hum = raw.get("hum", {})
    if "eps" in user_hum and "eps_list" in user_hum:
        errors.append("$.hum: specify either eps or eps_list, not both")
    if cfg["experiment"] == "eps-sweep":
        if "eps" in user_hum:
            errors.append("$.hum.eps: the eps-sweep experiment takes eps_list")
        cfg["hum"].pop("eps", None)
        cfg["hum"].setdefault("eps_list", list(_DEFAULT_EPS_LIST))
    else:
        if "eps_list" in user_hum:
            errors.append("$.hum.eps_list: only the eps-sweep experiment takes a list")
        cfg["hum"].pop("eps_list", None)
    if errors:
        return None, errors, warnings

    try:
        ctx = _build_context(cfg)
    except StochumError as exc:
        return None, [str(exc)], warnings
    for variant in _variants_for(cfg["experiment"]):
        flds = ctx.fields(variant)
        spread = 2.0 * float(flds.ell.max() - flds.ell.min())
        if spread > flds.clamp:
            warnings.append(
                f"weights ({variant}): exponent dynamic range {spread:.1f} exceeds "
                f"the clamp {flds.clamp:.0f}; weight tables will saturate"
            )
    return cfg, errors, warnings


def _variants_for(experiment: str) -> tuple[str, ...]:
    if experiment in ("backward-linear", "backward-semilinear"):
        return (BACKWARD_CONTROL,)
    if experiment == "carleman-audit":
        return (FORWARD_CONTROL, BACKWARD_CONTROL)
    return (FORWARD_CONTROL,)


@dataclass
class _Context:
    """Resolved geometry/tree/weight objects shared by the experiments."""

    cfg: dict
    grid: Grid1D
    spatial: SpatialWeight
    tree: NoiseTree
    mids: np.ndarray
    lam: float

    def lam_for(self, time_nodes: np.ndarray) -> float:
        w = self.cfg["weights"]
        if "lambda" in w:
            return float(w["lambda"])
        return calibrate_lambda(
            float(w["auto_log_range"]), float(w["mu"]), float(w["m"]), float(w["T"]),
            self.spatial, self.grid, time_nodes,
        )

    def params(self, variant: str, lam: float | None = None) -> WeightParams:
        w = self.cfg["weights"]
        return WeightParams(
            lam=self.lam if lam is None else lam,
            mu=float(w["mu"]),
            m=float(w["m"]),
            T=float(w["T"]),
            variant=variant,
        )

    def fields(self, variant: str, eps: float = 0.0):
        return carleman_fields(
            self.params(variant), self.spatial, self.grid, self.mids, eps=eps
        )

    def hum_config(self, problem: str, eps: float) -> HUMConfig:
        variant = FORWARD_CONTROL if problem == FORWARD_TWO_CONTROLS else BACKWARD_CONTROL
        return HUMConfig(
            problem=problem,
            eps=eps,
            weight_fields=self.fields(variant, eps=eps),
            tree=self.tree,
            grid=self.grid,
            substeps=int(self.cfg["tree"]["substeps"]),
            cg_tol=float(self.cfg["hum"]["cg_tol"]),
            cg_max_iter=int(self.cfg["hum"]["cg_max_iter"]),
        )


def _build_context(cfg: dict) -> _Context:
    geo = cfg["geometry"]
    grid = make_grid(int(geo["n"]), tuple(geo["d0"]))
    spatial = build_spatial_weight(tuple(geo["d0"]), tuple(geo["d_prime"]), grid)
    tree = build_tree(int(cfg["tree"]["K"]), float(cfg["weights"]["T"]))
    mids = tree.dt * (np.arange(tree.depth) + 0.5)
    ctx = _Context(cfg=cfg, grid=grid, spatial=spatial, tree=tree, mids=mids, lam=0.0)
    ctx.lam = ctx.lam_for(mids)
    return ctx


# ----------------------------------------------------------------- writers
def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        f = float(value)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return repr(f)
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isfinite(f):
            return f
        return "NaN" if math.isnan(f) else ("Infinity" if f > 0 else "-Infinity")
    return obj


def _write_json(path: Path, obj: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_sanitize(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _field_rows(field, grid: Grid1D):
    for level, arr in enumerate(field.values):
        for node in range(arr.shape[0]):
            for i in range(grid.n):
                yield level, node, i, grid.x[i], arr[node, i]


def _control_rows(sol: ControlSolution, grid: Grid1D):
    for level, harr in enumerate(sol.h.values):
        Harr = sol.H.values[level] if sol.H is not None else None
        for node in range(harr.shape[0]):
            for i in range(grid.n):
                row = [level, node, i, grid.x[i], harr[node, i]]
                if Harr is not None:
                    row.append(Harr[node, i])
                yield row


def _pmap(fn, items, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -------------------------------------------------------------- experiments
def _solution_payload(experiment: str, sol: ControlSolution) -> dict:
    payload = {"experiment": experiment, "problem": sol.problem}
    payload.update(sol.diagnostics())
    payload["char_residual"] = sol.char_residual
    payload["cost_history"] = list(sol.cost_history)
    payload["residual_history"] = list(sol.residual_history)
    return payload


def _write_solution_artifacts(
    experiment: str, sol: ControlSolution, ctx: _Context, out: Path
) -> list[str]:
    _write_json(out / "solution.json", _solution_payload(experiment, sol))
    headers = ["level", "node", "x_index", "x", "h"]
    if sol.H is not None:
        headers.append("H")
    _write_csv(out / "controls.csv", headers, _control_rows(sol, ctx.grid))
    _write_csv(
        out / "state.csv",
        ["level", "node", "x_index", "x", "y"],
        _field_rows(sol.y, ctx.grid),
    )
    report.save_history_figure(out / "fig_history.png", sol.cost_history, sol.residual_history)
    times = ctx.tree.dt * np.arange(ctx.tree.depth + 1)
    mean_state = np.stack([arr.mean(axis=0) for arr in sol.y.values])
    report.save_state_figure(out / "fig_state.png", times, ctx.grid.x, mean_state)
    return ["solution.json", "controls.csv", "state.csv", "fig_history.png", "fig_state.png"]


def _run_weights_dump(ctx: _Context, out: Path, workers: int) -> tuple[int, list[str]]:
    flds = ctx.fields(FORWARD_CONTROL)
    kappa = flds.norm_offset
    rows = (
        (t, x, flds.phi[k, i], flds.xi[k, i], flds.ell[k, i], flds.ell[k, i] - kappa)
        for k, t in enumerate(flds.time_nodes)
        for i, x in enumerate(flds.x)
    )
    _write_csv(out / "weights.csv", ["t", "x", "phi", "xi", "ell", "ell_minus_kappa"], rows)
    report.save_weight_figure(out / "fig_weights.png", flds)
    return 0, ["weights.csv", "fig_weights.png"]


def _run_linear(ctx: _Context, out: Path, workers: int) -> tuple[int, list[str]]:
    experiment = ctx.cfg["experiment"]
    seed = int(ctx.cfg["seed"])
    eps = float(ctx.cfg["hum"]["eps"])
    if experiment == "forward-linear":
        hcfg = ctx.hum_config(FORWARD_TWO_CONTROLS, eps)
        y0 = gaussian_root_vector(ctx.grid.n, seed, "cli.y0")
        sol = solve_hum((y0, None, None), hcfg)
    else:
        hcfg = ctx.hum_config(BACKWARD_ONE_CONTROL, eps)
        yT = gaussian_leaf_vectors(ctx.tree, ctx.grid.n, seed, "cli.yT")
        sol = solve_hum((yT, None), hcfg)
    outputs = _write_solution_artifacts(experiment, sol, ctx, out)
    return (0 if sol.converged else 4), outputs


def _trace_rows(trace: FixedPointTrace):
    for j, it in enumerate(trace.iterates, start=1):
        ratio = trace.contraction_ratios[j - 2] if j >= 2 else None
        yield j, it.delta, ratio, it.cost, it.terminal_norm_sq, it.cg_iters


def _run_semilinear(ctx: _Context, out: Path, workers: int) -> tuple[int, list[str]]:
    experiment = ctx.cfg["experiment"]
    seed = int(ctx.cfg["seed"])
    eps = float(ctx.cfg["hum"]["eps"])
    nl = ctx.cfg["nonlinearity"]
    spec = NonlinearitySpec(nl["kind"], L=float(nl["L"]), g_const=float(nl["g_const"]))
    if experiment == "forward-semilinear":
        hcfg = ctx.hum_config(FORWARD_TWO_CONTROLS, eps)
        y0 = gaussian_root_vector(ctx.grid.n, seed, "cli.y0")
        trace = fixed_point_forward(y0, spec, hcfg)
    else:
        hcfg = ctx.hum_config(BACKWARD_ONE_CONTROL, eps)
        yT = gaussian_leaf_vectors(ctx.tree, ctx.grid.n, seed, "cli.yT")
        trace = fixed_point_backward(yT, spec, hcfg)
    _write_csv(
        out / "trace.csv",
        ["iter", "s_norm_delta", "ratio", "cost", "terminal_norm_sq", "cg_iters"],
        _trace_rows(trace),
    )
    sol = trace.final_solution
    payload = _solution_payload(experiment, sol)
    payload["fixed_point"] = {
        "converged": trace.converged,
        "diverged": trace.diverged,
        "iterations": len(trace.iterates),
        "contraction_ratios": list(trace.contraction_ratios),
        "final_terminal_norm_sq": trace.final_terminal_norm_sq,
        "nonlinearity": {"kind": nl["kind"], "L": nl["L"], "g_const": nl["g_const"]},
    }
    _write_json(out / "solution.json", payload)
    headers = ["level", "node", "x_index", "x", "h"] + (["H"] if sol.H is not None else [])
    _write_csv(out / "controls.csv", headers, _control_rows(sol, ctx.grid))
    report.save_fixed_point_figure(out / "fig_trace.png", trace.deltas, trace.contraction_ratios)
    outputs = ["trace.csv", "solution.json", "controls.csv", "fig_trace.png"]
    return (0 if trace.converged else 4), outputs


def _run_carleman_audit(ctx: _Context, out: Path, workers: int) -> tuple[int, list[str]]:
    seed = int(ctx.cfg["seed"])
    audit = ctx.cfg["audit"]
    n_samples = int(audit["n_samples"])
    time_steps = int(audit["time_steps"])
    include_g2 = bool(audit["include_g2"])
    d_prime = tuple(ctx.cfg["geometry"]["d_prime"])
    dense_mids = (float(ctx.cfg["weights"]["T"]) / time_steps) * (np.arange(time_steps) + 0.5)

    jobs = [
        lambda: audit_backward_carleman(
            n_samples, ctx.params(FORWARD_CONTROL), ctx.tree, ctx.grid, seed, d_prime=d_prime
        ),
        lambda: audit_deterministic_carleman(
            n_samples,
            ctx.params(BACKWARD_CONTROL, lam=ctx.lam_for(dense_mids)),
            ctx.grid,
            time_steps,
            seed,
            d_prime=d_prime,
        ),
        lambda: audit_forward_carleman(
            n_samples,
            ctx.params(BACKWARD_CONTROL),
            ctx.tree,
            ctx.grid,
            seed,
            include_g2=include_g2,
            d_prime=d_prime,
        ),
    ]
    reports = _pmap(lambda job: job(), jobs, workers)

    outputs = []
    summary = {}
    ordered = {}
    for rep in reports:
        lhs_names, rhs_names = rep.term_order()
        rows = []
        for s in range(rep.samples):
            ratio = rep.ratios[s]
            rows.append(
                [s]
                + [rep.lhs_terms[s][name] for name in lhs_names]
                + [rep.rhs_terms[s][name] for name in rhs_names]
                + [None if math.isnan(ratio) else ratio]
            )
        fname = f"audit_{rep.inequality}.csv"
        _write_csv(out / fname, ["sample", *lhs_names, *rhs_names, "ratio"], rows)
        outputs.append(fname)
        prm = rep.params
        summary[rep.inequality] = {
            "samples": rep.samples,
            "max_ratio": rep.max_ratio,
            "median_ratio": rep.median_ratio,
            "zero_records": list(rep.zero_records),
            "counterexamples": list(rep.counterexamples),
            "params": {
                "lambda": prm.lam,
                "mu": prm.mu,
                "m": prm.m,
                "T": prm.T,
                "variant": prm.variant,
            },
        }
        ordered[rep.inequality] = rep
    _write_json(out / "audit.json", {"inequalities": summary})
    report.save_audit_figure(out / "fig_audit.png", ordered)
    return 0, [*outputs, "audit.json", "fig_audit.png"]


def _run_eps_sweep(ctx: _Context, out: Path, workers: int) -> tuple[int, list[str]]:
    seed = int(ctx.cfg["seed"])
    eps_list = [float(e) for e in ctx.cfg["hum"]["eps_list"]]
    y0 = gaussian_root_vector(ctx.grid.n, seed, "cli.y0")

    def solve_point(eps: float) -> ControlSolution:
        return solve_hum((y0, None, None), ctx.hum_config(FORWARD_TWO_CONTROLS, eps))

    sols = _pmap(solve_point, eps_list, workers)
    terminal = [sol.terminal_norm_sq for sol in sols]
    slope, intercept = np.polyfit(
        np.log(eps_list), np.log(np.maximum(terminal, 1e-300)), 1
    )
    rows = [
        (eps, sol.terminal_norm_sq, sol.cost, sol.cg_iters, sol.converged, float(slope))
        for eps, sol in zip(eps_list, sols)
    ]
    _write_csv(
        out / "sweep.csv",
        ["eps", "terminal_norm_sq", "cost", "cg_iters", "converged", "slope"],
        rows,
    )
    report.save_sweep_figure(out / "fig_sweep.png", eps_list, terminal, float(slope), float(intercept))
    status = 0 if all(sol.converged for sol in sols) else 4
    return status, ["sweep.csv", "fig_sweep.png"]


_RUNNERS = {
    "weights-dump": _run_weights_dump,
    "forward-linear": _run_linear,
    "backward-linear": _run_linear,
    "forward-semilinear": _run_semilinear,
    "backward-semilinear": _run_semilinear,
    "carleman-audit": _run_carleman_audit,
    "eps-sweep": _run_eps_sweep,
}


def _versions() -> dict:
    import matplotlib

    return {
        "python": platform.python_version(),
        "stochum": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
        "click": importlib.metadata.version("click"),
        "jsonschema": importlib.metadata.version("jsonschema"),
    }


# ------------------------------------------------------------------ commands
@click.group()
def main() -> None:
    """Penalized-HUM control experiments on the Brownian scenario tree."""


@main.command("run")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="Override out_dir.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--workers", type=click.IntRange(1, 64), default=1, show_default=True,
              help="Worker threads for independent samples/sweep points.")
def run_command(config_path: str, out_dir: str | None, seed: int | None, workers: int) -> None:
    """Run the experiment described by CONFIG_PATH."""
    try:
        raw = json.loads(Path(config_path).read_text())
    except json.JSONDecodeError as exc:
        click.echo(f"validation error: config is not valid JSON: {exc}", err=True)
        sys.exit(2)
    if isinstance(raw, dict):
        if out_dir is not None:
            raw["out_dir"] = out_dir
        if seed is not None:
            raw["seed"] = seed
    cfg, errors, warnings = diagnose_config(raw)
    for line in warnings:
        click.echo(f"warning: {line}", err=True)
    if errors:
        for line in errors:
            click.echo(f"validation error: {line}", err=True)
        sys.exit(2)

    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    try:
        ctx = _build_context(cfg)
        status, outputs = _RUNNERS[cfg["experiment"]](ctx, out, workers)
    except StochumError as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        sys.exit(3)
    manifest = {
        "experiment": cfg["experiment"],
        "seed": cfg["seed"],
        # out_dir is wherever this manifest lives; recording it would make
        # otherwise identical runs differ byte-wise
        "config": {k: v for k, v in cfg.items() if k != "out_dir"},
        "versions": _versions(),
        "outputs": sorted(outputs),
        "status": status,
    }
    _write_json(out / "manifest.json", manifest)
    if status != 0:
        click.echo(f"finished with non-convergence (exit {status}); artifacts written", err=True)
    sys.exit(status)


@main.command("validate")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
def validate_command(config_path: str) -> None:
    """Validate CONFIG_PATH (schema, geometry, numeric regime) without running."""
    try:
        raw = json.loads(Path(config_path).read_text())
    except json.JSONDecodeError as exc:
        click.echo(f"error: config is not valid JSON: {exc}")
        sys.exit(2)
    _, errors, warnings = diagnose_config(raw)
    for line in errors:
        click.echo(f"error: {line}")
    for line in warnings:
        click.echo(f"warning: {line}")
    sys.exit(2 if errors else 0)


if __name__ == "__main__":
    main()

"""Banach fixed-point drivers for the semilinear control problems.

The semilinear problems are solved by Picard iteration on the source pair:
freeze the sources, solve the penalized linear control problem, re-evaluate
the nonlinearity on the resulting trajectory, repeat.  The iteration map is
affine-composed-with-Lipschitz, so its contraction factor scales with the
nonlinearity's Lipschitz constant; the trace records the observed ratios
rather than assuming a bound — at fixed penalty eps contraction is an
empirical property, reported, not guaranteed.

Nonlinearities are presets with known Lipschitz constants (so the constant
is checkable by sampling), all vanishing at zero:

* ``zero``              — f = g = 0
* ``scaled_sin``        — f = L sin(s), g = g_const sin(s)
* ``scaled_tanh``       — f = L tanh(s), g = g_const tanh(s)
* ``saturated_linear``  — f = L clip(s, -1, 1), g = g_const clip(s, -1, 1)

For the backward problem the drift reacts to the pair (y, Y) through the
two-argument form f(y, Y) = L (base(y) + base(Y)) / 2, which satisfies
|f(y1,Y1) - f(y2,Y2)| <= L (|y1-y2| + |Y1-Y2|) / 2.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .hum import (
    BACKWARD_ONE_CONTROL,
    FORWARD_TWO_CONTROLS,
    ControlSolution,
    HUMConfig,
    assemble_hum_weights,
    s_norm,
    solve_hum,
)
from .probability import AdaptedField
from .weights import carleman_fields

__all__ = [
    "ZERO",
    "SCALED_SIN",
    "SCALED_TANH",
    "SATURATED_LINEAR",
    "NONLINEARITY_KINDS",
    "NonlinearitySpec",
    "FixedPointIterate",
    "FixedPointTrace",
    "apply_nonlinearity",
    "sampled_lipschitz_ratios",
    "fixed_point_forward",
    "fixed_point_backward",
]

ZERO = "zero"
SCALED_SIN = "scaled_sin"
SCALED_TANH = "scaled_tanh"
SATURATED_LINEAR = "saturated_linear"
NONLINEARITY_KINDS = (ZERO, SCALED_SIN, SCALED_TANH, SATURATED_LINEAR)


def _base_shape(kind: str, s: np.ndarray) -> np.ndarray:
    if kind == ZERO:
        return np.zeros_like(s)
    if kind == SCALED_SIN:
        return np.sin(s)
    if kind == SCALED_TANH:
        return np.tanh(s)
    return np.clip(s, -1.0, 1.0)


@dataclass(frozen=True)
class NonlinearitySpec:
    """A preset globally-Lipschitz nonlinearity vanishing at zero.

    ``L`` scales the drift response f, ``g_const`` the diffusion response g
    (forward problem only).  Every preset's base shape is 1-Lipschitz, so L
    and g_const are the Lipschitz constants of f and g themselves.
    """

    kind: str
    L: float = 0.0
    g_const: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in NONLINEARITY_KINDS:
            raise ParameterError(f"kind must be one of {NONLINEARITY_KINDS}, got {self.kind!r}")
        if not (self.L >= 0 and math.isfinite(self.L)):
            raise ParameterError(f"Lipschitz constant L must be >= 0, got {self.L}")
        if not (self.g_const >= 0 and math.isfinite(self.g_const)):
            raise ParameterError(f"g_const must be >= 0, got {self.g_const}")

    def f(self, s: np.ndarray) -> np.ndarray:
        """Drift response (one argument, forward problem)."""
        return self.L * _base_shape(self.kind, s)

    def g(self, s: np.ndarray) -> np.ndarray:
        """Diffusion response (forward problem)."""
        return self.g_const * _base_shape(self.kind, s)

    def f_pair(self, s: np.ndarray, s_bar: np.ndarray) -> np.ndarray:
        """Two-argument drift response to (y, Y) (backward problem)."""
        return 0.5 * self.L * (_base_shape(self.kind, s) + _base_shape(self.kind, s_bar))


def apply_nonlinearity(
    spec: NonlinearitySpec,
    y: AdaptedField,
    Y: AdaptedField | None = None,
    *,
    problem: str = FORWARD_TWO_CONTROLS,
):
    """Pointwise source fields from the state: (F, G) forward, F backward.

    The backward problem's drift responds to the pair (y, Y), so Y is
    required there and meaningless for the forward problem.
    """
    if problem == FORWARD_TWO_CONTROLS:
        if Y is not None:
            raise ParameterError("the forward nonlinearity takes only the state y")
        F = AdaptedField(tree=y.tree, values=[spec.f(v) for v in y.values])
        G = AdaptedField(tree=y.tree, values=[spec.g(v) for v in y.values])
        return F, G
    if problem == BACKWARD_ONE_CONTROL:
        if Y is None:
            raise ParameterError("the backward nonlinearity needs the martingale field Y")
        if Y.levels != y.levels or Y.n != y.n:
            raise ParameterError("y and Y are not conformable")
        vals = [spec.f_pair(v, w) for v, w in zip(y.values, Y.values)]
        return AdaptedField(tree=y.tree, values=vals)
    raise ParameterError(f"unknown problem {problem!r}")


def sampled_lipschitz_ratios(
    spec: NonlinearitySpec, n_pairs: int = 10_000, seed: int = 0, box: float = 10.0
) -> dict:
    """Max difference quotients of f, g, and the two-argument form by sampling.

    Draws argument pairs uniformly from [-box, box]; the returned ratios must
    not exceed L (f), g_const (g), and L for the two-argument quotient
    |f(y1,Y1)-f(y2,Y2)| / (|y1-y2| + |Y1-Y2|).
    """
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0x6C697073], dtype=np.uint64)))
    a, b, c, d = rng.uniform(-box, box, size=(4, n_pairs))
    da = np.abs(a - b)
    keep = da > 1e-12
    ratio_f = float(np.max(np.abs(spec.f(a) - spec.f(b))[keep] / da[keep], initial=0.0))
    ratio_g = float(np.max(np.abs(spec.g(a) - spec.g(b))[keep] / da[keep], initial=0.0))
    dpair = np.abs(a - b) + np.abs(c - d)
    keep2 = dpair > 1e-12
    ratio_two = float(
        np.max(
            np.abs(spec.f_pair(a, c) - spec.f_pair(b, d))[keep2] / dpair[keep2],
            initial=0.0,
        )
    )
    return {"f": ratio_f, "g": ratio_g, "f_pair": ratio_two}


# --------------------------------------------------------------------- trace
@dataclass(frozen=True)
class FixedPointIterate:
    """Digest of one Picard step: new source norm, step delta, solve summary."""

    source_norm: float
    delta: float
    cost: float
    terminal_norm_sq: float
    cg_iters: int
    hum_converged: bool


@dataclass
class FixedPointTrace:
    """Record of one fixed-point run.

    ``contraction_ratios[i]`` is delta_{i+2}/delta_{i+1} (defined from the
    second step onward).  ``diverged`` flags three consecutive ratios above
    one; the trace is still returned in full.
    """

    iterates: list[FixedPointIterate]
    contraction_ratios: list[float]
    converged: bool
    diverged: bool
    final_terminal_norm_sq: float
    final_solution: ControlSolution

    @property
    def deltas(self) -> list[float]:
        return [it.delta for it in self.iterates]


# -------------------------------------------------------------- driver core
def _sub(a: AdaptedField | None, b: AdaptedField | None) -> AdaptedField | None:
    if a is None:
        return None if b is None else -1.0 * b
    return a if b is None else a - b


def _cells(sol_y: AdaptedField, K: int) -> AdaptedField:
    return AdaptedField(tree=sol_y.tree, values=sol_y.values[:K])


def _with_eps(cfg: HUMConfig, eps: float) -> HUMConfig:
    if eps == cfg.eps:
        return cfg
    f = cfg.weight_fields
    fields = carleman_fields(
        f.params, f.spatial, cfg.grid, f.time_nodes, eps=eps, clamp=f.clamp
    )
    return dataclasses.replace(cfg, eps=eps, weight_fields=fields)


def _run_fixed_point(data_head, spec, cfg, tol, max_iter, eps_schedule, initial_sources):
    if tol <= 0:
        raise ParameterError(f"tolerance must be positive, got {tol}")
    if max_iter < 1:
        raise ParameterError(f"max_iter must be >= 1, got {max_iter}")
    forward = cfg.problem == FORWARD_TWO_CONTROLS
    K = cfg.tree.depth
    weights = assemble_hum_weights(cfg)

    if initial_sources is None:
        F_prev: AdaptedField | None = None
        G_prev: AdaptedField | None = None
    elif forward:
        F_prev, G_prev = initial_sources
    else:
        F_prev, G_prev = initial_sources, None

    iterates: list[FixedPointIterate] = []
    ratios: list[float] = []
    converged = diverged = False
    over_one = 0
    delta_first = None
    sol = None
    warm = None

    for j in range(1, max_iter + 1):
        step_cfg = cfg
        if eps_schedule is not None:
            step_cfg = _with_eps(cfg, eps_schedule[min(j - 1, len(eps_schedule) - 1)])
        data = (data_head, F_prev, G_prev) if forward else (data_head, F_prev)
        sol = solve_hum(data, step_cfg, initial_controls=warm)
        warm = (sol.h, sol.H) if forward else sol.h
        y_cells = _cells(sol.y, K)
        if forward:
            F_new, G_new = apply_nonlinearity(spec, y_cells, problem=cfg.problem)
        else:
            F_new = apply_nonlinearity(spec, y_cells, sol.Y_or_Z, problem=cfg.problem)
            G_new = None
        delta = s_norm(_sub(F_new, F_prev), _sub(G_new, G_prev), weights)
        iterates.append(
            FixedPointIterate(
                source_norm=s_norm(F_new, G_new, weights),
                delta=delta,
                cost=sol.cost,
                terminal_norm_sq=sol.terminal_norm_sq,
                cg_iters=sol.cg_iters,
                hum_converged=sol.converged,
            )
        )
        if delta_first is None:
            delta_first = delta
        else:
            prev_delta = iterates[-2].delta
            if prev_delta > 0:
                ratio = delta / prev_delta
                ratios.append(ratio)
                over_one = over_one + 1 if ratio > 1.0 else 0
                if over_one >= 3:
                    diverged = True
                    break
        if delta <= tol * delta_first:
            converged = True
            break
        F_prev, G_prev = F_new, G_new

    return FixedPointTrace(
        iterates=iterates,
        contraction_ratios=ratios,
        converged=converged,
        diverged=diverged,
        final_terminal_norm_sq=sol.terminal_norm_sq,
        final_solution=sol,
    )


def fixed_point_forward(
    y0: np.ndarray,
    spec: NonlinearitySpec,
    cfg: HUMConfig,
    tol: float = 1e-8,
    max_iter: int = 30,
    eps_schedule=None,
    initial_sources=None,
) -> FixedPointTrace:
    """Picard iteration (F, G) <- (f(y), g(y)) through the forward control solve.

    Starts from (F, G) = (0, 0) unless ``initial_sources`` = (F0, G0) is
    given; stops when the source-pair delta in the S-norm falls below
    tol * (first delta) — the S-norm is the space in which the iteration
    map is expected to contract — or when max_iter solves have run.
    ``eps_schedule`` optionally assigns a penalty per iteration (its last
    entry persists); no contraction claim is attached to a varying schedule.
    """
    if cfg.problem != FORWARD_TWO_CONTROLS:
        raise ParameterError("fixed_point_forward needs a forward_two_controls config")
    return _run_fixed_point(y0, spec, cfg, tol, max_iter, eps_schedule, initial_sources)


def fixed_point_backward(
    yT: np.ndarray,
    spec: NonlinearitySpec,
    cfg: HUMConfig,
    tol: float = 1e-8,
    max_iter: int = 30,
    eps_schedule=None,
    initial_sources=None,
) -> FixedPointTrace:
    """Picard iteration F <- f(y, Y) through the backward control solve.

    Same stopping and monitoring contract as fixed_point_forward;
    ``initial_sources`` is a single field F0 here.
    """
    if cfg.problem != BACKWARD_ONE_CONTROL:
        raise ParameterError("fixed_point_backward needs a backward_one_control config")
    return _run_fixed_point(yT, spec, cfg, tol, max_iter, eps_schedule, initial_sources)

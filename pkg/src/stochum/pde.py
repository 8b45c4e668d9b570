"""Spatial discretization and the scenario-tree evolution solvers.

Space: uniform Dirichlet grid on (0,1) with the standard tridiagonal
Laplacian.  Time: drift-implicit / noise-explicit Euler.  Between two noise
levels the drift propagator is

    S = (I - (dt/s) * Lap_h)^(-s)        (s = deterministic sub-steps),

materialized once per (grid, dt, s) as a dense symmetric matrix (n is a few
hundred at most).  S is explicitly symmetrized so that the backward solvers
are the exact float-level transposes of the forward ones; the discrete
duality identities that the control computations rely on then hold to
machine precision.

Solver conventions (level k = 0..K-1, fields indexed by tree node):

    forward SPDE      y_{k+1} = S (y_k + dt (F_k + chi_D0 h_k)) + (G_k + H_k) dW_k
    backward SPDE     z_k     = S E_k[z_{k+1}] - dt Xi_k,   Zrep_k = martingale_part(z_{k+1})
    random forward    q_{k+1} = S (q_k + dt src_k)          (copied to both children)
    backward state    y_k     = S (E_k[y_{k+1}] - dt (chi_D0 h_k + F_k)),  Y_k = martingale_part

The backward source enters outside the propagator on purpose: that exact
placement makes (forward SPDE, backward SPDE) and (random forward,
backward state) transpose pairs, which is the backbone of the gradient
computations downstream.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericError, ParameterError
from .grids import Grid1D, make_grid
from .probability import AdaptedField, NoiseTree, conditional_expectation, martingale_part

__all__ = [
    "Grid1D",
    "make_grid",
    "DiscreteLaplacian",
    "SourceTerms",
    "build_propagator",
    "power_iteration_norm",
    "solve_forward_spde",
    "solve_backward_spde",
    "solve_random_forward",
    "solve_backward_state",
]


@dataclass(frozen=True)
class DiscreteLaplacian:
    """Tridiagonal Dirichlet Laplacian: (Lap v)_i = (v_{i-1} - 2 v_i + v_{i+1}) / h^2."""

    n: int
    h: float

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = -2.0 * v
        out[..., :-1] += v[..., 1:]
        out[..., 1:] += v[..., :-1]
        return out / self.h**2

    def dense(self) -> np.ndarray:
        e = np.ones(self.n)
        return (np.diag(-2.0 * e) + np.diag(e[:-1], 1) + np.diag(e[:-1], -1)) / self.h**2


@dataclass
class SourceTerms:
    """Optional source bundle: drift F, diffusion G, backward source Xi."""

    F: AdaptedField | None = None
    G: AdaptedField | None = None
    Xi: AdaptedField | None = None


@lru_cache(maxsize=64)
def _propagator(n: int, h: float, dt: float, substeps: int) -> np.ndarray:
    lap = DiscreteLaplacian(n=n, h=h)
    A = np.eye(n) - (dt / substeps) * lap.dense()
    S = np.linalg.matrix_power(np.linalg.inv(A), substeps)
    S = 0.5 * (S + S.T)  # exact symmetry => exact transpose duality
    S.setflags(write=False)
    return S

def build_propagator(grid: Grid1D, dt: float, substeps: int = 1) -> np.ndarray:
    """Dense symmetric drift propagator S = (I - (dt/s) Lap_h)^(-s), cached."""
    if not (isinstance(substeps, (int, np.integer)) and substeps >= 1):
        raise ParameterError(f"substeps must be a positive integer, got {substeps!r}")
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    return _propagator(grid.n, grid.h, float(dt), int(substeps))


def power_iteration_norm(mat: np.ndarray, iters: int = 200, seed: int = 0) -> float:
    """Spectral-norm estimate of a symmetric matrix by power iteration."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(mat.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = mat @ v
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam


def _require_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite values")


def _cell_values(field: AdaptedField | None, tree: NoiseTree, n: int, name: str):
    """Values of a cell field (levels 0..K-1), or None; validates conformability."""
    if field is None:
        return None
    if field.tree != tree or field.n != n or field.levels < tree.depth:
        raise ParameterError(f"{name} is not conformable (needs levels 0..K-1 on this tree/grid)")
    for k in range(tree.depth):
        _require_finite(name, field.values[k])
    return field.values


def _root_vector(y0, n: int, name: str) -> np.ndarray:
    arr = np.asarray(y0, dtype=float)
    if arr.shape == (1, n):
        arr = arr[0]
    if arr.shape != (n,):
        raise ParameterError(f"{name} must be a grid vector of length {n}, got shape {arr.shape}")
    _require_finite(name, arr)
    return arr


def _leaf_matrix(zT, tree: NoiseTree, n: int, name: str) -> np.ndarray:
    arr = np.asarray(zT, dtype=float)
    want = (1 << tree.depth, n)
    if arr.shape != want:
        raise ParameterError(f"{name} must live on the leaf level with shape {want}, got {arr.shape}")
    _require_finite(name, arr)
    return arr


def solve_forward_spde(
    y0,
    F: AdaptedField | None,
    G: AdaptedField | None,
    h_ctrl: AdaptedField | None,
    H_ctrl: AdaptedField | None,
    tree: NoiseTree,
    grid: Grid1D,
    substeps: int = 1,
) -> AdaptedField:
    """Forward controlled SPDE; returns the trajectory on levels 0..K.

    dy = (Lap y + F + chi_D0 h) dt + (G + H) dW, y(0) = y0.  The control h
    is masked to D0 inside the solver.
    """
    S = build_propagator(grid, tree.dt, substeps)
    n, K, dt = grid.n, tree.depth, tree.dt
    root = _root_vector(y0, n, "y0")
    Fv = _cell_values(F, tree, n, "F")
    Gv = _cell_values(G, tree, n, "G")
    hv = _cell_values(h_ctrl, tree, n, "h_ctrl")
    Hv = _cell_values(H_ctrl, tree, n, "H_ctrl")
    vals = [root.reshape(1, n).copy()]
    for k in range(K):
        drift = vals[k]
        if Fv is not None:
            drift = drift + dt * Fv[k]
        if hv is not None:
            drift = drift + dt * (grid.mask_d0 * hv[k])
        prop = drift @ S
        child = np.repeat(prop, 2, axis=0)
        noise = None
        if Gv is not None:
            noise = Gv[k]
        if Hv is not None:
            noise = Hv[k] if noise is None else noise + Hv[k]
        if noise is not None:
            child = child + np.repeat(noise, 2, axis=0) * tree.increments(k)[:, None]
        vals.append(child)
    return AdaptedField(tree=tree, values=vals)


def solve_backward_spde(
    zT,
    Xi: AdaptedField | None,
    tree: NoiseTree,
    grid: Grid1D,
    substeps: int = 1,
) -> tuple[AdaptedField, AdaptedField]:
    """Backward SPDE dz = (-Lap z + Xi) dt + Zrep dW, z(T) = zT.

    Returns (z on levels 0..K, Zrep on levels 0..K-1).  The recursion
    z_k = S E_k[z_{k+1}] - dt Xi_k is the exact transpose of the forward
    propagation.
    """
    S = build_propagator(grid, tree.dt, substeps)
    n, K, dt = grid.n, tree.depth, tree.dt
    leaf = _leaf_matrix(zT, tree, n, "zT")
    Xv = _cell_values(Xi, tree, n, "Xi")
    zvals: list[np.ndarray] = [None] * (K + 1)  # type: ignore[list-item]
    zrep: list[np.ndarray] = [None] * K  # type: ignore[list-item]
    zvals[K] = leaf.copy()
    for k in range(K - 1, -1, -1):
        zrep[k] = martingale_part(zvals[k + 1], tree)
        zk = conditional_expectation(zvals[k + 1]) @ S
        if Xv is not None:
            zk = zk - dt * Xv[k]
        zvals[k] = zk
    return (
        AdaptedField(tree=tree, values=zvals),
        AdaptedField(tree=tree, values=zrep),
    )


def solve_random_forward(
    q0,
    src: AdaptedField | None,
    tree: NoiseTree,
    grid: Grid1D,
    substeps: int = 1,
) -> AdaptedField:
    """Random forward PDE dq = (Lap q + src) dt, q(0) = q0 (no martingale term).

    Each propagated value is copied to both children, so the trajectory has
    zero martingale part at every level.
    """
    S = build_propagator(grid, tree.dt, substeps)
    n, K, dt = grid.n, tree.depth, tree.dt
    root = _root_vector(q0, n, "q0")
    sv = _cell_values(src, tree, n, "src")
    vals = [root.reshape(1, n).copy()]
    for k in range(K):
        drift = vals[k]
        if sv is not None:
            drift = drift + dt * sv[k]
        vals.append(np.repeat(drift @ S, 2, axis=0))
    return AdaptedField(tree=tree, values=vals)


def solve_backward_state(
    yT,
    F: AdaptedField | None,
    h_ctrl: AdaptedField | None,
    tree: NoiseTree,
    grid: Grid1D,
    substeps: int = 1,
) -> tuple[AdaptedField, AdaptedField]:
    """Backward controlled state dy = (-Lap y + chi_D0 h + F) dt + Y dW, y(T) = yT.

    Returns (y on levels 0..K, Y on levels 0..K-1).  Exact transpose of
    solve_random_forward; h is masked to D0 inside.
    """
    S = build_propagator(grid, tree.dt, substeps)
    n, K, dt = grid.n, tree.depth, tree.dt
    leaf = _leaf_matrix(yT, tree, n, "yT")
    Fv = _cell_values(F, tree, n, "F")
    hv = _cell_values(h_ctrl, tree, n, "h_ctrl")
    yvals: list[np.ndarray] = [None] * (K + 1)  # type: ignore[list-item]
    ymart: list[np.ndarray] = [None] * K  # type: ignore[list-item]
    yvals[K] = leaf.copy()
    for k in range(K - 1, -1, -1):
        ymart[k] = martingale_part(yvals[k + 1], tree)
        inner = conditional_expectation(yvals[k + 1])
        if hv is not None:
            inner = inner - dt * (grid.mask_d0 * hv[k])
        if Fv is not None:
            inner = inner - dt * Fv[k]
        yvals[k] = inner @ S
    return (
        AdaptedField(tree=tree, values=yvals),
        AdaptedField(tree=tree, values=ymart),
    )

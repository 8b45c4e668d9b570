"""Independent dense implicit-Euler heat integrators (oracle solvers).

Deliberately share no code with the tree solvers: the system matrix is
factored by LAPACK's LU solve at every step instead of applying a
precomputed propagator, so agreement between the two paths is meaningful
evidence of correctness.  Also used directly for the deterministic
inequality audits, where no scenario tree is involved.

Conventions mirror the tree solvers:

    forward   y_{k+1} = (I - (dt/s) Lap)^(-s) (y_k + dt src_k)
    backward  z_k     = (I - (dt/s) Lap)^(-s) z_{k+1} - dt src_k
"""
from __future__ import annotations

import numpy as np

from .errors import NumericError, ParameterError
from .grids import Grid1D
from .pde import DiscreteLaplacian

__all__ = ["implicit_heat_forward", "implicit_heat_backward"]


def _check(grid: Grid1D, steps: int, substeps: int, src) -> np.ndarray | None:
    if not (isinstance(steps, (int, np.integer)) and steps >= 1):
        raise ParameterError(f"steps must be a positive integer, got {steps!r}")
    if not (isinstance(substeps, (int, np.integer)) and substeps >= 1):
        raise ParameterError(f"substeps must be a positive integer, got {substeps!r}")
    if src is None:
        return None
    arr = np.asarray(src, dtype=float)
    if arr.shape != (steps, grid.n):
        raise ParameterError(f"sources must have shape {(steps, grid.n)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError("sources contain non-finite values")
    return arr


def implicit_heat_forward(
    y0, sources, T: float, steps: int, grid: Grid1D, substeps: int = 1
) -> np.ndarray:
    """Deterministic heat equation dy/dt = Lap y + src, Dirichlet, y(0) = y0.

    Returns the full trajectory with shape (steps+1, n).
    """
    src = _check(grid, steps, substeps, sources)
    y = np.asarray(y0, dtype=float).reshape(grid.n).copy()
    if not np.all(np.isfinite(y)):
        raise NumericError("y0 contains non-finite values")
    dt = T / steps
    A = np.eye(grid.n) - (dt / substeps) * DiscreteLaplacian(grid.n, grid.h).dense()
    out = np.empty((steps + 1, grid.n))
    out[0] = y
    for k in range(steps):
        v = y + dt * src[k] if src is not None else y.copy()
        for _ in range(substeps):
            v = np.linalg.solve(A, v)
        y = v
        out[k + 1] = y
    return out


def implicit_heat_backward(
    zT, sources, T: float, steps: int, grid: Grid1D, substeps: int = 1
) -> np.ndarray:
    """Deterministic backward heat equation -dz/dt = Lap z - src, z(T) = zT.

    Source placement matches the tree convention z_k = S z_{k+1} - dt src_k.
    Returns the trajectory with shape (steps+1, n), index k = time level.
    """
    src = _check(grid, steps, substeps, sources)
    z = np.asarray(zT, dtype=float).reshape(grid.n).copy()
    if not np.all(np.isfinite(z)):
        raise NumericError("zT contains non-finite values")
    dt = T / steps
    A = np.eye(grid.n) - (dt / substeps) * DiscreteLaplacian(grid.n, grid.h).dense()
    out = np.empty((steps + 1, grid.n))
    out[steps] = z
    for k in range(steps - 1, -1, -1):
        v = z
        for _ in range(substeps):
            v = np.linalg.solve(A, v)
        z = v - dt * src[k] if src is not None else v
        out[k] = z
    return out

"""Uniform 1-D Dirichlet grid on the unit interval.

Interior nodes x_i = i*h, i = 1..n, h = 1/(n+1); the boundary values are
never stored (homogeneous Dirichlet throughout the toolkit).  The grid also
carries the indicator of the control region D0 as a float mask so that
"restrict to D0" is a plain multiplication.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = ["Grid1D", "make_grid"]


@dataclass(frozen=True)
class Grid1D:
    """Interior-node grid with a marked control subinterval.

    Attributes
    ----------
    n : number of interior nodes (>= 8).
    h : mesh width 1/(n+1).
    x : interior coordinates, shape (n,).
    mask_d0 : {0,1}-valued float vector, 1 exactly on nodes inside D0.
    d0 : the open control interval (a0, b0).
    """

    n: int
    h: float
    x: np.ndarray
    mask_d0: np.ndarray
    d0: tuple[float, float]

    def __post_init__(self) -> None:
        if self.n < 8:
            raise ParameterError(f"grid needs at least 8 interior nodes, got n={self.n}")
        if self.x.shape != (self.n,) or self.mask_d0.shape != (self.n,):
            raise ParameterError("grid arrays do not match the declared node count")
        idx = np.flatnonzero(self.mask_d0)
        if idx.size == 0:
            raise ParameterError(f"control region {self.d0} contains no grid node")
        if not np.array_equal(idx, np.arange(idx[0], idx[-1] + 1)):
            raise ParameterError("control-region mask must be a contiguous node block")

    def l2_norm_sq(self, v: np.ndarray) -> float:
        """Discrete L2(0,1) squared norm h*sum(v_i^2) over interior nodes."""
        return float(self.h * np.sum(np.square(v)))


def make_grid(n: int, d0: tuple[float, float] = (0.3, 0.7)) -> Grid1D:
    """Build the interior grid and the D0 indicator mask.

    Nodes strictly inside the open interval d0 are flagged.  d0 must be a
    nondegenerate subinterval of (0, 1).
    """
    a0, b0 = float(d0[0]), float(d0[1])
    if not (0.0 < a0 < b0 < 1.0):
        raise ParameterError(f"control region must satisfy 0 < a0 < b0 < 1, got {d0}")
    h = 1.0 / (n + 1)
    x = h * np.arange(1, n + 1, dtype=float)
    mask = ((x > a0) & (x < b0)).astype(float)
    x.setflags(write=False)
    mask.setflags(write=False)
    return Grid1D(n=n, h=h, x=x, mask_d0=mask, d0=(a0, b0))

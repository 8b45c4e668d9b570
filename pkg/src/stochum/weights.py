"""Carleman-type weight functions in a numerically safe log-domain form.

The toolkit's weighted norms are all built from three ingredients:

* a temporal profile ``gamma(t)`` that equals 2 at the regular end of the
  time interval, is 1 on a central plateau, and blows up like (distance to
  the singular end)^(-m) at the other end.  The ``forward`` variant is
  singular at t = T (used when steering the terminal state to zero); the
  ``backward`` variant is its exact mirror gamma(T - t), singular at t = 0.
* a spatial bump ``beta(x) = x^p (1-x)^q / (c^p (1-c)^q)`` vanishing on the
  boundary with its single critical point at the centroid c of the
  observation interval D', so |beta'| is bounded below outside D'.
* composite fields on the (time-midpoint x grid-node) lattice::

      phi(t,x) = gamma(t) * (exp(mu*(beta(x)+6m)) - mu*exp(6*mu*(m+1)))   < 0
      xi(t,x)  = gamma(t) * exp(mu*(beta(x)+6m))                          > 0
      ell      = lambda * phi          (log of the exponential weight theta)

``theta = exp(ell)`` has an astronomically steep dynamic range, so it is
never materialized directly.  Every consumer goes through the evaluator
``exp(a*(ell - kappa) + b*log(xi) + c)`` where kappa = max(ell) over the
lattice is a global normalization offset; exponents are clamped at a
configurable bound and clamping events are counted.

A regularized profile ``gamma_eps`` (finite on the whole closed interval,
obtained by shifting the singular tail by eps) supports the penalized
functionals: it agrees with gamma away from the singular end and satisfies
gamma_eps <= gamma pointwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .grids import Grid1D

__all__ = [
    "FORWARD_CONTROL",
    "BACKWARD_CONTROL",
    "WeightParams",
    "SpatialWeight",
    "CarlemanFields",
    "temporal_gamma",
    "temporal_gamma_regularized",
    "build_spatial_weight",
    "sigma_value",
    "carleman_fields",
    "calibrate_lambda",
]

FORWARD_CONTROL = "forward"
BACKWARD_CONTROL = "backward"
_VARIANTS = (FORWARD_CONTROL, BACKWARD_CONTROL)


@dataclass(frozen=True)
class WeightParams:
    """Carleman parameter tuple (lambda, mu, m, T) plus the profile variant.

    ``lam`` and ``mu`` may be below 1: the theory wants them large, but the
    computable regime needs the log-range of ell bounded (see
    :func:`calibrate_lambda`).  ``sigma`` is the derived exponent of the
    initial branch of gamma; it exceeds 2 whenever lam >= 1 and mu >= 1.
    """

    lam: float
    mu: float
    m: float
    T: float
    variant: str = FORWARD_CONTROL

    def __post_init__(self) -> None:
        for name in ("lam", "mu", "m", "T"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ParameterError(f"weight parameter {name} must be finite, got {v!r}")
        if self.lam <= 0 or self.mu <= 0:
            raise ParameterError(f"lam and mu must be positive, got lam={self.lam}, mu={self.mu}")
        if self.m < 1:
            raise ParameterError(f"temporal blow-up order m must be >= 1, got {self.m}")
        if not (0.0 < self.T < 1.0):
            raise ParameterError(f"time horizon must lie in (0, 1), got T={self.T}")
        if self.variant not in _VARIANTS:
            raise ParameterError(f"variant must be one of {_VARIANTS}, got {self.variant!r}")

    @property
    def sigma(self) -> float:
        """Exponent of the initial gamma branch: lam * mu^2 * exp(mu*(6m-4))."""
        return self.lam * self.mu**2 * math.exp(self.mu * (6.0 * self.m - 4.0))


def sigma_value(params: WeightParams) -> float:
    """Closed-form sigma = lam * mu^2 * exp(mu*(6m-4))."""
    return params.sigma


def _bridge(t: np.ndarray, T: float, m: float) -> np.ndarray:
    """Cubic Hermite bridge of gamma on [T/2, 3T/4].

    Interpolates value 1 / slope 0 at T/2 to value (T/4)^-m / slope
    m*(T/4)^-(m+1) at 3T/4 (matching the blow-up branch from the right).
    Minimal-degree C^1 junction; the C^2 mismatch is measured by tests,
    not assumed away.
    """
    width = T / 4.0
    s = (t - T / 2.0) / width
    s2 = s * s
    s3 = s2 * s
    h00 = 2.0 * s3 - 3.0 * s2 + 1.0
    h01 = 3.0 * s2 - 2.0 * s3
    h11 = s3 - s2
    val_right = (T / 4.0) ** (-m)
    slope_right = m * (T / 4.0) ** (-m - 1.0)
    return h00 + h01 * val_right + width * slope_right * h11


def _gamma_forward(t: np.ndarray, params: WeightParams) -> np.ndarray:
    """Forward-variant gamma on [0, T); the caller guarantees the domain."""
    T, m = params.T, params.m
    out = np.empty_like(t)
    early = t <= T / 4.0
    plateau = (t > T / 4.0) & (t <= T / 2.0)
    bridge = (t > T / 2.0) & (t <= 3.0 * T / 4.0)
    tail = t > 3.0 * T / 4.0
    out[early] = 1.0 + (1.0 - 4.0 * t[early] / T) ** params.sigma
    out[plateau] = 1.0
    out[bridge] = _bridge(t[bridge], T, m)
    out[tail] = (T - t[tail]) ** (-m)
    return out


def temporal_gamma(t, params: WeightParams):
    """Evaluate the temporal profile gamma at time(s) t.

    Forward variant: defined on [0, T), singular as t -> T^-.
    Backward variant: the mirror gamma(T - t), defined on (0, T].
    Evaluation at (or beyond) the singular endpoint raises ParameterError.
    Accepts scalars or arrays; returns matching shape.
    """
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    T = params.T
    if params.variant == BACKWARD_CONTROL:
        if np.any(arr <= 0.0) or np.any(arr > T):
            raise ParameterError(
                f"backward temporal weight is defined on (0, T]={(0, T)}, singular at t=0"
            )
        vals = _gamma_forward(T - arr, params)
    else:
        if np.any(arr < 0.0) or np.any(arr >= T):
            raise ParameterError(
                f"forward temporal weight is defined on [0, T)={(0, T)}, singular at t=T"
            )
        vals = _gamma_forward(arr, params)
    if np.ndim(t) == 0:
        return float(vals[0])
    return vals


def _gamma_reg_forward(t: np.ndarray, eps: float, params: WeightParams) -> np.ndarray:
    T = params.T
    out = np.empty_like(t)
    early = t <= T / 4.0
    plateau = (t > T / 4.0) & (t <= T / 2.0 + eps)
    shifted = t > T / 2.0 + eps
    out[early] = _gamma_forward(t[early], params)
    out[plateau] = 1.0
    out[shifted] = _gamma_forward(t[shifted] - eps, params)
    return out


def temporal_gamma_regularized(t, eps: float, params: WeightParams):
    """Regularized profile gamma_eps, finite on the closed interval [0, T].

    Forward variant: unchanged on [0, T/4], equal to 1 on [T/4, T/2+eps],
    and gamma(t - eps) beyond — i.e. the singular tail shifted right by eps,
    so gamma_eps(T) = gamma(T - eps) is finite.  Backward variant is the
    mirror gamma_eps(T - t).  Requires 0 < eps < T/4; satisfies
    gamma_eps <= gamma pointwise wherever both are defined.
    """
    T = params.T
    if not (0.0 < eps < T / 4.0):
        raise ParameterError(f"regularization eps must satisfy 0 < eps < T/4={T / 4}, got {eps}")
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(arr < 0.0) or np.any(arr > T):
        raise ParameterError(f"regularized weight is defined on [0, T]={(0, T)}")
    if params.variant == BACKWARD_CONTROL:
        vals = _gamma_reg_forward(T - arr, eps, params)
    else:
        vals = _gamma_reg_forward(arr, eps, params)
    if np.ndim(t) == 0:
        return float(vals[0])
    return vals


@dataclass(frozen=True)
class SpatialWeight:
    """Boundary-vanishing spatial bump beta with slope bound alpha.

    beta(x) = x^p (1-x)^q / (c^p (1-c)^q) with c the centroid of D',
    p = 2c, q = 2(1-c); the unique interior critical point sits at x = c,
    beta(c) = 1.  ``alpha`` is the minimum of |beta'| over grid nodes
    outside the open interval D' (positive by construction).
    """

    beta: np.ndarray
    alpha: float
    d_prime: tuple[float, float]
    d_zero: tuple[float, float]
    c: float
    p: float
    q: float

    def beta_at(self, x) -> np.ndarray:
        """Analytic beta at arbitrary points of [0, 1]."""
        xx = np.asarray(x, dtype=float)
        norm = self.c**self.p * (1.0 - self.c) ** self.q
        return xx**self.p * (1.0 - xx) ** self.q / norm

    def beta_deriv_at(self, x) -> np.ndarray:
        """Analytic beta' at arbitrary points of (0, 1)."""
        xx = np.asarray(x, dtype=float)
        norm = self.c**self.p * (1.0 - self.c) ** self.q
        return (
            self.p * xx ** (self.p - 1.0) * (1.0 - xx) ** self.q
            - self.q * xx**self.p * (1.0 - xx) ** (self.q - 1.0)
        ) / norm


def build_spatial_weight(
    d_zero: tuple[float, float], d_prime: tuple[float, float], grid: Grid1D
) -> SpatialWeight:
    """Construct the spatial bump for the geometry D' strictly inside D0.

    Requires 0 < a0 < a' < b' < b0 < 1.  alpha is computed by brute force
    from the analytic derivative over all grid nodes outside the open D'.
    """
    a0, b0 = float(d_zero[0]), float(d_zero[1])
    a1, b1 = float(d_prime[0]), float(d_prime[1])
    if not (0.0 < a0 < a1 < b1 < b0 < 1.0):
        raise ParameterError(
            "geometry must satisfy 0 < a0 < a' < b' < b0 < 1 "
            f"(D' strictly inside D0 strictly inside the domain); got D0={d_zero}, D'={d_prime}"
        )
    c = 0.5 * (a1 + b1)
    p, q = 2.0 * c, 2.0 * (1.0 - c)
    w = SpatialWeight(
        beta=np.empty(0), alpha=0.0, d_prime=(a1, b1), d_zero=(a0, b0), c=c, p=p, q=q
    )
    beta_vals = w.beta_at(grid.x)
    outside = (grid.x <= a1) | (grid.x >= b1)
    if not np.any(outside):
        raise ParameterError("grid has no node outside D'; refine the grid")
    alpha = float(np.min(np.abs(w.beta_deriv_at(grid.x[outside]))))
    if not alpha > 0.0:
        raise ParameterError("slope bound alpha collapsed to zero; check geometry")
    if np.any(beta_vals <= 0.0) or np.any(beta_vals > 1.0 + 1e-12):
        raise ParameterError("spatial bump left (0, 1] on interior nodes; check geometry")
    beta_vals.setflags(write=False)
    return SpatialWeight(
        beta=beta_vals, alpha=alpha, d_prime=(a1, b1), d_zero=(a0, b0), c=c, p=p, q=q
    )


@dataclass
class CarlemanFields:
    """Tabulated weight fields on the (time-midpoint x grid-node) lattice.

    All arrays have shape (len(time_nodes), n).  ``norm_offset`` is
    kappa = max(ell); weighted products are only ever formed as
    exp(a*(ell-kappa) + b*log(xi) + c), clamped to +-clamp in the exponent.
    ``ell_eps`` is ell built from the regularized gamma_eps (equal to ell
    when eps_shift == 0).  The tabulated arrays are immutable; only the
    diagnostic ``clamp_events`` counter mutates.
    """

    params: WeightParams
    spatial: SpatialWeight
    time_nodes: np.ndarray
    x: np.ndarray
    phi: np.ndarray
    xi: np.ndarray
    ell: np.ndarray
    log_xi: np.ndarray
    ell_eps: np.ndarray
    norm_offset: float
    eps_shift: float
    clamp: float = 200.0
    clamp_events: int = field(default=0, compare=False)

    @property
    def log_theta(self) -> np.ndarray:
        """log(theta) = ell = lam * phi, exactly (theta itself is never formed)."""
        return self.ell

    def weight_table(self, a: float, b: float, c: float = 0.0, *, regularized: bool = False) -> np.ndarray:
        """Tabulate exp(a*(ell - kappa) + b*log(xi) + c) on the lattice.

        ``regularized=True`` substitutes ell_eps for ell (the finite,
        eps-shifted profile).  Exponents are clamped to +-clamp; each
        clamped entry increments ``clamp_events``.
        """
        ell = self.ell_eps if regularized else self.ell
        expo = a * (ell - self.norm_offset) + b * self.log_xi + c
        clipped = np.clip(expo, -self.clamp, self.clamp)
        hits = int(np.count_nonzero(clipped != expo))
        if hits:
            self.clamp_events += hits
        return np.exp(clipped)

    def trace_weight(self, t: float, a: float, b: float, c: float = 0.0) -> np.ndarray:
        """Row of exp(a*(ell - kappa) + b*log(xi) + c) at an explicit time t.

        Used for endpoint (trace) terms at the regular end of the interval;
        evaluation at the singular endpoint raises, as for temporal_gamma.
        Shares the lattice normalization kappa.
        """
        prm = self.params
        gam = float(temporal_gamma(t, prm))
        bump = np.exp(prm.mu * (self.spatial.beta + 6.0 * prm.m))
        phi_t = gam * (bump - prm.mu * math.exp(6.0 * prm.mu * (prm.m + 1.0)))
        ell_t = prm.lam * phi_t
        log_xi_t = math.log(gam) + prm.mu * (self.spatial.beta + 6.0 * prm.m)
        expo = a * (ell_t - self.norm_offset) + b * log_xi_t + c
        clipped = np.clip(expo, -self.clamp, self.clamp)
        hits = int(np.count_nonzero(clipped != expo))
        if hits:
            self.clamp_events += hits
        return np.exp(clipped)


def carleman_fields(
    params: WeightParams,
    beta: SpatialWeight,
    grid: Grid1D,
    time_nodes,
    eps: float = 0.0,
    clamp: float = 200.0,
) -> CarlemanFields:
    """Tabulate phi, xi, ell (and the eps-regularized ell) on the lattice.

    ``time_nodes`` must avoid the singular endpoint of the chosen variant
    (cell midpoints always do).  The negativity of phi — which requires mu
    large enough that mu*exp(5*mu*m) outweighs exp(mu) — is asserted here
    for every configuration.
    """
    tn = np.asarray(time_nodes, dtype=float)
    if tn.ndim != 1 or tn.size == 0:
        raise ParameterError("time_nodes must be a nonempty 1-D array")
    if beta.beta.shape != grid.x.shape:
        raise ParameterError("spatial weight was built on a different grid")
    gam = temporal_gamma(tn, params)  # also validates the domain
    mu, m, lam = params.mu, params.m, params.lam
    bump = np.exp(mu * (beta.beta + 6.0 * m))
    big_const = mu * math.exp(6.0 * mu * (m + 1.0))
    phi = gam[:, None] * (bump - big_const)[None, :]
    if not np.all(phi < 0.0):
        raise ParameterError(
            f"phi must be negative everywhere; mu={mu} is too small for m={m} "
            "(the constant mu*exp(6*mu*(m+1)) must dominate exp(mu*(1+6m)))"
        )
    xi = gam[:, None] * bump[None, :]
    log_xi = np.log(gam)[:, None] + (mu * (beta.beta + 6.0 * m))[None, :]
    ell = lam * phi
    if eps > 0.0:
        gam_eps = temporal_gamma_regularized(tn, eps, params)
        # same operation order as phi/ell so the two agree bitwise where gamma_eps == gamma
        phi_eps = gam_eps[:, None] * (bump - big_const)[None, :]
        ell_eps = lam * phi_eps
    elif eps == 0.0:
        ell_eps = ell.copy()
    else:
        raise ParameterError(f"eps must be >= 0, got {eps}")
    kappa = float(ell.max())
    for arr in (phi, xi, ell, log_xi, ell_eps):
        arr.setflags(write=False)
    tn = tn.copy()
    tn.setflags(write=False)
    return CarlemanFields(
        params=params,
        spatial=beta,
        time_nodes=tn,
        x=grid.x,
        phi=phi,
        xi=xi,
        ell=ell,
        log_xi=log_xi,
        ell_eps=ell_eps,
        norm_offset=kappa,
        eps_shift=float(eps),
        clamp=float(clamp),
    )


def calibrate_lambda(
    target_log_range: float,
    mu: float,
    m: float,
    T: float,
    beta: SpatialWeight,
    grid: Grid1D,
    time_nodes,
) -> float:
    """Choose lambda so that max(ell) - min(ell) over the lattice hits a target.

    ell = lam*phi is linear in lam as long as the lattice extremes avoid the
    sigma-dependent initial branch of gamma (they do for any lattice whose
    minimum of gamma sits on the plateau and whose maximum sits on the
    blow-up tail), so the linear solve lam = target / range(lam=1) is exact;
    this is verified a posteriori and refined by bisection in the unlikely
    event the lattice is adversarial.
    """
    if not (target_log_range > 0.0 and math.isfinite(target_log_range)):
        raise ParameterError(f"target_log_range must be positive, got {target_log_range}")
    tn = np.asarray(time_nodes, dtype=float)
    if tn.ndim != 1 or tn.size == 0:
        raise ParameterError("time_nodes must be a nonempty 1-D array")
    if beta.beta.shape != grid.x.shape:
        raise ParameterError("spatial weight was built on a different grid")

    def ell_range(lam: float) -> float:
        prm = WeightParams(lam=lam, mu=mu, m=m, T=T, variant=FORWARD_CONTROL)
        gam = temporal_gamma(tn, prm)
        bump = np.exp(mu * (beta.beta + 6.0 * m))
        phi = gam[:, None] * (bump - mu * math.exp(6.0 * mu * (m + 1.0)))[None, :]
        ell = lam * phi
        return float(ell.max() - ell.min())

    r1 = ell_range(1.0)
    if not r1 > 0.0:
        raise ParameterError("degenerate lattice: ell has zero range, cannot calibrate")
    lam = target_log_range / r1
    if abs(ell_range(lam) - target_log_range) <= 1e-9 * target_log_range:
        return lam
    from scipy.optimize import brentq  # adversarial lattice: fall back to root finding

    lo, hi = lam, lam
    while ell_range(lo) > target_log_range:
        lo /= 2.0
    while ell_range(hi) < target_log_range:
        hi *= 2.0
    return float(brentq(lambda s: ell_range(s) - target_log_range, lo, hi, xtol=1e-300, rtol=1e-15))

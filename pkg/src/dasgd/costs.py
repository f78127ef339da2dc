"""Linear decision policy and the newsvendor cost, kinked and smoothed.

The kinked cost c_b*(y-z)^+ + c_h*(z-y)^+ is what we evaluate and report.
Training needs a differentiable objective, so the kink at z = y is replaced
by a quadratic patch on (y - delta, y + delta) chosen to match value and
slope of both linear branches at the patch boundaries. The patch makes the
cost C^1 with second derivative (c_b + c_h) / (2*delta) inside the band.

All cost functions here depend on (z, y) only through w = z - y, which the
implementation exploits for numerical stability: the band is evaluated as
c_b*(y-z) + (w+delta)^2 * (c_b+c_h)/(4*delta), algebraically identical to
the quadratic a1*z^2 + a2*z + a3 but free of large-z cancellation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Sample, TrainState

__all__ = [
    "NewsvendorParams",
    "SmoothCoeffs",
    "default_delta",
    "policy_eval",
    "apply_policy",
    "augment",
    "cost_kinked",
    "smooth_coeffs",
    "cost_smoothed",
    "cost_smoothed_dz",
    "cost_smoothed_dy",
    "grad_theta_cost",
    "grad_x_cost",
    "lipschitz_xx",
]


@dataclass(frozen=True)
class NewsvendorParams:
    """Unit back-order cost, unit holding cost, and smoothing half-width."""

    c_b: float = 1.0
    c_h: float = 0.2
    delta: float = 0.1

    def __post_init__(self):
        if not (self.c_b > 0 and self.c_h > 0 and self.delta > 0):
            raise ValueError("c_b, c_h and delta must all be positive")

    @property
    def critical_ratio(self) -> float:
        return self.c_b / (self.c_b + self.c_h)


@dataclass(frozen=True)
class SmoothCoeffs:
    """Coefficients of the quadratic patch a1*z^2 + a2*z + a3."""

    a1: float
    a2: float
    a3: float


def default_delta(y: np.ndarray, scale: float = 0.1) -> float:
    """Smoothing half-width tied to the label scale.

    Uses scale * std(y) so the worst-case smoothing error
    (c_b + c_h) * delta / 4 stays proportionate to the cost scale; falls
    back to `scale` itself for constant labels.
    """
    sd = float(np.std(np.asarray(y, dtype=float)))
    return scale * sd if sd > 0 else scale


def augment(x: np.ndarray) -> np.ndarray:
    """Append the constant pseudo-feature 1 that carries the intercept."""
    return np.append(np.asarray(x, dtype=float), 1.0)


def policy_eval(state: TrainState, x: np.ndarray) -> float:
    """Order quantity of the linear policy: theta' x + intercept."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != state.s:
        raise ValueError(f"feature dimension {x.shape[0]} != policy dimension {state.s}")
    return float(state.coeffs @ x + state.intercept)


def apply_policy(state: TrainState, X: np.ndarray) -> np.ndarray:
    """Vectorized order quantities for a feature matrix of shape (n, s)."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != state.s:
        raise ValueError(f"feature dimension {X.shape[1]} != policy dimension {state.s}")
    return X @ state.coeffs + state.intercept


def cost_kinked(z, y, p: NewsvendorParams):
    """Newsvendor cost c_b*(y-z)^+ + c_h*(z-y)^+; zero iff z == y."""
    w = np.asarray(z, dtype=float) - np.asarray(y, dtype=float)
    out = np.where(w < 0, -p.c_b * w, p.c_h * w)
    return float(out) if out.ndim == 0 else out


def smooth_coeffs(y: float, p: NewsvendorParams) -> SmoothCoeffs:
    """Quadratic-patch coefficients for label y.

    The patch is pinned down by matching the value and slope of both linear
    branches at z = y -/+ delta (four conditions, consistent because the
    curvature (c_b+c_h)/(2*delta) is exactly the slope jump over the band).
    """
    cb, ch, d = p.c_b, p.c_h, p.delta
    a1 = (cb + ch) / (4.0 * d)
    a2 = -(cb * (y + d) + ch * (y - d)) / (2.0 * d)
    a3 = cb * d + (cb * (y + 3.0 * d) + ch * (y - d)) * (y - d) / (4.0 * d)
    return SmoothCoeffs(a1, a2, a3)


def _band(w, p: NewsvendorParams):
    # stable form of the patch; w = z - y in (-delta, delta)
    return -p.c_b * w + (w + p.delta) ** 2 * (p.c_b + p.c_h) / (4.0 * p.delta)


def cost_smoothed(z, y, p: NewsvendorParams):
    """C^1 newsvendor cost: linear branches joined by the quadratic patch."""
    w = np.asarray(z, dtype=float) - np.asarray(y, dtype=float)
    out = np.where(w <= -p.delta, -p.c_b * w, np.where(w >= p.delta, p.c_h * w, _band(w, p)))
    return float(out) if out.ndim == 0 else out


def cost_smoothed_dz(z, y, p: NewsvendorParams):
    """Derivative of the smoothed cost in the order quantity z."""
    w = np.asarray(z, dtype=float) - np.asarray(y, dtype=float)
    band = -p.c_b + (w + p.delta) * (p.c_b + p.c_h) / (2.0 * p.delta)
    out = np.where(w <= -p.delta, -p.c_b, np.where(w >= p.delta, p.c_h, band))
    return float(out) if out.ndim == 0 else out


def cost_smoothed_dy(z, y, p: NewsvendorParams):
    """Derivative of the smoothed cost in the label y.

    The smoothed cost depends on (z, y) only through z - y, so this is
    exactly the negated z-derivative.
    """
    out = -np.asarray(cost_smoothed_dz(z, y, p))
    return float(out) if out.ndim == 0 else out


def grad_theta_cost(state: TrainState, sample: Sample, p: NewsvendorParams) -> np.ndarray:
    """Gradient of the smoothed cost in theta at one sample: c'(z) * (x, 1)."""
    z = policy_eval(state, sample.x)
    return cost_smoothed_dz(z, sample.y, p) * augment(sample.x)


def grad_x_cost(state: TrainState, sample: Sample, p: NewsvendorParams) -> np.ndarray:
    """Gradient of the smoothed cost in the features at one sample: c'(z) * theta."""
    z = policy_eval(state, sample.x)
    return cost_smoothed_dz(z, sample.y, p) * state.coeffs


def lipschitz_xx(state: TrainState, p: NewsvendorParams) -> float:
    """Curvature bound of the smoothed cost along the feature directions.

    The composed map x -> cost(theta' x + b, y) has Hessian
    c''(z) * theta theta' with c'' at most (c_b+c_h)/(2*delta), so its
    spectral norm is bounded by (c_b+c_h) * ||theta||^2 / (2*delta).
    The dual-variable clamp keeps gamma above this bound.
    """
    nrm2 = float(state.coeffs @ state.coeffs)
    return (p.c_b + p.c_h) * nrm2 / (2.0 * p.delta)

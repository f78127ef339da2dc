"""Adversarial augmentation: find the worst-case relocation of one sample.

For a sample xi drawn from the nominal source, the adversary relocates it to
the point xi' in the support box maximizing

    h(theta, gamma; xi, xi') = cost(policy(x'), y') - gamma * d(xi', xi) + gamma * rho.

The maximization runs by projected gradient ascent started at xi itself,
with the best visited point kept (ascent can overshoot near the distance
kink, and the start must never be beaten by a worse return value). A dense
grid search over the box serves as the test oracle in low dimension.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DroConfig, Sample, SupportBox, TrainState, transport_distance
from .costs import NewsvendorParams, cost_smoothed, lipschitz_xx, policy_eval

__all__ = ["PerturbResult", "h_eval", "perturb", "oracle_grid_max", "default_grad_tol"]

# floor on the strong-concavity modulus used by the derived stopping rule
MU_FLOOR = 1e-3


@dataclass(frozen=True)
class PerturbResult:
    """Outcome of one inner maximization."""

    xi_star: Sample
    h_value: float
    grad_norm: float
    steps: int
    hit_step_cap: bool


def h_eval(
    state: TrainState,
    base: Sample,
    cand: Sample,
    cfg: DroConfig,
    p: NewsvendorParams,
) -> float:
    """Penalized objective of relocating `base` to `cand`."""
    d = transport_distance(cand, base, cfg.cost)
    if math.isinf(d):
        raise ValueError("infinite transport distance: labels differ under kappa=inf")
    c = cost_smoothed(policy_eval(state, cand.x), cand.y, p)
    return float(c - state.gamma * d + state.gamma * cfg.rho)


def default_grad_tol(
    state: TrainState, box: SupportBox, cfg: DroConfig, p: NewsvendorParams
) -> float:
    """Stopping tolerance derived from the current curvature.

    Targets an h-gap of mu / ((L^2 + 1) * sqrt(T)) at the returned point,
    converted to a gradient-norm test through the strong-concavity modulus
    mu = max(gamma - lipschitz_xx, MU_FLOOR): a gradient norm g at an
    interior point of a mu-strongly-concave function certifies an h-gap of
    at most g^2 / (2 mu).
    """
    mu = max(state.gamma - lipschitz_xx(state, p), MU_FLOOR)
    x_norm_max = math.sqrt(float(np.sum(np.maximum(box.x_lo**2, box.x_hi**2))) + 1.0)
    theta_norm = float(np.linalg.norm(state.coeffs))
    l_tx = (p.c_b + p.c_h) * theta_norm * x_norm_max / (2.0 * p.delta)
    eps = mu / ((l_tx**2 + 1.0) * math.sqrt(max(cfg.T, 1)))
    return math.sqrt(2.0 * mu * eps)


def perturb(
    state: TrainState,
    base: Sample,
    cfg: DroConfig,
    box: SupportBox,
    p: NewsvendorParams,
) -> PerturbResult:
    """Projected gradient ascent on h starting from the sample itself.

    Stops once the gradient 2-norm drops to the tolerance or after K steps.
    With kappa = inf only the features move; the label stays fixed. The
    distance term's subgradient at the start (where it is not
    differentiable) is taken as 0, making the start a legitimate
    stationary point. The best visited point is returned, so the result
    is never worse than the start.

    This is the training hot loop; the smoothed-cost branches are inlined
    in scalar form rather than routed through the vectorized cost
    functions.
    """
    if base.dim != box.dim:
        raise ValueError(f"dimension mismatch: {base.dim} vs {box.dim}")
    tol = cfg.grad_tol if cfg.grad_tol is not None else default_grad_tol(state, box, cfg, p)
    move_label = not math.isinf(cfg.kappa)
    kappa = cfg.kappa
    gamma = state.gamma
    theta_x = state.coeffs
    theta0 = state.intercept
    x0, y0 = base.x, base.y
    lo, hi = box.x_lo, box.x_hi
    eta, cap = cfg.eta, cfg.K
    cb, ch, dlt = p.c_b, p.c_h, p.delta
    curv = (cb + ch) / (4.0 * dlt)
    rho_term = gamma * cfg.rho

    x = x0.copy()
    y = y0
    h_best = -math.inf
    x_best, y_best = x, y

    steps = 0
    hit_cap = False
    while True:
        z = float(theta_x @ x) + theta0
        w = z - y
        if w <= -dlt:
            c, dz = -cb * w, -cb
        elif w >= dlt:
            c, dz = ch * w, ch
        else:
            u = w + dlt
            c, dz = -cb * w + curv * u * u, -cb + 2.0 * curv * u
        diff = x - x0
        dist = math.sqrt(float(diff @ diff))
        d_total = dist + kappa * abs(y - y0) if move_label else dist
        h = c - gamma * d_total + rho_term
        if h > h_best:
            h_best = h
            x_best, y_best = x, y

        gx = dz * theta_x
        if dist > 0.0:
            gx -= (gamma / dist) * diff
        if move_label:
            dy = y - y0
            gy = -dz - (gamma * kappa * math.copysign(1.0, dy) if dy != 0.0 else 0.0)
            grad_norm = math.sqrt(float(gx @ gx) + gy * gy)
        else:
            gy = 0.0
            grad_norm = math.sqrt(float(gx @ gx))
        if not math.isfinite(grad_norm):
            raise ValueError("non-finite ascent gradient; eta is likely too large")
        if grad_norm <= tol:
            break
        if steps >= cap:
            hit_cap = True
            break
        x = np.minimum(hi, np.maximum(lo, x + eta * gx))
        if move_label:
            y = min(max(y + eta * gy, box.y_lo), box.y_hi)
        steps += 1

    return PerturbResult(
        xi_star=Sample(x_best.copy(), y_best),
        h_value=float(h_best),
        grad_norm=float(grad_norm),
        steps=steps,
        hit_step_cap=hit_cap,
    )


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    n = int(math.ceil((hi - lo) / step)) + 1
    return np.linspace(lo, hi, n)


def oracle_grid_max(
    state: TrainState,
    base: Sample,
    cfg: DroConfig,
    box: SupportBox,
    p: NewsvendorParams,
    grid_step: float,
) -> tuple[Sample, float]:
    """Exhaustive maximization of h over a regular grid on the box.

    Test oracle only: cost grows exponentially in dimension, so the feature
    dimension is limited to 3. With finite kappa the label axis is gridded
    as well; with kappa = inf the label is held at the base sample's.
    """
    if box.dim > 3:
        raise ValueError(f"grid oracle limited to feature dimension <= 3, got {box.dim}")
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    axes = [_axis(float(box.x_lo[i]), float(box.x_hi[i]), grid_step) for i in range(box.dim)]
    move_label = not cfg.cost.label_frozen
    if move_label:
        axes.append(_axis(box.y_lo, box.y_hi, grid_step))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    xs = pts[:, : box.dim]
    ys = pts[:, box.dim] if move_label else np.full(pts.shape[0], base.y)

    z = xs @ state.coeffs + state.intercept
    c = cost_smoothed(z, ys, p)
    dist = np.linalg.norm(xs - base.x, axis=1)
    if move_label:
        dist = dist + cfg.kappa * np.abs(ys - base.y)
    h = c - state.gamma * dist + state.gamma * cfg.rho
    i = int(np.argmax(h))
    return Sample(xs[i].copy(), float(ys[i])), float(h[i])

"""Shared test instance generators for the inner-maximization checks.

Two families, both chosen so the global maximizer is provably reachable by
projected gradient ascent started at the sample:

* pinned: the transport penalty slope exceeds the largest cost slope, so
  every direction away from the sample loses value and the sample itself
  is the maximizer.
* runaway: the order quantity starts deep in the under-order branch and
  the penalty slope sits strictly between the two cost slopes, so value
  climbs monotonically along the negative-coefficient direction until the
  support boundary while every other region stays below the start.
"""
import numpy as np

from dasgd.core import DroConfig, Sample, SupportBox, TrainState
from dasgd.costs import NewsvendorParams

P_DEFAULT = NewsvendorParams(c_b=1.0, c_h=0.2, delta=0.1)


def make_box(dim):
    return SupportBox(np.zeros(dim), np.ones(dim), -30.0, 30.0)


def _base_point(rng, dim, lo, hi, grid_snap):
    """Start point, optionally snapped onto the oracle grid so the grid's
    discretization error never confounds a pinned-maximizer comparison."""
    x0 = rng.uniform(lo, hi, dim)
    if grid_snap is not None:
        x0 = np.round(x0 / grid_snap) * grid_snap
    return x0


def pinned_instance(rng, dim, p=P_DEFAULT, grid_snap=None):
    theta_x = rng.uniform(0.2, 1.5, dim) * rng.choice([-1.0, 1.0], dim)
    theta0 = float(rng.uniform(-0.5, 0.5))
    x0 = _base_point(rng, dim, 0.05, 0.95, grid_snap)
    z0 = float(theta_x @ x0 + theta0)
    y = z0 + float(rng.uniform(-1.0, 1.0))
    slope_cap = max(p.c_b, p.c_h) * float(np.linalg.norm(theta_x))
    gamma = slope_cap * (1.05 + float(rng.uniform(0.0, 1.0)))
    state = TrainState(np.append(theta_x, theta0), gamma)
    return state, Sample(x0, y)


def runaway_instance(rng, dim, p=P_DEFAULT, grid_snap=None):
    theta_x = rng.uniform(0.3, 1.2, dim) * rng.choice([-1.0, 1.0], dim)
    theta0 = float(rng.uniform(-0.5, 0.5))
    x0 = _base_point(rng, dim, 0.2, 0.8, grid_snap)
    z0 = float(theta_x @ x0 + theta0)
    y = z0 + p.delta + float(rng.uniform(0.5, 2.0))
    norm = float(np.linalg.norm(theta_x))
    lo = 1.05 * p.c_h * norm
    hi = 0.9 * p.c_b * norm
    gamma = lo + float(rng.uniform(0.0, 1.0)) * (hi - lo)
    state = TrainState(np.append(theta_x, theta0), gamma)
    return state, Sample(x0, y)


def oracle_family(rng, dim, p=P_DEFAULT, grid_snap=None):
    if rng.uniform() < 0.5:
        return pinned_instance(rng, dim, p, grid_snap)
    return runaway_instance(rng, dim, p, grid_snap)


def tight_inner_cfg(rho, seed=0, K=6000, eta=0.02, grad_tol=1e-8):
    return DroConfig(
        rho=rho, T=1, K=K, eta=eta, grad_tol=grad_tol,
        gamma_min=1e-9, gamma_max=1e9, seed=seed,
    )

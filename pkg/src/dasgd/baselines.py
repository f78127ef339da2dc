"""Non-robust comparators: pinball-loss ERM (with optional l1) and the
featureless sample-quantile policy.

erm_train minimizes the kinked newsvendor loss of the linear policy by
full-batch subgradient descent with a c/sqrt(t) step and tail averaging.
Its intercept-only solution is anchored by saa_quantile, the closed-form
sort-based minimizer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, TrainState, substream
from .costs import NewsvendorParams, apply_policy, cost_kinked

__all__ = ["ErmConfig", "erm_train", "saa_quantile", "evaluate_policy"]

_INIT_KEY = 7


@dataclass(frozen=True)
class ErmConfig:
    """Subgradient-descent settings for the ERM baselines.

    l1_weight 0 gives plain ERM; positive values add an l1 penalty on the
    feature coefficients (the intercept is never penalized). iterations
    and step_scale default to 20*n*(s+1) and half the label spread.
    """

    l1_weight: float = 0.0
    iterations: int | None = None
    step_scale: float | None = None
    seed: int = 0
    random_init: bool = False

    def __post_init__(self):
        if self.l1_weight < 0:
            raise ValueError("l1_weight must be nonnegative")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.step_scale is not None and not self.step_scale > 0:
            raise ValueError("step_scale must be positive")


def erm_train(data: Dataset, p: NewsvendorParams, cfg: ErmConfig = ErmConfig()) -> TrainState:
    """Fit the linear policy to the kinked loss, returning the averaged iterate.

    Full-batch subgradient steps step_scale/sqrt(t), averaged over the
    second half of the run. Deterministic unless random_init is set.
    """
    n, s = data.n, data.s
    Xa = np.column_stack([data.X, np.ones(n)])
    y = data.y
    iters = cfg.iterations if cfg.iterations is not None else 20 * n * (s + 1)
    scale = cfg.step_scale
    if scale is None:
        spread = float(np.std(y))
        scale = 0.5 * spread if spread > 0 else 0.5

    if cfg.random_init:
        theta = substream(cfg.seed, _INIT_KEY).normal(0.0, 0.1, s + 1)
    else:
        theta = np.zeros(s + 1)

    avg = np.zeros(s + 1)
    n_avg = 0
    tail_start = iters // 2
    for t in range(iters):
        z = Xa @ theta
        # pinball subgradient: -c_b under-order, +c_h over-order, 0 at a tie
        gz = np.where(z < y, -p.c_b, np.where(z > y, p.c_h, 0.0))
        g = Xa.T @ gz / n
        if cfg.l1_weight > 0:
            g[:s] += cfg.l1_weight * np.sign(theta[:s])
        theta = theta - scale / math.sqrt(t + 1) * g
        if t >= tail_start:
            avg += theta
            n_avg += 1
        if not np.all(np.isfinite(theta)):
            raise ValueError(f"ERM iterate diverged at step {t}")
    return TrainState(avg / max(n_avg, 1), 0.0, iters)


def saa_quantile(ys, p: NewsvendorParams) -> float:
    """Empirical c_b/(c_b+c_h) quantile of the labels, lower interpolation.

    This is the smallest minimizer of the featureless kinked loss, computed
    by sorting; it anchors the intercept-only ERM solution.
    """
    ys = np.asarray(ys, dtype=float)
    if ys.size == 0:
        raise ValueError("need at least one label")
    k = int(math.ceil(p.critical_ratio * ys.size - 1e-12))
    k = min(max(k, 1), ys.size)
    return float(np.sort(ys)[k - 1])


def evaluate_policy(state: TrainState, test: Dataset, p: NewsvendorParams) -> float:
    """Mean kinked cost of the policy over a test set.

    Evaluation always uses the true kinked cost, never the smoothed
    training surrogate.
    """
    z = apply_policy(state, test.X)
    return float(np.mean(cost_kinked(z, test.y, p)))

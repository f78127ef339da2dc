"""Robust training loop: bootstrap a sample, perturb it, take gradient steps.

Each outer iteration draws one sample from the nominal source, relocates it
adversarially (inner_max.perturb), then updates the policy coefficients
with the cost gradient at the relocated point and the dual variable with
rho - d(relocated, drawn). The dual variable is clamped so the inner
problem keeps a strong-concavity margin over the cost curvature.

Sources are anything with draw(t) -> Sample; bootstrap-from-dataset and
consume-a-stream sources live here, the synthetic-model source in datagen.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Iterable, Iterator, Protocol

import numpy as np

from .core import (
    Dataset,
    DroConfig,
    RunMetrics,
    Sample,
    SupportBox,
    TrainState,
    substream,
    transport_distance,
)
from .costs import NewsvendorParams, grad_theta_cost
from .inner_max import perturb

__all__ = [
    "SampleSource",
    "BootstrapSource",
    "StreamSource",
    "StepSchedule",
    "default_steps",
    "clamp_gamma",
    "default_state",
    "least_squares_state",
    "train",
    "full_gradient_estimate",
    "dual_objective_estimate",
    "write_trace",
]

# spawn-key tag for bootstrap draws; one substream per outer iteration
_BOOTSTRAP_KEY = 1

# margin added above the cost curvature when clamping the dual variable
GAMMA_MARGIN = 1e-2


class SampleSource(Protocol):
    """Nominal distribution abstraction: draw the t-th sample."""

    def draw(self, t: int) -> Sample: ...


class BootstrapSource:
    """Uniform-with-replacement draws from a dataset, one substream per t."""

    def __init__(self, data: Dataset, seed: int):
        self.data = data
        self.seed = seed
        self.draws = 0

    def draw(self, t: int) -> Sample:
        self.draws += 1
        i = int(substream(self.seed, _BOOTSTRAP_KEY, t).integers(self.data.n))
        return self.data.sample(i)


class StreamSource:
    """Consumes an external sample sequence in order, each exactly once."""

    def __init__(self, samples: Iterable[Sample]):
        self._it: Iterator[Sample] = iter(samples)
        self.draws = 0

    def draw(self, t: int) -> Sample:
        try:
            s = next(self._it)
        except StopIteration:
            raise RuntimeError(f"stream exhausted after {self.draws} draws") from None
        self.draws += 1
        return s


@dataclass(frozen=True)
class StepSchedule:
    """Constant-over-run step sizes for the policy and dual updates.

    Zero steps are allowed so a run can be frozen at a fixed state
    (used for comparator sanity checks in the online harness).
    """

    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("step sizes must be nonnegative")


def default_steps(cfg: DroConfig) -> StepSchedule:
    """alpha = alpha0 / sqrt(T), beta likewise; the 1/sqrt(T) shape is what
    the O(1/sqrt(T)) stationarity rate requires."""
    r = math.sqrt(max(cfg.T, 1))
    return StepSchedule(cfg.alpha0 / r, cfg.beta0_effective / r)


def _clamp(gamma: float, theta: np.ndarray, cfg: DroConfig, p: NewsvendorParams,
           margin: float = GAMMA_MARGIN) -> float:
    curv = (p.c_b + p.c_h) * float(theta[:-1] @ theta[:-1]) / (2.0 * p.delta)
    return min(cfg.gamma_max, max(gamma, cfg.gamma_min, curv + margin))


def clamp_gamma(
    gamma: float,
    state: TrainState,
    cfg: DroConfig,
    p: NewsvendorParams,
    margin: float = GAMMA_MARGIN,
) -> float:
    """Clamp the dual variable into [max(gamma_min, curvature + margin), gamma_max].

    The raw dual update can drive gamma to or below the cost curvature,
    where the inner maximization loses its concavity margin; the dynamic
    floor keeps the inner problem well posed.
    """
    return _clamp(gamma, state.theta, cfg, p, margin)


def default_state(cfg: DroConfig, s: int, margin: float = GAMMA_MARGIN) -> TrainState:
    """Zero policy with the dual variable one unit above its lower clamp."""
    gamma0 = min(cfg.gamma_max, max(cfg.gamma_min, margin) + 1.0)
    return TrainState(np.zeros(s + 1), gamma0, 0)


def least_squares_state(data: Dataset, cfg: DroConfig, margin: float = GAMMA_MARGIN) -> TrainState:
    """Least-squares warm start for the policy coefficients."""
    Xa = np.column_stack([data.X, np.ones(data.n)])
    theta, *_ = np.linalg.lstsq(Xa, data.y, rcond=None)
    gamma0 = min(cfg.gamma_max, max(cfg.gamma_min, margin) + 1.0)
    return TrainState(theta, gamma0, 0)


def train(
    source: SampleSource,
    cfg: DroConfig,
    box: SupportBox,
    p: NewsvendorParams,
    init: TrainState,
    schedule: StepSchedule | None = None,
    snapshot_at: Iterable[int] | None = None,
) -> tuple[TrainState, RunMetrics]:
    """Run exactly cfg.T outer iterations and return the final state.

    Deterministic given cfg.seed (the source must be deterministic in t,
    as the bundled sources are). snapshot_at lists iteration indices whose
    pre-update states should be recorded for convergence diagnostics.
    """
    if cfg.T == 0:
        return init, RunMetrics.empty()
    sched = schedule if schedule is not None else default_steps(cfg)
    cost = cfg.cost
    theta = init.theta.copy()
    gamma = float(init.gamma)
    snap_set = frozenset(snapshot_at) if snapshot_at is not None else frozenset()

    g_th_sq = np.empty(cfg.T)
    g_ga_sq = np.empty(cfg.T)
    h_val = np.empty(cfg.T)
    inner = np.empty(cfg.T, dtype=int)
    gamma_trace = np.empty(cfg.T)
    snapshots: list[tuple[int, TrainState]] = []

    t0 = time.perf_counter()
    for t in range(cfg.T):
        state_t = TrainState(theta, gamma, t)
        if t in snap_set:
            snapshots.append((t, state_t))
        xi = source.draw(t)
        res = perturb(state_t, xi, cfg, box, p)
        g_theta = grad_theta_cost(state_t, res.xi_star, p)
        g_gamma = cfg.rho - transport_distance(res.xi_star, xi, cost)

        theta = theta - sched.alpha * g_theta
        gamma = _clamp(gamma - sched.beta * g_gamma, theta, cfg, p)

        g_th_sq[t] = float(g_theta @ g_theta)
        g_ga_sq[t] = g_gamma * g_gamma
        h_val[t] = res.h_value
        inner[t] = res.steps
        gamma_trace[t] = gamma
    train_seconds = time.perf_counter() - t0

    final = TrainState(theta, gamma, cfg.T)
    metrics = RunMetrics(g_th_sq, g_ga_sq, h_val, inner, gamma_trace,
                         train_seconds=train_seconds, snapshots=snapshots)
    return final, metrics


def full_gradient_estimate(
    state: TrainState,
    data: Dataset,
    cfg: DroConfig,
    box: SupportBox,
    p: NewsvendorParams,
) -> tuple[np.ndarray, float]:
    """Estimate the objective gradient at a frozen state.

    Averages the per-sample gradients over the whole dataset, each taken at
    that sample's own adversarial point. Variance shrinks with the dataset
    size, unlike the single-sample gradients recorded during training.
    """
    cost = cfg.cost
    g_theta = np.zeros(state.s + 1)
    g_gamma = 0.0
    for i in range(data.n):
        xi = data.sample(i)
        res = perturb(state, xi, cfg, box, p)
        g_theta += grad_theta_cost(state, res.xi_star, p)
        g_gamma += cfg.rho - transport_distance(res.xi_star, xi, cost)
    return g_theta / data.n, g_gamma / data.n


def dual_objective_estimate(
    state: TrainState,
    data: Dataset,
    cfg: DroConfig,
    box: SupportBox,
    p: NewsvendorParams,
) -> float:
    """Plug-in estimate of the robust dual objective at a frozen state:
    the dataset average of the inner-maximization values."""
    total = 0.0
    for i in range(data.n):
        total += perturb(state, data.sample(i), cfg, box, p).h_value
    return total / data.n


def write_trace(metrics: RunMetrics, path: str) -> None:
    """Stream the training trace as CSV rows of
    t, gamma, h_value, grad_theta_norm_sq, inner_steps (post-update gamma)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,gamma,h_value,grad_theta_norm_sq,inner_steps\n")
        for t in range(metrics.n_iterations):
            fh.write(
                f"{t},{float(metrics.gamma[t])!r},{float(metrics.h_value[t])!r},"
                f"{float(metrics.grad_theta_norm_sq[t])!r},{int(metrics.inner_steps[t])}\n"
            )



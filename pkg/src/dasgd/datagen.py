"""Synthetic benchmark instances: linear demand with additive Gaussian noise.

Labels follow y = theta' x + theta0 + eps with eps ~ N(0, sigma^2) and
features drawn either uniformly from [0,1]^s or from a multivariate
Gaussian. Train, test, and streaming draws all come from disjoint
substreams of one seed, so every artifact is reproducible bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .core import Dataset, Sample, substream
from .costs import NewsvendorParams, cost_kinked

__all__ = ["GenSpec", "generate", "truth_optimal_cost", "GeneratorSource", "quantile_offset"]

_THETA_KEY = 21
_TRAIN_KEY = 22
_TEST_KEY = 23
_STREAM_KEY = 24
_MC_KEY = 25


@dataclass(frozen=True)
class GenSpec:
    """Describes one synthetic instance family.

    theta_true is the full coefficient vector of length s+1 (intercept
    last); None draws each coordinate once from Uniform(0,1)/s with
    intercept 1, keeping the label scale O(1) as s grows.
    """

    s: int
    n_train: int
    n_test: int = 10000
    sigma_eps: float = 0.5
    theta_true: np.ndarray | None = None
    feature_dist: str = "uniform"
    gauss_mean: np.ndarray | None = None
    gauss_cov: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("s must be nonnegative")
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("n_train and n_test must be positive")
        if self.sigma_eps < 0:
            raise ValueError("sigma_eps must be nonnegative")
        if self.feature_dist not in ("uniform", "gaussian"):
            raise ValueError(f"unknown feature_dist {self.feature_dist!r}")
        if self.theta_true is not None:
            th = np.asarray(self.theta_true, dtype=float)
            if th.shape != (self.s + 1,):
                raise ValueError("theta_true must have length s+1 (intercept last)")
            object.__setattr__(self, "theta_true", th)

    def resolve_theta(self) -> np.ndarray:
        if self.theta_true is not None:
            return self.theta_true
        rng = substream(self.seed, _THETA_KEY)
        coeffs = rng.uniform(0.0, 1.0, self.s) / max(self.s, 1)
        return np.append(coeffs, 1.0)


def _gauss_chol(spec: GenSpec) -> tuple[np.ndarray, np.ndarray]:
    mean = (np.zeros(spec.s) if spec.gauss_mean is None
            else np.asarray(spec.gauss_mean, dtype=float))
    if spec.gauss_cov is None:
        idx = np.arange(spec.s)
        cov = 0.5 ** np.abs(idx[:, None] - idx[None, :])
    else:
        cov = np.asarray(spec.gauss_cov, dtype=float)
    if mean.shape != (spec.s,) or cov.shape != (spec.s, spec.s):
        raise ValueError("gauss_mean/gauss_cov shapes must match s")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as e:
        raise ValueError("gauss_cov is not positive definite") from e
    return mean, chol


def _draw_features(spec: GenSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    if spec.feature_dist == "uniform":
        return rng.uniform(0.0, 1.0, (n, spec.s))
    mean, chol = _gauss_chol(spec)
    return rng.standard_normal((n, spec.s)) @ chol.T + mean


def _draw_dataset(spec: GenSpec, stream_key: int, n: int, theta: np.ndarray) -> Dataset:
    rng = substream(spec.seed, stream_key)
    X = _draw_features(spec, rng, n)
    eps = rng.normal(0.0, spec.sigma_eps, n) if spec.sigma_eps > 0 else np.zeros(n)
    y = X @ theta[:-1] + theta[-1] + eps
    return Dataset(X, y)


def generate(spec: GenSpec) -> tuple[Dataset, Dataset]:
    """Draw (train, test) from disjoint substreams of spec.seed."""
    theta = spec.resolve_theta()
    train = _draw_dataset(spec, _TRAIN_KEY, spec.n_train, theta)
    test = _draw_dataset(spec, _TEST_KEY, spec.n_test, theta)
    return train, test


class GeneratorSource:
    """Streaming draws from the synthetic model, one substream per step.

    draw(t) is a pure function of (spec.seed, t), so a stream can be
    replayed exactly, which the online regret accounting relies on.
    """

    def __init__(self, spec: GenSpec):
        if spec.feature_dist == "gaussian":
            _gauss_chol(spec)  # validate covariance up front
        self.spec = spec
        self.theta = spec.resolve_theta()
        self.draws = 0

    def draw(self, t: int) -> Sample:
        self.draws += 1
        rng = substream(self.spec.seed, _STREAM_KEY, t)
        x = _draw_features(self.spec, rng, 1)[0]
        eps = float(rng.normal(0.0, self.spec.sigma_eps)) if self.spec.sigma_eps > 0 else 0.0
        y = float(x @ self.theta[:-1] + self.theta[-1] + eps)
        return Sample(x, y)


def truth_optimal_cost(spec: GenSpec, p: NewsvendorParams, n_mc: int = 100000) -> float:
    """Monte-Carlo cost of the oracle policy that knows the demand model.

    With Gaussian noise the conditional-quantile optimum orders
    theta' x + theta0 + sigma * Phi^{-1}(c_b / (c_b + c_h)); this is the
    floor every learned policy is compared against.
    """
    if spec.sigma_eps == 0:
        return 0.0
    theta = spec.resolve_theta()
    offset = spec.sigma_eps * float(norm.ppf(p.critical_ratio))
    rng = substream(spec.seed, _MC_KEY)
    X = _draw_features(spec, rng, n_mc)
    eps = rng.normal(0.0, spec.sigma_eps, n_mc)
    base = X @ theta[:-1] + theta[-1]
    return float(np.mean(cost_kinked(base + offset, base + eps, p)))


def quantile_offset(p: NewsvendorParams, sigma: float) -> float:
    """Safety-stock offset of the oracle policy: sigma * Phi^{-1}(ratio)."""
    if sigma == 0:
        return 0.0
    return sigma * float(norm.ppf(p.critical_ratio))

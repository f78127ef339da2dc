"""Shared domain types: samples, support geometry, transport cost, configuration.

Everything downstream (perturbation, training, calibration, the experiment
harness) builds on the types defined here. All types are plain value objects;
nothing in this module mutates its inputs.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Sample",
    "Dataset",
    "SupportBox",
    "TransportCost",
    "DroConfig",
    "TrainState",
    "RunMetrics",
    "transport_distance",
    "project_to_support",
    "support_diameter",
    "bounding_box",
    "substream",
    "derive_seed",
    "load_dataset",
    "save_dataset",
    "dataset_csv_bytes",
]


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for a (seed, path) address.

    Built on numpy's SeedSequence spawn keys, so any two distinct paths give
    statistically independent streams and the mapping is reproducible across
    processes and platforms.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path)))


def derive_seed(seed: int, *path: int) -> int:
    """Collapse a (seed, path) address into a single 32-bit seed."""
    return int(np.random.SeedSequence(seed, spawn_key=tuple(path)).generate_state(1)[0])


@dataclass(frozen=True)
class Sample:
    """One observation: feature vector x and scalar label y."""

    x: np.ndarray
    y: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", float(self.y))
        if x.ndim != 1:
            raise ValueError(f"sample features must be a 1-d vector, got shape {x.shape}")
        if not (np.all(np.isfinite(x)) and math.isfinite(self.y)):
            raise ValueError("sample coordinates must be finite")

    @property
    def dim(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class Dataset:
    """A feature matrix X of shape (n, s) with labels y of shape (n,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.ndim != 2:
            raise ValueError("X must be 2-d (n, s)")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError("y must be 1-d with one label per row of X")
        if X.shape[0] == 0:
            raise ValueError("dataset must contain at least one sample")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset entries must be finite")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def s(self) -> int:
        return self.X.shape[1]

    def sample(self, i: int) -> Sample:
        return Sample(self.X[i], float(self.y[i]))

    @staticmethod
    def from_samples(samples: list[Sample]) -> "Dataset":
        if not samples:
            raise ValueError("dataset must contain at least one sample")
        return Dataset(np.stack([s.x for s in samples]), np.array([s.y for s in samples]))


@dataclass(frozen=True)
class TransportCost:
    """Ground cost d((x,y),(x',y')) = ||x-x'||_2 + kappa * |y-y'|.

    kappa may be math.inf, in which case mass never moves along the label
    axis: points with different labels are infinitely far apart.
    """

    kappa: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "kappa", float(self.kappa))
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    @property
    def label_frozen(self) -> bool:
        return math.isinf(self.kappa)


def transport_distance(a: Sample, b: Sample, cost: TransportCost) -> float:
    """Transport distance between two samples under the given ground cost."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    dx = float(np.linalg.norm(a.x - b.x))
    dy = abs(a.y - b.y)
    if cost.label_frozen:
        return dx if dy == 0.0 else math.inf
    return dx + cost.kappa * dy


@dataclass(frozen=True)
class SupportBox:
    """Axis-aligned box [x_lo, x_hi] x [y_lo, y_hi] that all samples live in."""

    x_lo: np.ndarray
    x_hi: np.ndarray
    y_lo: float
    y_hi: float

    def __post_init__(self):
        x_lo = np.asarray(self.x_lo, dtype=float)
        x_hi = np.asarray(self.x_hi, dtype=float)
        object.__setattr__(self, "x_lo", x_lo)
        object.__setattr__(self, "x_hi", x_hi)
        object.__setattr__(self, "y_lo", float(self.y_lo))
        object.__setattr__(self, "y_hi", float(self.y_hi))
        if x_lo.shape != x_hi.shape or x_lo.ndim != 1:
            raise ValueError("x_lo and x_hi must be 1-d vectors of equal length")
        if not (np.all(np.isfinite(x_lo)) and np.all(np.isfinite(x_hi))):
            raise ValueError("box bounds must be finite")
        if np.any(x_lo > x_hi) or self.y_lo > self.y_hi:
            raise ValueError("box must satisfy lo <= hi coordinatewise")

    @property
    def dim(self) -> int:
        return self.x_lo.shape[0]

    def clip_x(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.x_lo, self.x_hi)

    def contains(self, p: Sample, tol: float = 1e-12) -> bool:
        return bool(
            np.all(p.x >= self.x_lo - tol)
            and np.all(p.x <= self.x_hi + tol)
            and self.y_lo - tol <= p.y <= self.y_hi + tol
        )


def project_to_support(p: Sample, box: SupportBox) -> Sample:
    """Coordinatewise clamp of a sample into the box. Idempotent."""
    if p.dim != box.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {box.dim}")
    return Sample(box.clip_x(p.x), min(max(p.y, box.y_lo), box.y_hi))


def support_diameter(box: SupportBox, cost: TransportCost) -> float:
    """Largest transport distance between two points of the box.

    With a frozen label axis (kappa = inf) the label extent is excluded,
    since no admissible perturbation moves along it.
    """
    dx = float(np.linalg.norm(box.x_hi - box.x_lo))
    if cost.label_frozen:
        d = dx
    else:
        d = dx + cost.kappa * (box.y_hi - box.y_lo)
    if not d > 0.0:
        raise ValueError("degenerate box: transport diameter is zero")
    return d


def bounding_box(data: Dataset, inflate: float = 1.0) -> SupportBox:
    """Smallest box containing the data, optionally inflated about its center.

    inflate scales each half-width; 1.0 returns the tight bounding box.
    """
    if inflate <= 0:
        raise ValueError("inflate factor must be positive")
    x_lo = data.X.min(axis=0)
    x_hi = data.X.max(axis=0)
    y_lo = float(data.y.min())
    y_hi = float(data.y.max())
    if inflate != 1.0:
        cx = 0.5 * (x_lo + x_hi)
        hx = 0.5 * (x_hi - x_lo) * inflate
        x_lo, x_hi = cx - hx, cx + hx
        cy = 0.5 * (y_lo + y_hi)
        hy = 0.5 * (y_hi - y_lo) * inflate
        y_lo, y_hi = cy - hy, cy + hy
    return SupportBox(x_lo, x_hi, y_lo, y_hi)


@dataclass(frozen=True)
class DroConfig:
    """Knobs for the robust training loop.

    rho        ambiguity radius (0 disables the adversary's budget)
    kappa      label-transport weight; inf freezes labels
    T          outer iterations
    K          cap on inner ascent steps per sample
    eta        inner ascent step size
    alpha0     policy step scale; per-run step is alpha0 / sqrt(T)
    beta0      dual step scale (defaults to alpha0)
    grad_tol   inner stopping tolerance on the gradient norm; None derives
               a tolerance from the current curvature each iteration
    gamma_min  static lower clamp for the dual variable
    gamma_max  static upper clamp for the dual variable
    seed       master seed; every random draw descends from it
    """

    rho: float = 0.1
    kappa: float = math.inf
    T: int = 20000
    K: int = 20
    eta: float = 0.1
    alpha0: float = 1.0
    beta0: float | None = None
    grad_tol: float | None = None
    gamma_min: float = 1e-3
    gamma_max: float = 1e6
    seed: int = 0

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if self.beta0 is not None and not self.beta0 > 0:
            raise ValueError("beta0 must be positive")
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not (0 <= self.gamma_min <= self.gamma_max):
            raise ValueError("need 0 <= gamma_min <= gamma_max")

    @property
    def beta0_effective(self) -> float:
        return self.alpha0 if self.beta0 is None else self.beta0

    @property
    def cost(self) -> TransportCost:
        return TransportCost(self.kappa)


@dataclass(frozen=True)
class TrainState:
    """Policy coefficients (intercept last) plus the dual variable gamma."""

    theta: np.ndarray
    gamma: float
    t: int = 0

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "gamma", float(self.gamma))
        if theta.ndim != 1 or theta.shape[0] < 1:
            raise ValueError("theta must be a 1-d vector of length s+1")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        if not math.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError("gamma must be finite and nonnegative")

    @property
    def s(self) -> int:
        return self.theta.shape[0] - 1

    @property
    def coeffs(self) -> np.ndarray:
        return self.theta[:-1]

    @property
    def intercept(self) -> float:
        return float(self.theta[-1])


@dataclass
class RunMetrics:
    """Per-iteration training diagnostics plus phase wall-clock totals.

    One record per completed outer iteration. Snapshots hold (t, state)
    pairs when snapshotting was requested.
    """

    grad_theta_norm_sq: np.ndarray
    grad_gamma_sq: np.ndarray
    h_value: np.ndarray
    inner_steps: np.ndarray
    gamma: np.ndarray
    train_seconds: float = 0.0
    eval_seconds: float = 0.0
    snapshots: list = field(default_factory=list)

    @property
    def n_iterations(self) -> int:
        return self.h_value.shape[0]

    @staticmethod
    def empty() -> "RunMetrics":
        z = np.zeros(0)
        return RunMetrics(z, z.copy(), z.copy(), np.zeros(0, dtype=int), z.copy())


def _fmt(v: float) -> str:
    return repr(float(v))


def dataset_csv_bytes(data: Dataset) -> bytes:
    """Serialize a dataset to the canonical CSV byte layout."""
    lines = [",".join([f"x{i + 1}" for i in range(data.s)] + ["y"])]
    for i in range(data.n):
        row = [_fmt(v) for v in data.X[i]] + [_fmt(data.y[i])]
        lines.append(",".join(row))
    return ("\n".join(lines) + "\n").encode("utf-8")


def save_dataset(data: Dataset, path: str) -> None:
    """Write a dataset as CSV with header x1..xs,y, one sample per row."""
    with open(path, "wb") as fh:
        fh.write(dataset_csv_bytes(data))


def load_dataset(path: str) -> Dataset:
    """Read a dataset from the CSV layout written by save_dataset."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[-1] != "y":
            raise ValueError(f"{path}: expected header x1..xs,y")
        s = len(header) - 1
        if header[:s] != [f"x{i + 1}" for i in range(s)]:
            raise ValueError(f"{path}: expected header x1..xs,y")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no samples")
    arr = np.array(rows, dtype=float)
    return Dataset(arr[:, :s], arr[:, s])

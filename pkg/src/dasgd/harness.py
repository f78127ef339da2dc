"""Experiment orchestration: method-comparison grids, online regret, timing.

Every trial of a grid cell generates one (train, test) split that all
methods consume byte-identically (the split hash is recorded with each
result row). Wall-clock measurements live in their own output file:
costs and states are reproducible bit for bit from the master seed,
elapsed seconds never are, so trials.csv / summary.csv / regret.csv stay
byte-deterministic while timings.csv and timing.csv carry the clocks.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import ErmConfig, erm_train, evaluate_policy, saa_quantile
from .calibration import estimate_diameter, radius_for_confidence
from .core import (
    Dataset,
    DroConfig,
    TrainState,
    TransportCost,
    bounding_box,
    dataset_csv_bytes,
    derive_seed,
)
from .costs import NewsvendorParams, default_delta
from .datagen import GeneratorSource, GenSpec, generate, truth_optimal_cost
from .inner_max import perturb
from .sgd import BootstrapSource, StepSchedule, default_state, train

__all__ = [
    "ExperimentConfig",
    "OnlineConfig",
    "TimingConfig",
    "TrialRecord",
    "TrialTiming",
    "run_experiment",
    "run_online",
    "timing_study",
    "summarize",
    "write_trials",
    "read_trials",
    "write_timings",
    "write_summary",
    "write_regret",
    "write_timing_table",
]

KNOWN_METHODS = ("dasgd", "erm1", "erm2", "saa")

_DATA_TAG = 0
_METHOD_TAG_BASE = 1
_HELDOUT_TAG = 90
_COMPARATOR_TAG = 91
_ONLINE_STREAM_TAG = 92
_LEARNER_TAG = 93


def _from_dict(cls, d: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**d)


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid over (s, n, sigma) with repeated trials and a method list.

    method_configs holds per-method overrides, e.g.
    {"dasgd": {"T": 5000, "rho": 0.2}, "erm2": {"l1_weight": 0.05}}.
    A dasgd rho of None calibrates the radius per trial from the train
    split at confidence q.
    """

    s_list: tuple = (10, 50)
    n_list: tuple = (10, 50, 100)
    sigma_list: tuple = (0.5, 1.0)
    repeats: int = 20
    methods: tuple = KNOWN_METHODS
    q: float = 0.95
    seed: int = 0
    n_test: int = 10000
    c_b: float = 1.0
    c_h: float = 0.2
    # smoothing half-width for robust training, as a multiple of std(y);
    # wide enough that the dual clamp leaves the adversary active
    delta_scale: float = 1.5
    feature_dist: str = "uniform"
    workers: int = 1
    method_configs: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "s_list", tuple(self.s_list))
        object.__setattr__(self, "n_list", tuple(self.n_list))
        object.__setattr__(self, "sigma_list", tuple(float(v) for v in self.sigma_list))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if not self.methods:
            raise ValueError("methods must be nonempty")
        for m in self.methods:
            if m not in KNOWN_METHODS:
                raise ValueError(f"unknown method {m!r}; known: {KNOWN_METHODS}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        return _from_dict(ExperimentConfig, d)


@dataclass(frozen=True)
class TrialRecord:
    """One method's out-of-sample result on one trial split."""

    method: str
    s: int
    n: int
    sigma: float
    repeat: int
    out_of_sample_cost: float
    rho: float
    final_gamma: float
    data_hash: str
    error: str = ""


@dataclass(frozen=True)
class TrialTiming:
    """Wall-clock seconds for one method on one trial (not reproducible)."""

    method: str
    s: int
    n: int
    sigma: float
    repeat: int
    train_seconds: float
    eval_seconds: float


def _dasgd_run(
    train_ds: Dataset,
    cfg: ExperimentConfig,
    mcfg: dict,
    seed: int,
) -> tuple[TrainState, float]:
    kappa = mcfg.get("kappa", math.inf)
    cost = TransportCost(kappa)
    rho = mcfg.get("rho")
    if rho is None:
        # Calibrated radius, capped at a fraction of the observed diameter:
        # below ~100 samples the concentration formula exceeds the diameter
        # itself, where its coverage guarantee is vacuous anyway.
        d_hat = estimate_diameter(train_ds, cost)
        rho = min(
            radius_for_confidence(train_ds.n, cfg.q, d_hat),
            mcfg.get("rho_cap_frac", 0.25) * d_hat,
        )
    delta = mcfg.get("delta")
    if delta is None:
        delta = default_delta(train_ds.y, mcfg.get("delta_scale", cfg.delta_scale))
    p = NewsvendorParams(cfg.c_b, cfg.c_h, delta)
    dro = DroConfig(
        rho=rho,
        kappa=kappa,
        T=mcfg.get("T", 20000),
        K=mcfg.get("K", 20),
        eta=mcfg.get("eta", 0.1),
        alpha0=mcfg.get("alpha0", 0.3),
        beta0=mcfg.get("beta0"),
        seed=seed,
    )
    box = bounding_box(train_ds, mcfg.get("inflate", 1.0))
    init = default_state(dro, train_ds.s)
    state, _ = train(BootstrapSource(train_ds, seed), dro, box, p, init)
    return state, rho


def _train_one_method(
    method: str,
    train_ds: Dataset,
    cfg: ExperimentConfig,
    seed: int,
) -> tuple[TrainState, float, float]:
    """Returns (state, rho, final_gamma); rho/gamma are NaN off the robust path."""
    mcfg = cfg.method_configs.get(method, {})
    if method == "dasgd":
        state, rho = _dasgd_run(train_ds, cfg, mcfg, seed)
        return state, rho, state.gamma
    p = NewsvendorParams(cfg.c_b, cfg.c_h, 0.1)
    if method == "saa":
        theta = np.zeros(train_ds.s + 1)
        theta[-1] = saa_quantile(train_ds.y, p)
        return TrainState(theta, 0.0), math.nan, math.nan
    l1 = mcfg.get("l1_weight", 0.0 if method == "erm1" else 0.1)
    ecfg = ErmConfig(
        l1_weight=l1,
        iterations=mcfg.get("iterations"),
        step_scale=mcfg.get("step_scale"),
        seed=seed,
    )
    return erm_train(train_ds, p, ecfg), math.nan, math.nan


def _run_trial(
    cfg: ExperimentConfig, i_s: int, i_n: int, i_sig: int, rep: int
) -> tuple[list[TrialRecord], list[TrialTiming]]:
    s = cfg.s_list[i_s]
    n = cfg.n_list[i_n]
    sigma = cfg.sigma_list[i_sig]
    spec = GenSpec(
        s=s,
        n_train=n,
        n_test=cfg.n_test,
        sigma_eps=sigma,
        feature_dist=cfg.feature_dist,
        seed=derive_seed(cfg.seed, _DATA_TAG, i_s, i_n, i_sig, rep),
    )
    train_ds, test_ds = generate(spec)
    split_hash = hashlib.sha256(
        dataset_csv_bytes(train_ds) + dataset_csv_bytes(test_ds)
    ).hexdigest()[:16]
    p_eval = NewsvendorParams(cfg.c_b, cfg.c_h, 0.1)

    records: list[TrialRecord] = []
    timings: list[TrialTiming] = []
    for m_idx, method in enumerate(cfg.methods):
        seed = derive_seed(cfg.seed, _METHOD_TAG_BASE + m_idx, i_s, i_n, i_sig, rep)
        try:
            t0 = time.perf_counter()
            state, rho, gamma = _train_one_method(method, train_ds, cfg, seed)
            t1 = time.perf_counter()
            cost = evaluate_policy(state, test_ds, p_eval)
            t2 = time.perf_counter()
            records.append(
                TrialRecord(method, s, n, sigma, rep, cost, rho, gamma, split_hash)
            )
            timings.append(TrialTiming(method, s, n, sigma, rep, t1 - t0, t2 - t1))
        except Exception as e:  # record the failure, keep the run going
            msg = f"{type(e).__name__}: {e}".replace("\n", " ")
            records.append(
                TrialRecord(method, s, n, sigma, rep, math.nan, math.nan, math.nan,
                            split_hash, error=msg)
            )
            timings.append(TrialTiming(method, s, n, sigma, rep, math.nan, math.nan))
    return records, timings


def _trial_args(cfg: ExperimentConfig):
    for i_s in range(len(cfg.s_list)):
        for i_n in range(len(cfg.n_list)):
            for i_sig in range(len(cfg.sigma_list)):
                for rep in range(cfg.repeats):
                    yield (cfg, i_s, i_n, i_sig, rep)


def _trial_star(args):
    return _run_trial(*args)


_RECORD_SORT = ("s", "n", "sigma", "repeat", "method")


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: str | None = None,
    figures: bool = True,
) -> tuple[list[TrialRecord], list[TrialTiming], list[dict]]:
    """Run the full grid; optionally write trials/timings/summary and figures.

    Trials are independent, so with cfg.workers > 1 they run in a process
    pool; results are sorted before writing, making the output independent
    of collection order.
    """
    args = list(_trial_args(cfg))
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outs = list(pool.map(_trial_star, args))
    else:
        outs = [_run_trial(*a) for a in args]

    records = [r for recs, _ in outs for r in recs]
    timings = [t for _, tims in outs for t in tims]
    records.sort(key=lambda r: (r.s, r.n, r.sigma, r.repeat, r.method))
    timings.sort(key=lambda t: (t.s, t.n, t.sigma, t.repeat, t.method))
    summary = summarize(records)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_trials(records, os.path.join(out_dir, "trials.csv"))
        write_timings(timings, os.path.join(out_dir, "timings.csv"))
        write_summary(summary, os.path.join(out_dir, "summary.csv"))
        if figures:
            from .figures import save_cost_curves

            save_cost_curves(summary, out_dir, oracle=_oracle_floors(cfg))
    return records, timings, summary


def _oracle_floors(cfg: ExperimentConfig, n_mc: int = 20000) -> dict:
    """Mean clairvoyant cost per (s, sigma) cell, averaged over the repeat
    instances; drawn as a floor line under the method curves."""
    p = NewsvendorParams(cfg.c_b, cfg.c_h, 0.1)
    floors: dict = {}
    for i_s, s in enumerate(cfg.s_list):
        for i_sig, sigma in enumerate(cfg.sigma_list):
            vals = []
            for rep in range(cfg.repeats):
                spec = GenSpec(
                    s=s, n_train=1, n_test=1, sigma_eps=sigma,
                    feature_dist=cfg.feature_dist,
                    seed=derive_seed(cfg.seed, _DATA_TAG, i_s, 0, i_sig, rep),
                )
                vals.append(truth_optimal_cost(spec, p, n_mc))
            floors[(s, sigma)] = float(np.mean(vals))
    return floors


def summarize(records: list[TrialRecord]) -> list[dict]:
    """Per-cell per-method mean and sample variance of out-of-sample cost."""
    cells: dict[tuple, list[float]] = {}
    for r in records:
        cells.setdefault((r.method, r.s, r.n, r.sigma), []).append(r.out_of_sample_cost)
    rows = []
    for (method, s, n, sigma), costs in sorted(
        cells.items(), key=lambda kv: (kv[0][1], kv[0][2], kv[0][3], kv[0][0])
    ):
        arr = np.asarray(costs)
        rows.append(
            {
                "method": method,
                "s": s,
                "n": n,
                "sigma": sigma,
                "repeats": len(costs),
                "mean_cost": float(np.mean(arr)),
                "var_cost": float(np.var(arr, ddof=1)) if len(costs) > 1 else 0.0,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# online mode


@dataclass(frozen=True)
class OnlineConfig:
    """Streaming run with a fixed ambiguity radius and an offline comparator.

    The comparator state is fit by a long bootstrap run on a held-out
    dataset drawn from the same generator; the streaming learner then
    faces fresh draws one at a time.
    """

    s: int = 5
    sigma: float = 0.5
    rho: float = 0.1
    T: int = 16000
    seed: int = 0
    feature_dist: str = "uniform"
    c_b: float = 1.0
    c_h: float = 0.2
    delta: float | None = None
    delta_scale: float = 1.5
    K: int = 20
    eta: float = 0.1
    alpha0: float = 0.3
    comparator_n: int = 2000
    comparator_T: int = 20000

    @staticmethod
    def from_dict(d: dict) -> "OnlineConfig":
        return _from_dict(OnlineConfig, d)


def _online_box(spec: GenSpec, heldout: Dataset, sigma: float):
    if spec.feature_dist == "uniform":
        from .core import SupportBox

        pad = 4.0 * sigma
        return SupportBox(
            np.zeros(spec.s),
            np.ones(spec.s),
            float(heldout.y.min()) - pad,
            float(heldout.y.max()) + pad,
        )
    return bounding_box(heldout, inflate=1.5)


def run_online(
    cfg: OnlineConfig,
    out_dir: str | None = None,
    figures: bool = True,
    comparator: TrainState | None = None,
    freeze_learner: bool = False,
) -> list[dict]:
    """Stream-mode training with per-step regret against the comparator.

    Each step's regret term is the learner's inner-maximization value at
    its own adversarial point minus the comparator's value at its own
    adversarial point, both on the same arriving sample. freeze_learner
    pins the learner at the comparator state (a sanity mode: the regret
    is then identically zero).
    """
    heldout_spec = GenSpec(
        s=cfg.s,
        n_train=cfg.comparator_n,
        n_test=1,
        sigma_eps=cfg.sigma,
        feature_dist=cfg.feature_dist,
        seed=derive_seed(cfg.seed, _HELDOUT_TAG),
    )
    heldout, _ = generate(heldout_spec)
    delta = cfg.delta if cfg.delta is not None else default_delta(heldout.y, cfg.delta_scale)
    p = NewsvendorParams(cfg.c_b, cfg.c_h, delta)
    box = _online_box(heldout_spec, heldout, cfg.sigma)

    if comparator is None:
        comp_cfg = DroConfig(
            rho=cfg.rho, T=cfg.comparator_T, K=cfg.K, eta=cfg.eta, alpha0=cfg.alpha0,
            seed=derive_seed(cfg.seed, _COMPARATOR_TAG),
        )
        comparator, _ = train(
            BootstrapSource(heldout, comp_cfg.seed), comp_cfg, box, p,
            default_state(comp_cfg, cfg.s),
        )

    stream_spec = GenSpec(
        s=cfg.s,
        n_train=1,
        n_test=1,
        sigma_eps=cfg.sigma,
        feature_dist=cfg.feature_dist,
        seed=derive_seed(cfg.seed, _ONLINE_STREAM_TAG),
    )
    live_cfg = DroConfig(
        rho=cfg.rho, T=cfg.T, K=cfg.K, eta=cfg.eta, alpha0=cfg.alpha0,
        seed=derive_seed(cfg.seed, _LEARNER_TAG),
    )
    init = comparator if freeze_learner else default_state(live_cfg, cfg.s)
    schedule = StepSchedule(0.0, 0.0) if freeze_learner else None
    _, metrics = train(GeneratorSource(stream_spec), live_cfg, box, p, init, schedule)

    # replay the identical stream to evaluate the comparator's own values
    replay = GeneratorSource(stream_spec)
    rows: list[dict] = []
    cum = 0.0
    for t in range(cfg.T):
        xi = replay.draw(t)
        h_star = perturb(comparator, xi, live_cfg, box, p).h_value
        term = float(metrics.h_value[t]) - h_star
        cum += term
        rows.append({"t": t + 1, "regret_term": term, "cum_regret": cum})

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_regret(rows, os.path.join(out_dir, "regret.csv"))
        if figures:
            from .figures import save_regret_curve

            save_regret_curve(rows, os.path.join(out_dir, "regret.png"))
    return rows


# ---------------------------------------------------------------------------
# timing study


@dataclass(frozen=True)
class TimingConfig:
    """Wall-clock study over (s, n) cells at fixed iteration budgets."""

    s_list: tuple = (50,)
    n_list: tuple = (10, 500)
    sigma_list: tuple = (0.5,)
    repeats: int = 3
    methods: tuple = ("dasgd",)
    T: int = 4000
    K: int = 10
    q: float = 0.95
    seed: int = 0
    n_test: int = 2000
    c_b: float = 1.0
    c_h: float = 0.2
    feature_dist: str = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "s_list", tuple(self.s_list))
        object.__setattr__(self, "n_list", tuple(self.n_list))
        object.__setattr__(self, "sigma_list", tuple(float(v) for v in self.sigma_list))
        object.__setattr__(self, "methods", tuple(self.methods))

    @staticmethod
    def from_dict(d: dict) -> "TimingConfig":
        return _from_dict(TimingConfig, d)


def timing_study(
    cfg: TimingConfig, out_dir: str | None = None, figures: bool = True
) -> list[dict]:
    """Mean wall-clock (train + evaluate) per (s, n) cell and method.

    Averages over repeats and sigma values; runs sequentially so the
    clocks are not polluted by contention.
    """
    exp = ExperimentConfig(
        s_list=cfg.s_list,
        n_list=cfg.n_list,
        sigma_list=cfg.sigma_list,
        repeats=cfg.repeats,
        methods=cfg.methods if cfg.methods else ("dasgd",),
        q=cfg.q,
        seed=cfg.seed,
        n_test=cfg.n_test,
        c_b=cfg.c_b,
        c_h=cfg.c_h,
        feature_dist=cfg.feature_dist,
        workers=1,
        method_configs={"dasgd": {"T": cfg.T, "K": cfg.K}},
    )
    rows: list[dict] = []
    if cfg.methods:
        _, timings, _ = run_experiment(exp, out_dir=None, figures=False)
        cells: dict[tuple, dict[str, list[float]]] = {}
        for t in timings:
            cells.setdefault((t.s, t.n), {}).setdefault(t.method, []).append(
                t.train_seconds + t.eval_seconds
            )
        for (s, n) in sorted(cells):
            row: dict = {"s": s, "n": n}
            for m in cfg.methods:
                vals = cells[(s, n)].get(m, [])
                row[m] = float(np.mean(vals)) if vals else math.nan
            rows.append(row)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_timing_table(rows, list(cfg.methods), os.path.join(out_dir, "timing.csv"))
        if figures and rows:
            from .figures import save_timing_chart

            save_timing_chart(rows, list(cfg.methods), os.path.join(out_dir, "timing.png"))
    return rows


# ---------------------------------------------------------------------------
# CSV io (floats via repr: shortest round-trip form, byte-stable)


def _w(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_w(v) for v in row])


TRIALS_HEADER = [
    "method", "s", "n", "sigma", "repeat",
    "out_of_sample_cost", "rho", "final_gamma", "data_hash", "error",
]


def write_trials(records: list[TrialRecord], path: str) -> None:
    _write_csv(
        path,
        TRIALS_HEADER,
        [
            [r.method, r.s, r.n, r.sigma, r.repeat,
             r.out_of_sample_cost, r.rho, r.final_gamma, r.data_hash, r.error]
            for r in records
        ],
    )


def read_trials(path: str) -> list[TrialRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRIALS_HEADER:
            raise ValueError(f"{path}: unexpected trials header {header}")
        out = []
        for row in reader:
            out.append(
                TrialRecord(
                    method=row[0], s=int(row[1]), n=int(row[2]), sigma=float(row[3]),
                    repeat=int(row[4]), out_of_sample_cost=float(row[5]),
                    rho=float(row[6]), final_gamma=float(row[7]),
                    data_hash=row[8], error=row[9],
                )
            )
    return out


def write_timings(timings: list[TrialTiming], path: str) -> None:
    _write_csv(
        path,
        ["method", "s", "n", "sigma", "repeat", "train_seconds", "eval_seconds"],
        [
            [t.method, t.s, t.n, t.sigma, t.repeat, t.train_seconds, t.eval_seconds]
            for t in timings
        ],
    )


def write_summary(rows: list[dict], path: str) -> None:
    _write_csv(
        path,
        ["method", "s", "n", "sigma", "repeats", "mean_cost", "var_cost"],
        [
            [r["method"], r["s"], r["n"], r["sigma"], r["repeats"],
             r["mean_cost"], r["var_cost"]]
            for r in rows
        ],
    )


def write_regret(rows: list[dict], path: str) -> None:
    _write_csv(
        path,
        ["t", "regret_term", "cum_regret"],
        [[r["t"], r["regret_term"], r["cum_regret"]] for r in rows],
    )


def write_timing_table(rows: list[dict], methods: list[str], path: str) -> None:
    _write_csv(
        path,
        ["s", "n"] + list(methods),
        [[r["s"], r["n"]] + [r[m] for m in methods] for r in rows],
    )

"""Acceptance gate: one test per release criterion, at its stated tolerance.

Each test prints a PASS line (visible with pytest -s; the -v test names
carry the same information). Criteria with stated runtime budgets assert
them too. Wall-clock output files (timings.csv / timing.csv) are the one
exclusion from the byte-determinism check: elapsed seconds are not
reproducible, which is why the harness keeps them out of trials.csv.
"""
import json
import math
import os
import time
import warnings

import numpy as np
import pytest

from dasgd.baselines import ErmConfig, erm_train, saa_quantile
from dasgd.calibration import coverage_probability, radius_for_confidence
from dasgd.cli import main as cli_main
from dasgd.core import Dataset, DroConfig, Sample, TrainState, bounding_box
from dasgd.costs import (
    NewsvendorParams,
    cost_kinked,
    cost_smoothed,
    cost_smoothed_dz,
    default_delta,
    grad_theta_cost,
    grad_x_cost,
    policy_eval,
)
from dasgd.datagen import GenSpec, generate
from dasgd.harness import ExperimentConfig, OnlineConfig, TimingConfig, run_experiment, run_online, timing_study
from dasgd.inner_max import oracle_grid_max, perturb
from dasgd.sgd import BootstrapSource, default_state, dual_objective_estimate, full_gradient_estimate, train

from helpers import oracle_family, make_box, P_DEFAULT, tight_inner_cfg

warnings.filterwarnings("ignore", category=RuntimeWarning)


def _report(line):
    print(line)


def _random_params(rng):
    return NewsvendorParams(
        c_b=float(rng.uniform(0.05, 5.0)),
        c_h=float(rng.uniform(0.05, 5.0)),
        delta=float(rng.uniform(0.01, 1.0)),
    )


def test_c01_smoothed_cost_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    for _ in range(1000):
        p = _random_params(rng)
        y = float(rng.uniform(-10, 10))
        for z, slope in ((y - p.delta, -p.c_b), (y + p.delta, p.c_h)):
            assert abs(cost_smoothed(z, y, p) - cost_kinked(z, y, p)) <= 1e-10
            assert abs(cost_smoothed_dz(z, y, p) - slope) <= 1e-10
        gap = cost_smoothed(y, y, p) - cost_kinked(y, y, p)
        assert abs(gap - (p.c_b + p.c_h) * p.delta / 4.0) <= 1e-10
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    _report(f"PASS criterion 1: smoothed-cost exactness at band edges and midpoint "
            f"(1000 draws, {elapsed:.2f}s)")


def test_c02_gradient_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    h = 1e-6
    checked = 0
    while checked < 1000:
        p = _random_params(rng)
        s = int(rng.integers(1, 6))
        theta = rng.uniform(-1, 1, s + 1)
        x = rng.uniform(-1, 1, s)
        y = float(rng.uniform(-2, 2))
        st = TrainState(theta, 1.0)
        z = policy_eval(st, x)
        if min(abs(z - (y - p.delta)), abs(z - (y + p.delta))) <= 1e-4:
            continue
        sample = Sample(x, y)
        g_theta = grad_theta_cost(st, sample, p)
        g_x = grad_x_cost(st, sample, p)

        fd_theta = np.empty(s + 1)
        for j in range(s + 1):
            e = np.zeros(s + 1)
            e[j] = h
            up = cost_smoothed(policy_eval(TrainState(theta + e, 1.0), x), y, p)
            dn = cost_smoothed(policy_eval(TrainState(theta - e, 1.0), x), y, p)
            fd_theta[j] = (up - dn) / (2 * h)
        fd_x = np.empty(s)
        for j in range(s):
            e = np.zeros(s)
            e[j] = h
            fd_x[j] = (cost_smoothed(policy_eval(st, x + e), y, p)
                       - cost_smoothed(policy_eval(st, x - e), y, p)) / (2 * h)

        assert np.linalg.norm(fd_theta - g_theta) <= 1e-5 * max(np.linalg.norm(g_theta), 1e-8)
        assert np.linalg.norm(fd_x - g_x) <= 1e-5 * max(np.linalg.norm(g_x), 1e-8)
        checked += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    _report(f"PASS criterion 2: analytic gradients match central differences "
            f"(1000 points, {elapsed:.2f}s)")


def test_c03_inner_max_oracle_equivalence():
    t0 = time.perf_counter()
    p = P_DEFAULT
    worst = 0.0
    rng = np.random.default_rng(103)
    cfg = tight_inner_cfg(rho=0.1, K=2500, eta=0.03)
    box1 = make_box(1)
    for _ in range(200):
        st, base = oracle_family(rng, 1, p, grid_snap=1e-4)
        res = perturb(st, base, cfg, box1, p)
        _, h_best = oracle_grid_max(st, base, cfg, box1, p, 1e-4)
        worst = max(worst, abs(res.h_value - h_best))
    box2 = make_box(2)
    for _ in range(50):
        st, base = oracle_family(rng, 2, p, grid_snap=1e-3)
        res = perturb(st, base, cfg, box2, p)
        _, h_best = oracle_grid_max(st, base, cfg, box2, p, 1e-3)
        worst = max(worst, abs(res.h_value - h_best))
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-3
    assert elapsed < 60.0
    _report(f"PASS criterion 3: ascent matches grid oracle on 200 1-D + 50 2-D "
            f"instances (worst gap {worst:.2e}, {elapsed:.1f}s)")


def test_c04_calibration_round_trip():
    assert radius_for_confidence(100, 0.95, 1.0) == pytest.approx(0.34616, abs=1e-5)
    assert radius_for_confidence(100, 0.95, 0.5) == pytest.approx(0.17308, abs=1e-5)
    checked = 0
    for n in (10, 50, 100, 1000, 5000):
        for q in (0.5, 0.8, 0.9, 0.95, 0.99):
            for d in (0.5, 0.8, 1.0, 2.0, 5.0):
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    rho = radius_for_confidence(n, q, d)
                if rho >= d:
                    continue
                assert coverage_probability(n, rho, d) == pytest.approx(q, abs=1e-10)
                checked += 1
    assert checked > 50
    _report(f"PASS criterion 4: radius/coverage round trip to 1e-10 on {checked} "
            f"grid cells plus both reference values")


def test_c05_baseline_quantile_anchor():
    t0 = time.perf_counter()
    p = NewsvendorParams(1.0, 0.2, 0.1)
    assert p.critical_ratio == pytest.approx(0.83333, abs=1e-5)
    for n, seed in ((11, 0), (101, 1), (1001, 2)):
        rng = np.random.default_rng(seed)
        ys = rng.normal(1.0, 0.5, n)
        data = Dataset(np.zeros((n, 0)), ys)
        st = erm_train(data, p, ErmConfig(iterations=60000))
        target = saa_quantile(ys, p)
        ys_sorted = np.sort(ys)
        k = int(np.ceil(p.critical_ratio * n - 1e-12))
        gaps = []
        if k >= 2:
            gaps.append(ys_sorted[k - 1] - ys_sorted[k - 2])
        if k < n:
            gaps.append(ys_sorted[k] - ys_sorted[k - 1])
        assert abs(st.intercept - target) <= max(gaps)
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    _report(f"PASS criterion 5: intercept-only ERM sits within one order-statistic "
            f"spacing of the sort quantile for n in (11, 101, 1001) ({elapsed:.1f}s)")


def test_c06_convergence_rate_shape():
    t0 = time.perf_counter()
    spec = GenSpec(s=5, n_train=50, n_test=1, sigma_eps=0.5, seed=7)
    data, _ = generate(spec)
    p = NewsvendorParams(1.0, 0.2, default_delta(data.y, 1.5))
    box = bounding_box(data)
    Ts = (1000, 4000, 16000)
    n_blocks = 32
    avgs = []
    for T in Ts:
        cfg = DroConfig(rho=0.1, T=T, K=60, alpha0=1.0, seed=21)
        mids = sorted({int((j + 0.5) * T / n_blocks) for j in range(n_blocks)})
        _, m = train(BootstrapSource(data, cfg.seed), cfg, box, p,
                     default_state(cfg, data.s), snapshot_at=mids)
        vals = []
        for _, st in m.snapshots:
            g_th, g_ga = full_gradient_estimate(st, data, cfg, box, p)
            vals.append(float(g_th @ g_th) + g_ga**2)
        avgs.append(float(np.mean(vals)))
    assert all(b < a for a, b in zip(avgs, avgs[1:])), avgs
    slope = float(np.polyfit(np.log(Ts), np.log(avgs), 1)[0])
    elapsed = time.perf_counter() - t0
    assert -0.8 <= slope <= -0.2, (slope, avgs)
    assert elapsed < 120.0
    _report(f"PASS criterion 6: running-average squared gradient norms decay with "
            f"log-log slope {slope:.3f} in [-0.8, -0.2] ({elapsed:.1f}s)")


def test_c07_monotone_in_radius():
    spec = GenSpec(s=3, n_train=30, n_test=1, sigma_eps=0.5, seed=3)
    data, _ = generate(spec)
    p = NewsvendorParams(1.0, 0.2, default_delta(data.y, 1.5))
    box = bounding_box(data)
    estimates = []
    for rho in (0.0, 0.1, 0.5):
        cfg = DroConfig(rho=rho, T=6000, K=20, alpha0=1.0, seed=9)
        st, _ = train(BootstrapSource(data, cfg.seed), cfg, box, p,
                      default_state(cfg, data.s))
        estimates.append(dual_objective_estimate(st, data, cfg, box, p))
    for a, b in zip(estimates, estimates[1:]):
        assert b >= a - 1e-2, estimates
    _report(f"PASS criterion 7: trained dual objective nondecreasing over "
            f"rho in (0, 0.1, 0.5): {[round(v, 4) for v in estimates]}")


def test_c08_small_data_robustness():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(
        s_list=(10,), n_list=(10,), sigma_list=(1.0,), repeats=20,
        methods=("dasgd", "erm1"), seed=2024, n_test=10000,
    )
    records, _, summary = run_experiment(cfg)
    assert all(r.error == "" for r in records)
    by_method = {row["method"]: row for row in summary}
    dd, ee = by_method["dasgd"], by_method["erm1"]
    elapsed = time.perf_counter() - t0
    assert dd["mean_cost"] <= ee["mean_cost"], (dd, ee)
    assert dd["var_cost"] <= ee["var_cost"], (dd, ee)
    assert elapsed < 300.0
    _report(
        "PASS criterion 8: robust training beats plain ERM at s=10, n=10, sigma=1 "
        f"(mean {dd['mean_cost']:.4f} <= {ee['mean_cost']:.4f}, "
        f"var {dd['var_cost']:.5f} <= {ee['var_cost']:.5f}, {elapsed:.0f}s)"
    )


def test_c09_timing_shape():
    base = dict(s_list=(50,), n_list=(10, 500), sigma_list=(0.5,), repeats=3,
                methods=("dasgd",), K=10, n_test=2000, seed=5)
    rows_T = timing_study(TimingConfig(T=4000, **base))
    rows_2T = timing_study(TimingConfig(T=8000, **base))
    by_n = {r["n"]: r["dasgd"] for r in rows_T}
    by_n2 = {r["n"]: r["dasgd"] for r in rows_2T}
    n_ratio = by_n[500] / by_n[10]
    t_ratio = by_n2[10] / by_n[10]
    assert n_ratio <= 1.5, by_n
    assert 1.6 <= t_ratio <= 2.4, (by_n, by_n2)
    _report(f"PASS criterion 9: wall-clock flat in n (ratio {n_ratio:.2f} <= 1.5) "
            f"and linear in T (doubling ratio {t_ratio:.2f} in [1.6, 2.4])")


def test_c10_online_regret_sublinear():
    cfg = OnlineConfig(s=5, sigma=0.5, rho=0.1, T=16000, seed=42, K=20)
    rows = run_online(cfg)
    cum = {r["t"]: r["cum_regret"] for r in rows}
    Ts = (1000, 4000, 16000)
    vals = [cum[T] for T in Ts]
    assert all(v > 0 for v in vals), vals
    slope = float(np.polyfit(np.log(Ts), np.log(vals), 1)[0])
    assert slope <= 0.75, (slope, vals)

    frozen = run_online(
        OnlineConfig(s=2, sigma=0.5, rho=0.1, T=300, seed=6,
                     comparator_n=60, comparator_T=500, K=5),
        freeze_learner=True,
    )
    assert all(r["regret_term"] == 0.0 for r in frozen)
    _report(f"PASS criterion 10: cumulative regret grows sublinearly "
            f"(log-log slope {slope:.3f} <= 0.75); frozen comparator regret is 0")


def test_c11_cli_determinism(tmp_path):
    exp_cfg = tmp_path / "exp.json"
    exp_cfg.write_text(json.dumps({
        "s_list": [2], "n_list": [8], "sigma_list": [0.5], "repeats": 2,
        "methods": ["saa", "erm1", "dasgd"], "n_test": 40, "seed": 11,
        "method_configs": {"dasgd": {"T": 200, "K": 5}, "erm1": {"iterations": 2000}},
    }))
    online_cfg = tmp_path / "online.json"
    online_cfg.write_text(json.dumps({
        "s": 2, "T": 60, "rho": 0.1, "seed": 3,
        "comparator_n": 40, "comparator_T": 150, "K": 5,
    }))
    timing_cfg = tmp_path / "timing.json"
    timing_cfg.write_text(json.dumps({
        "s_list": [2], "n_list": [8], "repeats": 1, "T": 50, "K": 3, "n_test": 20,
    }))

    def run_all(root):
        gen = root / "gen"
        assert cli_main(["generate", "--out", str(gen), "--s", "2", "--n-train", "20",
                         "--n-test", "30", "--seed", "4"]) == 0
        model = root / "model.json"
        assert cli_main(["train", "--data", str(gen / "train.csv"), "--out", str(model),
                         "--trace", str(root / "trace.csv"), "--T", "150", "--K", "5",
                         "--rho", "0.1", "--seed", "2"]) == 0
        assert cli_main(["evaluate", "--model", str(model), "--data", str(gen / "test.csv"),
                         "--out", str(root / "eval.json")]) == 0
        assert cli_main(["experiment", "--config", str(exp_cfg),
                         "--out", str(root / "exp")]) == 0
        assert cli_main(["online", "--config", str(online_cfg),
                         "--out", str(root / "online")]) == 0
        assert cli_main(["timing", "--config", str(timing_cfg),
                         "--out", str(root / "timing")]) == 0

    roots = (tmp_path / "run1", tmp_path / "run2")
    for root in roots:
        root.mkdir()
        run_all(root)

    wall_clock_files = {"timings.csv", "timing.csv", "timing.png"}
    compared = 0
    files1 = {}
    for dirpath, _, files in os.walk(roots[0]):
        for name in files:
            path = os.path.join(dirpath, name)
            files1[os.path.relpath(path, roots[0])] = path
    for rel, path1 in sorted(files1.items()):
        path2 = os.path.join(roots[1], rel)
        assert os.path.exists(path2), rel
        if os.path.basename(rel) in wall_clock_files:
            continue
        with open(path1, "rb") as f1, open(path2, "rb") as f2:
            assert f1.read() == f2.read(), f"output differs across runs: {rel}"
        compared += 1
    assert compared >= 10
    _report(f"PASS criterion 11: every subcommand reproduced byte-identical outputs "
            f"({compared} files; wall-clock files excluded by design)")

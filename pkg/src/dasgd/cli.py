"""Command-line entry points.

Subcommands: generate, train, evaluate, experiment, online, timing.
Experiment-style subcommands read a JSON config file whose keys mirror the
corresponding config dataclass; explicit flags override file values. All
outputs are deterministic for a fixed seed except the wall-clock files
(timings.csv / timing.csv).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .baselines import evaluate_policy
from .calibration import estimate_diameter, radius_for_confidence
from .core import (
    DroConfig,
    TrainState,
    TransportCost,
    bounding_box,
    load_dataset,
    save_dataset,
)
from .costs import NewsvendorParams, default_delta
from .datagen import GenSpec, generate
from .harness import (
    ExperimentConfig,
    OnlineConfig,
    TimingConfig,
    run_experiment,
    run_online,
    timing_study,
)
from .sgd import BootstrapSource, default_state, least_squares_state, train, write_trace

__all__ = ["main"]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _dump_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config_dict(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    if not isinstance(d, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return d


def _cmd_generate(args) -> int:
    spec = GenSpec(
        s=args.s,
        n_train=args.n_train,
        n_test=args.n_test,
        sigma_eps=args.sigma,
        feature_dist=args.feature_dist,
        seed=args.seed,
    )
    train_ds, test_ds = generate(spec)
    os.makedirs(args.out, exist_ok=True)
    save_dataset(train_ds, os.path.join(args.out, "train.csv"))
    save_dataset(test_ds, os.path.join(args.out, "test.csv"))
    _dump_json(
        {
            "s": spec.s,
            "n_train": spec.n_train,
            "n_test": spec.n_test,
            "sigma_eps": spec.sigma_eps,
            "feature_dist": spec.feature_dist,
            "seed": spec.seed,
            "theta_true": list(spec.resolve_theta()),
        },
        os.path.join(args.out, "generator.json"),
    )
    print(f"wrote train.csv ({train_ds.n} rows), test.csv ({test_ds.n} rows) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    data = load_dataset(args.data)
    delta = args.delta if args.delta is not None else default_delta(data.y, args.delta_scale)
    p = NewsvendorParams(args.cb, args.ch, delta)
    cost = TransportCost(args.kappa)
    if args.rho is not None:
        rho = args.rho
    else:
        rho = radius_for_confidence(data.n, args.confidence, estimate_diameter(data, cost))
    cfg = DroConfig(
        rho=rho,
        kappa=args.kappa,
        T=args.T,
        K=args.K,
        eta=args.eta,
        alpha0=args.alpha0,
        beta0=args.beta0,
        grad_tol=args.grad_tol,
        gamma_min=args.gamma_min,
        gamma_max=args.gamma_max,
        seed=args.seed,
    )
    box = bounding_box(data, args.inflate)
    init = least_squares_state(data, cfg) if args.warm_start else default_state(cfg, data.s)
    state, metrics = train(BootstrapSource(data, cfg.seed), cfg, box, p, init)
    model = {
        "theta": list(state.theta),
        "gamma": state.gamma,
        "s": data.s,
        "c_b": p.c_b,
        "c_h": p.c_h,
        "delta": p.delta,
        "rho": rho,
        "kappa": None if math.isinf(args.kappa) else args.kappa,
        "T": cfg.T,
        "K": cfg.K,
        "seed": cfg.seed,
    }
    _dump_json(model, args.out)
    if args.trace is not None:
        write_trace(metrics, args.trace)
    print(f"trained on {data.n} samples (rho={rho!r}); model written to {args.out}")
    return 0


def _load_model(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        model = json.load(fh)
    for key in ("theta", "gamma", "c_b", "c_h"):
        if key not in model:
            raise ValueError(f"{path}: model file missing {key!r}")
    return model


def _cmd_evaluate(args) -> int:
    model = _load_model(args.model)
    data = load_dataset(args.data)
    state = TrainState(np.asarray(model["theta"], dtype=float), max(model["gamma"], 0.0))
    if state.s != data.s:
        raise ValueError(f"model dimension {state.s} != dataset dimension {data.s}")
    c_b = args.cb if args.cb is not None else model["c_b"]
    c_h = args.ch if args.ch is not None else model["c_h"]
    p = NewsvendorParams(c_b, c_h, model.get("delta", 0.1))
    cost = evaluate_policy(state, data, p)
    print(f"mean_out_of_sample_cost {cost!r} over {data.n} samples")
    if args.out is not None:
        _dump_json({"mean_cost": cost, "n": data.n, "c_b": c_b, "c_h": c_h}, args.out)
    return 0


def _apply_overrides(d: dict, args, mapping: dict[str, str]) -> dict:
    for attr, key in mapping.items():
        v = getattr(args, attr)
        if v is not None:
            d[key] = v
    return d


def _cmd_experiment(args) -> int:
    d = _load_config_dict(args.config)
    _apply_overrides(
        d,
        args,
        {
            "s": "s_list",
            "n": "n_list",
            "sigma": "sigma_list",
            "repeats": "repeats",
            "seed": "seed",
            "workers": "workers",
            "methods": "methods",
            "n_test": "n_test",
        },
    )
    cfg = ExperimentConfig.from_dict(d)
    records, _, summary = run_experiment(cfg, args.out, figures=not args.no_figures)
    failures = sum(1 for r in records if r.error)
    print(f"{len(records)} trial records ({failures} failures), "
          f"{len(summary)} summary rows written to {args.out}")
    return 0


def _cmd_online(args) -> int:
    d = _load_config_dict(args.config)
    _apply_overrides(
        d, args, {"T": "T", "rho": "rho", "s": "s", "sigma": "sigma", "seed": "seed"}
    )
    cfg = OnlineConfig.from_dict(d)
    rows = run_online(cfg, args.out, figures=not args.no_figures)
    print(f"{len(rows)} regret steps written to {args.out} "
          f"(final cumulative regret {rows[-1]['cum_regret']!r})")
    return 0


def _cmd_timing(args) -> int:
    d = _load_config_dict(args.config)
    _apply_overrides(d, args, {"T": "T", "seed": "seed", "s": "s_list", "n": "n_list"})
    cfg = TimingConfig.from_dict(d)
    rows = timing_study(cfg, args.out, figures=not args.no_figures)
    print(f"{len(rows)} timing cells written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dasgd",
        description="Robust contextual newsvendor training, baselines, and experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic train/test split")
    g.add_argument("--out", required=True)
    g.add_argument("--s", type=int, default=10)
    g.add_argument("--n-train", type=int, default=100)
    g.add_argument("--n-test", type=int, default=10000)
    g.add_argument("--sigma", type=float, default=0.5)
    g.add_argument("--feature-dist", choices=("uniform", "gaussian"), default="uniform")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=_cmd_generate)

    t = sub.add_parser("train", help="fit the robust policy on a dataset CSV")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--trace", default=None)
    t.add_argument("--rho", type=float, default=None,
                   help="ambiguity radius; omit to calibrate from --confidence")
    t.add_argument("--confidence", type=float, default=0.95)
    t.add_argument("--kappa", type=float, default=math.inf)
    t.add_argument("--T", type=int, default=20000)
    t.add_argument("--K", type=int, default=20)
    t.add_argument("--eta", type=float, default=0.1)
    t.add_argument("--alpha0", type=float, default=1.0)
    t.add_argument("--beta0", type=float, default=None)
    t.add_argument("--grad-tol", type=float, default=None)
    t.add_argument("--gamma-min", type=float, default=1e-3)
    t.add_argument("--gamma-max", type=float, default=1e6)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--cb", type=float, default=1.0)
    t.add_argument("--ch", type=float, default=0.2)
    t.add_argument("--delta", type=float, default=None,
                   help="smoothing half-width; omit for 0.1 * std(y)")
    t.add_argument("--delta-scale", type=float, default=0.1)
    t.add_argument("--inflate", type=float, default=1.0)
    t.add_argument("--warm-start", action="store_true")
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("evaluate", help="mean kinked cost of a model on a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", default=None)
    e.add_argument("--cb", type=float, default=None)
    e.add_argument("--ch", type=float, default=None)
    e.set_defaults(func=_cmd_evaluate)

    x = sub.add_parser("experiment", help="method-comparison grid")
    x.add_argument("--config", default=None)
    x.add_argument("--out", required=True)
    x.add_argument("--s", type=_int_list, default=None)
    x.add_argument("--n", type=_int_list, default=None)
    x.add_argument("--sigma", type=_float_list, default=None)
    x.add_argument("--repeats", type=int, default=None)
    x.add_argument("--seed", type=int, default=None)
    x.add_argument("--workers", type=int, default=None)
    x.add_argument("--methods", type=lambda v: v.split(","), default=None)
    x.add_argument("--n-test", type=int, default=None)
    x.add_argument("--no-figures", action="store_true")
    x.set_defaults(func=_cmd_experiment)

    o = sub.add_parser("online", help="streaming run with regret tracking")
    o.add_argument("--config", default=None)
    o.add_argument("--out", required=True)
    o.add_argument("--T", type=int, default=None)
    o.add_argument("--rho", type=float, default=None)
    o.add_argument("--s", type=int, default=None)
    o.add_argument("--sigma", type=float, default=None)
    o.add_argument("--seed", type=int, default=None)
    o.add_argument("--no-figures", action="store_true")
    o.set_defaults(func=_cmd_online)

    m = sub.add_parser("timing", help="wall-clock study over (s, n) cells")
    m.add_argument("--config", default=None)
    m.add_argument("--out", required=True)
    m.add_argument("--T", type=int, default=None)
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--s", type=_int_list, default=None)
    m.add_argument("--n", type=_int_list, default=None)
    m.add_argument("--no-figures", action="store_true")
    m.set_defaults(func=_cmd_timing)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError, KeyError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

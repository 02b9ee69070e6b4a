"""Command-line entry point: config parsing, subcommands, file output.

Subcommands: kernel-dump, trial, ensemble, sweep, optimal.  Runs are
described by a JSON config file; command-line flags override file values.
The master seed is echoed into every output so figures can be regenerated.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .belief import PriorDistribution
from .harness import (
    EnsembleConfig,
    PolicySpec,
    optimal_click_variance,
    optimal_estimator_variance,
    optimal_mean_clicks,
    run_ensemble,
    sweep,
    write_summary_json,
    write_trace_csv,
    write_trials_csv,
)
from .kernel import SystemParams, transition_kernel
from .simulator import StopRule, run_trial
from .strategy import EpsilonGrid


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


_DEFAULTS = {
    "params": {"eta": 0.99, "gamma": 0.9, "nu": 1e-6, "n_max": 100},
    "prior": {"kind": "uniform"},
    "policy": {"kind": "adaptive", "grid_min": 1e-3, "grid_max": 1.0, "grid_size": 50},
    "n0_values": [40],
    "n_trials": 1000,
    "stop": {"n_threshold": 0.5, "max_rounds": None},
    "seed": 0,
    "trace": False,
    "threads": 1,
    "eta_values": None,  # sweep only: overrides params.eta per row
    "sweep_policies": None,  # sweep only: list of policy dicts
}


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass(frozen=True)
class RunConfig:
    """Validated run description; round-trips through JSON."""

    raw: dict = field(repr=False)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        _check_keys(data, set(_DEFAULTS), "config")
        merged = {**{k: v for k, v in _DEFAULTS.items()}, **data}
        _check_keys(merged["params"], {"eta", "gamma", "nu", "n_max"}, "params")
        _check_keys(merged["prior"], {"kind", "mean", "n1", "n2", "p1"}, "prior")
        _check_keys(
            merged["policy"],
            {"kind", "epsilon", "grid_min", "grid_max", "grid_size"},
            "policy",
        )
        _check_keys(merged["stop"], {"n_threshold", "max_rounds"}, "stop")
        cfg = cls(raw=merged)
        # Fail fast on bad values.
        cfg.system_params()
        cfg.prior()
        cfg.policy_spec(merged["policy"])
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def serialize(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.raw, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def system_params(self) -> SystemParams:
        p = self.raw["params"]
        return SystemParams(eta=p["eta"], gamma=p["gamma"], nu=p["nu"], n_max=p["n_max"])

    def prior(self) -> PriorDistribution:
        spec = self.raw["prior"]
        n_max = self.raw["params"]["n_max"]
        kind = spec.get("kind", "uniform")
        if kind == "uniform":
            return PriorDistribution.uniform(n_max)
        if kind == "poisson":
            return PriorDistribution.poisson(spec["mean"], n_max)
        if kind == "two_point":
            return PriorDistribution.two_point(spec["n1"], spec["n2"], spec["p1"], n_max)
        raise ConfigError(f"unknown prior kind {kind!r}")

    def policy_spec(self, spec: dict) -> PolicySpec:
        kind = spec.get("kind")
        if kind == "passive":
            return PolicySpec(kind="passive", epsilon=spec["epsilon"])
        if kind == "adaptive":
            grid = EpsilonGrid(
                values=np.geomspace(
                    spec.get("grid_min", 1e-3),
                    spec.get("grid_max", 1.0),
                    spec.get("grid_size", 50),
                )
            )
            return PolicySpec(kind="adaptive", grid=grid)
        raise ConfigError(f"unknown policy kind {kind!r}")

    def stop_rule(self) -> StopRule:
        spec = self.raw["stop"]
        params = self.system_params()
        rule = StopRule.for_params(params, n_threshold=spec.get("n_threshold", 0.5))
        if spec.get("max_rounds") is not None:
            rule = StopRule(n_threshold=rule.n_threshold, max_rounds=spec["max_rounds"])
        return rule

    def ensemble_config(self) -> EnsembleConfig:
        return EnsembleConfig(
            params=self.system_params(),
            prior=self.prior(),
            policy=self.policy_spec(self.raw["policy"]),
            n0_values=tuple(self.raw["n0_values"]),
            n_trials=self.raw["n_trials"],
            stop=self.stop_rule(),
            master_seed=self.raw["seed"],
            trace=self.raw["trace"],
        )


def _float_csv(value: float) -> str:
    return repr(float(value))


def cmd_kernel_dump(config: RunConfig, epsilon: float, out_path: Path) -> None:
    """Write R(0) and R(1) as two CSV blocks."""
    kernel = transition_kernel(config.system_params(), epsilon)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for label, mat in (("r0", kernel.r0), ("r1", kernel.r1)):
            writer.writerow([label, f"epsilon={epsilon!r}"])
            for row in mat:
                writer.writerow([_float_csv(x) for x in row])


def cmd_trial(
    config: RunConfig, n0: int, out_dir: Path, dump_belief: bool = False
) -> None:
    """Run one fully traced trial; export trace and optional belief snapshots."""
    params = config.system_params()
    if n0 > params.n_max:
        raise ConfigError(f"n0={n0} exceeds n_max={params.n_max}")
    policy = config.policy_spec(config.raw["policy"]).build()
    prior = config.prior()
    stop = config.stop_rule()
    seed = config.raw["seed"]
    record = run_trial(n0, policy, params, prior, stop, seed, trace=True)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trace_csv(out_dir / "trace.csv", [(0, 0, record)])
    write_trials_csv(out_dir / "trial.csv", [(0, 0, record)])
    if dump_belief:
        _dump_belief_history(config, record, out_dir / "belief.csv")


def _dump_belief_history(config: RunConfig, record, path: Path) -> None:
    """Replay the click sequence, writing one flattened joint matrix per round."""
    from .belief import init_belief, update
    from .kernel import KernelCache

    params = config.system_params()
    cache = KernelCache(params)
    belief = init_belief(config.prior())
    dim = params.dim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["round"] + [f"p_{m}_{n}" for m in range(dim) for n in range(dim)]
        writer.writerow(header)
        writer.writerow([0] + [_float_csv(x) for x in belief.joint.ravel()])
        for rnd, (d, eps) in enumerate(zip(record.clicks, record.epsilons), start=1):
            belief = update(belief, cache.get(eps), d)
            writer.writerow([rnd] + [_float_csv(x) for x in belief.joint.ravel()])


def cmd_ensemble(config: RunConfig, out_dir: Path, threads: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    ensemble = config.ensemble_config()
    summaries, records = run_ensemble(ensemble, n_workers=threads)
    write_trials_csv(out_dir / "trials.csv", records)
    if ensemble.trace:
        write_trace_csv(out_dir / "trace.csv", records)
    rows = [s.as_row() for s in summaries]
    write_summary_json(out_dir / "summary.json", config.raw, rows)


def cmd_sweep(config: RunConfig, out_dir: Path, threads: int) -> None:
    """Cartesian grid over (eta, policy); one summary row per (cell, n0)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    eta_values = config.raw["eta_values"] or [config.raw["params"]["eta"]]
    policy_dicts = config.raw["sweep_policies"] or [config.raw["policy"]]
    configs = []
    for eta in eta_values:
        p = dict(config.raw["params"], eta=eta)
        params = SystemParams(eta=p["eta"], gamma=p["gamma"], nu=p["nu"], n_max=p["n_max"])
        for pd in policy_dicts:
            configs.append(
                EnsembleConfig(
                    params=params,
                    prior=config.prior(),
                    policy=config.policy_spec(pd),
                    n0_values=tuple(config.raw["n0_values"]),
                    n_trials=config.raw["n_trials"],
                    stop=config.stop_rule(),
                    master_seed=config.raw["seed"],
                    trace=False,
                )
            )
    rows = sweep(configs, n_workers=threads)
    write_summary_json(out_dir / "sweep.json", config.raw, rows)


def cmd_optimal(config: RunConfig, n0_values: list[int], out_path: Path) -> None:
    params = config.system_params()
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n0", "mean_clicks", "click_variance", "estimator_variance"])
        for n0 in n0_values:
            writer.writerow(
                [
                    n0,
                    _float_csv(optimal_mean_clicks(n0, params.eta, params.gamma)),
                    _float_csv(optimal_click_variance(n0, params.eta, params.gamma)),
                    _float_csv(
                        optimal_estimator_variance(n0, params.eta, params.gamma)
                        if n0 >= 1
                        else 0.0
                    ),
                ]
            )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photonloop",
        description="Storage-loop photon-number-resolving detector simulator",
    )
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--out-dir", type=Path, default=Path("out"))
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--trials", type=int, help="trials per cell (overrides config)")
    parser.add_argument("--threads", type=int, default=1, help="worker processes")
    parser.add_argument("--trace", action="store_true", help="record per-round info traces")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel-dump", help="write R(0)/R(1) for one epsilon as CSV")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("trial", help="run one fully traced trial")
    p.add_argument("--n0", type=int, required=True)
    p.add_argument("--dump-belief", action="store_true")

    sub.add_parser("ensemble", help="run trials for every configured n0")
    sub.add_parser("sweep", help="cartesian sweep over eta and policies")

    p = sub.add_parser("optimal", help="theoretical baseline table")
    p.add_argument("--n0-max", type=int, default=100)
    p.add_argument("--out", type=Path, required=True)
    return parser


def _load_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        config = RunConfig.load(args.config)
    else:
        config = RunConfig.from_dict({})
    raw = dict(config.raw)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.trials is not None:
        raw["n_trials"] = args.trials
    if args.trace:
        raw["trace"] = True
    return RunConfig.from_dict(raw)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args)
        if args.command == "kernel-dump":
            cmd_kernel_dump(config, args.epsilon, args.out)
        elif args.command == "trial":
            cmd_trial(config, args.n0, args.out_dir, dump_belief=args.dump_belief)
        elif args.command == "ensemble":
            cmd_ensemble(config, args.out_dir, args.threads)
        elif args.command == "sweep":
            cmd_sweep(config, args.out_dir, args.threads)
        elif args.command == "optimal":
            cmd_optimal(config, list(range(1, args.n0_max + 1)), args.out)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

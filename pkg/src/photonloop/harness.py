"""Ensemble execution, aggregate metrics, baselines, sweeps, persistence.

Trials are embarrassingly parallel; per-trial seeds are derived from the
master seed and trial index, so summaries are identical for any worker
count.  Aggregation uses single-pass Welford moments, accumulated in
trial order after collection.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .belief import PriorDistribution
from .kernel import KernelCache, SystemParams
from .simulator import StopRule, TrialRecord, derive_trial_seed, run_trial
from .strategy import AdaptivePolicy, EpsilonGrid, PassivePolicy, Policy


@dataclass(frozen=True)
class PolicySpec:
    """Serializable policy description; built into a live policy per worker."""

    kind: str  # "passive" | "adaptive"
    epsilon: float | None = None
    grid: EpsilonGrid | None = None

    def __post_init__(self) -> None:
        if self.kind == "passive":
            if self.epsilon is None:
                raise ValueError("passive policy requires epsilon")
        elif self.kind == "adaptive":
            pass
        else:
            raise ValueError(f"unknown policy kind {self.kind!r}")

    def build(self) -> Policy:
        if self.kind == "passive":
            return PassivePolicy(self.epsilon)
        return AdaptivePolicy(self.grid)

    @property
    def label(self) -> str:
        if self.kind == "passive":
            return f"passive_eps{self.epsilon:g}"
        return "adaptive"


@dataclass(frozen=True)
class EnsembleConfig:
    """One batch of independent trials per true photon number."""

    params: SystemParams
    prior: PriorDistribution
    policy: PolicySpec
    n0_values: tuple[int, ...]
    n_trials: int = 1000
    stop: StopRule | None = None
    master_seed: int = 0
    trace: bool = False

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")
        if len(self.n0_values) == 0:
            raise ValueError("n0_values must not be empty")
        for n0 in self.n0_values:
            if not 0 <= n0 <= self.params.n_max:
                raise ValueError(f"n0={n0} outside 0..n_max={self.params.n_max}")

    def resolved_stop(self) -> StopRule:
        return self.stop if self.stop is not None else StopRule.for_params(self.params)


class RunningMoments:
    """Welford accumulator for mean and (population) variance."""

    __slots__ = ("count", "mean", "_m2")

    def __init__(self) -> None:
        self.count = 0
        self.mean = 0.0
        self._m2 = 0.0

    def push(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (x - self.mean)

    @property
    def variance(self) -> float:
        return self._m2 / self.count if self.count else 0.0

    @property
    def se_mean(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count else 0.0


@dataclass(frozen=True)
class EnsembleSummary:
    """Aggregate metrics for one (n0, policy) cell.

    var_of_est is the population variance over trials, so the algebraic
    identity mse = bias**2 + var_of_est holds exactly on the sample.
    """

    n0: int
    policy_label: str
    n_trials: int
    mean_est: float
    se_mean_est: float
    mean_var_est: float
    se_mean_var_est: float
    var_of_est: float
    se_var_of_est: float
    mse: float
    se_mse: float
    bias: float
    se_bias: float
    mean_rounds: float
    se_mean_rounds: float
    mean_clicks: float
    se_mean_clicks: float

    def as_row(self) -> dict:
        return asdict(self)


def summarize_cell(n0: int, policy_label: str, records: list[TrialRecord]) -> EnsembleSummary:
    est = RunningMoments()
    var_est = RunningMoments()
    sq_err = RunningMoments()
    rounds = RunningMoments()
    clicks = RunningMoments()
    for rec in records:
        est.push(rec.n_est)
        var_est.push(rec.var_est)
        sq_err.push((rec.n_est - n0) ** 2)
        rounds.push(rec.rounds)
        clicks.push(rec.n_clicks)
    n = est.count
    # Normal-approximation standard error for a sample variance.
    se_var = est.variance * math.sqrt(2.0 / (n - 1)) if n > 1 else 0.0
    return EnsembleSummary(
        n0=n0,
        policy_label=policy_label,
        n_trials=n,
        mean_est=est.mean,
        se_mean_est=est.se_mean,
        mean_var_est=var_est.mean,
        se_mean_var_est=var_est.se_mean,
        var_of_est=est.variance,
        se_var_of_est=se_var,
        mse=sq_err.mean,
        se_mse=sq_err.se_mean,
        bias=est.mean - n0,
        se_bias=est.se_mean,
        mean_rounds=rounds.mean,
        se_mean_rounds=rounds.se_mean,
        mean_clicks=clicks.mean,
        se_mean_clicks=clicks.se_mean,
    )


def _run_chunk(args) -> list[tuple[int, int, TrialRecord]]:
    config, jobs = args
    policy = config.policy.build()
    stop = config.resolved_stop()
    cache = KernelCache(config.params)
    out = []
    for cell_index, n0, trial_index in jobs:
        seed = derive_trial_seed(config.master_seed, cell_index, trial_index)
        rec = run_trial(
            n0,
            policy,
            config.params,
            config.prior,
            stop,
            seed,
            trace=config.trace,
            kernel_cache=cache,
        )
        out.append((cell_index, trial_index, rec))
    return out


def run_ensemble(
    config: EnsembleConfig, n_workers: int = 1
) -> tuple[list[EnsembleSummary], list[tuple[int, int, TrialRecord]]]:
    """Run n_trials per n0 value; returns summaries and ordered records.

    Records come back as (cell_index, trial_index, record), sorted, so the
    reduction is independent of scheduling.
    """
    jobs = [
        (ci, n0, ti)
        for ci, n0 in enumerate(config.n0_values)
        for ti in range(config.n_trials)
    ]
    if n_workers <= 1:
        results = _run_chunk((config, jobs))
    else:
        chunks = [jobs[i::n_workers] for i in range(n_workers)]
        results = []
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for part in pool.map(_run_chunk, [(config, c) for c in chunks if c]):
                results.extend(part)
    results.sort(key=lambda item: (item[0], item[1]))
    summaries = []
    for ci, n0 in enumerate(config.n0_values):
        cell_records = [rec for c, _, rec in results if c == ci]
        summaries.append(summarize_cell(n0, config.policy.label, cell_records))
    return summaries, results


# ---------------------------------------------------------------------------
# Theoretical optimal-detector baseline: one photon per bin, bin k detected
# with probability gamma * eta^k.
# ---------------------------------------------------------------------------

def optimal_mean_clicks(n0: int, eta: float, gamma: float) -> float:
    """Expected clicks from the idealized binned detector."""
    _check_baseline_args(n0, eta, gamma)
    if eta == 1.0:
        return gamma * n0
    return gamma * (1.0 - eta**n0) / (1.0 - eta)


def optimal_click_variance(n0: int, eta: float, gamma: float) -> float:
    """Click-count variance of the idealized binned detector."""
    _check_baseline_args(n0, eta, gamma)
    if eta == 1.0:
        return n0 * gamma * (1.0 - gamma)
    return gamma * (1.0 - eta**n0) / (1.0 - eta) - gamma**2 * (1.0 - eta ** (2 * n0)) / (
        1.0 - eta**2
    )


def optimal_estimator_variance(n0: int, eta: float, gamma: float) -> float:
    """Estimator-variance floor for an unbiased loop-based detector."""
    _check_baseline_args(n0, eta, gamma)
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    if eta == 1.0:
        return n0 * (1.0 / gamma - 1.0)
    return (
        n0**2
        * (1.0 - eta)
        / (1.0 - eta**n0)
        * (1.0 / gamma - (1.0 + eta**n0) / (1.0 + eta))
    )


def optimal_variance_small_n0(n0: int, eta: float, gamma: float) -> float:
    """Asymptotic form for n0 * (1 - eta) << 1."""
    return n0 * (1.0 / gamma - 1.0)


def optimal_variance_large_n0(n0: int, eta: float, gamma: float) -> float:
    """Asymptotic form for n0 * (1 - eta) >> 1."""
    return n0**2 * (1.0 - eta) * (1.0 / gamma - 1.0 / (1.0 + eta))


def _check_baseline_args(n0: int, eta: float, gamma: float) -> None:
    if n0 < 0:
        raise ValueError("n0 must be nonnegative")
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must be in (0, 1], got {eta}")
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")


# ---------------------------------------------------------------------------
# Sweeps and persistence
# ---------------------------------------------------------------------------

def sweep(configs: list[EnsembleConfig], n_workers: int = 1) -> list[dict]:
    """One summary row per (config, n0) cell, with reference columns.

    Each row carries the shot-noise reference mse = n0 and the optimal
    baseline variance for the cell's (eta, gamma).
    """
    rows: list[dict] = []
    for config in configs:
        summaries, _ = run_ensemble(config, n_workers=n_workers)
        for summary in summaries:
            row = summary.as_row()
            row["eta"] = config.params.eta
            row["gamma"] = config.params.gamma
            row["nu"] = config.params.nu
            row["shot_noise_mse"] = float(summary.n0)
            row["optimal_var"] = (
                optimal_estimator_variance(summary.n0, config.params.eta, config.params.gamma)
                if summary.n0 >= 1
                else 0.0
            )
            rows.append(row)
    return rows


TRIALS_CSV_HEADER = ["trial_id", "n0_true", "n_est", "var_est", "n_mle", "rounds", "clicks", "seed"]
TRACE_CSV_HEADER = [
    "trial_id",
    "round",
    "d",
    "epsilon",
    "info_gained_bits",
    "info_available_bits",
    "expected_loop_photons",
]


def write_trials_csv(path, results: list[tuple[int, int, TrialRecord]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIALS_CSV_HEADER)
        for trial_id, (_, _, rec) in enumerate(results):
            writer.writerow(
                [
                    trial_id,
                    rec.n0_true,
                    repr(rec.n_est),
                    repr(rec.var_est),
                    rec.n_mle,
                    rec.rounds,
                    rec.n_clicks,
                    rec.seed,
                ]
            )


def write_trace_csv(path, results: list[tuple[int, int, TrialRecord]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_CSV_HEADER)
        for trial_id, (_, _, rec) in enumerate(results):
            if rec.info_trace is None:
                continue
            for rnd, (d, eps, ig, ia, elp) in enumerate(rec.info_trace):
                writer.writerow([trial_id, rnd, d, repr(eps), repr(ig), repr(ia), repr(elp)])


def write_summary_json(path, config_echo: dict, rows: list[dict]) -> None:
    # json round-trips doubles at 17 significant digits by default.
    with open(path, "w") as fh:
        json.dump({"config": config_echo, "cells": rows}, fh, indent=2)
        fh.write("\n")

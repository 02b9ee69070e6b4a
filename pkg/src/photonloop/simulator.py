"""Physical Monte Carlo sampling of photon fates and the per-trial loop.

Each round, every photon in the loop is independently detected
(probability eta * epsilon * gamma), kept (eta * (1 - epsilon)), or lost;
a click is registered on at least one detection or a dark count.  The
trial alternates sample -> record -> Bayes update -> policy until the
belief says the loop is (almost surely) empty.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .belief import (
    BeliefMatrix,
    PriorDistribution,
    expected_loop_photons,
    info_available,
    info_gained,
    init_belief,
    mean_estimate,
    mle_estimate,
    update,
    variance_estimate,
)
from .kernel import SINGULAR_TOL, KernelCache, SystemParams
from .strategy import Policy

HARD_ROUND_CAP = 10_000


@dataclass(frozen=True)
class StopRule:
    """Stop when the expected loop occupancy drops below the threshold.

    The cap doubles the analytic round estimate ln(n_max / threshold) /
    (1 - eta) as a safety net against pathological click sequences.
    """

    n_threshold: float = 0.5
    max_rounds: int = HARD_ROUND_CAP

    def __post_init__(self) -> None:
        if self.n_threshold <= 0:
            raise ValueError(f"n_threshold must be positive, got {self.n_threshold}")
        if self.max_rounds < 1:
            raise ValueError(f"max_rounds must be >= 1, got {self.max_rounds}")

    @classmethod
    def for_params(cls, params: SystemParams, n_threshold: float = 0.5) -> "StopRule":
        if params.eta >= 1.0:
            cap = HARD_ROUND_CAP
        else:
            est = math.ceil(2.0 * math.log(params.n_max / n_threshold) / (1.0 - params.eta))
            cap = max(1, min(est, HARD_ROUND_CAP))
        return cls(n_threshold=n_threshold, max_rounds=cap)


@dataclass
class TrialRecord:
    """Everything recorded for one simulated detection."""

    n0_true: int
    clicks: list[int]
    epsilons: list[float]
    rounds: int
    n_est: float
    var_est: float
    n_mle: int
    seed: int
    info_trace: list[tuple[int, float, float, float, float]] | None = None
    # trace rows: (d, epsilon, info_gained, info_available, expected_loop_photons),
    # one per round plus a leading round-0 row for the prior state

    @property
    def n_clicks(self) -> int:
        return sum(self.clicks)


def sample_round(
    n_true: int, params: SystemParams, epsilon: float, rng: np.random.Generator
) -> tuple[int, int]:
    """Draw one physical round from the true photon count.

    Detected photons first (Binomial with p = eta*eps*gamma), then survivors
    among the rest (conditional stay probability); equivalent to the
    per-photon multinomial of the transition kernel.
    """
    if n_true > params.n_max:
        raise ValueError(f"n_true={n_true} exceeds n_max={params.n_max}")
    p_det = params.eta * epsilon * params.gamma
    n_det = int(rng.binomial(n_true, p_det))
    keep = 1.0 - p_det
    if keep < SINGULAR_TOL:
        n_next = 0
    else:
        n_next = int(rng.binomial(n_true - n_det, params.eta * (1.0 - epsilon) / keep))
    dark = rng.random() < params.nu
    d = 1 if (n_det > 0 or dark) else 0
    return n_next, d


def run_trial(
    n0: int,
    policy: Policy,
    params: SystemParams,
    prior: PriorDistribution,
    stop: StopRule,
    seed: int,
    trace: bool = False,
    kernel_cache: KernelCache | None = None,
) -> TrialRecord:
    """Simulate one full detection; deterministic given (seed, config).

    The sampler sees the true hidden photon count; the belief sees only the
    click results.  The stop condition is checked before every round.
    An ensemble runner can pass a shared kernel cache to avoid rebuilding
    kernels per trial.
    """
    if n0 > params.n_max:
        raise ValueError(f"n0={n0} exceeds n_max={params.n_max}")
    if prior.n_max != params.n_max:
        raise ValueError("prior dimension does not match params")
    if kernel_cache is not None and kernel_cache.params != params:
        raise ValueError("shared kernel cache built for different params")
    rng = np.random.default_rng(seed)
    cache = kernel_cache if kernel_cache is not None else KernelCache(params)
    belief = init_belief(prior)
    n_true = n0
    clicks: list[int] = []
    epsilons: list[float] = []
    trace_rows: list[tuple[int, float, float, float, float]] | None = None
    if trace:
        # round-0 row: the prior state before any outcoupling
        trace_rows = [
            (0, 0.0, info_gained(belief), info_available(belief), expected_loop_photons(belief))
        ]

    while len(clicks) < stop.max_rounds and expected_loop_photons(belief) >= stop.n_threshold:
        decision = policy.choose(belief, params)
        n_true, d = sample_round(n_true, params, decision.epsilon, rng)
        belief = update(belief, cache.get(decision.epsilon), d)
        clicks.append(d)
        epsilons.append(decision.epsilon)
        if trace_rows is not None:
            trace_rows.append(
                (
                    d,
                    decision.epsilon,
                    info_gained(belief),
                    info_available(belief),
                    expected_loop_photons(belief),
                )
            )

    return TrialRecord(
        n0_true=n0,
        clicks=clicks,
        epsilons=epsilons,
        rounds=len(clicks),
        n_est=mean_estimate(belief),
        var_est=variance_estimate(belief),
        n_mle=mle_estimate(belief),
        seed=int(seed),
        info_trace=trace_rows,
    )


def derive_trial_seed(master_seed: int, cell_index: int, trial_index: int) -> int:
    """Per-trial RNG stream, reproducible independent of scheduling."""
    ss = np.random.SeedSequence([int(master_seed), int(cell_index), int(trial_index)])
    return int(ss.generate_state(1, np.uint64)[0])

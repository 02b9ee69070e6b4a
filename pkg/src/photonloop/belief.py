"""Joint posterior over (current, initial) photon number and its updates.

The state of knowledge after k rounds is a matrix with entries
joint[m, n] = P(N_k = m, N_0 = n | click history).  Updating on one click
result is a kernel-matrix multiplication followed by renormalization.
Point estimators and the two information measures (bits gained from the
clicks so far, bits still available from the photons in the loop) are
computed from this matrix.  All logarithms are base 2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import xlogy

from .kernel import TransitionKernel

_LN2 = np.log(2.0)

# Unnormalized posterior mass below this means the observed click sequence
# has probability ~0 under the model.
_MASS_FLOOR = 1e-300


class AllMassLost(RuntimeError):
    """The click sequence is (numerically) impossible under the model."""


class SupportMismatch(ValueError):
    """KL divergence is undefined: p has mass where q has none."""


@dataclass(frozen=True)
class PriorDistribution:
    """Prior over the initial photon number N_0, on 0..n_max."""

    weights: np.ndarray = field(repr=False)
    kind: str = "custom"

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("prior weights must be a vector of length n_max + 1 >= 2")
        if np.any(w < 0):
            raise ValueError("prior weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"prior weights must sum to 1, got {w.sum()}")
        object.__setattr__(self, "weights", w)

    @property
    def n_max(self) -> int:
        return self.weights.size - 1

    @classmethod
    def uniform(cls, n_max: int) -> "PriorDistribution":
        w = np.full(n_max + 1, 1.0 / (n_max + 1))
        return cls(weights=w, kind="uniform")

    @classmethod
    def poisson(cls, mean: float, n_max: int) -> "PriorDistribution":
        """Poisson pmf truncated at n_max and renormalized."""
        if mean <= 0:
            raise ValueError(f"poisson mean must be positive, got {mean}")
        w = stats.poisson.pmf(np.arange(n_max + 1), mean)
        return cls(weights=w / w.sum(), kind=f"poisson({mean})")

    @classmethod
    def two_point(cls, n1: int, n2: int, p1: float, n_max: int) -> "PriorDistribution":
        if not 0 <= n1 <= n_max or not 0 <= n2 <= n_max:
            raise ValueError("two-point support must lie in 0..n_max")
        if not 0.0 <= p1 <= 1.0:
            raise ValueError(f"p1 must be in [0, 1], got {p1}")
        w = np.zeros(n_max + 1)
        w[n1] += p1
        w[n2] += 1.0 - p1
        return cls(weights=w, kind=f"two_point({n1},{n2},{p1})")


@dataclass
class BeliefMatrix:
    """Normalized joint posterior P(N_k = m, N_0 = n | clicks so far).

    Upper-triangular (joint[m, n] = 0 for m > n, since photons only leave)
    and of unit total mass.  The prior is retained for the information
    measures.
    """

    joint: np.ndarray = field(repr=False)
    round_index: int
    prior: PriorDistribution

    @property
    def n_max(self) -> int:
        return self.joint.shape[0] - 1


def init_belief(prior: PriorDistribution) -> BeliefMatrix:
    """Round-0 belief: diagonal matrix of prior weights (N_0 = N_k surely)."""
    return BeliefMatrix(joint=np.diag(prior.weights), round_index=0, prior=prior)


def update(belief: BeliefMatrix, kernel: TransitionKernel, d: int) -> BeliefMatrix:
    """Bayes update on one click result: joint' ~ R(d) @ joint, renormalized."""
    if kernel.dim != belief.joint.shape[0]:
        raise ValueError(
            f"kernel dimension {kernel.dim} does not match belief {belief.joint.shape[0]}"
        )
    r = kernel.r1 if d else kernel.r0
    joint = r @ belief.joint
    total = joint.sum()
    if total < _MASS_FLOOR:
        raise AllMassLost(
            f"posterior mass vanished at round {belief.round_index + 1} (d={d})"
        )
    joint /= total
    return BeliefMatrix(joint=joint, round_index=belief.round_index + 1, prior=belief.prior)


def marginal_n0(belief: BeliefMatrix) -> np.ndarray:
    """Posterior over the initial photon number (column sums)."""
    return belief.joint.sum(axis=0)


def marginal_nk(belief: BeliefMatrix) -> np.ndarray:
    """Posterior over the photons currently in the loop (row sums)."""
    return belief.joint.sum(axis=1)


def mean_estimate(belief: BeliefMatrix) -> float:
    p = marginal_n0(belief)
    return float(np.arange(p.size) @ p)


def variance_estimate(belief: BeliefMatrix) -> float:
    p = marginal_n0(belief)
    mean = np.arange(p.size) @ p
    return float((np.arange(p.size) - mean) ** 2 @ p)


def mle_estimate(belief: BeliefMatrix) -> int:
    """Posterior mode over N_0; ties broken toward the smaller value."""
    return int(np.argmax(marginal_n0(belief)))


def expected_loop_photons(belief: BeliefMatrix) -> float:
    p = marginal_nk(belief)
    return float(np.arange(p.size) @ p)


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """D_KL(p || q) in bits, with the convention 0 * log 0 = 0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    if np.any((p > 0) & (q <= 0)):
        raise SupportMismatch("p has mass where q is zero")
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(p[mask] / q[mask])))


def info_gained(belief: BeliefMatrix) -> float:
    """KL divergence of the current N_0 posterior from the prior, in bits."""
    return kl_divergence(marginal_n0(belief), belief.prior.weights)


def info_available(belief: BeliefMatrix) -> float:
    """Expected bits still learnable about N_0 from the loop contents.

    sum_{m,n} joint[m,n] log2( joint[m,n] / (P(N_k=m) P_prior(n)) ),
    skipping zero entries.
    """
    joint = belief.joint
    rows = joint.sum(axis=1)
    cols = joint.sum(axis=0)
    prior = belief.prior.weights
    if np.any((cols > 0) & (prior <= 0)):
        raise SupportMismatch("posterior has mass where the prior is zero")
    # sum J log J - sum_m r_m log r_m - sum_n c_n log q_n
    total = xlogy(joint, joint).sum() - xlogy(rows, rows).sum()
    mask = cols > 0
    total -= np.sum(cols[mask] * np.log(prior[mask]))
    return float(total / _LN2)

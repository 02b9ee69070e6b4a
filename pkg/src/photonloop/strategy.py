"""Outcoupling policies: constant-rate passive and information-greedy adaptive.

The adaptive policy scores each candidate rate by the expected change in
information gained over the expected change in information available (a
one-round greedy lookahead over the binary click outcome) and picks the
argmax, conserving photons on ties.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from scipy.special import xlogy

from .belief import (
    BeliefMatrix,
    SupportMismatch,
    info_available,
    info_gained,
)
from .kernel import KernelCache, SystemParams, TransitionKernel

_LN2 = np.log(2.0)

# Denominator floor in the gain/loss ratio: the expected information loss
# can vanish (nothing left to lose), and the argmax must stay well defined.
SCORE_DELTA = 1e-12

# Rows/columns of the joint with less relative mass than this are dropped
# from the candidate scoring (not from the belief itself); their
# contribution to any information sum is below 1e-11 bits.
_TRUNC_EPS = 1e-13

# Branch weights below this are treated as impossible outcomes.
_BRANCH_FLOOR = 1e-300


@dataclass(frozen=True)
class EpsilonGrid:
    """Sorted candidate outcoupling rates in (0, 1]."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("grid must be a non-empty vector")
        if np.any(np.diff(v) <= 0):
            raise ValueError("grid values must be strictly increasing")
        if v[0] <= 0.0 or v[-1] > 1.0:
            raise ValueError("grid values must lie in (0, 1]")
        object.__setattr__(self, "values", v)

    @classmethod
    def default(cls, size: int = 50, low: float = 1e-3, high: float = 1.0) -> "EpsilonGrid":
        return cls(values=np.geomspace(low, high, size))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class PolicyDecision:
    """One round's choice: the rate, its gain/loss score, and the click odds."""

    epsilon: float
    score: float
    predicted_click_prob: float


class Policy(Protocol):
    def choose(self, belief: BeliefMatrix, params: SystemParams) -> PolicyDecision: ...


def predict_outcome_probs(
    belief: BeliefMatrix, kernel: TransitionKernel
) -> tuple[float, float]:
    """Probability of (no click, click) next round under the current belief.

    q_d is the total mass of R(d) @ joint before renormalization, which
    reduces to a dot product of the kernel's column sums with the current
    loop-photon marginal.
    """
    if kernel.dim != belief.joint.shape[0]:
        raise ValueError("kernel dimension does not match belief")
    row_mass = belief.joint.sum(axis=1)
    q0 = float(kernel.r0.sum(axis=0) @ row_mass)
    q1 = float(kernel.r1.sum(axis=0) @ row_mass)
    return q0, q1


class PassivePolicy:
    """Constant outcoupling rate, fixed before the run."""

    def __init__(self, epsilon_const: float):
        if not 0.0 < epsilon_const <= 1.0:
            raise ValueError(f"epsilon must be in (0, 1], got {epsilon_const}")
        self.epsilon = float(epsilon_const)
        self._caches: dict[SystemParams, KernelCache] = {}

    def choose(self, belief: BeliefMatrix, params: SystemParams) -> PolicyDecision:
        cache = self._caches.setdefault(params, KernelCache(params))
        _, q1 = predict_outcome_probs(belief, cache.get(self.epsilon))
        return PolicyDecision(epsilon=self.epsilon, score=0.0, predicted_click_prob=q1)


class AdaptivePolicy:
    """Greedy maximization of expected information gained over lost.

    For each candidate rate the two hypothetical updated beliefs (click /
    no click) are formed; the score is
        |<I_G> - I_G| / (|<I_A> - I_A| + delta)
    with expectations over the click outcome.  Kernels for the whole grid
    are precomputed per configuration and shared read-only.
    """

    def __init__(self, grid: EpsilonGrid | None = None):
        self.grid = grid if grid is not None else EpsilonGrid.default()
        # params -> (stacked kernels (2G, D, D): R(0) block then R(1) block)
        self._stacks: dict[SystemParams, np.ndarray] = {}
        # (params, dim) -> contiguous truncated copies, bucketed so a whole
        # trial reuses a handful of them
        self._substacks: dict[tuple[SystemParams, int], np.ndarray] = {}

    def _stack_for(self, params: SystemParams) -> np.ndarray:
        stack = self._stacks.get(params)
        if stack is None:
            cache = KernelCache(params)
            kernels = [cache.get(e) for e in self.grid.values]
            stack = np.stack([k.r0 for k in kernels] + [k.r1 for k in kernels])
            self._stacks[params] = stack
        return stack

    def _substack_for(self, params: SystemParams, n_rows: int) -> tuple[np.ndarray, int]:
        """Contiguous (2G, level, level) kernel slice with level >= n_rows."""
        full = self._stack_for(params)
        dim = full.shape[1]
        level = min(dim, ((n_rows + 7) // 8) * 8)
        key = (params, level)
        sub = self._substacks.get(key)
        if sub is None:
            sub = np.ascontiguousarray(full[:, :level, :level])
            self._substacks[key] = sub
        return sub, level

    def scores(self, belief: BeliefMatrix, params: SystemParams) -> np.ndarray:
        """Gain/loss ratio for every grid candidate (vectorized)."""
        joint = belief.joint
        dim = joint.shape[0]
        if dim != params.dim:
            raise ValueError("belief dimension does not match params")
        prior = belief.prior.weights
        g = len(self.grid)

        row_mass = joint.sum(axis=1)
        col_mass = joint.sum(axis=0)
        if np.any((col_mass > 0) & (prior <= 0)):
            raise SupportMismatch("belief has mass where the prior is zero")

        # Active support: high rows and off-support columns carry negligible
        # mass once the trial progresses; restricting the matmul and the
        # log sums to them is the hot-path optimization.
        active_rows = np.nonzero(row_mass > _TRUNC_EPS)[0]
        active_cols = np.nonzero(col_mass > _TRUNC_EPS)[0]
        m_hi = int(active_rows[-1]) if active_rows.size else 0
        n_lo = int(active_cols[0]) if active_cols.size else 0
        n_hi = int(active_cols[-1]) if active_cols.size else 0
        rsub, n_rows = self._substack_for(params, m_hi + 1)
        sub = np.ascontiguousarray(joint[:n_rows, n_lo : n_hi + 1])
        n_cols = n_hi + 1 - n_lo

        # One GEMM for all candidates and both outcomes.
        t = rsub.reshape(2 * g * n_rows, n_rows) @ sub
        t3 = t.reshape(2 * g, n_rows, n_cols)
        q = t3.sum(axis=(1, 2))
        cols = t3.sum(axis=1)
        rows = t3.sum(axis=2)
        # Entrywise and marginal x*log(x) sums (natural log; bits at the end).
        elem = xlogy(t, t).sum(axis=1).reshape(2 * g, n_rows).sum(axis=1)
        rlog = xlogy(rows, rows).sum(axis=1)
        log_prior = np.zeros(n_cols)
        psub = prior[n_lo : n_hi + 1]
        np.log(psub, out=log_prior, where=psub > 0)
        cq = cols @ log_prior
        clog = xlogy(cols, cols).sum(axis=1)

        ig_cur = info_gained(belief)
        ia_cur = info_available(belief)

        with np.errstate(divide="ignore", invalid="ignore"):
            # Normalization-corrected measures of the hypothetical posteriors,
            # weighted by the branch probability q_d.  Branches with q_d ~ 0
            # contribute nothing.
            log_q = np.where(q > _BRANCH_FLOOR, np.log(q), 0.0)
            w_ig = np.where(q > _BRANCH_FLOOR, (clog - cq) / _LN2 - q * log_q / _LN2, 0.0)
            w_ia = np.where(q > _BRANCH_FLOOR, (elem - rlog - cq) / _LN2, 0.0)
        exp_ig = w_ig[:g] + w_ig[g:]
        exp_ia = w_ia[:g] + w_ia[g:]
        return np.abs(exp_ig - ig_cur) / (np.abs(exp_ia - ia_cur) + SCORE_DELTA)

    def choose(self, belief: BeliefMatrix, params: SystemParams) -> PolicyDecision:
        scores = self.scores(belief, params)
        # argmax returns the first maximum; the grid is ascending, so exact
        # ties resolve toward the smallest rate.
        idx = int(np.argmax(scores))
        epsilon = float(self.grid.values[idx])
        stack = self._stacks[params]
        g = len(self.grid)
        kernel = TransitionKernel(epsilon=epsilon, r0=stack[idx], r1=stack[idx + g])
        _, q1 = predict_outcome_probs(belief, kernel)
        return PolicyDecision(epsilon=epsilon, score=float(scores[idx]), predicted_click_prob=q1)

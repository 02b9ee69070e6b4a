"""Single-round transition probabilities of the storage-loop click detector.

A round consists of one loop circulation (per-photon survival ``eta``),
partial outcoupling to the detector (rate ``epsilon``), and one binary
detection window (efficiency ``gamma``, dark-count probability ``nu``).
The closed form for the no-click probability and its matrix representation
live here, together with a brute-force enumeration over outcoupled photon
counts that serves as an independent oracle in the tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

# Below this, 1 - eta*eps*gamma is treated as singular (only reachable at
# eta = eps = gamma = 1): the closed form's binomial parameter becomes 0/0
# and we fall back to the explicit sum over outcoupled counts.
SINGULAR_TOL = 1e-12

# The enumeration oracle is cubic in photon number with Python loops.
ENUMERATION_CAP = 12

# r1 = B - r0 can go negative by ~1 ulp of the subtraction; anything worse
# indicates a real bug and is not silently clamped.
_NEG_CLAMP = 1e-15


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of one detector configuration.

    eta    -- loop survival probability per round, in [0, 1]
    gamma  -- detector quantum efficiency, in [0, 1]
    nu     -- dark-count probability per round, in [0, 1)
    n_max  -- photon-number cap (matrix dimension is n_max + 1)
    """

    eta: float
    gamma: float
    nu: float
    n_max: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must be in [0, 1], got {self.eta}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if not 0.0 <= self.nu < 1.0:
            raise ValueError(f"nu must be in [0, 1), got {self.nu}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def dim(self) -> int:
        return self.n_max + 1


@dataclass(frozen=True)
class TransitionKernel:
    """Matrix pair R(0), R(1) with [R(d)]_{m,n} = P(m photons remain, d | n).

    Both matrices are (n_max+1) x (n_max+1), lower-triangular in the sense
    that entries with m > n vanish (photon number never increases), and
    together column-stochastic: sum_m R(0) + R(1) = 1 per column.
    """

    epsilon: float
    r0: np.ndarray = field(repr=False)
    r1: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.r0.shape[0]


def binomial_pmf(k: int, n: int, p: float) -> float:
    """B(k; n, p) = C(n, k) p^k (1-p)^(n-k), with the convention 0^0 = 1.

    Computed through log-gamma for stability at large n.
    """
    if not 0 <= k <= n:
        raise ValueError(f"require 0 <= k <= n, got k={k}, n={n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if p == 0.0:
        return 1.0 if k == 0 else 0.0
    if p == 1.0:
        return 1.0 if k == n else 0.0
    log_coeff = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    return math.exp(log_coeff + k * math.log(p) + (n - k) * math.log1p(-p))


def rho(n_k: int, n_prev: int, params: SystemParams, epsilon: float) -> float:
    """Joint probability of n_k photons remaining and no click this round.

    Closed form: (1-nu) (1 - eta*eps*gamma)^n_prev
                 * B(n_k; n_prev, eta(1-eps) / (1 - eta*eps*gamma)).
    The singular point eta = eps = gamma = 1 falls back to the enumeration
    over outcoupled counts, which stays well defined there.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if not 0 <= n_k <= n_prev:
        raise ValueError(f"require 0 <= n_k <= n_prev, got n_k={n_k}, n_prev={n_prev}")
    if n_prev > params.n_max:
        raise ValueError(f"n_prev={n_prev} exceeds n_max={params.n_max}")
    keep = 1.0 - params.eta * epsilon * params.gamma
    if keep < SINGULAR_TOL:
        return _rho_enumerated(n_k, n_prev, params, epsilon)
    stay = params.eta * (1.0 - epsilon) / keep
    return (1.0 - params.nu) * keep ** n_prev * binomial_pmf(n_k, n_prev, stay)


def _rho_enumerated(n_k: int, n_prev: int, params: SystemParams, epsilon: float) -> float:
    """Direct sum over the number of outcoupled photons m."""
    total = 0.0
    for m in range(n_prev - n_k + 1):
        total += (
            (1.0 - params.nu)
            * (1.0 - params.gamma) ** m
            * binomial_pmf(n_k + m, n_prev, params.eta)
            * binomial_pmf(m, n_k + m, epsilon)
        )
    return total


def _binom_matrix(dim: int, p: float) -> np.ndarray:
    """Matrix with entries B[m, n] = B(m; n, p); zero for m > n."""
    m = np.arange(dim)[:, None]
    n = np.arange(dim)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = stats.binom.pmf(m, n, p)
    return np.where(m <= n, out, 0.0)


def transition_kernel(params: SystemParams, epsilon: float) -> TransitionKernel:
    """Build R(0), R(1) for one outcoupling rate from the closed form."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    dim = params.dim
    n = np.arange(dim)[None, :]
    b_total = _binom_matrix(dim, params.eta * (1.0 - epsilon))
    keep = 1.0 - params.eta * epsilon * params.gamma
    if keep < SINGULAR_TOL:
        r0 = np.zeros((dim, dim))
        for col in range(dim):
            for row in range(col + 1):
                r0[row, col] = _rho_enumerated(row, col, params, epsilon)
    else:
        stay = params.eta * (1.0 - epsilon) / keep
        r0 = (1.0 - params.nu) * keep ** n * _binom_matrix(dim, stay)
    r1 = b_total - r0
    low = r1.min()
    if low < -_NEG_CLAMP:
        raise FloatingPointError(f"r1 entry below -{_NEG_CLAMP}: {low}")
    np.clip(r1, 0.0, None, out=r1)
    return TransitionKernel(epsilon=float(epsilon), r0=r0, r1=r1)


def enumerate_kernel(params: SystemParams, epsilon: float, n_cap: int) -> TransitionKernel:
    """Brute-force kernel from the intermediate per-round probabilities.

    Sums over all outcoupled counts m, using
    P(n_k, m | n_prev) = B(n_k + m; n_prev, eta) B(m; n_k + m, epsilon)
    and P(no click | m) = (1 - nu)(1 - gamma)^m.  Independent of the closed
    form; intended as a test oracle only.
    """
    if n_cap > ENUMERATION_CAP:
        raise ValueError(f"n_cap={n_cap} exceeds enumeration limit {ENUMERATION_CAP}")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    dim = n_cap + 1
    r0 = np.zeros((dim, dim))
    r1 = np.zeros((dim, dim))
    for n_prev in range(dim):
        for n_k in range(n_prev + 1):
            for m in range(n_prev - n_k + 1):
                joint = binomial_pmf(n_k + m, n_prev, params.eta) * binomial_pmf(
                    m, n_k + m, epsilon
                )
                quiet = (1.0 - params.nu) * (1.0 - params.gamma) ** m
                r0[n_k, n_prev] += quiet * joint
                r1[n_k, n_prev] += (1.0 - quiet) * joint
    return TransitionKernel(epsilon=float(epsilon), r0=r0, r1=r1)


class KernelCache:
    """Per-configuration kernel store keyed by quantized epsilon.

    The adaptive grid search reuses the same rates every round; kernels are
    immutable after construction and safe to share across trial workers.
    """

    def __init__(self, params: SystemParams):
        self.params = params
        self._kernels: dict[float, TransitionKernel] = {}

    @staticmethod
    def _key(epsilon: float) -> float:
        return round(float(epsilon), 12)

    def get(self, epsilon: float) -> TransitionKernel:
        key = self._key(epsilon)
        kernel = self._kernels.get(key)
        if kernel is None:
            kernel = transition_kernel(self.params, epsilon)
            self._kernels[key] = kernel
        return kernel

    def __len__(self) -> int:
        return len(self._kernels)

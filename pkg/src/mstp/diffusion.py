"""Applications built on per-length estimates.

Graph diffusions ``f[t] = sum_i w_i (sigma P^i)[t]`` (heat kernel, geometric
restarts), first-passage probabilities, truncated return times and the
stationary estimate derived from them.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .chain import MarkovChain, SourceDistribution
from .estimator import (
    ORACLE_MAX_STATES,
    EstimateReport,
    EstimatorParams,
    OracleSizeError,
    bidirectional_mstp,
)


class WeightKind(enum.Enum):
    HEAT_KERNEL = "heat-kernel"
    GEOMETRIC = "geometric"
    CUSTOM = "custom"


@dataclass(frozen=True)
class DiffusionWeights:
    kind: WeightKind
    weights: np.ndarray
    tail_bound: float
    alpha: float | None = None

    @property
    def max_len(self) -> int:
        return len(self.weights) - 1

    @classmethod
    def heat_kernel(cls, alpha: float, max_len: int) -> "DiffusionWeights":
        """Poisson(alpha) weights; the tail is ``P[Poisson(alpha) > max_len]``."""
        if not alpha > 0:
            raise ValueError("alpha must be > 0")
        i = np.arange(max_len + 1)
        w = np.exp(-alpha + i * math.log(alpha) - special.gammaln(i + 1))
        # regularized lower incomplete gamma: P(X > k) = P(k + 1, alpha)
        tail = float(special.gammainc(max_len + 1, alpha))
        return cls(WeightKind.HEAT_KERNEL, w, tail, alpha)

    @classmethod
    def geometric(cls, alpha: float, max_len: int) -> "DiffusionWeights":
        """``w_0 = 0``, ``w_i = alpha^(i-1) (1 - alpha)``; tail ``alpha^max_len``."""
        if not 0 < alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        i = np.arange(max_len + 1)
        w = np.where(i >= 1, (1 - alpha) * alpha ** np.maximum(i - 1, 0).astype(float), 0.0)
        return cls(WeightKind.GEOMETRIC, w, alpha**max_len, alpha)

    @classmethod
    def custom(cls, weights, tail_bound: float = 0.0) -> "DiffusionWeights":
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or (w < 0).any() or not np.isfinite(w).all():
            raise ValueError("custom weights must be a finite nonnegative sequence")
        if tail_bound < 0:
            raise ValueError("tail_bound must be >= 0")
        return cls(WeightKind.CUSTOM, w, float(tail_bound))


@dataclass
class DiffusionEstimate:
    value: float
    tail_bound: float
    weights: DiffusionWeights
    report: EstimateReport

    def to_text(self, labels=None, timing: bool = False) -> str:
        head = [
            f"weight_kind: {self.weights.kind.value}",
            f"alpha: {self.weights.alpha:.12g}" if self.weights.alpha is not None else "alpha: -",
            f"value: {self.value:.12g}",
            f"tail_bound: {self.tail_bound:.12g}",
        ]
        return "\n".join(head) + "\n" + self.report.to_text(labels, timing)


def weighted_sum(weights: DiffusionWeights, per_length: np.ndarray) -> float:
    return float(np.dot(weights.weights, per_length[: weights.max_len + 1]))


def heat_kernel_max_len(alpha: float) -> int:
    """Mean plus ten standard deviations of a Poisson(alpha) length."""
    return math.ceil(alpha + 10 * math.sqrt(alpha))


def diffusion(chain: MarkovChain, sigma: SourceDistribution, t: int,
              weights: DiffusionWeights, params: EstimatorParams) -> DiffusionEstimate:
    params = dataclasses.replace(params, max_len=weights.max_len)
    report = bidirectional_mstp(chain, sigma, t, params)
    return DiffusionEstimate(weighted_sum(weights, report.estimate), weights.tail_bound,
                             weights, report)


def heat_kernel(chain: MarkovChain, sigma: SourceDistribution, t: int, alpha: float,
                params: EstimatorParams) -> DiffusionEstimate:
    """Heat-kernel score from ``sigma`` to ``t``.

    ``params.max_len`` defaults to :func:`heat_kernel_max_len`.
    """
    L = params.max_len if params.max_len is not None else heat_kernel_max_len(alpha)
    return diffusion(chain, sigma, t, DiffusionWeights.heat_kernel(alpha, L), params)


def doeblin_stationary(chain: MarkovChain, sigma: SourceDistribution, t: int, alpha: float,
                       params: EstimatorParams) -> DiffusionEstimate:
    """Stationary mass at ``t`` of the chain that follows P with probability
    ``alpha`` and otherwise restarts from ``sigma``.

    ``params.max_len`` defaults to ``ceil(10 / alpha)``.
    """
    L = params.max_len if params.max_len is not None else math.ceil(10 / alpha)
    return diffusion(chain, sigma, t, DiffusionWeights.geometric(alpha, L), params)


def truncated_hitting_time(chain: MarkovChain, sigma: SourceDistribution, t: int,
                           params: EstimatorParams) -> EstimateReport:
    """Estimate ``P[first visit to t after step 0 happens at step l]``.

    Entry 0 is defined as 0.
    """
    report = bidirectional_mstp(chain, sigma, t, params, absorb_target=True)
    report.method = "hitting"
    for arr in (report.estimate, report.q_component, report.walk_component):
        arr[0] = 0.0
    return report


@dataclass
class ReturnTimeEstimate:
    expected_return: float
    stationary_bound: float
    return_mass: float
    report: EstimateReport

    def to_text(self, labels=None, timing: bool = False) -> str:
        head = [
            f"truncated_return_time: {self.expected_return:.12g}",
            f"return_mass: {self.return_mass:.12g}",
            f"stationary_bound: {self.stationary_bound:.12g}",
        ]
        return "\n".join(head) + "\n" + self.report.to_text(labels, timing)


def return_time_from_hits(hit: np.ndarray) -> tuple[float, float, float]:
    """``(E[T 1{T <= L}], mass returned by L, stationary estimate)``.

    Mass not returned by ``L`` is charged ``L`` steps.
    """
    L = len(hit) - 1
    ells = np.arange(L + 1)
    expected = float(np.dot(ells, hit))
    mass = float(hit.sum())
    denom = expected + L * max(0.0, 1.0 - mass)
    return expected, mass, (1.0 / denom if denom > 0 else math.inf)


def truncated_return_time(chain: MarkovChain, t: int, params: EstimatorParams
                          ) -> ReturnTimeEstimate:
    report = truncated_hitting_time(chain, SourceDistribution.point(t), t, params)
    expected, mass, bound = return_time_from_hits(report.estimate)
    return ReturnTimeEstimate(expected, bound, mass, report)


def exact_hitting_oracle(chain: MarkovChain, sigma: SourceDistribution, t: int, max_len: int
                         ) -> np.ndarray:
    """First-passage probabilities by dynamic programming on the taboo chain.

    Mass is propagated with transitions into ``t`` removed; at each step the
    mass that would have entered ``t`` is recorded as a first arrival.
    """
    if chain.n > ORACLE_MAX_STATES:
        raise OracleSizeError(f"oracle limited to {ORACLE_MAX_STATES} states, chain has {chain.n}")
    P = chain.transition_matrix()
    PT = P.T.tocsr()
    col_t = P[:, t].toarray().ravel()
    x = sigma.dense(chain.n)
    out = np.zeros(max_len + 1)
    for ell in range(1, max_len + 1):
        out[ell] = x @ col_t
        x = PT @ x
        x[t] = 0.0
    return out

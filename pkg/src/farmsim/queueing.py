"""Steady-state analysis of the M/M/n queue with impatient customers.

The occupancy process is a birth-death chain with constant birth rate
``lambda`` and death rate ``d_k = min(k, n)*mu + max(0, k - n)*theta``:
busy servers complete work, queued customers abandon.  The chain is
solved by the detailed-balance recursion in log space, anchored at the
mode so that large populations neither overflow nor underflow.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, UnstableQueueError

DEFAULT_TOLERANCE = 1e-12

# Hard cap on the truncation level; hit only for absurd inputs.
_MAX_TRUNCATION = 50_000_000


@dataclass(frozen=True)
class QueueParams:
    """One Erlang-A instance: arrival, service, abandonment rates and servers."""

    lam: float
    mu: float
    theta: float
    n: int

    def __post_init__(self):
        if not (self.lam >= 0 and np.isfinite(self.lam)):
            raise InvalidParameterError(f"lambda must be finite and >= 0, got {self.lam}")
        if not (self.mu > 0 and np.isfinite(self.mu)):
            raise InvalidParameterError(f"mu must be finite and > 0, got {self.mu}")
        if not (self.theta >= 0 and np.isfinite(self.theta)):
            raise InvalidParameterError(f"theta must be finite and >= 0, got {self.theta}")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 0):
            raise InvalidParameterError(f"n must be an integer >= 0, got {self.n}")
        if self.theta == 0 and self.lam > 0:
            if self.n == 0:
                raise UnstableQueueError(
                    "no steady state: theta = 0, n = 0 and lambda > 0"
                )
            if self.lam >= self.n * self.mu:
                raise UnstableQueueError(
                    f"unstable queue: theta = 0 and lambda = {self.lam} >= "
                    f"n*mu = {self.n * self.mu}"
                )

    @property
    def offered_load(self):
        return self.lam / self.mu


@dataclass(frozen=True)
class SteadyStateDistribution:
    """Occupancy probabilities pi_0..pi_K of the truncated chain."""

    probs: np.ndarray
    truncation_level: int

    def __post_init__(self):
        if len(self.probs) != self.truncation_level + 1:
            raise InvalidParameterError("probs length must be truncation_level + 1")


@dataclass(frozen=True)
class PerformanceMetrics:
    p_abandon: float
    p_wait: float
    mean_in_system: float
    mean_queue: float
    mean_wait_served: float
    throughput: float
    utilization: float


def _death_rates(params: QueueParams, K: int) -> np.ndarray:
    k = np.arange(1, K + 1, dtype=float)
    return np.minimum(k, params.n) * params.mu + np.maximum(k - params.n, 0.0) * params.theta


def _initial_truncation(params: QueueParams) -> int:
    load = params.offered_load
    return int(max(params.n, np.ceil(load)) + 10.0 * np.sqrt(max(1.0, load))) + 10


def steady_state(params: QueueParams, tolerance: float = DEFAULT_TOLERANCE) -> SteadyStateDistribution:
    """Solve the birth-death chain, truncating once the tail mass is negligible.

    The truncation level grows until the geometric bound on the omitted
    tail falls below ``tolerance`` (relative to the retained mass).
    """
    if not (0.0 < tolerance <= 1e-6):
        raise InvalidParameterError(f"tolerance must be in (0, 1e-6], got {tolerance}")
    if params.lam == 0:
        return SteadyStateDistribution(probs=np.array([1.0]), truncation_level=0)

    K = _initial_truncation(params)
    log_lam = np.log(params.lam)
    while True:
        d = _death_rates(params, K)
        log_w = np.empty(K + 1)
        log_w[0] = 0.0
        np.cumsum(log_lam - np.log(d), out=log_w[1:])
        shift = log_w.max()
        w = np.exp(log_w - shift)
        total = w.sum()

        # Tail bound: beyond K the ratio pi_{k+1}/pi_k is at most r, so the
        # omitted mass is below w_K * r / (1 - r) when r < 1.
        d_next = min(K + 1, params.n) * params.mu + max(0, K + 1 - params.n) * params.theta
        r = params.lam / d_next
        if r < 1.0 and w[-1] * r / (1.0 - r) < tolerance * total:
            return SteadyStateDistribution(probs=w / total, truncation_level=K)
        if K >= _MAX_TRUNCATION:
            raise InvalidParameterError(
                f"truncation level exceeded {_MAX_TRUNCATION}; instance too large"
            )
        K *= 2


def performance_metrics(params: QueueParams, dist: SteadyStateDistribution) -> PerformanceMetrics:
    """Derive the standard metrics from an occupancy distribution."""
    probs = dist.probs
    if len(probs) != dist.truncation_level + 1:
        raise InvalidParameterError("distribution length inconsistent with truncation level")
    k = np.arange(len(probs), dtype=float)
    n = params.n
    excess = np.maximum(k - n, 0.0)
    mean_queue = float(np.dot(probs, excess))
    mean_in_system = float(np.dot(probs, k))
    if params.lam > 0:
        p_abandon = params.theta * mean_queue / params.lam
    else:
        p_abandon = 0.0
    p_wait = float(probs[min(n, len(probs) - 1):].sum()) if n < len(probs) else 0.0
    busy = np.minimum(k, n)
    utilization = float(np.dot(probs, busy)) / n if n > 0 else 0.0
    # guard against float drift just past the probability bounds
    utilization = min(max(utilization, 0.0), 1.0)
    p_abandon = min(max(p_abandon, 0.0), 1.0)
    throughput = params.lam * (1.0 - p_abandon)
    mean_wait_served = mean_queue / throughput if throughput > 0 else 0.0
    return PerformanceMetrics(
        p_abandon=p_abandon,
        p_wait=p_wait,
        mean_in_system=mean_in_system,
        mean_queue=mean_queue,
        mean_wait_served=mean_wait_served,
        throughput=throughput,
        utilization=utilization,
    )


def analyze(params: QueueParams, tolerance: float = DEFAULT_TOLERANCE) -> PerformanceMetrics:
    """Convenience wrapper: steady state plus metrics in one call."""
    return performance_metrics(params, steady_state(params, tolerance))


def erlang_c_reference(lam: float, mu: float, n: int) -> float:
    """Classical Erlang-C waiting probability; the theta -> 0 cross-check.

    Uses the numerically stable Erlang-B recursion.
    """
    if mu <= 0 or lam < 0 or n < 1:
        raise InvalidParameterError("need lam >= 0, mu > 0, n >= 1")
    a = lam / mu
    if lam >= n * mu:
        raise UnstableQueueError(f"lambda = {lam} >= n*mu = {n * mu}")
    if lam == 0:
        return 0.0
    b = 1.0
    for m in range(1, n + 1):
        b = a * b / (m + a * b)
    rho = a / n
    return b / (1.0 - rho * (1.0 - b))

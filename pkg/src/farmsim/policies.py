"""Server-allocation policies: Static, QED square-root staffing, and the
Adaptive revenue-maximizing search, plus the setup-cost switching guard."""

import math
from dataclasses import dataclass, field

from . import _backend
from .economics import WS_PER_KWH, EconomicModel, net_revenue_rate
from .errors import InvalidParameterError, UnstableQueueError
from .estimators import EstimatorSpec, RateEstimate, Window, estimate
from .queueing import PerformanceMetrics, QueueParams
from .traces import ArrivalTrace

DEFAULT_N_MAX = 1000


@dataclass(frozen=True)
class Static:
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise InvalidParameterError("Static n must be >= 0")


@dataclass(frozen=True)
class Qed:
    beta: float = 1.0

    def __post_init__(self):
        if self.beta < 0:
            raise InvalidParameterError("Qed beta must be >= 0")


@dataclass(frozen=True)
class Adaptive:
    n_max: int = DEFAULT_N_MAX

    def __post_init__(self):
        if self.n_max < 1:
            raise InvalidParameterError("Adaptive n_max must be >= 1")


PolicyKind = Static | Qed | Adaptive


@dataclass(frozen=True)
class PolicySpec:
    kind: PolicyKind
    estimator: EstimatorSpec = field(default_factory=Window)
    epoch_length: float = 300.0
    switching_guard: bool = True

    def __post_init__(self):
        if not self.epoch_length > 0:
            raise InvalidParameterError("epoch_length must be > 0")

    def validate_against(self, econ: EconomicModel) -> None:
        """Scale-ups mid-run only make sense if a booted server can come
        online within the epoch that paid for it."""
        if self.switching_guard and self.epoch_length < econ.setup_duration:
            raise InvalidParameterError(
                f"epoch_length {self.epoch_length} shorter than setup_duration "
                f"{econ.setup_duration} with switching_guard enabled"
            )


@dataclass(frozen=True)
class StaffingDecision:
    target_n: int
    predicted_revenue_rate: float
    estimate_used: RateEstimate


def qed_staffing(rate_estimate: float, mu: float, beta: float) -> int:
    """Square-root staffing: ceil(R + beta*sqrt(R)) with R = rate/mu."""
    if mu <= 0:
        raise InvalidParameterError("mu must be > 0")
    if rate_estimate < 0 or beta < 0:
        raise InvalidParameterError("rate_estimate and beta must be >= 0")
    if rate_estimate == 0:
        return 0
    load = rate_estimate / mu
    return math.ceil(load + beta * math.sqrt(load))


def staffing_objective(rate: float, mu: float, theta: float, econ: EconomicModel, n: int) -> float:
    """Net revenue rate at server count n for the estimated arrival rate.

    Raises UnstableQueueError for infeasible (theta = 0) instances.
    """
    try:
        p_abandon, p_wait, mean_in_system, mean_queue, utilization = _backend.erlang_a_metrics(
            rate, mu, theta, n
        )
    except ValueError as exc:
        raise UnstableQueueError(str(exc)) from None
    throughput = rate * (1.0 - p_abandon)
    metrics = PerformanceMetrics(
        p_abandon=p_abandon,
        p_wait=p_wait,
        mean_in_system=mean_in_system,
        mean_queue=mean_queue,
        mean_wait_served=mean_queue / throughput if throughput > 0 else 0.0,
        throughput=throughput,
        utilization=utilization,
    )
    params = QueueParams(lam=rate, mu=mu, theta=theta, n=n)
    return net_revenue_rate(params, metrics, econ)


def adaptive_staffing(
    rate_estimate: float,
    mu: float,
    theta: float,
    econ: EconomicModel,
    n_max: int = DEFAULT_N_MAX,
    early_exit: bool = True,
    estimate_used: RateEstimate | None = None,
) -> StaffingDecision:
    """Scan n in [0, n_max] for the revenue-maximizing server count.

    Ties break toward the smallest n.  Instances with no steady state
    (theta = 0, rate >= n*mu) are excluded from the feasible set.  The
    optional early exit stops once the objective has trailed the best
    for 3*sqrt(n_max) consecutive counts.
    """
    if mu <= 0 or n_max < 1 or rate_estimate < 0:
        raise InvalidParameterError("need mu > 0, n_max >= 1, rate_estimate >= 0")
    best_n = -1
    best_value = -math.inf
    slump_limit = int(3.0 * math.sqrt(n_max)) + 1
    slump = 0
    for n in range(n_max + 1):
        try:
            value = staffing_objective(rate_estimate, mu, theta, econ, n)
        except UnstableQueueError:
            continue
        if value > best_value:
            best_value = value
            best_n = n
            slump = 0
        else:
            slump += 1
            if early_exit and slump >= slump_limit:
                break
    if best_n < 0:
        raise UnstableQueueError(
            f"no feasible server count in [0, {n_max}] for rate {rate_estimate}"
        )
    if estimate_used is None:
        estimate_used = RateEstimate(rate=rate_estimate, horizon_start=0.0, horizon_end=1.0)
    return StaffingDecision(
        target_n=best_n, predicted_revenue_rate=best_value, estimate_used=estimate_used
    )


def setup_energy_cost(added: int, econ: EconomicModel) -> float:
    """Electricity spent booting ``added`` servers, in money."""
    return added * econ.p_setup * econ.setup_duration * econ.electricity_price / WS_PER_KWH


def decide(
    policy: PolicySpec,
    history: ArrivalTrace,
    current_n: int,
    mu: float,
    theta: float,
    econ: EconomicModel,
) -> StaffingDecision:
    """One policy evaluation: estimate the next epoch's rate, pick a
    target, and let the switching guard veto scale-ups whose predicted
    gain over the epoch does not cover the setup energy."""
    start = history.end_time
    est = estimate(policy.estimator, history, (start, start + policy.epoch_length))
    return decide_from_estimate(policy, est, current_n, mu, theta, econ)


def decide_from_estimate(
    policy: PolicySpec,
    est: RateEstimate,
    current_n: int,
    mu: float,
    theta: float,
    econ: EconomicModel,
) -> StaffingDecision:
    kind = policy.kind
    if isinstance(kind, Static):
        target = kind.n
    elif isinstance(kind, Qed):
        target = qed_staffing(est.rate, mu, kind.beta)
    elif isinstance(kind, Adaptive):
        decision = adaptive_staffing(est.rate, mu, theta, econ, kind.n_max, estimate_used=est)
        target = decision.target_n
    else:
        raise InvalidParameterError(f"unknown policy kind {kind!r}")

    predicted = _objective_or_neg_inf(est.rate, mu, theta, econ, target)
    if policy.switching_guard and target > current_n:
        gain = (predicted - _objective_or_neg_inf(est.rate, mu, theta, econ, current_n))
        cost = setup_energy_cost(target - current_n, econ)
        if not gain * policy.epoch_length > cost:
            target = current_n
            predicted = _objective_or_neg_inf(est.rate, mu, theta, econ, target)
    return StaffingDecision(target_n=target, predicted_revenue_rate=predicted, estimate_used=est)


def _objective_or_neg_inf(rate, mu, theta, econ, n):
    try:
        return staffing_objective(rate, mu, theta, econ, n)
    except UnstableQueueError:
        return -math.inf

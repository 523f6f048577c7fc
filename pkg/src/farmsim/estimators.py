"""Arrival-rate estimation and forecasting from observed bin counts.

Estimators work on per-bin rates (count / bin_width) and forecast the
rate over a target interval.  ``Oracle`` stands in for policies that
assume the rate is known; the others learn it from history.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyTraceError, InsufficientHistoryError, InvalidParameterError
from .traces import ArrivalTrace


@dataclass(frozen=True)
class RateEstimate:
    rate: float  # jobs/second, >= 0
    horizon_start: float
    horizon_end: float

    def __post_init__(self):
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise InvalidParameterError(f"rate must be finite and >= 0, got {self.rate}")
        if not self.horizon_end > self.horizon_start:
            raise InvalidParameterError("horizon_end must exceed horizon_start")


@dataclass(frozen=True)
class Oracle:
    """The configured true rate; no learning."""

    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise InvalidParameterError("Oracle rate must be >= 0")


@dataclass(frozen=True)
class Window:
    """Mean of the last w bin rates."""

    w: int = 5

    def __post_init__(self):
        if self.w < 1:
            raise InvalidParameterError("Window w must be >= 1")


@dataclass(frozen=True)
class Ewma:
    """Exponentially weighted moving average, seeded with the first rate."""

    alpha: float = 0.3

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidParameterError("Ewma alpha must be in (0, 1]")


@dataclass(frozen=True)
class Trend:
    """Least-squares line over the last w bin rates, extrapolated to the
    midpoint of the target interval and clamped at 0."""

    w: int = 5

    def __post_init__(self):
        if self.w < 2:
            raise InvalidParameterError("Trend w must be >= 2")


@dataclass(frozen=True)
class Margin:
    """A base estimate inflated by k Poisson standard deviations of the
    per-bin count, as safety capacity against under-staffing."""

    base: "EstimatorSpec"
    k: float = 1.0

    def __post_init__(self):
        if self.k < 0:
            raise InvalidParameterError("Margin k must be >= 0")
        if isinstance(self.base, Margin):
            raise InvalidParameterError("Margin nesting depth is 1")


EstimatorSpec = Oracle | Window | Ewma | Trend | Margin


def required_history(spec: EstimatorSpec) -> int:
    """Minimum number of observed bins the estimator needs."""
    if isinstance(spec, Oracle):
        return 0
    if isinstance(spec, (Window, Trend)):
        return spec.w
    if isinstance(spec, Ewma):
        return 1
    if isinstance(spec, Margin):
        return required_history(spec.base)
    raise InvalidParameterError(f"unknown estimator spec {spec!r}")


def estimate(spec: EstimatorSpec, history: ArrivalTrace, next_epoch: tuple[float, float]) -> RateEstimate:
    """Forecast the arrival rate over ``next_epoch`` from observed history.

    ``next_epoch`` must start at or after the end of the history.
    """
    start, end = next_epoch
    if not end > start:
        raise InvalidParameterError("next_epoch must be a non-empty interval")
    if start < history.end_time - 1e-9 and not isinstance(spec, Oracle):
        raise InvalidParameterError("next_epoch must start at or after the history end")
    need = required_history(spec)
    if len(history) < need:
        raise InsufficientHistoryError(
            f"{type(spec).__name__} needs {need} bins, history has {len(history)}"
        )
    rate = _estimate_rate(spec, history, (start, end))
    return RateEstimate(rate=rate, horizon_start=start, horizon_end=end)


def _estimate_rate(spec, history, next_epoch):
    if isinstance(spec, Oracle):
        return spec.rate
    rates = history.rates
    if isinstance(spec, Window):
        return float(np.mean(rates[-spec.w:]))
    if isinstance(spec, Ewma):
        s = rates[0]
        for r in rates[1:]:
            s = spec.alpha * r + (1.0 - spec.alpha) * s
        return float(s)
    if isinstance(spec, Trend):
        tail = rates[-spec.w:]
        # Bin-midpoint time coordinates of the fitted points.
        t = history.start_time + (np.arange(len(history) - spec.w, len(history)) + 0.5) * history.bin_width
        slope, intercept = np.polyfit(t, tail, 1)
        target = 0.5 * (next_epoch[0] + next_epoch[1])
        return max(0.0, float(slope * target + intercept))
    if isinstance(spec, Margin):
        base = _estimate_rate(spec.base, history, next_epoch)
        return base + spec.k * math.sqrt(base / history.bin_width)
    raise InvalidParameterError(f"unknown estimator spec {spec!r}")


@dataclass(frozen=True)
class EstimatorReport:
    """Walk-forward accuracy of one estimator on one trace."""

    mape: float
    rmse: float
    mean_bias: float  # mean of (estimate - realized)
    n_scored: int


def evaluate_estimator(spec: EstimatorSpec, trace: ArrivalTrace) -> EstimatorReport:
    """Score an estimator by walk-forward evaluation: each bin after the
    warm-up is forecast from strictly earlier bins only.  MAPE skips
    zero-rate bins."""
    if len(trace) == 0:
        raise EmptyTraceError("empty trace")
    warmup = max(required_history(spec), 1)
    if len(trace) <= warmup:
        raise InsufficientHistoryError(
            f"trace has {len(trace)} bins; need more than the {warmup}-bin warm-up"
        )
    rates = trace.rates
    errors = []
    ape = []
    for t in range(warmup, len(trace)):
        history = ArrivalTrace(
            bin_width=trace.bin_width,
            start_time=trace.start_time,
            counts=trace.counts[:t],
        )
        bin_start = trace.start_time + t * trace.bin_width
        est = estimate(spec, history, (bin_start, bin_start + trace.bin_width))
        err = est.rate - rates[t]
        errors.append(err)
        if rates[t] > 0:
            ape.append(abs(err) / rates[t])
    errors = np.array(errors)
    return EstimatorReport(
        mape=float(np.mean(ape)) if ape else 0.0,
        rmse=float(np.sqrt(np.mean(errors**2))),
        mean_bias=float(np.mean(errors)),
        n_scored=len(errors),
    )

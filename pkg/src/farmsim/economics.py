"""Energy-proportional power model and revenue/cost arithmetic.

A server draws a fixed fraction of its peak power when idle (default
0.65) and scales linearly to peak with utilization; booting draws setup
power while producing nothing.  Revenue is per served job, electricity
is charged at a flat price per kWh.
"""

from dataclasses import dataclass

from .errors import InvalidParameterError
from .queueing import PerformanceMetrics, QueueParams

WS_PER_KWH = 3.6e6  # watt-seconds per kilowatt-hour


@dataclass(frozen=True)
class EconomicModel:
    reward_per_job: float
    electricity_price: float  # money per kWh, flat
    p_peak: float  # watts at full utilization
    idle_fraction: float = 0.65
    p_setup: float | None = None  # watts while booting; defaults to p_peak
    setup_duration: float = 0.0  # seconds from off to serving
    sla_penalty_per_abandon: float = 0.0

    def __post_init__(self):
        if self.p_setup is None:
            object.__setattr__(self, "p_setup", self.p_peak)
        if self.reward_per_job < 0:
            raise InvalidParameterError("reward_per_job must be >= 0")
        if self.electricity_price < 0:
            raise InvalidParameterError("electricity_price must be >= 0")
        if not self.p_peak > 0:
            raise InvalidParameterError("p_peak must be > 0")
        if not 0.0 <= self.idle_fraction <= 1.0:
            raise InvalidParameterError("idle_fraction must be in [0, 1]")
        if self.p_setup < 0:
            raise InvalidParameterError("p_setup must be >= 0")
        if self.setup_duration < 0:
            raise InvalidParameterError("setup_duration must be >= 0")
        if self.sla_penalty_per_abandon < 0:
            raise InvalidParameterError("sla_penalty_per_abandon must be >= 0")


@dataclass(frozen=True)
class Off:
    pass


@dataclass(frozen=True)
class SettingUp:
    pass


@dataclass(frozen=True)
class Active:
    utilization: float

    def __post_init__(self):
        if not 0.0 <= self.utilization <= 1.0:
            raise InvalidParameterError("utilization must be in [0, 1]")


ServerPowerState = Off | SettingUp | Active


def server_power(state: ServerPowerState, econ: EconomicModel) -> float:
    """Instantaneous draw in watts for one server in the given state."""
    if isinstance(state, Off):
        return 0.0
    if isinstance(state, SettingUp):
        return econ.p_setup
    if isinstance(state, Active):
        return econ.p_peak * (econ.idle_fraction + (1.0 - econ.idle_fraction) * state.utilization)
    raise InvalidParameterError(f"unknown server state {state!r}")


def energy_cost_rate(n: int, utilization: float, econ: EconomicModel) -> float:
    """Electricity cost per second for n active servers at mean utilization."""
    watts = n * server_power(Active(utilization), econ)
    return econ.electricity_price * watts / WS_PER_KWH


def net_revenue_rate(params: QueueParams, metrics: PerformanceMetrics, econ: EconomicModel) -> float:
    """Money earned per second: job rewards minus abandonment penalties
    and electricity.  All n servers are modeled as active at the mean
    per-server utilization; the linear power curve makes this exact in
    expectation."""
    served_rate = params.lam * (1.0 - metrics.p_abandon)
    abandon_rate = params.lam * metrics.p_abandon
    revenue = econ.reward_per_job * served_rate
    penalty = econ.sla_penalty_per_abandon * abandon_rate
    energy = energy_cost_rate(params.n, metrics.utilization, econ) if params.n > 0 else 0.0
    return revenue - penalty - energy

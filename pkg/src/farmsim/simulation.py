"""Trace-driven discrete-event simulation of the server farm.

The hot event loop lives in the backend kernel (compiled when
available); this module owns configuration, the policy-epoch loop,
replication seeding and result assembly.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _backend
from .economics import WS_PER_KWH, EconomicModel
from .errors import ConfigError, WorkloadExhaustedError
from .estimators import Oracle, RateEstimate, required_history
from .policies import PolicySpec, decide, decide_from_estimate
from .traces import ArrivalTrace

STATE_NAMES = ("off", "setting_up", "idle", "busy")

EPOCH_CSV_HEADER = "time,n_target,n_active,rate_estimate,arrivals,abandoned"


@dataclass(frozen=True)
class SimConfig:
    duration: float
    warmup: float
    seed: int
    epoch_length: float
    mu: float
    theta: float
    econ: EconomicModel
    initial_n: int = 0

    def __post_init__(self):
        if not self.duration > self.warmup >= 0:
            raise ConfigError("need duration > warmup >= 0")
        if not self.epoch_length > 0:
            raise ConfigError("epoch_length must be > 0")
        if self.mu <= 0 or self.theta < 0:
            raise ConfigError("need mu > 0 and theta >= 0")
        if self.initial_n < 0:
            raise ConfigError("initial_n must be >= 0")


@dataclass(frozen=True)
class StationaryWorkload:
    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ConfigError("rate must be >= 0")

    def nominal_rate(self, t: float) -> float:
        return self.rate

    def check_covers(self, duration: float) -> None:
        pass


@dataclass(frozen=True)
class TraceWorkload:
    trace: ArrivalTrace
    mode: str = "poisson"  # "poisson" (piecewise-constant rate) or "replay"

    def __post_init__(self):
        if self.mode not in ("poisson", "replay"):
            raise ConfigError(f"unknown trace mode {self.mode!r}")

    def nominal_rate(self, t: float) -> float:
        return self.trace.rate_at(self.trace.start_time + t)

    def check_covers(self, duration: float) -> None:
        if self.trace.duration < duration - 1e-9:
            raise WorkloadExhaustedError(
                f"trace covers {self.trace.duration} s but the run needs {duration} s"
            )


WorkloadSource = StationaryWorkload | TraceWorkload


def make_workload(kind: str, *, rate: float | None = None,
                  trace: ArrivalTrace | None = None, mode: str = "poisson") -> WorkloadSource:
    """Build a workload source: 'stationary' needs rate, 'trace' needs trace."""
    if kind == "stationary":
        if rate is None:
            raise ConfigError("stationary workload needs a rate")
        return StationaryWorkload(rate=rate)
    if kind == "trace":
        if trace is None:
            raise ConfigError("trace workload needs a trace")
        return TraceWorkload(trace=trace, mode=mode)
    raise ConfigError(f"unknown workload kind {kind!r}")


@dataclass(frozen=True)
class EpochRow:
    time: float
    n_target: int
    n_active: int
    rate_estimate: float
    arrivals: int
    abandoned: int


@dataclass(frozen=True)
class SimResult:
    arrivals: int
    served: int
    abandoned: int
    in_system_at_end: int
    energy_wh: dict  # state name -> watt-hours over the measured window
    net_revenue: float
    mean_wait_served: float
    mean_sojourn: float
    mean_jobs_in_system: float
    p_abandon_empirical: float
    measured_time: float
    per_epoch: list = field(repr=False)

    @property
    def energy_kwh_total(self) -> float:
        return sum(self.energy_wh.values()) / 1000.0

    def epoch_csv_lines(self):
        yield EPOCH_CSV_HEADER
        for row in self.per_epoch:
            yield (f"{row.time!r},{row.n_target},{row.n_active},"
                   f"{row.rate_estimate!r},{row.arrivals},{row.abandoned}")


def _rep_streams(seed: int, rep: int):
    """Independent arrival/service/patience streams for one replication.

    The replication seed is seed XOR rep; the arrival stream depends on
    nothing else, so every policy sees the same arrival sample path.
    """
    root = np.random.SeedSequence(seed ^ rep)
    children = root.spawn(3)
    return tuple(np.random.PCG64(c) for c in children)


def _replay_times(trace: ArrivalTrace, bitgen, duration: float) -> np.ndarray:
    """Exact-replay arrivals: count_i points uniform in bin i, sorted."""
    rng = np.random.Generator(bitgen)
    chunks = []
    for i, count in enumerate(trace.counts):
        start = i * trace.bin_width
        if start >= duration:
            break
        if count:
            pts = np.sort(rng.random(int(count))) * trace.bin_width + start
            chunks.append(pts)
    if not chunks:
        return np.empty(0)
    times = np.concatenate(chunks)
    return times[times < duration]


def _build_kernel(config: SimConfig, workload: WorkloadSource, rep: int,
                  n_slots: int, log_events: bool):
    arr_bg, srv_bg, pat_bg = _rep_streams(config.seed, rep)
    kwargs = dict(
        mu=config.mu,
        theta=config.theta,
        p_peak=config.econ.p_peak,
        idle_fraction=config.econ.idle_fraction,
        p_setup=config.econ.p_setup,
        setup_duration=config.econ.setup_duration,
        n_slots=n_slots,
        initial_n=config.initial_n,
        warmup=config.warmup,
        arrival_bitgen=arr_bg,
        service_bitgen=srv_bg,
        patience_bitgen=pat_bg,
        log_events=log_events,
    )
    if isinstance(workload, StationaryWorkload):
        kwargs.update(workload_mode=0, workload_rate=workload.rate)
    elif workload.mode == "poisson":
        kwargs.update(workload_mode=1,
                      workload_rates=workload.trace.rates,
                      workload_bin_width=workload.trace.bin_width)
    else:
        times = _replay_times(workload.trace, arr_bg, config.duration)
        kwargs.update(workload_mode=2, workload_times=times)
    return _backend.FarmKernel(**kwargs)


def run(config: SimConfig, workload: WorkloadSource, policy: PolicySpec,
        rep: int = 0, log_events: bool = False):
    """Simulate one replication; returns (SimResult, kernel).

    The kernel is returned so tests can inspect event/state logs.
    """
    workload.check_covers(config.duration)
    policy.validate_against(config.econ)
    kernel = _build_kernel(config, workload, rep, config.initial_n, log_events)

    epoch = config.epoch_length
    n_epochs = math.ceil(config.duration / epoch - 1e-12)
    boundaries = [(i * epoch, True) for i in range(n_epochs)]
    if config.warmup > 0:
        # The warm-up reset must happen at its exact timestamp even when
        # it falls between policy epochs.
        boundaries = sorted(boundaries + [(config.warmup, False)])
    observed_counts: list[int] = []
    per_epoch: list[EpochRow] = []
    need = required_history(policy.estimator)
    warmup_done = config.warmup == 0.0
    prev_arrivals = 0
    prev_abandoned = 0
    pending = None  # (time, target, active, rate) of the epoch in progress

    for t, is_epoch in boundaries:
        kernel.run_until(t)
        if not warmup_done and t >= config.warmup:
            kernel.reset_metrics(config.warmup)
            warmup_done = True
        if not is_epoch:
            continue
        if t > 0:
            arrivals_now = kernel.arrivals_all
            abandoned_now = kernel.abandoned_all
            observed_counts.append(arrivals_now - prev_arrivals)
            if pending is not None:
                per_epoch.append(EpochRow(
                    time=pending[0], n_target=pending[1], n_active=pending[2],
                    rate_estimate=pending[3],
                    arrivals=arrivals_now - prev_arrivals,
                    abandoned=abandoned_now - prev_abandoned,
                ))
            prev_arrivals = arrivals_now
            prev_abandoned = abandoned_now

        current_n = kernel.committed_n
        if len(observed_counts) >= max(need, 1):
            history = ArrivalTrace(bin_width=epoch, start_time=0.0,
                                   counts=np.array(observed_counts))
            decision = decide(policy, history, current_n, config.mu, config.theta, config.econ)
        else:
            # Cold start: fall back to the workload's nominal rate, the
            # oracle assumption the original policies make.
            est = RateEstimate(rate=workload.nominal_rate(t),
                               horizon_start=t, horizon_end=t + epoch)
            decision = decide_from_estimate(policy, est, current_n,
                                            config.mu, config.theta, config.econ)
        kernel.set_target(decision.target_n, t)
        pending = (t, decision.target_n, kernel.powered_n, decision.estimate_used.rate)

    kernel.run_until(config.duration)
    kernel.sync_energy(config.duration)
    if pending is not None:
        per_epoch.append(EpochRow(
            time=pending[0], n_target=pending[1], n_active=pending[2],
            rate_estimate=pending[3],
            arrivals=kernel.arrivals_all - prev_arrivals,
            abandoned=kernel.abandoned_all - prev_abandoned,
        ))

    return _collect(config, kernel, per_epoch), kernel


def _collect(config: SimConfig, kernel, per_epoch) -> SimResult:
    arrivals = kernel.arrivals_counted
    served = kernel.served_counted
    abandoned = kernel.abandoned_counted
    energy_ws = kernel.energy_ws
    energy_wh = {name: energy_ws[i] / 3600.0 for i, name in enumerate(STATE_NAMES)}
    measured = config.duration - config.warmup
    econ = config.econ
    energy_cost = econ.electricity_price * sum(energy_ws) / WS_PER_KWH
    net_revenue = (econ.reward_per_job * served
                   - econ.sla_penalty_per_abandon * abandoned
                   - energy_cost)
    completed = served + abandoned
    return SimResult(
        arrivals=arrivals,
        served=served,
        abandoned=abandoned,
        in_system_at_end=arrivals - served - abandoned,
        energy_wh=energy_wh,
        net_revenue=net_revenue,
        mean_wait_served=kernel.wait_sum / served if served else 0.0,
        mean_sojourn=kernel.sojourn_sum / completed if completed else 0.0,
        mean_jobs_in_system=kernel.area_jobs / measured if measured > 0 else 0.0,
        p_abandon_empirical=abandoned / arrivals if arrivals else 0.0,
        measured_time=measured,
        per_epoch=per_epoch,
    )


REPLICATION_METRICS = (
    "served", "abandoned", "p_abandon", "energy_kwh", "net_revenue", "mean_wait_served"
)


@dataclass(frozen=True)
class ReplicationSummary:
    reps: int
    mean: dict
    ci_halfwidth: dict  # 95% Student-t half-widths
    results: list = field(repr=False)


def run_replications(config: SimConfig, workload: WorkloadSource, policy: PolicySpec,
                     reps: int) -> ReplicationSummary:
    """Independent replications with deterministic per-rep seeds and
    Student-t 95% confidence half-widths on each summary metric."""
    if reps < 2:
        raise ConfigError("reps must be >= 2")
    results = [run(config, workload, policy, rep=r)[0] for r in range(reps)]
    samples = {
        "served": [r.served for r in results],
        "abandoned": [r.abandoned for r in results],
        "p_abandon": [r.p_abandon_empirical for r in results],
        "energy_kwh": [r.energy_kwh_total for r in results],
        "net_revenue": [r.net_revenue for r in results],
        "mean_wait_served": [r.mean_wait_served for r in results],
    }
    tcrit = float(stats.t.ppf(0.975, reps - 1))
    mean = {}
    half = {}
    for name, values in samples.items():
        arr = np.asarray(values, dtype=float)
        mean[name] = float(arr.mean())
        half[name] = float(tcrit * arr.std(ddof=1) / math.sqrt(reps))
    return ReplicationSummary(reps=reps, mean=mean, ci_halfwidth=half, results=results)

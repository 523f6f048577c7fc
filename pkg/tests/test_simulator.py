import math

import numpy as np
import pytest
from scipy import stats

import farmsim as fs
from farmsim.errors import ConfigError, WorkloadExhaustedError
from farmsim.policies import PolicySpec, Qed, Static
from farmsim.queueing import QueueParams
from farmsim.simulation import (
    SimConfig,
    StationaryWorkload,
    TraceWorkload,
    make_workload,
    run,
    run_replications,
)
from farmsim.traces import ArrivalTrace, synthetic_diurnal_trace

ECON = fs.EconomicModel(reward_per_job=1.0, electricity_price=0.10, p_peak=200.0)


def config(duration=2000.0, warmup=0.0, seed=1, epoch_length=500.0,
           mu=1.0, theta=1.0, econ=ECON, initial_n=0):
    return SimConfig(duration=duration, warmup=warmup, seed=seed,
                     epoch_length=epoch_length, mu=mu, theta=theta,
                     econ=econ, initial_n=initial_n)


def static(n, epoch=500.0):
    return PolicySpec(kind=Static(n), epoch_length=epoch, switching_guard=False)


class TestTrivialCases:
    def test_no_arrivals_pure_idle_energy(self):
        cfg = config(duration=1000.0, initial_n=3)
        res, _ = run(cfg, StationaryWorkload(0.0), static(3))
        assert res.arrivals == res.served == res.abandoned == 0
        expected_wh = 3 * 0.65 * 200.0 * 1000.0 / 3600.0
        assert res.energy_wh["idle"] == pytest.approx(expected_wh, rel=1e-12)
        assert res.energy_wh["busy"] == 0.0
        assert res.energy_wh["setting_up"] == 0.0
        assert res.net_revenue == pytest.approx(-0.10 * expected_wh / 1000.0, rel=1e-12)

    def test_no_servers_everyone_abandons(self):
        cfg = config(duration=500.0)
        res, _ = run(cfg, StationaryWorkload(5.0), static(0))
        assert res.served == 0
        assert res.abandoned + res.in_system_at_end == res.arrivals
        assert res.arrivals > 2000
        assert res.energy_kwh_total == 0.0

    def test_warmup_energy_window(self):
        cfg = config(duration=1000.0, warmup=400.0, initial_n=2)
        res, _ = run(cfg, StationaryWorkload(0.0), static(2))
        expected_wh = 2 * 0.65 * 200.0 * 600.0 / 3600.0
        assert res.energy_wh["idle"] == pytest.approx(expected_wh, rel=1e-12)
        assert res.measured_time == 600.0


class TestConservation:
    def test_job_conservation_no_warmup(self):
        cfg = config(duration=3000.0, initial_n=10)
        res, kernel = run(cfg, StationaryWorkload(8.0), static(10))
        assert res.served + res.abandoned + res.in_system_at_end == res.arrivals
        assert kernel.in_system == res.in_system_at_end
        assert kernel.in_system >= 0

    def test_counted_subset_of_all(self):
        cfg = config(duration=3000.0, warmup=1000.0, initial_n=10)
        res, kernel = run(cfg, StationaryWorkload(8.0), static(10))
        assert res.arrivals < kernel.arrivals_all
        assert res.served <= kernel.served_all
        assert res.abandoned <= kernel.abandoned_all

    def test_queue_empty_at_end_when_drained(self):
        cfg = config(duration=2000.0, initial_n=4)
        _, kernel = run(cfg, StationaryWorkload(2.0), static(4))
        snap = kernel.snapshot()
        assert snap["in_system"] == snap["queue_len"] + int(kernel.n_busy)


class TestEnergyAccounting:
    def test_shadow_integrator_matches_kernel(self):
        econ = fs.EconomicModel(reward_per_job=1.0, electricity_price=0.10,
                                p_peak=180.0, idle_fraction=0.65,
                                p_setup=180.0, setup_duration=30.0)
        cfg = config(duration=1500.0, econ=econ, initial_n=0, epoch_length=300.0)
        policy = PolicySpec(kind=Qed(1.0), epoch_length=300.0, switching_guard=False)
        _, kernel = run(cfg, StationaryWorkload(6.0), policy, log_events=True)

        # replay the state log through an independent power integrator
        power = {0: 0.0, 1: 180.0, 2: 0.65 * 180.0, 3: 180.0}
        n_slots = len(kernel.server_states())
        cur = [0] * n_slots
        since = [0.0] * n_slots
        shadow = [0.0, 0.0, 0.0, 0.0]
        for t, s, new_state in kernel.state_log:
            shadow[cur[s]] += power[cur[s]] * (t - since[s])
            cur[s], since[s] = new_state, t
        for s in range(n_slots):
            shadow[cur[s]] += power[cur[s]] * (1500.0 - since[s])
        for code in range(4):
            assert kernel.energy_ws[code] == pytest.approx(shadow[code], rel=1e-9, abs=1e-6)

    def test_busy_energy_scales_with_service_time(self):
        cfg = config(duration=4000.0, initial_n=20)
        res, kernel = run(cfg, StationaryWorkload(10.0), static(20))
        # every served job holds one server for its service time at peak power
        busy_ws = res.energy_wh["busy"] * 3600.0
        busy_seconds = busy_ws / 200.0
        # mean service time is 1/mu = 1, so busy seconds ~= jobs served
        assert busy_seconds == pytest.approx(kernel.served_all + kernel.n_busy, rel=0.1)


class TestSetup:
    def test_no_completion_before_first_boot_finishes(self):
        econ = fs.EconomicModel(reward_per_job=1.0, electricity_price=0.10,
                                p_peak=200.0, setup_duration=60.0)
        cfg = config(duration=600.0, econ=econ, initial_n=0, epoch_length=600.0)
        _, kernel = run(cfg, StationaryWorkload(5.0), static(5, epoch=600.0), log_events=True)
        completions = [t for t, kind, _ in kernel.event_log if kind == 0]
        assert completions
        assert min(completions) >= 60.0

    def test_setup_energy_charged(self):
        econ = fs.EconomicModel(reward_per_job=1.0, electricity_price=0.10,
                                p_peak=200.0, p_setup=150.0, setup_duration=60.0)
        cfg = config(duration=600.0, econ=econ, initial_n=0, epoch_length=600.0)
        res, _ = run(cfg, StationaryWorkload(0.0), static(4, epoch=600.0))
        assert res.energy_wh["setting_up"] == pytest.approx(4 * 150.0 * 60.0 / 3600.0, rel=1e-12)

    def test_zero_setup_duration_boots_instantly(self):
        cfg = config(duration=200.0, initial_n=0, epoch_length=200.0)
        res, kernel = run(cfg, StationaryWorkload(3.0), static(6, epoch=200.0))
        assert res.energy_wh["setting_up"] == 0.0
        assert kernel.served_all > 0


class TestAgainstAnalytics:
    def test_erlang_a_steady_state_match(self):
        lam, mu, theta, n = 50.0, 1.0, 1.0, 55
        cfg = config(duration=22000.0, warmup=2000.0, seed=10, mu=mu, theta=theta,
                     initial_n=n, epoch_length=2000.0)
        res, _ = run(cfg, StationaryWorkload(lam), static(n, epoch=2000.0))
        m = fs.analyze(QueueParams(lam, mu, theta, n))
        assert res.p_abandon_empirical == pytest.approx(m.p_abandon, abs=0.004)
        assert res.mean_jobs_in_system == pytest.approx(m.mean_in_system, rel=0.02)
        assert res.mean_wait_served == pytest.approx(m.mean_wait_served, rel=0.15)

    def test_littles_law(self):
        cfg = config(duration=20000.0, warmup=2000.0, seed=3, initial_n=12,
                     epoch_length=2000.0)
        res, _ = run(cfg, StationaryWorkload(10.0), static(12, epoch=2000.0))
        lam_eff = res.arrivals / res.measured_time
        assert res.mean_jobs_in_system == pytest.approx(lam_eff * res.mean_sojourn, rel=0.02)

    def test_interarrival_times_exponential(self):
        cfg = config(duration=2000.0, initial_n=1)
        _, kernel = run(cfg, StationaryWorkload(5.0), static(1), log_events=True)
        times = np.array([t for t, kind, _ in kernel.event_log if kind == 4])
        gaps = np.diff(times)
        assert len(gaps) > 5000
        pvalue = stats.kstest(gaps, "expon", args=(0, 1 / 5.0)).pvalue
        assert pvalue > 0.01


class TestWorkloads:
    def test_replay_reproduces_exact_counts(self):
        trace = synthetic_diurnal_trace(duration=7200.0, bin_width=300.0, seed=6)
        cfg = config(duration=7200.0, initial_n=150, epoch_length=300.0)
        res, _ = run(cfg, TraceWorkload(trace, mode="replay"), static(150, epoch=300.0))
        assert res.arrivals == int(trace.counts.sum())

    def test_piecewise_constant_matches_stationary_statistically(self):
        flat = ArrivalTrace(bin_width=300.0, start_time=0.0,
                            counts=np.full(20, 3000, dtype=int))
        cfg = config(duration=6000.0, initial_n=12, epoch_length=1000.0, seed=17)
        res_t, _ = run(cfg, TraceWorkload(flat, mode="poisson"), static(12, epoch=1000.0))
        res_s, _ = run(cfg, StationaryWorkload(10.0), static(12, epoch=1000.0))
        # same generating law, so totals agree within Poisson noise
        assert abs(res_t.arrivals - res_s.arrivals) < 4 * math.sqrt(60000)
        assert res_t.p_abandon_empirical == pytest.approx(res_s.p_abandon_empirical, abs=0.01)

    def test_short_trace_rejected(self):
        trace = synthetic_diurnal_trace(duration=3600.0, bin_width=300.0)
        cfg = config(duration=7200.0)
        with pytest.raises(WorkloadExhaustedError):
            run(cfg, TraceWorkload(trace), static(5))

    def test_make_workload_validation(self):
        with pytest.raises(ConfigError):
            make_workload("stationary")
        with pytest.raises(ConfigError):
            make_workload("trace")
        with pytest.raises(ConfigError):
            make_workload("weird")


class TestDeterminismAndStreams:
    def test_same_seed_same_result(self):
        cfg = config(duration=2000.0, seed=42, initial_n=8)
        a, _ = run(cfg, StationaryWorkload(6.0), static(8))
        b, _ = run(cfg, StationaryWorkload(6.0), static(8))
        assert a == b

    def test_reps_differ(self):
        cfg = config(duration=2000.0, seed=42, initial_n=8)
        a, _ = run(cfg, StationaryWorkload(6.0), static(8), rep=0)
        b, _ = run(cfg, StationaryWorkload(6.0), static(8), rep=1)
        assert a.arrivals != b.arrivals or a.served != b.served

    def test_arrival_path_shared_across_policies(self):
        cfg = config(duration=3000.0, seed=5, initial_n=0, epoch_length=300.0)
        p1 = PolicySpec(kind=Qed(1.0), epoch_length=300.0, switching_guard=False)
        p2 = static(3, epoch=300.0)
        r1, _ = run(cfg, StationaryWorkload(6.0), p1)
        r2, _ = run(cfg, StationaryWorkload(6.0), p2)
        assert [e.arrivals for e in r1.per_epoch] == [e.arrivals for e in r2.per_epoch]

    def test_epoch_rows_cover_run(self):
        cfg = config(duration=2500.0, epoch_length=500.0, initial_n=4)
        res, _ = run(cfg, StationaryWorkload(3.0), static(4))
        assert [row.time for row in res.per_epoch] == [0.0, 500.0, 1000.0, 1500.0, 2000.0]
        assert sum(row.arrivals for row in res.per_epoch) >= res.arrivals


class TestReplications:
    def test_summary_consistent_with_results(self):
        cfg = config(duration=1500.0, seed=9, initial_n=6)
        summary = run_replications(cfg, StationaryWorkload(4.0), static(6), reps=4)
        assert summary.reps == 4
        served = [r.served for r in summary.results]
        assert summary.mean["served"] == pytest.approx(np.mean(served))
        assert all(v >= 0 for v in summary.ci_halfwidth.values())

    def test_halfwidth_matches_t_formula(self):
        cfg = config(duration=1000.0, seed=2, initial_n=6)
        summary = run_replications(cfg, StationaryWorkload(4.0), static(6), reps=5)
        vals = np.array([r.net_revenue for r in summary.results])
        expected = stats.t.ppf(0.975, 4) * vals.std(ddof=1) / math.sqrt(5)
        assert summary.ci_halfwidth["net_revenue"] == pytest.approx(expected, rel=1e-12)

    def test_reps_minimum(self):
        cfg = config()
        with pytest.raises(ConfigError):
            run_replications(cfg, StationaryWorkload(1.0), static(1), reps=1)


class TestConfigValidation:
    def test_bad_durations(self):
        with pytest.raises(ConfigError):
            config(duration=100.0, warmup=100.0)
        with pytest.raises(ConfigError):
            config(duration=100.0, warmup=-1.0)

    def test_bad_rates(self):
        with pytest.raises(ConfigError):
            config(mu=0.0)
        with pytest.raises(ConfigError):
            config(theta=-1.0)
        with pytest.raises(ConfigError):
            StationaryWorkload(-1.0)

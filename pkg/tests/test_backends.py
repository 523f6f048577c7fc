"""Parity checks: the compiled kernel and the pure-Python twin must
produce bit-identical results for the same seeds."""

import numpy as np
import pytest

from farmsim import _backend, _core_py

compiled = pytest.importorskip("farmsim._core")


def _bitgens(seed):
    return tuple(np.random.PCG64(c) for c in np.random.SeedSequence(seed).spawn(3))


def _build(mod, seed, **overrides):
    arr, srv, pat = _bitgens(seed)
    kwargs = dict(
        mu=1.0, theta=0.8, p_peak=200.0, idle_fraction=0.65,
        p_setup=200.0, setup_duration=30.0,
        n_slots=16, initial_n=4, warmup=500.0,
        workload_mode=0, workload_rate=6.0,
        arrival_bitgen=arr, service_bitgen=srv, patience_bitgen=pat,
        log_events=True,
    )
    kwargs.update(overrides)
    return mod.FarmKernel(**kwargs)


def _drive(kernel, schedule, horizon):
    for t, target in schedule:
        kernel.run_until(t)
        kernel.set_target(target, t)
    kernel.run_until(horizon)
    kernel.sync_energy(horizon)


SCHEDULE = [(0.0, 4), (300.0, 12), (600.0, 2), (900.0, 9), (1200.0, 0), (1500.0, 7)]


class TestKernelParity:
    def test_snapshots_bit_identical(self):
        for seed in (0, 1, 2, 77):
            kc = _build(compiled, seed)
            kp = _build(_core_py, seed)
            _drive(kc, SCHEDULE, 1800.0)
            _drive(kp, SCHEDULE, 1800.0)
            sc, sp = kc.snapshot(), kp.snapshot()
            assert sc == sp, f"seed {seed}: {sc} != {sp}"

    def test_event_logs_identical(self):
        kc = _build(compiled, 5)
        kp = _build(_core_py, 5)
        _drive(kc, SCHEDULE, 1800.0)
        _drive(kp, SCHEDULE, 1800.0)
        assert list(kc.event_log) == list(kp.event_log)
        assert list(kc.state_log) == list(kp.state_log)

    def test_replay_mode_parity(self):
        times = np.sort(np.random.Generator(np.random.PCG64(3)).uniform(0, 1000, 4000))
        kc = _build(compiled, 9, workload_mode=2, workload_times=times, warmup=0.0)
        kp = _build(_core_py, 9, workload_mode=2, workload_times=times, warmup=0.0)
        _drive(kc, [(0.0, 8)], 1000.0)
        _drive(kp, [(0.0, 8)], 1000.0)
        assert kc.snapshot() == kp.snapshot()
        assert kc.arrivals_all == 4000

    def test_piecewise_mode_parity(self):
        rates = np.array([2.0, 8.0, 0.0, 5.0, 12.0, 1.0])
        kw = dict(workload_mode=1, workload_rates=rates, workload_bin_width=200.0, warmup=0.0)
        kc = _build(compiled, 21, **kw)
        kp = _build(_core_py, 21, **kw)
        _drive(kc, SCHEDULE[:4], 1200.0)
        _drive(kp, SCHEDULE[:4], 1200.0)
        assert kc.snapshot() == kp.snapshot()

    def test_server_state_accessors_agree(self):
        kc = _build(compiled, 13)
        kp = _build(_core_py, 13)
        _drive(kc, SCHEDULE, 1800.0)
        _drive(kp, SCHEDULE, 1800.0)
        assert kc.server_states() == kp.server_states()
        assert int(kc.n_busy) == int(kp.n_busy)
        assert int(kc.q_len_now) == int(kp.q_len_now)


class TestErlangParity:
    def test_metrics_bit_identical(self):
        rng = np.random.Generator(np.random.PCG64(6))
        for _ in range(200):
            lam = float(rng.uniform(0, 200))
            mu = float(rng.uniform(0.1, 5))
            theta = float(rng.uniform(0.05, 5))
            n = int(rng.integers(0, 250))
            mc = compiled.erlang_a_metrics(lam, mu, theta, n)
            mp = _core_py.erlang_a_metrics(lam, mu, theta, n)
            assert mc == mp


class TestBackendSelection:
    def test_default_prefers_compiled(self):
        assert _backend.COMPILED is True
        assert _backend.FarmKernel is compiled.FarmKernel

    def test_env_override_forces_pure(self):
        import subprocess
        import sys
        out = subprocess.run(
            [sys.executable, "-c", "from farmsim import _backend; print(_backend.COMPILED)"],
            capture_output=True, text=True, env={"FARMSIM_PURE_PYTHON": "1", "PATH": "/usr/bin:/bin"},
        )
        assert out.stdout.strip() == "False"

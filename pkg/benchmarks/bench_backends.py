"""Compare the compiled simulation kernel against the pure-Python twin.

Run from the repository root:

    python3 benchmarks/bench_backends.py

Both backends produce bit-identical results (see tests/test_backends.py);
this script only measures throughput.
"""

import time

import numpy as np

from farmsim import _core_py

try:
    from farmsim import _core
except ImportError:
    _core = None


def _bitgens(seed):
    return tuple(np.random.PCG64(c) for c in np.random.SeedSequence(seed).spawn(3))


def run_kernel(mod, rate, duration, seed=0):
    arr, srv, pat = _bitgens(seed)
    n = int(rate) + 3 * int(rate ** 0.5) + 4
    kernel = mod.FarmKernel(
        mu=1.0, theta=1.0, p_peak=200.0, idle_fraction=0.65,
        p_setup=200.0, setup_duration=0.0,
        n_slots=n, initial_n=n, warmup=0.0,
        workload_mode=0, workload_rate=rate,
        arrival_bitgen=arr, service_bitgen=srv, patience_bitgen=pat,
    )
    kernel.set_target(n, 0.0)
    t0 = time.perf_counter()
    kernel.run_until(duration)
    kernel.sync_energy(duration)
    elapsed = time.perf_counter() - t0
    return kernel.arrivals_all, elapsed, kernel.snapshot()


def bench_kernels():
    print("simulation kernel (stationary M/M/n+M, mu = theta = 1)")
    print(f"{'rate':>8} {'jobs':>10} {'pure s':>9} {'pure j/s':>10}", end="")
    if _core is not None:
        print(f" {'comp s':>9} {'comp j/s':>10} {'speedup':>8}")
    else:
        print()
    for rate, duration in [(10.0, 5_000.0), (100.0, 5_000.0), (500.0, 2_000.0)]:
        jobs_p, t_p, snap_p = run_kernel(_core_py, rate, duration)
        line = f"{rate:8.0f} {jobs_p:10d} {t_p:9.3f} {jobs_p / t_p:10.0f}"
        if _core is not None:
            jobs_c, t_c, snap_c = run_kernel(_core, rate, duration)
            assert snap_c == snap_p, "backends diverged"
            line += f" {t_c:9.3f} {jobs_c / t_c:10.0f} {t_p / t_c:7.1f}x"
        print(line)


def bench_erlang():
    print()
    print("erlang_a_metrics (steady-state solve, called per staffing candidate)")
    cases = [(50.0, 1.0, 1.0, 60), (500.0, 1.0, 0.5, 520), (5000.0, 1.0, 1.0, 5100)]
    reps = 200
    for lam, mu, theta, n in cases:
        t0 = time.perf_counter()
        for _ in range(reps):
            _core_py.erlang_a_metrics(lam, mu, theta, n)
        t_p = (time.perf_counter() - t0) / reps
        line = f"  lam={lam:6.0f} n={n:5d}  pure {t_p * 1e6:9.1f} us"
        if _core is not None:
            t0 = time.perf_counter()
            for _ in range(reps):
                _core.erlang_a_metrics(lam, mu, theta, n)
            t_c = (time.perf_counter() - t0) / reps
            line += f"  compiled {t_c * 1e6:9.1f} us  speedup {t_p / t_c:6.1f}x"
        print(line)


if __name__ == "__main__":
    if _core is None:
        print("compiled backend not available; benchmarking pure Python only\n")
    bench_kernels()
    bench_erlang()

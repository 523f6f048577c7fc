import math

import numpy as np
import pytest
from scipy import stats

import farmsim as fs
from farmsim.errors import InvalidParameterError, UnstableQueueError
from farmsim.queueing import QueueParams, performance_metrics, steady_state

from conftest import balance_solve


class TestParamsValidation:
    def test_rejects_negative_lambda(self):
        with pytest.raises(InvalidParameterError):
            QueueParams(-1, 1, 1, 1)

    def test_rejects_nonpositive_mu(self):
        with pytest.raises(InvalidParameterError):
            QueueParams(1, 0, 1, 1)

    def test_rejects_no_steady_state_theta0_n0(self):
        with pytest.raises(UnstableQueueError):
            QueueParams(1, 1, 0, 0)

    def test_rejects_unstable_theta0(self):
        with pytest.raises(UnstableQueueError):
            QueueParams(2, 1, 0, 2)

    def test_accepts_n0_with_abandonment(self):
        QueueParams(1, 1, 1, 0)  # every job abandons; steady state exists


class TestSteadyState:
    def test_no_arrivals_all_mass_at_zero(self):
        d = steady_state(QueueParams(0, 1, 1, 2))
        assert d.probs[0] == 1.0
        assert d.truncation_level == 0

    def test_theta_equals_mu_is_poisson(self):
        # with theta = mu every death rate collapses to k*mu, so the
        # occupancy is Poisson(lam/mu) truncated and renormalized
        d = steady_state(QueueParams(2, 1, 1, 3))
        k = np.arange(d.truncation_level + 1)
        ref = stats.poisson.pmf(k, 2.0)
        ref /= ref.sum()
        assert np.abs(d.probs - ref).max() < 1e-10

    @pytest.mark.parametrize("n", [1, 4, 25])
    def test_theta_equals_mu_any_n(self, n):
        d = steady_state(QueueParams(3.0, 2.0, 2.0, n))
        k = np.arange(d.truncation_level + 1)
        ref = stats.poisson.pmf(k, 1.5)
        ref /= ref.sum()
        assert np.abs(d.probs - ref).max() < 1e-10

    def test_golden_vector_1_1_2_1(self):
        # frozen from the balance-equation linear solve at K = 200
        golden_head = [
            0.4148196588637697,
            0.4148196588637697,
            0.13827321962125658,
            0.02765464392425133,
            0.003950663417750199,
            0.0004389626019722511,
        ]
        d = steady_state(QueueParams(1, 1, 2, 1))
        assert np.abs(d.probs[:6] - golden_head).max() < 1e-12

    def test_matches_balance_solve(self):
        pi = balance_solve(2, 1, 1, 3)
        d = steady_state(QueueParams(2, 1, 1, 3))
        m = min(len(pi), len(d.probs))
        assert np.abs(pi[:m] - d.probs[:m]).max() < 1e-12

    def test_normalization(self):
        rng = np.random.Generator(np.random.PCG64(42))
        for _ in range(50):
            params = QueueParams(
                float(rng.uniform(0.01, 500)), float(rng.uniform(0.01, 10)),
                float(rng.uniform(0.01, 10)), int(rng.integers(1, 600)))
            d = steady_state(params)
            assert abs(d.probs.sum() - 1.0) < 1e-9
            assert (d.probs >= 0).all()

    def test_truncation_insensitivity(self):
        params = QueueParams(80.0, 1.0, 0.7, 90)
        d1 = steady_state(params)
        m1 = performance_metrics(params, d1)
        # force a doubled truncation by extending the chain manually
        K2 = 2 * d1.truncation_level
        from farmsim.queueing import _death_rates
        d = _death_rates(params, K2)
        log_w = np.concatenate([[0.0], np.cumsum(np.log(params.lam) - np.log(d))])
        w = np.exp(log_w - log_w.max())
        d2 = fs.SteadyStateDistribution(probs=w / w.sum(), truncation_level=K2)
        m2 = performance_metrics(params, d2)
        for field in ("p_abandon", "p_wait", "mean_in_system", "mean_queue", "utilization"):
            assert abs(getattr(m1, field) - getattr(m2, field)) < 1e-9

    def test_large_instance_no_overflow(self):
        params = QueueParams(5000.0, 1.0, 0.5, 5200)
        d = steady_state(params)
        assert abs(d.probs.sum() - 1.0) < 1e-9
        assert np.isfinite(d.probs).all()

    def test_tolerance_range_enforced(self):
        with pytest.raises(InvalidParameterError):
            steady_state(QueueParams(1, 1, 1, 1), tolerance=1e-3)


class TestPerformanceMetrics:
    def test_p_abandon_is_inverse_e(self):
        # occupancy is Poisson(1); abandonment rate = E[(K-1)+] = e^-1;
        # confirmed against the balance-equation solve in conftest
        m = fs.analyze(QueueParams(1, 1, 1, 1))
        assert abs(m.p_abandon - math.exp(-1)) < 1e-9

    def test_utilization_is_one_minus_inverse_e(self):
        m = fs.analyze(QueueParams(1, 1, 1, 1))
        assert abs(m.utilization - (1 - math.exp(-1))) < 1e-9
        assert abs(m.throughput - m.utilization * 1 * 1) < 1e-9

    def test_zero_arrivals_all_zero(self):
        m = fs.analyze(QueueParams(0, 1, 1, 4))
        assert m.p_abandon == 0
        assert m.throughput == 0
        assert m.utilization == 0

    def test_rate_conservation_randomized(self):
        rng = np.random.Generator(np.random.PCG64(7))
        for _ in range(100):
            params = QueueParams(
                float(rng.uniform(1e-3, 500)), float(rng.uniform(1e-2, 10)),
                float(rng.uniform(1e-2, 10)), int(rng.integers(1, 600)))
            m = fs.analyze(params)
            inflow = params.lam
            outflow = params.lam * m.p_abandon + params.mu * params.n * m.utilization
            assert abs(inflow - outflow) < 1e-9 * max(1.0, inflow)

    def test_p_abandon_monotone_in_n(self):
        values = [fs.analyze(QueueParams(20, 1, 2, n)).p_abandon for n in range(0, 40)]
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))

    def test_mismatched_distribution_rejected(self):
        d = steady_state(QueueParams(1, 1, 1, 1))
        bad = fs.SteadyStateDistribution.__new__(fs.SteadyStateDistribution)
        object.__setattr__(bad, "probs", d.probs)
        object.__setattr__(bad, "truncation_level", d.truncation_level + 5)
        with pytest.raises(InvalidParameterError):
            performance_metrics(QueueParams(1, 1, 1, 1), bad)

    def test_n0_everyone_abandons(self):
        m = fs.analyze(QueueParams(5, 1, 2, 0))
        assert abs(m.p_abandon - 1.0) < 1e-9
        assert m.utilization == 0.0


class TestErlangC:
    def test_two_servers_third(self):
        assert abs(fs.erlang_c_reference(1, 1, 2) - 1 / 3) < 1e-12

    def test_mm1_p_wait_is_rho(self):
        assert abs(fs.erlang_c_reference(0.5, 1, 1) - 0.5) < 1e-12

    def test_vanishing_load(self):
        assert fs.erlang_c_reference(1e-12, 1, 1) < 1e-9

    def test_unstable_raises(self):
        with pytest.raises(UnstableQueueError):
            fs.erlang_c_reference(2, 1, 2)

    def test_theta_to_zero_limit(self):
        for lam, mu, n in [(1.0, 1.0, 2), (10.0, 1.0, 14), (3.0, 2.0, 3)]:
            m = fs.analyze(QueueParams(lam, mu, 1e-8, n))
            assert abs(m.p_wait - fs.erlang_c_reference(lam, mu, n)) < 1e-5

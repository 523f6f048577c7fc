"""Pure-Python event kernel and Erlang-A fast path.

This is the fallback twin of the compiled extension ``farmsim._core``:
identical algorithm, identical RNG consumption order, so a run produces
the same sample path on either backend.  The compiled core exists
because the event loop dominates runtime on long traces.

Event ordering: ties at the same timestamp are broken by event-type
priority (completion < abandonment < setup-complete < policy-epoch <
arrival), then by insertion sequence.
"""

import heapq
from math import ceil, exp, log, log1p, sqrt

import numpy as np

COMPILED = False

# Server state codes (also the energy bucket indices).
OFF, SETTING_UP, IDLE, BUSY = 0, 1, 2, 3

# Event kinds, in tie-break priority order.  3 is reserved for the
# policy epoch, which is driven from outside the kernel.
EV_COMPLETION, EV_ABANDON, EV_SETUP, EV_EPOCH, EV_ARRIVAL = 0, 1, 2, 3, 4

# Workload modes.
WL_STATIONARY, WL_PIECEWISE, WL_REPLAY = 0, 1, 2

_KIND_SHIFT = 44

# Setup-complete events carry (server << 24) | generation so that a
# cancelled boot can be recognized and dropped when its event surfaces.
_GEN_SHIFT = 24
_GEN_MASK = (1 << _GEN_SHIFT) - 1


def erlang_a_metrics(lam, mu, theta, n, tolerance=1e-12):
    """Steady-state (p_abandon, p_wait, mean_in_system, mean_queue,
    utilization) of the M/M/n+M chain, solved in plain loops.

    Mirrors farmsim.queueing.steady_state but avoids array allocation;
    used on the hot path of the adaptive staffing search.  Raises
    ValueError on unstable instances (theta = 0, lam >= n*mu).
    """
    if lam == 0.0:
        return (0.0, 1.0 if n == 0 else 0.0, 0.0, 0.0, 0.0)
    if theta == 0.0 and lam >= n * mu:
        raise ValueError("unstable: theta = 0 and lam >= n*mu")

    load = lam / mu
    K = int(max(n, ceil(load)) + 10.0 * sqrt(max(1.0, load))) + 10
    log_lam = log(lam)
    while True:
        # Log-weights of the unnormalized occupancy, tracking the running
        # maximum so the exp pass is mode-anchored.
        log_w = 0.0
        peak = 0.0
        logs = [0.0] * (K + 1)
        for k in range(1, K + 1):
            d = (k if k < n else n) * mu + (k - n if k > n else 0) * theta
            log_w += log_lam - log(d)
            logs[k] = log_w
            if log_w > peak:
                peak = log_w
        total = 0.0
        s_excess = 0.0
        s_k = 0.0
        s_busy = 0.0
        s_wait = 0.0
        for k in range(K + 1):
            w = exp(logs[k] - peak)
            total += w
            s_k += k * w
            s_busy += (k if k < n else n) * w
            if k > n:
                s_excess += (k - n) * w
            if k >= n:
                s_wait += w
        d_next = (K + 1 if K + 1 < n else n) * mu + (K + 1 - n if K + 1 > n else 0) * theta
        r = lam / d_next
        if r < 1.0 and exp(logs[K] - peak) * r / (1.0 - r) < tolerance * total:
            mean_queue = s_excess / total
            p_abandon = theta * mean_queue / lam
            p_wait = s_wait / total
            mean_in_system = s_k / total
            utilization = (s_busy / total) / n if n > 0 else 0.0
            if utilization > 1.0:
                utilization = 1.0
            if p_abandon > 1.0:
                p_abandon = 1.0
            return (p_abandon, p_wait, mean_in_system, mean_queue, utilization)
        if K >= 50_000_000:
            raise ValueError("truncation level exceeded; instance too large")
        K *= 2


class FarmKernel:
    """Event-driven server farm between policy epochs.

    The driver owns the policy loop: it calls run_until() up to each
    epoch boundary, reads counters, decides a target and applies it via
    set_target().  Everything between boundaries happens here.
    """

    def __init__(self, *, mu, theta, p_peak, idle_fraction, p_setup, setup_duration,
                 n_slots, initial_n, warmup,
                 workload_mode, workload_rate=0.0, workload_rates=None,
                 workload_bin_width=0.0, workload_times=None,
                 arrival_bitgen=None, service_bitgen=None, patience_bitgen=None,
                 log_events=False):
        self.mu = float(mu)
        self.theta = float(theta)
        self.p_busy = float(p_peak)
        self.p_idle = float(idle_fraction) * float(p_peak)
        self.p_setup = float(p_setup)
        self.setup_duration = float(setup_duration)
        self.warmup = float(warmup)
        self.log_events = bool(log_events)

        self._g_arr = np.random.Generator(arrival_bitgen)
        self._g_srv = np.random.Generator(service_bitgen)
        self._g_pat = np.random.Generator(patience_bitgen)

        # Servers.
        n_slots = max(int(n_slots), int(initial_n), 1)
        self.state = [OFF] * n_slots
        self.since = [0.0] * n_slots
        self.drain = [False] * n_slots
        self.gen = [0] * n_slots
        self.job_arrival = [0.0] * n_slots
        self.job_wait = [0.0] * n_slots
        self.job_counted = [False] * n_slots
        self.srv_stamp = [0] * n_slots
        self.idle_stack = []
        self.n_setup = 0
        self.n_idle = 0
        self.n_busy = 0
        self.n_drain = 0
        for s in range(int(initial_n)):
            self.state[s] = IDLE
            self._push_idle(s)
            self.n_idle += 1

        # FIFO queue ring with virtual head/tail; abandon events address
        # jobs by virtual position so the ring can grow in place.
        cap = 1024
        self.q_cap = cap
        self.q_arrival = [0.0] * cap
        self.q_deadline = [0.0] * cap
        self.q_alive = [False] * cap
        self.q_counted = [False] * cap
        self.q_head = 0
        self.q_tail = 0
        self.q_len = 0

        # Event heap: (time, kind<<44 | seq, payload).
        self.heap = []
        self.ev_seq = 0

        # Workload.
        self.wl_mode = workload_mode
        self.wl_rate = float(workload_rate)
        self.wl_rates = None if workload_rates is None else np.asarray(workload_rates, dtype=float)
        self.wl_bin_width = float(workload_bin_width)
        self.wl_bin = 0
        self.wl_clock = 0.0
        self.wl_times = None if workload_times is None else np.asarray(workload_times, dtype=float)
        self.wl_idx = 0

        # Counters.
        self.now = 0.0
        self.arrivals_all = 0
        self.served_all = 0
        self.abandoned_all = 0
        self.arrivals_counted = 0
        self.served_counted = 0
        self.abandoned_counted = 0
        self.in_system = 0
        self.wait_sum = 0.0
        self.sojourn_sum = 0.0
        self.area_jobs = 0.0
        self._area_t = 0.0
        self.energy_ws = [0.0, 0.0, 0.0, 0.0]  # indexed by state code

        self.event_log = []  # (time, kind, payload) when log_events
        self.state_log = []  # (time, server, new_state) when log_events
        if self.log_events:
            for s in range(int(initial_n)):
                self.state_log.append((0.0, s, IDLE))

        self._schedule_next_arrival(0.0)

    # -- RNG ----------------------------------------------------------

    def _exp_arr(self, rate):
        return -log1p(-self._g_arr.random()) / rate

    def _exp_srv(self, rate):
        return -log1p(-self._g_srv.random()) / rate

    def _exp_pat(self, rate):
        return -log1p(-self._g_pat.random()) / rate

    # -- plumbing ------------------------------------------------------

    def _push(self, time, kind, payload):
        heapq.heappush(self.heap, (time, (kind << _KIND_SHIFT) | self.ev_seq, payload))
        self.ev_seq += 1

    def _push_idle(self, s):
        self.srv_stamp[s] += 1
        self.idle_stack.append((s, self.srv_stamp[s]))

    def _pop_idle(self):
        while self.idle_stack:
            s, stamp = self.idle_stack.pop()
            if self.state[s] == IDLE and self.srv_stamp[s] == stamp:
                return s
        return -1

    def _acc_energy(self, s, t):
        st = self.state[s]
        if st == SETTING_UP:
            p = self.p_setup
        elif st == IDLE:
            p = self.p_idle
        elif st == BUSY:
            p = self.p_busy
        else:
            p = 0.0
        self.energy_ws[st] += p * (t - self.since[s])
        self.since[s] = t

    def _set_state(self, s, t, new_state):
        self._acc_energy(s, t)
        self.state[s] = new_state
        if self.log_events:
            self.state_log.append((t, s, new_state))

    def _sync_area(self, t):
        t0 = self._area_t
        if t > t0:
            lo = t0 if t0 > self.warmup else self.warmup
            if t > lo:
                self.area_jobs += self.in_system * (t - lo)
            self._area_t = t

    def _ensure_slots(self, m):
        cur = len(self.state)
        if m <= cur:
            return
        extra = m - cur
        self.state += [OFF] * extra
        self.since += [self.now] * extra
        self.drain += [False] * extra
        self.gen += [0] * extra
        self.job_arrival += [0.0] * extra
        self.job_wait += [0.0] * extra
        self.job_counted += [False] * extra
        self.srv_stamp += [0] * extra

    def _grow_queue(self):
        old_cap = self.q_cap
        cap = old_cap * 2
        na = [0.0] * cap
        nd = [0.0] * cap
        nl = [False] * cap
        nc = [False] * cap
        for pos in range(self.q_head, self.q_tail):
            i, j = pos & (old_cap - 1), pos & (cap - 1)
            na[j] = self.q_arrival[i]
            nd[j] = self.q_deadline[i]
            nl[j] = self.q_alive[i]
            nc[j] = self.q_counted[i]
        self.q_arrival, self.q_deadline = na, nd
        self.q_alive, self.q_counted = nl, nc
        self.q_cap = cap

    # -- workload ------------------------------------------------------

    def _schedule_next_arrival(self, t_prev):
        t = self._next_arrival_time(t_prev)
        if t is not None:
            self._push(t, EV_ARRIVAL, 0)

    def _next_arrival_time(self, t_prev):
        if self.wl_mode == WL_STATIONARY:
            if self.wl_rate <= 0.0:
                return None
            return t_prev + self._exp_arr(self.wl_rate)
        if self.wl_mode == WL_REPLAY:
            if self.wl_idx >= len(self.wl_times):
                return None
            t = float(self.wl_times[self.wl_idx])
            self.wl_idx += 1
            return t
        # Piecewise-constant-rate Poisson: memorylessness lets us redraw
        # from each bin boundary we cross.
        t = max(t_prev, self.wl_clock)
        b = self.wl_bin
        n_bins = len(self.wl_rates)
        while b < n_bins:
            end = (b + 1) * self.wl_bin_width
            rate = self.wl_rates[b]
            if rate <= 0.0:
                t = end
                b += 1
                continue
            cand = t + self._exp_arr(rate)
            if cand <= end:
                self.wl_bin = b
                self.wl_clock = cand
                return cand
            t = end
            b += 1
        self.wl_bin = b
        return None

    # -- job flow ------------------------------------------------------

    def _start_service(self, s, t, arrival_t, counted, wait):
        if self.state[s] != BUSY:
            self._set_state(s, t, BUSY)
        self.job_arrival[s] = arrival_t
        self.job_wait[s] = wait
        self.job_counted[s] = counted
        dur = self._exp_srv(self.mu)
        self._push(t + dur, EV_COMPLETION, s)

    def _take_queued(self, s, t):
        """Hand the earliest waiting job to server s; False if queue empty."""
        head = self.q_head
        mask = self.q_cap - 1
        while head < self.q_tail and not self.q_alive[head & mask]:
            head += 1
        self.q_head = head
        if head >= self.q_tail:
            return False
        i = head & mask
        self.q_alive[i] = False
        self.q_head = head + 1
        self.q_len -= 1
        self._start_service(s, t, self.q_arrival[i], self.q_counted[i], t - self.q_arrival[i])
        return True

    def _server_freed(self, s, t):
        if self.drain[s]:
            self.drain[s] = False
            self.n_drain -= 1
            self.n_busy -= 1
            self._set_state(s, t, OFF)
        elif self._take_queued(s, t):
            pass  # stays BUSY with the next job
        else:
            self.n_busy -= 1
            self.n_idle += 1
            self._set_state(s, t, IDLE)
            self._push_idle(s)

    # -- event dispatch -------------------------------------------------

    def _on_arrival(self, t):
        self._sync_area(t)
        self.arrivals_all += 1
        counted = t >= self.warmup
        if counted:
            self.arrivals_counted += 1
        self.in_system += 1
        if self.log_events:
            self.event_log.append((t, EV_ARRIVAL, -1))
        s = self._pop_idle()
        if s >= 0:
            self.n_idle -= 1
            self.n_busy += 1
            self._start_service(s, t, t, counted, 0.0)
        else:
            if self.q_tail - self.q_head >= self.q_cap:
                self._grow_queue()
            pos = self.q_tail
            i = pos & (self.q_cap - 1)
            self.q_arrival[i] = t
            self.q_counted[i] = counted
            self.q_alive[i] = True
            self.q_tail = pos + 1
            self.q_len += 1
            if self.theta > 0.0:
                deadline = t + self._exp_pat(self.theta)
                self.q_deadline[i] = deadline
                self._push(deadline, EV_ABANDON, pos)
        self._schedule_next_arrival(t)

    def _on_completion(self, t, s):
        self._sync_area(t)
        self.in_system -= 1
        self.served_all += 1
        if self.job_counted[s]:
            self.served_counted += 1
            self.wait_sum += self.job_wait[s]
            self.sojourn_sum += t - self.job_arrival[s]
        if self.log_events:
            self.event_log.append((t, EV_COMPLETION, s))
        self._server_freed(s, t)

    def _on_abandon(self, t, pos):
        if pos < self.q_head:
            return
        i = pos & (self.q_cap - 1)
        if not self.q_alive[i]:
            return
        self._sync_area(t)
        self.q_alive[i] = False
        self.q_len -= 1
        self.in_system -= 1
        self.abandoned_all += 1
        if self.q_counted[i]:
            self.abandoned_counted += 1
            self.sojourn_sum += t - self.q_arrival[i]
        if self.log_events:
            self.event_log.append((t, EV_ABANDON, pos))

    def _on_setup_complete(self, t, s, gen):
        if self.state[s] != SETTING_UP or self.gen[s] != gen:
            return
        self.n_setup -= 1
        if self.log_events:
            self.event_log.append((t, EV_SETUP, s))
        if self._take_queued(s, t):
            self.n_busy += 1
        else:
            self.n_idle += 1
            self._set_state(s, t, IDLE)
            self._push_idle(s)

    # -- public API ------------------------------------------------------

    @property
    def committed_n(self):
        """Servers powered and not draining: what the policy controls."""
        return self.n_setup + self.n_idle + self.n_busy - self.n_drain

    @property
    def powered_n(self):
        return self.n_setup + self.n_idle + self.n_busy

    def run_until(self, T):
        """Process all events strictly before the policy-epoch slot at T."""
        heap = self.heap
        while heap:
            t, key2, payload = heap[0]
            if t > T or (t == T and (key2 >> _KIND_SHIFT) >= EV_EPOCH):
                break
            heapq.heappop(heap)
            kind = key2 >> _KIND_SHIFT
            if kind == EV_ARRIVAL:
                self._on_arrival(t)
            elif kind == EV_COMPLETION:
                self._on_completion(t, payload)
            elif kind == EV_ABANDON:
                self._on_abandon(t, payload)
            else:
                # payload encodes (server << 24) | generation
                self._on_setup_complete(t, payload >> _GEN_SHIFT, payload & _GEN_MASK)
        self._sync_area(T)
        self.now = T

    def set_target(self, target, now):
        """Scale toward ``target`` committed servers at time ``now``.

        Scale-up first un-flags draining servers (already powered), then
        boots Off servers; scale-down cancels SettingUp servers, then
        powers off Idle servers (most recently idle first), then flags
        Busy servers to drain.
        """
        target = int(target)
        self._ensure_slots(target)
        committed = self.committed_n
        if target > committed:
            need = target - committed
            if self.n_drain > 0:
                for s in range(len(self.state)):
                    if need == 0 or self.n_drain == 0:
                        break
                    if self.drain[s]:
                        self.drain[s] = False
                        self.n_drain -= 1
                        need -= 1
            s = 0
            n_slots = len(self.state)
            while need > 0 and s < n_slots:
                if self.state[s] == OFF:
                    if self.setup_duration > 0.0:
                        self.gen[s] += 1
                        self.n_setup += 1
                        self._set_state(s, now, SETTING_UP)
                        self._push(now + self.setup_duration, EV_SETUP,
                                   (s << _GEN_SHIFT) | self.gen[s])
                    else:
                        if self._take_queued(s, now):
                            self.n_busy += 1
                        else:
                            self.n_idle += 1
                            self._set_state(s, now, IDLE)
                            self._push_idle(s)
                    need -= 1
                s += 1
        elif target < committed:
            excess = committed - target
            s = len(self.state) - 1
            while excess > 0 and s >= 0 and self.n_setup > 0:
                if self.state[s] == SETTING_UP:
                    self.gen[s] += 1  # invalidates the pending setup event
                    self.n_setup -= 1
                    self._set_state(s, now, OFF)
                    excess -= 1
                s -= 1
            while excess > 0 and self.n_idle > 0:
                s = self._pop_idle()
                if s < 0:
                    break
                self.n_idle -= 1
                self._set_state(s, now, OFF)
                excess -= 1
            s = len(self.state) - 1
            while excess > 0 and s >= 0:
                if self.state[s] == BUSY and not self.drain[s]:
                    self.drain[s] = True
                    self.n_drain += 1
                    excess -= 1
                s -= 1

    def reset_metrics(self, now):
        """Zero the measurement accumulators at the warm-up boundary."""
        for s in range(len(self.state)):
            self._acc_energy(s, now)
        self.energy_ws = [0.0, 0.0, 0.0, 0.0]
        self.area_jobs = 0.0
        self._area_t = now

    def sync_energy(self, now):
        """Fold the partial state durations into the accumulators."""
        for s in range(len(self.state)):
            self._acc_energy(s, now)

    @property
    def q_len_now(self):
        return self.q_len

    def server_states(self):
        return list(self.state)

    def snapshot(self):
        return {
            "arrivals_all": self.arrivals_all,
            "served_all": self.served_all,
            "abandoned_all": self.abandoned_all,
            "arrivals": self.arrivals_counted,
            "served": self.served_counted,
            "abandoned": self.abandoned_counted,
            "in_system": self.in_system,
            "wait_sum": self.wait_sum,
            "sojourn_sum": self.sojourn_sum,
            "area_jobs": self.area_jobs,
            "energy_ws": tuple(self.energy_ws),
            "queue_len": self.q_len,
            "committed_n": self.committed_n,
            "powered_n": self.powered_n,
        }

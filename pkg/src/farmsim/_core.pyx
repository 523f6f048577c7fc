# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event kernel and Erlang-A fast path.

Twin of farmsim._core_py with identical algorithm and RNG consumption
order; see that module for the behavioural documentation.  This version
exists because the event loop dominates runtime on long traces.
"""

from cpython.mem cimport PyMem_Free, PyMem_Malloc, PyMem_Realloc
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport ceil, exp, log, log1p, sqrt
from libc.string cimport memset

from numpy.random cimport bitgen_t

import numpy as np

COMPILED = True

OFF, SETTING_UP, IDLE, BUSY = 0, 1, 2, 3
EV_COMPLETION, EV_ABANDON, EV_SETUP, EV_EPOCH, EV_ARRIVAL = 0, 1, 2, 3, 4
WL_STATIONARY, WL_PIECEWISE, WL_REPLAY = 0, 1, 2

DEF KIND_SHIFT = 44
DEF GEN_SHIFT = 24
DEF GEN_MASK = (1 << GEN_SHIFT) - 1

DEF S_OFF = 0
DEF S_SETUP = 1
DEF S_IDLE = 2
DEF S_BUSY = 3

DEF K_COMPLETION = 0
DEF K_ABANDON = 1
DEF K_SETUP = 2
DEF K_EPOCH = 3
DEF K_ARRIVAL = 4


def erlang_a_metrics(double lam, double mu, double theta, long n, double tolerance=1e-12):
    """Steady-state (p_abandon, p_wait, mean_in_system, mean_queue,
    utilization) of the M/M/n+M chain; raises ValueError when unstable."""
    cdef long K, k
    cdef double load, log_lam, log_w, peak, d, total, s_excess, s_k, s_busy, s_wait
    cdef double w, d_next, r, mean_queue, p_abandon, p_wait, mean_in_system, utilization
    cdef double *logs

    if lam == 0.0:
        return (0.0, 1.0 if n == 0 else 0.0, 0.0, 0.0, 0.0)
    if theta == 0.0 and lam >= n * mu:
        raise ValueError("unstable: theta = 0 and lam >= n*mu")

    load = lam / mu
    K = <long>(max(<double>n, ceil(load)) + 10.0 * sqrt(max(1.0, load))) + 10
    log_lam = log(lam)
    while True:
        logs = <double *> PyMem_Malloc((K + 1) * sizeof(double))
        if logs == NULL:
            raise MemoryError()
        log_w = 0.0
        peak = 0.0
        logs[0] = 0.0
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
        d_next = ((K + 1) if K + 1 < n else n) * mu + ((K + 1 - n) if K + 1 > n else 0) * theta
        r = lam / d_next
        if r < 1.0 and exp(logs[K] - peak) * r / (1.0 - r) < tolerance * total:
            PyMem_Free(logs)
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
        PyMem_Free(logs)
        if K >= 50_000_000:
            raise ValueError("truncation level exceeded; instance too large")
        K *= 2


cdef class FarmKernel:
    """Event-driven server farm between policy epochs (compiled)."""

    cdef double mu, theta, p_busy, p_idle, p_setup, setup_duration, warmup
    cdef bint log_events_on

    # RNG
    cdef object _arr_obj, _srv_obj, _pat_obj
    cdef bitgen_t *rng_arr
    cdef bitgen_t *rng_srv
    cdef bitgen_t *rng_pat

    # Servers
    cdef long n_slots
    cdef char *st
    cdef double *since
    cdef char *drain
    cdef long *gen
    cdef double *job_arrival_arr
    cdef double *job_wait_arr
    cdef char *job_counted_arr
    cdef long *stamp
    cdef long pub_n_setup, pub_n_idle, pub_n_busy, pub_n_drain

    # Idle stack
    cdef long *is_srv
    cdef long *is_stamp
    cdef long is_top, is_cap

    # FIFO queue ring
    cdef long q_cap
    cdef double *q_arr
    cdef double *q_dl
    cdef char *q_alive
    cdef char *q_cnt
    cdef long q_head, q_tail, q_len

    # Event heap
    cdef double *hp_t
    cdef long *hp_k2
    cdef long *hp_pay
    cdef long hp_size, hp_cap, ev_seq

    # Workload
    cdef int wl_mode
    cdef double wl_rate, wl_bin_width, wl_clock
    cdef double *wl_rates
    cdef long wl_n_bins, wl_bin
    cdef double *wl_times
    cdef long wl_n_times, wl_idx

    # Counters
    cdef public double now
    cdef long c_arrivals_all, c_served_all, c_abandoned_all
    cdef long c_arrivals, c_served, c_abandoned, c_in_system
    cdef double c_wait_sum, c_sojourn_sum, c_area, area_t
    cdef double energy[4]

    cdef public list event_log
    cdef public list state_log

    def __cinit__(self):
        self.st = NULL
        self.since = NULL
        self.drain = NULL
        self.gen = NULL
        self.job_arrival_arr = NULL
        self.job_wait_arr = NULL
        self.job_counted_arr = NULL
        self.stamp = NULL
        self.is_srv = NULL
        self.is_stamp = NULL
        self.q_arr = NULL
        self.q_dl = NULL
        self.q_alive = NULL
        self.q_cnt = NULL
        self.hp_t = NULL
        self.hp_k2 = NULL
        self.hp_pay = NULL
        self.wl_rates = NULL
        self.wl_times = NULL

    def __dealloc__(self):
        PyMem_Free(self.st)
        PyMem_Free(self.since)
        PyMem_Free(self.drain)
        PyMem_Free(self.gen)
        PyMem_Free(self.job_arrival_arr)
        PyMem_Free(self.job_wait_arr)
        PyMem_Free(self.job_counted_arr)
        PyMem_Free(self.stamp)
        PyMem_Free(self.is_srv)
        PyMem_Free(self.is_stamp)
        PyMem_Free(self.q_arr)
        PyMem_Free(self.q_dl)
        PyMem_Free(self.q_alive)
        PyMem_Free(self.q_cnt)
        PyMem_Free(self.hp_t)
        PyMem_Free(self.hp_k2)
        PyMem_Free(self.hp_pay)
        PyMem_Free(self.wl_rates)
        PyMem_Free(self.wl_times)

    def __init__(self, *, mu, theta, p_peak, idle_fraction, p_setup, setup_duration,
                 n_slots, initial_n, warmup,
                 workload_mode, workload_rate=0.0, workload_rates=None,
                 workload_bin_width=0.0, workload_times=None,
                 arrival_bitgen=None, service_bitgen=None, patience_bitgen=None,
                 log_events=False):
        cdef long s, i
        self.mu = mu
        self.theta = theta
        self.p_busy = p_peak
        self.p_idle = idle_fraction * p_peak
        self.p_setup = p_setup
        self.setup_duration = setup_duration
        self.warmup = warmup
        self.log_events_on = bool(log_events)

        self._arr_obj = arrival_bitgen
        self._srv_obj = service_bitgen
        self._pat_obj = patience_bitgen
        self.rng_arr = <bitgen_t *> PyCapsule_GetPointer(arrival_bitgen.capsule, "BitGenerator")
        self.rng_srv = <bitgen_t *> PyCapsule_GetPointer(service_bitgen.capsule, "BitGenerator")
        self.rng_pat = <bitgen_t *> PyCapsule_GetPointer(patience_bitgen.capsule, "BitGenerator")

        self.n_slots = 0
        self._alloc_servers(max(<long>n_slots, <long>initial_n, 1))

        self.is_cap = 1024
        self.is_srv = <long *> PyMem_Malloc(self.is_cap * sizeof(long))
        self.is_stamp = <long *> PyMem_Malloc(self.is_cap * sizeof(long))
        self.is_top = 0

        self.q_cap = 1024
        self.q_arr = <double *> PyMem_Malloc(self.q_cap * sizeof(double))
        self.q_dl = <double *> PyMem_Malloc(self.q_cap * sizeof(double))
        self.q_alive = <char *> PyMem_Malloc(self.q_cap)
        self.q_cnt = <char *> PyMem_Malloc(self.q_cap)
        self.q_head = 0
        self.q_tail = 0
        self.q_len = 0

        self.hp_cap = 4096
        self.hp_t = <double *> PyMem_Malloc(self.hp_cap * sizeof(double))
        self.hp_k2 = <long *> PyMem_Malloc(self.hp_cap * sizeof(long))
        self.hp_pay = <long *> PyMem_Malloc(self.hp_cap * sizeof(long))
        self.hp_size = 0
        self.ev_seq = 0

        self.wl_mode = workload_mode
        self.wl_rate = workload_rate
        self.wl_bin_width = workload_bin_width
        self.wl_bin = 0
        self.wl_clock = 0.0
        self.wl_idx = 0
        self.wl_n_bins = 0
        self.wl_n_times = 0
        cdef double[::1] mv
        if workload_rates is not None:
            arr = np.ascontiguousarray(workload_rates, dtype=np.float64)
            mv = arr
            self.wl_n_bins = mv.shape[0]
            self.wl_rates = <double *> PyMem_Malloc(self.wl_n_bins * sizeof(double))
            for i in range(self.wl_n_bins):
                self.wl_rates[i] = mv[i]
        if workload_times is not None:
            arr = np.ascontiguousarray(workload_times, dtype=np.float64)
            mv = arr
            self.wl_n_times = mv.shape[0]
            if self.wl_n_times > 0:
                self.wl_times = <double *> PyMem_Malloc(self.wl_n_times * sizeof(double))
                for i in range(self.wl_n_times):
                    self.wl_times[i] = mv[i]

        self.now = 0.0
        self.c_arrivals_all = 0
        self.c_served_all = 0
        self.c_abandoned_all = 0
        self.c_arrivals = 0
        self.c_served = 0
        self.c_abandoned = 0
        self.c_in_system = 0
        self.c_wait_sum = 0.0
        self.c_sojourn_sum = 0.0
        self.c_area = 0.0
        self.area_t = 0.0
        self.energy[0] = self.energy[1] = self.energy[2] = self.energy[3] = 0.0

        self.pub_n_setup = 0
        self.pub_n_idle = 0
        self.pub_n_busy = 0
        self.pub_n_drain = 0

        self.event_log = []
        self.state_log = []
        for s in range(<long>initial_n):
            self.st[s] = S_IDLE
            self._push_idle(s)
            self.pub_n_idle += 1
            if self.log_events_on:
                self.state_log.append((0.0, s, IDLE))

        self._schedule_next_arrival(0.0)

    # -- allocation ----------------------------------------------------

    cdef void _alloc_servers(self, long m):
        cdef long old = self.n_slots
        if m <= old:
            return
        self.st = <char *> PyMem_Realloc(self.st, m)
        self.since = <double *> PyMem_Realloc(self.since, m * sizeof(double))
        self.drain = <char *> PyMem_Realloc(self.drain, m)
        self.gen = <long *> PyMem_Realloc(self.gen, m * sizeof(long))
        self.job_arrival_arr = <double *> PyMem_Realloc(self.job_arrival_arr, m * sizeof(double))
        self.job_wait_arr = <double *> PyMem_Realloc(self.job_wait_arr, m * sizeof(double))
        self.job_counted_arr = <char *> PyMem_Realloc(self.job_counted_arr, m)
        self.stamp = <long *> PyMem_Realloc(self.stamp, m * sizeof(long))
        cdef long s
        for s in range(old, m):
            self.st[s] = S_OFF
            self.since[s] = self.now
            self.drain[s] = 0
            self.gen[s] = 0
            self.job_arrival_arr[s] = 0.0
            self.job_wait_arr[s] = 0.0
            self.job_counted_arr[s] = 0
            self.stamp[s] = 0
        self.n_slots = m

    # -- RNG -----------------------------------------------------------

    cdef inline double _exp_arr(self, double rate):
        return -log1p(-self.rng_arr.next_double(self.rng_arr.state)) / rate

    cdef inline double _exp_srv(self, double rate):
        return -log1p(-self.rng_srv.next_double(self.rng_srv.state)) / rate

    cdef inline double _exp_pat(self, double rate):
        return -log1p(-self.rng_pat.next_double(self.rng_pat.state)) / rate

    # -- event heap ------------------------------------------------------

    cdef void _push(self, double t, long kind, long payload):
        cdef long i, parent, k2
        cdef double tt
        cdef long kk, pp
        if self.hp_size >= self.hp_cap:
            self.hp_cap *= 2
            self.hp_t = <double *> PyMem_Realloc(self.hp_t, self.hp_cap * sizeof(double))
            self.hp_k2 = <long *> PyMem_Realloc(self.hp_k2, self.hp_cap * sizeof(long))
            self.hp_pay = <long *> PyMem_Realloc(self.hp_pay, self.hp_cap * sizeof(long))
        k2 = (kind << KIND_SHIFT) | self.ev_seq
        self.ev_seq += 1
        i = self.hp_size
        self.hp_size += 1
        self.hp_t[i] = t
        self.hp_k2[i] = k2
        self.hp_pay[i] = payload
        while i > 0:
            parent = (i - 1) >> 1
            if (self.hp_t[parent] < self.hp_t[i]
                    or (self.hp_t[parent] == self.hp_t[i]
                        and self.hp_k2[parent] < self.hp_k2[i])):
                break
            tt = self.hp_t[parent]; self.hp_t[parent] = self.hp_t[i]; self.hp_t[i] = tt
            kk = self.hp_k2[parent]; self.hp_k2[parent] = self.hp_k2[i]; self.hp_k2[i] = kk
            pp = self.hp_pay[parent]; self.hp_pay[parent] = self.hp_pay[i]; self.hp_pay[i] = pp
            i = parent

    cdef void _pop(self):
        cdef long i, child, last
        cdef double tt
        cdef long kk, pp
        last = self.hp_size - 1
        self.hp_t[0] = self.hp_t[last]
        self.hp_k2[0] = self.hp_k2[last]
        self.hp_pay[0] = self.hp_pay[last]
        self.hp_size = last
        i = 0
        while True:
            child = 2 * i + 1
            if child >= last:
                break
            if child + 1 < last and (
                    self.hp_t[child + 1] < self.hp_t[child]
                    or (self.hp_t[child + 1] == self.hp_t[child]
                        and self.hp_k2[child + 1] < self.hp_k2[child])):
                child += 1
            if (self.hp_t[i] < self.hp_t[child]
                    or (self.hp_t[i] == self.hp_t[child]
                        and self.hp_k2[i] < self.hp_k2[child])):
                break
            tt = self.hp_t[child]; self.hp_t[child] = self.hp_t[i]; self.hp_t[i] = tt
            kk = self.hp_k2[child]; self.hp_k2[child] = self.hp_k2[i]; self.hp_k2[i] = kk
            pp = self.hp_pay[child]; self.hp_pay[child] = self.hp_pay[i]; self.hp_pay[i] = pp
            i = child

    # -- idle stack ------------------------------------------------------

    cdef void _push_idle(self, long s):
        if self.is_top >= self.is_cap:
            self.is_cap *= 2
            self.is_srv = <long *> PyMem_Realloc(self.is_srv, self.is_cap * sizeof(long))
            self.is_stamp = <long *> PyMem_Realloc(self.is_stamp, self.is_cap * sizeof(long))
        self.stamp[s] += 1
        self.is_srv[self.is_top] = s
        self.is_stamp[self.is_top] = self.stamp[s]
        self.is_top += 1

    cdef long _pop_idle(self):
        cdef long s
        while self.is_top > 0:
            self.is_top -= 1
            s = self.is_srv[self.is_top]
            if self.st[s] == S_IDLE and self.stamp[s] == self.is_stamp[self.is_top]:
                return s
        return -1

    # -- energy ----------------------------------------------------------

    cdef inline void _acc_energy(self, long s, double t):
        cdef int state = self.st[s]
        cdef double p
        if state == S_SETUP:
            p = self.p_setup
        elif state == S_IDLE:
            p = self.p_idle
        elif state == S_BUSY:
            p = self.p_busy
        else:
            p = 0.0
        self.energy[state] += p * (t - self.since[s])
        self.since[s] = t

    cdef void _set_state(self, long s, double t, int new_state):
        self._acc_energy(s, t)
        self.st[s] = <char> new_state
        if self.log_events_on:
            self.state_log.append((t, s, new_state))

    cdef inline void _sync_area(self, double t):
        cdef double t0 = self.area_t
        cdef double lo
        if t > t0:
            lo = t0 if t0 > self.warmup else self.warmup
            if t > lo:
                self.c_area += self.c_in_system * (t - lo)
            self.area_t = t

    # -- queue ring --------------------------------------------------------

    cdef void _grow_queue(self):
        cdef long old_cap = self.q_cap
        cdef long cap = old_cap * 2
        cdef double *na = <double *> PyMem_Malloc(cap * sizeof(double))
        cdef double *nd = <double *> PyMem_Malloc(cap * sizeof(double))
        cdef char *nl = <char *> PyMem_Malloc(cap)
        cdef char *nc = <char *> PyMem_Malloc(cap)
        memset(nl, 0, cap)
        cdef long pos, i, j
        for pos in range(self.q_head, self.q_tail):
            i = pos & (old_cap - 1)
            j = pos & (cap - 1)
            na[j] = self.q_arr[i]
            nd[j] = self.q_dl[i]
            nl[j] = self.q_alive[i]
            nc[j] = self.q_cnt[i]
        PyMem_Free(self.q_arr)
        PyMem_Free(self.q_dl)
        PyMem_Free(self.q_alive)
        PyMem_Free(self.q_cnt)
        self.q_arr = na
        self.q_dl = nd
        self.q_alive = nl
        self.q_cnt = nc
        self.q_cap = cap

    # -- workload ------------------------------------------------------------

    cdef void _schedule_next_arrival(self, double t_prev):
        cdef double t
        cdef bint have = self._next_arrival_time(t_prev, &t)
        if have:
            self._push(t, K_ARRIVAL, 0)

    cdef bint _next_arrival_time(self, double t_prev, double *out):
        cdef double t, end, rate, cand
        cdef long b
        if self.wl_mode == 0:  # stationary
            if self.wl_rate <= 0.0:
                return False
            out[0] = t_prev + self._exp_arr(self.wl_rate)
            return True
        if self.wl_mode == 2:  # replay
            if self.wl_idx >= self.wl_n_times:
                return False
            out[0] = self.wl_times[self.wl_idx]
            self.wl_idx += 1
            return True
        t = t_prev if t_prev > self.wl_clock else self.wl_clock
        b = self.wl_bin
        while b < self.wl_n_bins:
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
                out[0] = cand
                return True
            t = end
            b += 1
        self.wl_bin = b
        return False

    # -- job flow ---------------------------------------------------------

    cdef void _start_service(self, long s, double t, double arrival_t, bint counted, double wait):
        if self.st[s] != S_BUSY:
            self._set_state(s, t, S_BUSY)
        self.job_arrival_arr[s] = arrival_t
        self.job_wait_arr[s] = wait
        self.job_counted_arr[s] = counted
        self._push(t + self._exp_srv(self.mu), K_COMPLETION, s)

    cdef bint _take_queued(self, long s, double t):
        cdef long head = self.q_head
        cdef long mask = self.q_cap - 1
        cdef long i
        while head < self.q_tail and not self.q_alive[head & mask]:
            head += 1
        self.q_head = head
        if head >= self.q_tail:
            return False
        i = head & mask
        self.q_alive[i] = 0
        self.q_head = head + 1
        self.q_len -= 1
        self._start_service(s, t, self.q_arr[i], self.q_cnt[i], t - self.q_arr[i])
        return True

    cdef void _server_freed(self, long s, double t):
        if self.drain[s]:
            self.drain[s] = 0
            self.pub_n_drain -= 1
            self.pub_n_busy -= 1
            self._set_state(s, t, S_OFF)
        elif self._take_queued(s, t):
            pass
        else:
            self.pub_n_busy -= 1
            self.pub_n_idle += 1
            self._set_state(s, t, S_IDLE)
            self._push_idle(s)

    # -- event handlers ------------------------------------------------------

    cdef void _on_arrival(self, double t):
        cdef long s, pos, i
        cdef bint counted
        cdef double deadline
        self._sync_area(t)
        self.c_arrivals_all += 1
        counted = t >= self.warmup
        if counted:
            self.c_arrivals += 1
        self.c_in_system += 1
        if self.log_events_on:
            self.event_log.append((t, EV_ARRIVAL, -1))
        s = self._pop_idle()
        if s >= 0:
            self.pub_n_idle -= 1
            self.pub_n_busy += 1
            self._start_service(s, t, t, counted, 0.0)
        else:
            if self.q_tail - self.q_head >= self.q_cap:
                self._grow_queue()
            pos = self.q_tail
            i = pos & (self.q_cap - 1)
            self.q_arr[i] = t
            self.q_cnt[i] = counted
            self.q_alive[i] = 1
            self.q_tail = pos + 1
            self.q_len += 1
            if self.theta > 0.0:
                deadline = t + self._exp_pat(self.theta)
                self.q_dl[i] = deadline
                self._push(deadline, K_ABANDON, pos)
        self._schedule_next_arrival(t)

    cdef void _on_completion(self, double t, long s):
        self._sync_area(t)
        self.c_in_system -= 1
        self.c_served_all += 1
        if self.job_counted_arr[s]:
            self.c_served += 1
            self.c_wait_sum += self.job_wait_arr[s]
            self.c_sojourn_sum += t - self.job_arrival_arr[s]
        if self.log_events_on:
            self.event_log.append((t, EV_COMPLETION, s))
        self._server_freed(s, t)

    cdef void _on_abandon(self, double t, long pos):
        cdef long i
        if pos < self.q_head:
            return
        i = pos & (self.q_cap - 1)
        if not self.q_alive[i]:
            return
        self._sync_area(t)
        self.q_alive[i] = 0
        self.q_len -= 1
        self.c_in_system -= 1
        self.c_abandoned_all += 1
        if self.q_cnt[i]:
            self.c_abandoned += 1
            self.c_sojourn_sum += t - self.q_arr[i]
        if self.log_events_on:
            self.event_log.append((t, EV_ABANDON, pos))

    cdef void _on_setup_complete(self, double t, long s, long g):
        if self.st[s] != S_SETUP or self.gen[s] != g:
            return
        self.pub_n_setup -= 1
        if self.log_events_on:
            self.event_log.append((t, EV_SETUP, s))
        if self._take_queued(s, t):
            self.pub_n_busy += 1
        else:
            self.pub_n_idle += 1
            self._set_state(s, t, S_IDLE)
            self._push_idle(s)

    # -- public API -----------------------------------------------------------

    @property
    def committed_n(self):
        return self.pub_n_setup + self.pub_n_idle + self.pub_n_busy - self.pub_n_drain

    @property
    def powered_n(self):
        return self.pub_n_setup + self.pub_n_idle + self.pub_n_busy

    @property
    def arrivals_all(self):
        return self.c_arrivals_all

    @property
    def served_all(self):
        return self.c_served_all

    @property
    def abandoned_all(self):
        return self.c_abandoned_all

    @property
    def arrivals_counted(self):
        return self.c_arrivals

    @property
    def served_counted(self):
        return self.c_served

    @property
    def abandoned_counted(self):
        return self.c_abandoned

    @property
    def in_system(self):
        return self.c_in_system

    @property
    def wait_sum(self):
        return self.c_wait_sum

    @property
    def sojourn_sum(self):
        return self.c_sojourn_sum

    @property
    def area_jobs(self):
        return self.c_area

    @property
    def q_len_now(self):
        return self.q_len

    @property
    def n_busy(self):
        return self.pub_n_busy

    def server_states(self):
        return [self.st[s] for s in range(self.n_slots)]

    @property
    def energy_ws(self):
        return [self.energy[0], self.energy[1], self.energy[2], self.energy[3]]

    def run_until(self, double T):
        cdef double t
        cdef long k2, kind, payload
        while self.hp_size > 0:
            t = self.hp_t[0]
            k2 = self.hp_k2[0]
            kind = k2 >> KIND_SHIFT
            if t > T or (t == T and kind >= K_EPOCH):
                break
            payload = self.hp_pay[0]
            self._pop()
            if kind == K_ARRIVAL:
                self._on_arrival(t)
            elif kind == K_COMPLETION:
                self._on_completion(t, payload)
            elif kind == K_ABANDON:
                self._on_abandon(t, payload)
            else:
                self._on_setup_complete(t, payload >> GEN_SHIFT, payload & GEN_MASK)
        self._sync_area(T)
        self.now = T

    def set_target(self, target, now_):
        cdef long tgt = target
        cdef double now = now_
        cdef long committed, need, excess, s
        self._alloc_servers(tgt)
        committed = self.pub_n_setup + self.pub_n_idle + self.pub_n_busy - self.pub_n_drain
        if tgt > committed:
            need = tgt - committed
            if self.pub_n_drain > 0:
                for s in range(self.n_slots):
                    if need == 0 or self.pub_n_drain == 0:
                        break
                    if self.drain[s]:
                        self.drain[s] = 0
                        self.pub_n_drain -= 1
                        need -= 1
            s = 0
            while need > 0 and s < self.n_slots:
                if self.st[s] == S_OFF:
                    if self.setup_duration > 0.0:
                        self.gen[s] += 1
                        self.pub_n_setup += 1
                        self._set_state(s, now, S_SETUP)
                        self._push(now + self.setup_duration, K_SETUP,
                                   (s << GEN_SHIFT) | self.gen[s])
                    else:
                        if self._take_queued(s, now):
                            self.pub_n_busy += 1
                        else:
                            self.pub_n_idle += 1
                            self._set_state(s, now, S_IDLE)
                            self._push_idle(s)
                    need -= 1
                s += 1
        elif tgt < committed:
            excess = committed - tgt
            s = self.n_slots - 1
            while excess > 0 and s >= 0 and self.pub_n_setup > 0:
                if self.st[s] == S_SETUP:
                    self.gen[s] += 1
                    self.pub_n_setup -= 1
                    self._set_state(s, now, S_OFF)
                    excess -= 1
                s -= 1
            while excess > 0 and self.pub_n_idle > 0:
                s = self._pop_idle()
                if s < 0:
                    break
                self.pub_n_idle -= 1
                self._set_state(s, now, S_OFF)
                excess -= 1
            s = self.n_slots - 1
            while excess > 0 and s >= 0:
                if self.st[s] == S_BUSY and not self.drain[s]:
                    self.drain[s] = 1
                    self.pub_n_drain += 1
                    excess -= 1
                s -= 1

    def reset_metrics(self, double now):
        cdef long s
        for s in range(self.n_slots):
            self._acc_energy(s, now)
        self.energy[0] = self.energy[1] = self.energy[2] = self.energy[3] = 0.0
        self.c_area = 0.0
        self.area_t = now

    def sync_energy(self, double now):
        cdef long s
        for s in range(self.n_slots):
            self._acc_energy(s, now)

    def snapshot(self):
        return {
            "arrivals_all": self.c_arrivals_all,
            "served_all": self.c_served_all,
            "abandoned_all": self.c_abandoned_all,
            "arrivals": self.c_arrivals,
            "served": self.c_served,
            "abandoned": self.c_abandoned,
            "in_system": self.c_in_system,
            "wait_sum": self.c_wait_sum,
            "sojourn_sum": self.c_sojourn_sum,
            "area_jobs": self.c_area,
            "energy_ws": tuple(self.energy_ws),
            "queue_len": self.q_len,
            "committed_n": self.committed_n,
            "powered_n": self.powered_n,
        }

"""Workload traces: uniformly binned request counts plus the loaders
that build them from binned CSV files or raw timestamp logs."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTraceError, InvalidParameterError, TraceFormatError


@dataclass(frozen=True)
class ArrivalTrace:
    """Request counts over uniform time bins."""

    bin_width: float  # seconds
    start_time: float  # epoch seconds of the first bin's left edge
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.bin_width > 0:
            raise InvalidParameterError(f"bin_width must be > 0, got {self.bin_width}")
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.size == 0:
            raise EmptyTraceError("trace has no bins")
        if (counts < 0).any():
            raise TraceFormatError("negative count in trace")
        object.__setattr__(self, "counts", counts)

    def __len__(self):
        return len(self.counts)

    @property
    def rates(self) -> np.ndarray:
        """Per-bin arrival rates in jobs/second."""
        return self.counts / self.bin_width

    @property
    def end_time(self) -> float:
        return self.start_time + len(self.counts) * self.bin_width

    @property
    def duration(self) -> float:
        return len(self.counts) * self.bin_width

    def rate_at(self, t: float) -> float:
        """Rate of the bin containing absolute time t (clamped to the span)."""
        i = int((t - self.start_time) // self.bin_width)
        i = min(max(i, 0), len(self.counts) - 1)
        return float(self.counts[i]) / self.bin_width


def load_binned(path) -> ArrivalTrace:
    """Load a binned CSV trace: header ``timestamp,count``, epoch-second
    timestamps, strictly increasing with uniform spacing."""
    timestamps = []
    counts = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if header.strip() != "timestamp,count":
            raise TraceFormatError("expected header 'timestamp,count'", line=1)
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise TraceFormatError(f"expected 2 fields, got {len(parts)}", line=lineno)
            try:
                ts = float(parts[0])
                count = int(parts[1])
            except ValueError as exc:
                raise TraceFormatError(str(exc), line=lineno) from None
            if count < 0:
                raise TraceFormatError(f"negative count {count}", line=lineno)
            if timestamps and ts <= timestamps[-1]:
                raise TraceFormatError("timestamps must be strictly increasing", line=lineno)
            timestamps.append(ts)
            counts.append(count)
    if not counts:
        raise EmptyTraceError(f"{path}: no bins after header")
    if len(timestamps) == 1:
        raise TraceFormatError("cannot infer bin width from a single row; need >= 2 bins")
    width = timestamps[1] - timestamps[0]
    for i in range(1, len(timestamps)):
        gap = timestamps[i] - timestamps[i - 1]
        if not math.isclose(gap, width, rel_tol=1e-9, abs_tol=1e-9):
            raise TraceFormatError(
                f"non-uniform binning: gap {gap} != bin width {width}", line=i + 2
            )
    return ArrivalTrace(bin_width=width, start_time=timestamps[0], counts=np.array(counts))


def write_binned(trace: ArrivalTrace, path) -> None:
    """Write a trace in the binned CSV format (round-trips with load_binned)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp,count\n")
        for i, count in enumerate(trace.counts):
            ts = trace.start_time + i * trace.bin_width
            fh.write(f"{ts!r},{int(count)}\n")


def aggregate_log(path, bin_width: float) -> ArrivalTrace:
    """Bin a raw request log: one epoch-millisecond timestamp leading each
    line, anything after whitespace ignored.  Zero-count bins are kept so
    the trace covers the full span; the start is floored to bin_width."""
    if not bin_width > 0:
        raise InvalidParameterError(f"bin_width must be > 0, got {bin_width}")
    stamps = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            token = line.split(None, 1)[0]
            try:
                stamps.append(int(token))
            except ValueError:
                raise TraceFormatError(
                    f"expected integer epoch-ms timestamp, got {token!r}", line=lineno
                ) from None
    if not stamps:
        raise EmptyTraceError(f"{path}: no timestamps")
    seconds = np.array(stamps, dtype=np.float64) / 1000.0
    start = math.floor(seconds.min() / bin_width) * bin_width
    idx = np.floor((seconds - start) / bin_width).astype(np.int64)
    counts = np.bincount(idx)
    return ArrivalTrace(bin_width=bin_width, start_time=start, counts=counts)


def synthetic_diurnal_trace(
    mean_rate: float = 100.0,
    amplitude: float = 50.0,
    period: float = 86400.0,
    bin_width: float = 300.0,
    duration: float = 86400.0,
    seed: int = 0,
    noise: bool = True,
) -> ArrivalTrace:
    """Generate a sinusoidal day/night workload, optionally with Poisson
    noise on the per-bin counts.  Stands in for real access-log traces in
    tests and demos."""
    if amplitude > mean_rate:
        raise InvalidParameterError("amplitude must not exceed mean_rate (rates stay >= 0)")
    n_bins = int(round(duration / bin_width))
    if n_bins < 1:
        raise InvalidParameterError("duration must cover at least one bin")
    mids = (np.arange(n_bins) + 0.5) * bin_width
    rates = mean_rate + amplitude * np.sin(2.0 * np.pi * mids / period)
    expected = rates * bin_width
    if noise:
        rng = np.random.Generator(np.random.PCG64(seed))
        counts = rng.poisson(expected)
    else:
        counts = np.round(expected).astype(np.int64)
    return ArrivalTrace(bin_width=bin_width, start_time=0.0, counts=counts)

"""Bound traces on disk, resampling onto a common clock, bootstrap aggregation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .decomposition import BoundTrace, TraceRecord

BOOTSTRAP_RESAMPLES = 1000
CONFIDENCE_LEVEL = 0.95
SAMPLE_INTERVAL = 1.0
REPORT_SAMPLE_INTERVAL = 10.0

TRACE_HEADER = ["time_s", "iteration", "lower_bound", "upper_bound", "oracle_calls", "method"]


def _fmt(x: float) -> str:
    return "%.12g" % x


def trace_to_csv(trace: BoundTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in trace.records:
        w.writerow([_fmt(r.time_s), r.iteration, _fmt(r.lower_bound), _fmt(r.upper_bound), r.oracle_calls, r.method])
    buf.write(f"# status={trace.status}\n")
    return buf.getvalue()


def trace_from_csv(text: str) -> BoundTrace:
    lines = text.splitlines()
    status = "unknown"
    rows = []
    for line in lines:
        if line.startswith("# status="):
            status = line.split("=", 1)[1].strip()
        elif line.strip() and not line.startswith("#"):
            rows.append(line)
    reader = csv.reader(rows)
    header = next(reader, None)
    if header != TRACE_HEADER:
        raise ValueError(f"unexpected trace header {header}")
    records = [TraceRecord(float(t), int(i), float(lo), float(hi), int(c), m) for t, i, lo, hi, c, m in reader]
    trace = BoundTrace(records[0].method if records else "unknown", records, status)
    return trace


def write_trace(trace: BoundTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(trace_to_csv(trace))


def read_trace(path) -> BoundTrace:
    with open(path, encoding="utf-8") as fh:
        return trace_from_csv(fh.read())


def _interp(t, times, values):
    ok = np.isfinite(values)
    if not ok.any():
        return np.full(len(t), np.nan)
    return np.interp(t, times[ok], values[ok])


def sample_times(end: float, interval: float) -> np.ndarray:
    if interval <= 0:
        raise ValueError("interval must be positive")
    t = np.arange(0.0, end + 1e-12, interval)
    if t[-1] < end:
        t = np.append(t, end)
    return t


def resample_trace(trace: BoundTrace, interval: float, until: float | None = None):
    """Piecewise-linear lower/upper bounds at ``0, interval, 2*interval, ...``.

    Samples run to the last record (or to ``until``, holding the final values);
    before the first record the first values hold.
    """
    if not trace.records:
        raise ValueError("empty trace")
    times = np.array([r.time_s for r in trace.records])
    if np.any(np.diff(times) < 0):
        raise ValueError("trace timestamps decrease")
    lows = np.array([r.lower_bound for r in trace.records])
    highs = np.array([r.upper_bound for r in trace.records])
    t = sample_times(times[-1] if until is None else max(until, times[-1]), interval)
    return t, _interp(t, times, lows), _interp(t, times, highs)


def bootstrap_ci(samples, resamples: int = BOOTSTRAP_RESAMPLES, level: float = CONFIDENCE_LEVEL, seed=0):
    """Percentile bootstrap interval of the mean (widened to contain the sample mean)."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("no samples")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    means = x[rng.integers(x.size, size=(resamples, x.size))].mean(axis=1)
    tail = 100 * (1 - level) / 2
    low = float(np.percentile(means, tail, method="inverted_cdf"))
    high = float(np.percentile(means, 100 - tail, method="inverted_cdf"))
    mean = float(x.mean())
    return min(low, mean), max(high, mean)


@dataclass
class AggregateSeries:
    time_s: np.ndarray
    runs: np.ndarray
    lb_mean: np.ndarray
    lb_low: np.ndarray
    lb_high: np.ndarray
    ub_mean: np.ndarray
    ub_low: np.ndarray
    ub_high: np.ndarray

    HEADER = ("time_s", "runs", "lb_mean", "lb_low", "lb_high", "ub_mean", "ub_low", "ub_high")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.HEADER)
        for i in range(len(self.time_s)):
            w.writerow([_fmt(self.time_s[i]), int(self.runs[i])] + [_fmt(getattr(self, h)[i]) for h in self.HEADER[2:]])
        return buf.getvalue()


def aggregate(traces, interval: float = SAMPLE_INTERVAL, resamples: int = BOOTSTRAP_RESAMPLES,
              level: float = CONFIDENCE_LEVEL, seed: int = 0) -> AggregateSeries:
    """Mean bounds over runs with an independent bootstrap interval at every sample.

    Runs that finished early keep their final bounds until the longest run ends.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("no traces")
    end = max(t.records[-1].time_s for t in traces)
    grid = sample_times(end, interval)
    lows = np.empty((len(traces), len(grid)))
    highs = np.empty_like(lows)
    for i, tr in enumerate(traces):
        _, lows[i], highs[i] = resample_trace(tr, interval, until=end)

    cols = {name: np.full(len(grid), math.nan) for name in AggregateSeries.HEADER[2:]}
    runs = np.zeros(len(grid), dtype=int)
    for j in range(len(grid)):
        for tag, data in (("lb", lows[:, j]), ("ub", highs[:, j])):
            x = data[np.isfinite(data)]
            if tag == "lb":
                runs[j] = x.size
            if x.size:
                cols[f"{tag}_mean"][j] = x.mean()
                cols[f"{tag}_low"][j], cols[f"{tag}_high"][j] = bootstrap_ci(x, resamples, level, seed=[seed, j])
    return AggregateSeries(grid, runs, **cols)

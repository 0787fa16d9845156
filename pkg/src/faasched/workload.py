"""Workload ingestion, derivation, and synthesis.

Three ways to get a workload file:

* ingest a pair of Azure-release trace CSVs (per-function average duration
  plus per-minute invocation counts), clean and bucket them, and derive
  arrivals by spacing each function class evenly within its minute,
* synthesize a statistically similar workload directly (log-uniform short
  demands, truncated-Pareto tail, on/off bursty arrivals),
* read one someone else wrote.

The file format is one metadata header line followed by plain CSV rows of
``iat_us,demand_us,memory_mb``, parseable from any language.  Everything
here is a pure function of its inputs, seed included.
"""

from __future__ import annotations

import csv
import hashlib
import math
import random
import warnings
from dataclasses import dataclass
from importlib import resources

from .core import SimTime, SimulatorError, Task, percentile

US_PER_MINUTE = 60_000_000

# ingestion cleaning thresholds: non-positive or over an hour is garbage
MAX_PLAUSIBLE_MS = 3_600_000

DEFAULT_MEMORY_DIST = {128: 55, 256: 36, 512: 6, 1024: 3}


class WorkloadError(SimulatorError):
    pass


@dataclass(frozen=True, slots=True)
class WorkloadEntry:
    iat_us: SimTime
    demand_us: SimTime
    memory_mb: int


@dataclass
class WorkloadSpec:
    entries: list[WorkloadEntry]
    source: str = "unknown"
    scale: int = 1
    seed: int = 0

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class TraceRow:
    duration_ms: float
    counts: tuple[int, ...]


@dataclass
class TraceTable:
    rows: list[TraceRow]

    @property
    def minutes(self) -> int:
        return len(self.rows[0].counts) if self.rows else 0


# -- trace ingestion -----------------------------------------------------


def load_bucket_table(path) -> list[tuple[str, float]]:
    """Calibration buckets: CSV of bucket_label,duration_ms."""
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#"):
                continue
            if row[0] == "bucket_label":
                continue
            try:
                out.append((row[0], float(row[1])))
            except (IndexError, ValueError) as exc:
                raise WorkloadError(f"{path}:{lineno}: bad bucket row {row!r}") from exc
    if not out:
        raise WorkloadError(f"{path}: empty bucket table")
    return sorted(out, key=lambda b: b[1])


def default_bucket_table() -> list[tuple[str, float]]:
    ref = resources.files("faasched.data").joinpath("calibration_buckets.csv")
    with resources.as_file(ref) as path:
        return load_bucket_table(path)


def _pick_column(fieldnames, candidates, what, path):
    for name in candidates:
        if name in fieldnames:
            return name
    raise WorkloadError(
        f"{path}: no {what} column; expected one of {', '.join(candidates)}"
    )


_KEY_CANDIDATES = ("HashFunction", "func_id", "function_id", "id")
_DURATION_CANDIDATES = ("Average", "avg_duration_ms", "duration_ms")


def _read_duration_table(path) -> dict[str, float]:
    durations: dict[str, float] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise WorkloadError(f"{path}: empty file")
        key_col = _pick_column(reader.fieldnames, _KEY_CANDIDATES, "function key", path)
        dur_col = _pick_column(reader.fieldnames, _DURATION_CANDIDATES, "duration", path)
        for lineno, row in enumerate(reader, start=2):
            try:
                durations[row[key_col]] = float(row[dur_col])
            except (TypeError, ValueError) as exc:
                raise WorkloadError(f"{path}:{lineno}: bad duration row") from exc
    return durations


def _read_invocation_table(path) -> dict[str, tuple[int, ...]]:
    invocations: dict[str, tuple[int, ...]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise WorkloadError(f"{path}: empty file")
        key_col = _pick_column(reader.fieldnames, _KEY_CANDIDATES, "function key", path)
        minute_cols = sorted((c for c in reader.fieldnames if c.isdigit()), key=int)
        if not minute_cols:
            raise WorkloadError(f"{path}: no per-minute count columns")
        for lineno, row in enumerate(reader, start=2):
            try:
                counts = tuple(int(float(row[c])) for c in minute_cols)
            except (TypeError, ValueError) as exc:
                raise WorkloadError(f"{path}:{lineno}: bad count row") from exc
            invocations[row[key_col]] = counts
    return invocations


def nearest_bucket(duration_ms: float, buckets) -> float:
    """Nearest bucket duration; ties go to the smaller bucket."""
    return min(buckets, key=lambda b: (abs(b[1] - duration_ms), b[1]))[1]


def ingest_trace(duration_path, invocation_path, bucket_table=None) -> TraceTable:
    """Join, clean, and bucket the two trace tables into duration classes.

    Functions sharing a bucket are merged with their per-minute counts
    summed.  Rows with non-positive or implausibly long durations, or any
    negative count, are dropped.
    """
    if bucket_table is None:
        bucket_table = default_bucket_table()
    durations = _read_duration_table(duration_path)
    invocations = _read_invocation_table(invocation_path)

    merged: dict[float, list[int]] = {}
    for key, duration in durations.items():
        counts = invocations.get(key)
        if counts is None:
            continue
        if not 0 < duration <= MAX_PLAUSIBLE_MS or min(counts) < 0:
            continue
        bucket = nearest_bucket(duration, bucket_table)
        acc = merged.setdefault(bucket, [0] * len(counts))
        if len(acc) != len(counts):
            raise WorkloadError("inconsistent minute-column counts across rows")
        for i, c in enumerate(counts):
            acc[i] += c
    if not merged:
        raise WorkloadError("no usable rows after cleaning and joining")
    rows = [TraceRow(d, tuple(c)) for d, c in sorted(merged.items())]
    return TraceTable(rows)


# -- arrival derivation ----------------------------------------------------


def derive_iat(trace: TraceTable, scale: int, minutes: range,
               memory_dist: dict[int, int] | None = None,
               seed: int = 0) -> WorkloadSpec:
    """Downscale per-minute counts and space invocations evenly.

    Each class with k surviving invocations in a minute arrives at offsets
    i * 60s / k from the start of that minute; the union over classes is
    sorted and differenced into inter-arrival times.
    """
    if scale < 1:
        raise WorkloadError(f"scale must be >= 1, got {scale}")
    if trace.rows and (minutes.start < 0 or minutes.stop > trace.minutes):
        raise WorkloadError(
            f"minutes {minutes.start}..{minutes.stop} outside trace range 0..{trace.minutes}"
        )
    arrivals: list[tuple[SimTime, SimTime]] = []
    for row in trace.rows:
        demand_us = round(row.duration_ms * 1_000)
        for m in minutes:
            k = row.counts[m] // scale
            base = m * US_PER_MINUTE
            for i in range(k):
                arrivals.append((base + i * US_PER_MINUTE // k, demand_us))
    if not arrivals:
        warnings.warn("all invocation counts vanished after downscaling", stacklevel=2)
        return WorkloadSpec([], source="trace", scale=scale, seed=seed)
    arrivals.sort()
    rng = random.Random(seed)
    memories = _sample_memory(rng, memory_dist or DEFAULT_MEMORY_DIST, len(arrivals))
    entries = []
    prev = 0
    for (at, demand), mem in zip(arrivals, memories):
        entries.append(WorkloadEntry(at - prev, demand, mem))
        prev = at
    return WorkloadSpec(entries, source="trace", scale=scale, seed=seed)


# -- synthesis -------------------------------------------------------------

# on/off arrival process shape: episodes spend this fraction of time "on"
BURST_ON_FRACTION = 0.2
BURST_ON_MEAN_US = 2_000_000
BURST_OFF_MEAN_US = 8_000_000


def _sample_memory(rng: random.Random, dist: dict[int, int], n: int) -> list[int]:
    sizes = sorted(dist)
    weights = [dist[s] for s in sizes]
    if min(weights) < 0 or sum(weights) <= 0:
        raise WorkloadError(f"invalid memory distribution {dist}")
    return rng.choices(sizes, weights=weights, k=n)


def _log_uniform(rng: random.Random, lo: SimTime, hi: SimTime) -> SimTime:
    return round(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def _truncated_pareto(rng: random.Random, lo: SimTime, hi: SimTime,
                      shape: float) -> SimTime:
    # inverse CDF of a Pareto(lo, shape) conditioned on <= hi
    u = rng.random() * (1.0 - (lo / hi) ** shape)
    return round(lo / (1.0 - u) ** (1.0 / shape))


def synthesize(n_tasks: int, *,
               short_fraction: float = 0.8,
               short_range: tuple[SimTime, SimTime] = (20_000, 700_000),
               tail_range: tuple[SimTime, SimTime] = (1_000_000, 120_000_000),
               tail_shape: float = 2.5,
               burstiness: float = 3.0,
               memory_dist: dict[int, int] | None = None,
               span_us: SimTime = 120_000_000,
               seed: int = 0) -> WorkloadSpec:
    """Generate a bursty workload with a controlled short/long split.

    Demands: `short_fraction` of tasks log-uniform in `short_range` (which
    must sit below one second), the rest truncated-Pareto over
    `tail_range`.  Arrivals: an on/off modulated Poisson process --
    episodes alternate between a burst rate and a quiet rate, `burstiness`
    times apart -- rescaled so the last arrival lands on `span_us`.
    """
    if n_tasks < 1:
        raise WorkloadError(f"n_tasks must be >= 1, got {n_tasks}")
    if not 0 <= short_fraction <= 1:
        raise WorkloadError(f"short_fraction must be in [0,1], got {short_fraction}")
    if not 0 < short_range[0] <= short_range[1] < 1_000_000:
        raise WorkloadError(f"short_range must sit inside (0, 1s), got {short_range}")
    if not 1_000_000 <= tail_range[0] <= tail_range[1]:
        raise WorkloadError(f"tail_range must start at >= 1s, got {tail_range}")
    if tail_shape <= 1.0:
        raise WorkloadError(f"tail_shape must exceed 1, got {tail_shape}")
    max_burst = 1.0 / BURST_ON_FRACTION
    if not 1.0 <= burstiness < max_burst:
        raise WorkloadError(
            f"burstiness must be in [1, {max_burst}), got {burstiness}"
        )
    if span_us <= 0:
        raise WorkloadError(f"span_us must be positive, got {span_us}")

    rng = random.Random(seed)

    n_short = round(n_tasks * short_fraction)
    demands = [_log_uniform(rng, *short_range) for _ in range(n_short)]
    demands += [
        _truncated_pareto(rng, *tail_range, tail_shape)
        for _ in range(n_tasks - n_short)
    ]
    rng.shuffle(demands)

    # mean rate so n arrivals roughly fill the span before rescaling
    lam = n_tasks / span_us
    on_rate = lam * burstiness
    off_rate = lam * (1.0 - BURST_ON_FRACTION * burstiness) / (1.0 - BURST_ON_FRACTION)

    arrivals: list[float] = []
    t = 0.0
    episode_end = 0.0
    on = True
    rate = on_rate
    while len(arrivals) < n_tasks:
        if t >= episode_end:
            on = not on
            rate = on_rate if on else off_rate
            mean = BURST_ON_MEAN_US if on else BURST_OFF_MEAN_US
            episode_end = t + rng.expovariate(1.0 / mean)
            continue
        gap = rng.expovariate(rate) if rate > 0 else episode_end - t
        if t + gap > episode_end:
            t = episode_end
            continue
        t += gap
        arrivals.append(t)

    factor = span_us / arrivals[-1]
    times = [round(a * factor) for a in arrivals]
    memories = _sample_memory(rng, memory_dist or DEFAULT_MEMORY_DIST, n_tasks)

    entries = []
    prev = 0
    for at, demand, mem in zip(times, demands, memories):
        entries.append(WorkloadEntry(at - prev, demand, mem))
        prev = at
    return WorkloadSpec(entries, source="synthetic", scale=1, seed=seed)


# -- file format -------------------------------------------------------------


def write_workload(spec: WorkloadSpec, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(
            f"#workload source={spec.source} scale={spec.scale} "
            f"seed={spec.seed} n={len(spec.entries)}\n"
        )
        writer = csv.writer(fh)
        writer.writerow(("iat_us", "demand_us", "memory_mb"))
        for e in spec.entries:
            writer.writerow((e.iat_us, e.demand_us, e.memory_mb))


def read_workload(path) -> WorkloadSpec:
    with open(path, newline="") as fh:
        header = fh.readline()
        if not header.startswith("#workload"):
            raise WorkloadError(f"{path}:1: missing #workload header")
        meta = {}
        for token in header.split()[1:]:
            key, _, value = token.partition("=")
            meta[key] = value
        entries = []
        for lineno, row in enumerate(csv.reader(fh), start=2):
            if not row or row == ["iat_us", "demand_us", "memory_mb"]:
                continue
            try:
                iat, demand, mem = int(row[0]), int(row[1]), int(row[2])
            except (IndexError, ValueError) as exc:
                raise WorkloadError(f"{path}:{lineno}: bad workload row {row!r}") from exc
            if iat < 0 or demand <= 0:
                raise WorkloadError(f"{path}:{lineno}: negative iat or non-positive demand")
            entries.append(WorkloadEntry(iat, demand, mem))
    declared = int(meta.get("n", len(entries)))
    if declared != len(entries):
        raise WorkloadError(f"{path}: header claims n={declared}, found {len(entries)}")
    return WorkloadSpec(entries, source=meta.get("source", "unknown"),
                        scale=int(meta.get("scale", 1)), seed=int(meta.get("seed", 0)))


def workload_hash(spec: WorkloadSpec) -> str:
    h = hashlib.sha256()
    h.update(f"{spec.source}|{spec.scale}|{spec.seed}|{len(spec.entries)}".encode())
    for e in spec.entries:
        h.update(f"{e.iat_us},{e.demand_us},{e.memory_mb};".encode())
    return h.hexdigest()


def tasks_from_workload(spec: WorkloadSpec) -> list[Task]:
    tasks = []
    at = 0
    for i, e in enumerate(spec.entries):
        at += e.iat_us
        tasks.append(Task(id=i, arrival=at, demand=e.demand_us, memory_mb=e.memory_mb))
    return tasks


def workload_stats(spec: WorkloadSpec) -> dict:
    """Summary sidecar for the representativeness check after generation."""
    if not spec.entries:
        return {"n": 0}
    demands = [e.demand_us for e in spec.entries]
    span = sum(e.iat_us for e in spec.entries)
    memory_hist: dict[int, int] = {}
    for e in spec.entries:
        memory_hist[e.memory_mb] = memory_hist.get(e.memory_mb, 0) + 1
    return {
        "n": len(spec.entries),
        "span_us": span,
        "total_demand_us": sum(demands),
        "frac_under_1s": sum(d < 1_000_000 for d in demands) / len(demands),
        "demand_p50_us": percentile(demands, 50),
        "demand_p90_us": percentile(demands, 90),
        "demand_p99_us": percentile(demands, 99),
        "memory_hist": {str(k): v for k, v in sorted(memory_hist.items())},
    }

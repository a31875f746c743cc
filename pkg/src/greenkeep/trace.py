"""Invocation trace ingestion, synthesis and partitioning.

Traces are flat CSV files with one row per function invocation
(schema: ts_ms,function_id,pod_id,cpu_cores,mem_mb,exec_ms,runtime_tag,
trigger_tag). Cold-start latency is not part of the trace: it comes
from a lookup table keyed by (runtime_tag, trigger_tag) and is stamped
onto every invocation at load time.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .seeds import stable_hash64, sub_seed

TRACE_COLUMNS = [
    "ts_ms", "function_id", "pod_id", "cpu_cores",
    "mem_mb", "exec_ms", "runtime_tag", "trigger_tag",
]
COLD_LOG_COLUMNS = ["runtime_tag", "trigger_tag", "cold_ms"]

SYNTHETIC_RUNTIMES = ("python", "custom")
SYNTHETIC_TRIGGERS = ("http", "timer", "queue")


class TraceError(ValueError):
    """Raised for malformed trace files or invalid trace operations."""


@dataclass(frozen=True)
class Invocation:
    """One trace record. cold_ms is the annotated expected cold-start
    latency, attached via the cold-start table."""

    ts_ms: int
    function_id: str
    pod_id: str
    cpu_cores: float
    mem_mb: float
    exec_ms: int
    runtime_tag: str
    trigger_tag: str
    cold_ms: Optional[float] = None


class ColdStartTable:
    """(runtime_tag, trigger_tag) -> expected cold-start latency in ms,
    with a mandatory global fallback for unseen keys."""

    def __init__(self, entries: dict, fallback_ms: float,
                 missing_keys: frozenset = frozenset()):
        if fallback_ms <= 0:
            raise TraceError(f"fallback cold latency must be > 0, got {fallback_ms}")
        for key, value in entries.items():
            if value <= 0:
                raise TraceError(f"cold latency for {key} must be > 0, got {value}")
        self.entries = dict(entries)
        self.fallback_ms = float(fallback_ms)
        # keys observed in training invocations that had no log records
        self.missing_keys = missing_keys

    def lookup(self, runtime_tag: str, trigger_tag: str) -> float:
        return self.entries.get((runtime_tag, trigger_tag), self.fallback_ms)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class TraceSplit:
    """Pod-grouped train/validation/test partition of a trace."""

    train: tuple
    validation: tuple
    test: tuple
    split_seed: int


@dataclass(frozen=True)
class Poisson:
    rate_hz: float


@dataclass(frozen=True)
class Bimodal:
    """Alternates a burst phase and a lull phase, each period_s/2 long."""

    burst_rate_hz: float
    lull_rate_hz: float
    period_s: float


@dataclass(frozen=True)
class Deterministic:
    interval_s: float


ArrivalModel = Union[Poisson, Bimodal, Deterministic]


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic workload; stands in for real traces."""

    n_functions: int
    n_pods_per_function: int
    duration_s: int
    arrival_model: ArrivalModel
    cold_latency_range_ms: tuple = (100.0, 2000.0)
    cpu_range: tuple = (0.25, 2.0)
    mem_range_mb: tuple = (50.0, 300.0)
    exec_range_ms: tuple = (20, 2000)
    seed: int = 0

    def __post_init__(self):
        if self.n_functions < 1 or self.n_pods_per_function < 1:
            raise TraceError("need at least one function and one pod per function")
        if self.duration_s <= 0:
            raise TraceError("duration_s must be > 0")
        for lo, hi, name in [
            (*self.cold_latency_range_ms, "cold_latency_range_ms"),
            (*self.cpu_range, "cpu_range"),
            (*self.mem_range_mb, "mem_range_mb"),
            (*self.exec_range_ms, "exec_range_ms"),
        ]:
            if lo <= 0 or hi < lo:
                raise TraceError(f"{name} must be a positive, nonempty range")


def load_trace(path, cold_table: ColdStartTable):
    """Load a trace CSV, annotate cold latencies, sort by timestamp.

    Rejects malformed rows with their row number, and traces where one
    pod appears under two different functions.
    """
    invocations = []
    pod_function: dict = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise TraceError(f"{path}: empty trace file")
        missing = [c for c in TRACE_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise TraceError(f"{path}: missing required columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            inv = _parse_row(row, lineno)
            bound = pod_function.setdefault(inv.pod_id, inv.function_id)
            if bound != inv.function_id:
                raise TraceError(
                    f"row {lineno}: pod {inv.pod_id!r} bound to two functions "
                    f"({bound!r} and {inv.function_id!r})"
                )
            inv = replace(inv, cold_ms=cold_table.lookup(inv.runtime_tag, inv.trigger_tag))
            invocations.append(inv)
    invocations.sort(key=lambda i: (i.ts_ms, i.pod_id))
    return invocations


def _parse_row(row: dict, lineno: int) -> Invocation:
    def num(field_name, caster, check=None, what=""):
        raw = row[field_name]
        try:
            value = caster(raw)
        except (TypeError, ValueError):
            raise TraceError(f"row {lineno}: non-numeric {field_name}={raw!r}") from None
        if check is not None and not check(value):
            raise TraceError(f"row {lineno}: {field_name}={raw!r} must be {what}")
        return value

    return Invocation(
        ts_ms=num("ts_ms", int, lambda v: v >= 0, ">= 0"),
        function_id=row["function_id"],
        pod_id=row["pod_id"],
        cpu_cores=num("cpu_cores", float, lambda v: v > 0, "> 0"),
        mem_mb=num("mem_mb", float, lambda v: v > 0, "> 0"),
        exec_ms=num("exec_ms", int, lambda v: v >= 0, ">= 0"),
        runtime_tag=row["runtime_tag"],
        trigger_tag=row["trigger_tag"],
    )


def write_trace(invocations: Iterable[Invocation], path) -> None:
    """Write invocations as a schema-compliant trace CSV."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_COLUMNS)
        for inv in invocations:
            writer.writerow([
                inv.ts_ms, inv.function_id, inv.pod_id, repr(inv.cpu_cores),
                repr(inv.mem_mb), inv.exec_ms, inv.runtime_tag, inv.trigger_tag,
            ])


def write_cold_log(table: ColdStartTable, path) -> None:
    """Write a cold-start log CSV reproducing a table's entries."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(COLD_LOG_COLUMNS)
        for (runtime_tag, trigger_tag), cold_ms in sorted(table.entries.items()):
            writer.writerow([runtime_tag, trigger_tag, repr(cold_ms)])


def build_cold_table(training_invocations: Sequence[Invocation],
                     raw_cold_logs=None,
                     default_cold_ms: float = 1000.0,
                     statistic: str = "mean") -> ColdStartTable:
    """Aggregate cold-start logs into a per-(runtime, trigger) table.

    Each key maps to the mean (or median) latency of its log records;
    the fallback is the global mean, or default_cold_ms when there are
    no logs at all. Keys seen in training but absent from the logs are
    recorded on the table as missing_keys.
    """
    if statistic not in ("mean", "median"):
        raise TraceError(f"unknown statistic {statistic!r}")
    records: dict = {}
    all_values = []
    if raw_cold_logs is not None:
        with open(raw_cold_logs, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is not None:
                missing = [c for c in COLD_LOG_COLUMNS if c not in reader.fieldnames]
                if missing:
                    raise TraceError(f"{raw_cold_logs}: missing columns {missing}")
                for lineno, row in enumerate(reader, start=2):
                    try:
                        cold_ms = float(row["cold_ms"])
                    except (TypeError, ValueError):
                        raise TraceError(
                            f"row {lineno}: non-numeric cold_ms={row['cold_ms']!r}"
                        ) from None
                    if cold_ms <= 0:
                        raise TraceError(f"row {lineno}: cold_ms must be > 0")
                    key = (row["runtime_tag"], row["trigger_tag"])
                    records.setdefault(key, []).append(cold_ms)
                    all_values.append(cold_ms)
    agg = statistics.mean if statistic == "mean" else statistics.median
    entries = {key: agg(values) for key, values in records.items()}
    fallback = statistics.mean(all_values) if all_values else default_cold_ms
    training_keys = {(inv.runtime_tag, inv.trigger_tag) for inv in training_invocations}
    return ColdStartTable(entries, fallback, missing_keys=frozenset(training_keys - set(entries)))


def annotate(invocations: Iterable[Invocation], table: ColdStartTable):
    """Re-stamp cold_ms on a sequence of invocations from a table."""
    return [replace(inv, cold_ms=table.lookup(inv.runtime_tag, inv.trigger_tag))
            for inv in invocations]


def split_by_pod(invocations: Sequence[Invocation], ratios=(0.8, 0.1, 0.1),
                 seed: int = 0) -> TraceSplit:
    """Partition a trace into train/validation/test by pod identity.

    Pods are ordered by a seeded hash of their id (a deterministic
    shuffle) and assigned to partitions by cumulative ratio over the pod
    count. Every pod's invocations land entirely in one partition, and
    each partition keeps global time order.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise TraceError(f"need three positive ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise TraceError(f"ratios must sum to 1, got {ratios} (sum {sum(ratios)})")
    if not invocations:
        raise TraceError("cannot split an empty trace")

    pods = sorted({inv.pod_id for inv in invocations})
    pods.sort(key=lambda p: (stable_hash64(p, seed), p))
    n = len(pods)
    cut1 = int(round(n * ratios[0]))
    cut2 = int(round(n * (ratios[0] + ratios[1])))
    assignment = {}
    for idx, pod in enumerate(pods):
        assignment[pod] = 0 if idx < cut1 else (1 if idx < cut2 else 2)

    ordered = sorted(invocations, key=lambda i: (i.ts_ms, i.pod_id))
    parts = ([], [], [])
    for inv in ordered:
        parts[assignment[inv.pod_id]].append(inv)
    return TraceSplit(tuple(parts[0]), tuple(parts[1]), tuple(parts[2]), split_seed=seed)


def generate_trace(spec: SyntheticSpec):
    """Synthesize a sorted, cold-annotated invocation sequence.

    Every pod is an independent arrival process; resources are drawn per
    function, execution times per invocation, and cold latency per
    (runtime, trigger) key so that the companion cold table reproduces
    the annotation exactly. Deterministic given spec.seed.
    """
    key_cold = _synthetic_key_colds(spec)
    keys = sorted(key_cold)
    invocations = []
    for fi in range(spec.n_functions):
        function_id = f"f{fi:03d}"
        runtime_tag, trigger_tag = keys[fi % len(keys)]
        frng = np.random.default_rng(sub_seed(spec.seed, f"function/{function_id}"))
        cpu = float(frng.uniform(*spec.cpu_range))
        mem = float(frng.uniform(*spec.mem_range_mb))
        for pi in range(spec.n_pods_per_function):
            pod_id = f"{function_id}-p{pi:02d}"
            prng = np.random.default_rng(sub_seed(spec.seed, f"pod/{pod_id}"))
            for t_s in _arrival_times(spec.arrival_model, spec.duration_s, prng):
                exec_ms = int(prng.integers(spec.exec_range_ms[0], spec.exec_range_ms[1] + 1))
                invocations.append(Invocation(
                    ts_ms=int(round(t_s * 1000)),
                    function_id=function_id,
                    pod_id=pod_id,
                    cpu_cores=cpu,
                    mem_mb=mem,
                    exec_ms=exec_ms,
                    runtime_tag=runtime_tag,
                    trigger_tag=trigger_tag,
                    cold_ms=key_cold[(runtime_tag, trigger_tag)],
                ))
    invocations.sort(key=lambda i: (i.ts_ms, i.pod_id))
    return invocations


def synthetic_cold_table(spec: SyntheticSpec) -> ColdStartTable:
    """The cold-start table matching generate_trace's annotations."""
    key_cold = _synthetic_key_colds(spec)
    fallback = statistics.mean(key_cold.values())
    return ColdStartTable(key_cold, fallback)


def _synthetic_key_colds(spec: SyntheticSpec) -> dict:
    rng = np.random.default_rng(sub_seed(spec.seed, "cold-latencies"))
    lo, hi = spec.cold_latency_range_ms
    return {
        (rt, tg): float(rng.uniform(lo, hi))
        for rt in SYNTHETIC_RUNTIMES
        for tg in SYNTHETIC_TRIGGERS
    }


def _arrival_times(model: ArrivalModel, duration_s: float, rng) -> list:
    if isinstance(model, Deterministic):
        if model.interval_s <= 0:
            raise TraceError("interval_s must be > 0")
        times = []
        t = 0.0
        while t < duration_s:
            times.append(t)
            t += model.interval_s
        return times
    if isinstance(model, Poisson):
        if model.rate_hz <= 0:
            raise TraceError("rate_hz must be > 0")
        times = []
        t = rng.exponential(1.0 / model.rate_hz)
        while t < duration_s:
            times.append(t)
            t += rng.exponential(1.0 / model.rate_hz)
        return times
    if isinstance(model, Bimodal):
        if model.burst_rate_hz <= 0 or model.lull_rate_hz <= 0 or model.period_s <= 0:
            raise TraceError("bimodal rates and period must be > 0")
        # memoryless redraw at each phase boundary
        half = model.period_s / 2.0
        times = []
        t = 0.0
        while t < duration_s:
            phase = int(t // half)
            rate = model.burst_rate_hz if phase % 2 == 0 else model.lull_rate_hz
            step = rng.exponential(1.0 / rate)
            boundary = (phase + 1) * half
            if t + step >= boundary:
                t = boundary
                continue
            t += step
            if t < duration_s:
                times.append(t)
        return times
    raise TraceError(f"unknown arrival model {model!r}")

"""Closed-loop virtual users and per-run metric aggregation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .cluster import DROPPED, SUCCESS, TIMEOUT

AWAITING_RESPONSE = "awaiting_response"
STOPPED = "stopped"

HISTOGRAM_BUCKET_MS = 5


@dataclass(slots=True)
class VirtualUser:
    id: int
    requests_issued: int = 0
    state: str = AWAITING_RESPONSE
    outstanding: int | None = None


@dataclass(frozen=True)
class RunResult:
    topology: str
    x_total_ms: float
    access_delay_ms: float
    intra_delay_ms: float
    users: int
    processing_ms: float
    duration_s: float
    successes: int
    timeouts: int
    drops: int
    throughput_rps: float
    latency_p50_ms: float | None
    latency_p95_ms: float | None
    latency_p99_ms: float | None
    max_ready_replicas: int
    seed: int
    plan_index: int = 0
    repetition: int = 0
    issued: int = 0
    mean_in_flight: float = 0.0
    mean_latency_ms: float | None = None

    @property
    def timeout_fraction(self) -> float:
        return (self.timeouts + self.drops) / self.issued if self.issued else 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def nearest_rank(sorted_values, pct: float):
    """Nearest-rank percentile of an ascending sequence; ``None`` when empty."""
    n = len(sorted_values)
    if n == 0:
        return None
    rank = max(1, math.ceil(pct / 100.0 * n))
    return sorted_values[rank - 1]


def latency_histogram(latencies_us, bucket_ms: int = HISTOGRAM_BUCKET_MS) -> list[tuple[int, int]]:
    width = bucket_ms * 1000
    counts: dict[int, int] = {}
    for lat in latencies_us:
        b = lat // width
        counts[b] = counts.get(b, 0) + 1
    return [(b * bucket_ms, counts[b]) for b in sorted(counts)]


def format_histogram(hist) -> str:
    return "bucket_ms,count\n" + "".join(f"{b},{c}\n" for b, c in hist)


def result_from_counts(plan, *, successes: int, timeouts: int, drops: int, issued: int,
                       latencies_us, inflight_area_us: int, max_ready: int) -> RunResult:
    """Assemble a RunResult from raw counters. ``latencies_us`` must be sorted."""
    duration_s = plan.workload.duration_s
    duration_us = round(duration_s * 1_000_000)
    p50 = nearest_rank(latencies_us, 50)
    p95 = nearest_rank(latencies_us, 95)
    p99 = nearest_rank(latencies_us, 99)
    mean_latency = (sum(latencies_us) / len(latencies_us) / 1000.0) if successes else None
    d = plan.delays
    return RunResult(
        topology=plan.topology.kind,
        x_total_ms=d.x_total_ms,
        access_delay_ms=d.access_delay_ms,
        intra_delay_ms=d.intra_delay_ms,
        users=plan.workload.concurrent_users,
        processing_ms=plan.function.processing_time_ms,
        duration_s=duration_s,
        successes=successes,
        timeouts=timeouts,
        drops=drops,
        throughput_rps=successes / duration_s,
        latency_p50_ms=None if p50 is None else p50 / 1000.0,
        latency_p95_ms=None if p95 is None else p95 / 1000.0,
        latency_p99_ms=None if p99 is None else p99 / 1000.0,
        max_ready_replicas=max_ready,
        seed=plan.seed,
        plan_index=plan.index,
        repetition=plan.repetition,
        issued=issued,
        mean_in_flight=inflight_area_us / duration_us,
        mean_latency_ms=mean_latency,
    )


def summarize(records, plan, max_ready_replicas: int = 0) -> RunResult:
    """Aggregate finished request records into a RunResult.

    Throughput divides successes by the configured duration, whatever the
    response times were. Requests still pending are not counted.
    """
    duration_us = round(plan.workload.duration_s * 1_000_000)
    successes = timeouts = drops = 0
    area = 0
    latencies = []
    for rec in records:
        if rec.outcome == SUCCESS:
            successes += 1
            latencies.append(rec.completed_at - rec.issued_at)
        elif rec.outcome == TIMEOUT:
            timeouts += 1
        elif rec.outcome == DROPPED:
            drops += 1
        else:
            continue
        area += min(rec.ended_at, duration_us) - rec.issued_at
    latencies.sort()
    return result_from_counts(plan, successes=successes, timeouts=timeouts, drops=drops,
                              issued=len(records), latencies_us=latencies,
                              inflight_area_us=area, max_ready=max_ready_replicas)


def analytic_closed_loop_oracle(users: int, rtt_ms: float, proc_ms: float, overhead_ms: float) -> float:
    """Closed-loop throughput when nothing queues: each user completes one request per cycle."""
    cycle_ms = rtt_ms + proc_ms + overhead_ms
    if cycle_ms <= 0:
        raise ValueError("cycle time must be positive")
    return users * 1000.0 / cycle_ms

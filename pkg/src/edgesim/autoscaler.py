"""Concurrency-based pod autoscaler with stable and panic windows.

The control plane is shared by both simulation backends: the data plane
feeds it samples and asks it for a desired replica count on every tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .kernel import US_PER_S
from .scenario import AutoscalerConfig

STABLE = "stable"
PANIC = "panic"

# pseudo replica id for requests waiting at the headnode while nothing is ready
ACTIVATOR = -1


@dataclass(frozen=True)
class ConcurrencySample:
    observed_at: int
    measured_at: int
    replica: int
    concurrency: float

    def __post_init__(self):
        if self.observed_at < self.measured_at:
            raise ValueError("sample observed before it was measured")
        if self.concurrency < 0:
            raise ValueError("concurrency must be >= 0")


class WindowedAggregate:
    """Sum of concurrency per measurement instant, averaged over the instants in a window.

    Samples from one tick share ``measured_at`` and add up to the total
    cluster concurrency at that instant. A sample still travelling over the
    intra link is simply missing from its bucket until it lands.
    """

    def __init__(self, window_us: int):
        self.window_us = window_us
        self.buckets: dict[int, float] = {}

    def add(self, measured_at: int, concurrency: float, now: int) -> None:
        if measured_at <= now - self.window_us:
            return
        self.buckets[measured_at] = self.buckets.get(measured_at, 0) + concurrency

    def evict(self, now: int) -> None:
        cutoff = now - self.window_us
        stale = [t for t in self.buckets if t <= cutoff]
        for t in stale:
            del self.buckets[t]

    def average(self) -> float:
        if not self.buckets:
            return 0.0
        return sum(self.buckets.values()) / len(self.buckets)


@dataclass
class AutoscalerState:
    stable_buffer: WindowedAggregate
    panic_buffer: WindowedAggregate
    mode: str = STABLE
    panic_entered_at: int | None = None
    last_panic_signal_at: int | None = None
    zero_since: int | None = None
    current_desired: int = 0
    decisions: list = field(default_factory=list)


class KPA:
    def __init__(self, config: AutoscalerConfig, initial_desired: int = 0):
        self.config = config
        self.stable_window_us = round(config.stable_window_s * US_PER_S)
        self.panic_window_us = round(config.panic_window_s * US_PER_S)
        self.grace_us = round(config.scale_to_zero_grace_s * US_PER_S)
        self.target = config.effective_target
        self.state = AutoscalerState(
            stable_buffer=WindowedAggregate(self.stable_window_us),
            panic_buffer=WindowedAggregate(self.panic_window_us),
            current_desired=initial_desired,
        )

    def record(self, measured_at: int, observed_at: int, replica: int, concurrency: float) -> None:
        st = self.state
        st.stable_buffer.add(measured_at, concurrency, observed_at)
        st.panic_buffer.add(measured_at, concurrency, observed_at)

    def record_sample(self, sample: ConcurrencySample) -> None:
        self.record(sample.measured_at, sample.observed_at, sample.replica, sample.concurrency)

    def averages(self, now: int) -> tuple[float, float]:
        st = self.state
        st.stable_buffer.evict(now)
        st.panic_buffer.evict(now)
        return st.stable_buffer.average(), st.panic_buffer.average()

    def decide(self, now: int, ready: int, current: int | None = None) -> int:
        """Desired replica count at ``now``.

        ``ready`` counts serving replicas, ``current`` adds the ones still
        provisioning (defaults to ``ready``).
        """
        if current is None:
            current = ready
        cfg = self.config
        st = self.state
        stable_avg, panic_avg = self.averages(now)
        target = self.target
        stable_desired = math.ceil(stable_avg / target)
        panic_desired = math.ceil(panic_avg / target)

        panic_signal = panic_avg >= (cfg.panic_threshold_pct / 100.0) * max(ready, 1) * target
        if panic_signal:
            st.last_panic_signal_at = now
            if st.mode == STABLE:
                st.mode = PANIC
                st.panic_entered_at = now
        elif st.mode == PANIC and now - st.last_panic_signal_at >= self.stable_window_us:
            st.mode = STABLE
            st.panic_entered_at = None

        if st.mode == PANIC:
            desired = max(panic_desired, ready)
        else:
            desired = stable_desired
        desired = min(max(desired, 0), cfg.max_replicas)

        if stable_avg == 0.0:
            if st.zero_since is None:
                st.zero_since = now
        else:
            st.zero_since = None
        if desired == 0 and (st.zero_since is None or now - st.zero_since < self.grace_us):
            desired = min(1, current)

        st.current_desired = desired
        st.decisions.append((now, st.mode, stable_avg, panic_avg, ready, desired))
        return desired


def record_sample(sample: ConcurrencySample, state: KPA) -> KPA:
    state.record_sample(sample)
    return state


def desired_replicas(state: KPA, ready: int, now: int, current: int | None = None) -> int:
    return state.decide(now, ready, current)


def format_decisions(decisions) -> str:
    lines = ["time_us,mode,stable_avg,panic_avg,ready,desired\n"]
    for t, mode, stable_avg, panic_avg, ready, desired in decisions:
        lines.append(f"{t},{mode},{stable_avg:.4f},{panic_avg:.4f},{ready},{desired}\n")
    return "".join(lines)

"""Scenario description, validation and run-grid expansion.

A scenario file is line oriented::

    # comment
    topology.kind = multi_site
    grid.x_total_ms = 0, 12.5, 25
    autoscaler.stable_window_s = 60

Every key lives in a dotted section. Lists are comma separated. Keys that
are left out take the defaults listed in ``FIELDS``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable

SINGLE_SITE = "single_site"
MULTI_SITE = "multi_site"
TOPOLOGIES = (SINGLE_SITE, MULTI_SITE)

PLACEMENTS = ("workers_first", "headnode_first")

MASK64 = (1 << 64) - 1


class ScenarioError(ValueError):
    """Base class for problems with a scenario file or config."""


class ScenarioSyntaxError(ScenarioError):
    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class ScenarioValidationError(ScenarioError):
    pass


def ms_to_us(value_ms: float, name: str = "value") -> int:
    """Convert milliseconds to integer microseconds, refusing sub-microsecond values."""
    us = value_ms * 1000.0
    rounded = round(us)
    if abs(us - rounded) > 1e-6:
        raise ScenarioValidationError(f"{name} = {value_ms} is not a whole number of microseconds")
    return int(rounded)


@dataclass(frozen=True)
class DelayProfile:
    x_total_ms: float
    access_delay_ms: float
    intra_delay_ms: float
    jitter_ms: float = 0.0
    loss_prob: float = 0.0

    def __post_init__(self):
        for name in ("x_total_ms", "access_delay_ms", "intra_delay_ms", "jitter_ms"):
            if getattr(self, name) < 0:
                raise ScenarioValidationError(f"{name} must be >= 0")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ScenarioValidationError("loss_prob out of range")


@dataclass(frozen=True)
class TopologySpec:
    kind: str = SINGLE_SITE
    worker_count: int = 2
    headnode_hosts_replicas: bool = True
    placement: str = "workers_first"
    # Per-request processing cost of the headnode ingress; it is a single FIFO
    # server, so this also caps cluster throughput at 1000 / ingress_service_ms.
    ingress_service_ms: float = 0.7

    def __post_init__(self):
        if self.kind not in TOPOLOGIES:
            raise ScenarioValidationError(f"topology.kind must be one of {TOPOLOGIES}")
        if self.worker_count < 1:
            raise ScenarioValidationError("worker_count must be >= 1")
        if self.placement not in PLACEMENTS:
            raise ScenarioValidationError(f"topology.placement must be one of {PLACEMENTS}")
        if self.ingress_service_ms < 0:
            raise ScenarioValidationError("ingress_service_ms must be >= 0")

    @property
    def node_count(self) -> int:
        return self.worker_count + 1


@dataclass(frozen=True)
class FunctionSpec:
    processing_time_ms: float = 0.0
    base_overhead_ms: float = 2.0
    cold_start_ms: float = 800.0

    def __post_init__(self):
        if self.processing_time_ms < 0:
            raise ScenarioValidationError("processing_time_ms must be >= 0")
        if self.base_overhead_ms < 0:
            raise ScenarioValidationError("base_overhead_ms must be >= 0")
        if self.cold_start_ms < 0:
            raise ScenarioValidationError("cold_start_ms must be >= 0")


@dataclass(frozen=True)
class AutoscalerConfig:
    max_replicas: int = 100
    hard_concurrency_limit: int = 0
    concurrency_target: float = 100.0
    target_utilization_pct: float = 70.0
    stable_window_s: float = 60.0
    panic_window_pct: float = 10.0
    panic_threshold_pct: float = 200.0
    tick_interval_s: float = 2.0
    scale_to_zero_grace_s: float = 30.0
    initial_replicas: int = 1
    enabled: bool = True

    def __post_init__(self):
        if self.max_replicas < 1:
            raise ScenarioValidationError("max_replicas must be >= 1")
        if self.hard_concurrency_limit < 0:
            raise ScenarioValidationError("hard_concurrency_limit must be >= 0")
        if self.concurrency_target <= 0:
            raise ScenarioValidationError("concurrency_target must be > 0")
        if not 0 < self.target_utilization_pct <= 100:
            raise ScenarioValidationError("target_utilization_pct must be in (0, 100]")
        if self.panic_threshold_pct < 100:
            raise ScenarioValidationError("panic_threshold_pct must be >= 100")
        if self.stable_window_s <= 0:
            raise ScenarioValidationError("stable_window_s must be > 0")
        if not 0 < self.panic_window_pct <= 100:
            raise ScenarioValidationError("panic_window_pct must be in (0, 100]")
        if self.tick_interval_s <= 0:
            raise ScenarioValidationError("tick_interval_s must be > 0")
        if self.scale_to_zero_grace_s < 0:
            raise ScenarioValidationError("scale_to_zero_grace_s must be >= 0")
        if not 0 <= self.initial_replicas <= self.max_replicas:
            raise ScenarioValidationError("initial_replicas must be in [0, max_replicas]")

    @property
    def panic_window_s(self) -> float:
        return self.stable_window_s * self.panic_window_pct / 100.0

    @property
    def effective_target(self) -> float:
        """Per-replica concurrency the autoscaler aims for."""
        return self.concurrency_target * self.target_utilization_pct / 100.0


@dataclass(frozen=True)
class WorkloadSpec:
    concurrent_users: int = 1
    duration_s: float = 300.0
    request_timeout_ms: float = 20000.0

    def __post_init__(self):
        if self.concurrent_users < 1:
            raise ScenarioValidationError("concurrent_users must be >= 1")
        if self.duration_s <= 0:
            raise ScenarioValidationError("duration_s must be > 0")
        if self.request_timeout_ms <= 0:
            raise ScenarioValidationError("request_timeout_ms must be > 0")


@dataclass(frozen=True)
class ScenarioConfig:
    topology: TopologySpec = field(default_factory=TopologySpec)
    delay_grid: tuple = (0.0, 12.5, 25.0, 50.0, 100.0, 200.0, 400.0, 800.0)
    processing_grid: tuple = (0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
    user_grid: tuple = (1, 50, 500)
    function: FunctionSpec = field(default_factory=FunctionSpec)
    autoscaler: AutoscalerConfig = field(default_factory=AutoscalerConfig)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    jitter_ms: float = 0.0
    loss_prob: float = 0.0
    seed: int = 1
    repetitions: int = 1

    def __post_init__(self):
        for name in ("delay_grid", "processing_grid", "user_grid"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if len(getattr(self, name)) == 0:
                raise ScenarioValidationError(f"{name} must not be empty")
        if not all(math.isfinite(v) for v in self.delay_grid + self.processing_grid):
            raise ScenarioValidationError("grid values must be finite")
        if any(x < 0 for x in self.delay_grid):
            raise ScenarioValidationError("x_total_ms must be >= 0")
        if any(p < 0 for p in self.processing_grid):
            raise ScenarioValidationError("processing_time_ms must be >= 0")
        if any(u < 1 for u in self.user_grid):
            raise ScenarioValidationError("concurrent_users must be >= 1")
        if self.repetitions < 1:
            raise ScenarioValidationError("repetitions must be >= 1")
        if not 0 <= self.seed <= MASK64:
            raise ScenarioValidationError("seed must be an unsigned 64-bit integer")
        if self.jitter_ms < 0:
            raise ScenarioValidationError("jitter_ms must be >= 0")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ScenarioValidationError("loss_prob out of range")
        if (min(self.delay_grid) == 0 and min(self.processing_grid) == 0
                and self.function.base_overhead_ms == 0 and self.topology.ingress_service_ms == 0):
            # users would re-issue forever without the clock advancing
            raise ScenarioValidationError("a grid point has a zero-length request cycle")
        # every duration the kernel sees must be a whole number of microseconds
        for x in self.delay_grid:
            ms_to_us(x / 2.0, "x_total_ms / 2")
        for p in self.processing_grid:
            ms_to_us(p, "processing_time_ms")
        ms_to_us(self.jitter_ms, "jitter_ms")
        ms_to_us(self.function.base_overhead_ms, "base_overhead_ms")
        ms_to_us(self.function.cold_start_ms, "cold_start_ms")
        ms_to_us(self.topology.ingress_service_ms, "ingress_service_ms")
        ms_to_us(self.workload.request_timeout_ms, "request_timeout_ms")
        ms_to_us(self.workload.duration_s * 1000.0, "duration_s")
        ms_to_us(self.autoscaler.tick_interval_s * 1000.0, "tick_interval_s")

    @property
    def run_count(self) -> int:
        return (len(self.delay_grid) * len(self.processing_grid)
                * len(self.user_grid) * self.repetitions)


@dataclass(frozen=True)
class RunPlan:
    """Everything one simulation run needs; self-contained so it pickles cleanly."""

    index: int
    repetition: int
    seed: int
    topology: TopologySpec
    delays: DelayProfile
    function: FunctionSpec
    autoscaler: AutoscalerConfig
    workload: WorkloadSpec

    @property
    def key(self) -> tuple:
        return (self.topology.kind, self.delays.x_total_ms, self.workload.concurrent_users,
                self.function.processing_time_ms)


def derive_delays(x_total_ms: float, kind: str, jitter_ms: float = 0.0,
                  loss_prob: float = 0.0) -> DelayProfile:
    if x_total_ms < 0:
        raise ScenarioValidationError("x_total_ms must be >= 0")
    if kind == SINGLE_SITE:
        return DelayProfile(x_total_ms, x_total_ms, 0.0, jitter_ms, loss_prob)
    if kind == MULTI_SITE:
        half = x_total_ms / 2.0
        return DelayProfile(x_total_ms, half, half, jitter_ms, loss_prob)
    raise ScenarioValidationError(f"unknown topology kind {kind!r}")


def mix_seed(seed: int, index: int) -> int:
    """splitmix64 of ``seed + (index + 1) * golden``.

    The finalizer is a bijection on 64-bit words and the pre-mix is injective in
    ``index`` for a fixed seed, so distinct indices below 2**64 never collide.
    """
    z = (seed + (index + 1) * 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def expand_grid(config: ScenarioConfig) -> list[RunPlan]:
    """All runs of the scenario, delay outermost, then users, processing time, repetition."""
    plans = []
    kind = config.topology.kind
    index = 0
    for x in config.delay_grid:
        delays = derive_delays(x, kind, config.jitter_ms, config.loss_prob)
        for users in config.user_grid:
            workload = replace(config.workload, concurrent_users=users)
            for proc in config.processing_grid:
                function = replace(config.function, processing_time_ms=proc)
                for rep in range(config.repetitions):
                    plans.append(RunPlan(
                        index=index,
                        repetition=rep,
                        seed=mix_seed(config.seed, index),
                        topology=config.topology,
                        delays=delays,
                        function=function,
                        autoscaler=config.autoscaler,
                        workload=workload,
                    ))
                    index += 1
    return plans


# --- scenario file parsing -------------------------------------------------

def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_int(raw: str) -> int:
    return int(raw, 10)


def _list_of(conv: Callable[[str], Any]) -> Callable[[str], tuple]:
    def parse(raw: str) -> tuple:
        items = [item.strip() for item in raw.split(",")]
        if any(item == "" for item in items):
            raise ValueError("empty list item")
        return tuple(conv(item) for item in items)
    return parse


# key -> (target, attribute, converter)
FIELDS: dict[str, tuple[str, str, Callable[[str], Any]]] = {
    "topology.kind": ("topology", "kind", str),
    "topology.worker_count": ("topology", "worker_count", _parse_int),
    "topology.headnode_hosts_replicas": ("topology", "headnode_hosts_replicas", _parse_bool),
    "topology.placement": ("topology", "placement", str),
    "topology.ingress_service_ms": ("topology", "ingress_service_ms", float),
    "grid.x_total_ms": ("scenario", "delay_grid", _list_of(float)),
    "grid.processing_ms": ("scenario", "processing_grid", _list_of(float)),
    "grid.users": ("scenario", "user_grid", _list_of(_parse_int)),
    "network.jitter_ms": ("scenario", "jitter_ms", float),
    "network.loss_prob": ("scenario", "loss_prob", float),
    "function.base_overhead_ms": ("function", "base_overhead_ms", float),
    "function.cold_start_ms": ("function", "cold_start_ms", float),
    "autoscaler.enabled": ("autoscaler", "enabled", _parse_bool),
    "autoscaler.initial_replicas": ("autoscaler", "initial_replicas", _parse_int),
    "autoscaler.max_replicas": ("autoscaler", "max_replicas", _parse_int),
    "autoscaler.hard_concurrency_limit": ("autoscaler", "hard_concurrency_limit", _parse_int),
    "autoscaler.concurrency_target": ("autoscaler", "concurrency_target", float),
    "autoscaler.target_utilization_pct": ("autoscaler", "target_utilization_pct", float),
    "autoscaler.stable_window_s": ("autoscaler", "stable_window_s", float),
    "autoscaler.panic_window_pct": ("autoscaler", "panic_window_pct", float),
    "autoscaler.panic_threshold_pct": ("autoscaler", "panic_threshold_pct", float),
    "autoscaler.tick_interval_s": ("autoscaler", "tick_interval_s", float),
    "autoscaler.scale_to_zero_grace_s": ("autoscaler", "scale_to_zero_grace_s", float),
    "workload.duration_s": ("workload", "duration_s", float),
    "workload.request_timeout_ms": ("workload", "request_timeout_ms", float),
    "run.seed": ("scenario", "seed", _parse_int),
    "run.repetitions": ("scenario", "repetitions", _parse_int),
}


def parse_scenario(text: str) -> ScenarioConfig:
    values: dict[str, dict[str, Any]] = {
        "topology": {}, "function": {}, "autoscaler": {}, "workload": {}, "scenario": {},
    }
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue
        if "=" not in body:
            col = len(body) - len(body.lstrip()) + 1
            raise ScenarioSyntaxError("expected 'key = value'", lineno, col)
        raw_key, raw_value = body.split("=", 1)
        key = raw_key.strip()
        value = raw_value.strip()
        value_col = body.index("=") + 2 + (len(raw_value) - len(raw_value.lstrip()))
        if key not in FIELDS:
            col = len(raw_key) - len(raw_key.lstrip()) + 1
            raise ScenarioSyntaxError(f"unknown key {key!r}", lineno, col)
        if key in seen:
            raise ScenarioSyntaxError(f"duplicate key {key!r} (first set on line {seen[key]})",
                                      lineno, 1)
        if not value:
            raise ScenarioSyntaxError(f"missing value for {key!r}", lineno, value_col)
        seen[key] = lineno
        target, attr, conv = FIELDS[key]
        try:
            values[target][attr] = conv(value)
        except ValueError as exc:
            raise ScenarioSyntaxError(f"bad value for {key!r}: {exc}", lineno, value_col) from None

    return ScenarioConfig(
        topology=TopologySpec(**values["topology"]),
        function=FunctionSpec(**values["function"]),
        autoscaler=AutoscalerConfig(**values["autoscaler"]),
        workload=WorkloadSpec(**values["workload"]),
        **values["scenario"],
    )


def format_scenario(config: ScenarioConfig) -> str:
    """Serialize a config back to the scenario file format (round-trips through parse)."""
    sources = {
        "topology": config.topology,
        "function": config.function,
        "autoscaler": config.autoscaler,
        "workload": config.workload,
        "scenario": config,
    }
    lines = []
    for key, (target, attr, _conv) in FIELDS.items():
        value = getattr(sources[target], attr)
        if isinstance(value, tuple):
            text = ", ".join(_fmt(v) for v in value)
        else:
            text = _fmt(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value) if not value.is_integer() else str(int(value))
    return str(value)


def with_overrides(config: ScenarioConfig, **changes: Any) -> ScenarioConfig:
    """``dataclasses.replace`` that skips ``None`` values (handy for CLI flags)."""
    changes = {k: v for k, v in changes.items() if v is not None}
    return dataclasses.replace(config, **changes) if changes else config

"""Backend selection.

The compiled data plane is used when it imports; ``EDGESIM_BACKEND=python``
forces the reference engine. Both produce identical results and traces.
"""

from __future__ import annotations

import os

from . import cluster as cl
from .autoscaler import KPA
from .kernel import RandomStreams
from .loadgen import result_from_counts
from .network import build_network
from .scenario import RunPlan
from .simulation import RunOutput, plan_timing, run_python

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

AVAILABLE = ("compiled", "python") if _core is not None else ("python",)

_requested = os.environ.get("EDGESIM_BACKEND", "").strip().lower()
if _requested == "python" or _core is None:
    BACKEND = "python"
else:
    BACKEND = "compiled"


def run_compiled(plan: RunPlan, trace: bool = False) -> RunOutput:
    if _core is None:
        raise RuntimeError("compiled backend is not available")
    timing = plan_timing(plan)
    streams = RandomStreams(plan.seed)
    topo = plan.topology
    net = build_network(plan.delays, topo.worker_count, streams)
    links = [(net.access.delay_us, net.access.jitter_us, net.access.loss_prob)]
    links += [(ln.delay_us, ln.jitter_us, ln.loss_prob) for ln in net.intra]
    rngs = [net.access_stream] + list(net.intra_streams)
    order = cl.placement_order(topo.worker_count, topo.placement, topo.headnode_hosts_replicas)
    auto = plan.autoscaler
    kpa = KPA(auto, initial_desired=auto.initial_replicas)
    initial, _ = cl.plan_scale(auto.initial_replicas, [], order, auto.max_replicas)
    run = _core.FastRun(timing, links, rngs, kpa, cl.plan_scale, order, list(initial),
                        plan.workload.concurrent_users, auto.hard_concurrency_limit,
                        auto.max_replicas, auto.enabled, trace)
    run.start()
    run.run_until(timing["duration_us"] + timing["timeout_us"])
    c = run.counters()
    lat = sorted(run.latencies())
    timeline = list(run.timeline)
    result = result_from_counts(plan, successes=c["successes"], timeouts=c["timeouts"],
                                drops=c["drops"], issued=c["issued"], latencies_us=lat,
                                inflight_area_us=c["inflight_area_us"],
                                max_ready=max(n for _, n in timeline))
    return RunOutput(result, lat, timeline, list(kpa.state.decisions), run.trace,
                     c["events"], "compiled")


def run_plan(plan: RunPlan, trace: bool = False, backend: str | None = None) -> RunOutput:
    backend = backend or BACKEND
    if backend == "python":
        return run_python(plan, trace)
    if backend == "compiled":
        return run_compiled(plan, trace)
    raise ValueError(f"unknown backend {backend!r}")

"""Reference (pure Python) data plane for one run.

The compiled engine in ``_core.pyx`` follows the same handler logic event for
event; ``tests/test_backends.py`` holds the two to identical traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import cluster as cl
from .autoscaler import ACTIVATOR, KPA
from .kernel import EventKind, Kernel, RandomStreams
from .loadgen import STOPPED, RunResult, VirtualUser, summarize
from .network import HEADNODE, TESTER, build_network
from .scenario import RunPlan, ms_to_us

# which leg of the trip a MESSAGE_ARRIVAL belongs to
HOP_REQ_HEAD = 0
HOP_REQ_WORKER = 1
HOP_RESP_HEAD = 2
HOP_RESP_TESTER = 3
HOP_SAMPLE = 4

TICK_PERIODIC = 0
TICK_POKE = 1


@dataclass
class RunOutput:
    result: RunResult
    latencies_us: list
    timeline: list
    decisions: list
    trace: list | None = None
    events: int = 0
    backend: str = "python"
    extra: dict = field(default_factory=dict)


def plan_timing(plan: RunPlan) -> dict:
    """Integer microsecond constants shared by both engines."""
    return {
        "duration_us": ms_to_us(plan.workload.duration_s * 1000.0, "duration_s"),
        "timeout_us": ms_to_us(plan.workload.request_timeout_ms, "request_timeout_ms"),
        "service_us": (ms_to_us(plan.function.base_overhead_ms, "base_overhead_ms")
                       + ms_to_us(plan.function.processing_time_ms, "processing_time_ms")),
        "cold_start_us": ms_to_us(plan.function.cold_start_ms, "cold_start_ms"),
        "ingress_us": ms_to_us(plan.topology.ingress_service_ms, "ingress_service_ms"),
        "tick_us": ms_to_us(plan.autoscaler.tick_interval_s * 1000.0, "tick_interval_s"),
    }


class Simulation:
    def __init__(self, plan: RunPlan, trace: bool = False):
        self.plan = plan
        t = plan_timing(plan)
        self.duration_us = t["duration_us"]
        self.timeout_us = t["timeout_us"]
        self.service_us = t["service_us"]
        self.cold_start_us = t["cold_start_us"]
        self.ingress_us = t["ingress_us"]
        self.tick_us = t["tick_us"]
        self.autoscaling = plan.autoscaler.enabled

        self.kernel = Kernel(trace=trace)
        self.streams = RandomStreams(plan.seed)
        topo = plan.topology
        self.network = build_network(plan.delays, topo.worker_count, self.streams)
        order = cl.placement_order(topo.worker_count, topo.placement, topo.headnode_hosts_replicas)
        self.cluster = cl.ClusterState(topo.worker_count, order, plan.autoscaler.hard_concurrency_limit)
        self.kpa = KPA(plan.autoscaler, initial_desired=plan.autoscaler.initial_replicas)

        self.users: list[VirtualUser] = []
        self.records: list[cl.RequestRecord] = []
        self.backlog = 0
        self.ingress_free_at = 0
        self.poke_pending = False
        self.pending_samples: dict[int, tuple[int, int, int]] = {}
        self.next_sample_id = 0
        self.ready_count = 0
        self.timeline: list[tuple[int, int]] = []

        k = self.kernel
        k.on(EventKind.USER_ISSUE, self._on_user_issue)
        k.on(EventKind.MESSAGE_ARRIVAL, self._on_message)
        k.on(EventKind.INGRESS_DONE, self._on_ingress_done)
        k.on(EventKind.SERVICE_COMPLETE, self._on_service_complete)
        k.on(EventKind.REQUEST_TIMEOUT, self._on_timeout)
        k.on(EventKind.REPLICA_READY, self._on_replica_ready)
        k.on(EventKind.AUTOSCALER_TICK, self._on_tick)
        k.on(EventKind.RUN_END, self._on_run_end)

        new_nodes, _ = cl.plan_scale(plan.autoscaler.initial_replicas, [], order,
                                     plan.autoscaler.max_replicas)
        for node in new_nodes:
            self.cluster.add_replica(node, cl.READY)
        self.ready_count = len(new_nodes)
        self.timeline.append((0, self.ready_count))

    # -- lifecycle ---------------------------------------------------------

    def start_users(self, n: int) -> None:
        """Every user sends its first request at t=0."""
        for uid in range(n):
            self.users.append(VirtualUser(uid))
            self.kernel.schedule(0, EventKind.USER_ISSUE, uid)

    def start(self) -> None:
        self.start_users(self.plan.workload.concurrent_users)
        self.kernel.schedule(self.duration_us, EventKind.RUN_END)
        if self.autoscaling:
            self.kernel.schedule(self.tick_us, EventKind.AUTOSCALER_TICK, 0, TICK_PERIODIC)

    @property
    def horizon_us(self) -> int:
        return self.duration_us + self.timeout_us

    def run(self) -> RunOutput:
        self.start()
        self.kernel.run_until(self.horizon_us)
        return self.output()

    def output(self) -> RunOutput:
        result = summarize(self.records, self.plan, max(n for _, n in self.timeline))
        lat = sorted(r.completed_at - r.issued_at for r in self.records if r.outcome == cl.SUCCESS)
        return RunOutput(result, lat, list(self.timeline), list(self.kpa.state.decisions),
                         self.kernel.trace, self.kernel.processed, "python")

    # -- load generator ------------------------------------------------------

    def _on_user_issue(self, uid: int, _aux: int) -> None:
        self._issue(uid)

    def _issue(self, uid: int) -> None:
        k = self.kernel
        now = k.now
        rid = len(self.records)
        rec = cl.RequestRecord(rid, uid, now)
        self.records.append(rec)
        rec.timeout_handle = k.schedule(now + self.timeout_us, EventKind.REQUEST_TIMEOUT, rid)
        user = self.users[uid]
        user.outstanding = rid
        user.requests_issued += 1
        if self.network.send(TESTER, HEADNODE, k, EventKind.MESSAGE_ARRIVAL, rid, HOP_REQ_HEAD) is None:
            rec.lost = True

    def _user_done(self, uid: int) -> None:
        user = self.users[uid]
        user.outstanding = None
        if self.kernel.now < self.duration_us:
            self._issue(uid)
        else:
            user.state = STOPPED

    def on_response(self, rid: int) -> None:
        rec = self.records[rid]
        if rec.outcome != cl.PENDING:
            return  # late response after the timeout fired
        now = self.kernel.now
        rec.outcome = cl.SUCCESS
        rec.completed_at = rec.ended_at = now
        self.kernel.cancel(rec.timeout_handle)
        self._user_done(rec.user)

    def _on_timeout(self, rid: int, _aux: int) -> None:
        rec = self.records[rid]
        rec.outcome = cl.DROPPED if rec.lost else cl.TIMEOUT
        rec.ended_at = self.kernel.now
        self._user_done(rec.user)

    def _on_run_end(self, _payload: int, _aux: int) -> None:
        for user in self.users:
            if user.outstanding is None:
                user.state = STOPPED

    # -- data plane ----------------------------------------------------------

    def _on_message(self, ident: int, hop: int) -> None:
        if hop == HOP_REQ_HEAD:
            self.ingress(ident)
        elif hop == HOP_REQ_WORKER:
            rec = self.records[ident]
            self.serve(rec, self.cluster.replicas[rec.served_by])
        elif hop == HOP_RESP_HEAD:
            if self.network.send(HEADNODE, TESTER, self.kernel, EventKind.MESSAGE_ARRIVAL,
                                 ident, HOP_RESP_TESTER) is None:
                self.records[ident].lost = True
        elif hop == HOP_RESP_TESTER:
            self.on_response(ident)
        elif hop == HOP_SAMPLE:
            measured_at, replica, conc = self.pending_samples.pop(ident)
            self.kpa.record(measured_at, self.kernel.now, replica, conc)

    def ingress(self, rid: int) -> None:
        """Request reached the headnode; it queues for the ingress proxy."""
        now = self.kernel.now
        self.records[rid].ingress_at = now
        self.backlog += 1
        if self.ingress_us == 0:
            self.route(rid)
            return
        done = max(now, self.ingress_free_at) + self.ingress_us
        self.ingress_free_at = done
        self.kernel.schedule(done, EventKind.INGRESS_DONE, rid)

    def _on_ingress_done(self, rid: int, _aux: int) -> None:
        self.route(rid)

    def route(self, rid: int) -> None:
        cluster = self.cluster
        if cluster.buffer:
            cluster.buffer.append(rid)
            return
        replica = cluster.select_replica()
        if replica is None:
            cluster.buffer.append(rid)
            self._maybe_poke()
            return
        self.dispatch(rid, replica)

    def _maybe_poke(self) -> None:
        # scale from zero: wake the autoscaler right away instead of waiting for a tick
        if (self.autoscaling and not self.poke_pending and self.ready_count == 0
                and self.cluster.count(cl.PROVISIONING) == 0):
            self.poke_pending = True
            self.kernel.schedule(self.kernel.now, EventKind.AUTOSCALER_TICK, 0, TICK_POKE)

    def dispatch(self, rid: int, replica: cl.Replica) -> None:
        self.backlog -= 1
        replica.assigned += 1
        rec = self.records[rid]
        rec.served_by = replica.id
        if replica.node == HEADNODE:
            self.serve(rec, replica)
        elif self.network.send(HEADNODE, replica.node, self.kernel, EventKind.MESSAGE_ARRIVAL,
                               rid, HOP_REQ_WORKER) is None:
            rec.lost = True
            self._release(replica)

    def serve(self, rec: cl.RequestRecord, replica: cl.Replica) -> None:
        now = self.kernel.now
        replica.shift(now, 1)
        rec.service_start_at = now
        self.kernel.schedule(now + self.service_us, EventKind.SERVICE_COMPLETE, rec.id)

    def _on_service_complete(self, rid: int, _aux: int) -> None:
        rec = self.records[rid]
        now = self.kernel.now
        rec.service_end_at = now
        replica = self.cluster.replicas[rec.served_by]
        replica.shift(now, -1)
        node = replica.node
        self._release(replica)
        if node == HEADNODE:
            dropped = self.network.send(HEADNODE, TESTER, self.kernel, EventKind.MESSAGE_ARRIVAL,
                                        rid, HOP_RESP_TESTER) is None
        else:
            dropped = self.network.send(node, HEADNODE, self.kernel, EventKind.MESSAGE_ARRIVAL,
                                        rid, HOP_RESP_HEAD) is None
        if dropped:
            rec.lost = True
        if self.cluster.buffer:
            self._drain_buffer()

    def _release(self, replica: cl.Replica) -> None:
        replica.assigned -= 1
        if replica.state == cl.TERMINATING and replica.assigned == 0:
            self.cluster.remove_replica(replica)

    def _drain_buffer(self) -> None:
        buffer = self.cluster.buffer
        while buffer:
            replica = self.cluster.select_replica()
            if replica is None:
                return
            self.dispatch(buffer.popleft(), replica)

    def _on_replica_ready(self, replica_id: int, _aux: int) -> None:
        replica = self.cluster.replicas.get(replica_id)
        if replica is None or replica.state != cl.PROVISIONING:
            return
        replica.state = cl.READY
        replica.changed_at = replica.sample_from = self.kernel.now
        self.ready_count += 1
        self.timeline.append((self.kernel.now, self.ready_count))
        self._drain_buffer()

    # -- control plane glue --------------------------------------------------

    def _on_tick(self, _payload: int, kind: int) -> None:
        k = self.kernel
        now = k.now
        if kind == TICK_POKE:
            self.poke_pending = False
        ready = self.cluster.ready()
        for r in ready:
            conc = r.take_sample(now)
            if r.node == HEADNODE:
                self.kpa.record(now, now, r.id, conc)
            else:
                sid = self.next_sample_id
                self.next_sample_id += 1
                self.pending_samples[sid] = (now, r.id, conc)
                if self.network.send(r.node, HEADNODE, k, EventKind.MESSAGE_ARRIVAL,
                                     sid, HOP_SAMPLE) is None:
                    del self.pending_samples[sid]
        self.kpa.record(now, now, ACTIVATOR, self.backlog if not ready else 0)
        current = len(ready) + self.cluster.count(cl.PROVISIONING)
        desired = self.kpa.decide(now, len(ready), current)
        if desired != current:
            self.apply_scale(desired)
        if kind == TICK_PERIODIC:
            k.schedule(now + self.tick_us, EventKind.AUTOSCALER_TICK, 0, TICK_PERIODIC)

    def apply_scale(self, desired: int) -> None:
        cluster = self.cluster
        now = self.kernel.now
        new_nodes, victims = cl.plan_scale(desired, cluster.snapshot(), cluster.node_order,
                                           self.plan.autoscaler.max_replicas)
        for node in new_nodes:
            replica = cluster.add_replica(node)
            self.kernel.schedule(now + self.cold_start_us, EventKind.REPLICA_READY, replica.id)
        for rid in victims:
            replica = cluster.replicas[rid]
            was_ready = replica.state == cl.READY
            replica.state = cl.TERMINATING
            if replica.assigned == 0:
                cluster.remove_replica(replica)
            if was_ready:
                self.ready_count -= 1
                self.timeline.append((now, self.ready_count))

    # -- audit ---------------------------------------------------------------

    def audit(self) -> None:
        """Check in-flight conservation, the per-user outstanding bound and the replica ceiling."""
        in_service = 0
        open_per_user: dict[int, int] = {}
        for r in self.records:
            if r.service_start_at is not None and r.service_end_at is None:
                in_service += 1
            if r.outcome == cl.PENDING:
                open_per_user[r.user] = open_per_user.get(r.user, 0) + 1
        assert self.cluster.in_flight_total() == in_service
        assert all(n <= 1 for n in open_per_user.values())
        assert self.ready_count == self.cluster.count(cl.READY)
        assert self.ready_count <= self.plan.autoscaler.max_replicas


def run_python(plan: RunPlan, trace: bool = False) -> RunOutput:
    return Simulation(plan, trace=trace).run()

"""Nodes, replicas and request bookkeeping for the simulated k3s + Knative data plane."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .network import HEADNODE

HEADNODE_ROLE = "headnode"
WORKER_ROLE = "worker"

PROVISIONING = 0
READY = 1
TERMINATING = 2
STATE_NAMES = {PROVISIONING: "provisioning", READY: "ready", TERMINATING: "terminating"}

PENDING = "pending"
SUCCESS = "success"
TIMEOUT = "timeout"
DROPPED = "dropped"


class ScaleError(ValueError):
    pass


@dataclass
class Node:
    id: int
    role: str
    replicas: set = field(default_factory=set)


@dataclass(slots=True)
class Replica:
    id: int
    node: int
    state: int = PROVISIONING
    in_flight: int = 0
    # dispatched and not yet completed, including requests still on the intra link
    assigned: int = 0
    # integral of in_flight since sample_from, for time-averaged concurrency reports
    busy_area: int = 0
    changed_at: int = 0
    sample_from: int = 0

    def shift(self, now: int, delta: int) -> None:
        self.busy_area += self.in_flight * (now - self.changed_at)
        self.changed_at = now
        self.in_flight += delta

    def take_sample(self, now: int) -> float:
        """Mean in-flight since the previous sample (or since becoming ready), then reset."""
        self.shift(now, 0)
        span = now - self.sample_from
        value = self.busy_area / span if span > 0 else float(self.in_flight)
        self.busy_area = 0
        self.sample_from = now
        return value


@dataclass(slots=True)
class RequestRecord:
    id: int
    user: int
    issued_at: int
    ingress_at: int | None = None
    service_start_at: int | None = None
    service_end_at: int | None = None
    completed_at: int | None = None
    ended_at: int | None = None
    served_by: int | None = None
    outcome: str = PENDING
    lost: bool = False
    timeout_handle: int | None = None

    @property
    def latency_us(self) -> int | None:
        if self.outcome != SUCCESS:
            return None
        return self.completed_at - self.issued_at


def placement_order(worker_count: int, policy: str, headnode_hosts_replicas: bool = True) -> list[int]:
    """Node ids in the order new replicas fill them."""
    workers = list(range(1, worker_count + 1))
    if policy == "headnode_first":
        order = [HEADNODE] + workers
    elif policy == "workers_first":
        order = workers + [HEADNODE]
    else:
        raise ScaleError(f"unknown placement policy {policy!r}")
    if not headnode_hosts_replicas:
        order.remove(HEADNODE)
    return order


def plan_scale(desired: int, replicas, node_order: list[int], max_replicas: int):
    """Decide which nodes get new replicas and which replicas go away.

    ``replicas`` is an id-ordered sequence of ``(id, node, state, in_flight)``.
    Returns ``(new_nodes, victims)``. New replicas go to the node with the
    fewest live replicas, ties broken by ``node_order``. Victims are the live
    replicas with the lowest in-flight count, ties broken by highest id.
    """
    if not 0 <= desired <= max_replicas:
        raise ScaleError(f"desired={desired} outside [0, {max_replicas}]")
    live = [r for r in replicas if r[2] != TERMINATING]
    if desired > len(live):
        rank = {node: i for i, node in enumerate(node_order)}
        counts = {node: 0 for node in node_order}
        for r in live:
            if r[1] in counts:
                counts[r[1]] += 1
        new_nodes = []
        for _ in range(desired - len(live)):
            node = min(node_order, key=lambda n: (counts[n], rank[n]))
            counts[node] += 1
            new_nodes.append(node)
        return new_nodes, []
    if desired < len(live):
        ranked = sorted(live, key=lambda r: (r[3], -r[0]))
        return [], [r[0] for r in ranked[:len(live) - desired]]
    return [], []


class ClusterState:
    def __init__(self, worker_count: int, node_order: list[int], hard_limit: int = 0):
        self.nodes = [Node(HEADNODE, HEADNODE_ROLE)] + [
            Node(i, WORKER_ROLE) for i in range(1, worker_count + 1)]
        self.node_order = node_order
        self.hard_limit = hard_limit
        self.replicas: dict[int, Replica] = {}
        self.next_replica_id = 0
        self.buffer: deque[int] = deque()

    def add_replica(self, node: int, state: int = PROVISIONING) -> Replica:
        replica = Replica(self.next_replica_id, node, state)
        self.next_replica_id += 1
        self.replicas[replica.id] = replica
        self.nodes[node].replicas.add(replica.id)
        return replica

    def remove_replica(self, replica: Replica) -> None:
        del self.replicas[replica.id]
        self.nodes[replica.node].replicas.discard(replica.id)

    def ready(self) -> list[Replica]:
        return [r for r in self.replicas.values() if r.state == READY]

    def count(self, state: int) -> int:
        return sum(1 for r in self.replicas.values() if r.state == state)

    def snapshot(self) -> list[tuple[int, int, int, int]]:
        return [(r.id, r.node, r.state, r.in_flight) for r in self.replicas.values()]

    def select_replica(self) -> Replica | None:
        """Least in-flight ready replica; ties go to the lowest node id, then lowest replica id."""
        best = None
        limit = self.hard_limit
        for r in self.replicas.values():
            if r.state != READY or (limit and r.assigned >= limit):
                continue
            if best is None or (r.in_flight, r.node, r.id) < (best.in_flight, best.node, best.id):
                best = r
        return best

    def in_flight_total(self) -> int:
        return sum(r.in_flight for r in self.replicas.values())

import pytest

from edgesim import cluster as cl
from edgesim.network import HEADNODE, TESTER
from edgesim.scenario import AutoscalerConfig, FunctionSpec, TopologySpec
from edgesim.simulation import Simulation

from conftest import one_plan

HEAD_FIRST = TopologySpec(placement="headnode_first")
NO_INGRESS = TopologySpec(ingress_service_ms=0)


def audited(sim):
    """Wrap every handler so the conservation audit runs after each event."""
    for kind, handler in list(sim.kernel.handlers.items()):
        def wrapped(p, a, handler=handler):
            handler(p, a)
            sim.audit()
        sim.kernel.on(kind, wrapped)
    return sim


def count_sends(sim):
    sends = []
    original = sim.network.send

    def send(src, dst, *args, **kwargs):
        sends.append((src, dst))
        return original(src, dst, *args, **kwargs)

    sim.network.send = send
    return sends


def test_select_prefers_least_in_flight_even_on_worker():
    state = cl.ClusterState(2, cl.placement_order(2, "headnode_first"))
    head = state.add_replica(HEADNODE, cl.READY)
    worker = state.add_replica(1, cl.READY)
    head.in_flight, worker.in_flight = 5, 2
    assert state.select_replica() is worker


def test_select_ties_go_to_lowest_node_then_id():
    state = cl.ClusterState(2, [1, 2, 0])
    a = state.add_replica(2, cl.READY)
    b = state.add_replica(1, cl.READY)
    c = state.add_replica(1, cl.READY)
    assert state.select_replica() is b
    b.in_flight = 1
    assert state.select_replica() is c
    c.in_flight = 1
    assert state.select_replica() is a


def test_hard_limit_blocks_full_replicas():
    state = cl.ClusterState(1, [1, 0], hard_limit=2)
    r = state.add_replica(1, cl.READY)
    r.assigned = 2
    assert state.select_replica() is None


def test_placement_orders():
    assert cl.placement_order(2, "headnode_first") == [0, 1, 2]
    assert cl.placement_order(2, "workers_first") == [1, 2, 0]
    assert cl.placement_order(2, "workers_first", headnode_hosts_replicas=False) == [1, 2]
    with pytest.raises(cl.ScaleError):
        cl.placement_order(2, "random")


def test_scale_zero_to_one_headnode_first():
    assert cl.plan_scale(1, [], [0, 1, 2], 100) == ([0], [])


def test_scale_one_to_three_spreads():
    new, victims = cl.plan_scale(3, [(0, 0, cl.READY, 0)], [0, 1, 2], 100)
    assert sorted(new) == [1, 2] and victims == []


def test_scale_fixed_point():
    live = [(0, 0, cl.READY, 0), (1, 1, cl.READY, 3), (2, 2, cl.PROVISIONING, 0)]
    assert cl.plan_scale(3, live, [0, 1, 2], 100) == ([], [])


def test_scale_down_picks_idle_newest():
    live = [(0, 0, cl.READY, 4), (1, 1, cl.READY, 0), (2, 2, cl.READY, 0), (3, 1, cl.TERMINATING, 0)]
    assert cl.plan_scale(1, live, [0, 1, 2], 100) == ([], [2, 1])


def test_scale_bounds():
    with pytest.raises(cl.ScaleError):
        cl.plan_scale(101, [], [0], 100)


def test_headnode_serves_locally_without_intra_traffic():
    plan = one_plan(users=5, duration=20, topology=HEAD_FIRST)
    sim = Simulation(plan)
    sends = count_sends(sim)
    sim.run()
    assert all(r.served_by == 0 and sim.cluster.replicas[0].node == HEADNODE for r in sim.records)
    assert set(sends) <= {(TESTER, HEADNODE), (HEADNODE, TESTER)}


def test_scale_from_zero_buffers_until_cold_start():
    plan = one_plan(x=10, users=3, duration=5, topology=NO_INGRESS,
                    autoscaler=AutoscalerConfig(initial_replicas=0))
    sim = Simulation(plan)
    sim.run()
    first = sim.records[:3]
    # arrive at 10 ms, poke tick scales up at once, replica ready 800 ms later
    assert all(r.ingress_at == 10_000 for r in first)
    assert all(r.service_start_at == 10_000 + 800_000 for r in first)
    assert sim.timeline[:2] == [(0, 0), (810_000, 1)]


def test_serve_time_is_processing_plus_overhead():
    plan = one_plan(proc=64, duration=2)
    sim = Simulation(plan)
    sim.run()
    assert all(r.service_end_at - r.service_start_at == 66_000 for r in sim.records)


def test_zero_processing_costs_overhead_only():
    plan = one_plan(proc=0, duration=2)
    sim = Simulation(plan)
    sim.run()
    assert all(r.service_end_at - r.service_start_at == 2_000 for r in sim.records)


def test_multi_site_worker_path_is_four_traversals():
    plan = one_plan(kind="multi_site", x=25, duration=2, topology=NO_INGRESS,
                    function=FunctionSpec(base_overhead_ms=0))
    sim = Simulation(plan)
    sim.run()
    assert sim.cluster.replicas[0].node != HEADNODE
    assert {r.latency_us for r in sim.records} == {50_000}


def test_conservation_and_bounds_every_event():
    plan = one_plan(kind="multi_site", x=50, users=40, proc=8, duration=6, jitter=4, loss=0.02,
                    timeout_ms=500, autoscaler=AutoscalerConfig(initial_replicas=0, concurrency_target=5,
                                                                tick_interval_s=0.5))
    sim = audited(Simulation(plan))
    sim.run()
    assert all(r.outcome != cl.PENDING for r in sim.records)
    assert max(n for _, n in sim.timeline) <= plan.autoscaler.max_replicas


def test_terminating_replica_finishes_work_before_removal():
    plan = one_plan(users=300, proc=32, duration=60,
                    autoscaler=AutoscalerConfig(concurrency_target=20, stable_window_s=6))
    sim = Simulation(plan)
    sim.run()
    downs = [b for a, b in zip(sim.timeline, sim.timeline[1:]) if b[1] < a[1]]
    assert downs, "expected some scale-down once users stop"
    assert all(r.outcome == cl.SUCCESS for r in sim.records)

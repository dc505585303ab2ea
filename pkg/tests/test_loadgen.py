import pytest

from edgesim import cluster as cl
from edgesim.loadgen import (analytic_closed_loop_oracle, format_histogram, latency_histogram,
                             nearest_rank, summarize)
from edgesim.scenario import FunctionSpec, TopologySpec
from edgesim.simulation import Simulation

from conftest import one_plan

NO_INGRESS = TopologySpec(ingress_service_ms=0)
NO_OVERHEAD = FunctionSpec(base_overhead_ms=0)


def records_with(latencies_ms, timeouts=0, drops=0):
    recs = []
    for i, lat in enumerate(latencies_ms):
        r = cl.RequestRecord(i, 0, 0)
        r.outcome, r.completed_at = cl.SUCCESS, round(lat * 1000)
        r.ended_at = r.completed_at
        recs.append(r)
    for outcome, n in ((cl.TIMEOUT, timeouts), (cl.DROPPED, drops)):
        for _ in range(n):
            r = cl.RequestRecord(len(recs), 0, 0)
            r.outcome, r.ended_at = outcome, 20_000_000
            recs.append(r)
    return recs


def test_summarize_throughput():
    res = summarize(records_with([50.0] * 6000), one_plan())
    assert res.throughput_rps == 20.0
    assert res.successes == 6000


def test_summarize_empty():
    res = summarize(records_with([], timeouts=3), one_plan())
    assert res.throughput_rps == 0
    assert res.latency_p50_ms is res.latency_p95_ms is res.latency_p99_ms is None
    assert res.timeouts == 3


def test_summarize_singleton():
    res = summarize(records_with([115.0]), one_plan())
    assert res.latency_p50_ms == res.latency_p95_ms == res.latency_p99_ms == 115.0


def test_pending_requests_not_counted():
    recs = records_with([10.0])
    recs.append(cl.RequestRecord(1, 0, 0))
    assert summarize(recs, one_plan()).successes == 1


def test_nearest_rank():
    vals = list(range(1, 101))
    assert nearest_rank(vals, 50) == 50
    assert nearest_rank(vals, 95) == 95
    assert nearest_rank(vals, 99) == 99
    assert nearest_rank([3, 9], 50) == 3
    assert nearest_rank([], 50) is None


def test_histogram_buckets():
    hist = latency_histogram([0, 4_999, 5_000, 52_700])
    assert hist == [(0, 2), (5, 1), (50, 1)]
    assert format_histogram(hist) == "bucket_ms,count\n0,2\n5,1\n50,1\n"


@pytest.mark.parametrize("args, expected", [
    ((1, 50, 0, 0), 20.0),
    ((1, 50, 65, 0), 1000 / 115),
    ((50, 0, 64, 2), 50_000 / 66),
])
def test_oracle_examples(args, expected):
    assert analytic_closed_loop_oracle(*args) == pytest.approx(expected)
    assert round(analytic_closed_loop_oracle(1, 50, 65, 0), 2) == 8.70
    assert round(analytic_closed_loop_oracle(50, 0, 64, 2), 1) == 757.6


def test_oracle_rejects_zero_cycle():
    with pytest.raises(ValueError):
        analytic_closed_loop_oracle(1, 0, 0, 0)


def run(plan):
    sim = Simulation(plan)
    sim.run()
    return sim


def test_five_hundred_simultaneous_first_issues():
    sim = run(one_plan(users=500, duration=1))
    assert [r.issued_at for r in sim.records[:500]] == [0] * 500
    assert sorted(r.user for r in sim.records[:500]) == list(range(500))


def test_issues_every_cycle():
    sim = run(one_plan(x=25, duration=1, topology=NO_INGRESS, function=NO_OVERHEAD))
    assert [r.issued_at for r in sim.records[:4]] == [0, 50_000, 100_000, 150_000]


@pytest.mark.parametrize("x, issued, last_issue_us", [
    # cycle 299.9 ms: the 1000th response lands at 299.9 s, one more request goes out
    (148.6, 1001, 299_900_000),
    # cycle 300.1 ms: the 1000th response lands at 300.1 s, nothing more
    (148.7, 1000, 299_799_900),
])
def test_duration_boundary(x, issued, last_issue_us):
    sim = run(one_plan(x=x))
    assert len(sim.records) == issued
    assert sim.records[-1].issued_at == last_issue_us
    assert all(r.outcome == cl.SUCCESS for r in sim.records)


def test_late_responses_discarded():
    sim = run(one_plan(x=25, duration=1, timeout_ms=30))
    assert {r.outcome for r in sim.records} == {cl.TIMEOUT}
    assert [r.issued_at for r in sim.records[:3]] == [0, 30_000, 60_000]


def test_drop_recovers_through_timeout():
    sim = run(one_plan(x=25, duration=50, loss=1.0))
    assert {r.outcome for r in sim.records} == {cl.DROPPED}
    assert [r.issued_at for r in sim.records] == [0, 20_000_000, 40_000_000]


def test_one_user_one_outstanding():
    sim = Simulation(one_plan(x=10, duration=5, jitter=3, loss=0.05, timeout_ms=100))
    sim.start()
    while sim.kernel.peek_time() is not None and sim.kernel.now < sim.horizon_us:
        sim.kernel.run_until(min(sim.kernel.peek_time(), sim.horizon_us))
        assert sum(r.outcome == cl.PENDING for r in sim.records) <= 1

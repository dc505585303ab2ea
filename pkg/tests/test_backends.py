import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from edgesim import engine
from edgesim.kernel import trace_digest
from edgesim.scenario import AutoscalerConfig, FunctionSpec, TopologySpec

from conftest import one_plan

pytestmark = pytest.mark.skipif("compiled" not in engine.AVAILABLE,
                                reason="compiled extension not built")

CASES = {
    "single_1user": one_plan(duration=30),
    "single_50users_proc8": one_plan(users=50, proc=8, duration=30),
    "multi_jitter_loss": one_plan(kind="multi_site", x=50, users=50, proc=4, duration=30,
                                  jitter=3, loss=0.01, timeout_ms=2000),
    "scale_from_zero_hard_limit": one_plan(
        kind="multi_site", x=100, users=500, proc=2, duration=20,
        topology=TopologySpec(placement="headnode_first"),
        autoscaler=AutoscalerConfig(initial_replicas=0, hard_concurrency_limit=5)),
    "timeouts": one_plan(x=800, proc=64, duration=40, timeout_ms=500,
                         autoscaler=AutoscalerConfig(stable_window_s=6, scale_to_zero_grace_s=2)),
    "scale_down_under_load": one_plan(users=300, proc=32, duration=60,
                                      autoscaler=AutoscalerConfig(concurrency_target=20,
                                                                  stable_window_s=6)),
    "no_ingress_cost": one_plan(users=10, x=0, duration=10,
                                topology=TopologySpec(ingress_service_ms=0)),
}


def same(plan):
    a = engine.run_plan(plan, trace=True, backend="python")
    b = engine.run_plan(plan, trace=True, backend="compiled")
    assert a.result == b.result
    assert a.latencies_us == b.latencies_us
    assert a.timeline == b.timeline
    assert a.decisions == b.decisions
    assert a.events == b.events
    assert trace_digest(a.trace) == trace_digest(b.trace)
    return a, b


@pytest.mark.parametrize("name", sorted(CASES))
def test_identical_traces(name):
    a, b = same(CASES[name])
    assert (a.backend, b.backend) == ("python", "compiled")


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(kind=st.sampled_from(["single_site", "multi_site"]),
       x=st.sampled_from([0.0, 12.5, 25.0, 100.0]),
       users=st.integers(1, 80),
       proc=st.sampled_from([0.0, 1.0, 8.0, 64.0]),
       jitter=st.sampled_from([0.0, 2.0]),
       loss=st.sampled_from([0.0, 0.05]),
       initial=st.integers(0, 2),
       target=st.sampled_from([1.0, 10.0, 100.0]),
       seed=st.integers(0, 2**32))
def test_identical_on_random_plans(kind, x, users, proc, jitter, loss, initial, target, seed):
    plan = one_plan(kind=kind, x=x, users=users, proc=proc, duration=8, timeout_ms=1000,
                    jitter=jitter, loss=loss, seed=seed,
                    function=FunctionSpec(cold_start_ms=300),
                    autoscaler=AutoscalerConfig(initial_replicas=initial, concurrency_target=target,
                                                tick_interval_s=0.5, stable_window_s=4))
    same(plan)


def test_unknown_backend():
    with pytest.raises(ValueError):
        engine.run_plan(CASES["single_1user"], backend="gpu")

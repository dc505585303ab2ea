import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgesim.scenario import (AutoscalerConfig, FunctionSpec, ScenarioConfig, ScenarioSyntaxError,
                              ScenarioValidationError, TopologySpec, derive_delays, expand_grid,
                              format_scenario, mix_seed, ms_to_us, parse_scenario, with_overrides)


def test_parse_grid_and_topology():
    cfg = parse_scenario("grid.x_total_ms = 0,12.5,25\ntopology.kind = multi_site\n")
    assert cfg.delay_grid == (0.0, 12.5, 25.0)
    assert cfg.topology.kind == "multi_site"


def test_autoscaler_defaults_when_block_omitted():
    cfg = parse_scenario("grid.users = 1\n")
    a = cfg.autoscaler
    assert (a.max_replicas, a.hard_concurrency_limit) == (100, 0)
    assert a.target_utilization_pct == 70
    assert a.stable_window_s == 60
    assert a.panic_window_pct == 10
    assert a.panic_window_s == 6.0
    assert a.effective_target == 70.0


def test_loss_out_of_range():
    with pytest.raises(ScenarioValidationError, match="loss_prob out of range"):
        parse_scenario("network.loss_prob = 1.5\n")


def test_other_defaults():
    cfg = ScenarioConfig()
    assert cfg.function.base_overhead_ms == 2
    assert cfg.function.cold_start_ms == 800
    assert cfg.workload.request_timeout_ms == 20000
    assert cfg.autoscaler.tick_interval_s == 2
    assert cfg.autoscaler.scale_to_zero_grace_s == 30
    assert cfg.user_grid == (1, 50, 500)
    assert cfg.processing_grid[0] == 0


@pytest.mark.parametrize("text, line, column", [
    ("grid.users = 1\nbogus.key = 3\n", 2, 1),
    ("grid.users = 1\ngrid.users = 2\n", 2, 1),
    ("  grid.users\n", 1, 3),
    ("grid.users =\n", 1, 13),
    ("run.seed = abc\n", 1, 12),
])
def test_syntax_errors_carry_position(text, line, column):
    with pytest.raises(ScenarioSyntaxError) as info:
        parse_scenario(text)
    assert (info.value.line, info.value.column) == (line, column)


def test_comments_and_blank_lines_ignored():
    cfg = parse_scenario("# header\n\nrun.seed = 7  # trailing\n")
    assert cfg.seed == 7


def test_format_round_trip(default_config):
    again = parse_scenario(format_scenario(default_config))
    assert again == default_config


@pytest.mark.parametrize("bad", [
    dict(delay_grid=()),
    dict(delay_grid=(-1.0,)),
    dict(delay_grid=(float("nan"),)),
    dict(processing_grid=(0.0001,)),
    dict(user_grid=(0,)),
    dict(repetitions=0),
    dict(seed=-1),
    dict(jitter_ms=-1.0),
    dict(delay_grid=(0.0,), processing_grid=(0.0,), function=FunctionSpec(base_overhead_ms=0),
         topology=TopologySpec(ingress_service_ms=0)),
])
def test_validation_rejects(bad):
    with pytest.raises(ScenarioValidationError):
        ScenarioConfig(**bad)


def test_autoscaler_invariants():
    with pytest.raises(ScenarioValidationError):
        AutoscalerConfig(max_replicas=0)
    with pytest.raises(ScenarioValidationError):
        AutoscalerConfig(target_utilization_pct=0)
    with pytest.raises(ScenarioValidationError):
        AutoscalerConfig(panic_threshold_pct=99)


def test_ms_to_us_exact_halves():
    assert ms_to_us(6.25) == 6250
    with pytest.raises(ScenarioValidationError):
        ms_to_us(0.0005)


@pytest.mark.parametrize("x, kind, access, intra", [
    (25, "single_site", 25, 0),
    (25, "multi_site", 12.5, 12.5),
    (0, "multi_site", 0, 0),
])
def test_derive_delays_examples(x, kind, access, intra):
    d = derive_delays(x, kind)
    assert (d.access_delay_ms, d.intra_delay_ms) == (access, intra)


@given(st.floats(min_value=0, max_value=1e6, allow_nan=False), st.sampled_from(["single_site", "multi_site"]))
def test_derive_delays_invariants(x, kind):
    d = derive_delays(x, kind)
    assert d.access_delay_ms >= 0 and d.intra_delay_ms >= 0
    if kind == "single_site":
        assert d.intra_delay_ms == 0 and d.access_delay_ms == x
    else:
        assert d.access_delay_ms == d.intra_delay_ms == x / 2


def test_expand_grid_cardinality_small():
    cfg = ScenarioConfig(delay_grid=(0,), user_grid=(1,), processing_grid=(1, 2))
    assert len(expand_grid(cfg)) == 2


def test_expand_grid_default_is_192(default_config):
    plans = expand_grid(default_config)
    assert len(plans) == 192 == default_config.run_count
    assert [p.index for p in plans] == list(range(192))


def test_expand_grid_order_and_purity(default_config):
    a = expand_grid(default_config)
    b = expand_grid(default_config)
    assert a == b
    keys = [(p.delays.x_total_ms, p.workload.concurrent_users, p.function.processing_time_ms) for p in a]
    assert keys[:2] == [(0, 1, 0), (0, 1, 1)]
    assert keys[8] == (0, 50, 0)
    assert keys[24] == (12.5, 1, 0)


def test_repetitions_get_distinct_seeds():
    plans = expand_grid(ScenarioConfig(delay_grid=(0,), user_grid=(1,), processing_grid=(1,), repetitions=5))
    assert [p.repetition for p in plans] == [0, 1, 2, 3, 4]
    assert len({p.seed for p in plans}) == 5


def test_seed_mixing_distinct_for_a_million_indices():
    seen = {mix_seed(1, i) for i in range(1_000_000)}
    assert len(seen) == 1_000_000


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**40), st.integers(0, 2**40))
def test_seed_mixing_injective(seed, i, j):
    if i != j:
        assert mix_seed(seed, i) != mix_seed(seed, j)


def test_with_overrides_skips_none():
    cfg = ScenarioConfig()
    assert with_overrides(cfg, seed=None) is cfg
    assert with_overrides(cfg, seed=5, user_grid=(1,)).user_grid == (1,)

import dataclasses
import time
from pathlib import Path

import pytest
from hypothesis import settings

from edgesim.scenario import (AutoscalerConfig, FunctionSpec, ScenarioConfig, TopologySpec,
                              WorkloadSpec, expand_grid, parse_scenario)

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

REPO = Path(__file__).resolve().parent.parent
DEFAULT_SCENARIO = REPO / "scenarios" / "default.scn"

_criteria: list[tuple[int, bool, str]] = []


def report(number: int, ok: bool, detail: str) -> None:
    """Record one acceptance verdict; the terminal summary prints them all."""
    _criteria.append((number, ok, detail))
    print(f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_criteria, key=lambda c: c[0]):
        terminalreporter.write_line(f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}")


def one_plan(kind="single_site", x=25.0, users=1, proc=0.0, duration=300.0, timeout_ms=20000.0,
             seed=1, jitter=0.0, loss=0.0, topology=None, function=None, autoscaler=None):
    """First RunPlan of a one-point grid."""
    topo = topology or TopologySpec(kind=kind)
    topo = dataclasses.replace(topo, kind=kind)
    cfg = ScenarioConfig(
        topology=topo,
        delay_grid=(x,),
        processing_grid=(proc,),
        user_grid=(users,),
        function=function or FunctionSpec(),
        autoscaler=autoscaler or AutoscalerConfig(),
        workload=WorkloadSpec(duration_s=duration, request_timeout_ms=timeout_ms),
        jitter_ms=jitter,
        loss_prob=loss,
        seed=seed,
    )
    return expand_grid(cfg)[0]


@pytest.fixture(scope="session")
def default_config():
    return parse_scenario(DEFAULT_SCENARIO.read_text())


@pytest.fixture(scope="session")
def full_grid(default_config, tmp_path_factory):
    """The whole default grid for both topologies, run once per session."""
    from edgesim.runner import run_scenario

    out = tmp_path_factory.mktemp("full_grid")
    start = time.perf_counter()
    summary = run_scenario(default_config, out)
    elapsed = time.perf_counter() - start
    return {"dir": out, "rows": summary.rows, "elapsed_s": elapsed}

"""Time the pure-Python engine against the compiled one on a few grid points.

    python benchmarks/bench_backends.py [--repeat N]
"""

import argparse
import time

from edgesim.engine import AVAILABLE, run_plan
from edgesim.scenario import ScenarioConfig, TopologySpec, expand_grid

CASES = [
    # (topology, x_total_ms, users, processing_ms)
    ("single_site", 25, 1, 0),
    ("single_site", 0, 50, 8),
    ("multi_site", 100, 50, 4),
    ("single_site", 12.5, 500, 64),
    ("multi_site", 50, 500, 16),
]


def plan_for(kind, x, users, proc):
    cfg = ScenarioConfig(topology=TopologySpec(kind=kind), delay_grid=(x,),
                         user_grid=(users,), processing_grid=(proc,))
    return expand_grid(cfg)[0]


def best_of(plan, backend, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        start = time.perf_counter()
        out = run_plan(plan, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if "compiled" not in AVAILABLE:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    print(f"{'case':<36}{'events':>10}{'python s':>11}{'compiled s':>12}{'speedup':>9}")
    total_py = total_c = 0.0
    for kind, x, users, proc in CASES:
        plan = plan_for(kind, x, users, proc)
        t_py, out_py = best_of(plan, "python", args.repeat)
        t_c, out_c = best_of(plan, "compiled", args.repeat)
        # same seed, same model: the two engines must agree exactly
        assert out_py.result == out_c.result, (kind, x, users, proc)
        total_py += t_py
        total_c += t_c
        label = f"{kind} X={x:g} u={users} p={proc:g}"
        print(f"{label:<36}{out_c.events:>10}{t_py:>11.3f}{t_c:>12.3f}{t_py / t_c:>8.1f}x")
    print(f"{'total':<36}{'':>10}{total_py:>11.3f}{total_c:>12.3f}{total_py / total_c:>8.1f}x")


if __name__ == "__main__":
    main()

"""Grid execution, result files, comparisons and plot data."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .autoscaler import format_decisions
from .engine import BACKEND, run_plan
from .kernel import format_trace
from .loadgen import RunResult, format_histogram, latency_histogram
from .scenario import TOPOLOGIES, ScenarioConfig, expand_grid, format_scenario

RESULT_COLUMNS = (
    "topology", "x_total_ms", "access_delay_ms", "intra_delay_ms", "users", "processing_ms",
    "duration_s", "successes", "timeouts", "drops", "throughput_rps", "p50_ms", "p95_ms",
    "p99_ms", "max_ready_replicas", "seed",
)
AGGREGATE_COLUMNS = (
    "topology", "x_total_ms", "access_delay_ms", "intra_delay_ms", "users", "processing_ms",
    "runs", "throughput_mean", "throughput_stdev", "p50_mean_ms", "p95_mean_ms", "p99_mean_ms",
    "successes_mean", "timeouts_mean", "drops_mean",
)
COMPARE_COLUMNS = (
    "x_total_ms", "multi_x_total_ms", "access_delay_ms", "users", "processing_ms",
    "single_site_rps", "multi_site_rps", "ratio", "flag",
)


class RunnerError(RuntimeError):
    pass


class ResultsFormatError(RunnerError):
    pass


def fmt_num(value) -> str:
    """Stable text for numbers: whole floats lose the '.0', missing values are empty."""
    if value is None:
        return ""
    if isinstance(value, float):
        if value.is_integer():
            return str(int(value))
        return repr(value)
    return str(value)


def result_row(r: RunResult) -> list[str]:
    def ms(v):
        return "" if v is None else f"{v:.3f}"
    return [
        r.topology, fmt_num(r.x_total_ms), fmt_num(r.access_delay_ms), fmt_num(r.intra_delay_ms),
        str(r.users), fmt_num(r.processing_ms), fmt_num(r.duration_s), str(r.successes),
        str(r.timeouts), str(r.drops), f"{r.throughput_rps:.4f}", ms(r.latency_p50_ms),
        ms(r.latency_p95_ms), ms(r.latency_p99_ms), str(r.max_ready_replicas), str(r.seed),
    ]


def results_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in results:
        w.writerow(result_row(r))
    return buf.getvalue()


def results_json(results) -> str:
    rows = [dict(zip(RESULT_COLUMNS, result_row(r))) for r in results]
    return json.dumps(rows, indent=1) + "\n"


def aggregate(results) -> list[dict]:
    """Mean and sample stddev over repetitions, one row per grid point, plan order kept."""
    groups: dict[tuple, list[RunResult]] = {}
    for r in results:
        groups.setdefault((r.topology, r.x_total_ms, r.users, r.processing_ms), []).append(r)
    rows = []
    for runs in groups.values():
        first = runs[0]
        rps = [r.throughput_rps for r in runs]

        def mean_of(attr):
            vals = [getattr(r, attr) for r in runs if getattr(r, attr) is not None]
            return statistics.fmean(vals) if vals else None

        rows.append({
            "topology": first.topology,
            "x_total_ms": first.x_total_ms,
            "access_delay_ms": first.access_delay_ms,
            "intra_delay_ms": first.intra_delay_ms,
            "users": first.users,
            "processing_ms": first.processing_ms,
            "runs": len(runs),
            "throughput_mean": statistics.fmean(rps),
            "throughput_stdev": statistics.stdev(rps) if len(rps) > 1 else 0.0,
            "p50_mean_ms": mean_of("latency_p50_ms"),
            "p95_mean_ms": mean_of("latency_p95_ms"),
            "p99_mean_ms": mean_of("latency_p99_ms"),
            "successes_mean": mean_of("successes"),
            "timeouts_mean": mean_of("timeouts"),
            "drops_mean": mean_of("drops"),
        })
    return rows


def aggregate_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_COLUMNS)
    for row in rows:
        out = []
        for col in AGGREGATE_COLUMNS:
            v = row[col]
            out.append(f"{v:.4f}" if isinstance(v, float) and col not in
                       ("x_total_ms", "access_delay_ms", "intra_delay_ms", "processing_ms")
                       else fmt_num(v))
        w.writerow(out)
    return buf.getvalue()


def grid_hash(config: ScenarioConfig, topologies) -> str:
    text = format_scenario(config) + "topologies = " + ",".join(topologies) + "\n"
    return hashlib.sha256(text.encode()).hexdigest()


# --- execution ---------------------------------------------------------------

def _run_one(args):
    plan, trace = args
    return run_plan(plan, trace=trace)


def iter_outputs(plans, jobs: int = 1, trace: bool = False):
    """Yield RunOutputs in plan order. Runs share nothing, so a process pool is safe."""
    if jobs <= 1 or len(plans) <= 1:
        for plan in plans:
            yield run_plan(plan, trace=trace)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(_run_one, [(p, trace) for p in plans], chunksize=1)


def topology_config(config: ScenarioConfig, kind: str) -> ScenarioConfig:
    return dataclasses.replace(config, topology=dataclasses.replace(config.topology, kind=kind))


def run_grid(config: ScenarioConfig, jobs: int = 1) -> list[RunResult]:
    """Results for every plan of ``config`` in plan order (no files written)."""
    return [out.result for out in iter_outputs(expand_grid(config), jobs)]


@dataclass
class RunSummary:
    files: list
    rows: dict
    interrupted: bool = False


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _write_details(out_dir: Path, kind: str, out, trace: bool) -> None:
    d = out_dir / "runs" / kind
    d.mkdir(parents=True, exist_ok=True)
    stem = f"run{out.result.plan_index:04d}"
    _write(d / f"{stem}_histogram.csv", format_histogram(latency_histogram(out.latencies_us)))
    _write(d / f"{stem}_replicas.csv",
           "time_us,ready_replicas\n" + "".join(f"{t},{n}\n" for t, n in out.timeline))
    _write(d / f"{stem}_decisions.csv", format_decisions(out.decisions))
    if trace:
        _write(d / f"{stem}_trace.csv", "time_us,kind,payload_id\n" + format_trace(out.trace))


def run_scenario(config: ScenarioConfig, out_dir, topologies=TOPOLOGIES, jobs: int = 1,
                 fmt: str = "csv", trace: bool = False, details: bool = False,
                 progress=None) -> RunSummary:
    """Run every topology's grid and write result files; flushes what finished on Ctrl-C."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = RunSummary(files=[], rows={})
    manifest = {
        "tool": "edgesim",
        "version": __version__,
        "backend": BACKEND,
        "seed": config.seed,
        "topologies": list(topologies),
        "grid_hash": grid_hash(config, topologies),
        "runs_per_topology": config.run_count,
        "scenario": format_scenario(config),
        "started_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    try:
        for kind in topologies:
            results: list[RunResult] = []
            summary.rows[kind] = results
            plans = expand_grid(topology_config(config, kind))
            try:
                for out in iter_outputs(plans, jobs, trace):
                    results.append(out.result)
                    if details or trace:
                        _write_details(out_dir, kind, out, trace)
                    if progress:
                        progress(kind, len(results), len(plans))
            finally:
                summary.files += _flush(out_dir, kind, results, fmt)
    except KeyboardInterrupt:
        summary.interrupted = True
    manifest["complete"] = not summary.interrupted
    manifest["rows"] = {k: len(v) for k, v in summary.rows.items()}
    _write(out_dir / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    summary.files.append(out_dir / "manifest.json")
    return summary


def _flush(out_dir: Path, kind: str, results, fmt: str) -> list[Path]:
    files = [out_dir / f"results_{kind}.csv", out_dir / f"aggregate_{kind}.csv"]
    _write(files[0], results_csv(results))
    _write(files[1], aggregate_csv(aggregate(results)))
    if fmt == "json":
        files.append(out_dir / f"results_{kind}.json")
        _write(files[-1], results_json(results))
    return files


# --- reading results -----------------------------------------------------------

def read_results(path) -> list[dict]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ResultsFormatError(f"cannot read {path}: {exc}") from None
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in RESULT_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise ResultsFormatError(f"{path}: missing columns {', '.join(missing)}")
    rows = []
    for lineno, raw in enumerate(reader, start=2):
        try:
            rows.append({
                "topology": raw["topology"],
                "x_total_ms": float(raw["x_total_ms"]),
                "access_delay_ms": float(raw["access_delay_ms"]),
                "users": int(raw["users"]),
                "processing_ms": float(raw["processing_ms"]),
                "throughput_rps": float(raw["throughput_rps"]),
            })
        except (TypeError, ValueError) as exc:
            raise ResultsFormatError(f"{path}:{lineno}: {exc}") from None
    return rows


def _mean_rps(rows, key_fn) -> dict:
    acc: dict[tuple, list] = {}
    for row in rows:
        acc.setdefault(key_fn(row), []).append(row)
    return {k: (v[0], statistics.fmean(r["throughput_rps"] for r in v)) for k, v in acc.items()}


@dataclass(frozen=True)
class ComparisonRow:
    x_total_ms: float
    users: int
    processing_ms: float
    single_site_rps: float
    multi_site_rps: float
    ratio: float | None
    multi_x_total_ms: float
    access_delay_ms: float

    def __post_init__(self):
        if self.ratio is not None and not (self.ratio >= 0 and math.isfinite(self.ratio)):
            raise ValueError("ratio must be finite and >= 0")

    @property
    def flag(self) -> str:
        return "no-throughput" if self.ratio is None else ""


def make_row(single: dict, multi: dict, single_rps: float, multi_rps: float) -> ComparisonRow:
    ratio = multi_rps / single_rps if single_rps > 0 else None
    return ComparisonRow(single["x_total_ms"], single["users"], single["processing_ms"],
                         single_rps, multi_rps, ratio, multi["x_total_ms"], multi["access_delay_ms"])


def compare(single_rows, multi_rows, on: str = "x_total", warn=None) -> list[ComparisonRow]:
    """Join single- and multi-site results.

    ``on="x_total"`` pairs equal end-to-end delay and rejects mismatched grids.
    ``on="access"`` pairs equal client access delay (the multi-site run at
    X pairs with the single-site run at X/2); keys without a partner are
    reported through ``warn`` and skipped.
    """
    if on == "x_total":
        def key(r):
            return (r["x_total_ms"], r["users"], r["processing_ms"])
    elif on == "access":
        def key(r):
            return (r["access_delay_ms"], r["users"], r["processing_ms"])
    else:
        raise ValueError(f"unknown join {on!r}")
    single = _mean_rps(single_rows, key)
    multi = _mean_rps(multi_rows, key)
    only_single = sorted(set(single) - set(multi))
    only_multi = sorted(set(multi) - set(single))
    if on == "x_total" and (only_single or only_multi):
        lines = [f"  only in single-site: {k}" for k in only_single]
        lines += [f"  only in multi-site: {k}" for k in only_multi]
        raise RunnerError("result grids do not match:\n" + "\n".join(lines))
    if warn and (only_single or only_multi):
        warn(f"{len(only_single)} single-site and {len(only_multi)} multi-site keys have no partner")
    return [make_row(single[k][0], multi[k][0], single[k][1], multi[k][1])
            for k in sorted(set(single) & set(multi))]


def ratio_bands(rows) -> list[dict]:
    """Per-user-count min, mean and max ratio over rows that have one."""
    by_users: dict[int, list[float]] = {}
    for row in rows:
        if row.ratio is not None:
            by_users.setdefault(row.users, []).append(row.ratio)
    return [{"users": u, "n": len(v), "min": min(v), "mean": statistics.fmean(v), "max": max(v)}
            for u, v in sorted(by_users.items())]


def comparison_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARE_COLUMNS)
    for r in rows:
        w.writerow([fmt_num(r.x_total_ms), fmt_num(r.multi_x_total_ms), fmt_num(r.access_delay_ms),
                    r.users, fmt_num(r.processing_ms), f"{r.single_site_rps:.4f}",
                    f"{r.multi_site_rps:.4f}", "" if r.ratio is None else f"{r.ratio:.4f}", r.flag])
    return buf.getvalue()


def plotdata(rows, out_dir) -> list[Path]:
    """One file per (topology, users): processing_ms, then throughput per delay, ascending."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = _mean_rps(rows, lambda r: (r["topology"], r["users"], r["processing_ms"], r["x_total_ms"]))
    panels: dict[tuple, dict] = {}
    for (topo, users, proc, x), (_, rps) in cells.items():
        panels.setdefault((topo, users), {})[(proc, x)] = rps
    files = []
    for (topo, users), data in sorted(panels.items()):
        delays = sorted({x for _, x in data})
        procs = sorted({p for p, _ in data})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["processing_ms"] + [f"x_{fmt_num(x)}ms" for x in delays])
        for p in procs:
            w.writerow([fmt_num(p)] + [
                f"{data[(p, x)]:.4f}" if (p, x) in data else "" for x in delays])
        path = out_dir / f"throughput_{topo}_u{users}.csv"
        _write(path, buf.getvalue())
        files.append(path)
    return files

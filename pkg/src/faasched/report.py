"""Aggregation of simulation results into stable, comparable artifacts.

Three frozen on-disk schemas (the contract the plotting side consumes):

* ``tasks.csv``   -- task_id, arrival_us, first_run_us, completion_us,
                     demand_us, memory_mb, preemptions, exec_us, resp_us,
                     turn_us, cost_usd
* ``util.csv``    -- window_start_us, core_id, busy_fraction, group
* ``summary.json``-- aggregates, cost total, per-core counters, adaptation
                     series, config hash, censoring info

Censored tasks never appear in metrics or cost; they are counted.  Costs
stay Decimal end to end and serialize as strings, so a re-imported summary
reproduces the aggregates bit-exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path

from .core import MetricsRecord, SimTime, SimulatorError, percentile, task_metrics
from .cost import CostModel, invocation_cost
from .engine import SimulationResult

TASKS_COLUMNS = (
    "task_id", "arrival_us", "first_run_us", "completion_us", "demand_us",
    "memory_mb", "preemptions", "exec_us", "resp_us", "turn_us", "cost_usd",
)
UTIL_COLUMNS = ("window_start_us", "core_id", "busy_fraction", "group")

AGG_PERCENTILES = (50, 90, 99)


class ReportError(SimulatorError):
    pass


@dataclass
class RunReport:
    run_id: str
    policy: str
    config_hash: str
    workload_hash: str
    records: list[MetricsRecord]
    tasks: list  # completed tasks, same order as records
    aggregates: dict[str, dict[str, int]]
    total_cost_usd: Decimal
    per_core: list[dict]
    samples: list
    series: dict
    censored: int
    clock_end: SimTime


def config_hash(config: dict) -> str:
    """Canonical hash of a resolved configuration mapping."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _aggregate_metric(values: list[SimTime]) -> dict[str, int]:
    agg = {f"p{p}": percentile(values, p) for p in AGG_PERCENTILES}
    agg["max"] = max(values)
    return agg


def aggregate(result: SimulationResult, model: CostModel, *,
              run_id: str = "run", policy: str = "",
              cfg_hash: str = "", wl_hash: str = "") -> RunReport:
    """Per-task metrics and costs, rolled up with nearest-rank percentiles."""
    finished = sorted(result.finished_tasks(), key=lambda t: t.id)
    if not finished:
        raise ReportError("no completed tasks to aggregate")
    records = []
    total = Decimal(0)
    for task in finished:
        m = task_metrics(task)
        if m.turnaround != m.execution + m.response:
            raise ReportError(f"turnaround identity broken for task {task.id}")
        cost = invocation_cost(m.execution, task.memory_mb, model)
        records.append(MetricsRecord(task.id, m.execution, m.response,
                                     m.turnaround, cost))
        total += cost
    aggregates = {
        "execution": _aggregate_metric([r.execution for r in records]),
        "response": _aggregate_metric([r.response for r in records]),
        "turnaround": _aggregate_metric([r.turnaround for r in records]),
    }
    per_core = [
        {
            "core_id": c.id,
            "group": c.group,
            "busy_us": c.busy_us,
            "overhead_us": c.overhead_us,
            "slice_preemptions": c.slice_preemptions,
            "limit_preemptions": c.limit_preemptions,
        }
        for c in result.cores
    ]
    return RunReport(
        run_id=run_id,
        policy=policy,
        config_hash=cfg_hash,
        workload_hash=wl_hash,
        records=records,
        tasks=finished,
        aggregates=aggregates,
        total_cost_usd=total,
        per_core=per_core,
        samples=result.samples,
        series=result.series,
        censored=len(result.censored_ids),
        clock_end=result.clock_end,
    )


def compare(reports: list[RunReport]) -> list[dict]:
    """Cost and p99 table across runs of the same workload.

    Ratios are relative to the cheapest run.
    """
    if len(reports) < 2:
        raise ReportError("compare needs at least 2 reports")
    hashes = {r.workload_hash for r in reports}
    if len(hashes) != 1:
        raise ReportError(f"reports span different workloads: {sorted(hashes)}")
    cheapest = min(r.total_cost_usd for r in reports)
    rows = []
    for r in reports:
        ratio = (r.total_cost_usd / cheapest).quantize(Decimal("0.0001")) \
            if cheapest > 0 else Decimal(0)
        rows.append({
            "run_id": r.run_id,
            "policy": r.policy,
            "total_cost_usd": r.total_cost_usd,
            "p99_response_us": r.aggregates["response"]["p99"],
            "p99_execution_us": r.aggregates["execution"]["p99"],
            "p99_turnaround_us": r.aggregates["turnaround"]["p99"],
            "cost_ratio": ratio,
        })
    return rows


# -- exports -----------------------------------------------------------------


def write_tasks_csv(report: RunReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TASKS_COLUMNS)
        for task, rec in zip(report.tasks, report.records):
            writer.writerow((
                task.id, task.arrival, task.first_run, task.completion,
                task.demand, task.memory_mb, task.preemptions,
                rec.execution, rec.response, rec.turnaround, rec.cost_usd,
            ))


def write_util_csv(report: RunReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(UTIL_COLUMNS)
        for sample in report.samples:
            for cid in sorted(sample.busy_us):
                frac = sample.busy_us[cid] / sample.window_len
                writer.writerow((
                    sample.window_start, cid, f"{frac:.6f}", sample.groups[cid],
                ))


def summary_dict(report: RunReport) -> dict:
    return {
        "run_id": report.run_id,
        "policy": report.policy,
        "config_hash": report.config_hash,
        "workload_hash": report.workload_hash,
        "n_tasks": len(report.records),
        "censored": report.censored,
        "clock_end_us": report.clock_end,
        "total_cost_usd": str(report.total_cost_usd),
        "aggregates": report.aggregates,
        "per_core": report.per_core,
        "series": report.series,
    }


def write_summary_json(report: RunReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def export(report: RunReport, fmt: str, path) -> None:
    """csv -> tasks.csv + util.csv under a directory; json -> summary.json."""
    path = Path(path)
    if fmt == "csv":
        path.mkdir(parents=True, exist_ok=True)
        write_tasks_csv(report, path / "tasks.csv")
        write_util_csv(report, path / "util.csv")
    elif fmt == "json":
        if path.suffix:
            path.parent.mkdir(parents=True, exist_ok=True)
        else:
            path.mkdir(parents=True, exist_ok=True)
            path = path / "summary.json"
        write_summary_json(report, path)
    else:
        raise ReportError(f"unknown export format {fmt!r}")


# -- re-import (round-trip checks and downstream tooling) ---------------------


def read_tasks_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TASKS_COLUMNS:
            raise ReportError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            parsed = {k: int(v) for k, v in row.items() if k != "cost_usd"}
            parsed["cost_usd"] = Decimal(row["cost_usd"])
            rows.append(parsed)
    return rows


def recompute_aggregates(rows: list[dict]) -> tuple[dict, Decimal]:
    """Rebuild the summary aggregates from exported task rows."""
    if not rows:
        raise ReportError("no rows to recompute from")
    aggs = {
        "execution": _aggregate_metric([r["exec_us"] for r in rows]),
        "response": _aggregate_metric([r["resp_us"] for r in rows]),
        "turnaround": _aggregate_metric([r["turn_us"] for r in rows]),
    }
    total = sum((r["cost_usd"] for r in rows), Decimal(0))
    return aggs, total


def read_summary_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)

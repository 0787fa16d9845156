"""Experiment driver: generate workloads, run simulations, sweep grids.

Exit codes: 0 success, 2 configuration error, 3 run finished with censored
tasks, 4 I/O error.  Options may come from an INI config file (--config);
explicit command-line flags win over file values.  Relative output paths
resolve under $FAASCHED_OUTPUT_ROOT when it is set.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import click

from .adaptation import DurationWindow, RightsizeConfig
from .core import SimulatorError
from .cost import CostModel, default_cost_model
from .engine import Simulation
from .hybrid import HybridScheduler
from .policies import KNOWN_KINDS, PolicyConfig, make_scheduler
from .report import aggregate, config_hash, export, write_summary_json
from .workload import (
    WorkloadError,
    default_bucket_table,
    derive_iat,
    ingest_trace,
    load_bucket_table,
    read_workload,
    synthesize,
    tasks_from_workload,
    workload_hash,
    workload_stats,
    write_workload,
)

OUTPUT_ROOT_ENV = "FAASCHED_OUTPUT_ROOT"

EXIT_CONFIG = 2
EXIT_CENSORED = 3
EXIT_IO = 4


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one simulation run needs, fully resolved."""

    policy: str = "fifo"
    cores: int = 50
    fifo_cores: int | None = None
    cfs_cores: int | None = None
    slice_ms: float = 6.0
    min_granularity_ms: float = 0.75
    limit_ms: float | None = None
    ctx_overhead_us: int = 5
    deadline_offset_ms: float = 1000.0
    adapt_limit: str = "off"  # "off" or "pNN"
    window: int = 100
    rightsize: bool = False
    util_threshold: float = 0.20
    check_period_s: float = 1.0
    cooldown_s: float = 2.0
    min_group_size: int = 1
    monitor_ms: float = 100.0
    horizon_s: float | None = None

    def split(self) -> tuple[int, int]:
        f, c = self.fifo_cores, self.cfs_cores
        if f is None and c is None:
            f = self.cores // 2
        if f is None:
            f = self.cores - c
        if c is None:
            c = self.cores - f
        if f + c != self.cores:
            raise SimulatorError(
                f"fifo_cores + cfs_cores must equal cores: {f}+{c} != {self.cores}"
            )
        return f, c

    def policy_config(self) -> PolicyConfig:
        return PolicyConfig(
            kind=self.policy,
            slice_us=round(self.slice_ms * 1000),
            min_granularity_us=round(self.min_granularity_ms * 1000),
            preempt_limit_us=(round(self.limit_ms * 1000)
                              if self.limit_ms is not None else None),
            ctx_switch_overhead_us=self.ctx_overhead_us,
            deadline_offset_us=round(self.deadline_offset_ms * 1000),
        )

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def parse_adapt(value: str) -> float | None:
    """'p95' -> 95.0, 'off' -> None."""
    if value in ("off", "none", ""):
        return None
    if value.startswith("p"):
        try:
            p = float(value[1:])
        except ValueError:
            p = -1.0
        if 0 < p <= 100:
            return p
    raise SimulatorError(f"adapt_limit must be 'off' or pNN, got {value!r}")


def build_scheduler(cfg: ExperimentConfig):
    pc = cfg.policy_config()
    if cfg.policy != "hybrid":
        return make_scheduler(pc)
    fifo, _ = cfg.split()
    pct = parse_adapt(cfg.adapt_limit)
    window = DurationWindow(
        capacity=cfg.window,
        percentile_p=pct if pct is not None else 90.0,
        initial_limit=(round(cfg.limit_ms * 1000)
                       if cfg.limit_ms is not None else DurationWindow().initial_limit),
    )
    rightsize = None
    if cfg.rightsize:
        rightsize = RightsizeConfig(
            util_threshold=cfg.util_threshold,
            check_period=round(cfg.check_period_s * 1_000_000),
            cooldown=round(cfg.cooldown_s * 1_000_000),
            min_group_size=cfg.min_group_size,
        )
    return HybridScheduler(pc, fifo_cores=fifo, window=window,
                           rightsize=rightsize, adapt_limit=pct is not None)


def run_experiment(workload_path, cfg: ExperimentConfig, model: CostModel,
                   out_dir: Path, run_id: str):
    """Run one simulation and write the three artifacts; returns the report."""
    spec = read_workload(workload_path)
    tasks = tasks_from_workload(spec)
    sim = Simulation(
        tasks,
        build_scheduler(cfg),
        n_cores=cfg.cores,
        monitor_period=round(cfg.monitor_ms * 1000),
        horizon=round(cfg.horizon_s * 1_000_000) if cfg.horizon_s else None,
    )
    result = sim.run()
    cfg_hash = config_hash(cfg.as_dict())
    report = aggregate(result, model, run_id=run_id, policy=cfg.policy,
                       cfg_hash=cfg_hash, wl_hash=workload_hash(spec))
    out_dir.mkdir(parents=True, exist_ok=True)
    export(report, "csv", out_dir)
    summary = out_dir / "summary.json"
    write_summary_json(report, summary)
    # the summary also records the resolved config for reproducibility
    data = json.loads(summary.read_text())
    data["config"] = cfg.as_dict()
    summary.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return report


def _output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "."))

def _resolve(path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else _output_root() / p


def _apply_config_file(ctx: click.Context, config_path: str | None) -> None:
    """INI values fill in any option the user did not pass explicitly."""
    if not config_path:
        return
    parser = configparser.ConfigParser()
    read = parser.read(config_path)
    if not read:
        raise SimulatorError(f"config file {config_path} not found")
    flat = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            flat[key.replace("-", "_")] = value
    for param in ctx.command.params:
        name = param.name
        if name in ("config",) or name not in flat:
            continue
        if ctx.get_parameter_source(name) == click.core.ParameterSource.COMMANDLINE:
            continue
        ctx.params[name] = param.type.convert(flat[name], param, ctx)


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main() -> None:
    """Serverless scheduling simulator and experiment toolkit."""


# -- gen ----------------------------------------------------------------------


@main.command()
@click.option("--synthetic", "mode", flag_value="synthetic", default=True,
              help="Generate a synthetic workload (default).")
@click.option("--trace", "mode", flag_value="trace",
              help="Derive the workload from trace CSVs.")
@click.option("--n", default=12442, show_default=True, help="Task count (synthetic).")
@click.option("--seed", default=0, show_default=True)
@click.option("--short-fraction", default=0.8, show_default=True)
@click.option("--burstiness", default=3.0, show_default=True)
@click.option("--span-s", default=120.0, show_default=True,
              help="Arrival span in seconds (synthetic).")
@click.option("--tail-shape", default=2.5, show_default=True)
@click.option("--durations", type=click.Path(), default=None,
              help="Trace: per-function average duration CSV.")
@click.option("--invocations", type=click.Path(), default=None,
              help="Trace: per-function per-minute invocation CSV.")
@click.option("--buckets", type=click.Path(), default=None,
              help="Calibration bucket table CSV (default: bundled).")
@click.option("--scale", default=100, show_default=True,
              help="Trace: downscale factor for invocation counts.")
@click.option("--minutes", default="0..2", show_default=True,
              help="Trace: minute range start..stop.")
@click.option("--out", default="workload.csv", show_default=True)
@click.option("--config", type=click.Path(), default=None,
              help="INI file providing defaults for any option.")
@click.pass_context
def gen(ctx, mode, n, seed, short_fraction, burstiness, span_s, tail_shape,
        durations, invocations, buckets, scale, minutes, out, config):
    """Write a workload file plus a .stats.json representativeness sidecar."""
    try:
        _apply_config_file(ctx, config)
        p = ctx.params
        out_path = _resolve(p["out"])
        if p["mode"] == "trace":
            if not p["durations"] or not p["invocations"]:
                raise SimulatorError("--trace needs --durations and --invocations")
            bucket_table = (load_bucket_table(p["buckets"]) if p["buckets"]
                            else default_bucket_table())
            trace = ingest_trace(p["durations"], p["invocations"], bucket_table)
            start, _, stop = p["minutes"].partition("..")
            spec = derive_iat(trace, p["scale"], range(int(start), int(stop)),
                              seed=p["seed"])
        else:
            spec = synthesize(
                p["n"], short_fraction=p["short_fraction"],
                burstiness=p["burstiness"],
                span_us=round(p["span_s"] * 1_000_000),
                tail_shape=p["tail_shape"], seed=p["seed"],
            )
        out_path.parent.mkdir(parents=True, exist_ok=True)
        write_workload(spec, out_path)
        stats_path = out_path.with_suffix(out_path.suffix + ".stats.json")
        stats_path.write_text(json.dumps(workload_stats(spec), indent=2,
                                         sort_keys=True) + "\n")
        click.echo(f"wrote {out_path} ({len(spec)} tasks, hash {workload_hash(spec)[:12]})")
        click.echo(f"wrote {stats_path}")
    except (SimulatorError, ValueError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))


# -- sim ----------------------------------------------------------------------

def _experiment_options(fn):
    opts = [
        click.option("--policy", type=click.Choice(KNOWN_KINDS), default="fifo",
                     show_default=True),
        click.option("--cores", default=50, show_default=True),
        click.option("--fifo-cores", type=int, default=None),
        click.option("--cfs-cores", type=int, default=None),
        click.option("--slice-ms", default=6.0, show_default=True),
        click.option("--min-granularity-ms", default=0.75, show_default=True),
        click.option("--limit-ms", type=float, default=None,
                     help="Preemption time limit (fifo_preempt; hybrid fixed/initial)."),
        click.option("--ctx-overhead-us", default=5, show_default=True),
        click.option("--deadline-offset-ms", default=1000.0, show_default=True),
        click.option("--adapt-limit", default="off", show_default=True,
                     help="'pNN' percentile adaptation, or 'off'."),
        click.option("--window", default=100, show_default=True,
                     help="Duration window capacity for adaptation."),
        click.option("--rightsize/--no-rightsize", default=False, show_default=True),
        click.option("--util-threshold", default=0.20, show_default=True),
        click.option("--check-period-s", default=1.0, show_default=True),
        click.option("--cooldown-s", default=2.0, show_default=True),
        click.option("--min-group-size", default=1, show_default=True),
        click.option("--monitor-ms", default=100.0, show_default=True),
        click.option("--horizon-s", type=float, default=None),
        click.option("--cost-table", type=click.Path(), default=None),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


_CFG_FIELDS = tuple(f.name for f in dataclasses.fields(ExperimentConfig))


def _config_from_params(p: dict) -> ExperimentConfig:
    return ExperimentConfig(**{k: p[k] for k in _CFG_FIELDS if k in p})


def _load_model(path: str | None) -> CostModel:
    return CostModel.load(path) if path else default_cost_model()


@main.command()
@click.option("--workload", type=click.Path(), required=True)
@_experiment_options
@click.option("--out", default="run", show_default=True, help="Output directory.")
@click.option("--run-id", default=None, help="Label in artifacts (default: policy).")
@click.option("--config", type=click.Path(), default=None,
              help="INI file providing defaults for any option.")
@click.pass_context
def sim(ctx, **_kwargs):
    """Run one simulation; writes tasks.csv, util.csv, summary.json."""
    try:
        _apply_config_file(ctx, ctx.params["config"])
        p = ctx.params
        cfg = _config_from_params(p)
        if cfg.policy == "hybrid":
            cfg.split()  # validates fifo + cfs == cores before running
        model = _load_model(p["cost_table"])
        out_dir = _resolve(p["out"])
        run_id = p["run_id"] or cfg.policy
        report = run_experiment(p["workload"], cfg, model, out_dir, run_id)
        click.echo(f"run {run_id}: config {report.config_hash} "
                   f"workload {report.workload_hash[:12]}")
        click.echo(f"  tasks {len(report.records)}  censored {report.censored}  "
                   f"cost {report.total_cost_usd}")
        agg = report.aggregates
        click.echo(f"  p99 exec {agg['execution']['p99']}us  "
                   f"p99 resp {agg['response']['p99']}us  "
                   f"p99 turn {agg['turnaround']['p99']}us")
        click.echo(f"  artifacts in {out_dir}")
        if report.censored:
            _fail(EXIT_CENSORED, f"{report.censored} tasks censored at horizon")
    except (SimulatorError, ValueError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))


# -- sweep ----------------------------------------------------------------------


def _sweep_point(payload: dict) -> dict:
    """Worker for one grid point; runs in its own process when --jobs > 1."""
    cfg = ExperimentConfig(**payload["cfg"])
    model = _load_model(payload["cost_table"])
    report = run_experiment(payload["workload"], cfg, model,
                            Path(payload["out_dir"]), payload["run_id"])
    return {
        "run_id": report.run_id,
        "policy": report.policy,
        "total_cost_usd": str(report.total_cost_usd),
        "p99_response_us": report.aggregates["response"]["p99"],
        "p99_execution_us": report.aggregates["execution"]["p99"],
        "p99_turnaround_us": report.aggregates["turnaround"]["p99"],
        "p50_execution_us": report.aggregates["execution"]["p50"],
        "censored": report.censored,
        "workload_hash": report.workload_hash,
    }


OBJECTIVES = ("total_cost_usd", "p99_response_us", "p99_execution_us",
              "p99_turnaround_us")


@main.command()
@click.option("--workload", type=click.Path(), required=True)
@_experiment_options
@click.option("--policies", default=None,
              help="Comma list of policy kinds to sweep.")
@click.option("--fifo-cores-list", default=None,
              help="Comma list of FIFO group sizes (hybrid points).")
@click.option("--percentiles", default=None,
              help="Comma list of adaptation percentiles (hybrid points).")
@click.option("--objective", type=click.Choice(OBJECTIVES),
              default="p99_turnaround_us", show_default=True)
@click.option("--jobs", default=1, show_default=True)
@click.option("--out", default="sweep", show_default=True)
@click.option("--config", type=click.Path(), default=None)
@click.pass_context
def sweep(ctx, **_kwargs):
    """Run a grid of simulations and emit a comparison table."""
    try:
        _apply_config_file(ctx, ctx.params["config"])
        p = ctx.params
        base = _config_from_params(p)
        points: list[tuple[str, ExperimentConfig]] = []
        policies = (p["policies"].split(",") if p["policies"] else [base.policy])
        for kind in policies:
            kind = kind.strip()
            if kind not in KNOWN_KINDS:
                raise SimulatorError(f"unknown policy {kind!r} in --policies")
            if kind != "hybrid":
                points.append((kind, dataclasses.replace(base, policy=kind)))
                continue
            splits = ([int(x) for x in p["fifo_cores_list"].split(",")]
                      if p["fifo_cores_list"] else [None])
            pcts = (p["percentiles"].split(",") if p["percentiles"] else [None])
            for f in splits:
                for pct in pcts:
                    cfg = dataclasses.replace(
                        base, policy="hybrid", fifo_cores=f,
                        cfs_cores=(base.cores - f) if f is not None else None,
                        adapt_limit=f"p{pct.strip()}" if pct else base.adapt_limit,
                    )
                    label = "hybrid"
                    if f is not None:
                        label += f"-f{f}"
                    if pct:
                        label += f"-p{pct.strip()}"
                    points.append((label, cfg))
        if not points:
            raise SimulatorError("sweep grid is empty")
        out_dir = _resolve(p["out"])
        out_dir.mkdir(parents=True, exist_ok=True)
        payloads = [
            {
                "cfg": cfg.as_dict(),
                "workload": p["workload"],
                "cost_table": p["cost_table"],
                "out_dir": str(out_dir / label),
                "run_id": label,
            }
            for label, cfg in points
        ]
        if p["jobs"] > 1:
            with ProcessPoolExecutor(max_workers=p["jobs"]) as pool:
                rows = list(pool.map(_sweep_point, payloads))
        else:
            rows = [_sweep_point(pl) for pl in payloads]
        rows.sort(key=lambda r: r["run_id"])
        hashes = {r["workload_hash"] for r in rows}
        if len(hashes) != 1:
            raise SimulatorError("sweep points disagree on workload hash")
        table_path = out_dir / "comparison.csv"
        cols = ("run_id", "policy", "total_cost_usd", "p99_response_us",
                "p99_execution_us", "p99_turnaround_us", "p50_execution_us",
                "censored")
        with open(table_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for row in rows:
                writer.writerow([row[c] for c in cols])
        best = min(rows, key=lambda r: (float(r[p["objective"]]), r["run_id"]))
        click.echo(f"wrote {table_path} ({len(rows)} points)")
        click.echo(f"best by {p['objective']}: {best['run_id']} "
                   f"({best[p['objective']]})")
    except (SimulatorError, ValueError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))


if __name__ == "__main__":
    main()

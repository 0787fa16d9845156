"""End-to-end command behavior: artifacts, exit codes, config layering."""

import json

from click.testing import CliRunner

from faasched.cli import EXIT_CENSORED, EXIT_CONFIG, EXIT_IO, main
from faasched.workload import read_workload, synthesize, write_workload


def make_workload(tmp_path, n=30, seed=2, name="w.csv"):
    spec = synthesize(n, seed=seed, span_us=2_000_000, short_fraction=0.9,
                      short_range=(5_000, 50_000),
                      tail_range=(1_000_000, 2_000_000))
    path = tmp_path / name
    write_workload(spec, path)
    return path


def invoke(args, env=None):
    return CliRunner().invoke(main, args, env=env, catch_exceptions=False)


# -- gen -----------------------------------------------------------------


def test_gen_writes_identical_bytes_for_the_same_seed(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        result = invoke(["gen", "--n", "50", "--seed", "3", "--out", str(path)])
        assert result.exit_code == 0, result.output
        assert "50 tasks" in result.output
    assert a.read_bytes() == b.read_bytes()
    stats = json.loads((tmp_path / "a.csv.stats.json").read_text())
    assert stats["n"] == 50
    assert stats["span_us"] == 120_000_000


def test_gen_trace_mode_uses_the_ingestion_pipeline(tmp_path):
    dur = tmp_path / "d.csv"
    dur.write_text("HashFunction,Average\nf1,100\nf2,400\n")
    inv = tmp_path / "i.csv"
    inv.write_text("HashFunction,1\nf1,4\nf2,2\n")
    out = tmp_path / "trace.csv"
    result = invoke(["gen", "--trace", "--durations", str(dur),
                     "--invocations", str(inv), "--scale", "1",
                     "--minutes", "0..1", "--out", str(out)])
    assert result.exit_code == 0, result.output
    spec = read_workload(out)
    assert spec.source == "trace"
    assert len(spec) == 6
    assert sorted({e.demand_us for e in spec.entries}) == [100_000, 420_000]


def test_gen_trace_mode_requires_both_inputs(tmp_path):
    result = invoke(["gen", "--trace", "--out", str(tmp_path / "x.csv")])
    assert result.exit_code == EXIT_CONFIG
    assert "needs --durations" in result.stderr


def test_gen_rejects_bad_parameters(tmp_path):
    result = invoke(["gen", "--n", "0", "--out", str(tmp_path / "x.csv")])
    assert result.exit_code == EXIT_CONFIG
    assert "error:" in result.stderr


# -- sim ---------------------------------------------------------------------


def test_sim_writes_the_three_artifacts(tmp_path):
    workload = make_workload(tmp_path)
    out = tmp_path / "run"
    result = invoke(["sim", "--workload", str(workload), "--policy", "fifo",
                     "--cores", "2", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "run fifo: config" in result.output
    for name in ("tasks.csv", "util.csv", "summary.json"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_tasks"] == 30
    assert summary["censored"] == 0
    assert summary["config"]["policy"] == "fifo"
    assert summary["config"]["cores"] == 2


def test_sim_run_id_flag_labels_the_artifacts(tmp_path):
    workload = make_workload(tmp_path)
    out = tmp_path / "run"
    result = invoke(["sim", "--workload", str(workload), "--cores", "2",
                     "--out", str(out), "--run-id", "baseline-a"])
    assert result.exit_code == 0
    assert "run baseline-a:" in result.output
    assert json.loads((out / "summary.json").read_text())["run_id"] == "baseline-a"


def test_sim_exits_3_when_the_horizon_censors_tasks(tmp_path):
    workload = make_workload(tmp_path)
    out = tmp_path / "run"
    result = invoke(["sim", "--workload", str(workload), "--cores", "2",
                     "--horizon-s", "0.5", "--out", str(out)])
    assert result.exit_code == EXIT_CENSORED
    assert "censored at horizon" in result.stderr
    # artifacts for the completed part still land
    assert (out / "summary.json").exists()
    assert json.loads((out / "summary.json").read_text())["censored"] > 0


def test_sim_exits_2_on_configuration_errors(tmp_path):
    workload = make_workload(tmp_path)
    missing_limit = invoke(["sim", "--workload", str(workload),
                            "--policy", "fifo_preempt", "--cores", "2",
                            "--out", str(tmp_path / "r1")])
    assert missing_limit.exit_code == EXIT_CONFIG

    bad_split = invoke(["sim", "--workload", str(workload), "--policy", "hybrid",
                        "--cores", "4", "--fifo-cores", "1", "--cfs-cores", "2",
                        "--out", str(tmp_path / "r2")])
    assert bad_split.exit_code == EXIT_CONFIG
    assert "must equal cores" in bad_split.stderr


def test_sim_exits_4_when_the_workload_is_unreadable(tmp_path):
    result = invoke(["sim", "--workload", str(tmp_path / "nope.csv"),
                     "--cores", "2", "--out", str(tmp_path / "r")])
    assert result.exit_code == EXIT_IO


def test_config_file_fills_gaps_but_flags_win(tmp_path):
    workload = make_workload(tmp_path)
    ini = tmp_path / "exp.ini"
    ini.write_text("[experiment]\npolicy = rr\ncores = 3\nmonitor-ms = 50\n")
    out = tmp_path / "run"
    result = invoke(["sim", "--workload", str(workload), "--config", str(ini),
                     "--cores", "2", "--out", str(out)])
    assert result.exit_code == 0, result.output
    config = json.loads((out / "summary.json").read_text())["config"]
    assert config["policy"] == "rr"      # from the file
    assert config["cores"] == 2          # explicit flag beats the file
    assert config["monitor_ms"] == 50.0


def test_relative_outputs_resolve_under_the_output_root(tmp_path):
    workload = make_workload(tmp_path)
    root = tmp_path / "artifacts"
    result = invoke(["sim", "--workload", str(workload), "--cores", "2",
                     "--out", "exp1/run"],
                    env={"FAASCHED_OUTPUT_ROOT": str(root)})
    assert result.exit_code == 0, result.output
    assert (root / "exp1" / "run" / "summary.json").exists()


# -- sweep ---------------------------------------------------------------------


def test_sweep_runs_the_grid_and_reports_the_best(tmp_path):
    workload = make_workload(tmp_path)
    out = tmp_path / "sweep"
    result = invoke(["sweep", "--workload", str(workload), "--cores", "2",
                     "--policies", "fifo,rr", "--out", str(out)])
    assert result.exit_code == 0, result.output
    lines = (out / "comparison.csv").read_text().splitlines()
    assert lines[0] == ("run_id,policy,total_cost_usd,p99_response_us,"
                        "p99_execution_us,p99_turnaround_us,p50_execution_us,"
                        "censored")
    assert [line.split(",")[0] for line in lines[1:]] == ["fifo", "rr"]
    assert (out / "fifo" / "tasks.csv").exists()
    assert (out / "rr" / "tasks.csv").exists()
    assert "best by p99_turnaround_us:" in result.output


def test_sweep_expands_hybrid_grid_points(tmp_path):
    workload = make_workload(tmp_path)
    out = tmp_path / "sweep"
    result = invoke(["sweep", "--workload", str(workload), "--cores", "4",
                     "--policies", "hybrid", "--fifo-cores-list", "1,2",
                     "--percentiles", "50", "--limit-ms", "25",
                     "--out", str(out), "--jobs", "2"])
    assert result.exit_code == 0, result.output
    lines = (out / "comparison.csv").read_text().splitlines()
    assert [line.split(",")[0] for line in lines[1:]] == [
        "hybrid-f1-p50", "hybrid-f2-p50"]
    cfg = json.loads((out / "hybrid-f2-p50" / "summary.json").read_text())["config"]
    assert cfg["fifo_cores"] == 2 and cfg["cfs_cores"] == 2
    assert cfg["adapt_limit"] == "p50"


def test_sweep_rejects_unknown_policies(tmp_path):
    workload = make_workload(tmp_path)
    result = invoke(["sweep", "--workload", str(workload),
                     "--policies", "fifo,warp", "--out", str(tmp_path / "s")])
    assert result.exit_code == EXIT_CONFIG
    assert "unknown policy 'warp'" in result.stderr

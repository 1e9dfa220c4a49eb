import csv
import io
import json

import pytest
from click.testing import CliRunner

from riskscope.cli import main
from riskscope.fixtures import PATIENT_SCHEMA, patient_count_query, patient_csv
from riskscope.reports import canonical_json


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def patient_files(tmp_path):
    data = tmp_path / "patient.csv"
    data.write_text(patient_csv())
    schema = tmp_path / "patient.schema.json"
    schema.write_text(json.dumps(PATIENT_SCHEMA.to_json()))
    query = tmp_path / "query.json"
    query.write_text(json.dumps(patient_count_query().to_json()))
    return {"data": str(data), "schema": str(schema), "query": str(query)}


def invoke(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    return result


def test_analyze_patient_contains_expected_ratios(runner, patient_files):
    result = invoke(
        runner,
        ["analyze", "--data", patient_files["data"], "--schema", patient_files["schema"],
         "--query", patient_files["query"]],
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["report_version"] == 1
    ratios = {row["epsilon"]: row["ratio"] for row in report["rows"]}
    assert ratios[1.0] == pytest.approx(0.5, abs=1e-12)
    assert ratios[0.1] == pytest.approx(10 / 11, abs=1e-12)
    assert ratios[0.01] == pytest.approx(100 / 101, abs=1e-12)
    assert len(report["candidates"]) == 37


def test_analyze_gaussian_profiles(runner, patient_files):
    result = invoke(
        runner,
        ["analyze", "--data", patient_files["data"], "--schema", patient_files["schema"],
         "--query", patient_files["query"], "--mechanism", "gaussian", "--delta", "1e-5"],
    )
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["mechanism"] == {"family": "gaussian", "delta": 1e-5}
    import math

    sigma2 = 2 * math.log(1.25 / 1e-5)
    row = {r["epsilon"]: r for r in report["rows"]}[1.0]
    assert row["rdr_min"] == pytest.approx(math.sqrt(sigma2), rel=1e-12)
    assert row["rdr_max"] == pytest.approx(math.sqrt(1 + sigma2), rel=1e-12)


def test_analyze_missing_bounds_exits_3(runner, tmp_path):
    schema = {"columns": [{"name": "v", "kind": "integer"}]}
    data = tmp_path / "d.csv"
    data.write_text("v\n1\n2\n")
    schema_path = tmp_path / "s.json"
    schema_path.write_text(json.dumps(schema))
    query_path = tmp_path / "q.json"
    query_path.write_text(json.dumps({"kind": "sum", "target": "v"}))
    result = runner.invoke(
        main,
        ["analyze", "--data", str(data), "--schema", str(schema_path),
         "--query", str(query_path)],
    )
    assert result.exit_code == 3
    assert "bounds" in result.output


def test_usage_error_exits_2(runner):
    result = runner.invoke(main, ["analyze"])  # missing required options
    assert result.exit_code == 2


def test_find_eps_selects_expected_epsilon(runner, patient_files, tmp_path):
    grid = tmp_path / "grid.json"
    grid.write_text("[1, 0.1, 0.01]")
    result = invoke(
        runner,
        ["find-eps", "--data", patient_files["data"], "--schema", patient_files["schema"],
         "--query", patient_files["query"], "--grid", str(grid), "--tau-p", "0.9",
         "--seed", "42"],
    )
    assert result.exit_code == 0, result.output
    decision = json.loads(result.output)
    assert decision["status"] == "found"
    assert decision["chosen_epsilon"] == 0.1
    assert decision["epsilon_released"] is False
    assert decision["charged_eps"] == "0.1"


def test_find_eps_byte_identical_across_invocations(runner, patient_files):
    args = ["find-eps", "--data", patient_files["data"], "--schema",
            patient_files["schema"], "--query", patient_files["query"],
            "--algorithm", "svt", "--eps-svt", "1.0", "--tau-var", "0.25",
            "--seed", "1234"]
    first = invoke(runner, args).output
    second = invoke(runner, args).output
    assert first == second
    assert json.loads(first)["epsilon_released"] is True


def test_find_eps_exhausted_grid_exits_0(runner, patient_files):
    result = invoke(
        runner,
        ["find-eps", "--data", patient_files["data"], "--schema", patient_files["schema"],
         "--query", patient_files["query"], "--tau-p", "1.0"],
    )
    assert result.exit_code == 0
    decision = json.loads(result.output)
    assert decision["status"] == "no_suitable_epsilon"
    assert decision["chosen_epsilon"] is None


def test_tau_p_sweep_monotone_via_cli(runner, patient_files):
    chosen = []
    for tau in ("0.95", "0.75", "0.5", "0.25", "0.05"):
        result = invoke(
            runner,
            ["find-eps", "--data", patient_files["data"], "--schema",
             patient_files["schema"], "--query", patient_files["query"],
             "--tau-p", tau, "--seed", "1"],
        )
        decision = json.loads(result.output)
        chosen.append(decision["chosen_epsilon"] or 0.0)
    assert chosen == sorted(chosen)  # smaller tau_p never picks smaller epsilon


def test_session_replay_tracks_budget(runner, patient_files, tmp_path):
    script = [
        {"id": "q-1", "query": patient_count_query().to_json(),
         "preference": {"tau_p": 0.9}, "seed": 1},
        {"id": "q-2", "query": patient_count_query().to_json(),
         "preference": {"tau_p": 0.9}, "seed": 2},
    ]
    script_path = tmp_path / "script.json"
    script_path.write_text(json.dumps(script))
    grid = tmp_path / "grid.json"
    grid.write_text("[1, 0.1, 0.01]")
    journal = tmp_path / "journal.jsonl"
    result = invoke(
        runner,
        ["session", "replay", "--data", patient_files["data"], "--schema",
         patient_files["schema"], "--script", str(script_path), "--journal",
         str(journal), "--grid", str(grid)],
    )
    assert result.exit_code == 0, result.output
    doc = json.loads(result.output)
    assert [d["status"] for d in doc["decisions"]] == ["answered", "rejected"]
    assert doc["odometer"]["eps_c"] == "0.1"

    shown = invoke(runner, ["odometer", "show", "--journal", str(journal)])
    odo = json.loads(shown.output)
    assert odo["eps_c"] == "0.1"
    assert odo["comp_bound"] == "0.1"
    assert len(odo["entries"]) == 1


def test_fixtures_gen_writes_expected_files(runner, tmp_path):
    out = tmp_path / "fx"
    result = invoke(runner, ["fixtures", "gen", "--out", str(out), "--sizes", "100"])
    assert result.exit_code == 0
    assert (out / "patient.csv").read_text() == patient_csv()
    assert (out / "adult_100.csv").exists()
    with open(out / "adult_100.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 101  # header + 100 rows
    assert (out / "q2.query.json").exists()


def test_bench_emits_csv(runner, tmp_path):
    out = tmp_path / "bench.csv"
    result = invoke(
        runner,
        ["bench", "--sizes", "500", "--workers", "1", "--runs", "2", "--out", str(out)],
    )
    assert result.exit_code == 0
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["size", "unique_records", "workers", "run", "seconds"]
    assert len(rows) == 3


def test_report_file_matches_stdout(runner, patient_files, tmp_path):
    report = tmp_path / "report.json"
    result = invoke(
        runner,
        ["analyze", "--data", patient_files["data"], "--schema", patient_files["schema"],
         "--query", patient_files["query"], "--report", str(report)],
    )
    assert report.read_text() == result.output

from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from cie import data
from cie.cli import main
from cie.inference import render_observations
from cie.harness import inject_fault, load_scenario


@pytest.fixture()
def runner():
    return CliRunner()


def test_scenario_run_active_fault_exits_zero(runner):
    result = runner.invoke(main, ["scenario", "run", "--scenario", "builtin:active-fault"])
    assert result.exit_code == 0, result.output
    assert "6/6" in result.output


def test_scenario_run_healthy_json_report(runner):
    result = runner.invoke(main, ["scenario", "run", "--scenario", "builtin:healthy",
                                  "--format", "json"])
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["all_passed"] is True
    assert report["passed"] == 3


def test_scenario_run_writes_metrics(runner, tmp_path):
    metrics_path = tmp_path / "metrics.jsonl"
    result = runner.invoke(main, ["scenario", "run", "--scenario", "builtin:active-fault",
                                  "--metrics-out", str(metrics_path)])
    assert result.exit_code == 0, result.output
    lines = [json.loads(line) for line in metrics_path.read_text().splitlines()]
    assert lines[0]["record"] == "header"
    assert sum(1 for line in lines if line["record"] == "query") == 6


def test_scenario_run_failing_rubric_exits_nonzero(runner, tmp_path):
    doc = json.loads(data.scenario_path("active-fault").read_text())
    for query in doc["queries"]:
        if query["id"] == "Q3":
            query["expect"]["cause_name"] = "gremlins"
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(doc))
    # keep relative env/codebook references resolvable
    for name in ("astronomy_shop_env.json", "astronomy_shop_codebook.json"):
        (tmp_path / name).write_text(data.path(name).read_text())
    result = runner.invoke(main, ["scenario", "run", "--scenario", str(broken)])
    assert result.exit_code == 1
    assert "FAIL" in result.output


def test_scenario_unknown_builtin(runner):
    result = runner.invoke(main, ["scenario", "run", "--scenario", "builtin:nope"])
    assert result.exit_code != 0
    assert "unknown builtin scenario" in result.output


def test_query_health_without_observations_is_healthy(runner, shop_env_path,
                                                      shop_codebook_path):
    result = runner.invoke(main, ["query", "--env", str(shop_env_path),
                                  "--codebook", str(shop_codebook_path),
                                  "--method", "get_environment_health"])
    assert result.exit_code == 0, result.output
    wire = json.loads(result.output)
    assert wire["status"] == "ok"
    assert wire["payload"]["verdict"] == "healthy"


def test_query_with_observation_stream(runner, shop_env_path, shop_codebook_path,
                                       tmp_path):
    scenario = load_scenario(data.scenario_path("active-fault"))
    stream = tmp_path / "obs.jsonl"
    stream.write_text(render_observations(inject_fault(scenario)))
    result = runner.invoke(main, ["query", "--env", str(shop_env_path),
                                  "--codebook", str(shop_codebook_path),
                                  "--observations", str(stream),
                                  "--method", "get_root_causes"])
    assert result.exit_code == 0, result.output
    wire = json.loads(result.output)
    assert wire["payload"]["best"]["cause_name"] == "code_defect_transaction_rejection"


def test_query_table_format(runner, shop_env_path, shop_codebook_path):
    result = runner.invoke(main, ["query", "--env", str(shop_env_path),
                                  "--codebook", str(shop_codebook_path),
                                  "--method", "get_environment_health",
                                  "--format", "table"])
    assert result.exit_code == 0, result.output
    assert "verdict: healthy" in result.output


def test_query_bad_params_json(runner, shop_env_path, shop_codebook_path):
    result = runner.invoke(main, ["query", "--env", str(shop_env_path),
                                  "--codebook", str(shop_codebook_path),
                                  "--method", "get_symptoms", "--params", "{nope"])
    assert result.exit_code != 0
    assert "not valid JSON" in result.output


def test_query_error_response_exits_nonzero(runner, shop_env_path, shop_codebook_path):
    result = runner.invoke(main, ["query", "--env", str(shop_env_path),
                                  "--codebook", str(shop_codebook_path),
                                  "--method", "get_blast_radius",
                                  "--params", '{"cause": "ghost@x"}'])
    assert result.exit_code == 1
    wire = json.loads(result.output)
    assert wire["error"]["code"] == "unknown_id"


def test_graph_dump(runner, shop_env_path, shop_codebook_path):
    result = runner.invoke(main, ["graph", "dump", "--env", str(shop_env_path),
                                  "--codebook", str(shop_codebook_path)])
    assert result.exit_code == 0, result.output
    dump = json.loads(result.output)
    assert dump["schema"] == "causality-dump/1"
    assert any(c["id"] == "code_defect_transaction_rejection@payment"
               for c in dump["causes"])


def test_serve_over_stdio(runner, shop_env_path, shop_codebook_path):
    lines = json.dumps({"id": 1, "method": "get_environment_health", "params": {}}) + "\n"
    result = runner.invoke(main, ["serve", "--env", str(shop_env_path),
                                  "--codebook", str(shop_codebook_path)],
                           input=lines)
    assert result.exit_code == 0, result.output
    out = [json.loads(line) for line in result.output.splitlines()]
    assert "hello" in out[0]
    assert out[1]["id"] == 1
    assert out[1]["payload"]["verdict"] == "healthy"

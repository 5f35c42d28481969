import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from codense.cli import main
from codense.datastore import RunStore

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def runner():
    return CliRunner()


def densify_run(runner, tmp_path, run_id="r1"):
    result = runner.invoke(
        main,
        [
            "densify",
            "--corpus", str(FIXTURES / "corpus.jsonl"),
            "--out-run", run_id,
            "--runs-dir", str(tmp_path),
            "--mock", str(FIXTURES / "densify_mock.json"),
        ],
    )
    return result


def test_densify_persists_all_chains(runner, tmp_path):
    result = densify_run(runner, tmp_path)
    assert result.exit_code == 0, result.output
    store = RunStore(tmp_path, "r1")
    chains = store.load_chains()
    assert len(chains) == 3
    assert all(len(c.steps) == 5 for c in chains)


def test_densify_requires_endpoint(runner, tmp_path):
    result = runner.invoke(
        main,
        [
            "densify",
            "--corpus", str(FIXTURES / "corpus.jsonl"),
            "--out-run", "r1",
            "--runs-dir", str(tmp_path),
        ],
    )
    assert result.exit_code == 1
    assert "endpoint" in result.output


def test_densify_empty_corpus_exit_1(runner, tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    result = runner.invoke(
        main,
        [
            "densify",
            "--corpus", str(empty),
            "--out-run", "r1",
            "--runs-dir", str(tmp_path),
            "--mock", str(FIXTURES / "densify_mock.json"),
        ],
    )
    assert result.exit_code == 1


def test_densify_partial_failure_exit_2(runner, tmp_path):
    fixture = json.loads((FIXTURES / "densify_mock.json").read_text())
    fixture["art3"] = "this is not json and never will be"
    mock = tmp_path / "broken_mock.json"
    mock.write_text(json.dumps(fixture))
    result = runner.invoke(
        main,
        [
            "densify",
            "--corpus", str(FIXTURES / "corpus.jsonl"),
            "--out-run", "r1",
            "--runs-dir", str(tmp_path),
            "--mock", str(mock),
        ],
    )
    assert result.exit_code == 2
    assert "FAILED art3" in result.output
    assert len(RunStore(tmp_path, "r1").load_chains()) == 2


def test_densify_all_failures_exit_1(runner, tmp_path):
    mock = tmp_path / "garbage_mock.json"
    mock.write_text(json.dumps({"*": "nope"}))
    result = runner.invoke(
        main,
        [
            "densify",
            "--corpus", str(FIXTURES / "corpus.jsonl"),
            "--out-run", "r1",
            "--runs-dir", str(tmp_path),
            "--mock", str(mock),
        ],
    )
    assert result.exit_code == 1


def test_analyze_writes_row_per_summary(runner, tmp_path):
    densify_run(runner, tmp_path)
    result = runner.invoke(
        main, ["analyze", "--run", "r1", "--runs-dir", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    rows = RunStore(tmp_path, "r1").load_metrics()
    assert len(rows) == 15
    assert {r["step"] for r in rows} == {1, 2, 3, 4, 5}
    for r in rows:
        assert {"tokens", "entities", "density", "extractive_density"} <= r.keys()


def test_analyze_missing_run(runner, tmp_path):
    result = runner.invoke(
        main, ["analyze", "--run", "nope", "--runs-dir", str(tmp_path)]
    )
    assert result.exit_code == 1


def test_judge_prints_dimension_table(runner, tmp_path):
    densify_run(runner, tmp_path)
    result = runner.invoke(
        main,
        [
            "judge",
            "--run", "r1",
            "--runs-dir", str(tmp_path),
            "--mock", str(FIXTURES / "judge_mock.json"),
        ],
    )
    assert result.exit_code == 0, result.output
    lines = result.output.strip().splitlines()
    header = lines[0].split("\t")
    assert header[0] == "step"
    assert header[-1] == "average"
    assert "Informative" in header and "Overall" in header
    assert len(lines) == 6
    # the mock answers 4 everywhere
    assert lines[1].split("\t")[1] == "4.00"


def test_judge_rejects_unknown_dimension(runner, tmp_path):
    densify_run(runner, tmp_path)
    result = runner.invoke(
        main,
        [
            "judge",
            "--run", "r1",
            "--runs-dir", str(tmp_path),
            "--dims", "Sparkle",
            "--mock", str(FIXTURES / "judge_mock.json"),
        ],
    )
    assert result.exit_code == 1
    assert "Sparkle" in result.output


def test_report_emits_tables(runner, tmp_path):
    densify_run(runner, tmp_path)
    runner.invoke(main, ["analyze", "--run", "r1", "--runs-dir", str(tmp_path)])
    result = runner.invoke(
        main, ["report", "--run", "r1", "--runs-dir", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    report_dir = RunStore(tmp_path, "r1").report_dir
    table1 = (report_dir / "table1.csv").read_text().splitlines()
    assert table1[0] == "step,tokens,entities,density"
    assert len(table1) == 6


def test_report_nothing_to_emit_exit_1(runner, tmp_path):
    densify_run(runner, tmp_path)
    result = runner.invoke(
        main, ["report", "--run", "r1", "--runs-dir", str(tmp_path)]
    )
    # chains but no metrics, scores, or ballots: everything is skipped
    assert result.exit_code == 1
    assert "skipped" in result.output


def test_report_missing_run_exit_1(runner, tmp_path):
    result = runner.invoke(
        main, ["report", "--run", "nope", "--runs-dir", str(tmp_path)]
    )
    assert result.exit_code == 1

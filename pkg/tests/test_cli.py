import csv
import io
import logging
import shutil

import pytest

from conftest import BENCHMARKS, TEST_BENCHMARKS
from stagg.cli import main
from stagg.pipeline import CSV_COLUMNS, LiftConfig, LiftReport, lift, summarize
from stagg.benchmark import load_benchmark


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_lift_prints_solution(capsys):
    assert main(["lift", str(BENCHMARKS / "matvec")]) == 0
    out = capsys.readouterr().out
    assert "matvec [td] solved: Result(i) = Mat1(i,j) * Mat2(j)" in out


def test_lift_both_writes_csv(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["lift", str(BENCHMARKS / "dot"), "--method", "both", "--out", str(out)]) == 0
    table = rows(out.read_text())
    assert [r["method"] for r in table] == ["td", "bu"]
    assert all(r["status"] == "solved" for r in table)
    assert list(table[0]) == list(CSV_COLUMNS)


def test_suite_csv(tmp_path, capsys):
    out = tmp_path / "suite.csv"
    assert main(["suite", str(BENCHMARKS), "--out", str(out)]) == 0
    table = rows(out.read_text())
    names = [r["name"] for r in table]
    assert names == sorted(names) and len(names) == 10
    assert all(r["status"] == "solved" for r in table)
    summary = capsys.readouterr().out
    assert "td: solved 10/10 (100.00%)" in summary


def test_suite_empty_dir(tmp_path, capsys, caplog):
    with caplog.at_level(logging.WARNING):
        assert main(["suite", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert "no benchmarks" in caplog.text


def test_suite_error_exit_code(tmp_path):
    shutil.copytree(BENCHMARKS / "copy", tmp_path / "copy")
    (tmp_path / "broken").mkdir()
    (tmp_path / "broken" / "bench.json").write_text("{not json")
    out = tmp_path / "r.csv"
    assert main(["suite", str(tmp_path), "--out", str(out)]) == 1
    status = {r["name"]: r["status"] for r in rows(out.read_text())}
    assert status == {"broken": "error", "copy": "solved"}


def test_tiny_timeout(tmp_path):
    out = tmp_path / "r.csv"
    code = main(["lift", str(TEST_BENCHMARKS / "add_then_mul"), "--method", "bu",
                 "--timeout-secs", "0.001", "--out", str(out)])
    assert code == 0
    assert rows(out.read_text())[0]["status"] == "timeout"


def test_missing_fixture_is_error(tmp_path, capsys):
    code = main(["lift", str(BENCHMARKS / "copy"), "--fixture", str(tmp_path / "none.txt")])
    assert code == 1
    assert "error" in capsys.readouterr().out


def test_grammar_and_prompt(capsys):
    assert main(["grammar", str(BENCHMARKS / "matvec")]) == 0
    text = capsys.readouterr().out
    assert "dims=[1, 2, 1]" in text and "TENSOR1" in text
    assert main(["prompt", str(BENCHMARKS / "matvec")]) == 0
    assert "Mat1" in capsys.readouterr().out


def test_penalty_choices_checked():
    with pytest.raises(SystemExit):
        main(["lift", str(BENCHMARKS / "copy"), "--drop-penalty", "zz"])


def test_live_without_endpoint(monkeypatch, capsys):
    monkeypatch.delenv("STAGG_LLM_ENDPOINT", raising=False)
    assert main(["lift", str(BENCHMARKS / "copy"), "--llm", "live"]) == 2


@pytest.mark.parametrize(
    "options",
    [
        {"probabilities": "uniform"},
        {"dropped": ("A",)},
        {"method": "bu", "dropped": ("B",)},
    ],
)
def test_ablation_configs_still_solve_matvec(matvec, options):
    report = lift(matvec, LiftConfig(**options))
    assert report.status == "solved"
    assert report.expr == "Result(i) = Mat1(i,j) * Mat2(j)"


def test_full_grammar_enumerates_more():
    bench = load_benchmark(BENCHMARKS / "dot")
    refined = lift(bench, LiftConfig())
    full = lift(bench, LiftConfig(grammar="full"))
    assert full.status == "solved" and full.expr == "out = x(i) * y(i)"
    assert full.templates_enumerated > refined.templates_enumerated


def test_summary_format():
    def rep(status, secs):
        return LiftReport("x", "td", status, seconds=secs, templates_validated=3)

    reports = [rep("solved", 1.0), rep("solved", 2.0), rep("solved", 3.0)] + [rep("exhausted", 0)] * 4
    line = summarize(reports).splitlines()[0]
    assert line == "td: solved 3/7 (42.86%), mean time 2.000s, mean attempts 3.00"

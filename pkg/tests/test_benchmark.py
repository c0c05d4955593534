import json
import logging
from fractions import Fraction

import pytest

from conftest import BENCHMARKS
from stagg.benchmark import discover, extract_constants, lhs_rank, load_benchmark, run_oracle
from stagg.errors import MalformedDescriptor, MissingField, OracleMiss, OracleMissing
from stagg.taco import TensorValue


def write_bench(tmp_path, desc, source="void f() {}\n"):
    (tmp_path / "source.c").write_text(source)
    (tmp_path / "bench.json").write_text(json.dumps(desc))
    return tmp_path


BASE = {
    "name": "copy",
    "args": [{"name": "x", "kind": "tensor", "rank": 1}, {"name": "y", "kind": "tensor", "rank": 1}],
    "output_arg": "y",
    "oracle": {"expr": "y(i) = x(i)"},
}


class TestLoad:
    def test_matvec(self, matvec):
        assert [(a.name, a.kind, a.rank) for a in matvec.args] == [
            ("N", "scalar", 0),
            ("Mat1", "tensor", 2),
            ("Mat2", "tensor", 1),
            ("Result", "tensor", 1),
        ]
        assert matvec.output_arg == "Result"
        assert matvec.constants == (0,)
        assert matvec.llm_fixture.name == "fixture.txt"

    def test_missing_output(self, tmp_path):
        desc = dict(BASE)
        del desc["output_arg"]
        with pytest.raises(MissingField):
            load_benchmark(write_bench(tmp_path, desc))

    def test_unknown_field(self, tmp_path):
        with pytest.raises(MalformedDescriptor):
            load_benchmark(write_bench(tmp_path, {**BASE, "notes": "x"}))

    def test_no_oracle(self, tmp_path):
        desc = dict(BASE)
        del desc["oracle"]
        with pytest.raises(OracleMissing):
            load_benchmark(write_bench(tmp_path, desc))

    def test_oracle_must_use_args(self, tmp_path):
        with pytest.raises(MalformedDescriptor):
            load_benchmark(write_bench(tmp_path, {**BASE, "oracle": {"expr": "y(i) = z(i)"}}))
        with pytest.raises(MalformedDescriptor):
            load_benchmark(write_bench(tmp_path, {**BASE, "output_arg": "q"}))

    def test_both_oracles_expr_wins(self, tmp_path, caplog):
        oracle = {"expr": "y(i) = x(i)", "cases": [{"inputs": {"x": [1]}, "output": [9]}]}
        with caplog.at_level(logging.WARNING):
            bench = load_benchmark(write_bench(tmp_path, {**BASE, "oracle": oracle}))
        assert bench.oracle_expr is not None and bench.oracle_cases is None
        assert "both" in caplog.text

    def test_declared_constants_override(self, tmp_path):
        bench = load_benchmark(write_bench(tmp_path, {**BASE, "constants": [2, "1/2"]}, "y = 7;"))
        assert bench.constants == (2, Fraction(1, 2))

    def test_discover_sorted(self):
        names = [p.name for p in discover(BENCHMARKS)]
        assert names == sorted(names) and len(names) >= 10


class TestConstants:
    def test_figure_two(self, matvec):
        assert extract_constants(matvec.c_source) == [0]

    def test_simple(self):
        assert extract_constants("y[i] = 2*x[i] + 3;") == [2, 3]
        assert extract_constants("y[i] = x[i];") == []

    def test_ignores_noise(self):
        src = '#define N 10\n// 5\n/* 6 */ printf("7"); for (i = 1; i < 8; i++) y[0] = 2.5f * x[i] + 2.5;'
        assert extract_constants(src) == [Fraction(5, 2)]


class TestLhsRank:
    def test_declared(self, matvec):
        assert lhs_rank(matvec) == 1
        assert lhs_rank(load_benchmark(BENCHMARKS / "dot")) == 0

    def test_heuristic_agrees(self, tmp_path, caplog):
        desc = {**BASE, "args": [{"name": "x", "kind": "tensor", "rank": 2},
                                 {"name": "out", "kind": "tensor", "rank": 2}],
                "output_arg": "out", "oracle": {"expr": "out(i,j) = x(i,j)"}}
        bench = load_benchmark(write_bench(tmp_path, desc, "out[i][j] = x[i][j];"))
        with caplog.at_level(logging.WARNING):
            assert lhs_rank(bench, heuristic=True) == 2
        assert caplog.text == ""

    def test_heuristic_disagrees(self, tmp_path, caplog):
        desc = {**BASE, "output_arg": "y"}
        bench = load_benchmark(write_bench(tmp_path, desc, "y[i][j] = x[i];"))
        with caplog.at_level(logging.WARNING):
            assert lhs_rank(bench, heuristic=True) == 1
        assert "suggests rank 2" in caplog.text


class TestOracle:
    def test_expression(self, matvec):
        inputs = {
            "N": TensorValue.scalar(2),
            "Mat1": TensorValue.from_nested([[1, 2], [3, 4]]),
            "Mat2": TensorValue.from_nested([5, 6]),
            "Result": TensorValue.from_nested([0, 0]),
        }
        assert run_oracle(matvec, inputs).to_nested() == [17, 39]

    def test_embedded(self, tmp_path):
        oracle = {"cases": [{"inputs": {"x": [1, 2], "y": [0, 0]}, "output": [1, 2]}]}
        bench = load_benchmark(write_bench(tmp_path, {**BASE, "oracle": oracle}))
        seen = {"x": TensorValue.from_nested([1, 2]), "y": TensorValue.from_nested([0, 0])}
        assert run_oracle(bench, seen).to_nested() == [1, 2]
        with pytest.raises(OracleMiss):
            run_oracle(bench, {**seen, "x": TensorValue.from_nested([5, 5])})

"""Lifting benchmarks: C source, argument signature, constants, and an oracle.

A benchmark lives in a directory holding ``source.c``, a ``bench.json``
descriptor and, usually, ``fixture.txt`` with a recorded LLM reply::

    {
      "name": "matvec",
      "args": [{"name": "N", "kind": "scalar"},
               {"name": "Mat1", "kind": "tensor", "rank": 2}, ...],
      "output_arg": "Result",
      "oracle": {"expr": "Result(i) = Mat1(i,j) * Mat2(j)"},
      "llm_fixture": "fixture.txt"
    }

The oracle is either an einsum expression over the arguments or a list of
literal ``{"inputs": {...}, "output": ...}`` cases.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import MalformedDescriptor, MissingField, OracleMiss, OracleMissing, TacoSyntaxError
from .taco import Assignment, Number, TensorValue, accesses, evaluate, exact, parse_expression

log = logging.getLogger(__name__)

DESCRIPTOR = "bench.json"
SOURCE = "source.c"
FIELDS = {"name", "args", "output_arg", "constants", "oracle", "llm_fixture"}
REQUIRED = ("name", "args", "output_arg", "oracle")


@dataclass(frozen=True)
class Arg:
    name: str
    kind: str
    rank: int

    @property
    def scalar(self) -> bool:
        return self.kind == "scalar"


@dataclass(frozen=True)
class Case:
    """One input/output pair; inputs include the output's initial contents."""

    inputs: Mapping[str, TensorValue]
    expected: TensorValue


@dataclass(frozen=True)
class Benchmark:
    name: str
    c_source: str
    args: tuple[Arg, ...]
    output_arg: str
    constants: tuple[Number, ...]
    oracle_expr: Assignment | None = None
    oracle_cases: tuple[Case, ...] | None = None
    llm_fixture: Path | None = None
    path: Path | None = None

    def arg(self, name: str) -> Arg:
        for a in self.args:
            if a.name == name:
                return a
        raise KeyError(name)

    @property
    def signature(self) -> list[tuple[str, int]]:
        return [(a.name, a.rank) for a in self.args]


# ---------------------------------------------------------------------------
# constants in C source

_BLOCK_COMMENT = re.compile(r"/\*.*?\*/", re.S)
_LINE_COMMENT = re.compile(r"//[^\n]*")
_STRING = re.compile(r'"(?:\\.|[^"\\])*"|\'(?:\\.|[^\'\\])*\'')
_PREPROCESSOR = re.compile(r"^\s*#[^\n]*", re.M)
_INDEX_LITERAL = re.compile(r"\[\s*\d+\s*\]")
_NUMBER = re.compile(
    r"(?<![\w.])(\d+\.\d*|\.\d+|\d+)((?:[eE][+-]?\d+)?)[fFlLuU]*(?![\w.])"
)


def _drop_for_headers(src: str) -> str:
    out = []
    pos = 0
    for m in re.finditer(r"\bfor\s*\(", src):
        if m.start() < pos:
            continue
        depth, end = 1, m.end()
        while end < len(src) and depth:
            depth += {"(": 1, ")": -1}.get(src[end], 0)
            end += 1
        out.append(src[pos:m.start()])
        pos = end
    out.append(src[pos:])
    return "".join(out)


def extract_constants(c_source: str) -> list[Number]:
    """Numeric literals of executable statements, deduplicated in order.

    Loop headers, preprocessor lines, comments, strings and constant array
    subscripts such as ``[0]`` are ignored.
    """
    text = _BLOCK_COMMENT.sub(" ", c_source)
    text = _LINE_COMMENT.sub(" ", text)
    text = _STRING.sub(" ", text)
    text = _PREPROCESSOR.sub(" ", text)
    text = _drop_for_headers(text)
    text = _INDEX_LITERAL.sub("[]", text)
    found: list[Number] = []
    for m in _NUMBER.finditer(text):
        value = exact(m.group(1) + m.group(2))
        if value not in found:
            found.append(value)
    return found


_WRITE = r"\b{name}\s*((?:\[[^\]]*\]\s*)+)(?:[-+*/]?=)(?!=)"


def lhs_rank(bench: Benchmark, heuristic: bool = False) -> int:
    """Rank of the output argument as declared.

    With ``heuristic`` the C text is scanned for subscripted writes to the
    output; a disagreement with the declaration is logged, never acted on.
    """
    out = bench.arg(bench.output_arg)
    declared = 0 if out.scalar else out.rank
    if heuristic:
        pattern = re.compile(_WRITE.format(name=re.escape(out.name)))
        for m in pattern.finditer(bench.c_source):
            subscripts = re.findall(r"\[([^\]]*)\]", m.group(1))
            variables = set()
            for sub in subscripts:
                variables.update(re.findall(r"[A-Za-z_]\w*", sub))
            if len(variables) != declared:
                log.warning(
                    "%s: write %r suggests rank %d, declared %d",
                    bench.name, m.group(0).strip(), len(variables), declared,
                )
                break
    return declared


# ---------------------------------------------------------------------------
# oracle


def run_oracle(bench: Benchmark, inputs: Mapping[str, TensorValue]) -> TensorValue:
    if bench.oracle_expr is not None:
        return evaluate(bench.oracle_expr, inputs)
    if bench.oracle_cases is not None:
        for case in bench.oracle_cases:
            if dict(case.inputs) == dict(inputs):
                return case.expected
        raise OracleMiss(f"{bench.name}: no recorded case for these inputs")
    raise OracleMissing(f"{bench.name} has no oracle")


# ---------------------------------------------------------------------------
# loading


def _value(obj) -> TensorValue:
    if isinstance(obj, (list, tuple)):
        return TensorValue.from_nested(obj)
    return TensorValue.scalar(obj)


def _parse_args(raw, name: str) -> tuple[Arg, ...]:
    if not isinstance(raw, list) or not raw:
        raise MalformedDescriptor(f"{name}: args must be a non-empty list")
    args = []
    for item in raw:
        if not isinstance(item, dict) or "name" not in item or "kind" not in item:
            raise MalformedDescriptor(f"{name}: each arg needs a name and a kind")
        extra = set(item) - {"name", "kind", "rank"}
        if extra:
            raise MalformedDescriptor(f"{name}: unknown arg fields {sorted(extra)}")
        kind = item["kind"]
        if kind not in ("scalar", "tensor"):
            raise MalformedDescriptor(f"{name}: arg kind must be scalar or tensor, got {kind!r}")
        rank = item.get("rank", 0 if kind == "scalar" else None)
        if not isinstance(rank, int) or not 0 <= rank <= 4:
            raise MalformedDescriptor(f"{name}: arg {item['name']} needs a rank in 0..4")
        if kind == "scalar" and rank != 0:
            raise MalformedDescriptor(f"{name}: scalar arg {item['name']} with rank {rank}")
        if kind == "tensor" and rank == 0:
            raise MalformedDescriptor(f"{name}: tensor arg {item['name']} with rank 0")
        args.append(Arg(item["name"], kind, rank))
    if len({a.name for a in args}) != len(args):
        raise MalformedDescriptor(f"{name}: duplicate argument names")
    return tuple(args)


def _check_oracle_expr(expr: Assignment, args: Sequence[Arg], output: str, name: str) -> None:
    ranks = {a.name: a.rank for a in args}
    if expr.lhs.name != output:
        raise MalformedDescriptor(f"{name}: oracle writes {expr.lhs.name}, not {output}")
    for acc in accesses(expr):
        if acc.name not in ranks:
            raise MalformedDescriptor(f"{name}: oracle references unknown tensor {acc.name}")
        if ranks[acc.name] != acc.rank:
            raise MalformedDescriptor(f"{name}: oracle accesses {acc.name} with rank {acc.rank}")


def load_benchmark(path: str | Path) -> Benchmark:
    root = Path(path)
    desc_path = root / DESCRIPTOR
    if not desc_path.is_file():
        raise MissingField(f"{root}: no {DESCRIPTOR}")
    try:
        desc = json.loads(desc_path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedDescriptor(f"{desc_path}: {exc}") from exc
    if not isinstance(desc, dict):
        raise MalformedDescriptor(f"{desc_path}: descriptor must be an object")
    unknown = set(desc) - FIELDS
    if unknown:
        raise MalformedDescriptor(f"{desc_path}: unknown fields {sorted(unknown)}")
    for key in REQUIRED:
        if key not in desc:
            if key == "oracle":
                raise OracleMissing(f"{desc_path}: no oracle")
            raise MissingField(f"{desc_path}: missing {key}")

    name = str(desc["name"])
    args = _parse_args(desc["args"], name)
    output = desc["output_arg"]
    if output not in {a.name for a in args}:
        raise MalformedDescriptor(f"{name}: output_arg {output!r} is not an argument")

    src_path = root / SOURCE
    if not src_path.is_file():
        raise MissingField(f"{root}: no {SOURCE}")
    source = src_path.read_text()

    if "constants" in desc:
        try:
            constants = tuple(exact(c) for c in desc["constants"])
        except (TypeError, ValueError) as exc:
            raise MalformedDescriptor(f"{name}: bad constants: {exc}") from exc
    else:
        constants = tuple(extract_constants(source))

    oracle = desc["oracle"]
    if not isinstance(oracle, dict) or not set(oracle) <= {"expr", "cases"} or not oracle:
        raise OracleMissing(f"{name}: oracle needs an expr or cases")
    expr = cases = None
    if "expr" in oracle:
        if "cases" in oracle:
            log.warning("%s: oracle has both expr and cases; using expr", name)
        try:
            expr = parse_expression(oracle["expr"])
        except TacoSyntaxError as exc:
            raise MalformedDescriptor(f"{name}: oracle expression: {exc}") from exc
        _check_oracle_expr(expr, args, output, name)
    else:
        try:
            cases = tuple(
                Case({k: _value(v) for k, v in c["inputs"].items()}, _value(c["output"]))
                for c in oracle["cases"]
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise MalformedDescriptor(f"{name}: bad oracle cases: {exc}") from exc
        if not cases:
            raise OracleMissing(f"{name}: oracle has no cases")

    fixture = desc.get("llm_fixture")
    return Benchmark(
        name=name,
        c_source=source,
        args=args,
        output_arg=output,
        constants=constants,
        oracle_expr=expr,
        oracle_cases=cases,
        llm_fixture=root / fixture if fixture else None,
        path=root,
    )


def discover(directory: str | Path) -> list[Path]:
    """Benchmark directories directly under ``directory``, sorted by name."""
    root = Path(directory)
    return sorted(p for p in root.iterdir() if (p / DESCRIPTOR).is_file())

"""Instantiate templates against a benchmark's arguments and test them.

Validation runs a template under every rank-compatible substitution and keeps
the ones reproducing all input/output examples.  Winners are then checked by
differential testing: fresh random inputs with larger, distinct extents.
"""

from __future__ import annotations

import itertools
import logging
import random
import time
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from .benchmark import Benchmark, Case, run_oracle
from .candidates import Template
from .errors import DivisionByZero, EvaluationError, OracleFailure, OracleMissing, SearchTimeout
from .taco import Access, Assignment, Constant, Number, TensorValue, accesses, evaluate, leaves, map_leaves

log = logging.getLogger(__name__)

EXAMPLE_EXTENTS = (3, 4, 5)
VERIFY_EXTENTS = (6, 7, 8, 9)
VALUE_RANGE = (-8, 8)
DEFAULT_EXAMPLES = 8
DEFAULT_TRIALS = 64
MAX_REGENERATE = 100


@dataclass(frozen=True)
class ExampleSet:
    cases: tuple[Case, ...]
    output_arg: str = ""

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self):
        return iter(self.cases)


@dataclass
class Substitution:
    tensor_map: dict[str, str]
    const_map: dict[int, Number] = field(default_factory=dict)

    def __str__(self) -> str:
        parts = [f"{k}->{v}" for k, v in self.tensor_map.items()]
        parts += [f"Const#{k}->{v}" for k, v in self.const_map.items()]
        return "<" + ", ".join(parts) + ">"


@dataclass
class ValidationStats:
    substitutions_tried: int = 0


# ---------------------------------------------------------------------------
# example generation


def _extent_classes(bench: Benchmark) -> list[list[tuple[str, int]]]:
    """Group argument dimensions that the oracle forces to share an extent."""
    parent: dict = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        parent[find(x)] = find(y)

    dims = [(a.name, d) for a in bench.args for d in range(a.rank)]
    for dim in dims:
        find(dim)
    if bench.oracle_expr is not None:
        for acc in accesses(bench.oracle_expr):
            for d, var in enumerate(acc.indices):
                union((acc.name, d), ("index", var))
    groups: dict = {}
    for dim in dims:
        groups.setdefault(find(dim), []).append(dim)
    return list(groups.values())


def _random_tensor(rng: random.Random, extents: Sequence[int]) -> TensorValue:
    lo, hi = VALUE_RANGE
    size = 1
    for e in extents:
        size *= e
    return TensorValue(tuple(extents), tuple(rng.randint(lo, hi) for _ in range(size)))


def _random_inputs(bench: Benchmark, rng: random.Random, pool: Sequence[int]) -> dict[str, TensorValue]:
    classes = _extent_classes(bench)
    if len(classes) > len(pool):
        # more independent dimensions than pool values: widen, keep distinct
        pool = range(pool[0], pool[0] + len(classes))
    chosen = rng.sample(list(pool), len(classes))
    extent = {dim: e for group, e in zip(classes, chosen) for dim in group}
    return {
        a.name: _random_tensor(rng, [extent[(a.name, d)] for d in range(a.rank)])
        for a in bench.args
    }


def _random_cases(bench: Benchmark, n: int, rng: random.Random, pool: Sequence[int]) -> list[Case]:
    cases = []
    for _ in range(n):
        for _attempt in range(MAX_REGENERATE):
            inputs = _random_inputs(bench, rng, pool)
            try:
                expected = run_oracle(bench, inputs)
            except DivisionByZero:
                continue
            except EvaluationError as exc:
                raise OracleFailure(f"{bench.name}: oracle failed: {exc}") from exc
            cases.append(Case(inputs, expected))
            break
        else:
            raise OracleFailure(f"{bench.name}: oracle kept dividing by zero")
    return cases


def generate_examples(
    bench: Benchmark,
    n: int = DEFAULT_EXAMPLES,
    seed: int = 0,
    extents: Sequence[int] = EXAMPLE_EXTENTS,
) -> ExampleSet:
    """``n`` input/output cases; each case gives every index its own extent.

    Benchmarks whose oracle is a list of recorded cases contribute (up to
    ``n`` of) those cases instead.
    """
    if bench.oracle_expr is None:
        if bench.oracle_cases is None:
            raise OracleMissing(f"{bench.name} has no oracle")
        return ExampleSet(tuple(bench.oracle_cases[:n]), bench.output_arg)
    rng = random.Random(seed)
    return ExampleSet(tuple(_random_cases(bench, n, rng, extents)), bench.output_arg)


# ---------------------------------------------------------------------------
# substitutions


def template_symbols(t: Template | Assignment) -> tuple[list[tuple[str, int]], int]:
    """RHS tensor symbols with their ranks, in order, and the Const count."""
    expr = t.expr if isinstance(t, Template) else t
    tensors: dict[str, int] = {}
    consts = 0
    for leaf in leaves(expr.rhs):
        if isinstance(leaf, Constant):
            consts += 1
        else:
            tensors.setdefault(leaf.name, leaf.rank)
    return list(tensors.items()), consts


def enumerate_substitutions(
    t: Template | Assignment,
    args: Sequence[tuple[str, int]],
    consts: Sequence[Number],
) -> Iterator[Substitution]:
    """Every scalar/tensor-compatible binding, in lexicographic order.

    A symbol may be bound to any argument of the same kind (scalar or
    tensor); several symbols may share one argument.  Finer rank clashes
    are left for evaluation to reject.
    """
    symbols, n_consts = template_symbols(t)
    choices = [
        [name for name, rank in args if (rank == 0) == (sym_rank == 0)]
        for _, sym_rank in symbols
    ]
    const_choices = [list(consts)] * n_consts
    for combo in itertools.product(*choices, *const_choices):
        tensor_map = {sym: combo[n] for n, (sym, _) in enumerate(symbols)}
        const_map = {n: combo[len(symbols) + n] for n in range(n_consts)}
        yield Substitution(tensor_map, const_map)


def instantiate(t: Template | Assignment, s: Substitution, output_arg: str) -> Assignment:
    expr = t.expr if isinstance(t, Template) else t
    counter = itertools.count()

    def bind(leaf):
        if isinstance(leaf, Constant):
            return Constant(s.const_map[next(counter)])
        return Access(s.tensor_map[leaf.name], leaf.indices)

    return Assignment(Access(output_arg, expr.lhs.indices), map_leaves(expr.rhs, bind))


def _matches(expr: Assignment, case: Case) -> bool:
    try:
        return evaluate(expr, case.inputs) == case.expected
    except EvaluationError:
        return False


def iter_valid_substitutions(
    t: Template,
    ex: ExampleSet,
    args: Sequence[tuple[str, int]],
    consts: Sequence[Number],
    stats: ValidationStats | None = None,
    deadline: float | None = None,
) -> Iterator[Substitution]:
    """Lazily yield each substitution reproducing every example.

    ``deadline`` is a ``time.monotonic()`` instant after which
    ``SearchTimeout`` is raised.
    """
    if not ex.cases:
        return
    for s in enumerate_substitutions(t, args, consts):
        if deadline is not None and time.monotonic() > deadline:
            raise SearchTimeout("time budget exhausted during validation")
        if stats is not None:
            stats.substitutions_tried += 1
        expr = instantiate(t, s, ex.output_arg)
        if all(_matches(expr, case) for case in ex.cases):
            yield s


def validate(
    t: Template,
    ex: ExampleSet,
    args: Sequence[tuple[str, int]],
    consts: Sequence[Number],
    stats: ValidationStats | None = None,
) -> Substitution | None:
    """First substitution (stream order) consistent with all examples."""
    return next(iter_valid_substitutions(t, ex, args, consts, stats), None)


def differential_verify(
    expr: Template | Assignment,
    s: Substitution | None,
    bench: Benchmark,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
) -> bool:
    """Compare against the oracle on ``trials`` fresh random cases.

    ``expr`` is either a template plus its substitution or an already
    instantiated expression (``s`` is then ``None``).  Benchmarks with
    recorded oracle cases are checked against all of those instead.
    """
    concrete = instantiate(expr, s, bench.output_arg) if s is not None else (
        expr.expr if isinstance(expr, Template) else expr
    )
    if bench.oracle_expr is None:
        cases = bench.oracle_cases or ()
    else:
        if trials <= 0:
            log.warning("%s: differential testing with no trials accepts anything", bench.name)
            return True
        cases = _random_cases(bench, trials, random.Random(seed), VERIFY_EXTENTS)
    return all(_matches(concrete, case) for case in cases)

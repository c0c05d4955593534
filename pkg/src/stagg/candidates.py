"""From raw LLM text to standardized templates and a predicted dimension list."""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import EmptyCandidateSet, TacoSyntaxError, TooManyIndices
from .taco import (
    CANONICAL_INDICES,
    Access,
    Assignment,
    Constant,
    accesses,
    leaves,
    map_leaves,
    parse_expression,
)

RHS_SYMBOLS = tuple(string.ascii_lowercase[1:])

_MARKER_RE = re.compile(r"^\s*(?:[-*•]+|\(?\d+[.):]|\[\d+\])\s+")


@dataclass(frozen=True)
class Template:
    expr: Assignment
    provenance: int = -1

    def __str__(self) -> str:
        return str(self.expr)


@dataclass(frozen=True)
class TemplateSet:
    templates: tuple[Template, ...]
    unique_index_count: int = field(init=False)

    def __post_init__(self) -> None:
        used = set()
        for t in self.templates:
            for acc in accesses(t.expr):
                used.update(acc.indices)
        object.__setattr__(self, "unique_index_count", len(used))

    def __len__(self) -> int:
        return len(self.templates)

    def __iter__(self):
        return iter(self.templates)


def _clean_line(line: str) -> str:
    line = line.strip()
    line = _MARKER_RE.sub("", line, count=1)
    line = line.strip().strip("`;, \t")
    return line.replace(":=", "=")


def normalize_response(raw: str) -> list[str]:
    """Split an LLM reply into parseable candidate expressions.

    Every parseable line is kept, including duplicates and any beyond the ten
    that were asked for.
    """
    out = []
    for line in raw.splitlines():
        text = _clean_line(line)
        if not text or text.startswith("```"):
            continue
        try:
            parse_expression(text)
        except TacoSyntaxError:
            continue
        out.append(text)
    if not out:
        raise EmptyCandidateSet("no candidate in the response parses as TACO")
    return out


def templatize(expr: Assignment, provenance: int = -1) -> Template:
    """Rename tensors to a, b, c, ..., indices to i, j, k, l, literals to Const."""
    names: dict[str, str] = {}
    for leaf in leaves(expr.rhs):
        if isinstance(leaf, Access) and leaf.name not in names:
            if len(names) >= len(RHS_SYMBOLS):
                raise TooManyIndices("too many distinct tensors to templatize")
            names[leaf.name] = RHS_SYMBOLS[len(names)]

    index_map: dict[str, str] = {}
    for acc in accesses(expr):
        for var in acc.indices:
            if var not in index_map:
                if len(index_map) >= len(CANONICAL_INDICES):
                    raise TooManyIndices(f"more than {len(CANONICAL_INDICES)} index variables")
                index_map[var] = CANONICAL_INDICES[len(index_map)]

    def rename(leaf):
        if isinstance(leaf, Constant):
            return Constant(None)
        return Access(names[leaf.name], tuple(index_map[v] for v in leaf.indices))

    lhs = Access("a", tuple(index_map[v] for v in expr.lhs.indices))
    return Template(Assignment(lhs, map_leaves(expr.rhs, rename)), provenance)


def operands(expr: Assignment) -> list[Access | Constant]:
    """Unique operands in order of appearance, LHS first; every constant counts."""
    out: list[Access | Constant] = [expr.lhs]
    seen = set()
    for leaf in leaves(expr.rhs):
        if isinstance(leaf, Constant):
            out.append(leaf)
        elif leaf.name not in seen:
            seen.add(leaf.name)
            out.append(leaf)
    return out


def dimension_list(t: Template | Assignment) -> list[int]:
    expr = t.expr if isinstance(t, Template) else t
    return [op.rank if isinstance(op, Access) else 0 for op in operands(expr)]


def predict_dimensions(ts: TemplateSet | Iterable[Template], lhs_rank: int) -> list[int]:
    """Majority dimension list among the longest candidates, LHS rank overridden."""
    lists = [tuple(dimension_list(t)) for t in ts]
    if not lists:
        raise EmptyCandidateSet("cannot predict dimensions without candidates")
    longest = max(len(l) for l in lists)
    kept = [l for l in lists if len(l) == longest]
    counts = Counter(kept)
    best = max(counts.values())
    # first list to reach the top count wins ties
    winner = next(l for l in kept if counts[l] == best)
    return [lhs_rank, *winner[1:]]


def build_template_set(candidates: Sequence[str]) -> tuple[TemplateSet, int]:
    """Templatize parsed candidates; returns the set and the discard count."""
    templates = []
    dropped = 0
    for n, text in enumerate(candidates):
        try:
            templates.append(templatize(parse_expression(text), provenance=n))
        except (TacoSyntaxError, TooManyIndices):
            dropped += 1
    return TemplateSet(tuple(templates)), dropped

"""Weighted A* over template grammars, top-down and bottom-up.

A node is a leftmost-derivation prefix.  Its priority is ``f = c + g + X``:
``c`` is the bits spent so far (``-log2`` of every applied rule), ``g`` an
optimistic estimate of the bits still needed, and ``X`` a penalty for
syntactic shapes that are unlikely to be lifting targets.  Ties on ``f`` pop
in insertion order.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

from .candidates import Template
from .errors import SearchTimeout
from .grammar import (
    BU,
    EOL,
    EXPR,
    NEG,
    OP,
    PROGRAM,
    TD,
    TENSOR,
    TemplateGrammar,
    completion_table,
    literal_node,
    literal_rank,
    slot,
)
from .taco import ADD, DIV, SUB, Access, Assignment, BinOp, Constant, Neg, OP_SYMBOLS, parse_expression, render_access

INF = math.inf
DEFAULT_MAX_DEPTH = 6

TD_CRITERIA = ("a1", "a2", "a3", "a4", "a5")
BU_CRITERIA = ("b1", "b2")
PENALTY_GROUPS = {"A": TD_CRITERIA, "B": BU_CRITERIA}


def expand_dropped(names: Iterable[str]) -> frozenset[str]:
    out = set()
    for name in names:
        if name in PENALTY_GROUPS:
            out.update(PENALTY_GROUPS[name])
        elif name in TD_CRITERIA or name in BU_CRITERIA:
            out.add(name)
        else:
            raise ValueError(f"unknown penalty criterion {name!r}")
    return frozenset(out)


@dataclass(frozen=True)
class SearchContext:
    dims: tuple[int, ...]
    op_count: int = 4
    grammar_has_constant: bool = False
    max_depth: int = DEFAULT_MAX_DEPTH
    dropped: frozenset[str] = frozenset()

    @classmethod
    def for_grammar(cls, g: TemplateGrammar, dims=None, dropped=(), max_depth: int = DEFAULT_MAX_DEPTH) -> "SearchContext":
        return cls(
            dims=tuple(g.dims if dims is None else dims),
            op_count=g.operator_count,
            grammar_has_constant=g.has_constant,
            max_depth=max_depth,
            dropped=expand_dropped(dropped),
        )

    def active(self, criterion: str) -> bool:
        return criterion not in self.dropped


@dataclass(frozen=True)
class Hole:
    """A nonterminal not yet expanded."""

    symbol: str


@dataclass
class SearchNode:
    derivation: tuple[int, ...]
    pending: tuple[str, ...]
    tree: object
    c: float = 0.0
    g: float = 0.0
    penalty: float = 0.0

    @property
    def f(self) -> float:
        return self.c + self.g + self.penalty

    @property
    def complete(self) -> bool:
        return not self.pending

    def sentential_form(self, grammar: TemplateGrammar) -> tuple[str, ...]:
        form = [grammar.start]
        for rid in self.derivation:
            rule = grammar.rules[rid]
            at = next(n for n, s in enumerate(form) if s in grammar.nonterminals)
            form[at:at + 1] = rule.rhs
        return tuple(form)


@dataclass
class SearchResult:
    status: str
    template: Template | None = None
    substitution: object = None
    popped: int = 0
    validated: int = 0
    seconds: float = 0.0
    f_trace: list[float] = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.status == "solved"


# ---------------------------------------------------------------------------
# partial templates


def build_partial(grammar: TemplateGrammar, derivation: tuple[int, ...]):
    """Rebuild the (partial) template a derivation prefix describes.

    Top-down grammars give an ``Assignment`` whose right-hand side is a tree
    with ``Hole`` leaves.  Bottom-up grammars give an ``Assignment`` whose
    right-hand side is a flat token list ``[leaf, op, leaf, ...]``.
    """
    pos = 0
    nts = grammar.nonterminals

    def build(symbol: str):
        nonlocal pos
        if pos >= len(derivation):
            return Hole(symbol)
        rule = grammar.rules[derivation[pos]]
        pos += 1
        kids = [build(s) for s in rule.rhs if s in nts]
        rhs = rule.rhs
        if rule.lhs == PROGRAM:
            return Assignment(kids[0], kids[1])
        if rule.lhs == OP:
            return rhs[0]
        if len(rhs) == 1 and rhs[0] not in nts:
            if rhs[0] == EOL:
                return []
            return literal_node(rhs[0])
        if rule.lhs == EXPR and rhs == (EXPR, OP, EXPR):
            return BinOp(kids[1], kids[0], kids[2])
        if rule.lhs == EXPR and rhs == (NEG, EXPR):
            return Neg(kids[0])
        if rule.lhs == EXPR and len(kids) == 1:
            return kids[0]
        # bottom-up chain pieces
        if len(kids) == 2:
            first, rest = kids
            return [first] + (rest if isinstance(rest, list) else [rest])
        op, item, rest = kids
        return [op, item] + (rest if isinstance(rest, list) else [rest])

    return build(grammar.start)


def partial_depth(node) -> int:
    if isinstance(node, Assignment):
        return partial_depth(node.rhs)
    if isinstance(node, BinOp):
        return 1 + max(partial_depth(node.left), partial_depth(node.right))
    if isinstance(node, Neg):
        return 1 + partial_depth(node.operand)
    return 1


def _leaf_holes(symbol: str) -> bool:
    return symbol in (EXPR, TENSOR) or symbol.startswith("TENSOR") and symbol != "TENSOR1"


@dataclass
class _Profile:
    items: list
    pending_leaves: int
    ops: list[str]
    same_tensor_op: bool


def _profile_tree(rhs) -> _Profile:
    items: list = []
    ops: list[str] = []
    holes = 0
    same = False

    def walk(node) -> None:
        nonlocal holes, same
        if isinstance(node, Hole):
            holes += _leaf_holes(node.symbol)
        elif isinstance(node, (Access, Constant)):
            items.append(node)
        elif isinstance(node, Neg):
            walk(node.operand)
        elif isinstance(node, BinOp):
            walk(node.left)
            if not isinstance(node.op, Hole):
                ops.append(node.op)
            if (
                node.op in (ADD, SUB, DIV)
                and isinstance(node.left, Access)
                and isinstance(node.right, Access)
                and node.left.name == node.right.name
            ):
                same = True
            walk(node.right)

    walk(rhs)
    return _Profile(items, holes, ops, same)


def _profile_chain(tokens) -> _Profile:
    if isinstance(tokens, Hole):
        tokens = [tokens]
    items, ops, holes = [], [], 0
    for tok in tokens:
        if isinstance(tok, Hole):
            holes += _leaf_holes(tok.symbol)
        elif isinstance(tok, str):
            ops.append(tok)
        else:
            items.append(tok)
    return _Profile(items, holes, ops, False)


def _tensor_order_ok(items) -> bool:
    names = [it.name for it in items if isinstance(it, Access) and it.name != "a"]
    first = list(dict.fromkeys(names))
    return first == sorted(first)


def _distinct_op_floor(op_count: int) -> int:
    return math.ceil(op_count / 2)


# ---------------------------------------------------------------------------
# penalties and heuristics


def penalty_A(node: SearchNode, ctx: SearchContext) -> float:
    """Penalty for top-down nodes (criteria a1..a5)."""
    tree = node.tree
    if isinstance(tree, Hole):
        return 0.0
    prof = _profile_tree(tree.rhs if isinstance(tree, Assignment) else tree)
    complete = node.complete
    # operand count, LHS included; a lower bound while holes remain
    length = 1 + len(prof.items) + prof.pending_leaves
    total = 0.0
    if ctx.active("a1") and ctx.grammar_has_constant and length > 3:
        with_i = sum(1 for it in prof.items if isinstance(it, Access) and "i" in it.indices)
        has_const = any(isinstance(it, Constant) for it in prof.items)
        if with_i < 2 or not has_const:
            total += 10.0
    if ctx.active("a2"):
        if (complete and length != len(ctx.dims)) or length > len(ctx.dims):
            total += 100.0
    if ctx.active("a3") and not _tensor_order_ok(prof.items):
        return INF
    if complete:
        if ctx.active("a4") and prof.same_tensor_op:
            return INF
        if ctx.active("a5") and len(prof.ops) >= 2 and len(set(prof.ops)) < _distinct_op_floor(ctx.op_count):
            return INF
    return total


def penalty_B(node: SearchNode, ctx: SearchContext) -> float:
    """Penalty for bottom-up nodes (criteria b1, b2)."""
    tree = node.tree
    if isinstance(tree, Hole) or isinstance(tree.rhs, Hole):
        return 0.0
    if isinstance(tree.rhs, list):
        prof = _profile_chain(tree.rhs)
    else:
        prof = _profile_tree(tree.rhs)
    total = 0.0
    if ctx.active("b1") and not _tensor_order_ok(prof.items):
        total += 100.0
    if (
        ctx.active("b2")
        and len(prof.items) >= len(ctx.dims) - 1
        and len(prof.ops) >= 2
        and len(set(prof.ops)) < _distinct_op_floor(ctx.op_count)
    ):
        return INF
    return total


def _key(f: float) -> float:
    # float noise must not break FIFO order between equal-cost nodes
    return round(f, 9)


def _bits(p: float) -> float:
    return INF if p <= 0 else -math.log2(p)


def heuristic_td(node: SearchNode, table: dict[str, float]) -> float:
    if node.complete:
        return 0.0
    return sum(_bits(table[s]) for s in node.pending)


def min_tensor_costs(grammar: TemplateGrammar) -> dict[int, float]:
    """``m(d)``: bits of the most likely rule placing a rank-``d`` tensor."""
    best: dict[int, float] = {}
    for r in grammar.rules:
        if r.lhs.startswith("TENSOR") and r.lhs != "TENSOR1":
            d = literal_rank(r.rhs[0])
            best[d] = max(best.get(d, 0.0), r.probability)
    return {d: _bits(p) for d, p in best.items()}


def heuristic_bu(node: SearchNode, dims, grammar: TemplateGrammar, m: dict[int, float] | None = None) -> float:
    if m is None:
        m = min_tensor_costs(grammar)
    tree = node.tree
    placed = 0
    if not isinstance(tree, Hole) and not isinstance(tree.rhs, Hole):
        profile = _profile_chain if isinstance(tree.rhs, list) else _profile_tree
        placed = len(profile(tree.rhs).items)
    return sum(m.get(d, INF) for d in list(dims)[1 + placed:])


# ---------------------------------------------------------------------------
# enumeration


def chain_to_expr(lhs: Access, tokens) -> Assignment:
    parts = []
    for tok in tokens:
        if isinstance(tok, str):
            parts.append(OP_SYMBOLS[tok])
        elif isinstance(tok, Constant):
            parts.append("Const")
        else:
            parts.append(render_access(tok))
    return Assignment(lhs, parse_expression(f"_ = {' '.join(parts)}").rhs)


def iter_search(grammar: TemplateGrammar, ctx: SearchContext, table=None) -> Iterator[tuple[SearchNode, Template | None]]:
    """Pop nodes in ``f`` order; yield each with the complete template it
    offers for validation (``None`` when there is nothing to validate)."""
    bottom_up = grammar.kind == BU
    if bottom_up:
        m = min_tensor_costs(grammar)
        score = lambda n: heuristic_bu(n, ctx.dims, grammar, m)
        penalize = penalty_B
    else:
        table = table or completion_table(grammar)
        score = lambda n: heuristic_td(n, table)
        penalize = penalty_A
    n_slots = len(ctx.dims) - 1
    nts = grammar.nonterminals

    root = SearchNode((), (grammar.start,), Hole(grammar.start))
    root.g = score(root)
    seq = itertools.count()
    heap = [(_key(root.f), next(seq), root)]
    while heap:
        _, _, node = heapq.heappop(heap)
        candidate = None
        if bottom_up:
            tree = node.tree
            if not isinstance(tree, Hole) and isinstance(tree.rhs, list):
                tokens = [t for t in tree.rhs if not isinstance(t, Hole)]
                items = [t for t in tokens if not isinstance(t, str)]
                only_tail = all(s.startswith("TAIL") for s in node.pending)
                if len(items) == n_slots and len(node.pending) <= 1 and only_tail:
                    candidate = Template(chain_to_expr(tree.lhs, tokens))
        elif node.complete:
            candidate = Template(node.tree)
        yield node, candidate

        if node.complete:
            continue
        head, rest = node.pending[0], node.pending[1:]
        for rid in grammar.by_lhs[head]:
            rule = grammar.rules[rid]
            if rule.probability <= 0:
                continue
            derivation = node.derivation + (rid,)
            child = SearchNode(
                derivation,
                tuple(s for s in rule.rhs if s in nts) + rest,
                build_partial(grammar, derivation),
                c=node.c + rule.cost,
            )
            if not bottom_up and partial_depth(child.tree) > ctx.max_depth:
                continue
            child.penalty = penalize(child, ctx)
            if child.penalty == INF:
                continue
            child.g = score(child)
            if child.f == INF:
                continue
            heapq.heappush(heap, (_key(child.f), next(seq), child))


def _as_substitutions(found) -> Iterable:
    if found is None:
        return ()
    if hasattr(found, "tensor_map"):
        return (found,)
    return found


def _enumerate(grammar, ctx, validate, verify, timeout, max_pops, record_f) -> SearchResult:
    start = time.monotonic()
    deadline = None if timeout is None else start + timeout
    result = SearchResult("exhausted")
    seen: set[str] = set()
    try:
        for node, candidate in iter_search(grammar, ctx):
            if deadline is not None and time.monotonic() > deadline:
                result.status = "timeout"
                break
            result.popped += 1
            if record_f:
                result.f_trace.append(node.f)
            if candidate is not None:
                key = str(candidate.expr)
                if key in seen:
                    continue
                seen.add(key)
                result.validated += 1
                for sub in _as_substitutions(validate(candidate)):
                    if verify is None or verify(candidate, sub):
                        result.status = "solved"
                        result.template = candidate
                        result.substitution = sub
                        break
                if result.solved:
                    break
            if max_pops is not None and result.popped >= max_pops:
                break
    except SearchTimeout:
        result.status = "timeout"
    result.seconds = time.monotonic() - start
    return result


ValidateFn = Callable[[Template], object]
VerifyFn = Callable[[Template, object], bool]


def enumerate_td(
    grammar: TemplateGrammar,
    ctx: SearchContext,
    validate: ValidateFn,
    verify: VerifyFn | None = None,
    timeout: float | None = None,
    max_pops: int | None = None,
    record_f: bool = False,
) -> SearchResult:
    """Top-down weighted A*.

    ``validate`` receives each complete template and returns the
    substitutions consistent with the examples (a single one, ``None``, or an
    iterable that is consumed lazily).  Each is passed to ``verify``; the
    first accepted one ends the search.
    """
    if grammar.kind != TD:
        raise ValueError("enumerate_td needs a top-down grammar")
    return _enumerate(grammar, ctx, validate, verify, timeout, max_pops, record_f)


def enumerate_bu(
    grammar: TemplateGrammar,
    ctx: SearchContext,
    validate: ValidateFn,
    verify: VerifyFn | None = None,
    timeout: float | None = None,
    max_pops: int | None = None,
    record_f: bool = False,
) -> SearchResult:
    """Bottom-up weighted A*; a node holding every predicted operand is
    validated with its trailing TAIL dropped, then expanded as usual."""
    if grammar.kind != BU:
        raise ValueError("enumerate_bu needs a bottom-up grammar")
    return _enumerate(grammar, ctx, validate, verify, timeout, max_pops, record_f)

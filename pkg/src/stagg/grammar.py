"""Template grammars: generation from a dimension list, weight learning and
probability normalization.

Two shapes are produced.  The top-down (``td``) grammar is the binary
expression grammar ``EXPR ::= TENSOR | EXPR OP EXPR`` whose derivations are
expression trees.  The bottom-up (``bu``) grammar is right-linear: an
expression is a first tensor followed by a chain of ``OP TENSORk`` tails, so
every prefix of a derivation is itself almost a complete template.

Both grammars are unambiguous over trees, which makes the leftmost derivation
of a template unique; rule weights are counts over those derivations.
"""

from __future__ import annotations

import itertools
import math
import string
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

from .candidates import Template, TemplateSet, operands
from .errors import InvalidDimensionList, NonConvergence, NotInLanguage, ZeroWeightClass
from .taco import (
    CANONICAL_INDICES,
    CONST_SYMBOL,
    MAX_RANK,
    OPERATORS,
    Access,
    Assignment,
    BinOp,
    Constant,
    Neg,
    Paren,
    leaves,
    map_leaves,
    parse_expression,
    render,
    render_access,
    strip_parens,
)

PROGRAM = "PROGRAM"
TENSOR1 = "TENSOR1"
EXPR = "EXPR"
OP = "OP"
TENSOR = "TENSOR"
EQ = "EQ"
EOL = "EOL"
NEG = "SUB"
KEYWORDS = frozenset({EQ, EOL, *OPERATORS})

TD, BU = "td", "bu"
LETTERS = string.ascii_lowercase
FULL_TD_IDS = "bcdef"


def tail(k: int) -> str:
    return f"TAIL{k}"


def slot(k: int) -> str:
    return f"TENSOR{k}"


@dataclass(frozen=True)
class Rule:
    lhs: str
    rhs: tuple[str, ...]
    weight: float = 1.0
    probability: float | None = None

    @property
    def cost(self) -> float:
        """Rule cost in bits, ``-log2 P``."""
        if self.probability is None:
            raise ValueError("grammar is not normalized")
        if self.probability <= 0.0:
            return math.inf
        return -math.log2(self.probability)


@dataclass(frozen=True)
class Derivation:
    rules: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.rules)


@dataclass(frozen=True)
class TemplateGrammar:
    kind: str
    rules: tuple[Rule, ...]
    dims: tuple[int, ...]
    start: str = PROGRAM
    refined: bool = True
    skipped: int = 0

    @cached_property
    def nonterminals(self) -> frozenset[str]:
        return frozenset(r.lhs for r in self.rules)

    @cached_property
    def terminals(self) -> frozenset[str]:
        return frozenset(
            s for r in self.rules for s in r.rhs if s not in self.nonterminals
        )

    @cached_property
    def by_lhs(self) -> dict[str, tuple[int, ...]]:
        table: dict[str, list[int]] = defaultdict(list)
        for n, r in enumerate(self.rules):
            table[r.lhs].append(n)
        return {k: tuple(v) for k, v in table.items()}

    @cached_property
    def index(self) -> dict[tuple[str, tuple[str, ...]], int]:
        return {(r.lhs, r.rhs): n for n, r in enumerate(self.rules)}

    @property
    def normalized(self) -> bool:
        return all(r.probability is not None for r in self.rules)

    def is_nonterminal(self, symbol: str) -> bool:
        return symbol in self.nonterminals

    def rule_id(self, lhs: str, rhs: Sequence[str]) -> int:
        try:
            return self.index[(lhs, tuple(rhs))]
        except KeyError:
            raise NotInLanguage(f"no rule {lhs} ::= {' '.join(rhs)}") from None

    def rules_for(self, nt: str) -> list[Rule]:
        return [self.rules[n] for n in self.by_lhs.get(nt, ())]

    @cached_property
    def operator_count(self) -> int:
        return sum(1 for r in self.rules_for(OP) if r.probability is None or r.probability > 0)

    @cached_property
    def has_constant(self) -> bool:
        return CONST_SYMBOL in self.terminals

    def dump(self) -> str:
        """One rule per line: ``NT ::= rhs  [w=..., p=...]``."""
        lines = []
        for r in self.rules:
            rhs = " ".join(_fmt_symbol(s, self.nonterminals) for s in r.rhs)
            p = "-" if r.probability is None else f"{r.probability:.6f}"
            lines.append(f"{r.lhs} ::= {rhs}  [w={r.weight:g}, p={p}]")
        return "\n".join(lines) + "\n"


def _fmt_symbol(symbol: str, nonterminals) -> str:
    if symbol in nonterminals or symbol in KEYWORDS:
        return symbol
    return f'"{symbol}"'


@lru_cache(maxsize=None)
def literal_node(text: str) -> Access | Constant:
    """AST leaf for a tensor terminal such as ``"b(i,j)"`` or ``"Const"``."""
    if text == CONST_SYMBOL:
        return Constant(None)
    rhs = parse_expression(f"_ = {text}").rhs
    if not isinstance(rhs, Access):
        raise ValueError(f"not a tensor terminal: {text!r}")
    return rhs


def literal_rank(text: str) -> int:
    node = literal_node(text)
    return node.rank if isinstance(node, Access) else 0


# ---------------------------------------------------------------------------
# generation


def _check_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2:
        raise InvalidDimensionList(f"dimension list {list(dims)} needs at least two entries")
    if len(dims) > len(LETTERS):
        raise InvalidDimensionList("dimension list longer than the tensor alphabet")
    for d in dims:
        if not 0 <= d <= MAX_RANK:
            raise InvalidDimensionList(f"rank {d} outside 0..{MAX_RANK}")
    return dims


def index_pattern(indices: Sequence[str]) -> tuple[int, ...]:
    """Equality shape of an index tuple: (i,j) -> (0,1), (j,j) -> (0,0)."""
    first: dict[str, int] = {}
    return tuple(first.setdefault(v, len(first)) for v in indices)


def observed_patterns(ts: Iterable[Template]) -> dict[int, set[tuple[int, ...]]]:
    seen: dict[int, set[tuple[int, ...]]] = defaultdict(set)
    for t in ts:
        for leaf in leaves(t.expr.rhs):
            if isinstance(leaf, Access):
                seen[leaf.rank].add(index_pattern(leaf.indices))
    return seen


def _lhs_literal(rank: int) -> str:
    return render_access(Access("a", CANONICAL_INDICES[:rank]))


def _arrangements(rank: int, pool: int, allowed: set[tuple[int, ...]] | None):
    names = CANONICAL_INDICES[:pool]
    for combo in itertools.product(names, repeat=rank):
        if allowed is None or index_pattern(combo) in allowed:
            yield combo


def _slot_literals(letter: str, rank: int, pool: int, patterns) -> list[str]:
    if rank == 0:
        return [letter]
    if patterns is None:
        allowed = None
    else:
        allowed = patterns.get(rank) or {tuple(range(rank))}
    return [render_access(Access(letter, combo)) for combo in _arrangements(rank, pool, allowed)]


def _index_pool(dims: Sequence[int], ts: TemplateSet) -> int:
    return min(len(CANONICAL_INDICES), max(ts.unique_index_count, max(dims)))


def _uses_negation(ts: Iterable[Template]) -> bool:
    def walk(node) -> bool:
        if isinstance(node, Neg):
            return True
        if isinstance(node, BinOp):
            return walk(node.left) or walk(node.right)
        if isinstance(node, Paren):
            return walk(node.inner)
        return False

    return any(walk(t.expr.rhs) for t in ts)


def _full_literals(letter: str) -> list[str]:
    out = [letter]
    for rank in range(1, MAX_RANK + 1):
        out += [render_access(Access(letter, c)) for c in itertools.product(CANONICAL_INDICES, repeat=rank)]
    return out


def generate_td_grammar(dims: Sequence[int], ts: TemplateSet, full: bool = False) -> TemplateGrammar:
    """Top-down template grammar for a predicted dimension list.

    Each right-hand slot ``n`` contributes terminals for tensor ``LETTERS[n]``
    indexed every way its rank allows over the first ``i(T)`` canonical
    indices, minus index shapes no candidate ever uses.  Rank-0 slots add a
    bare name and the symbolic constant.  ``full=True`` builds the unrefined
    grammar over tensors b..f of every rank instead; the output rank stays
    fixed to ``dims[0]``.
    """
    dims = _check_dims(dims)
    rules = [
        Rule(PROGRAM, (TENSOR1, EQ, EXPR)),
        Rule(TENSOR1, (_lhs_literal(dims[0]),)),
        Rule(EXPR, (TENSOR,)),
        Rule(EXPR, (EXPR, OP, EXPR)),
    ]
    if full or _uses_negation(ts):
        rules.append(Rule(EXPR, (NEG, EXPR)))
    rules += [Rule(OP, (op,)) for op in OPERATORS]

    literals: list[str] = []
    if full:
        for letter in FULL_TD_IDS:
            literals += _full_literals(letter)
        literals.append(CONST_SYMBOL)
    else:
        pool = _index_pool(dims, ts)
        patterns = observed_patterns(ts)
        for n, rank in enumerate(dims[1:], start=1):
            literals += _slot_literals(LETTERS[n], rank, pool, patterns)
            if rank == 0 and CONST_SYMBOL not in literals:
                literals.append(CONST_SYMBOL)
    rules += [Rule(TENSOR, (lit,)) for lit in dict.fromkeys(literals)]
    return TemplateGrammar(TD, tuple(rules), dims, refined=not full)


def generate_bu_grammar(dims: Sequence[int], ts: TemplateSet, full: bool = False) -> TemplateGrammar:
    """Right-linear grammar: ``EXPR ::= TENSOR2 TAIL1`` and
    ``TAILk ::= EOL | OP TENSOR(k+2) TAIL(k+1)`` while ``|L| > k+1``."""
    dims = _check_dims(dims)
    n = len(dims)
    rules = [
        Rule(PROGRAM, (TENSOR1, EQ, EXPR)),
        Rule(TENSOR1, (_lhs_literal(dims[0]),)),
        Rule(EXPR, (slot(2), tail(1))),
    ]
    for k in range(1, n):
        rules.append(Rule(tail(k), (EOL,)))
        if n > k + 1:
            rules.append(Rule(tail(k), (OP, slot(k + 2), tail(k + 1))))
    rules += [Rule(OP, (op,)) for op in OPERATORS]
    pool = _index_pool(dims, ts)
    patterns = observed_patterns(ts)
    for pos in range(2, n + 1):
        letter = LETTERS[pos - 1]
        if full:
            literals = _full_literals(letter) + [CONST_SYMBOL]
        else:
            rank = dims[pos - 1]
            literals = _slot_literals(letter, rank, pool, patterns)
            if rank == 0:
                literals.append(CONST_SYMBOL)
        rules += [Rule(slot(pos), (lit,)) for lit in literals]
    return TemplateGrammar(BU, tuple(rules), dims, refined=not full)


def generate_grammar(kind: str, dims: Sequence[int], ts: TemplateSet, full: bool = False) -> TemplateGrammar:
    if kind == TD:
        return generate_td_grammar(dims, ts, full)
    if kind == BU:
        return generate_bu_grammar(dims, ts, full)
    raise ValueError(f"unknown grammar kind {kind!r}")


# ---------------------------------------------------------------------------
# derivations


def align_to_slots(expr: Assignment) -> Assignment:
    """Rename tensors so the n-th operand carries the n-th letter.

    Templates name tensors b, c, ... skipping constants, while grammar slots
    are positional over all operands (constants included).
    """
    names = {}
    for pos, op in enumerate(operands(expr)):
        if pos and isinstance(op, Access):
            names[op.name] = LETTERS[pos]

    def rename(leaf):
        if isinstance(leaf, Access):
            return Access(names[leaf.name], leaf.indices)
        return leaf

    return Assignment(expr.lhs, map_leaves(expr.rhs, rename))


def _leaf_text(leaf) -> str:
    if isinstance(leaf, Constant):
        if leaf.value is not None:
            raise NotInLanguage("templates carry only symbolic constants")
        return CONST_SYMBOL
    return render_access(leaf)


def _derive_td(g: TemplateGrammar, node, out: list[int]) -> None:
    if isinstance(node, (Access, Constant)):
        out.append(g.rule_id(EXPR, (TENSOR,)))
        out.append(g.rule_id(TENSOR, (_leaf_text(node),)))
    elif isinstance(node, BinOp):
        out.append(g.rule_id(EXPR, (EXPR, OP, EXPR)))
        _derive_td(g, node.left, out)
        out.append(g.rule_id(OP, (node.op,)))
        _derive_td(g, node.right, out)
    elif isinstance(node, Neg):
        out.append(g.rule_id(EXPR, (NEG, EXPR)))
        _derive_td(g, node.operand, out)
    else:
        raise NotInLanguage(f"unsupported node {node!r}")


def chain_of(rhs) -> tuple[list, list[str]] | None:
    """Operands and operators of a paren-free right-hand side whose flat token
    sequence parses back to the same tree; ``None`` otherwise."""
    rhs = strip_parens(rhs)
    flat = render(rhs, parens=False)
    try:
        reparsed = parse_expression(f"_ = {flat}").rhs
    except SyntaxError:
        return None
    if reparsed != rhs:
        return None
    ops: list[str] = []
    items: list = []

    def walk(node) -> bool:
        if isinstance(node, BinOp):
            if not walk(node.left):
                return False
            ops.append(node.op)
            return walk(node.right)
        if isinstance(node, (Access, Constant)):
            items.append(node)
            return True
        return False

    if not walk(rhs):
        return None
    return items, ops


def derive_leftmost(g: TemplateGrammar, t: Template | Assignment) -> Derivation:
    expr = t.expr if isinstance(t, Template) else t
    expr = strip_parens(align_to_slots(expr))
    out = [
        g.rule_id(PROGRAM, (TENSOR1, EQ, EXPR)),
        g.rule_id(TENSOR1, (render_access(expr.lhs),)),
    ]
    if g.kind == TD:
        _derive_td(g, expr.rhs, out)
        return Derivation(tuple(out))

    chain = chain_of(expr.rhs)
    if chain is None:
        raise NotInLanguage(f"{render(expr)} is not a flat operator chain")
    items, ops = chain
    out.append(g.rule_id(EXPR, (slot(2), tail(1))))
    out.append(g.rule_id(slot(2), (_leaf_text(items[0]),)))
    for k, (op, item) in enumerate(zip(ops, items[1:]), start=1):
        out.append(g.rule_id(tail(k), (OP, slot(k + 2), tail(k + 1))))
        out.append(g.rule_id(OP, (op,)))
        out.append(g.rule_id(slot(k + 2), (_leaf_text(item),)))
    out.append(g.rule_id(tail(len(items)), (EOL,)))
    return Derivation(tuple(out))


# ---------------------------------------------------------------------------
# weights and probabilities


def learn_weights(g: TemplateGrammar, ts: Iterable[Template], default_weight: float = 1.0) -> TemplateGrammar:
    """Weight = occurrences across the templates' leftmost derivations.

    Rules never used get ``default_weight``; templates outside the language
    are skipped and counted in ``skipped``.
    """
    counts: Counter[int] = Counter()
    skipped = 0
    for t in ts:
        try:
            counts.update(derive_leftmost(g, t).rules)
        except NotInLanguage:
            skipped += 1
    rules = tuple(
        replace(r, weight=float(counts[n]) if counts[n] else float(default_weight), probability=None)
        for n, r in enumerate(g.rules)
    )
    return replace(g, rules=rules, skipped=skipped)


def normalize(g: TemplateGrammar) -> TemplateGrammar:
    totals: dict[str, float] = defaultdict(float)
    for r in g.rules:
        if r.weight < 0:
            raise ValueError(f"negative weight on {r.lhs} ::= {' '.join(r.rhs)}")
        totals[r.lhs] += r.weight
    for nt, total in totals.items():
        if total <= 0:
            raise ZeroWeightClass(f"weights of {nt} sum to zero")
    rules = tuple(replace(r, probability=r.weight / totals[r.lhs]) for r in g.rules)
    return replace(g, rules=rules)


def uniform(g: TemplateGrammar) -> TemplateGrammar:
    """Equal weights within each nonterminal, then normalized."""
    return normalize(replace(g, rules=tuple(replace(r, weight=1.0) for r in g.rules)))


def probability_sums(g: TemplateGrammar) -> dict[str, float]:
    sums: dict[str, float] = defaultdict(float)
    for r in g.rules:
        sums[r.lhs] += r.probability
    return dict(sums)


def derivation_probability(g: TemplateGrammar, d: Derivation) -> float:
    return math.prod(g.rules[n].probability for n in d.rules)


def completion_table(g: TemplateGrammar, tol: float = 1e-12, max_iter: int = 10_000) -> dict[str, float]:
    """Best probability of deriving any terminal string from each nonterminal.

    Monotone fixed-point iteration starting from zero.
    """
    if not g.normalized:
        raise ValueError("grammar must be normalized first")
    h = {nt: 0.0 for nt in g.nonterminals}
    for _ in range(max_iter):
        new = {}
        for nt in g.nonterminals:
            best = 0.0
            for r in g.rules_for(nt):
                p = r.probability
                for s in r.rhs:
                    if s in h:
                        p *= h[s]
                best = max(best, p)
            new[nt] = best
        delta = max(abs(new[nt] - h[nt]) for nt in h)
        h = new
        if delta < tol:
            return h
    raise NonConvergence(f"completion table did not converge in {max_iter} iterations")


def reachable(g: TemplateGrammar) -> set[str]:
    seen = {g.start}
    stack = [g.start]
    while stack:
        for r in g.rules_for(stack.pop()):
            for s in r.rhs:
                if s in g.nonterminals and s not in seen:
                    seen.add(s)
                    stack.append(s)
    return seen

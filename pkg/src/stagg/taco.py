"""TACO index notation: AST, parser, printer and an exact-rational evaluator.

Expressions have the shape ``lhs = rhs`` where ``lhs`` is a tensor access and
``rhs`` is built from accesses, constants, unary negation, parentheses and the
four binary operators.  Index variables that do not occur on the left-hand side
are summed.  The summation for such an index sits at the smallest subexpression
that contains every occurrence of it, so ``a(i) = b(i) + c(i,j)`` reads as
``b(i) + sum_j c(i,j)``.
"""

from __future__ import annotations

import itertools
import math
import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence, Union

from .errors import (
    DivisionByZero,
    EvaluationError,
    InconsistentExtent,
    RankMismatch,
    TacoSyntaxError,
    UnboundTensor,
)

CANONICAL_INDICES = ("i", "j", "k", "l")
MAX_RANK = 4
CONST_SYMBOL = "Const"

ADD, SUB, MUL, DIV = "ADD", "SUB", "MUL", "DIV"
OPERATORS = (ADD, SUB, MUL, DIV)
OP_SYMBOLS = {ADD: "+", SUB: "-", MUL: "*", DIV: "/"}
_SYMBOL_OPS = {v: k for k, v in OP_SYMBOLS.items()}
_PRECEDENCE = {ADD: 1, SUB: 1, MUL: 2, DIV: 2}

Number = Union[int, Fraction]


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Access:
    name: str
    indices: tuple[str, ...] = ()

    @property
    def rank(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class Constant:
    """A literal.  ``value is None`` marks the symbolic template constant."""

    value: Fraction | None = None

    @property
    def symbolic(self) -> bool:
        return self.value is None


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Paren:
    inner: "Node"


Node = Union[Access, Constant, Neg, BinOp, Paren]


@dataclass(frozen=True)
class Assignment:
    lhs: Access
    rhs: Node

    def __str__(self) -> str:
        return render(self)


TacoExpr = Assignment


# ---------------------------------------------------------------------------
# tree utilities


def children(node: Node) -> tuple[Node, ...]:
    if isinstance(node, BinOp):
        return (node.left, node.right)
    if isinstance(node, Neg):
        return (node.operand,)
    if isinstance(node, Paren):
        return (node.inner,)
    return ()


def leaves(node: Node) -> Iterator[Access | Constant]:
    """Operand leaves in textual (left-to-right) order."""
    if isinstance(node, (Access, Constant)):
        yield node
        return
    for child in children(node):
        yield from leaves(child)


def accesses(expr: Assignment | Node) -> Iterator[Access]:
    if isinstance(expr, Assignment):
        yield expr.lhs
        expr = expr.rhs
    for leaf in leaves(expr):
        if isinstance(leaf, Access):
            yield leaf


def strip_parens(node):
    """Drop grouping nodes; the tree shape already records the grouping."""
    if isinstance(node, Assignment):
        return Assignment(node.lhs, strip_parens(node.rhs))
    if isinstance(node, Paren):
        return strip_parens(node.inner)
    if isinstance(node, Neg):
        return Neg(strip_parens(node.operand))
    if isinstance(node, BinOp):
        return BinOp(node.op, strip_parens(node.left), strip_parens(node.right))
    return node


def map_leaves(node: Node, fn) -> Node:
    if isinstance(node, (Access, Constant)):
        return fn(node)
    if isinstance(node, Paren):
        return Paren(map_leaves(node.inner, fn))
    if isinstance(node, Neg):
        return Neg(map_leaves(node.operand, fn))
    if isinstance(node, BinOp):
        return BinOp(node.op, map_leaves(node.left, fn), map_leaves(node.right, fn))
    raise TypeError(f"not an expression node: {node!r}")


def expr_depth(expr: Assignment | Node) -> int:
    """Tree depth of the right-hand side; index lists do not count."""
    if isinstance(expr, Assignment):
        expr = expr.rhs
    if isinstance(expr, Paren):
        return expr_depth(expr.inner)
    if isinstance(expr, BinOp):
        return 1 + max(expr_depth(expr.left), expr_depth(expr.right))
    if isinstance(expr, Neg):
        return 1 + expr_depth(expr.operand)
    return 1


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<id>[A-Za-z_][A-Za-z0-9_]*)|(?P<sym>:=|[()=,+\-*/]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    end = len(text.rstrip())
    while pos < end:
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise TacoSyntaxError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str):
        _, value, where = self.peek()
        found = repr(value) if value else "end of input"
        raise TacoSyntaxError(f"{message}, found {found}", where, self.text)

    def expect(self, value: str) -> None:
        if self.peek()[1] != value:
            self.fail(f"expected {value!r}")
        self.advance()

    def program(self) -> Assignment:
        lhs = self.access(allow_const=False)
        if self.peek()[1] not in ("=", ":="):
            self.fail("expected '='")
        self.advance()
        rhs = self.expr()
        if self.peek()[0] != "eof":
            self.fail("unexpected trailing input")
        return Assignment(lhs, rhs)

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = _SYMBOL_OPS[self.advance()[1]]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = _SYMBOL_OPS[self.advance()[1]]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.primary()

    def primary(self) -> Node:
        kind, value, _ = self.peek()
        if kind == "num":
            self.advance()
            return Constant(Fraction(value))
        if kind == "id":
            return self.access(allow_const=True)
        if value == "(":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return Paren(inner)
        self.fail("expected an operand")

    def access(self, allow_const: bool):
        kind, name, _ = self.peek()
        if kind != "id":
            self.fail("expected a tensor name")
        self.advance()
        if self.peek()[1] != "(":
            if name == CONST_SYMBOL and allow_const:
                return Constant(None)
            return Access(name)
        self.advance()
        indices = []
        while True:
            kind, value, _ = self.peek()
            if kind != "id":
                self.fail("expected an index variable")
            self.advance()
            indices.append(value)
            if self.peek()[1] == ",":
                self.advance()
                continue
            break
        self.expect(")")
        if len(indices) > MAX_RANK:
            self.fail(f"more than {MAX_RANK} indices")
        return Access(name, tuple(indices))


def parse_expression(text: str) -> Assignment:
    """Parse ``lhs = rhs`` (``:=`` is accepted as a synonym of ``=``)."""
    return _Parser(text).program()


# ---------------------------------------------------------------------------
# printing


def _fmt_constant(value: Fraction | None) -> str:
    if value is None:
        return CONST_SYMBOL
    if value.denominator == 1:
        return str(value.numerator)
    den = value.denominator
    while den % 2 == 0:
        den //= 2
    while den % 5 == 0:
        den //= 5
    if den == 1:
        digits = 0
        scaled = value
        while scaled.denominator != 1:
            scaled *= 10
            digits += 1
        text = f"{abs(scaled.numerator):0{digits + 1}d}"
        sign = "-" if value < 0 else ""
        return f"{sign}{text[:-digits]}.{text[-digits:]}"
    return f"{value.numerator}/{value.denominator}"


def render_access(node: Access) -> str:
    if not node.indices:
        return node.name
    return f"{node.name}({','.join(node.indices)})"


def _render(node: Node, parens: bool = True) -> str:
    if isinstance(node, Access):
        return render_access(node)
    if isinstance(node, Constant):
        return _fmt_constant(node.value)
    if isinstance(node, Paren):
        return f"({_render(node.inner, parens)})"
    if isinstance(node, Neg):
        inner = _render(node.operand, parens)
        if parens and isinstance(node.operand, BinOp):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, BinOp):
        prec = _PRECEDENCE[node.op]
        left = _render(node.left, parens)
        right = _render(node.right, parens)
        if parens:
            if isinstance(node.left, BinOp) and _PRECEDENCE[node.left.op] < prec:
                left = f"({left})"
            if isinstance(node.right, BinOp) and _PRECEDENCE[node.right.op] <= prec:
                right = f"({right})"
        return f"{left} {OP_SYMBOLS[node.op]} {right}"
    raise TypeError(f"not an expression node: {node!r}")


def render(expr: Assignment | Node, parens: bool = True) -> str:
    """Print an expression.

    Explicit ``Paren`` nodes are kept; trees built without them get the
    minimal parentheses needed for the text to parse back to the same shape.
    ``parens=False`` prints the bare token sequence.
    """
    if isinstance(expr, Assignment):
        return f"{render_access(expr.lhs)} = {_render(expr.rhs, parens)}"
    return _render(expr, parens)


# ---------------------------------------------------------------------------
# values


def exact(value) -> Number:
    """Coerce to an exact number, collapsing integral fractions to ``int``."""
    if isinstance(value, bool):
        raise TypeError("booleans are not tensor values")
    if isinstance(value, int):
        return value
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else value
    if isinstance(value, float):
        return exact(Fraction(value))
    if isinstance(value, str):
        return exact(Fraction(value))
    raise TypeError(f"cannot use {value!r} as an exact value")


@dataclass(frozen=True)
class TensorValue:
    """Dense tensor of exact rationals stored row-major."""

    extents: tuple[int, ...]
    data: tuple[Number, ...]

    def __post_init__(self) -> None:
        if len(self.extents) > MAX_RANK:
            raise ValueError(f"rank {len(self.extents)} exceeds {MAX_RANK}")
        if any(e <= 0 for e in self.extents):
            raise ValueError(f"extents must be positive: {self.extents}")
        if len(self.data) != math.prod(self.extents):
            raise ValueError(
                f"{len(self.data)} values do not fill extents {self.extents}"
            )

    @property
    def rank(self) -> int:
        return len(self.extents)

    @classmethod
    def scalar(cls, value) -> "TensorValue":
        return cls((), (exact(value),))

    @classmethod
    def from_nested(cls, obj) -> "TensorValue":
        extents: list[int] = []
        probe = obj
        while isinstance(probe, (list, tuple)):
            extents.append(len(probe))
            probe = probe[0] if probe else None
        flat: list[Number] = []

        def walk(item, depth: int) -> None:
            if depth == len(extents):
                flat.append(exact(item))
                return
            if not isinstance(item, (list, tuple)) or len(item) != extents[depth]:
                raise ValueError("ragged nested tensor literal")
            for sub in item:
                walk(sub, depth + 1)

        walk(obj, 0)
        return cls(tuple(extents), tuple(flat))

    def to_nested(self):
        if not self.extents:
            return self.data[0]

        def build(offset: int, depth: int):
            if depth == len(self.extents):
                return self.data[offset]
            stride = math.prod(self.extents[depth + 1:])
            return [build(offset + n * stride, depth + 1) for n in range(self.extents[depth])]

        return build(0, 0)

    def strides(self) -> tuple[int, ...]:
        out = []
        acc = 1
        for e in reversed(self.extents):
            out.append(acc)
            acc *= e
        return tuple(reversed(out))

    def __getitem__(self, index: Sequence[int]) -> Number:
        if len(index) != self.rank:
            raise IndexError("index length does not match rank")
        return self.data[sum(i * s for i, s in zip(index, self.strides()))]


# ---------------------------------------------------------------------------
# evaluation


def infer_extents(expr: Assignment, bindings: Mapping[str, TensorValue]) -> dict[str, int]:
    """Map each index variable to its extent, checking ranks and consistency."""
    extents: dict[str, int] = {}
    for acc in accesses(expr):
        value = bindings.get(acc.name)
        if value is None:
            if acc is expr.lhs:
                continue
            raise UnboundTensor(f"tensor {acc.name!r} is not bound")
        if value.rank != acc.rank:
            raise RankMismatch(
                f"{acc.name} accessed with {acc.rank} indices but has rank {value.rank}"
            )
        for var, extent in zip(acc.indices, value.extents):
            seen = extents.setdefault(var, extent)
            if seen != extent:
                raise InconsistentExtent(
                    f"index {var} ranges over {seen} and {extent}"
                )
    for var in expr.lhs.indices:
        if var not in extents:
            raise InconsistentExtent(f"no extent known for output index {var}")
    return extents


def _combine(op: str, x: Number, y: Number) -> Number:
    if op == ADD:
        return x + y
    if op == SUB:
        return x - y
    if op == MUL:
        return x * y
    if y == 0:
        raise DivisionByZero("division by zero")
    return exact(Fraction(x) / y)


class _Table:
    """Values of a subexpression over its remaining free indices."""

    __slots__ = ("free", "values", "counts")

    def __init__(self, free: tuple[str, ...], values: dict, counts: Counter) -> None:
        self.free = free
        self.values = values
        self.counts = counts


def _eval_node(node: Node, bindings, extents, totals, keep) -> _Table:
    if isinstance(node, Paren):
        return _eval_node(node.inner, bindings, extents, totals, keep)
    if isinstance(node, Constant):
        if node.value is None:
            raise EvaluationError("symbolic constant has no value")
        table = _Table((), {(): exact(node.value)}, Counter())
    elif isinstance(node, Access):
        value = bindings[node.name]
        free = tuple(dict.fromkeys(node.indices))
        pos = [free.index(v) for v in node.indices]
        strides = value.strides()
        data = value.data
        values = {}
        for asg in itertools.product(*(range(extents[v]) for v in free)):
            values[asg] = data[sum(asg[p] * s for p, s in zip(pos, strides))]
        table = _Table(free, values, Counter(node.indices))
    elif isinstance(node, Neg):
        inner = _eval_node(node.operand, bindings, extents, totals, keep)
        table = _Table(inner.free, {k: -v for k, v in inner.values.items()}, inner.counts)
    elif isinstance(node, BinOp):
        left = _eval_node(node.left, bindings, extents, totals, keep)
        right = _eval_node(node.right, bindings, extents, totals, keep)
        free = left.free + tuple(v for v in right.free if v not in left.free)
        lpos = [free.index(v) for v in left.free]
        rpos = [free.index(v) for v in right.free]
        lv, rv, op = left.values, right.values, node.op
        values = {}
        for asg in itertools.product(*(range(extents[v]) for v in free)):
            values[asg] = _combine(
                op, lv[tuple(asg[p] for p in lpos)], rv[tuple(asg[p] for p in rpos)]
            )
        table = _Table(free, values, left.counts + right.counts)
    else:
        raise TypeError(f"not an expression node: {node!r}")

    done = [v for v in table.free if v not in keep and table.counts[v] == totals[v]]
    if not done:
        return table
    remaining = tuple(v for v in table.free if v not in done)
    rpos = [table.free.index(v) for v in remaining]
    summed: dict = {}
    for asg, val in table.values.items():
        key = tuple(asg[p] for p in rpos)
        summed[key] = summed.get(key, 0) + val
    if not summed:
        summed[()] = 0
    return _Table(remaining, summed, table.counts)


def evaluate(expr: Assignment, bindings: Mapping[str, TensorValue]) -> TensorValue:
    """Evaluate ``expr`` and return the value of its left-hand side."""
    if len(set(expr.lhs.indices)) != len(expr.lhs.indices):
        raise EvaluationError("repeated index on the left-hand side")
    extents = infer_extents(expr, bindings)
    totals = Counter()
    for leaf in leaves(expr.rhs):
        if isinstance(leaf, Access):
            totals.update(leaf.indices)
    keep = set(expr.lhs.indices)
    table = _eval_node(expr.rhs, bindings, extents, totals, keep)
    out_vars = expr.lhs.indices
    pos = [out_vars.index(v) for v in table.free]
    data = []
    for asg in itertools.product(*(range(extents[v]) for v in out_vars)):
        data.append(exact(table.values[tuple(asg[p] for p in pos)]))
    return TensorValue(tuple(extents[v] for v in out_vars), tuple(data))

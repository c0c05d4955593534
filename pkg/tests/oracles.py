"""Reference implementations the package is checked against.

They share no code with the package beyond the AST node classes.
"""

from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

from stagg.taco import Access, Assignment, BinOp, Constant, Neg, Paren


# ---------------------------------------------------------------------------
# naive evaluator


def _leaf_paths(node, path=()):
    if isinstance(node, Paren):
        yield from _leaf_paths(node.inner, path)
    elif isinstance(node, Neg):
        yield from _leaf_paths(node.operand, path + (0,))
    elif isinstance(node, BinOp):
        yield from _leaf_paths(node.left, path + (0,))
        yield from _leaf_paths(node.right, path + (1,))
    else:
        yield path, node


def _common_prefix(paths):
    out = []
    for column in zip(*paths):
        if len(set(column)) != 1:
            break
        out.append(column[0])
    return tuple(out)


def naive_evaluate(expr: Assignment, tensors: dict, extents: dict) -> dict:
    """Evaluate by brute-force loops.

    ``tensors`` maps names to nested lists (or plain numbers for scalars);
    the result maps output index tuples to values.  Every index not on the
    left is summed at the deepest node whose subtree holds all its uses.
    """
    uses: dict[str, list] = {}
    for path, leaf in _leaf_paths(expr.rhs):
        if isinstance(leaf, Access):
            for v in leaf.indices:
                uses.setdefault(v, []).append(path)
    sum_at: dict[tuple, list[str]] = {}
    for v, paths in uses.items():
        if v not in expr.lhs.indices:
            sum_at.setdefault(_common_prefix(paths), []).append(v)

    def lookup(name, idx, env):
        value = tensors[name]
        for v in idx:
            value = value[env[v]]
        return Fraction(value)

    def ev(node, path, env):
        summed = sum_at.get(path, [])
        if summed:
            total = Fraction(0)
            for values in itertools.product(*(range(extents[v]) for v in summed)):
                total += ev_here(node, path, {**env, **dict(zip(summed, values))})
            return total
        return ev_here(node, path, env)

    def ev_here(node, path, env):
        if isinstance(node, Paren):
            return ev_here(node.inner, path, env)
        if isinstance(node, Access):
            return lookup(node.name, node.indices, env)
        if isinstance(node, Constant):
            return Fraction(node.value)
        if isinstance(node, Neg):
            return -ev(node.operand, path + (0,), env)
        x = ev(node.left, path + (0,), env)
        y = ev(node.right, path + (1,), env)
        if node.op == "ADD":
            return x + y
        if node.op == "SUB":
            return x - y
        if node.op == "MUL":
            return x * y
        if y == 0:
            raise ZeroDivisionError
        return x / y

    out = {}
    for values in itertools.product(*(range(extents[v]) for v in expr.lhs.indices)):
        out[values] = ev(expr.rhs, (), dict(zip(expr.lhs.indices, values)))
    return out


def random_nested(rng: random.Random, shape, lo=-8, hi=8):
    if not shape:
        return rng.randint(lo, hi)
    return [random_nested(rng, shape[1:], lo, hi) for _ in range(shape[0])]


def random_expression(rng: random.Random, max_operands: int = 3, with_div: bool = True) -> Assignment:
    """Random grammatical assignment over tensors b, c, d and indices i..l."""
    n = rng.randint(1, max_operands)
    names = "bcd"
    leaves = []
    for k in range(n):
        if rng.random() < 0.15:
            leaves.append(Constant(Fraction(rng.randint(1, 5))))
            continue
        rank = rng.randint(0, 3)
        leaves.append(Access(names[k], tuple(rng.choice("ijkl") for _ in range(rank))))
    ops = ["ADD", "SUB", "MUL"] + (["DIV"] if with_div else [])

    def build(items):
        if len(items) == 1:
            node = items[0]
            return Neg(node) if rng.random() < 0.1 else node
        cut = rng.randint(1, len(items) - 1)
        return BinOp(rng.choice(ops), build(items[:cut]), build(items[cut:]))

    rhs = build(leaves)
    used = list(dict.fromkeys(v for leaf in leaves if isinstance(leaf, Access) for v in leaf.indices))
    rng.shuffle(used)
    lhs_idx = tuple(used[: rng.randint(0, len(used))])
    return Assignment(Access("a", lhs_idx), rhs)


# ---------------------------------------------------------------------------
# brute-force template enumeration for top-down grammars


def brute_force_trees(leaves: dict[str, float], ops: dict[str, float], p_leaf: float, p_bin: float, depth: int):
    """Yield every expression tree up to ``depth`` with its probability.

    ``leaves`` and ``ops`` map a terminal to its rule probability; ``p_leaf``
    and ``p_bin`` are the probabilities of ``EXPR -> TENSOR`` and
    ``EXPR -> EXPR OP EXPR``.  Zero-probability choices are left out.
    """
    level = {1: [(name, p_leaf * p) for name, p in leaves.items() if p > 0]}
    yield from level[1]
    for d in range(2, depth + 1):
        shallower = [t for k in range(1, d) for t in level[k]]
        new = []
        for (lt, lp), (rt, rp) in itertools.product(shallower, repeat=2):
            if max(_depth(lt), _depth(rt)) != d - 1:
                continue
            for op, p in ops.items():
                if p > 0:
                    tree = ((op, lt, rt), p_bin * p * lp * rp)
                    if d < depth:
                        new.append(tree)
                    yield tree
        level[d] = new


def _depth(tree) -> int:
    if isinstance(tree, str):
        return 1
    return 1 + max(_depth(tree[1]), _depth(tree[2]))


def bits(p: float) -> float:
    return -math.log2(p)

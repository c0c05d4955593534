import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from oracles import naive_evaluate, random_expression, random_nested
from stagg.errors import (
    DivisionByZero,
    InconsistentExtent,
    RankMismatch,
    TacoSyntaxError,
    UnboundTensor,
)
from stagg.taco import (
    Access,
    Assignment,
    BinOp,
    Constant,
    Neg,
    Paren,
    TensorValue,
    evaluate,
    expr_depth,
    parse_expression,
    render,
    strip_parens,
)


def T(obj):
    return TensorValue.from_nested(obj)


class TestParse:
    def test_matvec_template(self):
        e = parse_expression("a(i) = b(i,j) * c(j)")
        assert e.lhs == Access("a", ("i",))
        assert e.rhs == BinOp("MUL", Access("b", ("i", "j")), Access("c", ("j",)))

    def test_colon_equals(self):
        a = parse_expression("Result(i) := Mat1(f,i) * Mat2(i)")
        b = parse_expression("Result(i) = Mat1(f,i) * Mat2(i)")
        assert a == b

    def test_function_call_rejected(self):
        with pytest.raises(TacoSyntaxError) as info:
            parse_expression("Result(f) = sum(f, mat1(f, i) * mat2(i))")
        assert info.value.position >= 0
        assert isinstance(info.value, SyntaxError)

    @pytest.mark.parametrize(
        "text",
        ["a(i) =", "= b(i)", "a(i) = b(i,)", "a(i) = b(i) +", "a(i,j,k,l,m) = b(i)", "a(i) = b(i))", ""],
    )
    def test_rejects(self, text):
        with pytest.raises(TacoSyntaxError):
            parse_expression(text)

    def test_precedence(self):
        e = parse_expression("a(i) = b(i) + c(i) * d(i)")
        assert e.rhs.op == "ADD" and e.rhs.right.op == "MUL"
        e = parse_expression("a(i) = b(i) - c(i) - d(i)")
        assert e.rhs.left.op == "SUB"

    def test_scalars_and_constants(self):
        e = parse_expression("a = 2.5 * b")
        assert e.lhs.indices == ()
        assert e.rhs.left == Constant(Fraction(5, 2))
        assert parse_expression("a = Const").rhs == Constant(None)

    def test_unary_minus(self):
        assert parse_expression("a(i) = -b(i)").rhs == Neg(Access("b", ("i",)))


class TestRender:
    def test_examples(self):
        assert render(parse_expression("a(i)=b(i,j)*c(j)")) == "a(i) = b(i,j) * c(j)"
        assert render(parse_expression("a(i) = -b(i)")) == "a(i) = -b(i)"
        assert render(parse_expression("a(i) = (b(i) + c(i)) * d(i)")) == "a(i) = (b(i) + c(i)) * d(i)"

    def test_minimal_parens_without_paren_nodes(self):
        rhs = BinOp("SUB", Access("b", ("i",)), BinOp("ADD", Access("c", ("i",)), Access("d", ("i",))))
        assert render(Assignment(Access("a", ("i",)), rhs)) == "a(i) = b(i) - (c(i) + d(i))"

    def test_roundtrip_random(self):
        rng = random.Random(3)
        for _ in range(1000):
            e = random_expression(rng)
            text = render(e)
            again = parse_expression(text)
            assert strip_parens(again) == strip_parens(e)
            assert render(again) == text


class TestDepth:
    def test_examples(self):
        assert expr_depth(parse_expression("a = b(i)")) == 1
        assert expr_depth(parse_expression("a(i) = b(i) + c(i,j)")) == 2
        assert expr_depth(parse_expression("a(i) = (b(i) + c(i)) * d(i)")) == 3


class TestEvaluate:
    def test_matvec(self):
        e = parse_expression("a(i) = b(i,j) * c(j)")
        out = evaluate(e, {"b": T([[1, 2], [3, 4]]), "c": T([5, 6])})
        assert out.to_nested() == [17, 39]

    def test_copy(self):
        out = evaluate(parse_expression("a(i) = b(i)"), {"b": T([7, 8, 9])})
        assert out.to_nested() == [7, 8, 9]

    def test_reduction_scope(self):
        e = parse_expression("a(i) = b(i) + c(i,j)")
        out = evaluate(e, {"b": T([1, 2]), "c": T([[1, 1], [2, 2]])})
        assert out.to_nested() == [3, 6]

    def test_transpose(self):
        b = [[1, 2, 3], [4, 5, 6]]
        out = evaluate(parse_expression("a(i,j) = b(j,i)"), {"b": T(b)})
        assert out.to_nested() == [list(col) for col in zip(*b)]

    def test_full_reduction(self):
        m = [[1, -2], [3, 4], [5, 6]]
        out = evaluate(parse_expression("a = b(i,j)"), {"b": T(m)})
        assert out.rank == 0 and out.data[0] == sum(map(sum, m))

    def test_exact_division(self):
        out = evaluate(parse_expression("a(i) = b(i) / c(i)"), {"b": T([1, 4]), "c": T([3, 2])})
        assert out.to_nested() == [Fraction(1, 3), 2]

    def test_errors(self):
        e = parse_expression("a(i) = b(i) / c(i)")
        with pytest.raises(UnboundTensor):
            evaluate(e, {"b": T([1])})
        with pytest.raises(RankMismatch):
            evaluate(e, {"b": T([1]), "c": T([[1]])})
        with pytest.raises(InconsistentExtent):
            evaluate(e, {"b": T([1, 2]), "c": T([1])})
        with pytest.raises(DivisionByZero):
            evaluate(e, {"b": T([1]), "c": T([0])})

    def test_tensor_value_invariants(self):
        with pytest.raises(ValueError):
            TensorValue((2, 2), (1, 2, 3))
        assert TensorValue.scalar(Fraction(4, 2)).data == (2,)


def _bindings(rng, expr):
    extents = {v: rng.randint(1, 4) for v in "ijkl"}
    tensors, values = {}, {}
    for leaf in _leaves(expr.rhs):
        if isinstance(leaf, Access) and leaf.name not in tensors:
            nested = random_nested(rng, [extents[v] for v in leaf.indices])
            tensors[leaf.name] = nested
            values[leaf.name] = T(nested) if leaf.indices else TensorValue.scalar(nested)
    return extents, tensors, values


def _leaves(node):
    if isinstance(node, (Access, Constant)):
        yield node
    elif isinstance(node, Paren):
        yield from _leaves(node.inner)
    elif isinstance(node, Neg):
        yield from _leaves(node.operand)
    else:
        yield from _leaves(node.left)
        yield from _leaves(node.right)


@settings(max_examples=150, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_evaluate_matches_naive_oracle(seed):
    rng = random.Random(seed)
    expr = random_expression(rng)
    extents, tensors, values = _bindings(rng, expr)
    try:
        expected = naive_evaluate(expr, tensors, extents)
    except ZeroDivisionError:
        with pytest.raises(DivisionByZero):
            evaluate(expr, values)
        return
    got = evaluate(expr, values)
    for idx, value in expected.items():
        assert got[idx] == value

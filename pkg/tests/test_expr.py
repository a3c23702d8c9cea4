"""Expression trees: token grammar, parse/print round trips, evaluation,
substitution and structural statistics."""

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from firstint.backgen import SamplerConfig, draw_random_tree
from firstint.expr import (
    Binary,
    Const,
    DomainError,
    Q,
    UnbalancedArityError,
    UnknownTokenError,
    UnknownVariableError,
    Unary,
    Var,
    ZERO,
    arity_imbalance,
    depth,
    eval_numeric,
    expr_stats,
    free_vars,
    node_count,
    parse_polish,
    polish_str,
    print_infix,
    print_polish,
    substitute,
)

X, Y, T = Var("x"), Var("y"), Var("t")


class TestParse:
    def test_published_encoding(self):
        e = parse_polish("/ -1 sin + + - 0 2 x y")
        assert e == Binary("div", Q(-1),
                           Unary("sin", Binary("add",
                                               Binary("add", Binary("sub", Q(0), Q(2)), X),
                                               Y)))

    def test_single_leaf(self):
        assert parse_polish("x") == X
        assert parse_polish("-7") == Q(-7)
        assert parse_polish("9/2") == Q(9, 2)
        assert parse_polish("-31/4") == Q(-31, 4)

    def test_residue_is_unbalanced(self):
        with pytest.raises(UnbalancedArityError) as err:
            parse_polish("+ x y z", variables=("x", "y", "z", "t"))
        assert err.value.imbalance == 1

    def test_unknown_token_outside_vocabulary(self):
        with pytest.raises(UnknownTokenError) as err:
            parse_polish("+ x w")
        assert err.value.token == "w"

    def test_early_exhaustion_negative_imbalance(self):
        with pytest.raises(UnbalancedArityError) as err:
            parse_polish("+ + x")
        assert err.value.imbalance < 0

    def test_empty_stream(self):
        with pytest.raises(UnbalancedArityError):
            parse_polish("")

    def test_unary_residue_with_balanced_counts(self):
        # operand/binary counts balance but a unary token is left over
        with pytest.raises(UnbalancedArityError) as err:
            parse_polish("x sin")
        assert err.value.imbalance == 1

    @pytest.mark.parametrize("token", ["2/4", "1/0", "w", "+5", "1.5", "x1", "--2"])
    def test_malformed_tokens_rejected(self, token):
        with pytest.raises(UnknownTokenError):
            parse_polish(["+", "x", token])

    def test_rational_grammar_requires_lowest_terms(self):
        assert parse_polish("3/2") == Q(3, 2)
        with pytest.raises(UnknownTokenError):
            parse_polish("6/4")


class TestPrint:
    def test_square_plus_linear(self):
        e = Binary("add", Binary("pow", X, Q(2)), Y)
        assert print_polish(e) == ["+", "^", "x", "2", "y"]

    def test_zero_constant(self):
        assert print_polish(ZERO) == ["0"]

    def test_log_ratio(self):
        tokens = "/ log - x y t"
        assert polish_str(parse_polish(tokens)) == tokens

    def test_neg_compound_uses_sub_zero(self):
        e = Unary("neg", Binary("add", X, Y))
        assert polish_str(e) == "- 0 + x y"

    def test_neg_constant_prints_signed_literal(self):
        assert polish_str(Unary("neg", Q(5))) == "-5"
        assert polish_str(Unary("neg", Q(-3, 2))) == "3/2"

    def test_negative_rational_token(self):
        assert polish_str(Q(-9, 2)) == "-9/2"


class TestInfix:
    def test_examples(self):
        assert print_infix(parse_polish("+ ^ x 2 y")) == "x^2 + y"
        assert print_infix(Q(-1)) == "-1"
        assert print_infix(parse_polish("/ log - x y t")) == "log(x - y)/t"

    def test_parenthesization(self):
        assert print_infix(parse_polish("* + x y t")) == "(x + y)*t"
        assert print_infix(parse_polish("- x - y t")) == "x - (y - t)"
        assert print_infix(parse_polish("^ ^ x 2 3")) == "(x^2)^3"


class TestRoundTrip:
    def test_ten_thousand_sampled_trees(self):
        cfg = SamplerConfig()
        rng = random.Random("round-trip")
        for _ in range(10_000):
            e = draw_random_tree(rng.randint(0, 6), cfg, rng)
            assert parse_polish(print_polish(e)) == e

    @given(st.data())
    @settings(max_examples=300, deadline=None)
    def test_hypothesis_trees(self, data):
        e = data.draw(_expr_strategy())
        assert parse_polish(print_polish(e)) == e

    def test_neg_round_trips_to_its_encoding(self):
        # raw neg nodes serialize as "- 0 e" and parse back as that subtraction
        e = Unary("neg", Binary("add", X, Y))
        assert parse_polish(print_polish(e)) == Binary("sub", Q(0), Binary("add", X, Y))


def _expr_strategy():
    """Sampler-reachable shapes: no raw neg nodes, no literal 0 leaves."""
    leaves = st.one_of(
        st.sampled_from([X, Y, T]),
        st.integers(min_value=-9, max_value=9).filter(bool).map(Q),
        st.tuples(st.integers(-20, 20).filter(bool), st.integers(2, 9)).map(
            lambda pq: Const(Fraction(pq[0], pq[1]))),
    )

    def extend(children):
        unary = st.builds(Unary, st.sampled_from(["sin", "cos", "tan", "exp", "log", "sqrt"]),
                          children)
        binary = st.builds(Binary, st.sampled_from(["add", "sub", "mul", "div", "pow"]),
                           children, children)
        return st.one_of(unary, binary)

    return st.recursive(leaves, extend, max_leaves=12)


class TestSubstitute:
    def test_binding(self):
        e = parse_polish("+ ^ x 2 y")
        assert substitute(e, {"y": Q(3)}) == parse_polish("+ ^ x 2 3")

    def test_no_resubstitution(self):
        assert substitute(X, {"x": Binary("add", X, Q(1))}) == parse_polish("+ x 1")

    def test_swap_is_simultaneous(self):
        e = parse_polish("+ x y")
        assert substitute(e, {"x": Y, "y": X}) == parse_polish("+ y x")


class TestEval:
    def test_circle(self):
        e = parse_polish("+ ^ x 2 ^ y 2")
        assert eval_numeric(e, {"x": 3.0, "y": 4.0}) == 25.0

    def test_log_zero(self):
        with pytest.raises(DomainError):
            eval_numeric(parse_polish("log - x y"), {"x": 1.0, "y": 1.0})

    def test_exp_weighted_sum(self):
        e = parse_polish("+ x * y exp t")
        assert eval_numeric(e, {"x": 1.0, "y": 2.0, "t": 0.0}) == 3.0

    @pytest.mark.parametrize("tokens,point", [
        ("/ x y", {"x": 1.0, "y": 0.0}),
        ("sqrt x", {"x": -1.0}),
        ("^ x 1/2", {"x": -4.0}),
        ("^ 0 -1", {}),
        ("exp exp exp x", {"x": 3.0}),
    ])
    def test_domain_errors(self, tokens, point):
        with pytest.raises(DomainError):
            eval_numeric(parse_polish(tokens), point)

    def test_unbound_variable(self):
        with pytest.raises(UnknownVariableError):
            eval_numeric(X, {"y": 1.0})


class TestStats:
    def test_square_plus_linear(self):
        st_ = expr_stats(parse_polish("+ ^ x 2 y"))
        assert st_.operator_count == 2
        assert st_.variable_set == frozenset({"x", "y"})
        assert not st_.has_t
        assert st_.has_nonlinear_op

    def test_constant(self):
        st_ = expr_stats(Q(5))
        assert st_.operator_count == 0
        assert st_.variable_set == frozenset()
        assert st_.depth == 0
        assert not st_.has_nonlinear_op

    def test_exp_weighted(self):
        st_ = expr_stats(parse_polish("+ x * y exp t"))
        assert st_.has_t
        assert st_.has_nonlinear_op
        assert st_.operator_count == 3

    def test_neg_not_counted(self):
        assert expr_stats(Unary("neg", X)).operator_count == 0
        assert not expr_stats(Unary("neg", X)).has_nonlinear_op

    def test_linear_ops_not_nonlinear(self):
        assert not expr_stats(parse_polish("+ * 2 x y")).has_nonlinear_op
        assert expr_stats(parse_polish("/ x y")).has_nonlinear_op
        assert not expr_stats(parse_polish("^ x 1")).has_nonlinear_op

    def test_counts_match_independent_walk(self):
        cfg = SamplerConfig()
        rng = random.Random("stats-walk")
        for _ in range(300):
            e = draw_random_tree(rng.randint(0, 6), cfg, rng)
            st_ = expr_stats(e)
            # independent recursive walk
            def walk(node):
                if isinstance(node, (Const, Var)):
                    return 0
                if isinstance(node, Unary):
                    return (node.op != "neg") + walk(node.child)
                return 1 + walk(node.left) + walk(node.right)
            assert st_.operator_count == walk(e)
            assert st_.variable_set == free_vars(e)
            assert st_.depth == depth(e)


class TestArityImbalance:
    @pytest.mark.parametrize("tokens,expected", [
        ("+ x y z", 1),
        ("+ x y", 0),
        ("+ + x", -2),
        ("sin x", 0),
        ("x", 0),
    ])
    def test_counts(self, tokens, expected):
        vocab = ("x", "y", "z", "t")
        assert arity_imbalance(tokens.split(), vocab) == expected


def test_node_count():
    assert node_count(parse_polish("+ ^ x 2 y")) == 5
    assert node_count(X) == 1

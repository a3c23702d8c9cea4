"""Simplifier rules, idempotence, value preservation and the two-tier zero
test."""

import random
from fractions import Fraction

import pytest

from firstint.backgen import SamplerConfig, draw_random_tree, sample_integral
from firstint.calculus import OdeSystem, total_derivative
from firstint.expr import (
    Binary,
    Const,
    DomainError,
    Q,
    Unary,
    Var,
    ZERO,
    parse_polish,
    polish_str,
    substitute,
)
from firstint.simplify import (
    BudgetExceededError,
    SimplificationBlowupError,
    ZeroTestConfig,
    is_identically_zero,
    simplify,
    simplify_report,
    simplify_strict,
    work_budget,
    zero_test,
)
from conftest import EXP_WEIGHTED, eval_mp

P = parse_polish
X, Y, T = Var("x"), Var("y"), Var("t")


class TestRules:
    @pytest.mark.parametrize("tokens,expected", [
        ("- * * 2 x y * * 2 x y", "0"),          # like-term cancellation
        ("+ * x 1 0", "x"),                       # identities
        ("* x 0", "0"),                           # annihilator
        ("^ x 0", "1"),                           # e^0 -> 1
        ("^ x 1", "x"),                           # e^1 -> e
        ("- x x", "0"),                           # a - a
        ("/ x x", "1"),                           # a / a
        ("+ x x", "* 2 x"),                       # collection
        ("* + x 1 - x 1", "- ^ x 2 1"),           # expansion
        ("/ - ^ x 2 1 - x 1", "+ x 1"),           # exact quotient
        ("+ ^ sin x 2 ^ cos x 2", "1"),           # pythagorean identity
        ("* exp x exp t", "exp + t x"),           # exp merge
        ("+ 1/2 1/4", "3/4"),                     # rational folding
        ("sqrt 4", "2"),
        ("sqrt 4/9", "2/3"),
        ("^ 2 3", "8"),
        ("^ 2 -2", "1/4"),
        ("- 0 5", "-5"),
        ("cos 0", "1"),
        ("log 1", "0"),
        ("exp 0", "1"),
    ])
    def test_rule(self, tokens, expected):
        assert polish_str(simplify(P(tokens))) == expected

    def test_log_product_splits(self):
        out = simplify(P("log * x y"))
        assert polish_str(out) in ("+ log x log y", "+ log y log x")

    def test_log_of_sum_stays_atomic(self):
        out = simplify(P("log + + 5 * 2 t * 2 x"))
        assert polish_str(out).startswith("log")

    def test_pythagorean_with_common_cofactor(self):
        e = P("+ * * 3 y ^ sin + x t 2 * * 3 y ^ cos + x t 2")  # 3y(sin^2+cos^2)
        assert polish_str(simplify(e)) == "* 3 y"

    def test_cos_square_alone_untouched(self):
        assert polish_str(simplify(P("^ cos x 2"))) == "^ cos x 2"

    def test_division_by_zero_kept_opaque(self):
        out = simplify(P("/ 1 - x x"))
        assert polish_str(out) == "/ 1 0"

    def test_published_cancellation(self):
        # x' + y'*e^t + y*e^t with the exponentially weighted system's
        # right-hand sides substituted collapses to zero
        sys = OdeSystem.from_polish(EXP_WEIGHTED)
        e = Binary("add",
                   Binary("add", sys.rhs[0], Binary("mul", sys.rhs[1], Unary("exp", T))),
                   Binary("mul", Y, Unary("exp", T)))
        assert simplify(e) == ZERO


class TestDomainCaveat:
    def test_cancellation_flags(self):
        _, notes = simplify_report(P("- log x log x"))
        assert notes.domain_caveat
        _, notes = simplify_report(P("/ x x"))
        assert notes.domain_caveat

    def test_log_split_flags(self):
        _, notes = simplify_report(P("log ^ x 2"))
        assert notes.domain_caveat

    def test_plain_rewrites_do_not_flag(self):
        _, notes = simplify_report(P("+ * x 1 0"))
        assert not notes.domain_caveat
        _, notes = simplify_report(P("+ x x"))
        assert not notes.domain_caveat

    def test_surviving_restrictions_do_not_flag(self):
        _, notes = simplify_report(P("/ + x 0 y"))
        assert not notes.domain_caveat


class TestIdempotenceAndSoundness:
    def test_idempotent_on_random_trees(self):
        cfg = SamplerConfig()
        rng = random.Random("idem")
        for _ in range(1500):
            e = draw_random_tree(rng.randint(0, 6), cfg, rng)
            s = simplify(e)
            assert simplify(s) == s, polish_str(e)

    def test_value_preserving_at_common_domain_points(self):
        # 50-digit oracle: exact rewrites agree far below the tolerance while
        # a value-changing rewrite would be off at order one
        cfg = SamplerConfig()
        rng = random.Random("sound")
        checked_exprs = 0
        for _ in range(400):
            e = draw_random_tree(rng.randint(0, 6), cfg, rng)
            s = simplify(e)
            if s == e:
                continue
            points = 0
            attempts = 0
            while points < 32 and attempts < 200:
                attempts += 1
                pt = {v: rng.uniform(-3, 3) for v in ("x", "y", "t")}
                try:
                    v1 = eval_mp(e, pt)
                    v2 = eval_mp(s, pt)
                except DomainError:
                    continue
                points += 1
                assert abs(v1 - v2) <= 1e-9 * (1 + abs(v1)), (polish_str(e), polish_str(s))
            if points:
                checked_exprs += 1
        assert checked_exprs >= 200

    def test_deterministic(self):
        cfg = SamplerConfig()
        for seed in ("a", "b"):
            rng1, rng2 = random.Random(seed), random.Random(seed)
            e1 = draw_random_tree(5, cfg, rng1)
            e2 = draw_random_tree(5, cfg, rng2)
            assert e1 == e2
            assert simplify(e1) == simplify(e2)


class TestZeroTest:
    def test_difference_of_equal_expressions(self):
        cfg = SamplerConfig()
        rng = random.Random("zero")
        for _ in range(200):
            e = draw_random_tree(rng.randint(0, 5), cfg, rng)
            assert is_identically_zero(Binary("sub", e, e))

    def test_shifted_nonconstant_is_not_zero(self):
        cfg = SamplerConfig()
        rng = random.Random("nonzero")
        for _ in range(150):
            v = sample_integral(cfg, rng)
            assert not is_identically_zero(Binary("add", v, Q(1)))

    def test_trig_identity_needs_numeric_tier(self):
        e = P("- + ^ sin + x y 2 ^ cos * 1 + y x 2 1")
        result = zero_test(e)
        assert result.is_zero

    def test_numeric_tier_example(self):
        # sin(2x) - 2 sin x cos x is outside the identity table
        e = P("- sin * 2 x * 2 * sin x cos x")
        result = zero_test(e)
        assert result.is_zero
        assert result.tier == "numeric"

    def test_nonzero(self):
        assert not is_identically_zero(P("- x y"))

    def test_published_oscillator_derivative(self):
        sys = OdeSystem.from_polish(["y", "- 0 x"])
        w = total_derivative(P("+ ^ x 2 ^ y 2"), sys)
        assert is_identically_zero(w)

    def test_inconclusive_when_domain_is_empty(self):
        e = P("log - 0 ^ x 2")  # log of a non-positive quantity: no real points
        result = zero_test(e, ZeroTestConfig(probes=8))
        assert not result.is_zero
        assert result.inconclusive

    def test_seed_determinism(self):
        e = P("- sin * 2 x * 2 * sin x cos x")
        a = zero_test(e, ZeroTestConfig(seed=5))
        b = zero_test(e, ZeroTestConfig(seed=5))
        assert a == b

    def test_probe_validation(self):
        with pytest.raises(ValueError):
            ZeroTestConfig(probes=0)


class TestBudgets:
    def test_blowup_raises_in_strict_mode(self):
        e = P("^ + + + x y t 1 9")
        with pytest.raises(SimplificationBlowupError):
            simplify_strict(e, max_terms=20)

    def test_blowup_falls_back_in_lenient_mode(self):
        e = P("^ + + + * x 1 y t 1 9")
        out = simplify(e, max_terms=20)
        # value-preserving fallback: children simplified, shape retained
        assert out == Binary("pow", simplify(P("+ + + x y t 1")), Q(9))

    def test_work_budget_interrupts(self):
        e = P("^ + + + x y t 1 9")
        with pytest.raises(BudgetExceededError):
            with work_budget(max_steps=50):
                simplify(Binary("mul", e, e))

    def test_budget_scopes_cleanly(self):
        with work_budget(max_steps=10 ** 9):
            pass
        assert polish_str(simplify(P("+ x x"))) == "* 2 x"

"""Shared fixtures: reference systems, random expression sources and a
high-precision evaluation oracle independent of the package's float path."""

from __future__ import annotations

import random

import mpmath
import pytest

from firstint.backgen import SamplerConfig, draw_random_tree
from firstint.calculus import OdeSystem
from firstint.expr import Binary, Const, DomainError, Expr, Unary, Var

# The four study systems exercised throughout the suite, in their published
# Polish encodings.
HARMONIC = ["y", "- 0 x"]

PARABOLIC_LEVELS = [  # conserved x^2 + y
    "/ + * x y * 2 y + + * 2 * t ^ x 2 * 4 * t x * t y",
    "/ + * -2 * ^ x 2 y * -4 * x y + + * 2 * t ^ x 2 * 4 * t x * t y",
]

EXP_WEIGHTED = [  # conserved x + y*e^t
    "- - + / * y exp t + + t * t ^ x 2 exp t / * * y ^ x 2 exp t + + t * t ^ x 2 exp t "
    "/ * * t y exp t + + t * t ^ x 2 exp t / * * * t y ^ x 2 exp t + + t * t ^ x 2 exp t",
    "- - - 0 / y + + t * t ^ x 2 exp t / * y ^ x 2 + + t * t ^ x 2 exp t "
    "/ * y exp t + + t * t ^ x 2 exp t",
]

LOG_RATIO = [  # conserved x^2 + x + 2y and log(x-y)/t
    "/ * 2 * - x y log - x y + * 2 * t x * 3 t",
    "/ * + + + * -2 ^ x 2 * 2 * x y * -1 x y log - x y + * 2 * t x * 3 t",
]

TRAVELING_WAVE = ["y", "/ + + 7 * 9 t * 9 x + + 5 * 2 t * 2 x"]
TRAVELING_WAVE_INTEGRAL = ("+ + + + y * 1/2 ^ y 2 * - 0 9/2 t * - 0 9/2 x "
                           "* 31/4 log + + 5 * 2 t * 2 x")


@pytest.fixture(scope="session")
def harmonic() -> OdeSystem:
    return OdeSystem.from_polish(HARMONIC)


@pytest.fixture(scope="session")
def parabolic() -> OdeSystem:
    return OdeSystem.from_polish(PARABOLIC_LEVELS)


@pytest.fixture(scope="session")
def exp_weighted() -> OdeSystem:
    return OdeSystem.from_polish(EXP_WEIGHTED)


@pytest.fixture(scope="session")
def log_ratio() -> OdeSystem:
    return OdeSystem.from_polish(LOG_RATIO)


@pytest.fixture(scope="session")
def traveling_wave() -> OdeSystem:
    return OdeSystem.from_polish(TRAVELING_WAVE)


def random_exprs(seed: str, count: int, op_range=(0, 6)) -> list[Expr]:
    cfg = SamplerConfig(op_count_range=op_range)
    rng = random.Random(seed)
    lo, hi = op_range
    return [draw_random_tree(rng.randint(lo, hi), cfg, rng) for _ in range(count)]


def eval_mp(e: Expr, point: dict, dps: int = 50):
    """50-digit evaluation, raising DomainError outside the reals; an oracle
    path fully independent of expr.eval_numeric."""
    with mpmath.workdps(dps):
        return _eval_mp(e, point)


def _eval_mp(e: Expr, point: dict):
    if isinstance(e, Const):
        return mpmath.mpf(e.value.numerator) / e.value.denominator
    if isinstance(e, Var):
        return mpmath.mpf(point[e.name])
    if isinstance(e, Unary):
        v = _eval_mp(e.child, point)
        if e.op == "sin":
            return mpmath.sin(v)
        if e.op == "cos":
            return mpmath.cos(v)
        if e.op == "tan":
            return mpmath.tan(v)
        if e.op == "exp":
            if v > 5000:
                raise DomainError("overflow")
            return mpmath.exp(v)
        if e.op == "log":
            if v <= 0:
                raise DomainError("log domain")
            return mpmath.log(v)
        if e.op == "sqrt":
            if v < 0:
                raise DomainError("sqrt domain")
            return mpmath.sqrt(v)
        if e.op == "neg":
            return -v
        raise ValueError(e.op)
    l = _eval_mp(e.left, point)
    r = _eval_mp(e.right, point)
    if e.op == "add":
        return l + r
    if e.op == "sub":
        return l - r
    if e.op == "mul":
        return l * r
    if e.op == "div":
        if r == 0:
            raise DomainError("division by zero")
        return l / r
    if e.op == "pow":
        if l == 0 and r < 0:
            raise DomainError("pow domain")
        if l < 0 and r != mpmath.floor(r):
            raise DomainError("pow domain")
        out = mpmath.power(l, r)
        if not mpmath.isfinite(out):
            raise DomainError("overflow")
        return out
    raise ValueError(e.op)

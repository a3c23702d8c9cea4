"""Symbolic differentiation and conserved-quantity verification for ODE systems.

A candidate invariant V(t, x, y) is accepted for the system dx/dt = f,
dy/dt = g exactly when its total time derivative dV/dt = V_t + V_x*f + V_y*g
is identically zero and V is non-trivial (non-constant, references at least
one state variable).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

from .expr import (
    Binary,
    Const,
    DomainError,
    Expr,
    ONE,
    Unary,
    UnknownVariableError,
    Var,
    ZERO,
    eval_numeric,
    free_vars,
)
from .simplify import ZeroTestConfig, simplify, simplify_report, zero_test


class DimensionMismatchError(ValueError):
    pass


class OdeSystem(NamedTuple):
    state_vars: tuple[str, ...]
    rhs: tuple[Expr, ...]

    @classmethod
    def make(cls, rhs: Sequence[Expr], state_vars: Sequence[str] = ("x", "y")) -> "OdeSystem":
        state = tuple(state_vars)
        right = tuple(rhs)
        if len(state) != len(right):
            raise DimensionMismatchError(
                f"{len(state)} state variables but {len(right)} right-hand sides")
        if "t" in state:
            raise ValueError("t is the independent variable, not a state variable")
        return cls(state, right)

    @classmethod
    def from_polish(cls, rhs_tokens: Sequence[str],
                    state_vars: Sequence[str] = ("x", "y")) -> "OdeSystem":
        from .expr import parse_polish
        return cls.make([parse_polish(s) for s in rhs_tokens], state_vars)


# ---------------------------------------------------------------------------
# small folding constructors keep raw derivatives compact before the final
# canonical simplification

def _add(a: Expr, b: Expr) -> Expr:
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Binary("add", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if b == ZERO:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if a == ZERO:
        return Unary("neg", b)
    return Binary("sub", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Binary("mul", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    return Binary("div", a, b)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.child
    return Unary("neg", a)


def _derivative(e: Expr, v: str) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if isinstance(e, Unary):
        u = e.child
        du = _derivative(u, v)
        if du == ZERO:
            return ZERO
        if e.op == "sin":
            return _mul(Unary("cos", u), du)
        if e.op == "cos":
            return _neg(_mul(Unary("sin", u), du))
        if e.op == "tan":
            return _mul(_add(ONE, Binary("pow", Unary("tan", u), Const(Fraction(2)))), du)
        if e.op == "exp":
            return _mul(e, du)
        if e.op == "log":
            return _div(du, u)
        if e.op == "sqrt":
            return _div(du, _mul(Const(Fraction(2)), e))
        if e.op == "neg":
            return _neg(du)
        raise ValueError(f"unknown unary op {e.op!r}")
    left, right = e.left, e.right
    if e.op == "add":
        return _add(_derivative(left, v), _derivative(right, v))
    if e.op == "sub":
        return _sub(_derivative(left, v), _derivative(right, v))
    if e.op == "mul":
        dl = _derivative(left, v)
        dr = _derivative(right, v)
        return _add(_mul(dl, right), _mul(left, dr))
    if e.op == "div":
        dl = _derivative(left, v)
        dr = _derivative(right, v)
        num = _sub(_mul(dl, right), _mul(left, dr))
        return _div(num, Binary("pow", right, Const(Fraction(2))))
    if e.op == "pow":
        dl = _derivative(left, v)
        dr = _derivative(right, v)
        if dr == ZERO:
            # exponent independent of v: d(u^w) = w * u^(w-1) * u'
            if dl == ZERO:
                return ZERO
            if isinstance(right, Const):
                reduced = Const(right.value - 1)
            else:
                reduced = Binary("sub", right, ONE)
            return _mul(_mul(right, Binary("pow", left, reduced)), dl)
        # general case: u^w * (w' log u + w u'/u)
        bracket = _add(_mul(dr, Unary("log", left)), _mul(right, _div(dl, left)))
        return _mul(e, bracket)
    raise ValueError(f"unknown binary op {e.op!r}")


def partial_derivative(e: Expr, v: str) -> Expr:
    """Exact symbolic partial derivative, canonically simplified."""
    return simplify(_derivative(e, v))


def _raw_total_derivative(V: Expr, sys: OdeSystem) -> Expr:
    unknown = free_vars(V) - set(sys.state_vars) - {"t"}
    if unknown:
        raise UnknownVariableError(
            f"integral references variables outside the system: {sorted(unknown)}")
    acc = _derivative(V, "t")
    for var, rhs in zip(sys.state_vars, sys.rhs):
        acc = _add(acc, _mul(_derivative(V, var), rhs))
    return acc


def total_derivative(V: Expr, sys: OdeSystem) -> Expr:
    """dV/dt along the system: V_t plus the gradient contracted with the
    right-hand sides, simplified."""
    return simplify(_raw_total_derivative(V, sys))


def total_derivative_report(V: Expr, sys: OdeSystem):
    """Like total_derivative but also reports the domain-caveat audit flag of
    the simplification that produced the witness."""
    return simplify_report(_raw_total_derivative(V, sys))


class JacobianBlocks(NamedTuple):
    ja: tuple[tuple[Expr, ...], ...]  # m x (n-m): d V_i / d xa_j
    jb: tuple[tuple[Expr, ...], ...]  # m x m:     d V_i / d xb_j
    dt: tuple[Expr, ...]              # length m:  d V_i / d t


def jacobian_blocks(V: Sequence[Expr],
                    partition: tuple[Sequence[str], Sequence[str]]) -> JacobianBlocks:
    xa, xb = [tuple(p) for p in partition]
    if set(xa) & set(xb):
        raise DimensionMismatchError(f"partition overlaps: {set(xa) & set(xb)}")
    if len(V) != len(xb):
        raise DimensionMismatchError(
            f"{len(V)} integrals cannot determine {len(xb)} unknown equations")
    ja = tuple(tuple(partial_derivative(vi, v) for v in xa) for vi in V)
    jb = tuple(tuple(partial_derivative(vi, v) for v in xb) for vi in V)
    dt = tuple(partial_derivative(vi, "t") for vi in V)
    return JacobianBlocks(ja, jb, dt)


@dataclass(frozen=True)
class VerificationResult:
    verdict: bool
    tier: str  # zero-test tier that decided: "symbolic" | "numeric"
    witness: Expr  # simplified dV/dt, kept for failure reports
    reason: str = ""
    inconclusive: bool = False


def nonconstancy_probe(V: Expr, cfg: ZeroTestConfig) -> Optional[bool]:
    """True if two evaluations differ beyond tol, False if all probes agree,
    None when not enough valid points exist to tell."""
    variables = sorted(free_vars(V))
    rng = random.Random(f"screen:{cfg.seed}")
    lo, hi = cfg.box
    values = []
    attempts = 0
    while len(values) < 8 and attempts < 160:
        attempts += 1
        point = {v: rng.uniform(lo, hi) for v in variables}
        try:
            values.append(eval_numeric(V, point))
        except DomainError:
            continue
    if len(values) < 2:
        return None
    return max(values) - min(values) > cfg.tol * (1.0 + max(abs(v) for v in values))


def verify_first_integral(V: Expr, sys: OdeSystem,
                          cfg: ZeroTestConfig = ZeroTestConfig()) -> VerificationResult:
    """Accept V iff dV/dt is identically zero along the system and V passes
    the non-triviality screen (non-constant, uses a state variable)."""
    Vs = simplify(V)
    if isinstance(Vs, Const):
        return VerificationResult(False, "symbolic", ZERO, reason="constant")
    if not (free_vars(Vs) & set(sys.state_vars)):
        witness = total_derivative(Vs, sys)
        return VerificationResult(False, "symbolic", witness, reason="no state variable")
    witness = total_derivative(Vs, sys)
    zt = zero_test(witness, cfg)
    if not zt.is_zero:
        reason = "inconclusive zero test" if zt.inconclusive else "nonzero total derivative"
        return VerificationResult(False, zt.tier, witness, reason=reason,
                                  inconclusive=zt.inconclusive)
    probe = nonconstancy_probe(Vs, cfg)
    if probe is False:
        return VerificationResult(False, zt.tier, witness, reason="numerically constant")
    return VerificationResult(True, zt.tier, witness)

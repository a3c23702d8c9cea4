"""Rule-based simplification over an exact rational normal form.

An expression is normalised to a quotient of multivariate polynomials whose
"variables" are atomic subexpressions (variables, function applications,
powers with non-integer exponents).  This gives exact constant folding,
like-term collection, identity/annihilator elimination, canonical ordering of
commutative operands and cancellation, without any floating point.

The simplifier is deliberately bounded: a fixed identity table
(sin^2+cos^2=1, exp(a)*exp(b)=exp(a+b), log(a*b)=log a+log b) and a term-count
cap.  What the rules miss, the numeric tier of the zero test catches.
"""

from __future__ import annotations

import random
import time
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from fractions import Fraction
from math import isqrt
from typing import Optional

from .expr import (
    Binary,
    Const,
    DomainError,
    Expr,
    Unary,
    Var,
    ZERO,
    eval_numeric,
    free_vars,
    iter_nodes,
)

DEFAULT_MAX_TERMS = 10_000

Mono = tuple  # tuple[tuple[Expr, int], ...], sorted by atom key, powers >= 1
Poly = dict  # dict[Mono, Fraction], no zero coefficients

MONO_ONE: Mono = ()


class SimplificationBlowupError(Exception):
    """The polynomial normal form exceeded the term-count cap."""


class BudgetExceededError(Exception):
    """The active work budget (steps or wall clock) ran out."""


class _Undefined(Exception):
    """Internal: a denominator normalised to the zero polynomial."""


# ---------------------------------------------------------------------------
# work budget (cooperative timeout / deterministic step budget)

class WorkBudget:
    """Cooperative budget checked inside the polynomial inner loops.

    Either a deterministic step budget (reproducible in tests) or a
    wall-clock deadline (production timeouts), or both.
    """

    __slots__ = ("max_steps", "deadline", "steps")

    def __init__(self, max_steps: Optional[int] = None, seconds: Optional[float] = None):
        self.max_steps = max_steps
        self.deadline = time.monotonic() + seconds if seconds is not None else None
        self.steps = 0

    def tick(self, n: int = 1) -> None:
        self.steps += n
        if self.max_steps is not None and self.steps > self.max_steps:
            raise BudgetExceededError(f"step budget exhausted ({self.max_steps})")
        if self.deadline is not None and self.steps % 64 < n:
            if time.monotonic() > self.deadline:
                raise BudgetExceededError("wall-clock budget exhausted")


_BUDGET: ContextVar[Optional[WorkBudget]] = ContextVar("firstint_budget", default=None)
_MAX_TERMS: ContextVar[int] = ContextVar("firstint_max_terms", default=DEFAULT_MAX_TERMS)


@contextmanager
def work_budget(max_steps: Optional[int] = None, seconds: Optional[float] = None):
    budget = WorkBudget(max_steps=max_steps, seconds=seconds)
    token = _BUDGET.set(budget)
    try:
        yield budget
    finally:
        _BUDGET.reset(token)


def _tick(n: int = 1) -> None:
    budget = _BUDGET.get()
    if budget is not None:
        budget.tick(n)


# ---------------------------------------------------------------------------
# deterministic ordering of expressions / monomials

_KEY_MEMO: dict = {}


def sort_key(e: Expr):
    k = _KEY_MEMO.get(e)
    if k is None:
        if isinstance(e, Const):
            k = (0, e.value)
        elif isinstance(e, Var):
            k = (1, e.name)
        elif isinstance(e, Unary):
            k = (2, e.op, sort_key(e.child))
        else:
            k = (3, e.op, sort_key(e.left), sort_key(e.right))
        if len(_KEY_MEMO) > 200_000:
            _KEY_MEMO.clear()
        _KEY_MEMO[e] = k
    return k


def _mono_degree(m: Mono) -> int:
    return sum(p for _, p in m)


def _mono_order_key(m: Mono):
    return (_mono_degree(m), tuple((sort_key(a), p) for a, p in m))


# ---------------------------------------------------------------------------
# polynomial arithmetic

def p_const(c: Fraction) -> Poly:
    return {MONO_ONE: c} if c else {}


def p_one() -> Poly:
    return {MONO_ONE: Fraction(1)}


def p_atom(a: Expr, power: int = 1) -> Poly:
    return {((a, power),): Fraction(1)}


def p_is_zero(p: Poly) -> bool:
    return not p


def p_is_one(p: Poly) -> bool:
    return len(p) == 1 and p.get(MONO_ONE) == 1


def p_as_const(p: Poly) -> Optional[Fraction]:
    if not p:
        return Fraction(0)
    if len(p) == 1 and MONO_ONE in p:
        return p[MONO_ONE]
    return None


def p_add(p: Poly, q: Poly) -> Poly:
    if not p:
        return dict(q)
    if not q:
        return dict(p)
    out = dict(p)
    for m, c in q.items():
        cur = out.get(m)
        nc = c if cur is None else cur + c
        if nc:
            out[m] = nc
        elif cur is not None:
            del out[m]
    return out


def p_neg(p: Poly) -> Poly:
    return {m: -c for m, c in p.items()}


def p_scale(p: Poly, c: Fraction) -> Poly:
    if not c:
        return {}
    return {m: cc * c for m, cc in p.items()}


def _is_exp(a: Expr) -> bool:
    return isinstance(a, Unary) and a.op == "exp"


def mono_mul(m1: Mono, m2: Mono) -> Mono:
    """Merge two monomials; exp factors are folded into a single exp whose
    argument is the weighted sum of the original arguments."""
    if not m1:
        merged = list(m2)
    elif not m2:
        merged = list(m1)
    else:
        acc: dict = {}
        for a, p in m1:
            acc[a] = p
        for a, p in m2:
            acc[a] = acc.get(a, 0) + p
        merged = [(a, p) for a, p in acc.items() if p]
    exps = [(a, p) for a, p in merged if _is_exp(a)]
    if exps and (len(exps) > 1 or exps[0][1] != 1):
        merged = [(a, p) for a, p in merged if not _is_exp(a)]
        arg: Expr | None = None
        for a, p in exps:
            term = a.child if p == 1 else Binary("mul", Const(Fraction(p)), a.child)
            arg = term if arg is None else Binary("add", arg, term)
        combined = simplify(arg)
        if combined != ZERO:
            merged.append((Unary("exp", combined), 1))
    merged.sort(key=lambda ap: sort_key(ap[0]))
    return tuple(merged)


def p_mul(p: Poly, q: Poly) -> Poly:
    if not p or not q:
        return {}
    if p_is_one(p):
        return dict(q)
    if p_is_one(q):
        return dict(p)
    cap = _MAX_TERMS.get()
    out: Poly = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            _tick()
            m = mono_mul(m1, m2)
            cur = out.get(m)
            nc = c1 * c2 if cur is None else cur + c1 * c2
            if nc:
                out[m] = nc
            elif cur is not None:
                del out[m]
        if len(out) > cap:
            raise SimplificationBlowupError(f"polynomial exceeded {cap} terms")
    return out


def p_pow(p: Poly, k: int) -> Poly:
    if k < 0:
        raise ValueError("p_pow expects a non-negative exponent")
    result = p_one()
    base = p
    while k:
        if k & 1:
            result = p_mul(result, base)
        k >>= 1
        if k:
            base = p_mul(base, base)
    return result


def _mono_divisible(m1: Mono, m2: Mono) -> bool:
    d1 = dict(m1)
    return all(d1.get(a, 0) >= p for a, p in m2)


def _mono_div(m1: Mono, m2: Mono) -> Mono:
    d1 = dict(m1)
    for a, p in m2:
        d1[a] -= p
    out = [(a, p) for a, p in d1.items() if p]
    out.sort(key=lambda ap: sort_key(ap[0]))
    return tuple(out)


def p_divides(num: Poly, den: Poly) -> Optional[Poly]:
    """Exact multivariate division: num/den if the remainder is zero, else None."""
    if not num:
        return {}
    cap = _MAX_TERMS.get()
    lt_den = max(den, key=_mono_order_key)
    c_den = den[lt_den]
    rem = dict(num)
    quot: Poly = {}
    while rem:
        _tick()
        lt = max(rem, key=_mono_order_key)
        if not _mono_divisible(lt, lt_den):
            return None
        qm = _mono_div(lt, lt_den)
        qc = rem[lt] / c_den
        quot[qm] = quot.get(qm, Fraction(0)) + qc
        for m, c in den.items():
            mm = mono_mul(m, qm)
            cur = rem.get(mm)
            nc = -c * qc if cur is None else cur - c * qc
            if nc:
                rem[mm] = nc
            elif cur is not None:
                del rem[mm]
        if len(rem) > cap or len(quot) > cap:
            raise SimplificationBlowupError(f"division exceeded {cap} terms")
    return {m: c for m, c in quot.items() if c}


# ---------------------------------------------------------------------------
# the fixed identity table

def _apply_pythagorean(p: Poly) -> Poly:
    """c*B*sin(u)^2 + c*B*cos(u)^2 -> c*B, scanned deterministically until
    no pair with exactly equal coefficients remains."""
    if not any(isinstance(a, Unary) and a.op in ("sin", "cos") and pw >= 2
               for m in p for a, pw in m):
        return p
    poly = dict(p)
    changed = True
    while changed:
        changed = False
        for mono in sorted(poly, key=_mono_order_key):
            if mono not in poly:
                continue
            for atom, power in mono:
                if not (isinstance(atom, Unary) and atom.op == "sin" and power >= 2):
                    continue
                partner_atoms = dict(mono)
                partner_atoms[atom] = power - 2
                cos_atom = Unary("cos", atom.child)
                partner_atoms[cos_atom] = partner_atoms.get(cos_atom, 0) + 2
                partner = tuple(sorted(((a, pw) for a, pw in partner_atoms.items() if pw),
                                       key=lambda ap: sort_key(ap[0])))
                if poly.get(partner) != poly[mono]:
                    continue
                coeff = poly.pop(mono)
                poly.pop(partner)
                base_atoms = dict(mono)
                base_atoms[atom] = power - 2
                base = tuple(sorted(((a, pw) for a, pw in base_atoms.items() if pw),
                                    key=lambda ap: sort_key(ap[0])))
                cur = poly.get(base)
                nc = coeff if cur is None else cur + coeff
                if nc:
                    poly[base] = nc
                elif cur is not None:
                    del poly[base]
                changed = True
                break
            if changed:
                break
    return poly


# ---------------------------------------------------------------------------
# rational forms

Rat = tuple  # (num: Poly, den: Poly)


def rat_const(c: Fraction) -> Rat:
    return (p_const(c), p_one())


def rat_add(a: Rat, b: Rat) -> Rat:
    n1, d1 = a
    n2, d2 = b
    if d1 == d2:
        return (p_add(n1, n2), dict(d1))
    if p_is_one(d1):
        return (p_add(p_mul(n1, d2), n2), dict(d2))
    if p_is_one(d2):
        return (p_add(n1, p_mul(n2, d1)), dict(d1))
    return (p_add(p_mul(n1, d2), p_mul(n2, d1)), p_mul(d1, d2))


def rat_neg(a: Rat) -> Rat:
    return (p_neg(a[0]), dict(a[1]))


def rat_mul(a: Rat, b: Rat) -> Rat:
    return (p_mul(a[0], b[0]), p_mul(a[1], b[1]))


def rat_div(a: Rat, b: Rat) -> Rat:
    if p_is_zero(b[0]):
        raise _Undefined
    n1, d1 = a
    n2, d2 = b
    # exact quotients keep elimination-style divisions (Bareiss pivots) from
    # accumulating common factors that plain cross-multiplication cannot see
    if len(n1) <= 256 and len(n2) <= 256 and not p_is_one(n2):
        q = p_divides(n1, n2)
        if q is not None:
            n1, n2 = q, p_one()
    if len(d1) <= 256 and len(d2) <= 256 and not p_is_one(d1):
        q = p_divides(d1, d2)
        if q is not None:
            d1, d2 = q, p_one()
    return (p_mul(n1, d2), p_mul(d1, n2))


def rat_pow_int(a: Rat, k: int) -> Rat:
    if k == 0:
        return (p_one(), p_one())
    if k < 0:
        if p_is_zero(a[0]):
            raise _Undefined
        return (p_pow(a[1], -k), p_pow(a[0], -k))
    return (p_pow(a[0], k), p_pow(a[1], k))


def _mono_gcd(monos: list[Mono]) -> Mono:
    if not monos:
        return MONO_ONE
    acc = dict(monos[0])
    for m in monos[1:]:
        if not acc:
            break
        d = dict(m)
        acc = {a: min(p, d[a]) for a, p in acc.items() if a in d}
    out = [(a, p) for a, p in acc.items() if p]
    out.sort(key=lambda ap: sort_key(ap[0]))
    return tuple(out)


def _rat_reduce(num: Poly, den: Poly) -> Rat:
    num = _apply_pythagorean(num)
    den = _apply_pythagorean(den)
    if not num:
        return ({}, p_one())
    # cancel the common monomial content (a*x/x -> a, with the D6 caveat
    # recorded by the caller)
    g = _mono_gcd(list(num) + list(den))
    if g:
        num = {_mono_div(m, g): c for m, c in num.items()}
        den = {_mono_div(m, g): c for m, c in den.items()}
    dc = p_as_const(den)
    if dc is not None:
        return (p_scale(num, 1 / dc), p_one())
    if len(num) <= 256 and len(den) <= 256:
        q = p_divides(num, den)
        if q is not None:
            return (q, p_one())
        q = p_divides(den, num)
        if q is not None:
            qc = p_as_const(q)
            if qc is not None:
                return (p_const(1 / qc), p_one())
            return (p_one(), q)
    # integer-primitive scaling with a positive leading denominator coefficient
    denom_lcm = 1
    for c in list(num.values()) + list(den.values()):
        denom_lcm = denom_lcm * c.denominator // _gcd(denom_lcm, c.denominator)
    num = p_scale(num, Fraction(denom_lcm))
    den = p_scale(den, Fraction(denom_lcm))
    content = 0
    for c in list(num.values()) + list(den.values()):
        content = _gcd(content, abs(c.numerator))
    if content > 1:
        num = p_scale(num, Fraction(1, content))
        den = p_scale(den, Fraction(1, content))
    if den[max(den, key=_mono_order_key)] < 0:
        num = p_neg(num)
        den = p_neg(den)
    return (num, den)


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return abs(a)


# ---------------------------------------------------------------------------
# expression -> rational form

def _sqrt_fraction(c: Fraction) -> Optional[Fraction]:
    if c < 0:
        return None
    pn, pd = isqrt(c.numerator), isqrt(c.denominator)
    if pn * pn == c.numerator and pd * pd == c.denominator:
        return Fraction(pn, pd)
    return None


def _atom_rat(e: Expr) -> Rat:
    return (p_atom(e), p_one())


def _rat(e: Expr) -> Rat:
    if isinstance(e, Const):
        return rat_const(e.value)
    if isinstance(e, Var):
        return _atom_rat(e)
    if isinstance(e, Unary):
        if e.op == "neg":
            return rat_neg(_rat(e.child))
        child = _simplify_inner(e.child)
        if e.op == "exp":
            if child == ZERO:
                return rat_const(Fraction(1))
            return _atom_rat(Unary("exp", child))
        if e.op == "log":
            return _rat_log(child)
        if isinstance(child, Const):
            folded = _fold_unary_const(e.op, child.value)
            if folded is not None:
                return rat_const(folded)
        return _atom_rat(Unary(e.op, child))
    # binary
    if e.op == "add":
        return rat_add(_rat(e.left), _rat(e.right))
    if e.op == "sub":
        return rat_add(_rat(e.left), rat_neg(_rat(e.right)))
    if e.op == "mul":
        return rat_mul(_rat(e.left), _rat(e.right))
    if e.op == "div":
        try:
            return rat_div(_rat(e.left), _rat(e.right))
        except _Undefined:
            return _atom_rat(Binary("div", _simplify_inner(e.left),
                                    _simplify_inner(e.right)))
    if e.op == "pow":
        exponent = _simplify_inner(e.right)
        if isinstance(exponent, Const) and exponent.value.denominator == 1:
            try:
                return rat_pow_int(_rat(e.left), int(exponent.value))
            except _Undefined:
                pass
        base = _simplify_inner(e.left)
        if isinstance(base, Const) and isinstance(exponent, Const):
            folded = _fold_const_pow(base.value, exponent.value)
            if folded is not None:
                return rat_const(folded)
        return _atom_rat(Binary("pow", base, exponent))
    raise ValueError(f"unknown operator {e.op!r}")


def _fold_unary_const(op: str, c: Fraction) -> Optional[Fraction]:
    if op in ("sin", "tan") and c == 0:
        return Fraction(0)
    if op == "cos" and c == 0:
        return Fraction(1)
    if op == "sqrt":
        return _sqrt_fraction(c)
    return None


def _fold_const_pow(base: Fraction, exponent: Fraction) -> Optional[Fraction]:
    # integer exponents were already folded; try exact square roots
    if exponent.denominator == 2 and base >= 0:
        root = _sqrt_fraction(base)
        if root is not None and not (root == 0 and exponent < 0):
            return root ** exponent.numerator
    return None


def _rat_log(child: Expr) -> Rat:
    if isinstance(child, Const):
        if child.value == 1:
            return rat_const(Fraction(0))
        return _atom_rat(Unary("log", child))
    num, den = _rat(child)
    result = _split_log(num)
    if result is None:
        return _atom_rat(Unary("log", _reconstruct((num, den))))
    if not p_is_one(den):
        den_part = _split_log(den)
        if den_part is None:
            return _atom_rat(Unary("log", _reconstruct((num, den))))
        result = rat_add(result, rat_neg(den_part))
    return result


def _split_log(p: Poly) -> Optional[Rat]:
    """log of a single positive-coefficient monomial -> weighted sum of logs."""
    if len(p) != 1:
        return None
    [(mono, coeff)] = p.items()
    if coeff <= 0:
        return None
    acc: Poly = {}
    if coeff != 1:
        acc = p_add(acc, p_atom(Unary("log", Const(coeff))))
    for atom, power in mono:
        term = p_scale(p_atom(Unary("log", atom)), Fraction(power))
        acc = p_add(acc, term)
    return (acc, p_one())


# ---------------------------------------------------------------------------
# rational form -> canonical expression

def _build_mono(mono: Mono, coeff: Fraction) -> Expr:
    factors: list[Expr] = []
    if not mono:
        return Const(coeff)
    if coeff != 1:
        factors.append(Const(coeff))
    for atom, power in mono:
        factors.append(atom if power == 1 else Binary("pow", atom, Const(Fraction(power))))
    out = factors[0]
    for f in factors[1:]:
        out = Binary("mul", out, f)
    return out


def _poly_expr(p: Poly) -> Expr:
    if not p:
        return ZERO
    # highest degree first, alphabetical atom order within a degree
    terms = sorted(p.items(),
                   key=lambda mc: (-_mono_degree(mc[0]),
                                   tuple((sort_key(a), pw) for a, pw in mc[0])))
    acc: Optional[Expr] = None
    for mono, coeff in terms:
        negative = coeff < 0
        magnitude = _build_mono(mono, abs(coeff)) if mono else Const(abs(coeff))
        if acc is None:
            if not negative:
                acc = magnitude
            elif not mono:
                acc = Const(coeff)
            else:
                acc = Unary("neg", magnitude)
        else:
            acc = Binary("sub" if negative else "add", acc, magnitude)
    return acc


def _reconstruct(rat: Rat) -> Expr:
    num, den = _rat_reduce(rat[0], rat[1])
    if not num:
        return ZERO
    if p_is_one(den):
        return _poly_expr(num)
    return Binary("div", _poly_expr(num), _poly_expr(den))


# ---------------------------------------------------------------------------
# public simplification API

_MEMO: dict = {}


def _simplify_inner(e: Expr) -> Expr:
    """Simplify under the currently active term cap, with memoisation for the
    default cap only (results are cap-independent when they succeed)."""
    cacheable = _MAX_TERMS.get() == DEFAULT_MAX_TERMS
    if cacheable:
        hit = _MEMO.get(e)
        if hit is not None:
            return hit
    out = _reconstruct(_rat(e))
    if cacheable:
        if len(_MEMO) > 100_000:
            _MEMO.clear()
        _MEMO[e] = out
    return out


def simplify_strict(e: Expr, max_terms: int = DEFAULT_MAX_TERMS) -> Expr:
    """Canonical simplification; raises SimplificationBlowupError past the cap."""
    token = _MAX_TERMS.set(max_terms)
    try:
        return _simplify_inner(e)
    finally:
        _MAX_TERMS.reset(token)


def simplify(e: Expr, max_terms: int = DEFAULT_MAX_TERMS) -> Expr:
    """Canonical simplification; on blowup falls back to the input with
    simplified children (value-preserving, possibly non-canonical)."""
    try:
        return simplify_strict(e, max_terms)
    except SimplificationBlowupError:
        if isinstance(e, (Const, Var)):
            return e
        if isinstance(e, Unary):
            return Unary(e.op, simplify(e.child, max_terms))
        return Binary(e.op, simplify(e.left, max_terms), simplify(e.right, max_terms))


@dataclass(frozen=True)
class SimplifyNotes:
    domain_caveat: bool


def _restriction_sigs(e: Expr) -> frozenset:
    sigs = set()
    for node in iter_nodes(e):
        if isinstance(node, Unary) and node.op in ("log", "sqrt", "tan"):
            sigs.add((node.op, simplify(node.child)))
        elif isinstance(node, Binary):
            if node.op == "div":
                sigs.add(("recip", simplify(node.right)))
            elif node.op == "pow":
                r = node.right
                if not (isinstance(r, Const) and r.value.denominator == 1 and r.value >= 0):
                    sigs.add(("pow", simplify(node.left), simplify(node.right)))
    return frozenset(sigs)


def simplify_report(e: Expr, max_terms: int = DEFAULT_MAX_TERMS) -> tuple[Expr, SimplifyNotes]:
    """Simplify and report whether a domain-restricting construct of the input
    failed to survive (conservative audit flag for cancellation rules)."""
    out = simplify(e, max_terms)
    caveat = bool(_restriction_sigs(e) - _restriction_sigs(out))
    return out, SimplifyNotes(domain_caveat=caveat)


# ---------------------------------------------------------------------------
# two-tier zero test

@dataclass(frozen=True)
class ZeroTestConfig:
    probes: int = 64
    tol: float = 1e-9
    seed: int = 0
    resample_factor: int = 20
    box: tuple[float, float] = (-3.0, 3.0)

    def __post_init__(self):
        if self.probes < 1:
            raise ValueError("probes must be >= 1")


@dataclass(frozen=True)
class ZeroTestResult:
    is_zero: bool
    tier: str  # "symbolic" | "numeric"
    inconclusive: bool = False
    probes_used: int = 0


def _signed_terms(e: Expr) -> list[Expr]:
    """Top-level additive terms with their signs applied; a quotient
    distributes its numerator terms over the shared denominator."""
    out: list[Expr] = []

    def walk(node: Expr, positive: bool) -> None:
        if isinstance(node, Binary) and node.op == "add":
            walk(node.left, positive)
            walk(node.right, positive)
        elif isinstance(node, Binary) and node.op == "sub":
            walk(node.left, positive)
            walk(node.right, not positive)
        elif isinstance(node, Unary) and node.op == "neg":
            walk(node.child, not positive)
        else:
            out.append(node if positive else Unary("neg", node))

    if isinstance(e, Binary) and e.op == "div":
        for term in _signed_terms(e.left):
            out.append(Binary("div", term, e.right))
        return out
    walk(e, True)
    return out


def zero_test(e: Expr, cfg: ZeroTestConfig = ZeroTestConfig()) -> ZeroTestResult:
    """Symbolic tier first (simplify must reach the literal zero constant);
    otherwise probe random points, scaling the tolerance by the magnitude of
    the top-level additive terms to absorb catastrophic cancellation."""
    s = simplify(e)
    if s == ZERO:
        return ZeroTestResult(True, "symbolic")
    if isinstance(s, Const):
        return ZeroTestResult(False, "symbolic")
    variables = sorted(free_vars(s))
    terms = _signed_terms(s)
    rng = random.Random(cfg.seed)
    lo, hi = cfg.box
    successes = 0
    attempts = 0
    max_attempts = cfg.probes * cfg.resample_factor
    while successes < cfg.probes and attempts < max_attempts:
        attempts += 1
        point = {v: rng.uniform(lo, hi) for v in variables}
        try:
            values = [eval_numeric(t, point) for t in terms]
        except DomainError:
            continue
        total = sum(values)
        scale = sum(abs(v) for v in values)
        if abs(total) > cfg.tol * (1.0 + scale):
            return ZeroTestResult(False, "numeric", probes_used=successes + 1)
        successes += 1
    if successes >= cfg.probes:
        return ZeroTestResult(True, "numeric", probes_used=successes)
    return ZeroTestResult(False, "numeric", inconclusive=True, probes_used=successes)


def is_identically_zero(e: Expr, probes: int = 64, tol: float = 1e-9,
                        rng_seed: int = 0) -> bool:
    """Two-tier zero oracle; an inconclusive probe run counts as "not zero"."""
    return zero_test(e, ZeroTestConfig(probes=probes, tol=tol, seed=rng_seed)).is_zero


def clear_caches() -> None:
    _MEMO.clear()
    _KEY_MEMO.clear()

"""Immutable symbolic expression trees with Polish-notation parsing and printing.

Expressions are built from exact rational constants, a small fixed variable
vocabulary and elementary unary/binary operators.  Every other module in this
package works on these trees; all symbolic arithmetic stays exact (floats only
appear in :func:`eval_numeric`).
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterator, Mapping, NamedTuple, Sequence, Union


class Const(NamedTuple):
    value: Fraction


class Var(NamedTuple):
    name: str


class Unary(NamedTuple):
    op: str
    child: "Expr"


class Binary(NamedTuple):
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Unary, Binary]

UNARY_OPS = ("sin", "cos", "tan", "exp", "log", "sqrt", "neg")
BINARY_OPS = ("add", "sub", "mul", "div", "pow")

# neg has no token of its own: the printer encodes it as "- 0 <child>" for
# compound children and as a signed literal for constants.
BINARY_TOKEN_TO_OP = {"+": "add", "-": "sub", "*": "mul", "/": "div", "^": "pow"}
OP_TO_BINARY_TOKEN = {v: k for k, v in BINARY_TOKEN_TO_OP.items()}
UNARY_TOKENS = ("sin", "cos", "tan", "exp", "log", "sqrt")

DEFAULT_VARIABLES = ("x", "y", "t")

_INT_RE = re.compile(r"-?\d+\Z")
_RAT_RE = re.compile(r"(-?\d+)/([1-9]\d*)\Z")


class ExprError(Exception):
    """Base class for expression-level failures."""


class UnknownTokenError(ExprError):
    """A token outside the operator/constant/variable vocabulary."""

    def __init__(self, token: str):
        super().__init__(f"unknown token {token!r}")
        self.token = token


class UnbalancedArityError(ExprError):
    """Token stream exhausts early (imbalance < 0) or leaves residue (> 0)."""

    def __init__(self, imbalance: int, message: str = ""):
        super().__init__(message or f"unbalanced token stream (imbalance {imbalance:+d})")
        self.imbalance = imbalance


class DomainError(ExprError):
    """Numeric evaluation left the real domain (log<=0, division by zero, ...)."""


class UnknownVariableError(ExprError):
    """An expression references a variable the caller did not supply."""


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))
X, Y, T = Var("x"), Var("y"), Var("t")


def Q(p: int | Fraction, q: int = 1) -> Const:
    """Exact rational constant; Fraction keeps lowest terms and q > 0."""
    return Const(Fraction(p, q))


def is_expr(obj: object) -> bool:
    return isinstance(obj, (Const, Var, Unary, Binary))


# ---------------------------------------------------------------------------
# tokenisation and parsing

def tokenize(text: str | Sequence[str]) -> list[str]:
    """Split a Polish expression into tokens; sequences pass through as lists."""
    if isinstance(text, str):
        return text.split()
    return list(text)


def classify_token(token: str, variables: Sequence[str] = DEFAULT_VARIABLES) -> str:
    """One of 'binary', 'unary', 'variable', 'constant' or 'unknown'."""
    if token in BINARY_TOKEN_TO_OP:
        return "binary"
    if token in UNARY_TOKENS:
        return "unary"
    if token in variables:
        return "variable"
    if _INT_RE.match(token):
        return "constant"
    m = _RAT_RE.match(token)
    if m and math.gcd(abs(int(m.group(1))), int(m.group(2))) == 1:
        return "constant"
    return "unknown"


def _constant_from_token(token: str) -> Const:
    if "/" in token:
        p, q = token.split("/")
        return Const(Fraction(int(p), int(q)))
    return Const(Fraction(int(token)))


def parse_polish(tokens: str | Sequence[str],
                 variables: Sequence[str] = DEFAULT_VARIABLES) -> Expr:
    """Parse a whitespace-separated Polish (prefix) token stream.

    The whole stream must be consumed: residue raises UnbalancedArityError
    with a positive imbalance, early exhaustion with a negative one.
    """
    toks = tokenize(tokens)
    if not toks:
        raise UnbalancedArityError(-1, "empty token stream")

    pos = 0

    def take() -> Expr:
        nonlocal pos
        if pos >= len(toks):
            raise _Exhausted
        tok = toks[pos]
        pos += 1
        kind = classify_token(tok, variables)
        if kind == "binary":
            op = BINARY_TOKEN_TO_OP[tok]
            left = take()
            right = take()
            return Binary(op, left, right)
        if kind == "unary":
            return Unary(tok, take())
        if kind == "variable":
            return Var(tok)
        if kind == "constant":
            return _constant_from_token(tok)
        raise UnknownTokenError(tok)

    try:
        result = take()
    except _Exhausted:
        ek = arity_imbalance(toks, variables)
        raise UnbalancedArityError(ek if ek else -1, "token stream exhausted early") from None
    if pos != len(toks):
        residue = len(toks) - pos
        ek = arity_imbalance(toks, variables)
        raise UnbalancedArityError(ek if ek else residue,
                                   f"{residue} trailing token(s) after a complete expression")
    return result


class _Exhausted(Exception):
    pass


def arity_imbalance(tokens: Sequence[str],
                    variables: Sequence[str] = DEFAULT_VARIABLES) -> int:
    """Operand count minus binary-operator count minus one (zero is necessary
    for a valid prefix expression; unary operators do not contribute)."""
    operands = 0
    binaries = 0
    for tok in tokens:
        kind = classify_token(tok, variables)
        if kind == "binary":
            binaries += 1
        elif kind in ("variable", "constant"):
            operands += 1
    return operands - binaries - 1


# ---------------------------------------------------------------------------
# printing

def _const_token(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def print_polish(e: Expr) -> list[str]:
    """Serialize to Polish tokens; parse_polish(print_polish(e)) == e for every
    tree the sampler can produce (no raw neg nodes, no literal 0 leaves)."""
    out: list[str] = []

    def walk(node: Expr) -> None:
        if isinstance(node, Const):
            out.append(_const_token(node.value))
        elif isinstance(node, Var):
            out.append(node.name)
        elif isinstance(node, Unary):
            if node.op == "neg":
                if isinstance(node.child, Const):
                    out.append(_const_token(-node.child.value))
                else:
                    out.append("-")
                    out.append("0")
                    walk(node.child)
            else:
                out.append(node.op)
                walk(node.child)
        else:
            out.append(OP_TO_BINARY_TOKEN[node.op])
            walk(node.left)
            walk(node.right)

    walk(e)
    return out


def polish_str(e: Expr) -> str:
    return " ".join(print_polish(e))


_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "pow": 3}


def print_infix(e: Expr) -> str:
    """Human-readable notation with minimal parentheses (not meant for re-parsing)."""

    def walk(node: Expr, min_prec: int) -> str:
        if isinstance(node, Const):
            s = _const_token(node.value)
            return f"({s})" if node.value < 0 and min_prec > 0 else s
        if isinstance(node, Var):
            return node.name
        if isinstance(node, Unary):
            if node.op == "neg":
                s = f"-{walk(node.child, 3)}"
                return f"({s})" if min_prec > 1 else s
            return f"{node.op}({walk(node.child, 0)})"
        p = _PREC[node.op]
        sym = OP_TO_BINARY_TOKEN[node.op]
        # pow is right-associative, so its left operand needs parens at equal
        # precedence; sub/div are left-associative, so their right one does.
        lmin = p + 1 if node.op == "pow" else p
        rmin = p + 1 if node.op in ("sub", "div") else p
        ls = walk(node.left, lmin)
        rs = walk(node.right, rmin)
        s = f"{ls} {sym} {rs}" if node.op in ("add", "sub") else f"{ls}{sym}{rs}"
        return f"({s})" if p < min_prec else s

    return walk(e, 0)


# ---------------------------------------------------------------------------
# traversal and structural helpers

def iter_nodes(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Unary):
            stack.append(node.child)
        elif isinstance(node, Binary):
            stack.append(node.right)
            stack.append(node.left)


def node_count(e: Expr) -> int:
    return sum(1 for _ in iter_nodes(e))


def depth(e: Expr) -> int:
    if isinstance(e, (Const, Var)):
        return 0
    if isinstance(e, Unary):
        return 1 + depth(e.child)
    return 1 + max(depth(e.left), depth(e.right))


def free_vars(e: Expr) -> frozenset[str]:
    return frozenset(n.name for n in iter_nodes(e) if isinstance(n, Var))


def substitute(e: Expr, bindings: Mapping[str, Expr]) -> Expr:
    """Simultaneous substitution; replacements are not re-substituted into."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return bindings.get(e.name, e)
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.child, bindings))
    return Binary(e.op, substitute(e.left, bindings), substitute(e.right, bindings))


class ExprStats(NamedTuple):
    operator_count: int
    variable_set: frozenset[str]
    depth: int
    has_t: bool
    has_nonlinear_op: bool


def expr_stats(e: Expr) -> ExprStats:
    """Structural statistics.  neg is a printing artifact and is not counted
    as an operator; nonlinear means div, pow with a non-trivial exponent, or
    any unary function other than neg."""
    ops = 0
    nonlinear = False
    variables: set[str] = set()
    for node in iter_nodes(e):
        if isinstance(node, Var):
            variables.add(node.name)
        elif isinstance(node, Unary):
            if node.op != "neg":
                ops += 1
                nonlinear = True
        elif isinstance(node, Binary):
            ops += 1
            if node.op == "div":
                nonlinear = True
            elif node.op == "pow" and node.right != ONE:
                nonlinear = True
    return ExprStats(
        operator_count=ops,
        variable_set=frozenset(variables),
        depth=depth(e),
        has_t="t" in variables,
        has_nonlinear_op=nonlinear,
    )


# ---------------------------------------------------------------------------
# numeric evaluation

def eval_numeric(e: Expr, point: Mapping[str, float]) -> float:
    """IEEE-double evaluation; raises DomainError when the value leaves the
    reals or overflows, signalling that the probe point must be resampled."""
    if isinstance(e, Const):
        try:
            return float(e.value)
        except OverflowError:
            raise DomainError("constant too large for float") from None
    if isinstance(e, Var):
        try:
            return float(point[e.name])
        except KeyError:
            raise UnknownVariableError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Unary):
        c = eval_numeric(e.child, point)
        try:
            if e.op == "sin":
                v = math.sin(c)
            elif e.op == "cos":
                v = math.cos(c)
            elif e.op == "tan":
                v = math.tan(c)
            elif e.op == "exp":
                v = math.exp(c)
            elif e.op == "log":
                if c <= 0.0:
                    raise DomainError("log of non-positive value")
                v = math.log(c)
            elif e.op == "sqrt":
                if c < 0.0:
                    raise DomainError("sqrt of negative value")
                v = math.sqrt(c)
            elif e.op == "neg":
                v = -c
            else:
                raise ExprError(f"unknown unary op {e.op!r}")
        except OverflowError:
            raise DomainError("overflow") from None
        return _finite(v)
    l = eval_numeric(e.left, point)
    r = eval_numeric(e.right, point)
    try:
        if e.op == "add":
            v = l + r
        elif e.op == "sub":
            v = l - r
        elif e.op == "mul":
            v = l * r
        elif e.op == "div":
            if r == 0.0:
                raise DomainError("division by zero")
            v = l / r
        elif e.op == "pow":
            if l == 0.0 and r < 0.0:
                raise DomainError("zero to a negative power")
            if l < 0.0 and r != math.floor(r):
                raise DomainError("negative base with non-integer exponent")
            v = l ** r
        else:
            raise ExprError(f"unknown binary op {e.op!r}")
    except OverflowError:
        raise DomainError("overflow") from None
    except ValueError:
        raise DomainError("value outside the real domain") from None
    return _finite(v)


def _finite(v: float) -> float:
    if not math.isfinite(v):
        raise DomainError("non-finite result")
    return v

"""Backward construction of (ODE system, first integral) pairs.

Instead of solving systems for unknown invariants, sample the invariants and
the already-known right-hand sides, then solve the linear symbolic constraint
Ja*xa' + Jb*xb' + V_t = 0 for the missing right-hand sides.  Every emitted
pair is re-verified; a verification failure is a bug, never a silent skip.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .calculus import (
    OdeSystem,
    VerificationResult,
    jacobian_blocks,
    nonconstancy_probe,
    total_derivative_report,
    verify_first_integral,
)
from .expr import (
    Binary,
    Const,
    Expr,
    Unary,
    Var,
    ZERO,
    expr_stats,
    free_vars,
    node_count,
    polish_str,
)
from .simplify import (
    SimplificationBlowupError,
    ZeroTestConfig,
    simplify,
    simplify_strict,
)

SAMPLED_OPS = ("add", "sub", "mul", "div", "pow", "sin", "cos", "tan", "exp", "log", "sqrt")
UNARY_SAMPLED = frozenset(("sin", "cos", "tan", "exp", "log", "sqrt"))
DEFAULT_CONSTANTS = tuple(n for n in range(-9, 10) if n != 0)


@dataclass(frozen=True)
class SamplerConfig:
    op_count_range: tuple[int, int] = (0, 6)
    leaf_var_prob: float = 0.7
    op_weights: tuple[tuple[str, float], ...] = tuple((op, 1.0) for op in SAMPLED_OPS)
    variables: tuple[str, ...] = ("x", "y", "t")
    constants: tuple[int, ...] = DEFAULT_CONSTANTS
    resample_budget: int = 100

    def __post_init__(self):
        lo, hi = self.op_count_range
        if lo > hi or lo < 0:
            raise ValueError("op_count_range must be a non-empty range of non-negatives")
        if not 0.0 <= self.leaf_var_prob <= 1.0:
            raise ValueError("leaf_var_prob must be a probability")

    def digest(self) -> str:
        raw = repr(self).encode()
        return hashlib.sha256(raw).hexdigest()[:12]


@dataclass(frozen=True)
class SeedSpec:
    """What is prescribed and what must be solved for.

    prescribed maps state variables to their fixed right-hand sides; a None
    value means "sample a fresh non-constant right-hand side per attempt".
    Integrals either come from an external list or are sampled (m of them).
    """

    prescribed: tuple[tuple[str, Optional[Expr]], ...] = (("x", None),)
    external_integrals: Optional[tuple[Expr, ...]] = None
    num_integrals: int = 1

    @classmethod
    def bwd_base(cls) -> "SeedSpec":
        return cls(prescribed=(("x", None),), num_integrals=1)

    @classmethod
    def bwd_syn(cls, integrals: Sequence[Expr] = ()) -> "SeedSpec":
        ext = tuple(integrals) or None
        return cls(prescribed=(("x", Var("y")),), external_integrals=ext,
                   num_integrals=1)

    @property
    def m(self) -> int:
        if self.external_integrals is not None:
            return len(self.external_integrals)
        return self.num_integrals

    def validate(self, state_vars: Sequence[str] = ("x", "y")) -> None:
        names = [v for v, _ in self.prescribed]
        if len(set(names)) != len(names):
            raise ValueError("duplicate prescribed variable")
        if not set(names) <= set(state_vars):
            raise ValueError(f"prescribed variables {names} outside state {state_vars}")
        if len(names) + self.m != len(state_vars):
            raise ValueError(
                f"{self.m} integrals + {len(names)} prescribed equations "
                f"!= {len(state_vars)} state variables")

    @property
    def is_static(self) -> bool:
        return (self.external_integrals is not None
                and all(e is not None for _, e in self.prescribed))


class InversionRejected(Exception):
    """A seed that cannot be inverted into a usable system."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}{': ' + detail if detail else ''}")
        self.reason = reason


class InternalVerificationError(Exception):
    """An emitted pair failed re-verification: an implementation bug."""


class GenerationBudgetError(Exception):
    def __init__(self, attempts: int, rejections: dict):
        super().__init__(f"no pair accepted after {attempts} attempts: {rejections}")
        self.attempts = attempts
        self.rejections = dict(rejections)


class DegenerateDenominatorError(ValueError):
    pass


@dataclass(frozen=True)
class IntegralPair:
    system: OdeSystem
    integrals: tuple[Expr, ...]
    meta: dict = field(compare=False)


# ---------------------------------------------------------------------------
# sampling

def draw_random_tree(k: int, cfg: SamplerConfig, rng: random.Random) -> Expr:
    """A random tree with exactly k operator nodes; leaves are variables with
    probability leaf_var_prob, otherwise nonzero single-digit integers."""
    if k == 0:
        if rng.random() < cfg.leaf_var_prob:
            return Var(rng.choice(cfg.variables))
        return Const(Fraction(rng.choice(cfg.constants)))
    ops, weights = zip(*cfg.op_weights)
    op = rng.choices(ops, weights=weights)[0]
    if op in UNARY_SAMPLED:
        return Unary(op, draw_random_tree(k - 1, cfg, rng))
    split = rng.randint(0, k - 1)
    return Binary(op, draw_random_tree(split, cfg, rng),
                  draw_random_tree(k - 1 - split, cfg, rng))


def _passes_screen(e: Expr, state_vars: Sequence[str], zero_cfg: ZeroTestConfig) -> bool:
    if isinstance(e, Const):
        return False
    if not (free_vars(e) & set(state_vars)):
        return False
    return nonconstancy_probe(e, zero_cfg) is not False


def sample_integral(cfg: SamplerConfig, rng: random.Random,
                    state_vars: Sequence[str] = ("x", "y"),
                    zero_cfg: ZeroTestConfig = ZeroTestConfig()) -> Expr:
    """A simplified random candidate invariant passing the non-triviality
    screen; resamples when simplification collapses the draw."""
    lo, hi = cfg.op_count_range
    for _ in range(cfg.resample_budget):
        k = rng.randint(lo, hi)
        raw = draw_random_tree(k, cfg, rng)
        candidate = simplify(raw)
        if _passes_screen(candidate, state_vars, zero_cfg):
            return candidate
    raise GenerationBudgetError(cfg.resample_budget, {"sample_budget": cfg.resample_budget})


def sample_rhs(cfg: SamplerConfig, rng: random.Random) -> Expr:
    """A simplified random non-constant right-hand side."""
    lo, hi = cfg.op_count_range
    for _ in range(cfg.resample_budget):
        k = rng.randint(lo, hi)
        candidate = simplify(draw_random_tree(k, cfg, rng))
        if not isinstance(candidate, Const):
            return candidate
    raise GenerationBudgetError(cfg.resample_budget, {"sample_budget": cfg.resample_budget})


# ---------------------------------------------------------------------------
# inversion: solve Jb * xb' = -(Ja * xa' + V_t) without forming Jb^-1

DEFAULT_NODE_CAP = 10_000


def _strict(e: Expr, node_cap: int) -> Expr:
    out = simplify_strict(e)
    if node_count(out) > node_cap:
        raise SimplificationBlowupError(f"expression exceeded {node_cap} nodes")
    return out


def invert(integrals: Sequence[Expr], prescribed: Mapping[str, Expr],
           state_vars: Sequence[str] = ("x", "y"),
           node_cap: int = DEFAULT_NODE_CAP) -> OdeSystem:
    """Fraction-free (Bareiss) elimination on the augmented system; pivots
    that simplify to zero reject the seed rather than inverting a singular
    block."""
    xa = [v for v in state_vars if v in prescribed]
    xb = [v for v in state_vars if v not in prescribed]
    m = len(xb)
    if len(integrals) != m:
        raise ValueError(f"{len(integrals)} integrals for {m} unknown equations")

    try:
        blocks = jacobian_blocks(list(integrals), (xa, xb))
        rows: list[list[Expr]] = []
        for i in range(m):
            acc: Expr = blocks.dt[i]
            for j, v in enumerate(xa):
                acc = Binary("add", acc, Binary("mul", blocks.ja[i][j], prescribed[v]))
            rhs = _strict(Unary("neg", acc), node_cap)
            rows.append([blocks.jb[i][j] for j in range(m)] + [rhs])

        # forward elimination
        prev_pivot: Expr = Const(Fraction(1))
        for col in range(m):
            pivot_row = next((r for r in range(col, m) if rows[r][col] != ZERO), None)
            if pivot_row is None:
                if all(rows[r][m] == ZERO for r in range(col, m)):
                    raise InversionRejected("underdetermined")
                raise InversionRejected("singular_jacobian")
            if pivot_row != col:
                rows[col], rows[pivot_row] = rows[pivot_row], rows[col]
            pivot = rows[col][col]
            for r in range(col + 1, m):
                for c in range(col + 1, m + 1):
                    cross = Binary("sub",
                                   Binary("mul", rows[r][c], pivot),
                                   Binary("mul", rows[r][col], rows[col][c]))
                    rows[r][c] = _strict(Binary("div", cross, prev_pivot), node_cap)
                rows[r][col] = ZERO
            prev_pivot = pivot

        # back substitution
        solution: dict[str, Expr] = {}
        for i in reversed(range(m)):
            acc = rows[i][m]
            for j in range(i + 1, m):
                acc = Binary("sub", acc, Binary("mul", rows[i][j], solution[xb[j]]))
            solution[xb[i]] = _strict(Binary("div", acc, rows[i][i]), node_cap)
    except SimplificationBlowupError as exc:
        raise InversionRejected("blowup", str(exc)) from None

    rhs = tuple(simplify(prescribed[v]) if v in prescribed else solution[v]
                for v in state_vars)
    return OdeSystem.make(rhs, state_vars)


def filter_nontrivial(sys: OdeSystem) -> bool:
    """Reject decoupled equations: any dx_i/dt whose free variables are a
    subset of {x_i, t} (constants included) makes the system trivial."""
    for var, rhs in zip(sys.state_vars, sys.rhs):
        if free_vars(simplify(rhs)) <= {var, "t"}:
            return False
    return True


# ---------------------------------------------------------------------------
# the full pipeline

DEFAULT_MAX_ATTEMPTS = 500


def generate_pair(spec: SeedSpec, cfg: SamplerConfig, rng: random.Random,
                  zero_cfg: ZeroTestConfig = ZeroTestConfig(),
                  max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                  node_cap: int = DEFAULT_NODE_CAP,
                  state_vars: Sequence[str] = ("x", "y")) -> IntegralPair:
    """sample/accept -> invert -> non-triviality filter -> re-verify -> emit.

    Verification failure of a constructed pair aborts with diagnostics; it can
    only mean the inversion or the verifier is wrong.
    """
    spec.validate(state_vars)
    if spec.external_integrals is not None:
        for V in spec.external_integrals:
            if not _passes_screen(simplify(V), state_vars, zero_cfg):
                raise ValueError(f"external integral is trivial: {polish_str(V)}")
    if spec.is_static:
        max_attempts = 1

    rejections: dict[str, int] = {}

    def bump(reason: str) -> None:
        rejections[reason] = rejections.get(reason, 0) + 1

    for attempt in range(1, max_attempts + 1):
        if spec.external_integrals is not None:
            integrals = tuple(simplify(V) for V in spec.external_integrals)
        else:
            integrals = tuple(sample_integral(cfg, rng, state_vars, zero_cfg)
                              for _ in range(spec.m))
        prescribed = {v: (simplify(e) if e is not None else sample_rhs(cfg, rng))
                      for v, e in spec.prescribed}
        try:
            system = invert(integrals, prescribed, state_vars, node_cap)
        except InversionRejected as rej:
            bump(rej.reason)
            continue
        if not filter_nontrivial(system):
            bump("decoupled")
            continue

        tiers = []
        caveat = False
        inconclusive = False
        for V in integrals:
            result: VerificationResult = verify_first_integral(V, system, zero_cfg)
            if result.inconclusive:
                inconclusive = True
                break
            if not result.verdict:
                raise InternalVerificationError(
                    "constructed pair failed verification "
                    f"(reason: {result.reason}); integral={polish_str(V)} "
                    f"system={[polish_str(r) for r in system.rhs]} "
                    f"witness={polish_str(result.witness)}")
            tiers.append(result.tier)
            _, notes = total_derivative_report(V, system)
            caveat = caveat or notes.domain_caveat
        if inconclusive:
            bump("inconclusive")
            continue

        meta = {
            "attempts": attempt,
            "rejections": dict(sorted(rejections.items())),
            "verification_tiers": tiers,
            "domain_caveat": caveat,
            "sampler_digest": cfg.digest(),
            "integral_stats": [expr_stats(V)._asdict() for V in integrals],
        }
        meta["integral_stats"] = [
            {**st, "variable_set": sorted(st["variable_set"])}
            for st in meta["integral_stats"]
        ]
        return IntegralPair(system=system, integrals=integrals, meta=meta)

    raise GenerationBudgetError(max_attempts, rejections)


def sample_family(params: Optional[tuple[int, int, int, int, int, int]] = None,
                  rng: Optional[random.Random] = None) -> OdeSystem:
    """x' = y, y' = (Ax+Bt+C)/(Dx+Et+F) with single-digit coefficients; the
    denominator must not be identically zero."""
    if params is None:
        if rng is None:
            raise ValueError("either explicit parameters or an rng is required")
        while True:
            candidate = tuple(rng.randint(-9, 9) for _ in range(6))
            if any(candidate[3:]):
                params = candidate
                break
    a, b, c, d, e, f = params
    if not any((d, e, f)):
        raise DegenerateDenominatorError("denominator Dx+Et+F is identically zero")
    x, t = Var("x"), Var("t")

    def affine(p: int, q: int, r: int) -> Expr:
        return Binary("add", Binary("add", Binary("mul", Const(Fraction(p)), x),
                                    Binary("mul", Const(Fraction(q)), t)),
                      Const(Fraction(r)))

    rhs_y = simplify(Binary("div", affine(a, b, c), affine(d, e, f)))
    return OdeSystem.make((Var("y"), rhs_y))


# ---------------------------------------------------------------------------
# reproducible (optionally parallel) batch generation

def slot_rng(master_seed: int, slot: int) -> random.Random:
    """Independent stream per output slot; output is identical for any worker
    count because streams never depend on worker identity."""
    return random.Random(f"{master_seed}:slot:{slot}")


def _generate_slot(args) -> tuple[int, Optional[IntegralPair], dict]:
    slot, spec, cfg, zero_cfg, max_attempts, master_seed = args
    rng = slot_rng(master_seed, slot)
    try:
        pair = generate_pair(spec, cfg, rng, zero_cfg, max_attempts)
    except GenerationBudgetError as exc:
        return slot, None, exc.rejections
    meta = dict(pair.meta)
    meta["slot"] = slot
    meta["master_seed"] = master_seed
    return slot, IntegralPair(pair.system, pair.integrals, meta), meta.get("rejections", {})


def generate_dataset(count: int, spec: SeedSpec, cfg: SamplerConfig,
                     master_seed: int, workers: int = 1,
                     zero_cfg: ZeroTestConfig = ZeroTestConfig(),
                     max_attempts: int = DEFAULT_MAX_ATTEMPTS
                     ) -> tuple[list[IntegralPair], dict]:
    """Generate `count` pairs; byte-identical output for any worker count."""
    tasks = [(slot, spec, cfg, zero_cfg, max_attempts, master_seed)
             for slot in range(count)]
    if workers > 1 and count > 1:
        import multiprocessing as mp
        with mp.Pool(workers) as pool:
            raw = pool.map(_generate_slot, tasks, chunksize=max(1, count // (workers * 4)))
    else:
        raw = [_generate_slot(task) for task in tasks]
    raw.sort(key=lambda item: item[0])
    pairs = [pair for _, pair, _ in raw if pair is not None]
    totals: dict[str, int] = {}
    for _, _, rej in raw:
        for reason, n in rej.items():
            totals[reason] = totals.get(reason, 0) + n
    run_meta = {
        "master_seed": master_seed,
        "requested": count,
        "emitted": len(pairs),
        "budget_failures": count - len(pairs),
        "rejection_totals": dict(sorted(totals.items())),
        "sampler_digest": cfg.digest(),
        "max_attempts": max_attempts,
    }
    return pairs, run_meta

"""Composite reward for candidate token sequences.

A candidate that verifies as a first integral earns the full reward; a valid
but wrong expression earns a shaped reward decaying with its minimum token
edit distance to the references; an invalid sequence is penalised according
to how it is broken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .calculus import OdeSystem, verify_first_integral
from .expr import (
    DEFAULT_VARIABLES,
    Expr,
    UnbalancedArityError,
    arity_imbalance,
    classify_token,
    free_vars,
    parse_polish,
    tokenize,
)
from .simplify import ZeroTestConfig

TokenSeq = Sequence[str]


@dataclass(frozen=True)
class RewardConfig:
    r_max: float = 100.0
    omega: float = 50.0  # 0 for the sparse binary scheme
    k_penalty: float = 1.0
    k_l: float = 0.1
    k_s: float = 0.01

    def __post_init__(self):
        if self.r_max <= 0 or self.k_penalty <= 0 or self.k_l <= 0 or self.k_s <= 0:
            raise ValueError("r_max, k_penalty, k_l, k_s must be positive")
        if not 0.0 <= self.omega <= self.r_max:
            raise ValueError("omega must lie in [0, r_max] so the shaped "
                             "branch stays within [0, r_max]")

    @classmethod
    def shaped(cls) -> "RewardConfig":
        return cls(omega=50.0)

    @classmethod
    def binary(cls) -> "RewardConfig":
        return cls(omega=0.0)


# --- validity classification -------------------------------------------------

@dataclass(frozen=True)
class Valid:
    expr: Expr


@dataclass(frozen=True)
class Unbalanced:
    imbalance: int  # operand count - binary op count - 1, or parser residue


@dataclass(frozen=True)
class UnknownSymbol:
    token: str


@dataclass(frozen=True)
class DegenerateVars:
    var_count: int  # 0 or 1 distinct variables


Validity = Union[Valid, Unbalanced, UnknownSymbol, DegenerateVars]


def classify(tokens: TokenSeq | str,
             variables: Sequence[str] = DEFAULT_VARIABLES) -> Validity:
    """Total, mutually exclusive classification, checked in the order:
    unknown symbol, arity balance, parse, variable count."""
    toks = tokenize(tokens)
    for tok in toks:
        if classify_token(tok, variables) == "unknown":
            return UnknownSymbol(tok)
    ek = arity_imbalance(toks, variables)
    if ek != 0:
        return Unbalanced(ek)
    try:
        expr = parse_polish(toks, variables)
    except UnbalancedArityError as err:
        return Unbalanced(err.imbalance)
    n_vars = len(free_vars(expr))
    if n_vars <= 1:
        return DegenerateVars(n_vars)
    return Valid(expr)


# --- token edit distance ------------------------------------------------------

def levenshtein(a: TokenSeq | str, b: TokenSeq | str) -> int:
    """Token-level edit distance with unit insert/delete/substitute costs."""
    s = tokenize(a)
    t = tokenize(b)
    if not s:
        return len(t)
    if not t:
        return len(s)
    prev = list(range(len(t) + 1))
    for i, si in enumerate(s, start=1):
        cur = [i] + [0] * len(t)
        for j, tj in enumerate(t, start=1):
            cost = 0 if si == tj else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1]


def shaping(distance: int, cfg: RewardConfig = RewardConfig()) -> float:
    """exp(-k_l * L), monotone from 1 at a perfect match towards 0."""
    if distance < 0:
        raise ValueError("distance must be non-negative")
    return math.exp(-cfg.k_l * distance)


def penalty(v: Validity, cfg: RewardConfig = RewardConfig()) -> float:
    if isinstance(v, Unbalanced):
        return 1.0 - math.exp(-abs(v.imbalance) * cfg.k_s)
    if isinstance(v, UnknownSymbol):
        return 1.0
    if isinstance(v, DegenerateVars):
        return 0.0
    raise ValueError("penalty is only defined for invalid candidates")


# --- candidate scoring ----------------------------------------------------------

@dataclass(frozen=True)
class CandidateScore:
    reward: float
    branch: str  # "verified" | "shaped" | "penalty"
    distance: Optional[int] = None  # min token distance, shaped branch only
    imbalance: Optional[int] = None  # E_k, unbalanced candidates only
    inconclusive: bool = False  # verification could not decide; scored as shaped


def score_candidate(sys: OdeSystem, references: Sequence[TokenSeq],
                    candidate: TokenSeq | str,
                    cfg: RewardConfig = RewardConfig(),
                    zero_cfg: ZeroTestConfig = ZeroTestConfig()) -> CandidateScore:
    cand = tokenize(candidate)
    validity = classify(cand)
    if not isinstance(validity, Valid):
        p = penalty(validity, cfg)
        imbalance = validity.imbalance if isinstance(validity, Unbalanced) else None
        return CandidateScore(reward=-cfg.k_penalty * p + 0.0, branch="penalty",
                              imbalance=imbalance)
    result = verify_first_integral(validity.expr, sys, zero_cfg)
    if result.verdict:
        return CandidateScore(reward=cfg.r_max, branch="verified")
    distance = min(levenshtein(cand, ref) for ref in references)
    return CandidateScore(reward=cfg.omega * shaping(distance, cfg), branch="shaped",
                          distance=distance, inconclusive=result.inconclusive)


def _checked_references(references: Sequence[TokenSeq | str]) -> list[list[str]]:
    if not references:
        raise ValueError("at least one reference expression is required")
    out = []
    for ref in references:
        toks = tokenize(ref)
        if not isinstance(classify(toks), Valid):
            raise ValueError(f"reference does not parse as a valid expression: "
                             f"{' '.join(toks)}")
        out.append(toks)
    return out


def reward_one(sys: OdeSystem, references: Sequence[TokenSeq | str],
               candidate: TokenSeq | str,
               cfg: RewardConfig = RewardConfig(),
               zero_cfg: ZeroTestConfig = ZeroTestConfig()) -> float:
    refs = _checked_references(references)
    return score_candidate(sys, refs, candidate, cfg, zero_cfg).reward


def reward_group(sys: OdeSystem, references: Sequence[TokenSeq | str],
                 candidates: Sequence[TokenSeq | str],
                 cfg: RewardConfig = RewardConfig(),
                 zero_cfg: ZeroTestConfig = ZeroTestConfig()) -> float:
    """A group scores the best of its candidates."""
    if not candidates:
        raise ValueError("at least one candidate is required")
    refs = _checked_references(references)
    return max(score_candidate(sys, refs, c, cfg, zero_cfg).reward
               for c in candidates)


def score_batch_record(record: dict, cfg: RewardConfig = RewardConfig(),
                       zero_cfg: ZeroTestConfig = ZeroTestConfig()) -> dict:
    """Score one batch line {system:[xdot,ydot], references:[...],
    candidates:[...]}; appends per-candidate results and the group reward."""
    sys = OdeSystem.from_polish(record["system"])
    refs = _checked_references(record["references"])
    results = []
    for cand in record["candidates"]:
        score = score_candidate(sys, refs, cand, cfg, zero_cfg)
        results.append({
            "reward": score.reward,
            "branch": score.branch,
            "L": score.distance,
            "E_k": score.imbalance,
            **({"inconclusive": True} if score.inconclusive else {}),
        })
    out = dict(record)
    out["results"] = results
    out["group_reward"] = max(r["reward"] for r in results) if results else None
    return out

"""Predict-and-verify evaluation: score candidate beams per system under a
timeout, aggregate accuracy and token statistics, and provide a brute-force
enumeration baseline that can stand in for any external candidate generator.
"""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .calculus import OdeSystem, verify_first_integral
from .expr import DomainError, Expr, Unary, Binary, Var, Const, eval_numeric, polish_str, tokenize
from .reward import Valid, classify
from .simplify import (
    BudgetExceededError,
    ZeroTestConfig,
    simplify,
    work_budget,
)

VERDICTS = ("verified", "not-integral", "invalid", "timeout")


@dataclass(frozen=True)
class CandidateOutcome:
    tokens: tuple[str, ...]
    verdict: str
    detail: str = ""


def verify_candidates(sys: OdeSystem, candidates: Sequence[Sequence[str] | str],
                      zero_cfg: ZeroTestConfig = ZeroTestConfig(),
                      timeout_seconds: Optional[float] = None,
                      step_budget: Optional[int] = None) -> list[CandidateOutcome]:
    """Classify each candidate independently; a timeout on one candidate never
    blocks the others.  The step budget gives reproducible timeouts in tests;
    wall-clock seconds match production use."""
    if not candidates:
        raise ValueError("a candidate beam must contain at least one candidate")
    outcomes: list[CandidateOutcome] = []
    for cand in candidates:
        tokens = tuple(tokenize(cand))
        try:
            if timeout_seconds is None and step_budget is None:
                outcomes.append(_judge(sys, tokens, zero_cfg))
            else:
                with work_budget(max_steps=step_budget, seconds=timeout_seconds):
                    outcomes.append(_judge(sys, tokens, zero_cfg))
        except BudgetExceededError:
            outcomes.append(CandidateOutcome(tokens, "timeout"))
    return outcomes


def _judge(sys: OdeSystem, tokens: tuple[str, ...],
           zero_cfg: ZeroTestConfig) -> CandidateOutcome:
    validity = classify(tokens)
    if not isinstance(validity, Valid):
        return CandidateOutcome(tokens, "invalid", type(validity).__name__)
    result = verify_first_integral(validity.expr, sys, zero_cfg)
    if result.verdict:
        return CandidateOutcome(tokens, "verified")
    return CandidateOutcome(tokens, "not-integral", result.reason)


@dataclass(frozen=True)
class EvalReport:
    total_systems: int
    verified_systems: int
    missing: int
    counts: dict
    per_system: list = field(repr=False)
    mean_tokens_per_candidate: float = 0.0
    mean_tokens_per_sample: float = 0.0

    @property
    def accuracy(self) -> float:
        return self.verified_systems / self.total_systems if self.total_systems else 0.0

    def to_dict(self) -> dict:
        return {
            "total_systems": self.total_systems,
            "verified_systems": self.verified_systems,
            "accuracy": self.accuracy,
            "missing": self.missing,
            "counts": self.counts,
            "mean_tokens_per_candidate": self.mean_tokens_per_candidate,
            "mean_tokens_per_sample": self.mean_tokens_per_sample,
            "per_system": self.per_system,
        }

    def to_text_table(self) -> str:
        lines = [
            f"{'systems':>24}: {self.total_systems}",
            f"{'verified systems':>24}: {self.verified_systems}",
            f"{'accuracy':>24}: {self.accuracy:.3f}",
            f"{'missing beams':>24}: {self.missing}",
            f"{'tokens per candidate':>24}: {self.mean_tokens_per_candidate:.1f}",
            f"{'tokens per sample':>24}: {self.mean_tokens_per_sample:.1f}",
        ]
        for verdict in VERDICTS:
            lines.append(f"{('candidates ' + verdict):>24}: {self.counts.get(verdict, 0)}")
        return "\n".join(lines)


def evaluate(records: Sequence, candidates_by_id: Mapping[str, Sequence],
             zero_cfg: ZeroTestConfig = ZeroTestConfig(),
             timeout_seconds: Optional[float] = None,
             step_budget: Optional[int] = None) -> EvalReport:
    """A system counts as correct when at least one candidate in its beam
    verifies; systems without a beam count as failures."""
    counts = {verdict: 0 for verdict in VERDICTS}
    per_system: list = []
    verified_systems = 0
    missing = 0
    token_counts: list[int] = []
    sample_tokens: list[int] = []
    for record in records:
        beam = candidates_by_id.get(record.id)
        if not beam:
            missing += 1
            per_system.append({"id": record.id, "correct": False, "missing": True})
            continue
        outcomes = verify_candidates(record.parsed_system(), beam, zero_cfg,
                                     timeout_seconds, step_budget)
        correct = any(o.verdict == "verified" for o in outcomes)
        verified_systems += int(correct)
        beam_tokens = 0
        for o in outcomes:
            counts[o.verdict] += 1
            token_counts.append(len(o.tokens))
            beam_tokens += len(o.tokens)
        sample_tokens.append(beam_tokens)
        per_system.append({
            "id": record.id,
            "correct": correct,
            "verdicts": [o.verdict for o in outcomes],
        })
    return EvalReport(
        total_systems=len(records),
        verified_systems=verified_systems,
        missing=missing,
        counts=counts,
        per_system=per_system,
        mean_tokens_per_candidate=(sum(token_counts) / len(token_counts)
                                   if token_counts else 0.0),
        mean_tokens_per_sample=(sum(sample_tokens) / len(sample_tokens)
                                if sample_tokens else 0.0),
    )


# ---------------------------------------------------------------------------
# candidates file format: one JSON object per line {system_id, candidates}

def write_candidates(path: str | Path, candidates_by_id: Mapping[str, Sequence]) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8") as handle:
        for system_id, beam in candidates_by_id.items():
            payload = {"system_id": system_id,
                       "candidates": [" ".join(tokenize(c)) for c in beam]}
            handle.write(json.dumps(payload, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_candidates(path: str | Path) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                out[raw["system_id"]] = list(raw["candidates"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"candidates file line {line_no}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# brute-force enumeration baseline

@dataclass(frozen=True)
class EnumerationResult:
    found: tuple[Expr, ...]
    generated: int
    screened: int
    verified_calls: int
    budget_exhausted: bool


_ENUM_UNARY = ("sin", "cos", "tan", "exp", "log", "sqrt")
_ENUM_BINARY = ("add", "sub", "mul", "div", "pow")

_VAR_BITS = {"x": 1, "y": 2, "t": 4}

DEFAULT_ENUM_LEAVES: tuple[Expr, ...] = (
    Var("x"), Var("y"), Var("t"),
    Const(Fraction(1)), Const(Fraction(2)), Const(Fraction(3)),
)


def _apply_unary(op: str, v: Optional[float]) -> Optional[float]:
    if v is None:
        return None
    try:
        if op == "sin":
            out = math.sin(v)
        elif op == "cos":
            out = math.cos(v)
        elif op == "tan":
            out = math.tan(v)
        elif op == "exp":
            out = math.exp(v)
        elif op == "log":
            if v <= 0.0:
                return None
            out = math.log(v)
        else:  # sqrt
            if v < 0.0:
                return None
            out = math.sqrt(v)
    except (OverflowError, ValueError):
        return None
    return out if math.isfinite(out) else None


def _apply_binary(op: str, a: Optional[float], b: Optional[float]) -> Optional[float]:
    if a is None or b is None:
        return None
    try:
        if op == "add":
            out = a + b
        elif op == "sub":
            out = a - b
        elif op == "mul":
            out = a * b
        elif op == "div":
            if b == 0.0:
                return None
            out = a / b
        else:  # pow
            if a == 0.0 and b < 0.0:
                return None
            if a < 0.0 and b != math.floor(b):
                return None
            out = a ** b
    except (OverflowError, ValueError):
        return None
    return out if math.isfinite(out) else None


def _fingerprint(values: tuple) -> tuple:
    return tuple(None if v is None else round(v, 9) for v in values)


def enumerate_baseline(sys: OdeSystem, max_ops: int,
                       leaves: Sequence[Expr] = DEFAULT_ENUM_LEAVES,
                       zero_cfg: ZeroTestConfig = ZeroTestConfig(),
                       seconds: Optional[float] = None,
                       max_level_size: int = 500_000) -> EnumerationResult:
    """Enumerate expressions with up to max_ops operators over the vocabulary,
    dedup by numeric fingerprint, pre-screen with a directional derivative
    along the flow, and confirm survivors with the real verifier."""
    deadline = time.monotonic() + seconds if seconds is not None else None
    rng = random.Random(f"enum:{zero_cfg.seed}")
    lo, hi = zero_cfg.box
    grid = [{v: rng.uniform(lo, hi) for v in ("x", "y", "t")} for _ in range(8)]
    fd_points = _fd_probe_points(sys, zero_cfg)

    def leaf_entry(e: Expr):
        vals = []
        for point in grid:
            try:
                vals.append(eval_numeric(e, point))
            except DomainError:
                vals.append(None)
        mask = sum(_VAR_BITS.get(v, 0) for v in
                   ([e.name] if isinstance(e, Var) else []))
        return (e, tuple(vals), mask)

    levels: list[list] = [[leaf_entry(e) for e in leaves]]
    seen = {_fingerprint(entry[1]) for entry in levels[0]}
    found: list[Expr] = []
    found_keys: set[str] = set()
    generated = len(leaves)
    screened = 0
    verified_calls = 0
    exhausted = False

    def consider(entry) -> None:
        nonlocal screened, verified_calls
        e, vals, mask = entry
        if not mask & 3:  # no state variable
            return
        valid = [v for v in vals if v is not None]
        if len(valid) < 2 or max(valid) - min(valid) <= 1e-9 * (1 + abs(valid[0])):
            return
        screened += 1
        if not _directional_derivative_screen(e, fd_points):
            return
        verified_calls += 1
        if verify_first_integral(e, sys, zero_cfg).verdict:
            key = polish_str(simplify(e))
            if key not in found_keys:
                found_keys.add(key)
                found.append(simplify(e))

    for entry in levels[0]:
        consider(entry)

    for k in range(1, max_ops + 1):
        if exhausted:
            break
        level: list = []
        def emit(e, vals, mask) -> bool:
            nonlocal generated, exhausted
            fp = _fingerprint(vals)
            if all(v is None for v in vals) or fp in seen:
                return True
            seen.add(fp)
            entry = (e, vals, mask)
            level.append(entry)
            generated += 1
            consider(entry)
            if deadline is not None and generated % 512 == 0 and time.monotonic() > deadline:
                exhausted = True
                return False
            if len(level) > max_level_size:
                exhausted = True
                return False
            return True

        for op in _ENUM_UNARY:
            if exhausted:
                break
            for child, cvals, cmask in levels[k - 1]:
                vals = tuple(_apply_unary(op, v) for v in cvals)
                if not emit(Unary(op, child), vals, cmask):
                    break
        for op in _ENUM_BINARY:
            if exhausted:
                break
            for i in range(k):
                if exhausted:
                    break
                for left, lvals, lmask in levels[i]:
                    if exhausted:
                        break
                    for right, rvals, rmask in levels[k - 1 - i]:
                        vals = tuple(_apply_binary(op, a, b)
                                     for a, b in zip(lvals, rvals))
                        if not emit(Binary(op, left, right), vals, lmask | rmask):
                            break
        levels.append(level)

    return EnumerationResult(found=tuple(found), generated=generated,
                             screened=screened, verified_calls=verified_calls,
                             budget_exhausted=exhausted)


def _fd_probe_points(sys: OdeSystem, zero_cfg: ZeroTestConfig,
                     n_points: int = 4) -> list[dict]:
    """Probe points where both right-hand sides evaluate, with the flow
    direction attached for the directional-derivative screen."""
    rng = random.Random(f"enum-fd:{zero_cfg.seed}")
    lo, hi = zero_cfg.box
    points = []
    attempts = 0
    while len(points) < n_points and attempts < 80:
        attempts += 1
        point = {v: rng.uniform(lo, hi) for v in ("x", "y", "t")}
        try:
            f = eval_numeric(sys.rhs[0], point)
            g = eval_numeric(sys.rhs[1], point)
        except DomainError:
            continue
        if abs(f) > 1e6 or abs(g) > 1e6:
            continue
        points.append({**point, "_f": f, "_g": g})
    return points


def _directional_derivative_screen(e: Expr, fd_points: list[dict],
                                   h: float = 1e-4, tol: float = 1e-3) -> bool:
    """Loose numeric test of dV/dt ~ 0 along the flow; never rejects a true
    invariant at the tested points, filters out almost everything else."""
    valid = 0
    for point in fd_points:
        f, g = point["_f"], point["_g"]
        plus = {"t": point["t"] + h, "x": point["x"] + h * f, "y": point["y"] + h * g}
        minus = {"t": point["t"] - h, "x": point["x"] - h * f, "y": point["y"] - h * g}
        try:
            v_plus = eval_numeric(e, plus)
            v_minus = eval_numeric(e, minus)
        except DomainError:
            continue
        valid += 1
        derivative = (v_plus - v_minus) / (2 * h)
        if abs(derivative) > tol * (1.0 + abs(v_plus) + abs(v_minus)):
            return False
    return valid >= 1

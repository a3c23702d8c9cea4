"""Line-delimited dataset records: persistence, dedup, splits, blending and
Normal/Hard test-set construction.

One JSON object per line with a fixed key order {id, system, integrals, meta,
source_tag}; ids are content digests of the canonically simplified system and
integrals, so commutative rewrites collapse together while genuinely
different pairs never collide.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .backgen import (
    GenerationBudgetError,
    IntegralPair,
    SamplerConfig,
    SeedSpec,
    generate_pair,
    slot_rng,
)
from .calculus import OdeSystem, verify_first_integral
from .expr import Expr, expr_stats, parse_polish, polish_str
from .simplify import ZeroTestConfig, simplify

SOURCE_TAGS = ("bwd_base", "bwd_syn", "fwd", "external")


class DatasetFormatError(Exception):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class InsufficientExtrasError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    system: tuple[str, str]
    integrals: tuple[str, ...]
    meta: dict = field(compare=False)
    source_tag: str = "bwd_base"

    def parsed_system(self) -> OdeSystem:
        return OdeSystem.from_polish(self.system)

    def parsed_integrals(self) -> tuple[Expr, ...]:
        return tuple(parse_polish(s) for s in self.integrals)


def canonical_id(system: Sequence[Expr], integrals: Sequence[Expr]) -> str:
    canon_sys = [polish_str(simplify(e)) for e in system]
    canon_int = sorted(polish_str(simplify(v)) for v in integrals)
    payload = json.dumps({"system": canon_sys, "integrals": canon_int},
                         separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:32]


def record_from_pair(pair: IntegralPair, source_tag: str = "bwd_base") -> DatasetRecord:
    if source_tag not in SOURCE_TAGS:
        raise ValueError(f"unknown source tag {source_tag!r}")
    return DatasetRecord(
        id=canonical_id(pair.system.rhs, pair.integrals),
        system=tuple(polish_str(e) for e in pair.system.rhs),  # type: ignore[arg-type]
        integrals=tuple(polish_str(v) for v in pair.integrals),
        meta=pair.meta,
        source_tag=source_tag,
    )


def record_from_system(sys: OdeSystem, source_tag: str = "fwd",
                       meta: Optional[dict] = None) -> DatasetRecord:
    """A record with no integrals yet (solver input, e.g. the rational
    second-order family)."""
    return DatasetRecord(
        id=canonical_id(sys.rhs, ()),
        system=tuple(polish_str(e) for e in sys.rhs),  # type: ignore[arg-type]
        integrals=(),
        meta=meta or {},
        source_tag=source_tag,
    )


def record_to_json(record: DatasetRecord) -> str:
    return json.dumps({
        "id": record.id,
        "system": list(record.system),
        "integrals": list(record.integrals),
        "meta": record.meta,
        "source_tag": record.source_tag,
    }, ensure_ascii=False, separators=(", ", ": "))


def write_records(path: str | Path, records: Iterable[DatasetRecord]) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(record_to_json(record) + "\n")
            n += 1
    return n


def read_records(path: str | Path, verify_ids: bool = False) -> list[DatasetRecord]:
    """Parse and validate a record file; every stored expression must parse
    and round-trip.  Errors carry the 1-based line number."""
    records: list[DatasetRecord] = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(line_no, f"invalid JSON ({exc.msg})") from None
            try:
                record = DatasetRecord(
                    id=raw["id"],
                    system=tuple(raw["system"]),
                    integrals=tuple(raw.get("integrals", ())),
                    meta=raw.get("meta", {}),
                    source_tag=raw.get("source_tag", "external"),
                )
            except (KeyError, TypeError) as exc:
                raise DatasetFormatError(line_no, f"missing field ({exc})") from None
            if len(record.system) != 2:
                raise DatasetFormatError(line_no, "system must have two right-hand sides")
            for s in list(record.system) + list(record.integrals):
                try:
                    parsed = parse_polish(s)
                except Exception as exc:
                    raise DatasetFormatError(line_no, f"unparseable expression {s!r}: {exc}") from None
                if polish_str(parsed) != " ".join(s.split()):
                    raise DatasetFormatError(line_no, f"expression does not round-trip: {s!r}")
            if verify_ids:
                expected = canonical_id([parse_polish(s) for s in record.system],
                                        [parse_polish(s) for s in record.integrals])
                if record.id != expected:
                    raise DatasetFormatError(line_no, f"id {record.id} != canonical {expected}")
            records.append(record)
    return records


# ---------------------------------------------------------------------------
# dedup / split / blend

def dedup(records: Sequence[DatasetRecord]) -> tuple[list[DatasetRecord], int]:
    """First occurrence per canonical id wins; returns (kept, dropped)."""
    seen: set[str] = set()
    kept: list[DatasetRecord] = []
    for record in records:
        if record.id in seen:
            continue
        seen.add(record.id)
        kept.append(record)
    return kept, len(records) - len(kept)


@dataclass(frozen=True)
class SplitManifest:
    seed: int
    fractions: dict
    counts: dict
    dedup_dropped: int = 0

    def to_json(self) -> str:
        return json.dumps({
            "seed": self.seed,
            "fractions": self.fractions,
            "counts": self.counts,
            "dedup_dropped": self.dedup_dropped,
        }, sort_keys=True)


def split(records: Sequence[DatasetRecord], fractions: Mapping[str, float],
          seed: int) -> tuple[dict[str, list[DatasetRecord]], SplitManifest]:
    """Deterministic shuffle then largest-remainder allocation; splits are
    disjoint by id (input is deduplicated first)."""
    if not fractions:
        raise ValueError("at least one split fraction is required")
    if any(f < 0 for f in fractions.values()):
        raise ValueError("fractions must be non-negative")
    total = sum(fractions.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1 (got {total})")
    unique, dropped = dedup(records)
    shuffled = list(unique)
    random.Random(f"{seed}:split").shuffle(shuffled)
    n = len(shuffled)
    names = list(fractions)
    base = {name: int(math.floor(fractions[name] * n)) for name in names}
    remainder = n - sum(base.values())
    by_remainder = sorted(names,
                          key=lambda name: (-(fractions[name] * n - base[name]), name))
    for name in by_remainder[:remainder]:
        base[name] += 1
    out: dict[str, list[DatasetRecord]] = {}
    cursor = 0
    for name in names:
        out[name] = shuffled[cursor:cursor + base[name]]
        cursor += base[name]
    manifest = SplitManifest(seed=seed, fractions=dict(fractions),
                             counts={name: len(out[name]) for name in names},
                             dedup_dropped=dropped)
    return out, manifest


def blend(base: Sequence[DatasetRecord], extra: Sequence[DatasetRecord],
          fraction: float, seed: int) -> list[DatasetRecord]:
    """Down-sample the base uniformly so that extras make up `fraction` of an
    output the same size as the base."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    n = len(base)
    n_extra = int(math.floor(fraction * n + 0.5))
    if n_extra == 0:
        return list(base)
    if n_extra > len(extra):
        raise InsufficientExtrasError(
            f"need {n_extra} extra records but only {len(extra)} available")
    rng = random.Random(f"{seed}:blend")
    kept = rng.sample(list(base), n - n_extra)
    picked = rng.sample(list(extra), n_extra)
    combined = kept + picked
    rng.shuffle(combined)
    return combined


# ---------------------------------------------------------------------------
# test sets

def record_is_hard(record: DatasetRecord) -> bool:
    """Challenging pairs: the invariant involves time, and a nonlinear
    operator occurs in the invariant or the system."""
    integrals = record.parsed_integrals()
    if not integrals:
        return False
    stats = [expr_stats(v) for v in integrals]
    rhs_stats = [expr_stats(e) for e in record.parsed_system().rhs]
    has_t = any(s.has_t for s in stats)
    nonlinear = any(s.has_nonlinear_op for s in stats) or any(s.has_nonlinear_op for s in rhs_stats)
    return has_t and nonlinear


def make_testset(kind: str, count: int, cfg: SamplerConfig, seed: int,
                 spec: Optional[SeedSpec] = None,
                 zero_cfg: ZeroTestConfig = ZeroTestConfig(),
                 exclude_ids: frozenset[str] = frozenset(),
                 source_tag: str = "bwd_base",
                 max_slots: Optional[int] = None) -> tuple[list[DatasetRecord], dict]:
    """Normal draws the generation pipeline as-is; Hard additionally requires
    the has-t and nonlinear-operator predicate.  Test ids never collide with
    the supplied training ids."""
    if kind not in ("normal", "hard"):
        raise ValueError(f"kind must be 'normal' or 'hard', got {kind!r}")
    spec = spec or SeedSpec.bwd_base()
    limit = max_slots if max_slots is not None else max(1000, count * 200)
    records: list[DatasetRecord] = []
    seen: set[str] = set(exclude_ids)
    slot = 0
    budget_failures = 0
    filtered = 0
    while len(records) < count and slot < limit:
        rng = slot_rng(f"{seed}:{kind}", slot)  # type: ignore[arg-type]
        slot += 1
        try:
            pair = generate_pair(spec, cfg, rng, zero_cfg)
        except GenerationBudgetError:
            budget_failures += 1
            continue
        record = record_from_pair(pair, source_tag)
        if record.id in seen:
            filtered += 1
            continue
        if kind == "hard" and not record_is_hard(record):
            filtered += 1
            continue
        seen.add(record.id)
        records.append(record)
    if len(records) < count:
        raise GenerationBudgetError(slot, {"testset_slots": slot, "filtered": filtered})
    run_meta = {
        "kind": kind,
        "seed": seed,
        "count": len(records),
        "slots_used": slot,
        "filtered": filtered,
        "budget_failures": budget_failures,
        "sampler_digest": cfg.digest(),
    }
    return records, run_meta


def reverify_records(records: Sequence[DatasetRecord],
                     zero_cfg: ZeroTestConfig = ZeroTestConfig()
                     ) -> tuple[int, list[tuple[str, str]]]:
    """Re-run full verification of every stored integral; returns the number
    of checked integrals and (record id, integral) pairs that failed."""
    checked = 0
    failures: list[tuple[str, str]] = []
    for record in records:
        sys = record.parsed_system()
        for v_str, v in zip(record.integrals, record.parsed_integrals()):
            checked += 1
            if not verify_first_integral(v, sys, zero_cfg).verdict:
                failures.append((record.id, v_str))
    return checked, failures


def write_manifest(path: str | Path, payload: dict) -> Path:
    manifest_path = Path(str(path) + ".manifest.json")
    manifest_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")
    return manifest_path

"""Command-line interface: reproducible generation, scoring and evaluation runs.

Every file-producing subcommand derives all randomness from one master seed
(printed when not supplied) and writes a manifest sidecar from which the run
can be reproduced byte-for-byte.

Exit codes: 0 ok, 1 usage error, 2 verification failure in strict mode,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
import traceback
from pathlib import Path

from .backgen import (
    GenerationBudgetError,
    SamplerConfig,
    SeedSpec,
    generate_dataset,
    generate_pair,
    sample_family,
    slot_rng,
)
from .calculus import OdeSystem, verify_first_integral
from .dataset import (
    blend,
    make_testset,
    read_records,
    record_from_pair,
    record_from_system,
    reverify_records,
    write_manifest,
    write_records,
)
from .expr import parse_polish, polish_str, print_infix
from .harness import (
    enumerate_baseline,
    evaluate,
    read_candidates,
    write_candidates,
)
from .reward import RewardConfig, score_batch_record
from .simplify import ZeroTestConfig


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); the contract is 1
        raise UsageError(f"{self.prog}: {message}")


def _resolve_seed(seed: int | None) -> int:
    if seed is None:
        seed = secrets.randbits(32)
        print(f"seed: {seed} (derived from entropy; pass --seed {seed} to reproduce)")
    return seed


def _run_manifest(args: argparse.Namespace, seed: int, extra: dict | None = None) -> dict:
    payload = {"command": args.command, "seed": seed}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "command", "seed"):
            continue
        if isinstance(value, Path):
            value = str(value)
        payload[key] = value
    if extra:
        payload["run"] = extra
    return payload


def _sampler_config(args: argparse.Namespace) -> SamplerConfig:
    if getattr(args, "op_range", None):
        lo, hi = args.op_range
        return SamplerConfig(op_count_range=(lo, hi))
    return SamplerConfig()


def _seed_spec(args: argparse.Namespace) -> SeedSpec:
    raw = getattr(args, "prescribe", "x=random")
    if raw == "none":
        return SeedSpec(prescribed=(), num_integrals=2)
    if "=" not in raw:
        raise UsageError(f"--prescribe expects VAR=random or VAR=<polish tokens>, got {raw!r}")
    var, _, value = raw.partition("=")
    var = var.strip()
    if var not in ("x", "y"):
        raise UsageError(f"--prescribe variable must be x or y, got {var!r}")
    rhs = None if value.strip() == "random" else parse_polish(value)
    return SeedSpec(prescribed=((var, rhs),), num_integrals=1)


def _zero_cfg(args: argparse.Namespace) -> ZeroTestConfig:
    return ZeroTestConfig(probes=getattr(args, "probes", 64),
                          tol=getattr(args, "tol", 1e-9),
                          seed=getattr(args, "zero_seed", 0))


# ---------------------------------------------------------------------------
# subcommand handlers

def cmd_generate(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    cfg = _sampler_config(args)
    if args.family:
        records = []
        for slot in range(args.count):
            system = sample_family(rng=slot_rng(seed, slot))
            records.append(record_from_system(
                system, "fwd", meta={"slot": slot, "master_seed": seed}))
        run_meta = {"emitted": len(records)}
    else:
        spec = _seed_spec(args)
        pairs, run_meta = generate_dataset(args.count, spec, cfg, seed,
                                           workers=args.workers)
        records = [record_from_pair(pair, args.source_tag) for pair in pairs]
    write_records(args.out, records)
    write_manifest(args.out, _run_manifest(args, seed, run_meta))
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_invert(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    cfg = _sampler_config(args)
    base_spec = _seed_spec(args)
    lines = [ln.strip() for ln in Path(args.integrals).read_text(encoding="utf-8").splitlines()
             if ln.strip()]
    records = []
    skipped = []
    for i, line in enumerate(lines):
        spec = SeedSpec(prescribed=base_spec.prescribed,
                        external_integrals=(parse_polish(line),))
        try:
            pair = generate_pair(spec, cfg, slot_rng(seed, i), _zero_cfg(args))
        except (GenerationBudgetError, ValueError) as exc:
            reason = getattr(exc, "rejections", None) or str(exc)
            skipped.append({"line": i + 1, "reason": reason})
            continue
        records.append(record_from_pair(pair, args.source_tag))
    write_records(args.out, records)
    write_manifest(args.out, _run_manifest(args, seed, {
        "accepted": len(records), "skipped": skipped}))
    print(f"inverted {len(records)}/{len(lines)} integrals into {args.out}"
          + (f" ({len(skipped)} skipped)" if skipped else ""))
    return 0


def cmd_testset(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    cfg = _sampler_config(args)
    exclude = frozenset()
    if args.exclude:
        exclude = frozenset(r.id for r in read_records(args.exclude))
    records, run_meta = make_testset(args.kind, args.count, cfg, seed,
                                     zero_cfg=_zero_cfg(args), exclude_ids=exclude)
    write_records(args.out, records)
    write_manifest(args.out, _run_manifest(args, seed, run_meta))
    print(f"wrote {len(records)} {args.kind} records to {args.out}")
    return 0


def cmd_blend(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    base = read_records(args.base)
    extra = read_records(args.extra)
    combined = blend(base, extra, args.fraction, seed)
    write_records(args.out, combined)
    n_extra = sum(1 for r in combined if r.source_tag != base[0].source_tag) if base else 0
    write_manifest(args.out, _run_manifest(args, seed, {
        "output": len(combined), "extra_tagged": n_extra}))
    print(f"blended {len(combined)} records to {args.out}")
    return 0


def cmd_reward(args: argparse.Namespace) -> int:
    cfg = RewardConfig.binary() if args.mode == "bin" else RewardConfig.shaped()
    zero_cfg = _zero_cfg(args)
    if args.batch:
        out_path = Path(args.out) if args.out else None
        results = []
        with Path(args.batch).open("r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                results.append(score_batch_record(record, cfg, zero_cfg))
        if out_path:
            with out_path.open("w", encoding="utf-8") as handle:
                for rec in results:
                    handle.write(json.dumps(rec, ensure_ascii=False) + "\n")
            write_manifest(out_path, _run_manifest(args, 0, {"records": len(results)}))
            print(f"scored {len(results)} records to {out_path}")
        else:
            for rec in results:
                print(json.dumps(rec, ensure_ascii=False))
        return 0
    if not (args.system and args.references and args.candidates):
        raise UsageError("either --batch or --system/--references/--candidates is required")
    record = {"system": args.system, "references": args.references,
              "candidates": args.candidates}
    scored = score_batch_record(record, cfg, zero_cfg)
    for cand, result in zip(scored["candidates"], scored["results"]):
        print(f"{result['reward']:10.4f}  {result['branch']:>9}  {cand}")
    print(f"group reward: {scored['group_reward']}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    zero_cfg = _zero_cfg(args)
    if args.file:
        records = read_records(args.file)
        checked, failures = reverify_records(records, zero_cfg)
        print(f"re-verified {checked} integrals across {len(records)} records; "
              f"{len(failures)} failures")
        for record_id, integral in failures[:20]:
            print(f"  FAIL {record_id}: {integral}")
        if failures and args.strict:
            return 2
        return 0
    if not (args.system and args.integral):
        raise UsageError("either --file or --system/--integral is required")
    sys_ = OdeSystem.from_polish(args.system)
    result = verify_first_integral(parse_polish(args.integral), sys_, zero_cfg)
    print(f"verdict: {'correct' if result.verdict else 'not a first integral'}")
    print(f"tier: {result.tier}")
    if result.reason:
        print(f"reason: {result.reason}")
    print(f"dV/dt -> {print_infix(result.witness)}")
    if not result.verdict and args.strict:
        return 2
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    records = read_records(args.dataset)
    if args.replay:
        candidates = {r.id: list(r.integrals) for r in records if r.integrals}
    else:
        if not args.candidates:
            raise UsageError("either --candidates or --replay is required")
        candidates = read_candidates(args.candidates)
        unknown = set(candidates) - {r.id for r in records}
        if unknown:
            print(f"warning: {len(unknown)} candidate beams reference unknown system ids",
                  file=sys.stderr)
    report = evaluate(records, candidates, _zero_cfg(args),
                      timeout_seconds=args.timeout, step_budget=args.step_budget)
    print(report.to_text_table())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2) + "\n",
                                  encoding="utf-8")
        write_manifest(args.out, _run_manifest(args, 0, {"accuracy": report.accuracy}))
    if args.figures:
        from .report import render_eval_report
        written = render_eval_report(report, args.figures)
        print("figures: " + ", ".join(str(p) for p in written))
    return 0


def cmd_enumerate(args: argparse.Namespace) -> int:
    sys_ = OdeSystem.from_polish(args.system)
    leaves = None
    if args.leaves:
        leaves = [parse_polish(tok) for tok in args.leaves.split()]
    kwargs = {"seconds": args.seconds} if args.seconds else {}
    if leaves:
        kwargs["leaves"] = leaves
    result = enumerate_baseline(sys_, args.max_ops, zero_cfg=_zero_cfg(args), **kwargs)
    print(f"generated {result.generated} expressions, "
          f"{result.verified_calls} full verifications, "
          f"{len(result.found)} verified integrals"
          + (" (budget exhausted)" if result.budget_exhausted else ""))
    for e in result.found:
        print(f"  {polish_str(e)}    # {print_infix(e)}")
    if args.out:
        write_candidates(args.out, {args.system_id: [polish_str(e) for e in result.found]})
        print(f"candidates written to {args.out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    from .report import render_dataset_report
    records = read_records(args.dataset)
    written = render_dataset_report(records, args.out)
    print("\n".join(str(p) for p in written))
    return 0


# ---------------------------------------------------------------------------
# parser construction

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="firstint",
                     description="Verified generation, scoring and evaluation of "
                                 "first integrals for 2D ODE systems")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_zero_flags(p):
        p.add_argument("--probes", type=int, default=64,
                       help="numeric zero-test probe count (default 64)")
        p.add_argument("--tol", type=float, default=1e-9,
                       help="numeric zero-test relative tolerance (default 1e-9)")
        p.add_argument("--zero-seed", type=int, default=0,
                       help="seed of the zero-test probe stream (default 0)")

    p = sub.add_parser("generate", help="generate verified pairs (or family systems)")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--family", action="store_true",
                   help="emit x''=(Ax+Bt+C)/(Dx+Et+F) systems without integrals")
    p.add_argument("--prescribe", default="x=random",
                   help="VAR=random, VAR=<polish>, or 'none' for two sampled "
                        "integrals (default x=random)")
    p.add_argument("--op-range", type=int, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--source-tag", default="bwd_base")
    add_zero_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("invert", help="turn external integrals (one per line) into pairs")
    p.add_argument("--integrals", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--prescribe", default="x=y")
    p.add_argument("--seed", type=int)
    p.add_argument("--op-range", type=int, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--source-tag", default="bwd_syn")
    add_zero_flags(p)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("testset", help="build a normal or hard test set")
    p.add_argument("--kind", choices=("normal", "hard"), required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--exclude", type=Path,
                   help="training record file whose ids must not appear")
    p.add_argument("--op-range", type=int, nargs=2, metavar=("LO", "HI"))
    add_zero_flags(p)
    p.set_defaults(func=cmd_testset)

    p = sub.add_parser("blend", help="blend extra records into a base set")
    p.add_argument("--base", type=Path, required=True)
    p.add_argument("--extra", type=Path, required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_blend)

    p = sub.add_parser("reward", help="score candidates against references")
    p.add_argument("--mode", choices=("ld", "bin"), default="ld")
    p.add_argument("--batch", type=Path,
                   help="jsonl with {system, references, candidates} per line")
    p.add_argument("--out", type=Path)
    p.add_argument("--system", nargs=2, metavar=("XDOT", "YDOT"))
    p.add_argument("--references", nargs="+")
    p.add_argument("--candidates", nargs="+")
    add_zero_flags(p)
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("verify", help="verify one integral or a whole record file")
    p.add_argument("--system", nargs=2, metavar=("XDOT", "YDOT"))
    p.add_argument("--integral")
    p.add_argument("--file", type=Path)
    p.add_argument("--strict", action="store_true",
                   help="exit 2 when verification fails")
    add_zero_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("eval", help="evaluate candidate beams against a dataset")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--candidates", type=Path)
    p.add_argument("--replay", action="store_true",
                   help="use each record's own integrals as its beam")
    p.add_argument("--out", type=Path)
    p.add_argument("--figures", type=Path)
    p.add_argument("--timeout", type=float,
                   help="wall-clock seconds per candidate (production mode)")
    p.add_argument("--step-budget", type=int,
                   help="deterministic work budget per candidate (test mode)")
    add_zero_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("enumerate", help="brute-force baseline candidate generator")
    p.add_argument("--system", nargs=2, metavar=("XDOT", "YDOT"), required=True)
    p.add_argument("--max-ops", type=int, required=True)
    p.add_argument("--leaves", help="space-separated leaf tokens (default 'x y t 1 2 3')")
    p.add_argument("--seconds", type=float, help="wall-clock budget")
    p.add_argument("--out", type=Path, help="write found integrals as a candidates file")
    p.add_argument("--system-id", default="enumerated")
    add_zero_flags(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("report", help="render figures and delimited stats for a dataset")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())

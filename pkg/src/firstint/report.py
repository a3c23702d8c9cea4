"""Render dataset and evaluation reports: delimited summaries plus figures.

Figures are written as PNG files next to the tab-separated and JSON outputs
so a run can be inspected without re-loading the records.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .dataset import DatasetRecord, record_is_hard  # noqa: E402
from .expr import expr_stats, node_count  # noqa: E402
from .harness import EvalReport, VERDICTS  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def dataset_summary(records: Sequence[DatasetRecord]) -> dict:
    op_counts: dict[int, int] = {}
    tiers: dict[str, int] = {}
    tags: dict[str, int] = {}
    has_t = nonlinear = hard = caveats = n_integrals = 0
    rhs_nodes: list[int] = []
    for record in records:
        tags[record.source_tag] = tags.get(record.source_tag, 0) + 1
        for tier in record.meta.get("verification_tiers", []):
            tiers[tier] = tiers.get(tier, 0) + 1
        caveats += int(bool(record.meta.get("domain_caveat")))
        for v in record.parsed_integrals():
            st = expr_stats(v)
            n_integrals += 1
            op_counts[st.operator_count] = op_counts.get(st.operator_count, 0) + 1
            has_t += int(st.has_t)
            nonlinear += int(st.has_nonlinear_op)
        for rhs in record.parsed_system().rhs:
            rhs_nodes.append(node_count(rhs))
        hard += int(record_is_hard(record))
    return {
        "records": len(records),
        "integrals": n_integrals,
        "source_tags": dict(sorted(tags.items())),
        "verification_tiers": dict(sorted(tiers.items())),
        "integral_op_counts": {str(k): v for k, v in sorted(op_counts.items())},
        "integral_has_t": has_t,
        "integral_nonlinear": nonlinear,
        "hard_records": hard,
        "domain_caveat_records": caveats,
        "mean_rhs_nodes": sum(rhs_nodes) / len(rhs_nodes) if rhs_nodes else 0.0,
    }


def render_dataset_report(records: Sequence[DatasetRecord], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    summary = dataset_summary(records)
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
    written.append(summary_path)

    tsv_path = out / "records.tsv"
    with tsv_path.open("w", encoding="utf-8") as handle:
        handle.write("id\tsource_tag\tn_integrals\tintegral_ops\thas_t\tnonlinear\thard\ttiers\n")
        for record in records:
            stats = [expr_stats(v) for v in record.parsed_integrals()]
            handle.write("\t".join([
                record.id,
                record.source_tag,
                str(len(record.integrals)),
                ",".join(str(s.operator_count) for s in stats),
                str(int(any(s.has_t for s in stats))),
                str(int(any(s.has_nonlinear_op for s in stats))),
                str(int(record_is_hard(record))),
                ",".join(record.meta.get("verification_tiers", [])),
            ]) + "\n")
    written.append(tsv_path)

    ops = summary["integral_op_counts"]
    if ops:
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.bar([int(k) for k in ops], list(ops.values()), color="#4878cf")
        ax.set_xlabel("operators per integral")
        ax.set_ylabel("integrals")
        ax.set_title("integral size distribution")
        written.append(_save(fig, out / "integral_ops_hist.png"))

    tiers = summary["verification_tiers"]
    if tiers:
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.bar(list(tiers), list(tiers.values()), color=["#4878cf", "#d65f5f"][:len(tiers)])
        ax.set_ylabel("integrals")
        ax.set_title("verification tier")
        written.append(_save(fig, out / "verification_tiers.png"))

    n = summary["integrals"] or 1
    fig, ax = plt.subplots(figsize=(5, 3))
    labels = ["has t", "nonlinear op", "hard record"]
    values = [summary["integral_has_t"] / n, summary["integral_nonlinear"] / n,
              summary["hard_records"] / (summary["records"] or 1)]
    ax.bar(labels, values, color="#6acc65")
    ax.set_ylim(0, 1)
    ax.set_ylabel("fraction")
    ax.set_title("difficulty predicates")
    written.append(_save(fig, out / "difficulty_predicates.png"))
    return written


def render_eval_report(report: EvalReport, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    json_path = out / "eval_report.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    written.append(json_path)

    txt_path = out / "eval_report.txt"
    txt_path.write_text(report.to_text_table() + "\n", encoding="utf-8")
    written.append(txt_path)

    fig, ax = plt.subplots(figsize=(5, 3))
    values = [report.counts.get(v, 0) for v in VERDICTS]
    ax.bar(VERDICTS, values, color=["#6acc65", "#d65f5f", "#956cb4", "#8c613c"])
    ax.set_ylabel("candidates")
    ax.set_title("candidate verdicts")
    written.append(_save(fig, out / "candidate_verdicts.png"))

    fig, ax = plt.subplots(figsize=(3.2, 3))
    ax.bar(["accuracy"], [report.accuracy], color="#4878cf")
    ax.set_ylim(0, 1)
    ax.set_title(f"solved systems: {report.verified_systems}/{report.total_systems}")
    written.append(_save(fig, out / "accuracy.png"))
    return written

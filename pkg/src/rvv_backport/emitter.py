"""Serialize translated documents and translation reports."""

from __future__ import annotations

import json

from .asm_model import ArchAttribute, AssemblyDocument, canonical_text
from .report import TranslationReport

ANNOTATION_PREFIX = "# rvv-backport:"


def _emit_line(line, annotate: bool) -> list[str]:
    if line.replacement is not None:
        indent = line.indentation
        label = line.replacement[0].label_prefix
        # continuation lines line up with the first instruction, past any label
        cont = indent + " " * (len(label) + 1) if label else indent
        out = [indent + canonical_text(line.replacement[0])]
        out.extend(cont + canonical_text(instr) for instr in line.replacement[1:])
        if annotate and len(out) > 1:
            out[0] = f"{out[0]}  {ANNOTATION_PREFIX} {line.rule_id}"
        return out
    text = line.raw_text
    if isinstance(line.content, ArchAttribute):
        text = text.replace("v1p0", "v0p7")
    if line.appended_comment:
        text = f"{text}  {line.appended_comment}"
    return [text]


def emit_assembly(doc: AssemblyDocument, annotate: bool = True) -> str:
    """Render ``doc`` to text.

    Untouched lines come back byte-for-byte; replaced lines are rendered
    canonically under the original indentation. Multi-line expansions get a
    ``# rvv-backport: <rule>`` comment on their first line unless
    ``annotate`` is false.
    """
    out: list[str] = []
    for line in doc.lines:
        out.extend(_emit_line(line, annotate))
    if not out:
        return ""
    newline = "\r\n" if doc.crlf else "\n"
    return newline.join(out) + newline


def report_dict(report: TranslationReport) -> dict:
    return {
        "source": report.source_name,
        "status": report.status,
        "rules": {k: report.rule_counts[k] for k in sorted(report.rule_counts)},
        "warnings": [d._asdict() for d in report.warnings],
        "errors": [d._asdict() for d in report.errors],
        "scratch_uses": [u._asdict() for u in report.scratch_uses],
    }


def emit_report(report: TranslationReport, format: str = "json") -> str:
    if format == "json":
        return json.dumps(report_dict(report), separators=(",", ":"))
    if format != "text":
        raise ValueError(f"unknown report format {format!r}")

    lines = [f"{report.source_name}: {report.status}"]
    if report.rule_counts:
        fired = " ".join(f"{k}={report.rule_counts[k]}" for k in sorted(report.rule_counts))
        lines.append(f"rules: {fired}")
    for title, items in (("errors", report.errors), ("warnings", report.warnings)):
        if items:
            lines.append(f"{title}:")
            lines.extend(f"{d.line}:{d.code}: {d.message}" for d in items)
    if report.scratch_uses:
        uses = " ".join(f"{u.line}:{u.register}" for u in report.scratch_uses)
        lines.append(f"scratch: {uses}")
    return "\n".join(lines) + "\n"

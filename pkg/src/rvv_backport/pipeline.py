from __future__ import annotations

from typing import Optional

from .emitter import emit_assembly
from .parser import MalformedInstruction, parse_document
from .report import Diagnostic, TranslationReport
from .rewriter import RewriteOptions, rewrite_document
from .vconfig import track


def translate_text(
    text: str,
    source_name: str = "<input>",
    opts: RewriteOptions = RewriteOptions(),
    annotate: bool = True,
) -> tuple[Optional[str], TranslationReport]:
    """Translate v1.0 assembly text; the output is None if strict parsing aborted.

    Failed translations still return text (rejected lines carry an error
    comment) so lenient callers can write it out.
    """
    try:
        doc = parse_document(text, source_name, strict=not opts.lenient)
    except MalformedInstruction as exc:
        report = TranslationReport(source_name)
        report.errors.append(Diagnostic(exc.line, exc.code.value, exc.reason))
        return None, report
    new_doc, report = rewrite_document(doc, track(doc), opts)
    return emit_assembly(new_doc, annotate=annotate), report

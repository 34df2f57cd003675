"""Translate RISC-V Vector v1.0 assembly to the v0.7.1 dialect, with a dual-dialect emulator for checking."""

from __future__ import annotations

from .asm_model import AssemblyDocument, Dialect, DiagnosticCode, Instruction, VConfig
from .differential import InitialState, Verdict, differential_check
from .emitter import emit_assembly, emit_report
from .emulator import MachineConfig, MachineState, load_program, run, step
from .parser import MalformedInstruction, parse_document, parse_instruction
from .pipeline import translate_text
from .report import TranslationReport
from .rewriter import RewriteOptions, rewrite_document, rewrite_instruction
from .vconfig import track

__all__ = [
    "AssemblyDocument", "Dialect", "DiagnosticCode", "Instruction", "VConfig",
    "InitialState", "Verdict", "differential_check", "emit_assembly", "emit_report",
    "MachineConfig", "MachineState", "load_program", "run", "step",
    "MalformedInstruction", "parse_document", "parse_instruction", "translate_text",
    "TranslationReport", "RewriteOptions", "rewrite_document", "rewrite_instruction", "track",
]

"""v1.0 -> v0.7.1 rule table.

Rule classes are tried in a fixed order: configuration, rename-only,
EEW-typed memory, pseudo-instruction expansion, whole-register operations,
rejections with no v0.7.1 equivalent, and finally pass-through.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, replace
from typing import Optional, Union

from .asm_model import (
    SCALAR_REG_INDEX,
    AssemblyDocument,
    ArchAttribute,
    CsrName,
    DiagnosticCode,
    Instruction,
    MemRef,
    Operand,
    ScalarReg,
    SourceLine,
    VtypeTokens,
)
from .report import Diagnostic, ScratchUse, TranslationReport
from .vconfig import VConfigState, StateAnnotation

RULE_IDS: tuple[str, ...] = (
    "strip-policy",
    "vsetvli-keep-vl",
    "vsetivli-expand",
    "rename-vcpop",
    "rename-vmandn",
    "rename-vmorn",
    "rename-vfredusum",
    "rename-vfwredusum",
    "rename-narrowing",
    "rename-vfncvt",
    "fault-only-first",
    "eew-unit-stride",
    "eew-strided",
    "eew-indexed",
    "eew-segment",
    "pseudo-vneg",
    "pseudo-vncvt",
    "pseudo-vmmv",
    "whole-register-move",
    "whole-register-load",
    "whole-register-store",
    "arch-attribute",
)

WARN_UNKNOWN_STATE = "unknown-state"
WARN_ARCH_VERSION = "arch-version"

ERROR_COMMENT = "# rvv-backport error:"


@dataclass(frozen=True)
class RewriteOptions:
    lenient: bool = False
    scratch_regs: tuple[str, str] = ("t5", "t6")
    expand_whole_register: bool = False
    assume_eew_matches_sew: bool = False

    def __post_init__(self) -> None:
        regs = tuple(self.scratch_regs)
        if len(regs) != 2:
            raise ValueError("exactly two scratch registers are required")
        for r in regs:
            if r.lower() not in SCALAR_REG_INDEX:
                raise ValueError(f"scratch register {r!r} is not a scalar register")
            if SCALAR_REG_INDEX[r.lower()] == 0:
                raise ValueError("x0/zero cannot be a scratch register")
        if SCALAR_REG_INDEX[regs[0].lower()] == SCALAR_REG_INDEX[regs[1].lower()]:
            raise ValueError("scratch registers must be distinct")
        object.__setattr__(self, "scratch_regs", regs)


@dataclass(frozen=True)
class PassThrough:
    pass


PASS_THROUGH = PassThrough()


@dataclass(frozen=True)
class Replace:
    instructions: tuple[Instruction, ...]
    rule_id: str
    scratch: tuple[str, ...] = ()
    warning: Optional[tuple[str, str]] = None


@dataclass(frozen=True)
class Reject:
    code: DiagnosticCode
    message: str


RewriteResult = Union[PassThrough, Replace, Reject]


# Rule tables -------------------------------------------------------------

_RENAMES = {
    "vcpop.m": ("vpopc.m", "rename-vcpop"),
    "vmandn.mm": ("vmandnot.mm", "rename-vmandn"),
    "vmorn.mm": ("vmornot.mm", "rename-vmorn"),
    "vfredusum.vs": ("vfredsum.vs", "rename-vfredusum"),
    "vfwredusum.vs": ("vfwredsum.vs", "rename-vfwredusum"),
}
_NARROWING_RE = re.compile(r"(vnsrl|vnsra|vnclip|vnclipu)\.w([vxi])$")
_VFNCVT_RE = re.compile(r"vfncvt\.(.+)\.w$")
_FAULT_FIRST_RE = re.compile(r"vle(8|16|32|64)ff\.v$|vlseg([2-8])e(8|16|32|64)ff\.v$")

# (pattern, rule_id, target builder); EEW is the named group "eew".
_EEW_MEMORY: list[tuple[re.Pattern, str, str]] = [
    (re.compile(r"vle(?P<eew>8|16|32|64)\.v$"), "eew-unit-stride", "vle.v"),
    (re.compile(r"vse(?P<eew>8|16|32|64)\.v$"), "eew-unit-stride", "vse.v"),
    (re.compile(r"vlse(?P<eew>8|16|32|64)\.v$"), "eew-strided", "vlse.v"),
    (re.compile(r"vsse(?P<eew>8|16|32|64)\.v$"), "eew-strided", "vsse.v"),
    (re.compile(r"vluxei(?P<eew>8|16|32|64)\.v$|vloxei(?P<eew2>8|16|32|64)\.v$"), "eew-indexed", "vlxe.v"),
    (re.compile(r"vsuxei(?P<eew>8|16|32|64)\.v$"), "eew-indexed", "vsuxe.v"),
    (re.compile(r"vsoxei(?P<eew>8|16|32|64)\.v$"), "eew-indexed", "vsxe.v"),
    (re.compile(r"vlseg(?P<nf>[2-8])e(?P<eew>8|16|32|64)\.v$"), "eew-segment", "vlseg{nf}e.v"),
    (re.compile(r"vsseg(?P<nf>[2-8])e(?P<eew>8|16|32|64)\.v$"), "eew-segment", "vsseg{nf}e.v"),
    (re.compile(r"vlsseg(?P<nf>[2-8])e(?P<eew>8|16|32|64)\.v$"), "eew-segment", "vlsseg{nf}e.v"),
    (re.compile(r"vssseg(?P<nf>[2-8])e(?P<eew>8|16|32|64)\.v$"), "eew-segment", "vssseg{nf}e.v"),
    (re.compile(r"vl[uo]xseg(?P<nf>[2-8])ei(?P<eew>8|16|32|64)\.v$"), "eew-segment", "vlxseg{nf}e.v"),
    (re.compile(r"vs[uo]xseg(?P<nf>[2-8])ei(?P<eew>8|16|32|64)\.v$"), "eew-segment", "vsxseg{nf}e.v"),
]

_WHOLE_MOVE_RE = re.compile(r"vmv(?P<n>\d)r\.v$")
_WHOLE_LOAD_RE = re.compile(r"vl(?P<n>\d)re(?:8|16|32|64)\.v$|vl(?P<n2>\d)r\.v$")
_WHOLE_STORE_RE = re.compile(r"vs(?P<n>\d)r\.v$")

_NO_EQUIVALENT_RE = re.compile(
    r"v[sz]ext\.vf[248]$|vrgatherei16\.vv$|vlm\.v$|vsm\.v$|vle1\.v$|vse1\.v$"
    r"|vfslide1(?:up|down)\.vf$|vf(?:w|n)?cvt\.rtz\..+$"
)


def v1_only_mnemonic(mnemonic: str) -> bool:
    """True if ``mnemonic`` is a v1.0-only name the rule table always rewrites or rejects."""
    m = mnemonic
    return bool(
        m == "vsetivli"
        or m in _RENAMES
        or _NARROWING_RE.match(m)
        or _VFNCVT_RE.match(m)
        or _FAULT_FIRST_RE.match(m)
        or any(p.match(m) for p, _, _ in _EEW_MEMORY)
        or m in ("vneg.v", "vncvt.x.x.w", "vmmv.m")
        or _WHOLE_MOVE_RE.match(m)
        or _WHOLE_LOAD_RE.match(m)
        or _WHOLE_STORE_RE.match(m)
        or _NO_EQUIVALENT_RE.match(m)
    )


# Rule classes ------------------------------------------------------------


def _like(instr: Instruction, mnemonic: str, operands: tuple[Operand, ...] = None) -> Instruction:
    return replace(instr, mnemonic=mnemonic, operands=instr.operands if operands is None else operands)


def _sequence(instr: Instruction, body: list[Instruction]) -> tuple[Instruction, ...]:
    """Move the original label to the first and the comment to the last instruction."""
    out = [replace(i, label_prefix=None, comment_suffix=None) for i in body]
    out[0] = replace(out[0], label_prefix=instr.label_prefix)
    out[-1] = replace(out[-1], comment_suffix=instr.comment_suffix)
    return tuple(out)


def _scalar_indices(instr: Instruction) -> set[int]:
    regs = set()
    for op in instr.operands:
        if isinstance(op, ScalarReg):
            regs.add(op.index)
        elif isinstance(op, MemRef):
            regs.add(op.base.index)
    return regs


def _configuration(instr: Instruction, opts: RewriteOptions) -> Optional[RewriteResult]:
    m = instr.mnemonic
    if m not in ("vsetvli", "vsetivli"):
        return None
    rd, src, vtype = instr.operands
    assert isinstance(vtype, VtypeTokens)
    if vtype.fractional:
        return Reject(
            DiagnosticCode.FRACTIONAL_LMUL,
            f"fractional LMUL {vtype.lmul_token} does not exist in v0.7.1",
        )
    stripped = vtype.stripped()
    scratch = ScalarReg(opts.scratch_regs[0])
    if m == "vsetivli":
        if not rd.is_zero:
            body = [
                Instruction("li", (rd, src)),
                Instruction("vsetvli", (rd, rd, stripped)),
            ]
            return Replace(_sequence(instr, body), "vsetivli-expand")
        body = [
            Instruction("li", (scratch, src)),
            Instruction("vsetvli", (rd, scratch, stripped)),
        ]
        return Replace(_sequence(instr, body), "vsetivli-expand", (scratch.name,))
    if rd.is_zero and src.is_zero:
        # v1.0 keeps vl here, while v0.7.1 would set vl to VLMAX.
        body = [
            Instruction("csrr", (scratch, CsrName("vl"))),
            Instruction("vsetvli", (rd, scratch, stripped)),
        ]
        return Replace(_sequence(instr, body), "vsetvli-keep-vl", (scratch.name,))
    if vtype.policy_tokens:
        return Replace((_like(instr, "vsetvli", (rd, src, stripped)),), "strip-policy")
    return PASS_THROUGH


def _eew_check(eew: int, state: VConfigState, opts: RewriteOptions) -> Union[Reject, tuple, None]:
    """Return a Reject, a warning tuple, or None when the mapping is safe."""
    if state is not None:
        if state.sew != eew:
            return Reject(
                DiagnosticCode.EEW_SEW_MISMATCH,
                f"element width {eew} differs from the active SEW {state.sew}",
            )
        return None
    if opts.assume_eew_matches_sew:
        return None
    if opts.lenient:
        return (WARN_UNKNOWN_STATE, f"SEW unknown here; assumed equal to element width {eew}")
    return Reject(
        DiagnosticCode.UNKNOWN_STATE_STRICT,
        f"SEW unknown here; cannot verify element width {eew} (use --assume-eew-matches-sew)",
    )


def _checked_replace(instr, target, rule_id, eew, state, opts) -> RewriteResult:
    check = _eew_check(eew, state, opts)
    if isinstance(check, Reject):
        return check
    return Replace((_like(instr, target),), rule_id, warning=check)


def _rename(instr: Instruction, state: VConfigState, opts: RewriteOptions) -> Optional[RewriteResult]:
    m = instr.mnemonic
    if m in _RENAMES:
        target, rule = _RENAMES[m]
        return Replace((_like(instr, target),), rule)
    hit = _NARROWING_RE.match(m)
    if hit:
        return Replace((_like(instr, f"{hit.group(1)}.v{hit.group(2)}"),), "rename-narrowing")
    hit = _VFNCVT_RE.match(m)
    if hit:
        kind = hit.group(1)
        if kind.startswith("rtz."):
            return Reject(DiagnosticCode.NO_V07_EQUIVALENT, f"{m} has no v0.7.1 equivalent")
        return Replace((_like(instr, f"vfncvt.{kind}.v"),), "rename-vfncvt")
    hit = _FAULT_FIRST_RE.match(m)
    if hit:
        if hit.group(1):
            return _checked_replace(instr, "vleff.v", "fault-only-first", int(hit.group(1)), state, opts)
        target = f"vlseg{hit.group(2)}eff.v"
        return _checked_replace(instr, target, "fault-only-first", int(hit.group(3)), state, opts)
    return None


def _eew_memory(instr: Instruction, state: VConfigState, opts: RewriteOptions) -> Optional[RewriteResult]:
    for pattern, rule_id, target in _EEW_MEMORY:
        hit = pattern.match(instr.mnemonic)
        if hit:
            groups = hit.groupdict()
            eew = int(groups.get("eew") or groups.get("eew2"))
            return _checked_replace(
                instr, target.format(nf=groups.get("nf")), rule_id, eew, state, opts
            )
    return None


def _pseudo(instr: Instruction) -> Optional[RewriteResult]:
    m, ops = instr.mnemonic, instr.operands
    zero = ScalarReg("x0")
    if m == "vneg.v":
        return Replace((_like(instr, "vrsub.vx", (ops[0], ops[1], zero)),), "pseudo-vneg")
    if m == "vncvt.x.x.w":
        return Replace((_like(instr, "vnsrl.vx", (ops[0], ops[1], zero)),), "pseudo-vncvt")
    if m == "vmmv.m":
        return Replace((_like(instr, "vmand.mm", (ops[0], ops[1], ops[1])),), "pseudo-vmmv")
    return None


def _whole_register(instr: Instruction, opts: RewriteOptions) -> Optional[RewriteResult]:
    m = instr.mnemonic
    for pattern, rule_id in (
        (_WHOLE_MOVE_RE, "whole-register-move"),
        (_WHOLE_LOAD_RE, "whole-register-load"),
        (_WHOLE_STORE_RE, "whole-register-store"),
    ):
        hit = pattern.match(m)
        if hit:
            break
    else:
        return None
    groups = hit.groupdict()
    count = int(groups.get("n") or groups.get("n2"))
    if count != 1:
        return Reject(
            DiagnosticCode.NO_V07_EQUIVALENT,
            f"{m} moves a group of {count} registers; no v0.7.1 equivalent",
        )
    if not opts.expand_whole_register:
        return Reject(
            DiagnosticCode.WHOLE_REGISTER_NEEDS_FLAG,
            f"{m} needs --expand-whole-register (clobbers {', '.join(opts.scratch_regs)})",
        )
    saved_vl, saved_vtype = (ScalarReg(r) for r in opts.scratch_regs)
    if _scalar_indices(instr) & {saved_vl.index, saved_vtype.index}:
        return Reject(
            DiagnosticCode.SCRATCH_CONFLICT,
            f"{m} uses a scratch register ({', '.join(opts.scratch_regs)}); pick others with --scratch",
        )
    dst, src = instr.operands
    if rule_id == "whole-register-move":
        body_op = Instruction("vmv.v.v", (dst, src))
    elif rule_id == "whole-register-load":
        body_op = Instruction("vle.v", (dst, src))
    else:
        body_op = Instruction("vse.v", (dst, src))
    zero = ScalarReg("x0")
    body = [
        Instruction("csrr", (saved_vl, CsrName("vl"))),
        Instruction("csrr", (saved_vtype, CsrName("vtype"))),
        Instruction("vsetvli", (zero, zero, VtypeTokens("e8", "m1"))),
        body_op,
        Instruction("vsetvl", (zero, saved_vl, saved_vtype)),
    ]
    return Replace(_sequence(instr, body), rule_id, (saved_vl.name, saved_vtype.name))


def _no_equivalent(instr: Instruction) -> Optional[RewriteResult]:
    m = instr.mnemonic
    if m.startswith("csr") and any(
        isinstance(op, CsrName) and op.canonical == "vcsr" for op in instr.operands
    ):
        return Reject(DiagnosticCode.VCSR_ACCESS, "the vcsr CSR does not exist in v0.7.1")
    if _NO_EQUIVALENT_RE.match(m):
        return Reject(DiagnosticCode.NO_V07_EQUIVALENT, f"{m} has no v0.7.1 equivalent")
    return None


def rewrite_instruction(
    instr: Instruction, state: VConfigState, opts: RewriteOptions = RewriteOptions()
) -> RewriteResult:
    """Translate one decoded instruction given the vtype known before it."""
    for attempt in (
        lambda: _configuration(instr, opts),
        lambda: _rename(instr, state, opts),
        lambda: _eew_memory(instr, state, opts),
        lambda: _pseudo(instr),
        lambda: _whole_register(instr, opts),
        lambda: _no_equivalent(instr),
    ):
        result = attempt()
        if result is not None:
            return result
    return PASS_THROUGH


# Documents ---------------------------------------------------------------

_ARCH_VERSION_RE = re.compile(r"v(\d+)p(\d+)")


def _arch_line(line: SourceLine, counts: Counter, warnings: list) -> None:
    assert isinstance(line.content, ArchAttribute)
    versions = {f"{a}p{b}" for a, b in _ARCH_VERSION_RE.findall(line.content.arch)}
    if "1p0" in versions:
        counts["arch-attribute"] += 1
    other = versions - {"1p0", "0p7"}
    if other:
        warnings.append(
            Diagnostic(
                line.index,
                WARN_ARCH_VERSION,
                f"vector extension version {', '.join(sorted(other))} left unchanged",
            )
        )


def _is_save_switch(prev: list[Optional[Instruction]], instr: Instruction, opts: RewriteOptions) -> bool:
    """True for the vtype switch inside an already expanded whole-register sequence.

    The expansion's own ``vsetvli x0, x0, e8, m1`` relies on v0.7.1 semantics
    and must survive a second translation pass unchanged.
    """
    if instr.mnemonic != "vsetvli" or instr.label_prefix or len(prev) < 2:
        return False
    rd, src, vtype = instr.operands
    if not (rd.is_zero and src.is_zero) or vtype.render() != "e8, m1":
        return False
    s0, s1 = (ScalarReg(r) for r in opts.scratch_regs)
    expected = (("csrr", (s0, CsrName("vl"))), ("csrr", (s1, CsrName("vtype"))))
    return all(
        p is not None and p.mnemonic == m and p.operands == ops and not p.mask
        for p, (m, ops) in zip(prev[-2:], expected)
    )


def rewrite_document(
    doc: AssemblyDocument,
    annotation: StateAnnotation,
    opts: RewriteOptions = RewriteOptions(),
) -> tuple[AssemblyDocument, TranslationReport]:
    counts: Counter = Counter()
    warnings: list[Diagnostic] = [Diagnostic(*d) for d in doc.diagnostics]
    errors: list[Diagnostic] = []
    scratch_uses: list[ScratchUse] = []
    out_lines = []
    prev: list[Optional[Instruction]] = []

    for line in doc.lines:
        if isinstance(line.content, ArchAttribute):
            _arch_line(line, counts, warnings)
        instr = line.instruction
        prev_instrs, prev = prev, (prev + [instr])[-2:]
        if instr is None:
            out_lines.append(line)
            continue
        if _is_save_switch(prev_instrs, instr, opts):
            out_lines.append(line)
            continue
        result = rewrite_instruction(instr, annotation.get(line.index), opts)
        if isinstance(result, Replace):
            counts[result.rule_id] += 1
            if result.warning:
                warnings.append(Diagnostic(line.index, *result.warning))
            scratch_uses.extend(ScratchUse(line.index, r) for r in result.scratch)
            out_lines.append(replace(line, replacement=result.instructions, rule_id=result.rule_id))
        elif isinstance(result, Reject):
            errors.append(Diagnostic(line.index, result.code.value, result.message))
            out_lines.append(
                replace(line, appended_comment=f"{ERROR_COMMENT} {result.code.value}")
            )
        else:
            out_lines.append(line)

    new_doc = replace(doc, lines=tuple(out_lines))
    report = TranslationReport(
        source_name=doc.source_name,
        rule_counts=dict(counts),
        warnings=sorted(warnings, key=lambda d: d.line),
        errors=errors,
        scratch_uses=scratch_uses,
    )
    return new_doc, report

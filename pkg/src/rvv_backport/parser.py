"""GAS-syntax assembly reader.

Only vector instructions, vector configuration, CSR accesses and ``li`` are
decoded strictly. A small scalar subset (the one the emulator executes and
the tracker needs for call detection) is decoded on a best-effort basis and
silently falls back to opaque text. Every other line stays opaque.
"""

from __future__ import annotations

import re
from typing import Optional, Union

from .asm_model import (
    FLOAT_REG_NAMES,
    INT64_MAX,
    INT64_MIN,
    LMUL_TOKENS,
    MASK_POLICY_TOKENS,
    SCALAR_REG_INDEX,
    SEW_TOKENS,
    TAIL_POLICY_TOKENS,
    ArchAttribute,
    AssemblyDocument,
    CsrName,
    DiagnosticCode,
    FloatReg,
    Immediate,
    Instruction,
    MemRef,
    Operand,
    ScalarReg,
    SourceLine,
    Symbol,
    VectorReg,
    VtypeTokens,
)

LABEL_RE = re.compile(r"\s*((?:[A-Za-z_.$][\w.$]*|\d+):)")
_INT_RE = re.compile(r"[+-]?(?:0[xX][0-9a-fA-F]+|0[bB][01]+|\d+)$")
_MEMREF_RE = re.compile(r"(.*)\(\s*([\w$]+)\s*\)$")
_ARCH_RE = re.compile(r'\.attribute\s+(?:arch|5)\s*,\s*"([^"]*)"\s*(?:#.*)?$')

CONFIG_MNEMONICS = frozenset({"vsetvli", "vsetivli", "vsetvl"})
CSR_MNEMONICS = frozenset(
    "csrr csrw csrs csrc csrrw csrrs csrrc csrwi csrsi csrci csrrwi csrrsi csrrci".split()
)
# Best-effort scalar decoding; failures degrade to opaque without a diagnostic.
SCALAR_MNEMONICS = frozenset(
    """mv neg nop add addi sub mul and andi or ori xor xori sll slli srl srli sra srai
    lb lbu lh lhu lw lwu ld sb sh sw sd
    beq bne blt bge bltu bgeu beqz bnez blez bgez bltz bgtz
    j jal jalr call tail ret""".split()
)

_VTYPE_WORDS = set(SEW_TOKENS) | set(LMUL_TOKENS) | set(TAIL_POLICY_TOKENS) | set(MASK_POLICY_TOKENS)


class MalformedInstruction(ValueError):
    """A recognized instruction whose operands do not validate."""

    code = DiagnosticCode.MALFORMED_INSTRUCTION

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class _Opaque(Exception):
    """Internal: the line must be kept as opaque text."""


def is_vector_mnemonic(mnemonic: str) -> bool:
    return mnemonic in CONFIG_MNEMONICS or (mnemonic.startswith("v") and "." in mnemonic)


def is_strict_mnemonic(mnemonic: str) -> bool:
    return is_vector_mnemonic(mnemonic) or mnemonic in CSR_MNEMONICS or mnemonic == "li"


def split_label(line_text: str) -> tuple[Optional[str], str]:
    """Split leading ``label:`` definitions off a line."""
    labels = []
    rest = line_text
    while True:
        m = LABEL_RE.match(rest)
        if not m:
            break
        labels.append(m.group(1))
        rest = rest[m.end():]
    return (" ".join(labels) if labels else None), rest


def line_labels(line_text: str) -> list[str]:
    """Label names defined at the start of a line (without the colon)."""
    if _is_comment(line_text):
        return []
    prefix, _ = split_label(line_text)
    return [lbl[:-1] for lbl in prefix.split()] if prefix else []


def leading_mnemonic(line_text: str) -> Optional[str]:
    """Lowercased first token after any labels, or None for blank/comment lines."""
    if _is_comment(line_text):
        return None
    _, rest = split_label(line_text)
    tokens = rest.split("#", 1)[0].split()
    return tokens[0].lower() if tokens else None


def _is_comment(line_text: str) -> bool:
    s = line_text.lstrip()
    return s.startswith("#") or s.startswith("//")


def _parse_int(text: str) -> Optional[int]:
    if not _INT_RE.match(text):
        return None
    t = text.lower()
    sign = -1 if t.startswith("-") else 1
    t = t.lstrip("+-")
    if t.startswith(("0x", "0b")):
        value = int(t, 0)
    else:
        value = int(t, 10)
    return sign * value


def _split_operands(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur).strip())
    if depth != 0:
        raise ValueError("unbalanced parentheses")
    return parts


def _classify(token: str, *, csr_slot: bool) -> Operand:
    low = token.lower()
    if csr_slot:
        if not re.match(r"[A-Za-z_][\w.]*$|(?:0[xX][0-9a-fA-F]+|\d+)$", token):
            raise ValueError(f"invalid CSR operand {token!r}")
        return CsrName(token)
    value = _parse_int(token)
    if value is not None:
        if not INT64_MIN <= value <= INT64_MAX:
            raise _Opaque()
        return Immediate(value)
    if re.match(r"v\d+$", low):
        return VectorReg(token)
    if low in SCALAR_REG_INDEX:
        return ScalarReg(token)
    if low in FLOAT_REG_NAMES:
        return FloatReg(token)
    m = _MEMREF_RE.match(token)
    if m:
        disp_text, base = m.group(1).strip(), m.group(2)
        if base.lower() not in SCALAR_REG_INDEX:
            # assembler expression such as %lo(sym)
            return Symbol(token)
        disp = 0 if disp_text == "" else _parse_int(disp_text)
        if disp is None:
            raise ValueError(f"non-numeric displacement {disp_text!r}")
        if not INT64_MIN <= disp <= INT64_MAX:
            raise _Opaque()
        return MemRef(ScalarReg(base), disp)
    if not token:
        raise ValueError("empty operand")
    return Symbol(token)


def _csr_slot(mnemonic: str) -> int:
    if mnemonic in ("csrw", "csrs", "csrc", "csrwi", "csrsi", "csrci"):
        return 0
    return 1


def _decode_operands(mnemonic: str, tokens: list[str]) -> tuple[tuple[Operand, ...], bool]:
    mask = False
    if tokens and tokens[-1].lower() == "v0.t":
        mask = True
        tokens = tokens[:-1]
    if any(t.lower() == "v0.t" for t in tokens):
        raise ValueError("mask operand v0.t must be last")

    vtype = None
    if mnemonic in ("vsetvli", "vsetivli"):
        i = len(tokens)
        while i > 0 and tokens[i - 1].lower() in _VTYPE_WORDS:
            i -= 1
        words = [t.lower() for t in tokens[i:]]
        tokens = tokens[:i]
        if not words or words[0] not in SEW_TOKENS:
            raise ValueError("missing SEW token in vtype")
        rest = words[1:]
        lmul = rest.pop(0) if rest and rest[0] in LMUL_TOKENS else None
        vtype = VtypeTokens(words[0], lmul, tuple(rest))

    csr_slot = _csr_slot(mnemonic) if mnemonic in CSR_MNEMONICS else -1
    operands: list[Operand] = [
        _classify(tok, csr_slot=(i == csr_slot)) for i, tok in enumerate(tokens)
    ]
    if vtype is not None:
        operands.append(vtype)
    return tuple(operands), mask


# Operand shapes for the instructions the rewriter transforms.
# V vector reg, X scalar reg, M memory ref, I immediate, T vtype,
# C csr, L immediate-or-symbol.
_SHAPES: list[tuple[re.Pattern, str, bool]] = [
    (re.compile(r"vsetvli$"), "XXT", False),
    (re.compile(r"vsetivli$"), "XIT", False),
    (re.compile(r"vsetvl$"), "XXX", False),
    (re.compile(r"v[ls]\d+r(?:e\d+)?\.v$"), "VM", False),
    (re.compile(r"vmv\d+r\.v$"), "VV", False),
    (re.compile(r"v(?:l|s)(?:e\d*|seg\d+e\d*)(?:ff)?\.v$"), "VM", True),
    (re.compile(r"v(?:l|s)(?:se\d*|sseg\d+e\d*)\.v$"), "VMX", True),
    (re.compile(r"v(?:l|s)(?:[uo]?xei\d+|u?xe|[uo]?xseg\d+ei?\d*)\.v$"), "VMV", True),
    (re.compile(r"vneg\.v$|vmmv\.m$|vncvt\.x\.x\.w$|v[sz]ext\.vf[248]$"), "VV", True),
    (re.compile(r"vcpop\.m$|vpopc\.m$"), "XV", True),
    (re.compile(r"csrr$"), "XC", False),
    (re.compile(r"csr[wsc]$"), "CX", False),
    (re.compile(r"csr[wsc]i$"), "CI", False),
    (re.compile(r"csrr[wsc]$"), "XCX", False),
    (re.compile(r"csrr[wsc]i$"), "XCI", False),
    (re.compile(r"li$"), "XL", False),
]

# Generic arithmetic forms: vd, vs2, vs1/rs1/imm (plus v0 for the carry/merge forms).
_ARITH_RE = re.compile(r"v[a-z0-9]+\.(vv|vx|vi|vf|wv|wx|wi|wf|vs|mm|vvm|vxm|vim|vfm)$")

_KIND = {
    "V": (VectorReg,),
    "X": (ScalarReg,),
    "M": (MemRef,),
    "I": (Immediate,),
    "T": (VtypeTokens,),
    "C": (CsrName,),
    "L": (Immediate, Symbol),
}


def _check_shape(mnemonic: str, operands: tuple[Operand, ...], mask: bool) -> None:
    for pattern, shape, mask_ok in _SHAPES:
        if pattern.match(mnemonic):
            kinds = [type(op) for op in operands]
            ok = len(kinds) == len(shape) and all(
                k in _KIND[s] for k, s in zip(kinds, shape)
            )
            if not ok:
                got = ", ".join(k.__name__ for k in kinds) or "no operands"
                raise ValueError(f"{mnemonic} expects operands {shape}, got {got}")
            if mask and not mask_ok:
                raise ValueError(f"{mnemonic} cannot be masked")
            if mnemonic == "vsetivli" and not 0 <= operands[1].value <= 31:
                raise ValueError("vsetivli AVL must be in 0..31")
            return
    if is_vector_mnemonic(mnemonic):
        m = _ARITH_RE.match(mnemonic)
        if m:
            carry = len(m.group(1)) == 3
            want = 4 if carry else 3
            if len(operands) != want or not isinstance(operands[0], VectorReg):
                raise ValueError(f"{mnemonic} expects {want} operands with a vector destination")
            if carry and operands[-1] != VectorReg("v0"):
                raise ValueError(f"{mnemonic} takes v0 as its last operand")
        for op in operands:
            if isinstance(op, (Symbol, CsrName)):
                raise ValueError(f"unrecognized operand {op.render()!r}")


def parse_instruction(
    line_text: str, line: int = 0
) -> Union[Instruction, ArchAttribute, None]:
    """Decode one line; ``None`` means the line is opaque.

    Raises MalformedInstruction for recognized mnemonics with invalid operands.
    """
    if _is_comment(line_text):
        return None
    label, rest = split_label(line_text)
    body = rest.strip()
    if not body:
        return None
    if body.startswith("."):
        m = _ARCH_RE.match(body)
        return ArchAttribute(m.group(1)) if m else None

    comment = None
    if "#" in body:
        body, comment = body.split("#", 1)
        comment = "#" + comment.rstrip()
        body = body.rstrip()
    head, *tail = body.split(None, 1)
    mnemonic = head.lower()
    operand_text = tail[0].strip() if tail else ""

    strict = is_strict_mnemonic(mnemonic)
    if not strict and mnemonic not in SCALAR_MNEMONICS:
        return None
    try:
        tokens = _split_operands(operand_text) if operand_text else []
        operands, mask = _decode_operands(mnemonic, tokens)
        if strict:
            _check_shape(mnemonic, operands, mask)
        return Instruction(mnemonic, operands, mask, label, comment)
    except _Opaque:
        return None
    except ValueError as exc:
        if strict:
            raise MalformedInstruction(line, str(exc)) from None
        return None


def parse_document(text: str, source_name: str = "<input>", strict: bool = True) -> AssemblyDocument:
    """Split ``text`` into classified source lines.

    A single trailing newline is absorbed; CRLF line endings are normalized
    and remembered so emission can restore them. In lenient mode a malformed
    vector line becomes opaque and a ``malformed`` diagnostic is recorded.
    """
    crlf = "\r\n" in text
    if crlf:
        text = text.replace("\r\n", "\n")
    if text.endswith("\n"):
        text = text[:-1]
        raw_lines = text.split("\n")
    else:
        raw_lines = text.split("\n") if text else []

    lines = []
    diagnostics = []
    for idx, raw in enumerate(raw_lines, start=1):
        try:
            content = parse_instruction(raw, idx)
        except MalformedInstruction as exc:
            if strict:
                raise
            diagnostics.append((idx, exc.code.value, exc.reason))
            content = None
        lines.append(SourceLine(idx, raw, content))
    return AssemblyDocument(tuple(lines), source_name, crlf, tuple(diagnostics))

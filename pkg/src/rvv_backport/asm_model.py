"""Data model shared by the parser, tracker, rewriter, emitter and emulator.

Everything here is an immutable value type. Instructions keep both their
decoded operands and enough surrounding text (label, trailing comment) to
be re-rendered; untouched source lines are always emitted from their raw
text instead.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

SCALAR_ABI_NAMES = (
    "zero ra sp gp tp t0 t1 t2 s0 s1 a0 a1 a2 a3 a4 a5 a6 a7 "
    "s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 t3 t4 t5 t6"
).split()

SCALAR_REG_INDEX: dict[str, int] = {name: i for i, name in enumerate(SCALAR_ABI_NAMES)}
SCALAR_REG_INDEX.update({f"x{i}": i for i in range(32)})
SCALAR_REG_INDEX["fp"] = 8

FLOAT_REG_NAMES = frozenset(
    [f"f{i}" for i in range(32)]
    + [f"ft{i}" for i in range(12)]
    + [f"fs{i}" for i in range(12)]
    + [f"fa{i}" for i in range(8)]
)

SEW_TOKENS = {"e8": 8, "e16": 16, "e32": 32, "e64": 64}
LMUL_TOKENS = {
    "m1": (1, False),
    "m2": (2, False),
    "m4": (4, False),
    "m8": (8, False),
    "mf2": (2, True),
    "mf4": (4, True),
    "mf8": (8, True),
}
TAIL_POLICY_TOKENS = ("ta", "tu")
MASK_POLICY_TOKENS = ("ma", "mu")

# Vector CSRs by name and by numeric address.
VECTOR_CSRS = {
    "vstart": 0x008,
    "vxsat": 0x009,
    "vxrm": 0x00A,
    "vcsr": 0x00F,
    "vl": 0xC20,
    "vtype": 0xC21,
    "vlenb": 0xC22,
}
_CSR_BY_ADDRESS = {addr: name for name, addr in VECTOR_CSRS.items()}

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1


class Dialect(enum.Enum):
    V0P7 = "v0p7"
    V1P0 = "v1p0"


class DiagnosticCode(str, enum.Enum):
    FRACTIONAL_LMUL = "fractional-lmul"
    EEW_SEW_MISMATCH = "eew-sew-mismatch"
    UNKNOWN_STATE_STRICT = "unknown-state"
    NO_V07_EQUIVALENT = "no-v07-equivalent"
    WHOLE_REGISTER_NEEDS_FLAG = "whole-register-needs-flag"
    VCSR_ACCESS = "vcsr-access"
    MALFORMED_INSTRUCTION = "malformed"
    SCRATCH_CONFLICT = "scratch-conflict"


@dataclass(frozen=True)
class VConfig:
    """Element width and register grouping selected by a vsetvli.

    ``lmul`` is the magnitude of the multiplier; ``fractional`` turns it into
    a divisor (``mf2`` is ``VConfig(sew, 2, True)``). Fractional grouping has
    no v0.7.1 encoding.
    """

    sew: int
    lmul: int = 1
    fractional: bool = False

    def __post_init__(self) -> None:
        if self.sew not in (8, 16, 32, 64):
            raise ValueError(f"invalid SEW {self.sew}")
        if self.lmul not in (1, 2, 4, 8) or (self.fractional and self.lmul == 1):
            raise ValueError(f"invalid LMUL {self.lmul} (fractional={self.fractional})")

    def supported_in(self, dialect: Dialect) -> bool:
        return not (self.fractional and dialect is Dialect.V0P7)

    def vlmax(self, vlen: int) -> int:
        if self.fractional:
            return vlen // (self.sew * self.lmul)
        return vlen // self.sew * self.lmul

    @property
    def lmul_token(self) -> str:
        return f"mf{self.lmul}" if self.fractional else f"m{self.lmul}"


# Operands ----------------------------------------------------------------


@dataclass(frozen=True)
class ScalarReg:
    name: str

    def __post_init__(self) -> None:
        if self.name.lower() not in SCALAR_REG_INDEX:
            raise ValueError(f"not a scalar register: {self.name!r}")

    @property
    def index(self) -> int:
        return SCALAR_REG_INDEX[self.name.lower()]

    @property
    def is_zero(self) -> bool:
        return self.index == 0

    def render(self) -> str:
        return self.name


@dataclass(frozen=True)
class VectorReg:
    name: str

    def __post_init__(self) -> None:
        n = self.name.lower()
        if not (n.startswith("v") and n[1:].isdigit() and 0 <= int(n[1:]) <= 31):
            raise ValueError(f"not a vector register: {self.name!r}")
        if len(n) > 2 and n[1] == "0":
            raise ValueError(f"not a vector register: {self.name!r}")

    @property
    def index(self) -> int:
        return int(self.name[1:])

    def render(self) -> str:
        return self.name


@dataclass(frozen=True)
class FloatReg:
    name: str

    def __post_init__(self) -> None:
        if self.name.lower() not in FLOAT_REG_NAMES:
            raise ValueError(f"not a float register: {self.name!r}")

    def render(self) -> str:
        return self.name


@dataclass(frozen=True)
class CsrName:
    name: str

    @property
    def canonical(self) -> str:
        """Lowercase CSR name, with known numeric vector CSR addresses resolved."""
        text = self.name.lower()
        try:
            addr = int(text, 0)
        except ValueError:
            return text
        return _CSR_BY_ADDRESS.get(addr, text)

    def render(self) -> str:
        return self.name


@dataclass(frozen=True)
class Immediate:
    value: int

    def __post_init__(self) -> None:
        if not INT64_MIN <= self.value <= INT64_MAX:
            raise ValueError(f"immediate out of signed 64-bit range: {self.value}")

    def render(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class MemRef:
    base: ScalarReg
    displacement: int = 0

    def render(self) -> str:
        if self.displacement == 0:
            return f"({self.base.render()})"
        return f"{self.displacement}({self.base.render()})"


@dataclass(frozen=True)
class VtypeTokens:
    sew_token: str
    lmul_token: Optional[str] = None
    policy_tokens: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.sew_token not in SEW_TOKENS:
            raise ValueError(f"invalid SEW token {self.sew_token!r}")
        if self.lmul_token is not None and self.lmul_token not in LMUL_TOKENS:
            raise ValueError(f"invalid LMUL token {self.lmul_token!r}")
        tails = [p for p in self.policy_tokens if p in TAIL_POLICY_TOKENS]
        masks = [p for p in self.policy_tokens if p in MASK_POLICY_TOKENS]
        if len(tails) + len(masks) != len(self.policy_tokens) or len(tails) > 1 or len(masks) > 1:
            raise ValueError(f"invalid policy tokens {self.policy_tokens!r}")

    @property
    def config(self) -> VConfig:
        lmul, fractional = LMUL_TOKENS[self.lmul_token or "m1"]
        return VConfig(SEW_TOKENS[self.sew_token], lmul, fractional)

    @property
    def fractional(self) -> bool:
        return self.config.fractional

    def stripped(self) -> VtypeTokens:
        return VtypeTokens(self.sew_token, self.lmul_token)

    def render(self) -> str:
        tokens = [self.sew_token]
        if self.lmul_token is not None:
            tokens.append(self.lmul_token)
        tokens.extend(self.policy_tokens)
        return ", ".join(tokens)


@dataclass(frozen=True)
class Symbol:
    text: str

    def render(self) -> str:
        return self.text


Operand = Union[ScalarReg, VectorReg, FloatReg, CsrName, Immediate, MemRef, VtypeTokens, Symbol]


# Instructions and lines ----------------------------------------------------


@dataclass(frozen=True)
class Instruction:
    mnemonic: str
    operands: tuple[Operand, ...] = ()
    mask: bool = False
    label_prefix: Optional[str] = None
    comment_suffix: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.mnemonic or any(c.isspace() for c in self.mnemonic):
            raise ValueError(f"invalid mnemonic {self.mnemonic!r}")
        if self.mnemonic != self.mnemonic.lower():
            raise ValueError(f"mnemonic must be lowercase: {self.mnemonic!r}")

    def body_text(self) -> str:
        parts = [op.render() for op in self.operands]
        if self.mask:
            parts.append("v0.t")
        if not parts:
            return self.mnemonic
        return f"{self.mnemonic} {', '.join(parts)}"


@dataclass(frozen=True)
class ArchAttribute:
    """A decoded ``.attribute arch, "<isa string>"`` directive."""

    arch: str


def canonical_text(instr: Instruction) -> str:
    """Render ``instr`` deterministically, keeping its label and comment."""
    text = instr.body_text()
    if instr.label_prefix:
        text = f"{instr.label_prefix} {text}"
    if instr.comment_suffix:
        text = f"{text} {instr.comment_suffix}"
    return text


@dataclass(frozen=True)
class SourceLine:
    """One physical line of assembly.

    ``content`` is ``None`` for opaque lines. A rewritten line carries its
    ``replacement`` instructions; ``appended_comment`` marks a line that was
    kept verbatim but flagged with a diagnostic.
    """

    index: int
    raw_text: str
    content: Union[Instruction, ArchAttribute, None] = None
    replacement: Optional[tuple[Instruction, ...]] = None
    rule_id: Optional[str] = None
    appended_comment: Optional[str] = None

    @property
    def is_decoded(self) -> bool:
        return self.content is not None

    @property
    def instruction(self) -> Optional[Instruction]:
        return self.content if isinstance(self.content, Instruction) else None

    @property
    def indentation(self) -> str:
        stripped = self.raw_text.lstrip(" \t")
        return self.raw_text[: len(self.raw_text) - len(stripped)]


@dataclass(frozen=True)
class AssemblyDocument:
    lines: tuple[SourceLine, ...]
    source_name: str = "<input>"
    crlf: bool = False
    # Lenient-mode parse diagnostics: (line, code, message).
    diagnostics: tuple[tuple[int, str, str], ...] = field(default=())

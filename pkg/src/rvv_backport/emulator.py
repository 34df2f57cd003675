"""Interpreter for the RVV subset the translator handles, in either dialect.

The same program text can be executed with v1.0 semantics (EEW taken from
memory mnemonics, one mask bit per element) or v0.7.1 semantics (SEW-sized
memory elements, MLEN = SEW/LMUL mask layout). Tail and masked-off elements
are always left undisturbed, which is a legal choice for the v1.0 agnostic
policies and the only behaviour v0.7.1 allows.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

from .asm_model import (
    ArchAttribute,
    AssemblyDocument,
    CsrName,
    Dialect,
    Immediate,
    Instruction,
    MemRef,
    ScalarReg,
    Symbol,
    VConfig,
    VectorReg,
    VtypeTokens,
)
from .parser import line_labels, leading_mnemonic

MASK64 = (1 << 64) - 1
BOTH = frozenset({Dialect.V0P7, Dialect.V1P0})
V1 = frozenset({Dialect.V1P0})
V07 = frozenset({Dialect.V0P7})

# Directives that do not emit data are tolerated in loaded programs.
_IGNORED_DIRECTIVES = re.compile(
    r"\.(text|globl|global|local|weak|hidden|p2align|balign|align|type|size|section|"
    r"option|attribute|file|ident|cfi_\w+|addrsig\w*)\b"
)


class EmulatorError(Exception):
    pass


class Trap(EmulatorError):
    pass


class StepLimitExceeded(EmulatorError):
    pass


class UnsupportedInstruction(EmulatorError):
    def __init__(self, line: int, mnemonic: str, detail: str = ""):
        super().__init__(f"line {line}: unsupported instruction {mnemonic!r}{detail}")
        self.line = line
        self.mnemonic = mnemonic


class UnresolvedLabel(EmulatorError):
    def __init__(self, name: str):
        super().__init__(f"unresolved label {name!r}")
        self.name = name


@dataclass(frozen=True)
class MachineConfig:
    vlen: int = 128
    elen: int = 64
    mem_size: int = 1 << 20
    dialect: Dialect = Dialect.V1P0

    def __post_init__(self) -> None:
        if self.vlen not in (64, 128, 256, 512):
            raise ValueError(f"unsupported VLEN {self.vlen}")
        if self.vlen < self.elen:
            raise ValueError("VLEN must be at least ELEN")
        if self.mem_size <= 0:
            raise ValueError("memory size must be positive")

    @property
    def vlenb(self) -> int:
        return self.vlen // 8


@dataclass(frozen=True)
class VType:
    config: VConfig
    ta: bool = False
    ma: bool = False

    @property
    def sew(self) -> int:
        return self.config.sew


@dataclass
class MachineState:
    config: MachineConfig
    x: list[int] = field(default_factory=lambda: [0] * 32)
    vregs: bytearray = None
    vl: int = 0
    vtype: Optional[VType] = None  # None: vill set
    memory: bytearray = None
    pc: int = 0

    def __post_init__(self) -> None:
        if self.vregs is None:
            self.vregs = bytearray(32 * self.config.vlenb)
        if self.memory is None:
            self.memory = bytearray(self.config.mem_size)

    @classmethod
    def initial(cls, config: MachineConfig, regs: dict[int, int] = None, memory: bytes = None) -> MachineState:
        st = cls(config)
        for idx, value in (regs or {}).items():
            st.set_x(idx, value)
        if memory is not None:
            st.memory[: len(memory)] = memory
        return st

    def set_x(self, idx: int, value: int) -> None:
        if idx:
            self.x[idx] = value & MASK64

    @property
    def vlmax(self) -> int:
        return self.vtype.config.vlmax(self.config.vlen) if self.vtype else 0


@dataclass
class Op:
    instr: Instruction
    line: int
    handler: Callable[[MachineState, "Op"], Optional[int]]
    params: dict
    target: Optional[int] = None


@dataclass
class Program:
    ops: list[Op]
    labels: dict[str, int]
    dialect: Dialect


# Value helpers ---------------------------------------------------------------


def _sext(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    return value - (1 << bits) if value >> (bits - 1) else value


def _vtype(st: MachineState) -> VType:
    if st.vtype is None:
        raise Trap("vector instruction with illegal vtype")
    return st.vtype


def _dialect(st: MachineState) -> Dialect:
    return st.config.dialect


def _check_group(st: MachineState, reg: int, nregs: int) -> None:
    if reg % nregs or reg + nregs > 32:
        raise Trap(f"register group v{reg} with {nregs} registers is misaligned")


def _group_regs(cfg: VConfig) -> int:
    return 1 if cfg.fractional else cfg.lmul


def _get(st: MachineState, reg: int, i: int, width: int) -> int:
    nbytes = width // 8
    off = reg * st.config.vlenb + i * nbytes
    return int.from_bytes(st.vregs[off : off + nbytes], "little")


def _put(st: MachineState, reg: int, i: int, width: int, value: int) -> None:
    nbytes = width // 8
    off = reg * st.config.vlenb + i * nbytes
    st.vregs[off : off + nbytes] = (value & ((1 << width) - 1)).to_bytes(nbytes, "little")


def _mlen(st: MachineState) -> int:
    """Bits per mask element: 1 in v1.0, SEW/LMUL in v0.7.1."""
    if _dialect(st) is Dialect.V1P0:
        return 1
    cfg = _vtype(st).config
    return cfg.sew // cfg.lmul


def _mask_bit(st: MachineState, reg: int, i: int) -> int:
    bit = i * _mlen(st)
    byte = st.vregs[reg * st.config.vlenb + bit // 8]
    return (byte >> (bit % 8)) & 1


def _set_mask_bit(st: MachineState, reg: int, i: int, value: int) -> None:
    mlen = _mlen(st)
    base = reg * st.config.vlenb * 8
    for b in range(i * mlen, (i + 1) * mlen):
        pos = base + b
        bit = value if b == i * mlen else 0
        if bit:
            st.vregs[pos // 8] |= 1 << (pos % 8)
        else:
            st.vregs[pos // 8] &= ~(1 << (pos % 8)) & 0xFF


def _active(st: MachineState, op: Op, i: int) -> bool:
    return not op.instr.mask or bool(_mask_bit(st, 0, i))


def _xreg(st: MachineState, operand) -> int:
    return st.x[operand.index]


def _mem_check(st: MachineState, addr: int, nbytes: int) -> None:
    if addr + nbytes > st.config.mem_size:
        raise Trap(f"memory access at {addr:#x} (+{nbytes}) out of bounds")
    if addr % nbytes:
        raise Trap(f"misaligned {nbytes}-byte access at {addr:#x}")


def _load(st: MachineState, addr: int, nbytes: int) -> int:
    addr &= MASK64
    _mem_check(st, addr, nbytes)
    return int.from_bytes(st.memory[addr : addr + nbytes], "little")


def _store(st: MachineState, addr: int, nbytes: int, value: int) -> None:
    addr &= MASK64
    _mem_check(st, addr, nbytes)
    st.memory[addr : addr + nbytes] = (value & ((1 << (8 * nbytes)) - 1)).to_bytes(nbytes, "little")


# vtype encoding ---------------------------------------------------------------

_V1_LMUL_CODES = {(1, False): 0, (2, False): 1, (4, False): 2, (8, False): 3,
                  (8, True): 5, (4, True): 6, (2, True): 7}
_V1_LMUL_DECODE = {v: k for k, v in _V1_LMUL_CODES.items()}
VILL_BIT = 1 << 63


def encode_vtype(vtype: Optional[VType], dialect: Dialect) -> int:
    if vtype is None:
        return VILL_BIT
    cfg = vtype.config
    sew_code = {8: 0, 16: 1, 32: 2, 64: 3}[cfg.sew]
    if dialect is Dialect.V1P0:
        return (_V1_LMUL_CODES[(cfg.lmul, cfg.fractional)] | sew_code << 3
                | int(vtype.ta) << 6 | int(vtype.ma) << 7)
    return {1: 0, 2: 1, 4: 2, 8: 3}[cfg.lmul] | sew_code << 2


def decode_vtype(value: int, dialect: Dialect) -> Optional[VType]:
    if dialect is Dialect.V1P0:
        if value >> 8 or (value & 7) == 4 or (value >> 3) & 7 > 3:
            return None
        lmul, frac = _V1_LMUL_DECODE[value & 7]
        return VType(VConfig(8 << ((value >> 3) & 7), lmul, frac), bool(value >> 6 & 1), bool(value >> 7 & 1))
    if value >> 5 or (value >> 2) & 7 > 3:
        return None
    return VType(VConfig(8 << ((value >> 2) & 7), 1 << (value & 3)))


# Configuration ---------------------------------------------------------------


def _legal(vtype: VType, st: MachineState) -> bool:
    cfg = vtype.config
    if not cfg.supported_in(_dialect(st)):
        return False
    if cfg.fractional and cfg.sew * cfg.lmul > st.config.elen:
        return False
    return cfg.sew <= st.config.elen and cfg.vlmax(st.config.vlen) > 0


def _configure(st: MachineState, rd: ScalarReg, avl: Optional[int], vtype: Optional[VType]) -> None:
    """Apply a vset{i}vl{i}; ``avl`` None means rs1 was x0."""
    if vtype is None or not _legal(vtype, st):
        st.vtype, st.vl = None, 0
        st.set_x(rd.index, 0)
        return
    vlmax = vtype.config.vlmax(st.config.vlen)
    if avl is not None:
        vl = min(avl, vlmax)
    elif _dialect(st) is Dialect.V0P7 or not rd.is_zero:
        vl = vlmax
    else:
        vl = st.vl
        if vl > vlmax:
            st.vtype, st.vl = None, 0
            return
    st.vtype, st.vl = vtype, vl
    st.set_x(rd.index, vl)


def _vtype_from_tokens(tokens: VtypeTokens) -> VType:
    return VType(tokens.config, "ta" in tokens.policy_tokens, "ma" in tokens.policy_tokens)


def _h_vsetvli(st, op):
    rd, rs1, tokens = op.instr.operands
    avl = None if rs1.is_zero else _xreg(st, rs1)
    _configure(st, rd, avl, _vtype_from_tokens(tokens))


def _h_vsetivli(st, op):
    rd, imm, tokens = op.instr.operands
    _configure(st, rd, imm.value, _vtype_from_tokens(tokens))


def _h_vsetvl(st, op):
    rd, rs1, rs2 = op.instr.operands
    avl = None if rs1.is_zero else _xreg(st, rs1)
    _configure(st, rd, avl, decode_vtype(_xreg(st, rs2), _dialect(st)))


def _h_csrr(st, op):
    rd, csr = op.instr.operands
    name = csr.canonical
    if name == "vl":
        value = st.vl
    elif name == "vtype":
        value = encode_vtype(st.vtype, _dialect(st))
    else:  # vlenb
        value = st.config.vlenb
    st.set_x(rd.index, value)


# Integer arithmetic ----------------------------------------------------------

_ALU = {
    "add": lambda a, b, w: a + b,
    "sub": lambda a, b, w: a - b,
    "rsub": lambda a, b, w: b - a,
    "mul": lambda a, b, w: a * b,
    "and": lambda a, b, w: a & b,
    "or": lambda a, b, w: a | b,
    "xor": lambda a, b, w: a ^ b,
    "sll": lambda a, b, w: a << (b & (w - 1)),
    "srl": lambda a, b, w: a >> (b & (w - 1)),
    "sra": lambda a, b, w: _sext(a, w) >> (b & (w - 1)),
    "min": lambda a, b, w: min(_sext(a, w), _sext(b, w)),
    "max": lambda a, b, w: max(_sext(a, w), _sext(b, w)),
    "minu": lambda a, b, w: min(a, b),
    "maxu": lambda a, b, w: max(a, b),
}
_ALU_FORMS = {
    "add": "vv vx vi", "sub": "vv vx", "rsub": "vx vi", "mul": "vv vx",
    "and": "vv vx vi", "or": "vv vx vi", "xor": "vv vx vi",
    "sll": "vv vx vi", "srl": "vv vx vi", "sra": "vv vx vi",
    "min": "vv vx", "max": "vv vx", "minu": "vv vx", "maxu": "vv vx",
}
_CMP = {
    "eq": lambda a, b, w: a == b,
    "ne": lambda a, b, w: a != b,
    "lt": lambda a, b, w: _sext(a, w) < _sext(b, w),
    "ltu": lambda a, b, w: a < b,
    "le": lambda a, b, w: _sext(a, w) <= _sext(b, w),
    "leu": lambda a, b, w: a <= b,
    "gt": lambda a, b, w: _sext(a, w) > _sext(b, w),
    "gtu": lambda a, b, w: a > b,
}
_CMP_FORMS = {"eq": "vv vx vi", "ne": "vv vx vi", "lt": "vv vx", "ltu": "vv vx",
              "le": "vv vx vi", "leu": "vv vx vi", "gt": "vx vi", "gtu": "vx vi"}


def _second_operand(st: MachineState, operand, i: int, width: int) -> int:
    if isinstance(operand, VectorReg):
        return _get(st, operand.index, i, width)
    if isinstance(operand, ScalarReg):
        return _xreg(st, operand) & ((1 << width) - 1)
    return operand.value & ((1 << width) - 1)


def _h_binop(st, op):
    vt = _vtype(st)
    w, nregs = vt.sew, _group_regs(vt.config)
    vd, vs2, src = op.instr.operands
    for reg in (vd, vs2) + ((src,) if isinstance(src, VectorReg) else ()):
        _check_group(st, reg.index, nregs)
    fn = op.params["fn"]
    for i in range(st.vl):
        if _active(st, op, i):
            _put(st, vd.index, i, w, fn(_get(st, vs2.index, i, w), _second_operand(st, src, i, w), w))


def _h_vneg(st, op):
    vt = _vtype(st)
    vd, vs = op.instr.operands
    for reg in (vd, vs):
        _check_group(st, reg.index, _group_regs(vt.config))
    for i in range(st.vl):
        if _active(st, op, i):
            _put(st, vd.index, i, vt.sew, -_get(st, vs.index, i, vt.sew))


def _h_vmacc(st, op):
    vt = _vtype(st)
    w = vt.sew
    vd, src, vs2 = op.instr.operands
    for reg in (vd, vs2):
        _check_group(st, reg.index, _group_regs(vt.config))
    for i in range(st.vl):
        if _active(st, op, i):
            acc = _get(st, vd.index, i, w)
            _put(st, vd.index, i, w, acc + _second_operand(st, src, i, w) * _get(st, vs2.index, i, w))


def _h_compare(st, op):
    vt = _vtype(st)
    w = vt.sew
    vd, vs2, src = op.instr.operands
    _check_group(st, vs2.index, _group_regs(vt.config))
    fn = op.params["fn"]
    results = {
        i: fn(_get(st, vs2.index, i, w), _second_operand(st, src, i, w), w)
        for i in range(st.vl)
        if _active(st, op, i)
    }
    for i, r in results.items():
        _set_mask_bit(st, vd.index, i, int(r))


def _h_vmerge(st, op):
    vt = _vtype(st)
    w = vt.sew
    vd, vs2, src, _v0 = op.instr.operands
    _check_group(st, vd.index, _group_regs(vt.config))
    for i in range(st.vl):
        if _mask_bit(st, 0, i):
            value = _second_operand(st, src, i, w)
        else:
            value = _get(st, vs2.index, i, w)
        _put(st, vd.index, i, w, value)


def _h_vmv_v(st, op):
    vt = _vtype(st)
    vd, src = op.instr.operands
    _check_group(st, vd.index, _group_regs(vt.config))
    for i in range(st.vl):
        _put(st, vd.index, i, vt.sew, _second_operand(st, src, i, vt.sew))


def _h_vmv_x_s(st, op):
    vt = _vtype(st)
    rd, vs2 = op.instr.operands
    st.set_x(rd.index, _sext(_get(st, vs2.index, 0, vt.sew), vt.sew))


def _h_vmv_s_x(st, op):
    vt = _vtype(st)
    vd, rs1 = op.instr.operands
    if st.vl:
        _put(st, vd.index, 0, vt.sew, _xreg(st, rs1))


_REDUCE = {
    "sum": lambda a, b, w: a + b,
    "and": lambda a, b, w: a & b,
    "or": lambda a, b, w: a | b,
    "xor": lambda a, b, w: a ^ b,
    "max": _ALU["max"],
    "maxu": _ALU["maxu"],
    "min": _ALU["min"],
    "minu": _ALU["minu"],
}


def _h_reduce(st, op):
    vt = _vtype(st)
    w = vt.sew
    vd, vs2, vs1 = op.instr.operands
    _check_group(st, vs2.index, _group_regs(vt.config))
    if not st.vl:
        return
    acc = _get(st, vs1.index, 0, w)
    fn = op.params["fn"]
    for i in range(st.vl):
        if _active(st, op, i):
            acc = fn(acc, _get(st, vs2.index, i, w), w) & ((1 << w) - 1)
    _put(st, vd.index, 0, w, acc)


def _h_vid(st, op):
    vt = _vtype(st)
    (vd,) = op.instr.operands
    _check_group(st, vd.index, _group_regs(vt.config))
    for i in range(st.vl):
        if _active(st, op, i):
            _put(st, vd.index, i, vt.sew, i)


def _h_popc(st, op):
    _vtype(st)
    rd, vs2 = op.instr.operands
    count = sum(1 for i in range(st.vl) if _active(st, op, i) and _mask_bit(st, vs2.index, i))
    st.set_x(rd.index, count)


_MASK_LOGIC = {
    "and": lambda a, b: a & b,
    "nand": lambda a, b: 1 - (a & b),
    "andn": lambda a, b: a & (1 - b),
    "andnot": lambda a, b: a & (1 - b),
    "or": lambda a, b: a | b,
    "nor": lambda a, b: 1 - (a | b),
    "orn": lambda a, b: a | (1 - b),
    "ornot": lambda a, b: a | (1 - b),
    "xor": lambda a, b: a ^ b,
    "xnor": lambda a, b: 1 - (a ^ b),
}


def _h_mask_logic(st, op):
    _vtype(st)
    ops = op.instr.operands
    vd, vs2, vs1 = (ops[0], ops[1], ops[1]) if len(ops) == 2 else ops
    fn = op.params["fn"]
    bits = [fn(_mask_bit(st, vs2.index, i), _mask_bit(st, vs1.index, i)) for i in range(st.vl)]
    for i, b in enumerate(bits):
        _set_mask_bit(st, vd.index, i, b)


def _h_narrow_shift(st, op):
    vt = _vtype(st)
    w, cfg = vt.sew, vt.config
    if 2 * w > st.config.elen or (not cfg.fractional and cfg.lmul == 8):
        raise Trap("narrowing source exceeds ELEN or LMUL 8")
    wide_regs = 1 if cfg.fractional else 2 * cfg.lmul
    ops = op.instr.operands
    vd, vs2 = ops[0], ops[1]
    src = ops[2] if len(ops) == 3 else Immediate(0)
    _check_group(st, vd.index, _group_regs(cfg))
    _check_group(st, vs2.index, wide_regs)
    arithmetic = op.params["arith"]
    results = {}
    for i in range(st.vl):
        if _active(st, op, i):
            wide = _get(st, vs2.index, i, 2 * w)
            if arithmetic:
                wide = _sext(wide, 2 * w)
            results[i] = wide >> (_second_operand(st, src, i, w) & (2 * w - 1))
    for i, r in results.items():
        _put(st, vd.index, i, w, r)


# Memory ----------------------------------------------------------------------


def _emul_regs(data_width: int, vt: VType) -> int:
    """Registers per group for data of width ``data_width`` under ``vt``."""
    cfg = vt.config
    num = data_width * (1 if cfg.fractional else cfg.lmul)
    den = vt.sew * (cfg.lmul if cfg.fractional else 1)
    if num * 8 < den or num > 8 * den:
        raise Trap(f"effective LMUL {num}/{den} out of range")
    return max(1, num // den)


def _h_vector_mem(st, op):
    vt = _vtype(st)
    p = op.params
    is_v1 = _dialect(st) is Dialect.V1P0
    mode, store, nf = p["mode"], p["store"], p.get("nf", 1)
    ops = op.instr.operands
    vreg, mem = ops[0].index, ops[1]
    base = (_xreg(st, mem.base) + mem.displacement) & MASK64

    if mode == "indexed":
        width = vt.sew
        index_width = p["eew"] if is_v1 else vt.sew
        idx_reg = ops[2].index
        _check_group(st, idx_reg, _emul_regs(index_width, vt))
    else:
        width = p["eew"] if is_v1 and p.get("eew") else vt.sew
    nbytes = width // 8
    regs = _emul_regs(width, vt)
    if nf * regs > 8:
        raise Trap("segment group exceeds 8 registers")
    _check_group(st, vreg, regs)
    if vreg + nf * regs > 32:
        raise Trap("segment group runs past v31")
    stride = _sext(_xreg(st, ops[2]), 64) if mode == "strided" else None

    for i in range(st.vl):
        if not _active(st, op, i):
            continue
        if mode == "indexed":
            elem_base = base + _get(st, idx_reg, i, index_width)
        elif mode == "strided":
            elem_base = base + i * stride
        else:
            elem_base = base + i * nf * nbytes
        for f in range(nf):
            addr = (elem_base + f * nbytes) & MASK64
            reg = vreg + f * regs
            if store:
                _store(st, addr, nbytes, _get(st, reg, i, width))
                continue
            if p.get("ff") and i > 0 and addr + nbytes > st.config.mem_size:
                st.vl = i
                return
            _put(st, reg, i, width, _load(st, addr, nbytes))


def _h_whole_register(st, op):
    p = op.params
    n, vlenb = p["n"], st.config.vlenb
    ops = op.instr.operands
    reg = ops[0].index
    _check_group(st, reg, n)
    span = slice(reg * vlenb, (reg + n) * vlenb)
    if p["kind"] == "move":
        src = ops[1].index
        _check_group(st, src, n)
        st.vregs[span] = st.vregs[src * vlenb : (src + n) * vlenb]
        return
    base = (_xreg(st, ops[1].base) + ops[1].displacement) & MASK64
    align = p.get("eew", 8) // 8
    if base % align:
        raise Trap(f"misaligned whole-register access at {base:#x}")
    if base + n * vlenb > st.config.mem_size:
        raise Trap(f"memory access at {base:#x} out of bounds")
    if p["kind"] == "load":
        st.vregs[span] = st.memory[base : base + n * vlenb]
    else:
        st.memory[base : base + n * vlenb] = st.vregs[span]


# Scalar ----------------------------------------------------------------------

_SCALAR_ALU = {
    "add": _ALU["add"], "sub": _ALU["sub"], "mul": _ALU["mul"],
    "and": _ALU["and"], "or": _ALU["or"], "xor": _ALU["xor"],
    "sll": lambda a, b, w: a << (b & 63),
    "srl": lambda a, b, w: a >> (b & 63),
    "sra": lambda a, b, w: _sext(a, 64) >> (b & 63),
}
_BRANCH = {
    "beq": lambda a, b: a == b,
    "bne": lambda a, b: a != b,
    "blt": lambda a, b: _sext(a, 64) < _sext(b, 64),
    "bge": lambda a, b: _sext(a, 64) >= _sext(b, 64),
    "bltu": lambda a, b: a < b,
    "bgeu": lambda a, b: a >= b,
}
_BRANCH_ZERO = {"beqz": "beq", "bnez": "bne", "bltz": "blt", "bgez": "bge"}
_BRANCH_ZERO_SWAPPED = {"blez": "bge", "bgtz": "blt"}  # compare zero against rs
_SCALAR_LOADS = {"lb": (1, True), "lbu": (1, False), "lh": (2, True), "lhu": (2, False),
                 "lw": (4, True), "lwu": (4, False), "ld": (8, True)}
_SCALAR_STORES = {"sb": 1, "sh": 2, "sw": 4, "sd": 8}


def _h_li(st, op):
    rd, imm = op.instr.operands
    st.set_x(rd.index, imm.value)


def _h_mv(st, op):
    rd, rs = op.instr.operands
    value = _xreg(st, rs)
    st.set_x(rd.index, -value if op.instr.mnemonic == "neg" else value)


def _h_nop(st, op):
    pass


def _h_scalar_alu(st, op):
    rd, rs1, src = op.instr.operands
    b = _xreg(st, src) if isinstance(src, ScalarReg) else src.value & MASK64
    st.set_x(rd.index, op.params["fn"](_xreg(st, rs1), b, 64))


def _h_scalar_load(st, op):
    rd, mem = op.instr.operands
    size, signed = op.params["size"], op.params["signed"]
    value = _load(st, _xreg(st, mem.base) + mem.displacement, size)
    st.set_x(rd.index, _sext(value, 8 * size) if signed else value)


def _h_scalar_store(st, op):
    rs, mem = op.instr.operands
    _store(st, _xreg(st, mem.base) + mem.displacement, op.params["size"], _xreg(st, rs))


def _h_branch(st, op):
    ops = op.instr.operands
    m = op.instr.mnemonic
    if m in _BRANCH_ZERO:
        taken = _BRANCH[_BRANCH_ZERO[m]](_xreg(st, ops[0]), 0)
    elif m in _BRANCH_ZERO_SWAPPED:
        taken = _BRANCH[_BRANCH_ZERO_SWAPPED[m]](0, _xreg(st, ops[0]))
    else:
        taken = _BRANCH[m](_xreg(st, ops[0]), _xreg(st, ops[1]))
    return op.target if taken else None


def _h_jump(st, op):
    return op.target


def _h_ret(st, op):
    return -1


# Instruction table -----------------------------------------------------------

# (pattern, dialects, operand shape, handler, params)
# Shapes: V vector reg, X scalar reg, I immediate, M memory ref, T vtype,
# C csr, L label, 0 the register v0, S vector-or-scalar-or-immediate.
_TABLE: list[tuple[re.Pattern, frozenset, str, Callable, Callable[[re.Match], dict]]] = []


def _add(pattern: str, dialects, shape: str, handler, params=lambda m: {}):
    _TABLE.append((re.compile(f"(?:{pattern})$"), dialects, shape, handler, params))


_add(r"vsetvli", BOTH, "XXT", _h_vsetvli)
_add(r"vsetivli", V1, "XIT", _h_vsetivli)
_add(r"vsetvl", BOTH, "XXX", _h_vsetvl)
_add(r"csrr", BOTH, "XC", _h_csrr)

for _name, _forms in _ALU_FORMS.items():
    for _form in _forms.split():
        _shape = {"vv": "VVV", "vx": "VVX", "vi": "VVI"}[_form]
        _add(rf"v{_name}\.{_form}", BOTH, _shape, _h_binop, lambda m, n=_name: {"fn": _ALU[n]})
for _name, _forms in _CMP_FORMS.items():
    for _form in _forms.split():
        _shape = {"vv": "VVV", "vx": "VVX", "vi": "VVI"}[_form]
        _add(rf"vms{_name}\.{_form}", BOTH, _shape, _h_compare, lambda m, n=_name: {"fn": _CMP[n]})
for _name in _REDUCE:
    _add(rf"vred{_name}\.vs", BOTH, "VVV", _h_reduce, lambda m, n=_name: {"fn": _REDUCE[n]})

_add(r"vneg\.v", V1, "VV", _h_vneg)
_add(r"vmacc\.vv", BOTH, "VVV", _h_vmacc)
_add(r"vmacc\.vx", BOTH, "VXV", _h_vmacc)
_add(r"vmerge\.vvm", BOTH, "VVV0", _h_vmerge)
_add(r"vmerge\.vxm", BOTH, "VVX0", _h_vmerge)
_add(r"vmerge\.vim", BOTH, "VVI0", _h_vmerge)
_add(r"vmv\.v\.v", BOTH, "VV", _h_vmv_v)
_add(r"vmv\.v\.x", BOTH, "VX", _h_vmv_v)
_add(r"vmv\.v\.i", BOTH, "VI", _h_vmv_v)
_add(r"vmv\.x\.s", BOTH, "XV", _h_vmv_x_s)
_add(r"vmv\.s\.x", BOTH, "VX", _h_vmv_s_x)
_add(r"vid\.v", BOTH, "V", _h_vid)
_add(r"vcpop\.m", V1, "XV", _h_popc)
_add(r"vpopc\.m", V07, "XV", _h_popc)
for _name in ("and", "nand", "or", "nor", "xor", "xnor"):
    _add(rf"vm{_name}\.mm", BOTH, "VVV", _h_mask_logic, lambda m, n=_name: {"fn": _MASK_LOGIC[n]})
for _name in ("andn", "orn"):
    _add(rf"vm{_name}\.mm", V1, "VVV", _h_mask_logic, lambda m, n=_name: {"fn": _MASK_LOGIC[n]})
for _name in ("andnot", "ornot"):
    _add(rf"vm{_name}\.mm", V07, "VVV", _h_mask_logic, lambda m, n=_name: {"fn": _MASK_LOGIC[n]})
_add(r"vmmv\.m", V1, "VV", _h_mask_logic, lambda m: {"fn": _MASK_LOGIC["and"]})

for _shift, _arith in (("vnsrl", False), ("vnsra", True)):
    for _v1_form, _v07_form, _shape in (("wv", "vv", "VVV"), ("wx", "vx", "VVX"), ("wi", "vi", "VVI")):
        _add(rf"{_shift}\.{_v1_form}", V1, _shape, _h_narrow_shift, lambda m, a=_arith: {"arith": a})
        _add(rf"{_shift}\.{_v07_form}", V07, _shape, _h_narrow_shift, lambda m, a=_arith: {"arith": a})
_add(r"vncvt\.x\.x\.w", V1, "VV", _h_narrow_shift, lambda m: {"arith": False})

_EEW = r"(?P<eew>8|16|32|64)"
_NF = r"(?P<nf>[2-8])"


def _mem_params(mode: str, store: bool, ff: bool = False):
    def params(m: re.Match) -> dict:
        g = m.groupdict()
        return {
            "mode": mode,
            "store": store,
            "ff": ff,
            "eew": int(g["eew"]) if g.get("eew") else None,
            "nf": int(g["nf"]) if g.get("nf") else 1,
        }
    return params


# v1.0 memory forms carry the element width in the mnemonic.
_add(rf"vle{_EEW}\.v", V1, "VM", _h_vector_mem, _mem_params("unit", False))
_add(rf"vse{_EEW}\.v", V1, "VM", _h_vector_mem, _mem_params("unit", True))
_add(rf"vle{_EEW}ff\.v", V1, "VM", _h_vector_mem, _mem_params("unit", False, ff=True))
_add(rf"vlse{_EEW}\.v", V1, "VMX", _h_vector_mem, _mem_params("strided", False))
_add(rf"vsse{_EEW}\.v", V1, "VMX", _h_vector_mem, _mem_params("strided", True))
_add(rf"vl[uo]xei{_EEW}\.v", V1, "VMV", _h_vector_mem, _mem_params("indexed", False))
_add(rf"vs[uo]xei{_EEW}\.v", V1, "VMV", _h_vector_mem, _mem_params("indexed", True))
_add(rf"vlseg{_NF}e{_EEW}\.v", V1, "VM", _h_vector_mem, _mem_params("unit", False))
_add(rf"vsseg{_NF}e{_EEW}\.v", V1, "VM", _h_vector_mem, _mem_params("unit", True))
_add(rf"vlseg{_NF}e{_EEW}ff\.v", V1, "VM", _h_vector_mem, _mem_params("unit", False, ff=True))
_add(rf"vlsseg{_NF}e{_EEW}\.v", V1, "VMX", _h_vector_mem, _mem_params("strided", False))
_add(rf"vssseg{_NF}e{_EEW}\.v", V1, "VMX", _h_vector_mem, _mem_params("strided", True))
_add(rf"vl[uo]xseg{_NF}ei{_EEW}\.v", V1, "VMV", _h_vector_mem, _mem_params("indexed", False))
_add(rf"vs[uo]xseg{_NF}ei{_EEW}\.v", V1, "VMV", _h_vector_mem, _mem_params("indexed", True))
# v0.7.1 memory forms use SEW.
_add(r"vle\.v", V07, "VM", _h_vector_mem, _mem_params("unit", False))
_add(r"vse\.v", V07, "VM", _h_vector_mem, _mem_params("unit", True))
_add(r"vleff\.v", V07, "VM", _h_vector_mem, _mem_params("unit", False, ff=True))
_add(r"vlse\.v", V07, "VMX", _h_vector_mem, _mem_params("strided", False))
_add(r"vsse\.v", V07, "VMX", _h_vector_mem, _mem_params("strided", True))
_add(r"vlxe\.v", V07, "VMV", _h_vector_mem, _mem_params("indexed", False))
_add(r"vsu?xe\.v", V07, "VMV", _h_vector_mem, _mem_params("indexed", True))
_add(rf"vlseg{_NF}e\.v", V07, "VM", _h_vector_mem, _mem_params("unit", False))
_add(rf"vsseg{_NF}e\.v", V07, "VM", _h_vector_mem, _mem_params("unit", True))
_add(rf"vlseg{_NF}eff\.v", V07, "VM", _h_vector_mem, _mem_params("unit", False, ff=True))
_add(rf"vlsseg{_NF}e\.v", V07, "VMX", _h_vector_mem, _mem_params("strided", False))
_add(rf"vssseg{_NF}e\.v", V07, "VMX", _h_vector_mem, _mem_params("strided", True))
_add(rf"vlxseg{_NF}e\.v", V07, "VMV", _h_vector_mem, _mem_params("indexed", False))
_add(rf"vsu?xseg{_NF}e\.v", V07, "VMV", _h_vector_mem, _mem_params("indexed", True))

_add(r"vmv(?P<n>[1248])r\.v", V1, "VV", _h_whole_register,
     lambda m: {"kind": "move", "n": int(m.group("n"))})
_add(rf"vl(?P<n>[1248])re{_EEW}\.v", V1, "VM", _h_whole_register,
     lambda m: {"kind": "load", "n": int(m.group("n")), "eew": int(m.group("eew"))})
_add(r"vl(?P<n>[1248])r\.v", V1, "VM", _h_whole_register,
     lambda m: {"kind": "load", "n": int(m.group("n")), "eew": 8})
_add(r"vs(?P<n>[1248])r\.v", V1, "VM", _h_whole_register,
     lambda m: {"kind": "store", "n": int(m.group("n"))})

_add(r"li", BOTH, "XI", _h_li)
_add(r"mv|neg", BOTH, "XX", _h_mv)
_add(r"nop", BOTH, "", _h_nop)
for _name in _SCALAR_ALU:
    _add(_name, BOTH, "XXX", _h_scalar_alu, lambda m, n=_name: {"fn": _SCALAR_ALU[n]})
for _name in ("add", "and", "or", "xor", "sll", "srl", "sra"):
    _add(_name + "i", BOTH, "XXI", _h_scalar_alu, lambda m, n=_name: {"fn": _SCALAR_ALU[n]})
for _name, (_size, _signed) in _SCALAR_LOADS.items():
    _add(_name, BOTH, "XM", _h_scalar_load, lambda m, s=_size, g=_signed: {"size": s, "signed": g})
for _name, _size in _SCALAR_STORES.items():
    _add(_name, BOTH, "XM", _h_scalar_store, lambda m, s=_size: {"size": s})
_add(r"beq|bne|blt|bge|bltu|bgeu", BOTH, "XXL", _h_branch)
_add(r"beqz|bnez|blez|bgez|bltz|bgtz", BOTH, "XL", _h_branch)
_add(r"j", BOTH, "L", _h_jump)
_add(r"ret", BOTH, "", _h_ret)

_SHAPE_TYPES = {
    "V": (VectorReg,), "X": (ScalarReg,), "I": (Immediate,), "M": (MemRef,),
    "T": (VtypeTokens,), "C": (CsrName,), "L": (Symbol,), "0": (VectorReg,),
}
_READABLE_CSRS = {Dialect.V1P0: {"vl", "vtype", "vlenb"}, Dialect.V0P7: {"vl", "vtype"}}


def _shape_ok(instr: Instruction, shape: str) -> bool:
    ops = instr.operands
    if len(ops) != len(shape):
        return False
    for operand, code in zip(ops, shape):
        if not isinstance(operand, _SHAPE_TYPES[code]):
            return False
        if code == "0" and operand.index != 0:
            return False
    return True


def _resolve(instr: Instruction, line: int, dialect: Dialect) -> Op:
    m = instr.mnemonic
    bad_shape = False
    for pattern, dialects, shape, handler, params in _TABLE:
        hit = pattern.match(m)
        if not hit or dialect not in dialects:
            continue
        if not _shape_ok(instr, shape):
            bad_shape = True
            continue
        if m == "csrr" and instr.operands[1].canonical not in _READABLE_CSRS[dialect]:
            raise UnsupportedInstruction(line, m, f" (CSR {instr.operands[1].name})")
        return Op(instr, line, handler, params(hit))
    if bad_shape:
        raise UnsupportedInstruction(line, m, " with these operands")
    raise UnsupportedInstruction(line, m, f" in dialect {dialect.value}")


_NUMERIC_REF = re.compile(r"(\d+)([bf])$")


def _numeric_target(ref: re.Match, defs: list[tuple[int, int]], line: int) -> Optional[int]:
    """Resolve a GAS local label reference such as ``1b`` or ``2f``."""
    if ref.group(2) == "b":
        before = [pos for def_line, pos in defs if def_line <= line]
        return before[-1] if before else None
    after = [pos for def_line, pos in defs if def_line > line]
    return after[0] if after else None


def load_program(doc: AssemblyDocument, dialect: Dialect) -> Program:
    """Resolve every line of ``doc`` into an executable program."""
    ops: list[Op] = []
    labels: dict[str, int] = {}
    numeric: dict[str, list[tuple[int, int]]] = {}
    for line in doc.lines:
        for name in line_labels(line.raw_text):
            if name.isdigit():
                numeric.setdefault(name, []).append((line.index, len(ops)))
                continue
            if name in labels:
                raise EmulatorError(f"line {line.index}: duplicate label {name!r}")
            labels[name] = len(ops)
        instr = line.instruction
        if instr is None:
            if isinstance(line.content, ArchAttribute):
                continue
            mnemonic = leading_mnemonic(line.raw_text)
            if mnemonic is None or _IGNORED_DIRECTIVES.match(mnemonic):
                continue
            raise UnsupportedInstruction(line.index, mnemonic)
        ops.append(_resolve(instr, line.index, dialect))

    for op in ops:
        if op.handler in (_h_branch, _h_jump):
            name = op.instr.operands[-1].text
            ref = _NUMERIC_REF.match(name)
            if ref:
                target = _numeric_target(ref, numeric.get(ref.group(1), []), op.line)
            else:
                target = labels.get(name)
            if target is None:
                raise UnresolvedLabel(name)
            op.target = target
    return Program(ops, labels, dialect)


def step(state: MachineState, program: Program) -> MachineState:
    op = program.ops[state.pc]
    try:
        nxt = op.handler(state, op)
    except Trap as exc:
        raise Trap(f"line {op.line} ({op.instr.mnemonic}): {exc}") from None
    if nxt is None:
        state.pc += 1
    elif nxt < 0:
        state.pc = len(program.ops)
    else:
        state.pc = nxt
    return state


def run(state: MachineState, program: Program, max_steps: int = 1_000_000) -> tuple[MachineState, int]:
    if max_steps <= 0:
        raise ValueError("max_steps must be positive")
    if state.config.dialect is not program.dialect:
        raise ValueError("program and machine dialects differ")
    steps = 0
    while state.pc < len(program.ops):
        if steps >= max_steps:
            raise StepLimitExceeded(f"no halt within {max_steps} steps")
        step(state, program)
        steps += 1
    return state, steps

"""Forward scan that records the statically known vtype before each line."""

from __future__ import annotations

from typing import Optional

from .asm_model import AssemblyDocument, CsrName, Instruction, ScalarReg, VConfig, VtypeTokens
from .parser import leading_mnemonic, line_labels

# None means the configuration is unknown at that point.
VConfigState = Optional[VConfig]
StateAnnotation = dict[int, VConfigState]

VTYPE_ADJACENT_CSRS = frozenset({"vl", "vtype", "vstart", "vcsr", "vxrm", "vxsat"})


def _is_call(line_text: str, instr: Optional[Instruction]) -> bool:
    mnemonic = instr.mnemonic if instr is not None else leading_mnemonic(line_text)
    if mnemonic in ("call", "tail", "jalr"):
        return True
    if mnemonic != "jal":
        return False
    if instr is None:
        # Undecodable jal: assume it links.
        return True
    ops = instr.operands
    if len(ops) >= 2 and isinstance(ops[0], ScalarReg):
        return not ops[0].is_zero
    return True


def _clobbers_vtype_csr(instr: Instruction) -> bool:
    if not instr.mnemonic.startswith("csr") or instr.mnemonic == "csrr":
        return False
    return any(
        isinstance(op, CsrName) and op.canonical in VTYPE_ADJACENT_CSRS
        for op in instr.operands
    )


def track(doc: AssemblyDocument) -> StateAnnotation:
    """Map every line index to the vtype known to hold just before it runs.

    Labels are join points and reset the state; calls and vtype CSR writes
    reset it after the line; ``vsetvli``/``vsetivli`` with an immediate vtype
    establish it. No control-flow graph is built.
    """
    annotation: StateAnnotation = {}
    state: VConfigState = None
    for line in doc.lines:
        if line_labels(line.raw_text):
            state = None
        annotation[line.index] = state

        instr = line.instruction
        if instr is not None:
            m = instr.mnemonic
            if m in ("vsetvli", "vsetivli") and instr.operands and isinstance(
                instr.operands[-1], VtypeTokens
            ):
                state = instr.operands[-1].config
                continue
            if m == "vsetvl" or _clobbers_vtype_csr(instr):
                state = None
                continue
        if _is_call(line.raw_text, instr):
            state = None
    return annotation

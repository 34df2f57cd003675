from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from rvv_backport.asm_model import (
    ArchAttribute,
    CsrName,
    Immediate,
    Instruction,
    MemRef,
    ScalarReg,
    Symbol,
    VectorReg,
    VtypeTokens,
    canonical_text,
)
from rvv_backport.emitter import emit_assembly
from rvv_backport.parser import MalformedInstruction, parse_document, parse_instruction


def test_vadd_decoded():
    instr = parse_instruction("  vadd.vv v1, v2, v3")
    assert instr == Instruction("vadd.vv", (VectorReg("v1"), VectorReg("v2"), VectorReg("v3")))


@pytest.mark.parametrize("line", ["# reduce loop", "// note", "", "   ", ".text", "\t.align 2"])
def test_opaque_lines(line):
    assert parse_instruction(line) is None


def test_vsetvli_tokens():
    instr = parse_instruction("vsetvli t0, a0, e32, m2, ta, ma")
    assert instr.operands == (ScalarReg("t0"), ScalarReg("a0"), VtypeTokens("e32", "m2", ("ta", "ma")))


def test_vsetvli_fractional_flagged():
    vt = parse_instruction("vsetvli t0, a0, e32, mf2, ta, ma").operands[-1]
    assert vt == VtypeTokens("e32", "mf2", ("ta", "ma"))
    assert vt.fractional


def test_vsetvli_without_lmul():
    vt = parse_instruction("vsetvli t0, a0, e16").operands[-1]
    assert vt.lmul_token is None and vt.config.lmul == 1


def test_masked_load():
    instr = parse_instruction("vle32.v v8, (a1), v0.t")
    assert instr.mnemonic == "vle32.v"
    assert instr.operands == (VectorReg("v8"), MemRef(ScalarReg("a1"), 0))
    assert instr.mask


def test_mask_case_insensitive_emitted_lowercase():
    instr = parse_instruction("VADD.VV v1, v2, v3, V0.T")
    assert instr.mask and instr.mnemonic == "vadd.vv"
    assert canonical_text(instr).endswith(", v0.t")


def test_label_prefix_retained():
    instr = parse_instruction("loop: vmacc.vv v4, v8, v12")
    assert instr.label_prefix == "loop:"
    assert instr.mnemonic == "vmacc.vv"


def test_trailing_comment_captured():
    instr = parse_instruction("vle32.v v8, (a1)  # load x")
    assert instr.comment_suffix == "# load x"


def test_displacement_and_hex():
    instr = parse_instruction("li a0, 0x1F")
    assert instr.operands[1] == Immediate(31)
    instr = parse_instruction("vse.v v1, -8(sp)")
    assert instr.operands[1] == MemRef(ScalarReg("sp"), -8)


def test_csr_operand():
    instr = parse_instruction("csrr a0, vl")
    assert instr.operands == (ScalarReg("a0"), CsrName("vl"))


def test_li_symbol():
    assert parse_instruction("li a0, %lo(sym)").operands[1] == Symbol("%lo(sym)")


def test_arch_attribute():
    assert parse_instruction('  .attribute arch, "rv64gcv1p0"') == ArchAttribute("rv64gcv1p0")
    assert parse_instruction('.attribute 5, "rv64gcv1p0"  # x') == ArchAttribute("rv64gcv1p0")
    assert parse_instruction(".attribute stack_align, 16") is None


def test_oversized_immediate_is_opaque():
    assert parse_instruction("addi a0, a0, 99999999999999999999999") is None


def test_unknown_scalar_is_opaque():
    assert parse_instruction("fld fa0, 0(a0)") is None


@pytest.mark.parametrize(
    "line",
    [
        "vadd.vv v1, v2",
        "vsetvli t0, a0, m2",
        "vsetivli t0, 32, e8, m1",
        "vle32.v v1, a0",
        "vle32.v v1, (v2)",
        "vadd.vv v1, v0.t, v2, v3",
        "vmerge.vvm v1, v2, v3, v4",
        "vadd.vv v1, v2, foo",
        "csrr a0",
        "vmv1r.v v1, v2, v0.t",
    ],
)
def test_malformed(line):
    with pytest.raises(MalformedInstruction) as err:
        parse_instruction(line, line=7)
    assert err.value.line == 7


def test_strict_document_aborts():
    with pytest.raises(MalformedInstruction):
        parse_document("nop\nvadd.vv v1, v2\n")


def test_lenient_document_degrades_to_opaque():
    doc = parse_document("nop\nvadd.vv v1, v2\n", strict=False)
    assert doc.lines[1].content is None
    assert doc.diagnostics[0][:2] == (2, "malformed")


def test_line_indices_contiguous_from_one():
    doc = parse_document("a\nb\nc")
    assert [line.index for line in doc.lines] == [1, 2, 3]


def test_crlf_flag_and_restore():
    text = "vadd.vv v1, v2, v3\r\nret\r\n"
    doc = parse_document(text)
    assert doc.crlf
    assert all("\r" not in line.raw_text for line in doc.lines)
    assert emit_assembly(doc) == text


def test_trailing_newline_normalized():
    assert emit_assembly(parse_document("ret")) == "ret\n"
    assert emit_assembly(parse_document("")) == ""


_FRAGMENTS = [
    "vadd.vv v1, v2, v3",
    "  vle32.v\tv8, (a1), v0.t  # c",
    "loop:",
    "1: addi a0, a0, -1",
    "\t.globl\tmain",
    "# comment",
    "// other comment",
    "vsetvli t0, a0, e32, m2, ta, ma",
    "csrr a0, vl",
    "   ",
    "li a0, 0x10",
    "x: y: vcpop.m a0, v0",
]
_line = st.one_of(
    st.sampled_from(_FRAGMENTS),
    st.text(alphabet=st.characters(blacklist_characters="\r\n", blacklist_categories=("Cs",)), max_size=30),
)


@settings(max_examples=300)
@given(st.lists(_line, max_size=12), st.booleans(), st.booleans())
def test_round_trip_identity(lines, crlf, trailing):
    nl = "\r\n" if crlf else "\n"
    text = nl.join(lines) + (nl if trailing and lines else "")
    doc = parse_document(text, strict=False)
    # a file with no line terminator at all gives no hint of CRLF
    out_nl = nl if nl in text else "\n"
    expected = text if text == "" or text.endswith(nl) else text + out_nl
    assert emit_assembly(doc) == expected


_vreg = st.integers(0, 31).map(lambda i: f"v{i}")
_xreg = st.sampled_from(["zero", "a0", "a1", "t0", "t6", "s0", "x5", "sp"])
_vtype = st.tuples(
    st.sampled_from(["e8", "e16", "e32", "e64"]),
    st.sampled_from(["m1", "m2", "m4", "m8", "mf2", "mf4", "mf8"]),
    st.sampled_from(["", "ta", "tu"]),
    st.sampled_from(["", "ma", "mu"]),
).map(lambda t: ", ".join(tok for tok in t if tok))
_instruction_text = st.one_of(
    st.builds(lambda a, b, c, m: f"vadd.vv {a}, {b}, {c}{m}", _vreg, _vreg, _vreg, st.sampled_from(["", ", v0.t"])),
    st.builds(lambda a, b, c: f"vadd.vx {a}, {b}, {c}", _vreg, _vreg, _xreg),
    st.builds(lambda a, b, i: f"vadd.vi {a}, {b}, {i}", _vreg, _vreg, st.integers(-16, 15)),
    st.builds(lambda d, s, v: f"vsetvli {d}, {s}, {v}", _xreg, _xreg, _vtype),
    st.builds(lambda d, i, v: f"vsetivli {d}, {i}, {v}", _xreg, st.integers(0, 31), _vtype),
    st.builds(lambda v, d, b: f"vle32.v {v}, {d}({b})", _vreg, st.integers(-2048, 2047), _xreg),
    st.builds(lambda v, b, s: f"vlse16.v {v}, ({b}), {s}", _vreg, _xreg, _xreg),
    st.builds(lambda d, i: f"li {d}, {i}", _xreg, st.integers(-(2**63), 2**63 - 1)),
    st.builds(lambda d: f"csrr {d}, vtype", _xreg),
)


@settings(max_examples=300)
@given(_instruction_text, st.sampled_from(["", "lbl: ", ".L3: "]), st.sampled_from(["", "  # note"]))
def test_parse_render_parse_fixpoint(body, label, comment):
    first = parse_instruction(label + body + comment)
    again = parse_instruction(canonical_text(first))
    assert again == first

from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from rvv_backport.asm_model import Dialect, VConfig
from rvv_backport.emulator import (
    MachineConfig,
    MachineState,
    StepLimitExceeded,
    Trap,
    UnresolvedLabel,
    UnsupportedInstruction,
    VType,
    decode_vtype,
    encode_vtype,
    load_program,
    run,
)
from rvv_backport.parser import parse_document

import emulator_laws

V1, V07 = Dialect.V1P0, Dialect.V0P7


def execute(text, dialect=V1, regs=None, memory=None, vlen=128, mem_size=4096, max_steps=10_000):
    program = load_program(parse_document(text), dialect)
    state = MachineState(MachineConfig(vlen=vlen, mem_size=mem_size, dialect=dialect))
    for idx, value in (regs or {}).items():
        state.set_x(idx, value)
    for offset, data in (memory or {}).items():
        state.memory[offset:offset + len(data)] = data
    return run(state, program, max_steps)


def words(state, offset, n, size=4, signed=False):
    mem = state.memory
    return [int.from_bytes(mem[offset + i * size: offset + (i + 1) * size], "little", signed=signed) for i in range(n)]


def pack(values, size=4):
    return b"".join((v % (1 << (8 * size))).to_bytes(size, "little") for v in values)


# examples ---------------------------------------------------------------------


@pytest.mark.parametrize("dialect", [V1, V07])
def test_vsetvli_example(dialect):
    state, steps = execute("vsetvli t0, a0, e32, m1", dialect, regs={10: 5})
    assert state.vl == 4 and state.x[5] == 4 and steps == 1


def test_vadd_elementwise_with_undisturbed_tail():
    text = "vsetvli t0, a0, e32, m1\nvle32.v v2, (a1)\nvle32.v v3, (a2)\nvadd.vv v1, v2, v3"
    a = [0xFFFFFFFF, 1, 2, 3]
    b = [1, 10, 20, 30]

    def setup_and_run(avl):
        program = load_program(parse_document(text), V1)
        st = MachineState(MachineConfig())
        st.vregs[16:32] = bytes(range(100, 116))
        st.set_x(10, avl)
        st.set_x(11, 0)
        st.set_x(12, 64)
        st.memory[0:16] = pack(a)
        st.memory[64:80] = pack(b)
        return run(st, program)[0]

    st = setup_and_run(4)
    assert [int.from_bytes(st.vregs[16 + 4 * i:20 + 4 * i], "little") for i in range(4)] == [0, 11, 22, 33]
    st = setup_and_run(2)
    assert bytes(st.vregs[24:32]) == bytes(range(108, 116))


def test_csrr_to_x0_changes_nothing():
    state, _ = execute("vsetvli t0, a0, e32, m1\ncsrr x0, vl", regs={10: 3})
    assert state.x[0] == 0 and state.vl == 3


def test_empty_program():
    state, steps = execute("")
    assert steps == 0 and state.pc == 0


def test_straight_line_ten_steps():
    _, steps = execute("\n".join(f"addi a0, a0, {i}" for i in range(10)))
    assert steps == 10


def test_infinite_loop_hits_step_limit():
    with pytest.raises(StepLimitExceeded):
        execute("loop:\nj loop", max_steps=1000)


def test_load_gating():
    text = "vsetvli t0, a0, e32, m1\nvle32.v v1, (a0)"
    load_program(parse_document(text), V1)
    with pytest.raises(UnsupportedInstruction) as err:
        load_program(parse_document(text), V07)
    assert err.value.mnemonic == "vle32.v"


def test_unresolved_label():
    with pytest.raises(UnresolvedLabel) as err:
        load_program(parse_document("bnez t0, missing"), V1)
    assert err.value.name == "missing"


def test_opaque_instruction_rejected_at_load():
    with pytest.raises(UnsupportedInstruction):
        load_program(parse_document("fadd.d fa0, fa1, fa2"), V1)


def test_directives_and_comments_allowed():
    _, steps = execute("\t.text\n# c\nmain:\n\tli a0, 1\n\tret\n\tli a0, 2")
    assert steps == 2


def test_duplicate_label_rejected():
    with pytest.raises(Exception):
        load_program(parse_document("a:\na:"), V1)


def test_numeric_local_labels():
    text = "li a0, 3\n1:\naddi a0, a0, -1\nbnez a0, 1b\nj 1f\nli a1, 9\n1:\nli a2, 7"
    state, _ = execute(text)
    assert state.x[10] == 0 and state.x[11] == 0 and state.x[12] == 7


# dialect-specific semantics --------------------------------------------------


def test_v07_rs1_x0_sets_vlmax_while_v1_keeps():
    text = "vsetvli t0, a0, e32, m1\nvsetvli x0, x0, e32, m1"
    assert execute(text, V07, regs={10: 2})[0].vl == 4
    assert execute(text, V1, regs={10: 2})[0].vl == 2


def test_v1_keep_vl_with_shrinking_vlmax_sets_vill():
    state, _ = execute("vsetvli t0, a0, e8, m1\nvsetvli x0, x0, e64, m1", regs={10: 10})
    assert state.vtype is None and state.vl == 0


def test_illegal_vtype_traps_vector_ops():
    with pytest.raises(Trap):
        execute("vsetvli t0, a0, e64, mf8\nvadd.vv v1, v2, v3", regs={10: 4})


def test_fractional_lmul_is_v1_only():
    state, _ = execute("vsetvli t0, a0, e8, mf2", V1, regs={10: 100})
    assert state.vl == 8
    state, _ = execute("vsetvli t0, a0, e8, mf2", V07, regs={10: 100})
    assert state.vtype is None and state.vl == 0


def test_v1_eew_vs_v07_sew_memory():
    mem = {0: bytes(range(64))}
    v1, _ = execute("vsetvli t0, a0, e32, m1\nvle8.v v1, (x0)\nvse8.v v1, 64(x0)", V1, {10: 4}, mem)
    assert list(v1.memory[64:68]) == [0, 1, 2, 3] and v1.memory[68] == 0
    v07, _ = execute("vsetvli t0, a0, e32, m1\nvle.v v1, (x0)\nvse.v v1, 64(x0)", V07, {10: 4}, mem)
    assert list(v07.memory[64:80]) == list(range(16))


def test_vsetvl_round_trip_per_dialect():
    for dialect in (V1, V07):
        text = "vsetvli t0, a0, e16, m2\ncsrr a1, vtype\ncsrr a2, vl\nvsetvli t0, a0, e64, m1\nvsetvl a3, a2, a1"
        state, _ = execute(text, dialect, {10: 7})
        assert state.vtype.config == VConfig(16, 2) and state.vl == 7 and state.x[13] == 7


@given(st.sampled_from([8, 16, 32, 64]), st.sampled_from([1, 2, 4, 8]), st.booleans(), st.booleans())
def test_vtype_encoding_round_trip(sew, lmul, ta, ma):
    vt = VType(VConfig(sew, lmul), ta, ma)
    assert decode_vtype(encode_vtype(vt, V1), V1) == vt
    assert decode_vtype(encode_vtype(vt, V07), V07) == VType(VConfig(sew, lmul))


def test_vtype_encodings_differ_between_dialects():
    vt = VType(VConfig(32, 2))
    assert encode_vtype(vt, V1) == 0b010001
    assert encode_vtype(vt, V07) == 0b1001
    assert encode_vtype(None, V1) == 1 << 63


def test_vlenb_is_v1_only():
    state, _ = execute("csrr a0, vlenb", V1, vlen=256)
    assert state.x[10] == 32
    with pytest.raises(UnsupportedInstruction):
        execute("csrr a0, vlenb", V07)


# instruction semantics ------------------------------------------------------------


def test_reduction_sum():
    vals = [5, -3, 100, 7, 9]
    text = "vsetvli t0, a0, e32, m2\nvle32.v v2, (x0)\nvmv.s.x v8, a1\nvredsum.vs v8, v2, v8\nvmv.x.s a2, v8"
    state, _ = execute(text, V1, {10: 5, 11: 1000}, {0: pack(vals)})
    assert state.x[12] == 1000 + sum(vals)


def test_vmv_x_s_sign_extends():
    state, _ = execute("vsetvli t0, a0, e8, m1\nvmv.v.i v1, -1\nvmv.x.s a1, v1", V1, {10: 1})
    assert state.x[11] == (1 << 64) - 1


def test_compare_and_merge():
    text = ("vsetvli t0, a0, e16, m1\nvle16.v v1, (x0)\nvmslt.vx v0, v1, a1\n"
            "vmerge.vim v2, v1, 0, v0\nvse16.v v2, 64(x0)")
    vals = [1, 50, -2, 9, 100, 3]
    state, _ = execute(text, V1, {10: 6, 11: 5}, {0: pack(vals, 2)})
    assert words(state, 64, 6, 2, signed=True) == [0, 50, 0, 9, 100, 0]


def test_popcount_both_names_and_layouts():
    body = "vsetvli t0, a0, e16, m4\nvid.v v8\nvand.vi v12, v8, 1\nvmseq.vi v1, v12, 0\n{} a1, v1"
    assert execute(body.format("vcpop.m"), V1, {10: 13})[0].x[11] == 7
    assert execute(body.format("vpopc.m"), V07, {10: 13})[0].x[11] == 7
    with pytest.raises(UnsupportedInstruction):
        execute(body.format("vcpop.m"), V07, {10: 13})


def test_narrowing_shift_forms():
    data = pack([0x12345678, -16, 0x7FFF0000, 1])
    v1, _ = execute("vsetvli t0, a0, e16, m1\nvle32.v v2, (x0)\nvnsra.wi v1, v2, 4\nvse16.v v1, 64(x0)",
                    V1, {10: 4}, {0: data})
    v07, _ = execute("vsetvli t0, a0, e32, m2\nvle.v v2, (x0)\nvsetvli t0, a0, e16, m1\n"
                     "vnsra.vi v1, v2, 4\nvse.v v1, 64(x0)", V07, {10: 4}, {0: data})
    expected = [(0x12345678 >> 4) & 0xFFFF, (-16 >> 4) & 0xFFFF, (0x7FFF0000 >> 4) & 0xFFFF, 0]
    assert words(v1, 64, 4, 2) == expected
    assert words(v07, 64, 4, 2) == expected


def test_strided_and_indexed():
    data = pack(list(range(100, 132)))
    text = ("vsetvli t0, a0, e32, m1\nli a1, 12\nvlse32.v v1, (x0), a1\nvse32.v v1, 256(x0)\n"
            "vid.v v2\nvsll.vi v2, v2, 3\nvluxei32.v v3, (x0), v2\nvse32.v v3, 512(x0)")
    state, _ = execute(text, V1, {10: 4}, {0: data})
    assert words(state, 256, 4) == [100, 103, 106, 109]
    assert words(state, 512, 4) == [100, 102, 104, 106]


def test_segment_load_store():
    data = pack(list(range(12)), 2)
    text = "vsetvli t0, a0, e16, m1\nvlseg3e16.v v4, (x0)\nvse16.v v5, 64(x0)\nvsseg2e16.v v5, 128(x0)"
    state, _ = execute(text, V1, {10: 4}, {0: data})
    assert words(state, 64, 4, 2) == [1, 4, 7, 10]
    assert words(state, 128, 8, 2) == [1, 2, 4, 5, 7, 8, 10, 11]


def test_fault_only_first_truncates():
    text = "vsetvli t0, a0, e32, m1\nvle32ff.v v1, (a1)\ncsrr a2, vl"
    state, _ = execute(text, V1, {10: 4, 11: 4096 - 8})
    assert state.x[12] == 2
    with pytest.raises(Trap):
        execute(text, V1, {10: 4, 11: 4096})


def test_whole_register_ops_ignore_vl():
    text = "vsetvli t0, a0, e32, m1\nvl1re32.v v1, (x0)\nvmv1r.v v2, v1\nvs1r.v v2, 64(x0)"
    data = bytes(range(16))
    state, _ = execute(text, V1, {10: 1}, {0: data})
    assert bytes(state.memory[64:80]) == data and state.vl == 1


def test_misaligned_vector_access_traps():
    with pytest.raises(Trap):
        execute("vsetvli t0, a0, e32, m1\nvle32.v v1, (a1)", V1, {10: 2, 11: 2})


def test_register_group_alignment_traps():
    with pytest.raises(Trap):
        execute("vsetvli t0, a0, e32, m2\nvadd.vv v1, v2, v4", V1, {10: 2})


def test_scalar_ops_and_branches():
    text = ("li a0, 10\nli a1, 0\nloop:\nadd a1, a1, a0\naddi a0, a0, -1\nbgtz a0, loop\n"
            "slli a2, a1, 2\nsw a2, 0(x0)\nlw a3, 0(x0)\nsub a4, x0, a3\nblt a4, x0, neg\nli a5, 1\nneg:")
    state, _ = execute(text)
    assert state.x[11] == 55 and state.x[13] == 220 and state.x[15] == 0
    assert state.x[14] == (-220) % (1 << 64)


def test_determinism():
    text = "vsetvli t0, a0, e8, m4\nvle8.v v4, (x0)\nvid.v v8\nvmul.vv v4, v4, v8\nvse8.v v4, 256(x0)"
    mem = {0: random.Random(3).randbytes(256)}
    a, _ = execute(text, V1, {10: 50}, mem)
    b, _ = execute(text, V1, {10: 50}, mem)
    assert a.memory == b.memory and a.vregs == b.vregs and a.x == b.x


@pytest.mark.parametrize("vlen", [32, 96, 1024])
def test_machine_config_vlen_validation(vlen):
    with pytest.raises(ValueError):
        MachineConfig(vlen=vlen)


def test_machine_config_mem_size_validation():
    with pytest.raises(ValueError):
        MachineConfig(mem_size=0)


@pytest.mark.parametrize("check", emulator_laws.CHECKS, ids=lambda c: c.__name__)
def test_laws_sampled(check):
    rng = random.Random(check.__name__)
    for _ in range(60):
        check(rng)


def test_law_sampler_hits_every_branch():
    assert emulator_laws.run_laws(600, seed=1) == emulator_laws.ALL_BRANCHES

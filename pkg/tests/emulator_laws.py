"""Randomized emulator law checks shared by the unit and acceptance suites.

Each check builds a tiny program, runs it, and compares against values
computed here from the dialect definitions (not from emulator internals).
Checks return the set of dialect-sensitive branch tags they exercised.
"""

from __future__ import annotations

import random

from rvv_backport.asm_model import Dialect
from rvv_backport.emulator import MachineConfig, MachineState, Trap, load_program, run
from rvv_backport.parser import parse_document

SEWS = (8, 16, 32, 64)
LMULS = (1, 2, 4, 8)
VLENS = (64, 128, 256, 512)
DIALECTS = (Dialect.V1P0, Dialect.V0P7)

ALL_BRANCHES = frozenset(
    {
        "v1:avl", "v07:avl",
        "v1:rs1=x0,rd!=x0", "v07:rs1=x0,rd!=x0",
        "v1:rs1=x0,rd=x0:keep", "v1:rs1=x0,rd=x0:vill", "v07:rs1=x0,rd=x0",
        "v1:tail", "v07:tail",
        "v1:mask", "v07:mask:mlen>1", "v07:mask:mlen=1",
        "v1:x0", "v07:x0",
        "v1:oob", "v07:oob",
    }
)


def _tag(dialect: Dialect) -> str:
    return "v1" if dialect is Dialect.V1P0 else "v07"


def _run(text: str, dialect: Dialect, vlen: int, setup=None, mem_size: int = 4096) -> MachineState:
    program = load_program(parse_document(text), dialect)
    state = MachineState(MachineConfig(vlen=vlen, mem_size=mem_size, dialect=dialect))
    if setup:
        setup(state)
    run(state, program, max_steps=1000)
    return state


def vlmax(vlen: int, sew: int, lmul: int) -> int:
    return vlen // sew * lmul


def check_vlmax_law(rng: random.Random) -> set[str]:
    dialect, vlen = rng.choice(DIALECTS), rng.choice(VLENS)
    sew, lmul = rng.choice([s for s in SEWS if s <= 64]), rng.choice(LMULS)
    top = vlmax(vlen, sew, lmul)
    avl = rng.randint(0, 2 * top)
    st = _run(f"vsetvli t0, a0, e{sew}, m{lmul}", dialect, vlen, lambda s: s.set_x(10, avl))
    assert st.vl == min(avl, top), (dialect, vlen, sew, lmul, avl, st.vl)
    assert st.x[5] == st.vl
    return {f"{_tag(dialect)}:avl"}


def check_x0_avl_forms(rng: random.Random) -> set[str]:
    dialect, vlen = rng.choice(DIALECTS), rng.choice(VLENS)
    sew1, lmul1 = rng.choice(SEWS), rng.choice(LMULS)
    sew2, lmul2 = rng.choice(SEWS), rng.choice(LMULS)
    first_vlmax, second_vlmax = vlmax(vlen, sew1, lmul1), vlmax(vlen, sew2, lmul2)
    avl = rng.randint(0, first_vlmax)
    rd_zero = rng.random() < 0.6
    rd = "zero" if rd_zero else "t1"
    text = f"vsetvli t0, a0, e{sew1}, m{lmul1}\nvsetvli {rd}, zero, e{sew2}, m{lmul2}"
    st = _run(text, dialect, vlen, lambda s: s.set_x(10, avl))
    tag = _tag(dialect)
    if dialect is Dialect.V0P7:
        assert st.vl == second_vlmax
        return {f"{tag}:rs1=x0,rd=x0" if rd_zero else f"{tag}:rs1=x0,rd!=x0"}
    if not rd_zero:
        assert st.vl == second_vlmax and st.x[6] == second_vlmax
        return {f"{tag}:rs1=x0,rd!=x0"}
    if avl <= second_vlmax:
        assert st.vtype is not None and st.vl == avl
        return {f"{tag}:rs1=x0,rd=x0:keep"}
    assert st.vtype is None and st.vl == 0
    return {f"{tag}:rs1=x0,rd=x0:vill"}


def _group_bytes(st: MachineState, reg: int, nregs: int) -> bytes:
    b = st.config.vlenb
    return bytes(st.vregs[reg * b:(reg + nregs) * b])


def _elements(data: bytes, sew: int) -> list[int]:
    n = sew // 8
    return [int.from_bytes(data[i:i + n], "little") for i in range(0, len(data), n)]


def check_tail_preservation(rng: random.Random) -> set[str]:
    dialect, vlen = rng.choice(DIALECTS), rng.choice(VLENS)
    sew, lmul = rng.choice(SEWS), rng.choice(LMULS)
    top = vlmax(vlen, sew, lmul)
    avl = rng.randint(0, top - 1)
    policy = ""
    if dialect is Dialect.V1P0:
        policy = f", {rng.choice(['ta', 'tu'])}, {rng.choice(['ma', 'mu'])}"
    dst0 = rng.randbytes(lmul * vlen // 8)
    src = rng.randbytes(lmul * vlen // 8)

    def setup(s):
        s.set_x(10, avl)
        b = s.config.vlenb
        s.vregs[8 * b:(8 + lmul) * b] = dst0
        s.vregs[16 * b:(16 + lmul) * b] = src

    st = _run(f"vsetvli t0, a0, e{sew}, m{lmul}{policy}\nvadd.vv v8, v8, v16", dialect, vlen, setup)
    after = _group_bytes(st, 8, lmul)
    mod = 1 << sew
    expect = [(a + b) % mod for a, b in zip(_elements(dst0, sew), _elements(src, sew))]
    assert _elements(after, sew)[:avl] == expect[:avl]
    assert after[avl * sew // 8:] == dst0[avl * sew // 8:]
    return {f"{_tag(dialect)}:tail"}


def _mask_bit(v0: bytes, i: int, dialect: Dialect, sew: int, lmul: int) -> int:
    # v0.7.1 keeps mask element i at bit i*MLEN with MLEN = SEW/LMUL
    pos = i if dialect is Dialect.V1P0 else i * (sew // lmul)
    return v0[pos // 8] >> (pos % 8) & 1


def check_mask_law(rng: random.Random) -> set[str]:
    dialect, vlen = rng.choice(DIALECTS), rng.choice(VLENS)
    sew, lmul = rng.choice(SEWS), rng.choice(LMULS)
    top = vlmax(vlen, sew, lmul)
    avl = rng.randint(1, top)
    policy = ", ta, mu" if dialect is Dialect.V1P0 else ""
    v0 = rng.randbytes(vlen // 8)
    dst0 = rng.randbytes(lmul * vlen // 8)
    src = rng.randbytes(lmul * vlen // 8)

    def setup(s):
        s.set_x(10, avl)
        b = s.config.vlenb
        s.vregs[0:b] = v0
        s.vregs[8 * b:(8 + lmul) * b] = dst0
        s.vregs[16 * b:(16 + lmul) * b] = src

    st = _run(f"vsetvli t0, a0, e{sew}, m{lmul}{policy}\nvadd.vv v8, v8, v16, v0.t", dialect, vlen, setup)
    after = _elements(_group_bytes(st, 8, lmul), sew)
    old, add = _elements(dst0, sew), _elements(src, sew)
    for i in range(top):
        active = i < avl and _mask_bit(v0, i, dialect, sew, lmul)
        assert after[i] == ((old[i] + add[i]) % (1 << sew) if active else old[i]), i
    if dialect is Dialect.V1P0:
        return {"v1:mask"}
    return {"v07:mask:mlen>1" if sew // lmul > 1 else "v07:mask:mlen=1"}


def check_x0_hardwired(rng: random.Random) -> set[str]:
    dialect, vlen = rng.choice(DIALECTS), rng.choice(VLENS)
    text = "\n".join(
        [
            f"li x0, {rng.randint(1, 1000)}",
            "vsetvli zero, a0, e32, m1",
            "csrr x0, vl",
            "addi zero, a0, 5",
            "vmv.x.s x0, v1",
        ]
    )
    st = _run(text, dialect, vlen, lambda s: s.set_x(10, rng.randint(1, 8)))
    assert st.x[0] == 0
    return {f"{_tag(dialect)}:x0"}


def check_memory_bounds(rng: random.Random) -> set[str]:
    dialect, vlen = rng.choice(DIALECTS), rng.choice(VLENS)
    sew = rng.choice(SEWS)
    mem = 1024
    n = vlmax(vlen, sew, 1)
    nbytes = sew // 8
    base = rng.choice([mem - rng.randint(0, n) * nbytes, mem + rng.randint(0, 64) * nbytes,
                       (1 << 64) - rng.randint(1, 4) * nbytes])
    load = f"vle{sew}.v" if dialect is Dialect.V1P0 else "vle.v"
    store = f"vse{sew}.v" if dialect is Dialect.V1P0 else "vse.v"
    op = rng.choice([load, store])
    text = f"vsetvli t0, a0, e{sew}, m1\n{op} v1, (a1)"

    def setup(s):
        s.set_x(10, n)
        s.set_x(11, base)

    in_bounds = base + n * nbytes <= mem
    try:
        st = _run(text, dialect, vlen, setup, mem_size=mem)
    except Trap:
        assert not in_bounds
        return {f"{_tag(dialect)}:oob"}
    assert in_bounds and len(st.memory) == mem
    return set()


CHECKS = (
    check_vlmax_law,
    check_x0_avl_forms,
    check_tail_preservation,
    check_mask_law,
    check_x0_hardwired,
    check_memory_bounds,
)


def run_laws(samples: int, seed: int = 0) -> set[str]:
    rng = random.Random(seed)
    hit: set[str] = set()
    for i in range(samples):
        hit |= CHECKS[i % len(CHECKS)](rng)
    return hit

"""Differential check: source under v1.0 semantics vs. translation under v0.7.1.

Initial-state files list one item per line::

    # comments are allowed
    a0=0x20            # scalar register, hex value
    mem 0x100 deadbeef 00112233   # hex offset, then hex bytes

Differential specs (``.diffspec``) describe how to draw random initial
states for a kernel::

    seeds 100
    vlen 128 256
    mem 4096
    flags --expand-whole-register
    reg a0 rand 0 40          # inclusive range
    reg a1 = 0x100
    fill 0x0 0x800            # random bytes in [start, end)
"""

from __future__ import annotations

import random
import shlex
from dataclasses import dataclass, field
from typing import Optional, Union

from .asm_model import SCALAR_REG_INDEX, AssemblyDocument, Dialect
from .emulator import EmulatorError, MachineConfig, MachineState, load_program, run
from .emitter import emit_assembly
from .parser import MalformedInstruction, parse_document
from .pipeline import translate_text
from .rewriter import RewriteOptions


@dataclass
class InitialState:
    regs: dict[str, int] = field(default_factory=dict)
    memory: list[tuple[int, bytes]] = field(default_factory=list)

    def build(self, config: MachineConfig) -> MachineState:
        st = MachineState(config)
        for name, value in self.regs.items():
            st.set_x(SCALAR_REG_INDEX[name.lower()], value)
        for offset, data in self.memory:
            if offset + len(data) > config.mem_size:
                raise ValueError(f"initial memory at {offset:#x} exceeds memory size")
            st.memory[offset : offset + len(data)] = data
        return st


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_initial_state(text: str) -> InitialState:
    state = InitialState()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("mem "):
            parts = line.split()
            if len(parts) < 3:
                raise ValueError(f"line {lineno}: expected 'mem OFFSET HEXBYTES'")
            state.memory.append((int(parts[1], 16), bytes.fromhex("".join(parts[2:]))))
            continue
        name, sep, value = line.partition("=")
        name = name.strip().lower()
        if not sep or name not in SCALAR_REG_INDEX:
            raise ValueError(f"line {lineno}: expected 'REG=HEX', got {raw.strip()!r}")
        state.regs[name] = int(value.strip(), 16)
    return state


@dataclass
class DiffSpec:
    seeds: int = 10
    vlens: tuple[int, ...] = (128, 256)
    mem_size: int = 4096
    flags: tuple[str, ...] = ()
    regs: dict[str, tuple] = field(default_factory=dict)
    fills: list[tuple[int, int]] = field(default_factory=list)

    def initial_state(self, seed: int) -> InitialState:
        rng = random.Random(seed)
        state = InitialState()
        for start, end in self.fills:
            state.memory.append((start, rng.randbytes(end - start)))
        for name, spec in self.regs.items():
            if spec[0] == "rand":
                state.regs[name] = rng.randint(spec[1], spec[2])
            else:
                state.regs[name] = spec[1]
        return state


def parse_diffspec(text: str) -> DiffSpec:
    spec = DiffSpec()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        key, *args = line.split()
        try:
            if key == "seeds":
                spec.seeds = int(args[0])
            elif key == "vlen":
                spec.vlens = tuple(int(a) for a in args)
            elif key == "mem":
                spec.mem_size = int(args[0], 0)
            elif key == "flags":
                spec.flags = tuple(shlex.split(" ".join(args)))
            elif key == "reg":
                name = args[0].lower()
                if name not in SCALAR_REG_INDEX:
                    raise ValueError(f"unknown register {args[0]!r}")
                if args[1] == "=":
                    spec.regs[name] = ("fixed", int(args[2], 0))
                elif args[1] == "rand":
                    spec.regs[name] = ("rand", int(args[2], 0), int(args[3], 0))
                else:
                    raise ValueError(f"bad register spec {line!r}")
            elif key == "fill":
                spec.fills.append((int(args[0], 0), int(args[1], 0)))
            else:
                raise ValueError(f"unknown key {key!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"diffspec line {lineno}: {exc}") from None
    return spec


def options_from_flags(flags: tuple[str, ...]) -> RewriteOptions:
    kwargs = {}
    it = iter(flags)
    for flag in it:
        if flag == "--lenient":
            kwargs["lenient"] = True
        elif flag == "--assume-eew-matches-sew":
            kwargs["assume_eew_matches_sew"] = True
        elif flag == "--expand-whole-register":
            kwargs["expand_whole_register"] = True
        elif flag == "--scratch":
            kwargs["scratch_regs"] = tuple(next(it).split(","))
        else:
            raise ValueError(f"unsupported translation flag {flag!r}")
    return RewriteOptions(**kwargs)


@dataclass(frozen=True)
class Verdict:
    outcome: str  # "match" | "mismatch" | "error"
    side: Optional[str] = None  # "translation" | "source" | "translated"
    detail: str = ""
    translated: Optional[str] = None

    @property
    def match(self) -> bool:
        return self.outcome == "match"

    def __str__(self) -> str:
        if self.outcome == "match":
            return "MATCH"
        if self.outcome == "mismatch":
            return f"MISMATCH: {self.detail}"
        return f"ERROR({self.side}): {self.detail}"


def _vsetvl_destinations(doc: AssemblyDocument) -> set[int]:
    regs = set()
    for line in doc.lines:
        instr = line.instruction
        if instr is not None and instr.mnemonic in ("vsetvli", "vsetivli", "vsetvl"):
            regs.add(instr.operands[0].index)
    return regs


def _execute(doc: AssemblyDocument, dialect: Dialect, inputs: InitialState,
             config: MachineConfig, max_steps: int) -> MachineState:
    program = load_program(doc, dialect)
    state = inputs.build(MachineConfig(config.vlen, config.elen, config.mem_size, dialect))
    state, _ = run(state, program, max_steps)
    return state


def _first_difference(a: bytes, b: bytes) -> int:
    return next(i for i, (x, y) in enumerate(zip(a, b)) if x != y)


def differential_check(
    source: Union[str, AssemblyDocument],
    opts: RewriteOptions,
    inputs: InitialState,
    config: MachineConfig = MachineConfig(),
    max_steps: int = 1_000_000,
) -> Verdict:
    """Run ``source`` as v1.0 and its translation as v0.7.1 from the same state.

    Final memory and scalar registers must agree, except for the scratch
    registers and the destinations of vsetvl-family instructions. Vector
    registers are not compared.
    """
    text = emit_assembly(source) if isinstance(source, AssemblyDocument) else source
    translated, report = translate_text(text, "<check>", opts)
    if translated is None or not report.ok:
        detail = "; ".join(f"{d.line}:{d.code}: {d.message}" for d in report.errors)
        return Verdict("error", "translation", detail)

    try:
        src_doc = parse_document(text, strict=False)
        out_doc = parse_document(translated, strict=False)
    except MalformedInstruction as exc:  # pragma: no cover - lenient parse never raises
        return Verdict("error", "translation", str(exc))

    results = {}
    for side, doc, dialect in (("source", src_doc, Dialect.V1P0), ("translated", out_doc, Dialect.V0P7)):
        try:
            results[side] = _execute(doc, dialect, inputs, config, max_steps)
        except (EmulatorError, ValueError) as exc:
            return Verdict("error", side, str(exc), translated)

    excluded = {0} | {SCALAR_REG_INDEX[r.lower()] for r in opts.scratch_regs}
    excluded |= _vsetvl_destinations(src_doc) | _vsetvl_destinations(out_doc)
    before, after = results["source"], results["translated"]
    diffs = [
        f"x{i}: {before.x[i]:#x} != {after.x[i]:#x}"
        for i in range(32)
        if i not in excluded and before.x[i] != after.x[i]
    ]
    if before.memory != after.memory:
        addr = _first_difference(before.memory, after.memory)
        diffs.append(
            f"memory[{addr:#x}]: {before.memory[addr]:#04x} != {after.memory[addr]:#04x}"
        )
    if diffs:
        return Verdict("mismatch", None, "; ".join(diffs), translated)
    return Verdict("match", translated=translated)

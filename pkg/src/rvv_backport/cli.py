"""Command-line entry point: ``rvv-backport translate|check|selftest``."""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

from .differential import (
    DiffSpec,
    InitialState,
    differential_check,
    options_from_flags,
    parse_diffspec,
    parse_initial_state,
)
from .emitter import emit_report
from .emulator import MachineConfig
from .pipeline import translate_text
from .rewriter import RewriteOptions

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2
OUTPUT_SUFFIX = ".v07.s"


class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        raise _UsageError(message)


def _add_translation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lenient", action="store_true", help="warn instead of failing where possible")
    p.add_argument("--assume-eew-matches-sew", action="store_true",
                   help="accept EEW memory ops under unknown vector state")
    p.add_argument("--scratch", metavar="R1,R2", help="scratch registers (default t5,t6)")
    p.add_argument("--expand-whole-register", action="store_true",
                   help="expand single-register whole-register ops")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="rvv-backport", description="Translate RVV v1.0 assembly to v0.7.1.")
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("translate", help="translate assembly files")
    tr.add_argument("inputs", nargs="+", type=Path)
    tr.add_argument("-o", "--output", help="output path, or - for standard output")
    tr.add_argument("--report", type=Path, help="write a JSON report here")
    tr.add_argument("--no-annotate", action="store_true", help="omit rule comments")
    _add_translation_flags(tr)

    ck = sub.add_parser("check", help="differentially test translations in the emulator")
    ck.add_argument("inputs", nargs="+", type=Path)
    ck.add_argument("--vlen", type=int, default=128)
    ck.add_argument("--seed", type=int, default=0)
    ck.add_argument("--max-steps", type=int, default=1_000_000)
    ck.add_argument("--init", type=Path, help="initial-state file (otherwise random)")
    _add_translation_flags(ck)

    st = sub.add_parser("selftest", help="run the built-in corpus")
    st.add_argument("--vlen", type=int, nargs="*", help="override differential VLENs")
    st.add_argument("--seeds", type=int, help="override seed count per kernel")
    st.add_argument("--max-steps", type=int, default=1_000_000)
    return parser


def _options(args: argparse.Namespace) -> RewriteOptions:
    scratch = ("t5", "t6")
    if args.scratch:
        scratch = tuple(r.strip() for r in args.scratch.split(","))
    try:
        return RewriteOptions(
            lenient=args.lenient,
            scratch_regs=scratch,
            expand_whole_register=args.expand_whole_register,
            assume_eew_matches_sew=args.assume_eew_matches_sew,
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _read(path: Path) -> str:
    with open(path, encoding="utf-8", newline="") as fh:
        return fh.read()


def _cmd_translate(args: argparse.Namespace) -> int:
    if args.output is not None and len(args.inputs) != 1:
        raise _UsageError("-o requires exactly one input")
    opts = _options(args)
    failed = False
    reports = []
    for src in args.inputs:
        text = _read(src)
        out, report = translate_text(text, str(src), opts, annotate=not args.no_annotate)
        reports.append(report)
        sys.stderr.write(emit_report(report, "text"))
        if not report.ok:
            failed = True
            if not opts.lenient:
                continue
        if out is None:
            continue
        if args.output == "-":
            sys.stdout.write(out)
        else:
            dest = Path(args.output) if args.output else src.with_name(src.name.removesuffix(".s") + OUTPUT_SUFFIX)
            _atomic_write(dest, out)
    if args.report:
        _atomic_write(args.report, "".join(emit_report(r) + "\n" for r in reports))
    return EXIT_FAILED if failed else EXIT_OK


def _random_inputs(seed: int, mem_size: int) -> InitialState:
    spec = DiffSpec(fills=[(0, min(mem_size, 4096))])
    for reg, lo, hi in (("a0", 0, 64), ("a1", -8, 8)):
        spec.regs[reg] = ("rand", lo, hi)
    for reg, base in (("a2", 0x100), ("a3", 0x600), ("a4", 0xB00)):
        spec.regs[reg] = ("fixed", base)
    return spec.initial_state(seed)


def _cmd_check(args: argparse.Namespace) -> int:
    if args.max_steps <= 0:
        raise _UsageError("--max-steps must be positive")
    base_opts = _options(args)
    status = EXIT_OK
    for src in args.inputs:
        text = _read(src)
        spec_path = src.with_suffix(".diffspec")
        opts = base_opts
        mem_size = MachineConfig().mem_size
        if args.init:
            inputs = parse_initial_state(_read(args.init))
        elif spec_path.exists():
            spec = parse_diffspec(_read(spec_path))
            mem_size = spec.mem_size
            if spec.flags and not any(vars(args)[k] for k in ("lenient", "expand_whole_register",
                                                              "assume_eew_matches_sew", "scratch")):
                opts = options_from_flags(spec.flags)
            inputs = spec.initial_state(args.seed)
        else:
            inputs = _random_inputs(args.seed, mem_size)
        try:
            config = MachineConfig(vlen=args.vlen, mem_size=mem_size)
        except ValueError as exc:
            raise _UsageError(str(exc)) from None
        verdict = differential_check(text, opts, inputs, config, args.max_steps)
        if len(args.inputs) > 1:
            print(f"{src}: {verdict}")
        else:
            print(verdict)
        if not verdict.match:
            status = EXIT_FAILED
    return status


def _cmd_selftest(args: argparse.Namespace) -> int:
    from .corpus import run_corpus

    summary = run_corpus(vlens=tuple(args.vlen) if args.vlen else None, seeds=args.seeds,
                         max_steps=args.max_steps)
    print(summary.describe())
    return EXIT_OK if summary.ok else EXIT_FAILED


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"translate": _cmd_translate, "check": _cmd_check, "selftest": _cmd_selftest}
        return handler[args.command](args)
    except _UsageError as exc:
        print(f"rvv-backport: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, UnicodeDecodeError) as exc:
        print(f"rvv-backport: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # malformed initial-state or diffspec files
        print(f"rvv-backport: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Built-in test corpus: golden translations, rejections and differential kernels.

Layout under ``corpus/``::

    golden/<name>.s   + <name>.expected.s
    reject/<name>.s   + <name>.code
    diff/<name>.s     + <name>.diffspec

Golden and reject inputs may carry a ``# rvv-backport-flags: ...`` comment
listing translation flags for that case.
"""

from __future__ import annotations

import itertools
import random
import re
import shlex
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

from .differential import InitialState, Verdict, differential_check, options_from_flags, parse_diffspec
from .emulator import MachineConfig
from .pipeline import translate_text
from .rewriter import RewriteOptions

CORPUS_DIR = Path(__file__).with_name("corpus")
_FLAGS_RE = re.compile(r"#\s*rvv-backport-flags:(.*)$", re.MULTILINE)


@dataclass(frozen=True)
class CorpusCase:
    name: str
    kind: str  # golden | reject | diff
    path: Path

    @property
    def text(self) -> str:
        return self.path.read_text(encoding="utf-8")

    @property
    def expected(self) -> str:
        suffix = {"golden": ".expected.s", "reject": ".code", "diff": ".diffspec"}[self.kind]
        return self.path.with_name(self.name + suffix).read_text(encoding="utf-8")

    @property
    def options(self) -> RewriteOptions:
        if self.kind == "diff":
            return options_from_flags(parse_diffspec(self.expected).flags)
        m = _FLAGS_RE.search(self.text)
        return options_from_flags(tuple(shlex.split(m.group(1))) if m else ())


def iter_cases(kind: Optional[str] = None, root: Path = CORPUS_DIR) -> Iterator[CorpusCase]:
    kinds = [kind] if kind else ["golden", "reject", "diff"]
    for k in kinds:
        for path in sorted((root / k).glob("*.s")):
            if path.name.endswith((".expected.s", ".v07.s")):
                continue
            yield CorpusCase(path.name[:-2], k, path)


@dataclass
class CorpusSummary:
    passed: int = 0
    failures: list[str] = field(default_factory=list)
    rule_counts: Counter = field(default_factory=Counter)
    codes_seen: set[str] = field(default_factory=set)
    diff_runs: int = 0
    diff_matches: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures

    def describe(self) -> str:
        lines = [
            f"cases passed: {self.passed}, failed: {len(self.failures)}",
            f"differential runs: {self.diff_matches}/{self.diff_runs} match",
        ]
        lines.extend(f"FAIL {f}" for f in self.failures)
        return "\n".join(lines)


def check_golden(case: CorpusCase, summary: CorpusSummary) -> None:
    out, report = translate_text(case.text, case.name, case.options)
    summary.rule_counts.update(report.rule_counts)
    if out == case.expected and report.ok:
        summary.passed += 1
    else:
        summary.failures.append(f"golden {case.name}: output differs from expected")


def check_reject(case: CorpusCase, summary: CorpusSummary) -> None:
    code = case.expected.strip()
    _, report = translate_text(case.text, case.name, case.options)
    codes = {d.code for d in report.errors}
    summary.codes_seen.update(codes)
    if report.status == "failed" and code in codes:
        summary.passed += 1
    else:
        summary.failures.append(f"reject {case.name}: expected {code}, got {sorted(codes) or 'ok'}")


def check_diff(case: CorpusCase, summary: CorpusSummary, vlens=None, seeds=None,
               max_steps: int = 1_000_000) -> None:
    spec = parse_diffspec(case.expected)
    opts = options_from_flags(spec.flags)
    text = case.text
    bad = []
    for vlen in vlens or spec.vlens:
        config = MachineConfig(vlen=vlen, mem_size=spec.mem_size)
        for seed in range(spec.seeds if seeds is None else seeds):
            verdict = differential_check(text, opts, spec.initial_state(seed), config, max_steps)
            summary.diff_runs += 1
            if verdict.match:
                summary.diff_matches += 1
            else:
                bad.append(f"vlen={vlen} seed={seed}: {verdict}")
    if bad:
        summary.failures.append(f"diff {case.name}: {len(bad)} runs failed; first {bad[0]}")
    else:
        summary.passed += 1


def run_corpus(vlens=None, seeds: Optional[int] = None, max_steps: int = 1_000_000,
               root: Path = CORPUS_DIR) -> CorpusSummary:
    summary = CorpusSummary()
    for case in iter_cases(root=root):
        if case.kind == "golden":
            check_golden(case, summary)
        elif case.kind == "reject":
            check_reject(case, summary)
        else:
            check_diff(case, summary, vlens, seeds, max_steps)
    return summary


# --- policy-stripping suite --------------------------------------------------

POLICY_SEWS = (8, 16, 32, 64)
POLICY_LMULS = (1, 2, 4, 8)
POLICY_VARIANTS = ("vsetvli", "keep-vl", "vsetivli")
_BASES = {"a2": 0x0, "a3": 0x800, "a4": 0x1000}
_POLICY_MEM = 0x1800


@dataclass(frozen=True)
class PolicyCase:
    tail: str
    mask: str
    sew: int
    lmul: int
    variant: str
    avl: int

    @property
    def name(self) -> str:
        return f"{self.tail}-{self.mask}-e{self.sew}-m{self.lmul}-{self.variant}-avl{self.avl}"

    def source(self) -> str:
        """Masked add under the policy pair, with vl below VLMAX.

        The destination group is preloaded at VLMAX so tail and masked-off
        elements hold data, and stored back at VLMAX afterwards.
        """
        e, m = f"e{self.sew}", f"m{self.lmul}"
        policy = f"{self.tail}, {self.mask}"
        if self.variant == "vsetvli":
            config = [f"vsetvli t0, a0, {e}, {m}, {policy}"]
        elif self.variant == "vsetivli":
            config = [f"vsetivli t0, {self.avl}, {e}, {m}, {policy}"]
        else:
            config = [f"vsetvli t0, a0, {e}, {m}, tu, mu", f"vsetvli x0, x0, {e}, {m}, {policy}"]
        body = [
            f"vsetvli t2, x0, {e}, {m}, tu, mu",
            f"vle{self.sew}.v v8, (a2)",
            f"vle{self.sew}.v v16, (a3)",
            "vand.vi v24, v16, 1",
            "vmseq.vi v0, v24, 0",
            *config,
            "vadd.vv v8, v8, v16, v0.t",
            "vmv.x.s a5, v8",
            f"vsetvli t2, x0, {e}, {m}, tu, mu",
            f"vse{self.sew}.v v8, (a4)",
        ]
        return "".join(f"    {line}\n" for line in body)

    def inputs(self, seed: int) -> InitialState:
        rng = random.Random(seed)
        state = InitialState(regs={"a0": self.avl, **_BASES})
        state.memory.append((0, rng.randbytes(0x1000)))
        return state


def policy_cases(seed: int = 0, vlen_min: int = 128) -> list[PolicyCase]:
    """Every {ta,tu}x{ma,mu} pair at every (sew, lmul) and configuration form.

    AVL is drawn below the smallest VLMAX so every run leaves a tail.
    """
    rng = random.Random(seed)
    cases = []
    for tail, mask, sew, lmul, variant in itertools.product(
        ("ta", "tu"), ("ma", "mu"), POLICY_SEWS, POLICY_LMULS, POLICY_VARIANTS
    ):
        vlmax = vlen_min // sew * lmul
        avl = rng.randint(1, min(vlmax - 1, 31))
        cases.append(PolicyCase(tail, mask, sew, lmul, variant, avl))
    return cases


def policy_suite(vlens=(128, 256), seeds: int = 2) -> tuple[int, list[tuple[PolicyCase, int, int, Verdict]]]:
    """Run the policy cases differentially; returns (runs, failures)."""
    runs, failures = 0, []
    for case in policy_cases(vlen_min=min(vlens)):
        text = case.source()
        for vlen in vlens:
            config = MachineConfig(vlen=vlen, mem_size=_POLICY_MEM)
            for seed in range(seeds):
                verdict = differential_check(text, RewriteOptions(), case.inputs(seed), config)
                runs += 1
                if not verdict.match:
                    failures.append((case, vlen, seed, verdict))
    return runs, failures

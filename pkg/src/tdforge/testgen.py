"""Coverage-guided test-packet generation.

Branch traces are enumerated depth-first: each realizable trace prefix is
extended outcome-by-outcome (ascending index, so corpora are deterministic),
and at every prefix the solver is asked for packets of each polarity that
apply there. Failing outcomes (a constraint going false, a casetype tag
matching no arm) terminate a path and yield negatives directly; untagged
failures such as running out of input surface as has-failed models whose
trace stops early, so a failure-seeking query is issued at every prefix,
not only at failing leaves. Blocking clauses force distinct models within
one prefix's harvest; cross-prefix repeats are collapsed by byte identity.

Every packet the solver produces is replayed through the reference
interpreter before it is emitted; a label disagreement is an encoder bug
and aborts generation rather than ever mislabeling a packet.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from .dsl import Spec
from .interp import AcceptMode, validate
from .smt import DEFAULT_MAX_PACKET, QuerySpec, build_query
from .solver import DEFAULT_TIMEOUT_SECS, PacketAnswer, solve_for_packet
from .specializer import (
    BranchPoint,
    BranchTrace,
    FirstOrderProgram,
    branch_at,
    replay,
    specialize,
)


class EncoderBugError(Exception):
    """Solver and interpreter disagreed about a generated packet."""


class SolverUnknownBudgetExceeded(Exception):
    """Raised only when callers opt out of partial results."""


@dataclass(frozen=True)
class TestPacket:
    id: str            # first 8 hex digits of sha256(bytes)
    data: bytes
    label: str         # "positive" | "negative"
    trace: BranchTrace
    query_kind: str    # provenance: which query produced it

    @staticmethod
    def make(data: bytes, label: str, trace: BranchTrace,
             query_kind: str) -> "TestPacket":
        return TestPacket(id=packet_id(data), data=data, label=label,
                          trace=trace, query_kind=query_kind)


def packet_id(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:8]


@dataclass(frozen=True)
class GenConfig:
    branch_depth: int = 8
    quota: int = 2               # packets per query site
    max_tests: int = 200
    mode: AcceptMode = AcceptMode.STRICT
    polarity: str = "both"       # "positive" | "negative" | "both"
    unknown_budget: int = 10
    max_packet: int = DEFAULT_MAX_PACKET
    timeout_secs: float = DEFAULT_TIMEOUT_SECS
    solver_command: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.polarity not in ("positive", "negative", "both"):
            raise ValueError(f"bad polarity {self.polarity!r}")
        for name in ("branch_depth", "quota", "max_tests"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def want_positive(self) -> bool:
        return self.polarity in ("positive", "both")

    @property
    def want_negative(self) -> bool:
        return self.polarity in ("negative", "both")


@dataclass
class CoverageEntry:
    branch_id: int
    kind: str
    source: str
    arity: int
    outcomes: dict[int, int] = field(default_factory=dict)  # outcome -> packets

    def to_dict(self) -> dict:
        return {"branch_id": self.branch_id, "kind": self.kind,
                "source": self.source, "arity": self.arity,
                "outcomes": {str(k): v for k, v in sorted(self.outcomes.items())}}


@dataclass
class GenReport:
    packets: list[TestPacket]
    coverage: dict[int, CoverageEntry]
    unknown_count: int = 0
    warning: bool = False            # unknown budget exhausted; corpus partial
    truncated: bool = False          # max-tests reached
    positive_root_unsat: bool = False
    oversized_queries: int = 0

    @property
    def positives(self) -> list[TestPacket]:
        return [p for p in self.packets if p.label == "positive"]

    @property
    def negatives(self) -> list[TestPacket]:
        return [p for p in self.packets if p.label == "negative"]


def _is_failing_outcome(bp: BranchPoint, outcome: int) -> bool:
    if bp.kind == "constraint":
        return outcome == 1
    return outcome == bp.arity - 1   # casetype no-match arm


class _Generator:
    def __init__(self, spec: Spec, cfg: GenConfig):
        self.spec = spec
        self.cfg = cfg
        self.program: FirstOrderProgram = specialize(spec)
        self.packets: list[TestPacket] = []
        self.seen: set[bytes] = set()
        self.coverage: dict[int, CoverageEntry] = {
            bp.branch_id: CoverageEntry(bp.branch_id, bp.kind, bp.source, bp.arity)
            for bp in self.program.branch_points}
        self.unknowns = 0
        self.warning = False
        self.truncated = False
        self.oversized = 0
        self.positive_sat_seen = False
        self.positive_unknown_seen = False

    # -- solving --------------------------------------------------------

    def _solve(self, q: QuerySpec) -> PacketAnswer:
        script = build_query(q, self.program, label=self.spec.entry)
        ans = solve_for_packet(script, command=self.cfg.solver_command,
                               timeout_secs=self.cfg.timeout_secs,
                               max_packet=self.cfg.max_packet)
        if ans.status == "unknown":
            self.unknowns += 1
            if self.unknowns > self.cfg.unknown_budget:
                self.warning = True
        elif ans.status == "oversized":
            self.oversized += 1
        return ans

    def _admit(self, data: bytes, query_kind: str, prefix: BranchTrace) -> bool:
        """Re-validate against the interpreter, check coverage soundness,
        and append; returns False when the packet was a cross-prefix dupe."""
        accepted, outcome = validate(self.spec, data, self.cfg.mode)
        expect_positive = query_kind.startswith("positive")
        if accepted != expect_positive:
            raise EncoderBugError(
                f"solver/interpreter disagreement on {data.hex()}: query "
                f"{query_kind} but interpreter says {outcome.describe()}")
        _, trace = replay(self.program, data, self.cfg.mode)
        if trace[:len(prefix)] != prefix:
            raise EncoderBugError(
                f"coverage unsoundness on {data.hex()}: generated under "
                f"prefix {prefix} but replay trace is {trace}")
        if data in self.seen:
            return False
        self.seen.add(data)
        label = "positive" if accepted else "negative"
        self.packets.append(TestPacket.make(data, label, trace, query_kind))
        for i, o in enumerate(trace):
            bp = branch_at(self.program, trace[:i])
            if bp is not None:
                self.coverage[bp.branch_id].outcomes[o] = \
                    self.coverage[bp.branch_id].outcomes.get(o, 0) + 1
        return True

    def harvest(self, kind: str, prefix: BranchTrace) -> None:
        """Ask for up to `quota` distinct packets of one query kind whose
        trace extends `prefix`; blocking clauses are local to this loop."""
        if self.warning:
            return
        blocked: list[bytes] = []
        emitted = 0
        attempts = 0
        while emitted < self.cfg.quota and attempts < self.cfg.quota * 3:
            if len(self.packets) >= self.cfg.max_tests:
                self.truncated = True
                return
            attempts += 1
            q = QuerySpec(kind=kind, mode=self.cfg.mode, trace_prefix=prefix,
                          min_branch_depth=len(prefix),
                          blocking_set=tuple(blocked), instrumented=True)
            ans = self._solve(q)
            if kind == "positive":
                if ans.status == "sat":
                    self.positive_sat_seen = True
                elif ans.status == "unknown":
                    self.positive_unknown_seen = True
            if ans.status != "sat" or self.warning:
                return
            blocked.append(ans.packet)
            if self._admit(ans.packet, kind, prefix):
                emitted += 1

    # -- DFS over prefixes ----------------------------------------------

    def visit(self, prefix: BranchTrace) -> None:
        if self.warning or self.truncated:
            return
        if self.cfg.want_negative:
            # failures past this prefix's branches: truncation and any
            # failing branch deeper than the explored depth
            self.harvest("negative-fail", prefix)
        bp = branch_at(self.program, prefix)
        at_limit = len(prefix) >= self.cfg.branch_depth
        if bp is None or at_limit:
            if self.cfg.want_positive:
                self.harvest("positive", prefix)
            if self.cfg.want_negative and self.cfg.mode is AcceptMode.STRICT:
                self.harvest("negative-trailing", prefix)
            return
        for outcome in range(bp.arity):
            child = prefix + (outcome,)
            if _is_failing_outcome(bp, outcome):
                if self.cfg.want_negative:
                    self.harvest("negative-fail", child)
            else:
                self.visit(child)

    def run(self) -> GenReport:
        self.visit(())
        root_unsat = (self.cfg.want_positive and not self.positive_sat_seen
                      and not self.positive_unknown_seen)
        return GenReport(packets=self.packets, coverage=self.coverage,
                         unknown_count=self.unknowns, warning=self.warning,
                         truncated=self.truncated,
                         positive_root_unsat=root_unsat,
                         oversized_queries=self.oversized)


def gen_tests(spec: Spec, cfg: GenConfig) -> GenReport:
    """Generate a labeled, interpreter-verified corpus for a checked spec."""
    return _Generator(spec, cfg).run()


def dedupe(packets: Sequence[TestPacket]) -> list[TestPacket]:
    """Collapse byte-identical packets, keeping the first provenance."""
    seen: set[bytes] = set()
    out: list[TestPacket] = []
    for p in packets:
        if p.data not in seen:
            seen.add(p.data)
            out.append(p)
    return out


# ---------------------------------------------------------------------------
# Corpus on disk
# ---------------------------------------------------------------------------


def spec_sha256(spec_text: str) -> str:
    return hashlib.sha256(spec_text.encode()).hexdigest()


def write_corpus(out_dir: Path, packets: Sequence[TestPacket],
                 spec_text: str, seed_note: str = "") -> Path:
    """Write one .bin per packet plus manifest.json; returns manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = spec_sha256(spec_text)
    records = []
    for p in packets:
        fname = f"{p.label}-{p.id}.bin"
        (out_dir / fname).write_bytes(p.data)
        rec = {"id": p.id, "file": fname, "label": p.label,
               "hex": p.data.hex(), "trace": list(p.trace),
               "query_kind": p.query_kind, "spec_sha256": digest}
        if seed_note:
            rec["seed_note"] = seed_note
        records.append(rec)
    records.sort(key=lambda r: (r["label"], r["id"]))
    manifest = out_dir / "manifest.json"
    manifest.write_text(json.dumps(records, indent=2) + "\n")
    return manifest


def load_manifest(manifest_path: Path) -> list[TestPacket]:
    manifest_path = Path(manifest_path)
    records = json.loads(manifest_path.read_text())
    out = []
    for rec in records:
        data = bytes.fromhex(rec["hex"])
        out.append(TestPacket(id=rec["id"], data=data, label=rec["label"],
                              trace=tuple(rec.get("trace", ())),
                              query_kind=rec.get("query_kind", "")))
    return out

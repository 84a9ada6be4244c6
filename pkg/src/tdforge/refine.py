"""Candidate-refinement loop.

Maintains a set of candidate specs plus growing sets of positive and
negative packets, and repeatedly (1) pulls the next candidate from a
pluggable provider, (2) augments the packet sets by running test
generation over the surviving candidates and differential queries between
every pair, labeling each new packet with a pluggable labeler, and
(3) prunes every candidate that disagrees with any labeled packet. The
nondeterministic choice in the underlying algorithm is fixed as this
generate -> augment -> prune round schedule so runs are reproducible; the
state log of syntax errors and failing tests is append-only and is the
document handed to external providers.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

from .diffcheck import diff_one_direction
from .dsl import Spec
from .frontend import CheckFailure, check
from .interp import AcceptMode, validate
from .solver import DEFAULT_TIMEOUT_SECS
from .testgen import GenConfig, gen_tests

DEFAULT_MAX_ROUNDS = 15


class ProviderFailure(Exception):
    pass


class LabelerFailure(Exception):
    pass


class SeedInconsistent(Exception):
    """A seed packet's given label disagrees with the labeler."""


# ---------------------------------------------------------------------------
# Pluggable interfaces
# ---------------------------------------------------------------------------


class CandidateProvider(Protocol):
    def next_candidate(self, state_log: list[dict]) -> Optional[tuple[str, str]]:
        """Return (name, spec text) or None when exhausted."""


class Labeler(Protocol):
    def label(self, packet: bytes) -> str:
        """Return "positive" or "negative"; must be total and deterministic."""


class DirectoryCandidateProvider:
    """Yields the .3d files of a directory, one per call, in name order."""

    def __init__(self, directory: Path):
        self.files = sorted(Path(directory).glob("*.3d"))
        self.index = 0

    def next_candidate(self, state_log: list[dict]) -> Optional[tuple[str, str]]:
        if self.index >= len(self.files):
            return None
        f = self.files[self.index]
        self.index += 1
        try:
            return f.stem, f.read_text()
        except OSError as e:
            raise ProviderFailure(f"cannot read {f}: {e}") from e


class ExternalCommandProvider:
    """Spawns a command with the state log (JSON) on stdin and reads one
    candidate spec from stdout; empty output means exhausted."""

    def __init__(self, command: Sequence[str], timeout_secs: float = 300.0):
        self.command = list(command)
        self.timeout_secs = timeout_secs
        self.counter = 0

    def next_candidate(self, state_log: list[dict]) -> Optional[tuple[str, str]]:
        payload = json.dumps(state_log).encode()
        try:
            proc = subprocess.run(self.command, input=payload,
                                  capture_output=True,
                                  timeout=self.timeout_secs)
        except (OSError, subprocess.TimeoutExpired) as e:
            raise ProviderFailure(f"provider command failed: {e}") from e
        if proc.returncode != 0:
            raise ProviderFailure(
                f"provider exited {proc.returncode}: "
                f"{proc.stderr.decode(errors='replace').strip()}")
        text = proc.stdout.decode(errors="replace")
        if not text.strip():
            return None
        self.counter += 1
        return f"candidate-{self.counter}", text


class GoldenSpecLabeler:
    """Labels by executing a trusted spec's interpreter."""

    def __init__(self, spec: Spec, mode: AcceptMode = AcceptMode.STRICT):
        self.spec = spec
        self.mode = mode

    def label(self, packet: bytes) -> str:
        accepted, _ = validate(self.spec, packet, self.mode)
        return "positive" if accepted else "negative"


class ExternalCommandLabeler:
    """Spawns a command with the packet bytes on stdin; exit code 0 means
    positive, any other exit code negative."""

    def __init__(self, command: Sequence[str], timeout_secs: float = 60.0):
        self.command = list(command)
        self.timeout_secs = timeout_secs

    def label(self, packet: bytes) -> str:
        try:
            proc = subprocess.run(self.command, input=packet,
                                  capture_output=True,
                                  timeout=self.timeout_secs)
        except (OSError, subprocess.TimeoutExpired) as e:
            raise LabelerFailure(f"labeler command failed: {e}") from e
        return "positive" if proc.returncode == 0 else "negative"


# ---------------------------------------------------------------------------
# Loop state
# ---------------------------------------------------------------------------


@dataclass
class Candidate:
    name: str
    text: str
    spec: Spec


@dataclass
class LoopResult:
    candidates: list[Candidate]
    i_plus: list[bytes]
    i_minus: list[bytes]
    state_log: list[dict]
    rounds: int = 0

    def consistent(self) -> bool:
        """The loop's postcondition: every surviving candidate accepts every
        positive and rejects every negative."""
        for cand in self.candidates:
            for p in self.i_plus:
                if not validate(cand.spec, p, self.mode_of(cand))[0]:
                    return False
            for n in self.i_minus:
                if validate(cand.spec, n, self.mode_of(cand))[0]:
                    return False
        return True

    # the mode is uniform across the run; stored on the result for checking
    mode: AcceptMode = AcceptMode.STRICT

    def mode_of(self, cand: Candidate) -> AcceptMode:
        return self.mode


def label_inputs(packets: Sequence[bytes], labeler: Labeler,
                 i_plus: list[bytes], i_minus: list[bytes],
                 state_log: Optional[list[dict]] = None
                 ) -> tuple[list[bytes], list[bytes]]:
    """Partition new packets by labeler verdict, skipping byte-identical
    duplicates of the existing sets. A labeler failure skips that packet
    with a warning record; it never aborts the loop."""
    known = set(i_plus) | set(i_minus)
    add_pos: list[bytes] = []
    add_neg: list[bytes] = []
    for p in packets:
        if p in known:
            continue
        try:
            verdict = labeler.label(p)
        except LabelerFailure as e:
            if state_log is not None:
                state_log.append({"kind": "labeler-warning",
                                  "packet": p.hex(), "error": str(e)})
            continue
        known.add(p)
        (add_pos if verdict == "positive" else add_neg).append(p)
    i_plus.extend(add_pos)
    i_minus.extend(add_neg)
    return add_pos, add_neg


def run_loop(provider: CandidateProvider, labeler: Labeler,
             seeds_pos: Sequence[bytes] = (), seeds_neg: Sequence[bytes] = (),
             mode: AcceptMode = AcceptMode.STRICT,
             max_rounds: int = DEFAULT_MAX_ROUNDS,
             gen_config: Optional[GenConfig] = None,
             max_witnesses: int = 2,
             solver_command: Optional[Sequence[str]] = None,
             timeout_secs: float = DEFAULT_TIMEOUT_SECS) -> LoopResult:
    """Run generate -> augment -> prune rounds until the provider is
    exhausted (plus one final augment+prune pass) or max_rounds is hit."""
    if gen_config is None:
        gen_config = GenConfig(branch_depth=4, quota=1, max_tests=24,
                               mode=mode, timeout_secs=timeout_secs,
                               solver_command=tuple(solver_command)
                               if solver_command else None)
    # seeds must agree with the labeler before anything else runs
    for p in seeds_pos:
        if labeler.label(p) != "positive":
            raise SeedInconsistent(f"positive seed {p.hex()} labeled negative")
    for p in seeds_neg:
        if labeler.label(p) != "negative":
            raise SeedInconsistent(f"negative seed {p.hex()} labeled positive")

    i_plus: list[bytes] = list(dict.fromkeys(seeds_pos))
    i_minus: list[bytes] = list(dict.fromkeys(seeds_neg))
    state_log: list[dict] = []
    candidates: list[Candidate] = []
    corpus_cache: dict[str, list[bytes]] = {}     # spec hash -> packets
    diff_cache: dict[tuple[str, str], list[bytes]] = {}
    exhausted = False
    rounds = 0

    def spec_hash(text: str) -> str:
        return hashlib.sha256(text.encode()).hexdigest()

    def augment() -> list[bytes]:
        fresh: list[bytes] = []
        for cand in candidates:
            h = spec_hash(cand.text)
            if h not in corpus_cache:
                report = gen_tests(cand.spec, gen_config)
                corpus_cache[h] = [p.data for p in report.packets]
            fresh.extend(corpus_cache[h])
        for i in range(len(candidates)):
            for j in range(i + 1, len(candidates)):
                a, b = candidates[i], candidates[j]
                key = tuple(sorted((spec_hash(a.text), spec_hash(b.text))))
                if key not in diff_cache:
                    ws: list[bytes] = []
                    for first, second in ((a, b), (b, a)):
                        d = diff_one_direction(
                            first.spec, second.spec, mode,
                            max_witnesses=max_witnesses,
                            solver_command=solver_command,
                            timeout_secs=timeout_secs)
                        ws.extend(w.data for w in d.witnesses)
                    diff_cache[key] = ws
                fresh.extend(diff_cache[key])
        return fresh

    def prune() -> None:
        survivors: list[Candidate] = []
        for cand in candidates:
            bad = None
            for p in i_plus:
                if not validate(cand.spec, p, mode)[0]:
                    bad = (p, "positive", "negative")
                    break
            if bad is None:
                for n in i_minus:
                    if validate(cand.spec, n, mode)[0]:
                        bad = (n, "negative", "positive")
                        break
            if bad is None:
                survivors.append(cand)
            else:
                packet, expected, got = bad
                state_log.append({"kind": "failing-test",
                                  "candidate": cand.name,
                                  "packet": packet.hex(),
                                  "expected": expected, "got": got})
        candidates[:] = survivors

    while rounds < max_rounds:
        rounds += 1
        # generate
        if not exhausted:
            nxt = provider.next_candidate(state_log)
            if nxt is None:
                exhausted = True
            else:
                name, text = nxt
                try:
                    spec = check(text)
                except CheckFailure as e:
                    state_log.append({
                        "kind": "syntax-error", "candidate": name,
                        "diagnostics": [d.to_dict() for d in e.diagnostics]})
                    continue
                candidates.append(Candidate(name, text, spec))
        # augment + prune
        label_inputs(augment(), labeler, i_plus, i_minus, state_log)
        prune()
        if exhausted:
            break

    return LoopResult(candidates=candidates, i_plus=i_plus, i_minus=i_minus,
                      state_log=state_log, rounds=rounds, mode=mode)


def write_state_log(path: Path, state_log: Sequence[dict]) -> None:
    """Line-delimited records, one JSON object per line."""
    with open(path, "w") as f:
        for rec in state_log:
            f.write(json.dumps(rec) + "\n")

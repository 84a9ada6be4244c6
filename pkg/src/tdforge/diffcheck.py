"""Differential comparison and equivalence of two specs.

One direction asks a single satisfiability question: is there a packet the
first spec accepts and the second rejects? Both encoded programs share the
same Input function and initial state, so a model is one concrete packet
fed to both. Unsatisfiability in both directions proves the two specs
accept exactly the same packets (in the chosen acceptance mode).

Every witness is re-validated through the reference interpreter on both
specs before it is reported; a witness that fails to distinguish them is a
hard internal error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .dsl import Spec
from .interp import AcceptMode, validate
from .smt import QuerySpec, build_query
from .solver import DEFAULT_TIMEOUT_SECS, solve_for_packet
from .specializer import specialize
from .testgen import TestPacket

DEFAULT_MAX_WITNESSES = 5


class WitnessInvalid(Exception):
    """A solver witness failed interpreter re-validation: encoder bug."""


@dataclass(frozen=True)
class DirectionResult:
    """Verdict for 'accepted by `first`, rejected by `second`'.

    status "sat" with no witnesses means the direction is satisfiable but
    every model exceeds the packet-size cap (reason explains).
    """

    status: str                       # "sat" | "unsat" | "unknown"
    witnesses: tuple[TestPacket, ...] = ()
    reason: str = ""


@dataclass(frozen=True)
class DiffResult:
    verdict: str                      # Equivalent | LeftPermissive |
    #                                   RightPermissive | Incomparable |
    #                                   Inconclusive
    left: DirectionResult = DirectionResult("unsat")   # left ⊃ right models
    right: DirectionResult = DirectionResult("unsat")  # right ⊃ left models

    @property
    def exit_code(self) -> int:
        return {"Equivalent": 0, "LeftPermissive": 10, "RightPermissive": 11,
                "Incomparable": 12, "Inconclusive": 20}[self.verdict]


def diff_one_direction(accepting: Spec, rejecting: Spec, mode: AcceptMode,
                       max_witnesses: int = DEFAULT_MAX_WITNESSES,
                       solver_command: Optional[Sequence[str]] = None,
                       timeout_secs: float = DEFAULT_TIMEOUT_SECS
                       ) -> DirectionResult:
    """Find up to `max_witnesses` packets accepted by `accepting` and
    rejected by `rejecting`, or prove none exist."""
    prog_a = specialize(accepting)
    prog_r = specialize(rejecting)
    witnesses: list[TestPacket] = []
    blocked: list[bytes] = []
    oversized_reason = ""
    while len(witnesses) < max_witnesses:
        q = QuerySpec(kind="diff", mode=mode, blocking_set=tuple(blocked),
                      instrumented=False)
        script = build_query(q, prog_a, label=accepting.entry,
                             program2=prog_r, label2=rejecting.entry)
        ans = solve_for_packet(script, command=solver_command,
                               timeout_secs=timeout_secs)
        if ans.status == "unsat":
            break
        if ans.status == "unknown":
            if witnesses:
                break
            return DirectionResult("unknown", reason=ans.reason)
        if ans.status == "oversized":
            oversized_reason = ans.reason
            break
        packet = ans.packet
        acc_ok, acc_out = validate(accepting, packet, mode)
        rej_ok, rej_out = validate(rejecting, packet, mode)
        if not acc_ok or rej_ok:
            raise WitnessInvalid(
                f"witness {packet.hex()} does not distinguish the specs: "
                f"accepting side said {acc_out.describe()}, rejecting side "
                f"said {rej_out.describe()}")
        witnesses.append(TestPacket.make(packet, "positive", (), "diff"))
        blocked.append(packet)
    if witnesses:
        return DirectionResult("sat", tuple(witnesses))
    if oversized_reason:
        return DirectionResult("sat", (), oversized_reason)
    return DirectionResult("unsat")


def equiv(left: Spec, right: Spec, mode: AcceptMode,
          max_witnesses: int = DEFAULT_MAX_WITNESSES,
          solver_command: Optional[Sequence[str]] = None,
          timeout_secs: float = DEFAULT_TIMEOUT_SECS) -> DiffResult:
    """Compare both directions and classify the relationship."""
    lr = diff_one_direction(left, right, mode, max_witnesses,
                            solver_command, timeout_secs)
    rl = diff_one_direction(right, left, mode, max_witnesses,
                            solver_command, timeout_secs)
    if lr.status == "unknown" or rl.status == "unknown":
        verdict = "Inconclusive"
    elif lr.status == "unsat" and rl.status == "unsat":
        verdict = "Equivalent"
    elif lr.status == "sat" and rl.status == "unsat":
        verdict = "LeftPermissive"
    elif lr.status == "unsat" and rl.status == "sat":
        verdict = "RightPermissive"
    else:
        verdict = "Incomparable"
    return DiffResult(verdict=verdict, left=lr, right=rl)


def witness_report(left: Spec, right: Spec, packet: bytes,
                   mode: AcceptMode) -> str:
    """Localization aid: replay a witness on both specs and show where the
    two parses diverge."""
    _, lout = validate(left, packet, mode)
    _, rout = validate(right, packet, mode)
    hexdump = " ".join(f"{b:02x}" for b in packet)
    return (f"packet: {hexdump or '(empty)'}\n"
            f"  left  ({left.entry}): {lout.describe()}\n"
            f"  right ({right.entry}): {rout.describe()}")

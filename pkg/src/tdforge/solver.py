"""Solver driver: runs SMT-LIB2 scripts through an external subprocess.

The solver contract is deliberately thin so any SMT-LIB2-conformant solver
can be swapped in: the command receives one script on stdin and must write
its answer lines (sat/unsat/unknown, eval results) to stdout. The command
comes from, in order: an explicit argument, the TDFORGE_SOLVER environment
variable, or the bundled Z3 adapter (`node z3_stdin.js`, which requires a
global `npm install -g z3-solver`).

Timeouts kill the subprocess and surface as an `unknown` verdict with a
reason, never as a hang or an orphaned child.
"""

from __future__ import annotations

import os
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .smt import SmtScript, parse_model

DEFAULT_TIMEOUT_SECS = 30.0
SOLVER_ENV_VAR = "TDFORGE_SOLVER"

_BUNDLED_ADAPTER = Path(__file__).with_name("z3_stdin.js")


class SolverFailure(Exception):
    """The solver process crashed or produced unusable output."""


@dataclass(frozen=True)
class SolverResult:
    """Outcome of one solver invocation.

    status: "sat" | "unsat" | "unknown" | "crash"
    answers: stdout lines after the first status line (eval results)
    reason: detail for unknown/crash (timeout, stderr snippet, ...)
    """

    status: str
    answers: tuple[str, ...] = ()
    reason: str = ""

    @property
    def is_sat(self) -> bool:
        return self.status == "sat"


def default_command() -> list[str]:
    env = os.environ.get(SOLVER_ENV_VAR)
    if env:
        return shlex.split(env)
    return ["node", str(_BUNDLED_ADAPTER)]


def resolve_command(command: Optional[Sequence[str]] = None) -> list[str]:
    if command:
        return list(command)
    return default_command()


def run_script(script: str, command: Optional[Sequence[str]] = None,
               timeout_secs: float = DEFAULT_TIMEOUT_SECS
               ) -> tuple[str, list[str], str]:
    """Feed a script to the solver. Returns (process_status, stdout lines,
    stderr text); process_status is "ok", "timeout", or "crash"."""
    cmd = resolve_command(command)
    try:
        proc = subprocess.run(
            cmd, input=script.encode(), capture_output=True,
            timeout=timeout_secs)
    except subprocess.TimeoutExpired:
        # subprocess.run kills and reaps the child before raising
        return "timeout", [], f"solver exceeded {timeout_secs}s"
    except OSError as e:
        return "crash", [], f"could not launch solver {cmd[0]!r}: {e}"
    stdout = proc.stdout.decode(errors="replace")
    stderr = proc.stderr.decode(errors="replace")
    lines = [ln.strip() for ln in stdout.splitlines() if ln.strip()]
    if proc.returncode != 0:
        return "crash", lines, stderr.strip() or f"exit code {proc.returncode}"
    return "ok", lines, stderr


def run_solver(script: str, command: Optional[Sequence[str]] = None,
               timeout_secs: float = DEFAULT_TIMEOUT_SECS) -> SolverResult:
    """Run one single-query script and classify the first status line."""
    status, lines, err = run_script(script, command, timeout_secs)
    if status == "timeout":
        return SolverResult("unknown", reason="timeout")
    if status == "crash":
        return SolverResult("crash", tuple(lines), err)
    for i, line in enumerate(lines):
        if line in ("sat", "unsat", "unknown"):
            reason = "solver answered unknown" if line == "unknown" else ""
            return SolverResult(line, tuple(lines[i + 1:]), reason)
        if line.startswith("(error"):
            return SolverResult("crash", tuple(lines), line)
    return SolverResult("crash", tuple(lines),
                        "no sat/unsat/unknown line in solver output")


def run_checksat_batch(script: str, expected: int,
                       command: Optional[Sequence[str]] = None,
                       timeout_secs: float = DEFAULT_TIMEOUT_SECS) -> list[str]:
    """Run a script containing `expected` check-sat commands (push/pop
    sections) and return the verdict for each, in order."""
    status, lines, err = run_script(script, command, timeout_secs)
    if status != "ok":
        raise SolverFailure(f"batch solver run failed ({status}): {err}")
    verdicts = [ln for ln in lines if ln in ("sat", "unsat", "unknown")]
    if len(verdicts) != expected:
        raise SolverFailure(
            f"expected {expected} check-sat answers, got {len(verdicts)}")
    return verdicts


@dataclass(frozen=True)
class PacketAnswer:
    """Result of reifying a model into a concrete packet.

    status "oversized" means models exist but only above the packet-size
    cap: the query is satisfiable yet no writable packet was produced.
    """

    status: str                     # "sat" | "unsat" | "unknown" | "oversized"
    packet: Optional[bytes] = None  # set iff status == "sat"
    reason: str = ""


def solve_for_packet(script: SmtScript,
                     command: Optional[Sequence[str]] = None,
                     timeout_secs: float = DEFAULT_TIMEOUT_SECS,
                     max_packet: Optional[int] = None) -> PacketAnswer:
    """Two-phase model extraction: ask for the input size, then pin it and
    read the bytes. Phase one searches under a ladder of size bounds so the
    solver favors small, reifiable packets; the logic itself stays
    unbounded, and a query satisfiable only above the cap is reported as
    `oversized`, never truncated. The second phase must stay satisfiable;
    anything else indicates a solver fault and is raised, not mislabeled."""
    from .smt import DEFAULT_MAX_PACKET

    cap = DEFAULT_MAX_PACKET if max_packet is None else max_packet
    first = min(max(16, script.min_size_hint + 8), cap)
    ladder = [first] if first == cap else [first, cap]
    r1 = None
    for bound in ladder:
        r1 = run_solver(script.phase1(bound), command, timeout_secs)
        if r1.status == "sat":
            break
        if r1.status == "unknown":
            return PacketAnswer("unknown", reason=r1.reason or "unknown")
        if r1.status == "crash":
            raise SolverFailure(f"solver crashed: {r1.reason}")
    if r1.status == "unsat":
        # nothing within the cap; check whether oversized models exist
        r0 = run_solver(script.phase1(), command, timeout_secs)
        if r0.status == "unsat":
            return PacketAnswer("unsat")
        if r0.status == "sat":
            return PacketAnswer(
                "oversized",
                reason=f"satisfiable only above the {cap}-byte packet cap")
        if r0.status == "crash":
            raise SolverFailure(f"solver crashed: {r0.reason}")
        return PacketAnswer("unknown", reason=r0.reason or "unknown")
    size, _ = parse_model(list(r1.answers), max_packet=cap)
    r2 = run_solver(script.phase2(size), command, timeout_secs)
    if r2.status == "unknown":
        return PacketAnswer("unknown", reason=r2.reason or "unknown")
    if r2.status != "sat":
        raise SolverFailure(
            f"model reification phase expected sat, got {r2.status}: {r2.reason}")
    _, data = parse_model(list(r2.answers), expected_bytes=size, max_packet=cap)
    return PacketAnswer("sat", packet=data)

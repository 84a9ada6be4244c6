"""Solver driver: process lifecycle, verdict classification, extraction."""

import os
import subprocess
import sys

import pytest

from tdforge.frontend import check
from tdforge.interp import AcceptMode, validate
from tdforge.smt import QuerySpec, build_query
from tdforge.solver import (
    SolverFailure,
    default_command,
    resolve_command,
    run_checksat_batch,
    run_solver,
    solve_for_packet,
)
from tdforge.specializer import specialize

from conftest import ALWAYS_FAIL_SRC, MESSAGE_SRC


def _solver_available() -> bool:
    try:
        return run_solver("(check-sat)", timeout_secs=60).status == "sat"
    except Exception:
        return False


needs_solver = pytest.mark.skipif(
    not _solver_available(), reason="no working SMT solver on this machine")

# a "solver" that answers instantly, for classification tests
FAKE = [sys.executable, "-c", "import sys; sys.stdin.read(); print('{}')"]


def fake(answer: str) -> list[str]:
    return [FAKE[0], "-c", FAKE[2].format(answer)]


class TestClassification:
    @needs_solver
    def test_trivial_sat(self):
        assert run_solver("(check-sat)").status == "sat"

    @needs_solver
    def test_trivial_unsat(self):
        r = run_solver("(assert (= 1 2)) (check-sat)")
        assert r.status == "unsat"

    @needs_solver
    def test_answers_follow_verdict(self):
        r = run_solver("(declare-const x Int) (assert (= x 7)) "
                       "(check-sat) (eval x)")
        assert r.status == "sat" and r.answers == ("7",)

    def test_timeout_is_unknown(self):
        sleeper = [sys.executable, "-c",
                   "import sys,time; sys.stdin.read(); time.sleep(30)"]
        r = run_solver("(check-sat)", command=sleeper, timeout_secs=0.2)
        assert r.status == "unknown" and "timeout" in r.reason

    def test_missing_command_is_crash(self):
        r = run_solver("(check-sat)", command=["/no/such/solver-xyz"])
        assert r.status == "crash" and "launch" in r.reason

    def test_no_verdict_line_is_crash(self):
        r = run_solver("(check-sat)", command=["cat"])
        assert r.status == "crash"
        assert "no sat/unsat/unknown" in r.reason

    def test_nonzero_exit_is_crash(self):
        boom = [sys.executable, "-c", "import sys; sys.exit(3)"]
        r = run_solver("(check-sat)", command=boom)
        assert r.status == "crash"

    def test_solver_error_line_is_crash(self):
        r = run_solver("x", command=fake('(error "line 1: oops")'))
        assert r.status == "crash" and "oops" in r.reason

    def test_unknown_verdict_passthrough(self):
        r = run_solver("x", command=fake("unknown"))
        assert r.status == "unknown" and r.reason


class TestCommandResolution:
    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("TDFORGE_SOLVER", "myz3 --flag 'a b'")
        assert default_command() == ["myz3", "--flag", "a b"]

    def test_bundled_adapter_is_default(self, monkeypatch):
        monkeypatch.delenv("TDFORGE_SOLVER", raising=False)
        cmd = default_command()
        assert cmd[0] == "node" and cmd[1].endswith("z3_stdin.js")
        assert os.path.exists(cmd[1])

    def test_explicit_command_wins(self, monkeypatch):
        monkeypatch.setenv("TDFORGE_SOLVER", "ignored")
        assert resolve_command(["a", "b"]) == ["a", "b"]


class TestBatch:
    @needs_solver
    def test_push_pop_sections(self):
        script = ("(declare-const x Int)\n"
                  "(push) (assert (= x 1)) (check-sat) (pop)\n"
                  "(push) (assert (and (= x 1) (= x 2))) (check-sat) (pop)\n"
                  "(push) (assert (> x 100)) (check-sat) (pop)\n")
        assert run_checksat_batch(script, 3) == ["sat", "unsat", "sat"]

    def test_wrong_count_raises(self):
        with pytest.raises(SolverFailure):
            run_checksat_batch("x", 2, command=fake("sat"))

    def test_crash_raises(self):
        with pytest.raises(SolverFailure):
            run_checksat_batch("x", 1, command=["/no/such/solver-xyz"])


class TestSolveForPacket:
    @needs_solver
    def test_message_positive_packet(self):
        spec = check(MESSAGE_SRC)
        script = build_query(
            QuerySpec(kind="positive", mode=AcceptMode.STRICT),
            specialize(spec), label="message")
        ans = solve_for_packet(script)
        assert ans.status == "sat" and len(ans.packet) == 2
        assert validate(spec, ans.packet)[0]

    @needs_solver
    def test_unsatisfiable_query(self):
        script = build_query(
            QuerySpec(kind="positive", mode=AcceptMode.STRICT),
            specialize(check(ALWAYS_FAIL_SRC)), label="never")
        assert solve_for_packet(script).status == "unsat"

    @needs_solver
    def test_blocking_set_excludes_packet(self):
        spec = check(MESSAGE_SRC)
        prog = specialize(spec)
        q = QuerySpec(kind="positive", mode=AcceptMode.STRICT)
        first = solve_for_packet(
            build_query(q, prog, label="message")).packet
        q2 = QuerySpec(kind="positive", mode=AcceptMode.STRICT,
                       blocking_set=(first,))
        second = solve_for_packet(
            build_query(q2, prog, label="message")).packet
        assert second is not None and second != first
        assert validate(spec, second)[0]

    def test_timeout_surfaces_as_unknown(self):
        script = build_query(
            QuerySpec(kind="positive", mode=AcceptMode.STRICT),
            specialize(check(MESSAGE_SRC)), label="message")
        sleeper = [sys.executable, "-c",
                   "import sys,time; sys.stdin.read(); time.sleep(30)"]
        ans = solve_for_packet(script, command=sleeper, timeout_secs=0.2)
        assert ans.status == "unknown" and "timeout" in ans.reason

    def test_crash_raises(self):
        script = build_query(
            QuerySpec(kind="positive", mode=AcceptMode.STRICT),
            specialize(check(MESSAGE_SRC)), label="message")
        with pytest.raises(SolverFailure):
            solve_for_packet(script, command=["/no/such/solver-xyz"])


class TestProcessHygiene:
    def test_many_invocations_leave_no_zombies(self):
        """A long generation run makes hundreds of solver calls; none may
        leave a defunct child behind."""
        quick = [sys.executable, "-c", "import sys; sys.stdin.read(); print('sat')"]
        for _ in range(1000):
            assert run_solver("(check-sat)", command=quick).status == "sat"
        out = subprocess.run(
            ["ps", "--ppid", str(os.getpid()), "-o", "stat="],
            capture_output=True, text=True).stdout
        assert "Z" not in out, f"zombie children present:\n{out}"

    def test_timeouts_leave_no_zombies(self):
        sleeper = [sys.executable, "-c",
                   "import sys,time; sys.stdin.read(); time.sleep(30)"]
        for _ in range(5):
            run_solver("(check-sat)", command=sleeper, timeout_secs=0.1)
        out = subprocess.run(
            ["ps", "--ppid", str(os.getpid()), "-o", "stat="],
            capture_output=True, text=True).stdout
        assert "Z" not in out, f"zombie children present:\n{out}"

"""Command-line interface: exit codes, output shapes, error handling."""

import json

import pytest
from click.testing import CliRunner

from tdforge.cli import main

from conftest import MESSAGE_LOOSE_SRC, MESSAGE_RENAMED_SRC, MESSAGE_SRC


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def ws(tmp_path):
    """A workspace with the common fixtures on disk."""
    (tmp_path / "message.3d").write_text(MESSAGE_SRC)
    (tmp_path / "renamed.3d").write_text(MESSAGE_RENAMED_SRC)
    (tmp_path / "loose.3d").write_text(MESSAGE_LOOSE_SRC)
    (tmp_path / "bad.3d").write_text("typedef struct {")
    (tmp_path / "ok.bin").write_bytes(b"\x2b\x00")
    (tmp_path / "rej.bin").write_bytes(b"\x2a\x00")
    return tmp_path


class TestCheck:
    def test_ok(self, runner, ws):
        r = runner.invoke(main, ["check", str(ws / "message.3d")])
        assert r.exit_code == 0
        assert "entry type 'message'" in r.output

    def test_rejection_renders_diagnostics(self, runner, ws):
        r = runner.invoke(main, ["check", str(ws / "bad.3d")])
        assert r.exit_code == 1
        assert "SYN" in r.output and "bad.3d:" in r.output

    def test_missing_file_is_io_error(self, runner, ws):
        r = runner.invoke(main, ["check", str(ws / "nope.3d")])
        assert r.exit_code == 3

    def test_usage_error(self, runner):
        r = runner.invoke(main, ["check"])
        assert r.exit_code == 2


class TestRun:
    def test_accepted(self, runner, ws):
        r = runner.invoke(main, ["run", str(ws / "message.3d"),
                                 str(ws / "ok.bin")])
        assert r.exit_code == 0 and "Success" in r.output

    def test_rejected_names_field_and_offset(self, runner, ws):
        r = runner.invoke(main, ["run", str(ws / "message.3d"),
                                 str(ws / "rej.bin")])
        assert r.exit_code == 1
        assert "first" in r.output and "offset 1" in r.output

    def test_prefix_mode(self, runner, ws):
        trailing = ws / "trailing.bin"
        trailing.write_bytes(b"\x2b\x00\x99")
        strict = runner.invoke(main, ["run", str(ws / "message.3d"),
                                      str(trailing)])
        prefix = runner.invoke(main, ["--mode", "prefix", "run",
                                      str(ws / "message.3d"), str(trailing)])
        assert strict.exit_code == 1 and prefix.exit_code == 0


class TestDumpSmt:
    def test_contains_golden_fragments(self, runner, ws):
        r = runner.invoke(main, ["dump-smt", str(ws / "message.3d")])
        assert r.exit_code == 0
        assert "(declare-fun Input (Int) Int)" in r.output
        assert "(> (return-value s1) 42)" in r.output
        assert "(check-sat)" in r.output

    def test_coverage_flag(self, runner, ws):
        r = runner.invoke(main, ["dump-smt", "--coverage",
                                 str(ws / "message.3d")])
        assert "(declare-fun branch-trace (Int) Int)" in r.output


class TestGen:
    def test_writes_manifest(self, runner, ws):
        out = ws / "corpus"
        r = runner.invoke(main, ["--seed-note", "note1", "gen",
                                 str(ws / "message.3d"), "--depth", "1",
                                 "--quota", "1", "--out", str(out)])
        assert r.exit_code == 0, r.output
        records = json.loads((out / "manifest.json").read_text())
        assert records and all(r_["seed_note"] == "note1" for r_ in records)
        assert "coverage:" in r.output

    def test_solver_trouble_exits_20(self, runner, ws):
        r = runner.invoke(main, ["--timeout-secs", "0.001", "gen",
                                 str(ws / "message.3d"), "--depth", "1",
                                 "--unknown-budget", "0"])
        assert r.exit_code == 20
        assert "partial" in r.output


class TestDiffEquiv:
    def test_diff_unsat_exits_0(self, runner, ws):
        r = runner.invoke(main, ["diff", str(ws / "message.3d"),
                                 str(ws / "loose.3d")])
        assert r.exit_code == 0 and "no difference" in r.output

    def test_diff_sat_exits_10_with_witnesses(self, runner, ws):
        r = runner.invoke(main, ["diff", str(ws / "loose.3d"),
                                 str(ws / "message.3d")])
        assert r.exit_code == 10 and "packet:" in r.output

    def test_equiv_verdicts(self, runner, ws):
        same = runner.invoke(main, ["equiv", str(ws / "message.3d"),
                                    str(ws / "renamed.3d")])
        assert same.exit_code == 0 and "Equivalent" in same.output
        left = runner.invoke(main, ["equiv", str(ws / "loose.3d"),
                                    str(ws / "message.3d"),
                                    "--max-witnesses", "1"])
        assert left.exit_code == 10 and "LeftPermissive" in left.output

    def test_equiv_inconclusive_exits_20(self, runner, ws):
        r = runner.invoke(main, ["--timeout-secs", "0.001", "equiv",
                                 str(ws / "message.3d"),
                                 str(ws / "renamed.3d")])
        assert r.exit_code == 20 and "Inconclusive" in r.output


class TestRefine:
    def test_directory_provider_run(self, runner, ws):
        cands = ws / "cands"
        cands.mkdir()
        (cands / "exact.3d").write_text(MESSAGE_SRC)
        (cands / "loose.3d").write_text(MESSAGE_LOOSE_SRC)
        out = ws / "refined"
        r = runner.invoke(main, ["refine", "--candidates", str(cands),
                                 "--labeler-spec", str(ws / "message.3d"),
                                 "--out", str(out)])
        assert r.exit_code == 0, r.output
        assert "survivors: ['exact']" in r.output
        assert (out / "exact.3d").exists()
        assert not (out / "loose.3d").exists()
        assert (out / "state.log.jsonl").exists()
        assert (out / "manifest.json").exists()

    def test_requires_exactly_one_provider(self, runner, ws):
        r = runner.invoke(main, ["refine", "--labeler-spec",
                                 str(ws / "message.3d"), "--out",
                                 str(ws / "x")])
        assert r.exit_code == 2


class TestVersion:
    def test_version_flag(self, runner):
        r = runner.invoke(main, ["--version"], prog_name="tdforge")
        assert r.exit_code == 0
        assert "tdforge" in r.output and "0.1.0" in r.output

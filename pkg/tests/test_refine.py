"""Candidate-refinement loop: labeling, pruning, provider plumbing."""

import json
import sys

import pytest

from tdforge.frontend import check
from tdforge.refine import (
    Candidate,
    DirectoryCandidateProvider,
    ExternalCommandLabeler,
    ExternalCommandProvider,
    GoldenSpecLabeler,
    LabelerFailure,
    ProviderFailure,
    SeedInconsistent,
    label_inputs,
    run_loop,
    write_state_log,
)
from tdforge.testgen import GenConfig

from conftest import MESSAGE_LOOSE_SRC, MESSAGE_SRC


class ListProvider:
    def __init__(self, items):
        self.items = list(items)

    def next_candidate(self, state_log):
        return self.items.pop(0) if self.items else None


class FlakyLabeler:
    def __init__(self, bad: bytes, inner):
        self.bad = bad
        self.inner = inner

    def label(self, packet):
        if packet == self.bad:
            raise LabelerFailure("oracle offline")
        return self.inner.label(packet)


@pytest.fixture
def golden():
    return GoldenSpecLabeler(check(MESSAGE_SRC))


SMALL_GEN = GenConfig(branch_depth=1, quota=1, max_tests=8)


class TestLabelInputs:
    def test_golden_labels(self, golden):
        ip, im = [], []
        add_pos, add_neg = label_inputs([b"\x2b\x00", b"\x2a\x00"],
                                        golden, ip, im)
        assert add_pos == [b"\x2b\x00"] and add_neg == [b"\x2a\x00"]
        assert ip == [b"\x2b\x00"] and im == [b"\x2a\x00"]

    def test_empty(self, golden):
        assert label_inputs([], golden, [], []) == ([], [])

    def test_known_packets_skipped(self, golden):
        ip, im = [b"\x2b\x00"], []
        add_pos, _ = label_inputs([b"\x2b\x00"], golden, ip, im)
        assert add_pos == [] and ip == [b"\x2b\x00"]

    def test_duplicates_within_batch_skipped(self, golden):
        ip, im = [], []
        label_inputs([b"\x2b\x00", b"\x2b\x00"], golden, ip, im)
        assert ip == [b"\x2b\x00"]

    def test_labeler_failure_warns_and_continues(self, golden):
        log = []
        ip, im = [], []
        flaky = FlakyLabeler(b"\x2a\x00", golden)
        label_inputs([b"\x2a\x00", b"\x2b\x00"], flaky, ip, im, log)
        assert ip == [b"\x2b\x00"] and im == []
        assert log == [{"kind": "labeler-warning", "packet": "2a00",
                        "error": "oracle offline"}]


class TestProviders:
    def test_directory_provider_name_order(self, tmp_path):
        (tmp_path / "b.3d").write_text("second")
        (tmp_path / "a.3d").write_text("first")
        (tmp_path / "ignore.txt").write_text("x")
        prov = DirectoryCandidateProvider(tmp_path)
        assert prov.next_candidate([]) == ("a", "first")
        assert prov.next_candidate([]) == ("b", "second")
        assert prov.next_candidate([]) is None

    def test_external_provider_receives_state_log(self):
        # echo back a spec whose comment embeds the log length
        code = ("import sys, json\n"
                "log = json.load(sys.stdin)\n"
                "print(f'// log has {len(log)} records')")
        prov = ExternalCommandProvider([sys.executable, "-c", code])
        name, text = prov.next_candidate([{"kind": "failing-test"}])
        assert name == "candidate-1"
        assert "log has 1 records" in text

    def test_external_provider_empty_output_means_exhausted(self):
        prov = ExternalCommandProvider(
            [sys.executable, "-c", "import sys; sys.stdin.read()"])
        assert prov.next_candidate([]) is None

    def test_external_provider_failure(self):
        prov = ExternalCommandProvider(
            [sys.executable, "-c", "import sys; sys.exit(2)"])
        with pytest.raises(ProviderFailure):
            prov.next_candidate([])

    def test_external_labeler_exit_codes(self):
        # positive iff the packet starts with a byte > 42
        code = ("import sys; d = sys.stdin.buffer.read(); "
                "sys.exit(0 if d and d[0] > 42 else 1)")
        lab = ExternalCommandLabeler([sys.executable, "-c", code])
        assert lab.label(b"\x2b\x00") == "positive"
        assert lab.label(b"\x2a\x00") == "negative"

    def test_external_labeler_failure(self):
        lab = ExternalCommandLabeler(["/no/such/labeler-xyz"])
        with pytest.raises(LabelerFailure):
            lab.label(b"\x00")


class TestRunLoop:
    def test_empty_provider_keeps_seeds(self, golden):
        res = run_loop(ListProvider([]), golden,
                       seeds_pos=[b"\x2b\x00"], seeds_neg=[b"\x2a\x00"],
                       gen_config=SMALL_GEN)
        assert res.candidates == []
        assert b"\x2b\x00" in res.i_plus and b"\x2a\x00" in res.i_minus
        assert res.consistent()

    def test_seed_inconsistency_detected_up_front(self, golden):
        with pytest.raises(SeedInconsistent):
            run_loop(ListProvider([]), golden, seeds_pos=[b"\x2a\x00"],
                     gen_config=SMALL_GEN)
        with pytest.raises(SeedInconsistent):
            run_loop(ListProvider([]), golden, seeds_neg=[b"\x2b\x00"],
                     gen_config=SMALL_GEN)

    def test_broken_candidate_logged_not_fatal(self, golden):
        res = run_loop(ListProvider([("broken", "typedef struct {")]),
                       golden, gen_config=SMALL_GEN)
        assert res.candidates == []
        errs = [r for r in res.state_log if r["kind"] == "syntax-error"]
        assert len(errs) == 1 and errs[0]["candidate"] == "broken"
        assert errs[0]["diagnostics"]

    def test_correct_candidate_survives_wrong_is_pruned(self, golden):
        prov = ListProvider([("exact", MESSAGE_SRC),
                             ("loose", MESSAGE_LOOSE_SRC)])
        res = run_loop(prov, golden, gen_config=SMALL_GEN)
        assert [c.name for c in res.candidates] == ["exact"]
        pruned = [r for r in res.state_log if r["kind"] == "failing-test"]
        assert len(pruned) == 1 and pruned[0]["candidate"] == "loose"
        assert res.consistent()

    def test_seed_containment(self, golden):
        res = run_loop(ListProvider([("exact", MESSAGE_SRC)]), golden,
                       seeds_pos=[b"\xff\x00"], seeds_neg=[b"\x00\x00"],
                       gen_config=SMALL_GEN)
        assert b"\xff\x00" in res.i_plus and b"\x00\x00" in res.i_minus

    def test_max_rounds_caps_an_endless_provider(self, golden):
        class Endless:
            def next_candidate(self, state_log):
                return ("again", "typedef struct {")  # never parses

        res = run_loop(Endless(), golden, max_rounds=3, gen_config=SMALL_GEN)
        assert res.rounds == 3


class TestStateLog:
    def test_jsonl_round_trip(self, tmp_path):
        log = [{"kind": "syntax-error", "candidate": "c1"},
               {"kind": "failing-test", "candidate": "c2", "packet": "00"}]
        path = tmp_path / "state.log.jsonl"
        write_state_log(path, log)
        lines = path.read_text().splitlines()
        assert [json.loads(ln) for ln in lines] == log


class TestConsistent:
    def test_detects_violation(self):
        res_spec = check(MESSAGE_SRC)
        from tdforge.refine import LoopResult
        bad = LoopResult(candidates=[Candidate("m", MESSAGE_SRC, res_spec)],
                         i_plus=[b"\x2a\x00"], i_minus=[], state_log=[])
        assert not bad.consistent()

"""Corpus generation: labeling soundness, coverage, manifests."""

import json

import pytest

from tdforge.frontend import check
from tdforge.interp import validate
from tdforge.testgen import (
    GenConfig,
    TestPacket as Packet,
    dedupe,
    gen_tests,
    load_manifest,
    packet_id,
    spec_sha256,
    write_corpus,
)

from conftest import ALWAYS_FAIL_SRC, MESSAGE_SRC, OPTION_SRC


def _pkt(data: bytes, label: str = "positive") -> Packet:
    return Packet.make(data, label, (), "positive")


class TestConfig:
    def test_bad_polarity(self):
        with pytest.raises(ValueError):
            GenConfig(polarity="sideways")

    def test_negative_quota(self):
        with pytest.raises(ValueError):
            GenConfig(quota=-1)

    def test_polarity_flags(self):
        assert GenConfig(polarity="positive").want_positive
        assert not GenConfig(polarity="positive").want_negative
        both = GenConfig()
        assert both.want_positive and both.want_negative


class TestPacketIds:
    def test_id_is_hash_prefix(self):
        assert packet_id(b"\x2b\x00") == packet_id(b"\x2b\x00")
        assert len(packet_id(b"")) == 8
        assert packet_id(b"a") != packet_id(b"b")

    def test_make_fills_id(self):
        p = _pkt(b"\x2b\x00")
        assert p.id == packet_id(b"\x2b\x00")


class TestDedupe:
    def test_empty(self):
        assert dedupe([]) == []

    def test_byte_identity_collapses(self):
        a = Packet.make(b"\x01", "negative", (), "negative-fail")
        b = Packet.make(b"\x01", "negative", (1,), "negative-trailing")
        assert dedupe([a, b]) == [a]  # first provenance wins

    def test_disjoint_unchanged(self):
        ps = [_pkt(b"\x01"), _pkt(b"\x02"), _pkt(b"\x03")]
        assert dedupe(ps) == ps


class TestManifest:
    def test_round_trip(self, tmp_path):
        packets = [
            Packet.make(b"\x2b\x00", "positive", (0,), "positive"),
            Packet.make(b"\x2a\x00", "negative", (1,), "negative-fail"),
        ]
        manifest = write_corpus(tmp_path, packets, MESSAGE_SRC, seed_note="s1")
        records = json.loads(manifest.read_text())
        assert len(records) == 2
        for rec in records:
            assert set(rec) == {"id", "file", "label", "hex", "trace",
                                "query_kind", "spec_sha256", "seed_note"}
            assert rec["spec_sha256"] == spec_sha256(MESSAGE_SRC)
            assert (tmp_path / rec["file"]).read_bytes() == \
                bytes.fromhex(rec["hex"])
        loaded = load_manifest(manifest)
        assert sorted(p.data for p in loaded) == [b"\x2a\x00", b"\x2b\x00"]
        assert {p.label for p in loaded} == {"negative", "positive"}

    def test_records_sorted_by_label_then_id(self, tmp_path):
        packets = [Packet.make(bytes([b]), "negative", (), "negative-fail")
                   for b in range(5)]
        packets.append(_pkt(b"\x2b\x00"))
        manifest = write_corpus(tmp_path, packets, MESSAGE_SRC)
        records = json.loads(manifest.read_text())
        keys = [(r["label"], r["id"]) for r in records]
        assert keys == sorted(keys)

    def test_filenames_carry_label(self, tmp_path):
        manifest = write_corpus(tmp_path, [_pkt(b"\x2b\x00")], MESSAGE_SRC)
        rec = json.loads(manifest.read_text())[0]
        assert rec["file"].startswith("positive-")


@pytest.fixture(scope="module")
def message_report():
    return gen_tests(check(MESSAGE_SRC),
                     GenConfig(branch_depth=1, quota=2, max_tests=50))


class TestGeneration:
    def test_every_packet_interpreter_confirmed(self, message_report):
        spec = check(MESSAGE_SRC)
        assert message_report.packets
        for p in message_report.packets:
            accepted, _ = validate(spec, p.data)
            assert accepted == (p.label == "positive"), p.data.hex()

    def test_positive_and_negative_present(self, message_report):
        assert len(message_report.positives) >= 2
        assert len(message_report.negatives) >= 2
        for p in message_report.positives:
            assert len(p.data) == 2 and p.data[0] >= 0x2B

    def test_full_branch_coverage(self, message_report):
        cov = message_report.coverage[0]
        assert set(cov.outcomes) == {0, 1}

    def test_no_duplicate_bytes(self, message_report):
        datas = [p.data for p in message_report.packets]
        assert len(datas) == len(set(datas))

    def test_unsatisfiable_positive_flagged(self):
        report = gen_tests(check(ALWAYS_FAIL_SRC),
                           GenConfig(branch_depth=1, quota=1,
                                     polarity="positive"))
        assert report.positive_root_unsat
        assert report.positives == []

    def test_max_tests_truncates(self):
        report = gen_tests(check(OPTION_SRC),
                           GenConfig(branch_depth=2, quota=2, max_tests=3))
        assert report.truncated and len(report.packets) <= 3

    def test_solver_unknowns_yield_partial_corpus(self):
        cfg = GenConfig(branch_depth=1, quota=1, unknown_budget=0,
                        timeout_secs=0.001)
        report = gen_tests(check(MESSAGE_SRC), cfg)
        assert report.warning and report.unknown_count > 0
        assert report.packets == []

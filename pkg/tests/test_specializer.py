"""Lowering to first-order programs: semantic preservation and branch tags."""

from itertools import product

import pytest

from tdforge.frontend import check
from tdforge.interp import AcceptMode, validate
from tdforge.specializer import (
    CheckConstraint,
    Dispatch,
    ReadInt,
    branch_at,
    dump_program,
    instrument,
    replay,
    specialize,
)

from conftest import MESSAGE_SRC, OPTION_SRC, SMALL_ALPHABET


def small_inputs(max_len: int):
    for n in range(max_len + 1):
        for t in product(SMALL_ALPHABET, repeat=n):
            yield bytes(t)


class TestLoweringShape:
    def test_message_program(self, message_spec):
        prog = specialize(message_spec)
        steps = prog.steps.steps
        assert [type(s) for s in steps] == [ReadInt, CheckConstraint, ReadInt]
        assert len(prog.branch_points) == 1
        assert prog.branch_points[0].arity == 2
        assert prog.branch_points[0].kind == "constraint"

    def test_option_program(self, option_spec):
        prog = specialize(option_spec)
        kinds = [(p.kind, p.arity) for p in prog.branch_points]
        assert kinds == [("constraint", 2), ("casetype", 4)]
        dispatch = [s for s in prog.steps.steps if isinstance(s, Dispatch)][0]
        # the payload of case 2 is the inlined MAX_SEG_SIZE struct
        case2 = dict(dispatch.cases)[2].steps
        assert [type(s) for s in case2] == [ReadInt, ReadInt]
        assert case2[1].kind.width_bits == 16

    def test_unit_alias_is_empty(self):
        prog = specialize(check("typedef unit empty;"))
        assert prog.steps.steps == ()
        assert prog.branch_points == ()

    def test_single_assignment(self, option_spec):
        prog = specialize(option_spec)
        names = [v for v, _ in prog.vars]
        assert len(names) == len(set(names))

    def test_monomorphization_duplicates_instantiations(self):
        src = ("typedef struct _b (UINT8 n) { UINT8 x { x > n }; } b;\n"
               "typedef struct _m { UINT8 k; b(k) p; b(0x10) q; } m;")
        prog = specialize(check(src))
        # two instantiation sites, each with its own tagged constraint
        assert len(prog.branch_points) == 2

    def test_dump_is_stable(self, option_spec):
        prog = specialize(option_spec)
        assert dump_program(prog) == dump_program(specialize(option_spec))
        assert "dispatch" in dump_program(prog)


class TestInstrument:
    def test_default_tags_constraints_and_dispatches(self, option_spec):
        prog = specialize(option_spec)
        assert [p.branch_id for p in prog.branch_points] == [0, 1]

    def test_policy_none_removes_tags(self, option_spec):
        prog = instrument(specialize(option_spec), policy="none")
        assert prog.branch_points == ()
        for d in small_inputs(2):
            _, trace = replay(prog, d)
            assert trace == ()

    def test_unknown_policy_rejected(self, message_spec):
        with pytest.raises(ValueError):
            instrument(specialize(message_spec), policy="everything")


class TestReplay:
    def test_message_traces(self, message_spec):
        prog = specialize(message_spec)
        out, trace = replay(prog, b"\x2b\x00")
        assert out.ok and trace == (0,)
        out, trace = replay(prog, b"\x2a\x00")
        assert not out.ok and trace == (1,)
        out, trace = replay(prog, b"")
        assert not out.ok and trace == ()

    def test_option_dispatch_outcomes(self, option_spec):
        prog = specialize(option_spec)
        assert replay(prog, b"\x00")[1] == (0, 0)
        assert replay(prog, b"\x01")[1] == (0, 1)
        assert replay(prog, b"\x02\x04\x05\xb4")[1] == (0, 2)
        assert replay(prog, b"\x03")[1] == (1,)


SPECS_FOR_EQUIVALENCE = [
    MESSAGE_SRC,
    OPTION_SRC,
    "typedef struct _m { UINT8 a:3; UINT8 b:5 { b != 0 }; } m;",
    "UINT8 enum _E { A = 0x2A, B = 0x2B } E;\n"
    "typedef struct _m { E e; UINT8 v; } m;",
    "typedef struct _m { UINT8 n; UINT8 data[:byte-size n]; } m;",
    "typedef struct _m { UINT8 tag { tag != 0 }; "
    "UINT8 rest[:consume-all]; } m;",
    "typedef struct _b (UINT8 n) { UINT8 x { x > n }; } b;\n"
    "typedef struct _m { UINT8 k; b(k) p; } m;",
    "typedef struct _m { UINT8 x { x - 42 < 2 }; } m;",
]


class TestSemanticPreservation:
    @pytest.mark.parametrize("src", SPECS_FOR_EQUIVALENCE)
    @pytest.mark.parametrize("mode", [AcceptMode.STRICT, AcceptMode.PREFIX])
    def test_exhaustive_small_inputs(self, src, mode):
        """replay must agree with the interpreter on outcome, consumed
        count, failure reason, and failure offset for every small input."""
        spec = check(src)
        prog = specialize(spec)
        for data in small_inputs(6):
            accepted, out = validate(spec, data, mode)
            rout, _ = replay(prog, data, mode)
            assert rout.ok == out.ok, (src, data.hex())
            assert rout.ok == accepted
            if out.ok:
                assert rout.consumed == out.consumed
            else:
                assert rout.reason == out.reason, (src, data.hex())
                assert rout.at_offset == out.at_offset, (src, data.hex())


class TestBranchAt:
    @pytest.mark.parametrize("src", SPECS_FOR_EQUIVALENCE)
    def test_static_walk_matches_replay(self, src):
        """For every observed trace, the branch at position i (given the
        first i outcomes) must be consistent with the outcome recorded."""
        prog = specialize(check(src))
        for data in small_inputs(6):
            _, trace = replay(prog, data)
            for i, outcome in enumerate(trace):
                bp = branch_at(prog, trace[:i])
                assert bp is not None, (src, data.hex(), i)
                assert outcome < bp.arity

    def test_failed_prefix_has_no_branch(self, message_spec):
        prog = specialize(message_spec)
        assert branch_at(prog, (1,)) is None  # constraint already failed

    def test_root_branch(self, option_spec):
        prog = specialize(option_spec)
        bp = branch_at(prog, ())
        assert bp.branch_id == 0 and bp.kind == "constraint"
        bp2 = branch_at(prog, (0,))
        assert bp2.branch_id == 1 and bp2.kind == "casetype"
        assert branch_at(prog, (0, 0)) is None  # empty payload: path ends

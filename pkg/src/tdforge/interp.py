"""Reference executable semantics: the ground-truth parse/accept oracle.

A parse either succeeds with a consumed-byte count and the scalar field
bindings gathered along the executed path, or fails with a located reason.
Every packet emitted elsewhere in the toolchain (test generation, diff
witnesses) is re-validated here before being reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .dsl import (
    ArrayForm,
    CasetypeBody,
    DslError,
    EnumBody,
    Env,
    Expr,
    FieldDecl,
    Spec,
    StructBody,
    TypeDef,
    UnitBody,
    decode_int,
    eval_expr,
)


class FailReason(str, Enum):
    INSUFFICIENT_INPUT = "InsufficientInput"
    CONSTRAINT_VIOLATED = "ConstraintViolated"
    NO_CASE_MATCHED = "NoCaseMatched"
    ENUM_OUT_OF_RANGE = "EnumOutOfRange"
    TRAILING_BYTES = "TrailingBytes"


class AcceptMode(str, Enum):
    STRICT = "strict"    # entry must consume the whole input
    PREFIX = "prefix"    # leftover bytes permitted


@dataclass(frozen=True)
class ParseOutcome:
    ok: bool
    consumed: int = 0
    bindings: Env = field(default_factory=Env)
    reason: Optional[FailReason] = None
    detail: str = ""      # field or type name the failure points at
    at_offset: int = 0

    @staticmethod
    def success(consumed: int, bindings: Env) -> "ParseOutcome":
        return ParseOutcome(ok=True, consumed=consumed, bindings=bindings)

    @staticmethod
    def failure(reason: FailReason, at_offset: int, detail: str = "") -> "ParseOutcome":
        return ParseOutcome(ok=False, reason=reason, detail=detail,
                            at_offset=at_offset)

    def describe(self) -> str:
        if self.ok:
            binds = " ".join(f"{k}={v}" for k, v in self.bindings.bindings.items())
            return f"Success consumed={self.consumed}" + (f" [{binds}]" if binds else "")
        return f"Failure {self.reason.value}({self.detail}) at offset {self.at_offset}"


def _eval_constraint(env: Env, e: Expr) -> bool:
    """A constraint holds iff it evaluates to true without any evaluation
    error; subtraction underflow counts as the constraint failing."""
    try:
        return bool(eval_expr(env, e))
    except DslError:
        return False


def parse_type(spec: Spec, type_name: str, args: list[int],
               data: bytes, pos: int) -> ParseOutcome:
    """Parse one instantiation of a named type at `pos`. Returns the bytes
    consumed by this type and the flat bindings of the executed path."""
    tdef = spec.defs[type_name]
    consts = spec.enum_constants()
    env = Env(dict(consts))
    for (pname, _), val in zip(tdef.params, args):
        env = env.bind(pname, val)
    return _parse_body(spec, tdef, env, data, pos)


def _parse_body(spec: Spec, tdef: TypeDef, env: Env, data: bytes,
                pos: int) -> ParseOutcome:
    body = tdef.body
    if isinstance(body, UnitBody):
        return ParseOutcome.success(0, env)
    if isinstance(body, EnumBody):
        return _parse_enum_value(tdef.name, body, env, data, pos)
    if isinstance(body, CasetypeBody):
        try:
            tag = eval_expr(env, body.scrutinee)
        except DslError:
            return ParseOutcome.failure(FailReason.NO_CASE_MATCHED, pos, tdef.name)
        for case in body.cases:
            if case.tag == tag:
                return _parse_field(spec, case.field_decl, env, data, pos)
        return ParseOutcome.failure(FailReason.NO_CASE_MATCHED, pos, tdef.name)
    # struct: sequential fields threading the environment; maximal runs of
    # bitfields over one container are read as a single container integer
    consumed = 0
    fields = body.fields
    i = 0
    while i < len(fields):
        fd = fields[i]
        if fd.bitwidth is not None:
            run = [fd]
            j = i + 1
            while (j < len(fields) and fields[j].bitwidth is not None
                   and fields[j].type_ref.int_kind == fd.type_ref.int_kind):
                run.append(fields[j])
                j += 1
            out = _parse_bitfield_run(run, env, data, pos + consumed)
            i = j
        else:
            out = _parse_field(spec, fd, env, data, pos + consumed)
            i += 1
        if not out.ok:
            return out
        consumed += out.consumed
        env = out.bindings
    return ParseOutcome.success(consumed, env)


def _parse_bitfield_run(run: list[FieldDecl], env: Env, data: bytes,
                        pos: int) -> ParseOutcome:
    """Read one container integer and slice it into bitfields, MSB-first in
    declaration order; each field's constraint is checked immediately."""
    kind = run[0].type_ref.int_kind
    nbytes = kind.width_bytes
    if len(data) - pos < nbytes:
        return ParseOutcome.failure(FailReason.INSUFFICIENT_INPUT, pos, run[0].name)
    container = decode_int(data[pos:pos + nbytes], kind)
    shift = kind.width_bits
    for fd in run:
        shift -= fd.bitwidth
        value = (container >> shift) & ((1 << fd.bitwidth) - 1)
        env = env.bind(fd.name, value)
        if fd.constraint is not None and not _eval_constraint(env, fd.constraint):
            return ParseOutcome.failure(
                FailReason.CONSTRAINT_VIOLATED, pos + nbytes, fd.name)
    return ParseOutcome.success(nbytes, env)


def _parse_enum_value(name: str, body: EnumBody, env: Env, data: bytes,
                      pos: int) -> ParseOutcome:
    nbytes = body.underlying.width_bytes
    if len(data) - pos < nbytes:
        return ParseOutcome.failure(FailReason.INSUFFICIENT_INPUT, pos, name)
    value = decode_int(data[pos:pos + nbytes], body.underlying)
    if value not in {v for _, v in body.constants}:
        return ParseOutcome.failure(FailReason.ENUM_OUT_OF_RANGE, pos + nbytes, name)
    return ParseOutcome.success(nbytes, env.bind(name, value))


def _parse_field(spec: Spec, fd: FieldDecl, env: Env, data: bytes,
                 pos: int) -> ParseOutcome:
    # arrays: contents are unconstrained; the binding records the length
    if fd.array_form is ArrayForm.CONSUME_ALL:
        remaining = len(data) - pos
        env2 = env.bind(fd.name, remaining)
        return _apply_constraint(fd, env2, pos + remaining, remaining)
    if fd.array_form in (ArrayForm.FIXED, ArrayForm.BYTE_SIZE):
        try:
            length = eval_expr(env, fd.array_len)
        except DslError:
            return ParseOutcome.failure(FailReason.CONSTRAINT_VIOLATED, pos, fd.name)
        if len(data) - pos < length:
            return ParseOutcome.failure(FailReason.INSUFFICIENT_INPUT, pos, fd.name)
        env2 = env.bind(fd.name, length)
        return _apply_constraint(fd, env2, pos + length, length)

    tref = fd.type_ref
    if tref.is_int:
        nbytes = tref.int_kind.width_bytes
        if len(data) - pos < nbytes:
            return ParseOutcome.failure(FailReason.INSUFFICIENT_INPUT, pos, fd.name)
        value = decode_int(data[pos:pos + nbytes], tref.int_kind)
        env2 = env.bind(fd.name, value)
        return _apply_constraint(fd, env2, pos + nbytes, nbytes)
    if tref.name == "unit":
        return _apply_constraint(fd, env.bind(fd.name, 0), pos, 0)

    target = spec.defs[spec_alias(spec, tref.name)]
    if isinstance(target.body, EnumBody):
        out = _parse_enum_value(fd.name, target.body, env, data, pos)
        if not out.ok:
            return out
        return _apply_constraint(fd, out.bindings, pos + out.consumed, out.consumed)

    # nested struct/casetype instantiation: fresh scope from the args
    try:
        argvals = [eval_expr(env, a) for a in tref.args]
    except DslError:
        return ParseOutcome.failure(FailReason.CONSTRAINT_VIOLATED, pos, fd.name)
    consts = spec.enum_constants()
    inner_env = Env(dict(consts))
    for (pname, _), val in zip(target.params, argvals):
        inner_env = inner_env.bind(pname, val)
    out = _parse_body(spec, target, inner_env, data, pos)
    if not out.ok:
        return out
    # surface the nested fields into the path snapshot (outer names win on
    # collision only if rebound later; inner values are informational)
    merged = dict(env.bindings)
    for k, v in out.bindings.bindings.items():
        merged[k] = v
    return ParseOutcome.success(out.consumed, Env(merged))


def _apply_constraint(fd: FieldDecl, env: Env, end_pos: int,
                      consumed: int) -> ParseOutcome:
    if fd.constraint is not None and not _eval_constraint(env, fd.constraint):
        # the failure offset is the position just after the field was read
        return ParseOutcome.failure(FailReason.CONSTRAINT_VIOLATED, end_pos, fd.name)
    return ParseOutcome.success(consumed, env)


def spec_alias(spec: Spec, name: str) -> str:
    if name in spec.defs:
        return name
    for cand, d in spec.defs.items():
        if d.tag_name == name:
            return cand
    raise KeyError(name)


def validate(spec: Spec, data: bytes,
             mode: AcceptMode = AcceptMode.STRICT) -> tuple[bool, ParseOutcome]:
    """Accept/reject `data` against the spec's entry type."""
    out = parse_type(spec, spec.entry, [], data, 0)
    if not out.ok:
        return False, out
    if mode is AcceptMode.STRICT and out.consumed != len(data):
        return False, ParseOutcome.failure(
            FailReason.TRAILING_BYTES, out.consumed, spec.entry)
    return True, out

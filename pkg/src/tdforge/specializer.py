"""Lowering of a checked Spec to a first-order straight-line/branching
program of primitive parse steps.

Parameterized types are monomorphized per instantiation site, higher-level
structure (structs, casetypes, enums, bitfield runs) is inlined into
primitive steps over single-assignment variables, and branch points
(value constraints and casetype dispatches) are tagged with ids in
left-to-right program order. The lowered form is what the SMT encoder
consumes; `replay` executes it directly and doubles as the oracle that the
lowering preserved the interpreter's semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .dsl import (
    ArrayForm,
    BinOp,
    CasetypeBody,
    DslError,
    EnumBody,
    Env,
    Expr,
    FieldDecl,
    Ident,
    IntKind,
    IntLit,
    Not,
    Spec,
    StructBody,
    TypeDef,
    UnitBody,
    eval_expr,
)
from .interp import AcceptMode, FailReason, ParseOutcome


# ---------------------------------------------------------------------------
# Step language
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReadInt:
    dest: str
    kind: IntKind


@dataclass(frozen=True)
class ReadBits:
    container: str
    kind: IntKind
    parts: tuple[tuple[str, int], ...]  # (dest var, bit width), MSB-first


@dataclass(frozen=True)
class CheckConstraint:
    expr: Expr                 # over previously assigned vars only
    source: str                # field name, for failure reporting
    check_kind: str = "constraint"   # "constraint" | "enum"
    branch_id: Optional[int] = None


@dataclass(frozen=True)
class Dispatch:
    scrutinee: Expr
    cases: tuple[tuple[int, "Seq"], ...]
    source: str
    branch_id: Optional[int] = None

    @property
    def arity(self) -> int:
        return len(self.cases) + 1   # each case, plus no-match


@dataclass(frozen=True)
class SkipBytes:
    dest: str       # bound to the (evaluated) byte length
    length: Expr
    source: str


@dataclass(frozen=True)
class ConsumeAll:
    dest: str
    source: str


@dataclass(frozen=True)
class Seq:
    steps: tuple["Step", ...]


Step = Union[ReadInt, ReadBits, CheckConstraint, Dispatch, SkipBytes,
             ConsumeAll, Seq]


@dataclass(frozen=True)
class BranchPoint:
    branch_id: int
    arity: int
    kind: str       # "constraint" | "casetype"
    source: str


@dataclass(frozen=True)
class FirstOrderProgram:
    steps: Seq
    vars: tuple[tuple[str, str], ...]           # (var, source field name)
    branch_points: tuple[BranchPoint, ...]


BranchTrace = tuple[int, ...]


# ---------------------------------------------------------------------------
# Specialization
# ---------------------------------------------------------------------------


def _subst(e: Expr, mapping: dict[str, Expr]) -> Expr:
    if isinstance(e, Ident):
        return mapping.get(e.name, e)
    if isinstance(e, Not):
        return Not(span=e.span, operand=_subst(e.operand, mapping))
    if isinstance(e, BinOp):
        return BinOp(span=e.span, op=e.op, lhs=_subst(e.lhs, mapping),
                     rhs=_subst(e.rhs, mapping))
    return e


class _Lowering:
    def __init__(self, spec: Spec):
        self.spec = spec
        self.consts = {name: IntLit(value=v)
                       for name, v in spec.enum_constants().items()}
        self.vars: list[tuple[str, str]] = []
        self.used: set[str] = set()

    def fresh(self, base: str) -> str:
        name = base
        k = 1
        while name in self.used:
            k += 1
            name = f"{base}__{k}"
        self.used.add(name)
        return name

    def lower_type(self, tdef: TypeDef, mapping: dict[str, Expr]) -> list[Step]:
        body = tdef.body
        if isinstance(body, UnitBody):
            return []
        if isinstance(body, EnumBody):
            return self.lower_enum_read(tdef.name, tdef.name, body, mapping)[0]
        if isinstance(body, CasetypeBody):
            scrut = _subst(body.scrutinee, mapping)
            cases = []
            for arm in body.cases:
                arm_steps, _ = self.lower_field(arm.field_decl, dict(mapping))
                cases.append((arm.tag, Seq(tuple(arm_steps))))
            return [Dispatch(scrutinee=scrut, cases=tuple(cases),
                             source=tdef.name)]
        assert isinstance(body, StructBody)
        steps: list[Step] = []
        scope = dict(mapping)
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
                steps.extend(self.lower_bitfield_run(run, scope))
                i = j
            else:
                fsteps, _ = self.lower_field(fd, scope)
                steps.extend(fsteps)
                i += 1
        return steps

    def lower_enum_read(self, field_name: str, type_name: str, body: EnumBody,
                        mapping: dict[str, Expr]) -> tuple[list[Step], str]:
        var = self.fresh(field_name)
        self.vars.append((var, field_name))
        member = None
        for _, v in body.constants:
            eq = BinOp(op="==", lhs=Ident(name=var), rhs=IntLit(value=v))
            member = eq if member is None else BinOp(op="||", lhs=member, rhs=eq)
        steps: list[Step] = [ReadInt(var, body.underlying),
                             CheckConstraint(member, source=field_name,
                                             check_kind="enum")]
        mapping[field_name] = Ident(name=var)
        return steps, var

    def lower_bitfield_run(self, run: list[FieldDecl],
                           scope: dict[str, Expr]) -> list[Step]:
        kind = run[0].type_ref.int_kind
        container = self.fresh("_".join(fd.name for fd in run) + "_bits")
        self.vars.append((container, run[0].name))
        parts: list[tuple[str, int]] = []
        steps: list[Step] = []
        for fd in run:
            var = self.fresh(fd.name)
            self.vars.append((var, fd.name))
            parts.append((var, fd.bitwidth))
            scope[fd.name] = Ident(name=var)
        steps.append(ReadBits(container, kind, tuple(parts)))
        for fd in run:
            if fd.constraint is not None:
                steps.append(CheckConstraint(
                    _subst(fd.constraint, {**scope, **self.consts}),
                    source=fd.name))
        return steps

    def lower_field(self, fd: FieldDecl,
                    scope: dict[str, Expr]) -> tuple[list[Step], Optional[str]]:
        """Lower one field; mutates `scope` to bind the field's name."""
        full = {**self.consts, **scope}
        steps: list[Step] = []
        var: Optional[str] = None

        if fd.array_form is ArrayForm.CONSUME_ALL:
            var = self.fresh(fd.name)
            self.vars.append((var, fd.name))
            steps.append(ConsumeAll(var, fd.name))
            scope[fd.name] = Ident(name=var)
        elif fd.array_form in (ArrayForm.FIXED, ArrayForm.BYTE_SIZE):
            var = self.fresh(fd.name)
            self.vars.append((var, fd.name))
            steps.append(SkipBytes(var, _subst(fd.array_len, full), fd.name))
            scope[fd.name] = Ident(name=var)
        elif fd.type_ref.is_int:
            var = self.fresh(fd.name)
            self.vars.append((var, fd.name))
            steps.append(ReadInt(var, fd.type_ref.int_kind))
            scope[fd.name] = Ident(name=var)
        elif fd.type_ref.name == "unit":
            scope[fd.name] = IntLit(value=0)
        else:
            target = self._resolve(fd.type_ref.name)
            if isinstance(target.body, EnumBody):
                inner: dict[str, Expr] = {}
                esteps, evar = self.lower_enum_read(
                    fd.name, target.name, target.body, inner)
                steps.extend(esteps)
                scope[fd.name] = Ident(name=evar)
                var = evar
            else:
                # monomorphize: bind params to (rewritten) argument exprs
                args = [_subst(a, full) for a in fd.type_ref.args]
                mapping = {p: a for (p, _), a in zip(target.params, args)}
                steps.extend(self.lower_type(target, mapping))
                return steps, None

        if fd.constraint is not None:
            cmap = {**self.consts, **scope}
            steps.append(CheckConstraint(_subst(fd.constraint, cmap),
                                         source=fd.name))
        return steps, var

    def _resolve(self, name: str) -> TypeDef:
        if name in self.spec.defs:
            return self.spec.defs[name]
        for d in self.spec.defs.values():
            if d.tag_name == name:
                return d
        raise KeyError(name)


def specialize(spec: Spec, policy: str = "default") -> FirstOrderProgram:
    """Lower a checked spec to a FirstOrderProgram with the default
    instrumentation policy applied (constraints and dispatches tagged)."""
    lowering = _Lowering(spec)
    steps = lowering.lower_type(spec.entry_def(), {})
    program = FirstOrderProgram(steps=Seq(tuple(steps)),
                                vars=tuple(lowering.vars), branch_points=())
    return instrument(program, policy)


def instrument(program: FirstOrderProgram, policy: str = "default") -> FirstOrderProgram:
    """(Re)assign branch ids. `default` tags every CheckConstraint and
    Dispatch in left-to-right program order; `none` removes all tags.
    Input-exhaustion checks are never branch points."""
    if policy not in ("default", "none"):
        raise ValueError(f"unknown instrumentation policy {policy!r}")
    points: list[BranchPoint] = []
    counter = [0]

    def tag(step: Step) -> Step:
        if isinstance(step, Seq):
            return Seq(tuple(tag(s) for s in step.steps))
        if isinstance(step, CheckConstraint):
            if policy == "none":
                return replace(step, branch_id=None)
            bid = counter[0]
            counter[0] += 1
            points.append(BranchPoint(bid, 2, "constraint", step.source))
            return replace(step, branch_id=bid)
        if isinstance(step, Dispatch):
            if policy == "none":
                return replace(step, branch_id=None,
                               cases=tuple((t, tag(s)) for t, s in step.cases))
            bid = counter[0]
            counter[0] += 1
            points.append(BranchPoint(bid, step.arity, "casetype", step.source))
            new_cases = tuple((t, tag(s)) for t, s in step.cases)
            return replace(step, branch_id=bid, cases=new_cases)
        return step

    root = tag(program.steps)
    return FirstOrderProgram(steps=root, vars=program.vars,
                             branch_points=tuple(points))


# ---------------------------------------------------------------------------
# Replay (direct execution of the lowered program)
# ---------------------------------------------------------------------------


def replay(program: FirstOrderProgram, data: bytes,
           mode: AcceptMode = AcceptMode.STRICT) -> tuple[ParseOutcome, BranchTrace]:
    """Execute the program on `data`; returns the outcome plus the ordered
    outcome indices observed at tagged branch points."""
    env = Env({})
    trace: list[int] = []
    pos = 0

    def note(step, outcome: int) -> None:
        if getattr(step, "branch_id", None) is not None:
            trace.append(outcome)

    def run(steps: tuple[Step, ...]) -> Optional[ParseOutcome]:
        nonlocal env, pos
        for step in steps:
            if isinstance(step, Seq):
                out = run(step.steps)
                if out is not None:
                    return out
            elif isinstance(step, ReadInt):
                n = step.kind.width_bytes
                if len(data) - pos < n:
                    return ParseOutcome.failure(
                        FailReason.INSUFFICIENT_INPUT, pos, step.dest)
                value = int.from_bytes(data[pos:pos + n], step.kind.endian.value)
                env = env.bind(step.dest, value)
                pos += n
            elif isinstance(step, ReadBits):
                n = step.kind.width_bytes
                if len(data) - pos < n:
                    return ParseOutcome.failure(
                        FailReason.INSUFFICIENT_INPUT, pos, step.container)
                container = int.from_bytes(data[pos:pos + n], step.kind.endian.value)
                env = env.bind(step.container, container)
                pos += n
                shift = step.kind.width_bits
                for var, width in step.parts:
                    shift -= width
                    env = env.bind(var, (container >> shift) & ((1 << width) - 1))
            elif isinstance(step, CheckConstraint):
                try:
                    ok = bool(eval_expr(env, step.expr))
                except DslError:
                    ok = False
                note(step, 0 if ok else 1)
                if not ok:
                    reason = (FailReason.ENUM_OUT_OF_RANGE
                              if step.check_kind == "enum"
                              else FailReason.CONSTRAINT_VIOLATED)
                    return ParseOutcome.failure(reason, pos, step.source)
            elif isinstance(step, Dispatch):
                try:
                    tagval = eval_expr(env, step.scrutinee)
                    idx = next((k for k, (t, _) in enumerate(step.cases)
                                if t == tagval), len(step.cases))
                except DslError:
                    idx = len(step.cases)
                note(step, idx)
                if idx == len(step.cases):
                    return ParseOutcome.failure(
                        FailReason.NO_CASE_MATCHED, pos, step.source)
                out = run(step.cases[idx][1].steps)
                if out is not None:
                    return out
            elif isinstance(step, SkipBytes):
                try:
                    length = eval_expr(env, step.length)
                except DslError:
                    return ParseOutcome.failure(
                        FailReason.CONSTRAINT_VIOLATED, pos, step.source)
                if len(data) - pos < length:
                    return ParseOutcome.failure(
                        FailReason.INSUFFICIENT_INPUT, pos, step.source)
                env = env.bind(step.dest, length)
                pos += length
            elif isinstance(step, ConsumeAll):
                remaining = len(data) - pos
                env = env.bind(step.dest, remaining)
                pos += remaining
            else:
                raise TypeError(f"unknown step {step!r}")
        return None

    failure = run(program.steps.steps)
    if failure is not None:
        return failure, tuple(trace)
    if mode is AcceptMode.STRICT and pos != len(data):
        return (ParseOutcome.failure(FailReason.TRAILING_BYTES, pos, "<entry>"),
                tuple(trace))
    return ParseOutcome.success(pos, env), tuple(trace)


def branch_at(program: FirstOrderProgram,
              prefix: BranchTrace) -> Optional[BranchPoint]:
    """The branch point that sits at trace position len(prefix) on the path
    selected by `prefix`, or None if that path has already failed or has no
    further tagged branches. This is a static walk: the branch reached at
    position k depends only on the outcomes taken at positions < k."""
    remaining = list(prefix)

    def walk(steps: tuple[Step, ...]) -> Union[BranchPoint, str, None]:
        # returns a BranchPoint (found), "fail" (path dead), or None (ran off)
        for step in steps:
            if isinstance(step, Seq):
                r = walk(step.steps)
                if r is not None:
                    return r
            elif isinstance(step, CheckConstraint) and step.branch_id is not None:
                if not remaining:
                    return BranchPoint(step.branch_id, 2, "constraint", step.source)
                if remaining.pop(0) == 1:
                    return "fail"
            elif isinstance(step, Dispatch) and step.branch_id is not None:
                if not remaining:
                    return BranchPoint(step.branch_id, step.arity,
                                       "casetype", step.source)
                o = remaining.pop(0)
                if o >= len(step.cases):
                    return "fail"
                r = walk(step.cases[o][1].steps)
                if r is not None:
                    return r
        return None

    r = walk(program.steps.steps)
    return r if isinstance(r, BranchPoint) else None


# ---------------------------------------------------------------------------
# Debug dump
# ---------------------------------------------------------------------------


def dump_program(program: FirstOrderProgram) -> str:
    from .frontend import _fmt_expr

    lines: list[str] = []

    def emit(steps: tuple[Step, ...], indent: int) -> None:
        pad = "  " * indent
        for step in steps:
            if isinstance(step, Seq):
                emit(step.steps, indent)
            elif isinstance(step, ReadInt):
                e = "be" if step.kind.endian.value == "big" else "le"
                lines.append(f"{pad}read-int {step.dest} u{step.kind.width_bits}{e}")
            elif isinstance(step, ReadBits):
                parts = ", ".join(f"{v}:{w}" for v, w in step.parts)
                lines.append(f"{pad}read-bits {step.container} "
                             f"u{step.kind.width_bits} [{parts}]")
            elif isinstance(step, CheckConstraint):
                b = f" @b{step.branch_id}" if step.branch_id is not None else ""
                lines.append(f"{pad}check[{step.check_kind}] "
                             f"{_fmt_expr(step.expr)}{b}")
            elif isinstance(step, Dispatch):
                b = f" @b{step.branch_id}" if step.branch_id is not None else ""
                lines.append(f"{pad}dispatch {_fmt_expr(step.scrutinee)}{b}")
                for tag, seq in step.cases:
                    lines.append(f"{pad}  case {tag}:")
                    emit(seq.steps, indent + 2)
                lines.append(f"{pad}  no-match: fail")
            elif isinstance(step, SkipBytes):
                lines.append(f"{pad}skip-bytes {step.dest} = {_fmt_expr(step.length)}")
            elif isinstance(step, ConsumeAll):
                lines.append(f"{pad}consume-all {step.dest}")

    emit(program.steps.steps, 0)
    bps = ", ".join(f"b{p.branch_id}({p.kind},arity={p.arity})"
                    for p in program.branch_points)
    lines.append(f"branch-points: [{bps}]")
    return "\n".join(lines)

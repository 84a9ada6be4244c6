"""SMT-LIB2 encoding of first-order parse programs and query construction.

A program becomes a State-transforming define-fun over an unbounded byte
sequence `Input : Int -> Int`. The State datatype records the remaining
input size, the current position, a failure flag, the last returned value,
and (for coverage queries) an index into a global `branch-trace` function
that pins which outcome each tagged branch must take. Failure is absorbing:
once `has-failed` holds, every later step preserves the failed state.

Integers use the solver's unbounded Int sort; the byte range comes from the
quantified Input assertion and width bounds from how multi-byte reads are
composed. Packets are reified from models in two solver calls: the first
yields the input size, the second (with the size pinned) the bytes.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

from .dsl import BinOp, Expr, Ident, IntKind, IntLit, Not
from .interp import AcceptMode
from .specializer import (
    BranchTrace,
    CheckConstraint,
    ConsumeAll,
    Dispatch,
    FirstOrderProgram,
    ReadBits,
    ReadInt,
    Seq,
    SkipBytes,
    Step,
)

DEFAULT_MAX_PACKET = 4096
_BITWISE_CAP_BITS = 128


class EncodingError(Exception):
    pass


class MalformedSolverOutput(Exception):
    pass


class ModelValueOutOfRange(Exception):
    pass


# ---------------------------------------------------------------------------
# Prelude
# ---------------------------------------------------------------------------

_PRELUDE_CORE = """\
(set-option :produce-models true)
(declare-fun Input (Int) Int)
(assert (forall ((i Int))
                (and (<= 0 (Input i)) (< (Input i) 256))))
(declare-datatype State
  ((mk-state (remaining-input-size Int)
             (current-pos Int)
             (has-failed Bool)
             (return-value Int)
             (branch-index Int))))
(define-fun incr ((n Int)) Int (+ n 1))
(define-fun decr ((n Int)) Int (- n 1))
(define-fun fail-state ((s State)) State
  (mk-state (remaining-input-size s) (current-pos s) true
            (return-value s) (branch-index s)))
(define-fun success-state ((v Int) (p Int) (r Int) (b Int)) State
  (mk-state r p false v b))
(define-fun skip-state ((s State) (n Int)) State
  (mk-state (- (remaining-input-size s) n) (+ (current-pos s) n) false
            (return-value s) (branch-index s)))
(define-fun take-rest-state ((s State)) State
  (mk-state 0 (+ (current-pos s) (remaining-input-size s)) false
            (return-value s) (branch-index s)))
(define-fun parse-uint8 ((s0 State)) State
  (if (and (not (has-failed s0))
           (> (remaining-input-size s0) 0))
      (success-state
        (Input (current-pos s0)) ;; return value.
        (incr (current-pos s0))  ;; new position.
        (decr (remaining-input-size s0)) ;; new remaining size.
        (branch-index s0))
      (fail-state s0)))
"""

_PRELUDE_COVERAGE = """\
(declare-fun branch-trace (Int) Int)
(define-fun incr-branch-index ((s State)) State
  (mk-state (remaining-input-size s) (current-pos s) (has-failed s)
            (return-value s) (+ 1 (branch-index s))))
(define-fun trace-stuck-state ((s State)) State
  (mk-state (remaining-input-size s) (current-pos s) true
            (return-value s) (- 1)))
"""


def _multi_byte_reader(kind: IntKind) -> str:
    """parse-uintN-be/le as a chain of parse-uint8 let bindings."""
    n = kind.width_bytes
    name = _reader_name(kind)
    lines = [f"(define-fun {name} ((s0 State)) State"]
    for i in range(1, n + 1):
        lines.append("  " * i + f"(let ((s{i} (parse-uint8 s{i - 1})))")
    byte_vars = [f"(return-value s{i})" for i in range(1, n + 1)]
    if kind.endian.value == "little":
        byte_vars.reverse()
    value = byte_vars[0]
    for bv in byte_vars[1:]:
        value = f"(+ (* 256 {value}) {bv})"
    pad = "  " * (n + 1)
    lines.append(f"{pad}(if (has-failed s{n}) s{n}")
    lines.append(f"{pad}    (mk-state (remaining-input-size s{n}) (current-pos s{n}) false")
    lines.append(f"{pad}              {value}")
    lines.append(f"{pad}              (branch-index s{n})))" + ")" * n + ")")
    return "\n".join(lines)


def _reader_name(kind: IntKind) -> str:
    if kind.width_bits == 8:
        return "parse-uint8"
    return f"parse-uint{kind.width_bits}-{'be' if kind.endian.value == 'big' else 'le'}"


def _kinds_used(program: FirstOrderProgram) -> set[IntKind]:
    kinds: set[IntKind] = set()

    def walk(steps: tuple[Step, ...]) -> None:
        for s in steps:
            if isinstance(s, (ReadInt, ReadBits)):
                kinds.add(s.kind)
            elif isinstance(s, Dispatch):
                for _, seq in s.cases:
                    walk(seq.steps)
            elif isinstance(s, Seq):
                walk(s.steps)

    walk(program.steps.steps)
    return kinds


def emit_prelude(coverage: bool = False,
                 kinds: set[IntKind] | frozenset[IntKind] = frozenset()) -> str:
    parts = [_PRELUDE_CORE]
    if coverage:
        parts.append(_PRELUDE_COVERAGE)
    for kind in sorted(kinds, key=lambda k: (k.width_bits, k.endian.value)):
        if kind.width_bits > 8:
            parts.append(_multi_byte_reader(kind))
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# Expression encoding (with subtraction-underflow guards)
# ---------------------------------------------------------------------------


def _bits_of(bound: int) -> int:
    return max(1, bound.bit_length())


class _ExprEncoder:
    """Encodes DSL expressions to SMT terms over bound variables.

    `env` maps program variables to SMT terms; `bounds` maps them to static
    upper bounds (None = unbounded) used to size bitwise decompositions.
    Underflow guards for every subtraction are accumulated in `guards`; a
    constraint holds iff all its guards hold and the root is true.
    """

    def __init__(self, env: dict[str, str], bounds: dict[str, int | None]):
        self.env = env
        self.bounds = bounds
        self.guards: list[str] = []

    def bound(self, e: Expr) -> int | None:
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, Ident):
            return self.bounds.get(e.name)
        if isinstance(e, BinOp):
            a, b = self.bound(e.lhs), self.bound(e.rhs)
            if e.op == "-":
                return a
            if e.op == ">>":
                return None if a is None else a >> e.rhs.value
            if e.op == "<<":
                return None if a is None else a << e.rhs.value
            if a is None or b is None:
                return None
            if e.op == "+":
                return a + b
            if e.op == "*":
                return a * b
            if e.op == "&":
                return min(a, b)
            if e.op in ("|", "^"):
                return (1 << max(_bits_of(a), _bits_of(b))) - 1
        return None

    def _bit(self, term: str, i: int) -> str:
        if i == 0:
            return f"(mod {term} 2)"
        return f"(mod (div {term} {1 << i}) 2)"

    def _bitand(self, e: BinOp, ax: str, bx: str) -> str:
        ab, bb = self.bound(e.lhs), self.bound(e.rhs)
        nbits_a = _BITWISE_CAP_BITS + 1 if ab is None else _bits_of(ab)
        nbits_b = _BITWISE_CAP_BITS + 1 if bb is None else _bits_of(bb)
        nbits = min(nbits_a, nbits_b)
        if nbits > _BITWISE_CAP_BITS:
            raise EncodingError(
                "bitwise operand has no static bound small enough to encode")
        lit_a = e.lhs if isinstance(e.lhs, IntLit) else None
        lit_b = e.rhs if isinstance(e.rhs, IntLit) else None
        terms: list[str] = []
        for i in range(nbits):
            if lit_a is not None and not (lit_a.value >> i) & 1:
                continue
            if lit_b is not None and not (lit_b.value >> i) & 1:
                continue
            factors = []
            if lit_a is None:
                factors.append(self._bit(ax, i))
            if lit_b is None:
                factors.append(self._bit(bx, i))
            if not factors:
                bit = "1"
            elif len(factors) == 1:
                bit = factors[0]
            else:
                bit = f"(* {factors[0]} {factors[1]})"
            terms.append(bit if i == 0 else f"(* {1 << i} {bit})")
        if not terms:
            return "0"
        if len(terms) == 1:
            return terms[0]
        return "(+ " + " ".join(terms) + ")"

    def enc_int(self, e: Expr) -> str:
        if isinstance(e, IntLit):
            return str(e.value)
        if isinstance(e, Ident):
            try:
                return self.env[e.name]
            except KeyError:
                raise EncodingError(f"unbound variable {e.name!r}") from None
        if isinstance(e, BinOp):
            a = self.enc_int(e.lhs)
            if e.op in ("<<", ">>"):
                k = e.rhs.value  # literal, enforced by the typechecker
                return f"(* {a} {1 << k})" if e.op == "<<" else f"(div {a} {1 << k})"
            b = self.enc_int(e.rhs)
            if e.op == "+":
                return f"(+ {a} {b})"
            if e.op == "-":
                self.guards.append(f"(>= {a} {b})")
                return f"(- {a} {b})"
            if e.op == "*":
                return f"(* {a} {b})"
            if e.op == "&":
                return self._bitand(e, a, b)
            if e.op == "|":
                return f"(- (+ {a} {b}) {self._bitand(e, a, b)})"
            if e.op == "^":
                return f"(- (+ {a} {b}) (* 2 {self._bitand(e, a, b)}))"
        raise EncodingError(f"not an integer expression: {e!r}")

    def enc_bool(self, e: Expr) -> str:
        if isinstance(e, Not):
            return f"(not {self.enc_bool(e.operand)})"
        if isinstance(e, BinOp):
            if e.op == "&&":
                return f"(and {self.enc_bool(e.lhs)} {self.enc_bool(e.rhs)})"
            if e.op == "||":
                return f"(or {self.enc_bool(e.lhs)} {self.enc_bool(e.rhs)})"
            if e.op in ("<", "<=", ">", ">="):
                return f"({e.op} {self.enc_int(e.lhs)} {self.enc_int(e.rhs)})"
            if e.op == "==":
                return f"(= {self.enc_int(e.lhs)} {self.enc_int(e.rhs)})"
            if e.op == "!=":
                return f"(not (= {self.enc_int(e.lhs)} {self.enc_int(e.rhs)}))"
        raise EncodingError(f"not a boolean expression: {e!r}")


def _holds(enc: _ExprEncoder, e: Expr) -> str:
    """SMT formula: all underflow guards hold and the expression is true."""
    body = enc.enc_bool(e)
    guards, enc.guards = enc.guards, []
    if guards:
        return "(and " + " ".join(guards + [body]) + ")"
    return body


def _guarded_int(enc: _ExprEncoder, e: Expr) -> tuple[str, list[str]]:
    term = enc.enc_int(e)
    guards, enc.guards = enc.guards, []
    return term, guards


# ---------------------------------------------------------------------------
# Program encoding
# ---------------------------------------------------------------------------


def static_min_len(program: FirstOrderProgram) -> int:
    """A lower bound on the length of any packet the program accepts,
    summing fixed-width reads and taking the cheapest dispatch arm. Used
    only to pick model-search size bounds; never asserted."""

    def of(steps: tuple[Step, ...]) -> int:
        total = 0
        for s in steps:
            if isinstance(s, (ReadInt, ReadBits)):
                total += s.kind.width_bytes
            elif isinstance(s, Dispatch):
                total += min((of(seq.steps) for _, seq in s.cases), default=0)
            elif isinstance(s, Seq):
                total += of(s.steps)
        return total

    return of(program.steps.steps)


def program_fn_name(program: FirstOrderProgram, label: str) -> str:
    from .specializer import dump_program

    digest = hashlib.sha256(dump_program(program).encode()).hexdigest()[:6]
    slug = re.sub(r"[^a-z0-9]+", "-", label.lower()).strip("-") or "entry"
    return f"parse-{slug}-{digest}"


class _ProgramEncoder:
    def __init__(self, instrumented: bool):
        self.instrumented = instrumented
        self.counter = 0
        self.env: dict[str, str] = {}
        self.bounds: dict[str, int | None] = {}

    def fresh_state(self) -> str:
        self.counter += 1
        return f"s{self.counter}"

    def expr_encoder(self) -> _ExprEncoder:
        return _ExprEncoder(self.env, self.bounds)

    def compile(self, steps: list[Step], state: str) -> str:
        if not steps:
            return state
        step, rest = steps[0], steps[1:]

        if isinstance(step, Seq):
            return self.compile(list(step.steps) + rest, state)

        if isinstance(step, ReadInt):
            reader = _reader_name(step.kind)
            self.bounds[step.dest] = step.kind.max_value
            if not rest:
                # tail call; the composed reader already absorbs failure
                self.env[step.dest] = "(unreachable)"
                return f"({reader} {state})"
            nxt = self.fresh_state()
            self.env[step.dest] = f"(return-value {nxt})"
            body = self.compile(rest, nxt)
            return (f"(let (({nxt} ({reader} {state})))\n"
                    f"(if (has-failed {nxt}) {nxt}\n{body}))")

        if isinstance(step, ReadBits):
            reader = _reader_name(step.kind)
            nxt = self.fresh_state()
            container = f"(return-value {nxt})"
            self.env[step.container] = container
            self.bounds[step.container] = step.kind.max_value
            shift = step.kind.width_bits
            for var, width in step.parts:
                shift -= width
                mask = (1 << width) - 1
                term = container if shift == 0 else f"(div {container} {1 << shift})"
                if width != step.kind.width_bits:
                    term = f"(mod {term} {mask + 1})"
                self.env[var] = term
                self.bounds[var] = mask
            body = self.compile(rest, nxt) if rest else nxt
            return (f"(let (({nxt} ({reader} {state})))\n"
                    f"(if (has-failed {nxt}) {nxt}\n{body}))")

        if isinstance(step, CheckConstraint):
            enc = self.expr_encoder()
            holds = _holds(enc, step.expr)
            if self.instrumented and step.branch_id is not None:
                trace_here = f"(branch-trace (branch-index {state}))"
                nxt = self.fresh_state()
                cont = self.compile(rest, nxt)
                return (
                    f"(if (and {holds}\n"
                    f"         (= 0 {trace_here}))\n"
                    f"    (let (({nxt} (incr-branch-index {state})))\n{cont})\n"
                    f"    (if (and (not {holds})\n"
                    f"             (= 1 {trace_here}))\n"
                    f"        (fail-state (incr-branch-index {state}))\n"
                    f"        (trace-stuck-state {state})))")
            cont = self.compile(rest, state)
            return (f"(if {holds}\n{cont}\n    (fail-state {state}))")

        if isinstance(step, Dispatch):
            enc = self.expr_encoder()
            scrut, guards = _guarded_int(enc, step.scrutinee)

            def match(tag: int) -> str:
                eq = f"(= {scrut} {tag})"
                if guards:
                    return "(and " + " ".join(guards + [eq]) + ")"
                return eq

            matches = [match(t) for t, _ in step.cases]
            saved_env, saved_bounds = dict(self.env), dict(self.bounds)
            tagged = self.instrumented and step.branch_id is not None
            n = len(step.cases)

            def arm_body(seq: Seq) -> str:
                # each arm compiles in its own copy of the binding scope
                self.env, self.bounds = dict(saved_env), dict(saved_bounds)
                if tagged:
                    nxt = self.fresh_state()
                    inner = self.compile(list(seq.steps) + rest, nxt)
                    return (f"(let (({nxt} (incr-branch-index {state})))\n{inner})")
                return self.compile(list(seq.steps) + rest, state)

            if tagged:
                trace_here = f"(branch-trace (branch-index {state}))"
                no_match = ("(and (not (or " + " ".join(matches or ["false"]) + "))"
                            + f" (= {n} {trace_here}))")
                expr = f"(trace-stuck-state {state})"
                expr = (f"(if {no_match}\n"
                        f"    (fail-state (incr-branch-index {state}))\n"
                        f"    {expr})")
                for idx in range(n - 1, -1, -1):
                    cond = f"(and {matches[idx]} (= {idx} {trace_here}))"
                    expr = (f"(if {cond}\n{arm_body(step.cases[idx][1])}\n{expr})")
                return expr
            expr = f"(fail-state {state})"
            for idx in range(n - 1, -1, -1):
                expr = (f"(if {matches[idx]}\n{arm_body(step.cases[idx][1])}\n{expr})")
            return expr

        if isinstance(step, SkipBytes):
            enc = self.expr_encoder()
            length, guards = _guarded_int(enc, step.length)
            self.env[step.dest] = length
            self.bounds[step.dest] = enc.bound(step.length)
            nxt = self.fresh_state()
            cont = self.compile(rest, nxt)
            cond = f"(>= (remaining-input-size {state}) {length})"
            if guards:
                cond = "(and " + " ".join(guards + [cond]) + ")"
            return (f"(if {cond}\n"
                    f"    (let (({nxt} (skip-state {state} {length})))\n{cont})\n"
                    f"    (fail-state {state}))")

        if isinstance(step, ConsumeAll):
            self.env[step.dest] = f"(remaining-input-size {state})"
            self.bounds[step.dest] = None
            nxt = self.fresh_state()
            cont = self.compile(rest, nxt)
            return f"(let (({nxt} (take-rest-state {state})))\n{cont})"

        raise EncodingError(f"unknown step {step!r}")


def encode_program(program: FirstOrderProgram, fn_name: str,
                   instrumented: bool) -> str:
    """One State->State define-fun for the whole program."""
    enc = _ProgramEncoder(instrumented)
    body = enc.compile(list(program.steps.steps), "s0")
    return f"(define-fun {fn_name} ((s0 State)) State\n{body})"


# ---------------------------------------------------------------------------
# Query construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuerySpec:
    """What to ask the solver for.

    kind: positive | negative | negative-fail | negative-trailing | diff
    (`diff` needs `program2`: find inputs program accepts and program2
    rejects; negative-fail/-trailing split the strict-mode negative goal
    by failure class so enumeration covers both).
    """

    kind: str
    mode: AcceptMode = AcceptMode.STRICT
    trace_prefix: BranchTrace = ()
    min_branch_depth: int = 0
    blocking_set: tuple[bytes, ...] = ()
    fixed_input: bytes | None = None
    instrumented: bool = False


@dataclass(frozen=True)
class SmtScript:
    """A self-contained SMT-LIB2 document plus its model-extraction plan.

    The packet is reconstructed in two solver passes: `phase1()` yields the
    input size; `phase2(n)` pins that size and evaluates the n bytes.
    """

    text: str               # prelude + definitions + assertions
    init_name: str = "init"
    entry_fn: str = ""
    eval_plan: tuple[str, ...] = ()
    min_size_hint: int = 0  # static lower bound on accepted-packet length

    def size_eval(self) -> str:
        return f"(eval (remaining-input-size {self.init_name})) ;; input size from model."

    def byte_eval(self, i: int) -> str:
        return f"(eval (Input {i}))"

    def phase1(self, size_bound: int | None = None) -> str:
        """`size_bound` is a search aid, not part of the format's logic: it
        steers the solver toward reifiable (cap-sized) models."""
        bound = ""
        if size_bound is not None:
            bound = (f"(assert (<= (remaining-input-size {self.init_name})"
                     f" {size_bound}))\n")
        return self.text + bound + "(check-sat)\n" + self.size_eval() + "\n"

    def phase2(self, size: int) -> str:
        lines = [self.text,
                 f"(assert (= (remaining-input-size {self.init_name}) {size}))",
                 "(check-sat)",
                 self.size_eval()]
        lines += [self.byte_eval(i) for i in range(size)]
        return "\n".join(lines) + "\n"

    def render(self) -> str:
        """Human-facing dump: the full query script with its eval plan."""
        return (self.phase1()
                + "(eval (Input 0)) ;; retrieve first input byte.\n"
                + ";; further bytes are retrieved per the model's input size\n")


def _accepts(fn: str, init: str, mode: AcceptMode) -> str:
    ok = f"(not (has-failed ({fn} {init})))"
    if mode is AcceptMode.STRICT:
        return f"(and {ok} (= 0 (remaining-input-size ({fn} {init}))))"
    return ok


def blocking_clause(packet: bytes, init: str = "init") -> str:
    conj = [f"(= (remaining-input-size {init}) {len(packet)})"]
    conj += [f"(= (Input {i}) {b})" for i, b in enumerate(packet)]
    if len(conj) == 1:
        return f"(assert (not {conj[0]}))"
    return "(assert (not (and " + " ".join(conj) + ")))"


def fixed_input_clauses(packet: bytes, init: str = "init") -> list[str]:
    out = [f"(assert (= (remaining-input-size {init}) {len(packet)}))"]
    out += [f"(assert (= (Input {i}) {b}))" for i, b in enumerate(packet)]
    return out


def build_query(q: QuerySpec, program: FirstOrderProgram,
                label: str = "entry",
                program2: FirstOrderProgram | None = None,
                label2: str = "entry2") -> SmtScript:
    """Assemble a complete script: prelude, program encoding(s), init and
    goal assertions, trace-prefix pins, blocking clauses."""
    if q.kind == "diff" and program2 is None:
        raise ValueError("diff query requires a second program")
    kinds = _kinds_used(program)
    if program2 is not None:
        kinds |= _kinds_used(program2)
    fn = program_fn_name(program, label)
    parts = [emit_prelude(coverage=q.instrumented, kinds=kinds)]
    parts.append(encode_program(program, fn, instrumented=q.instrumented))
    fn2 = None
    if program2 is not None:
        fn2 = program_fn_name(program2, label2)
        if fn2 == fn:  # identical programs; still need distinct names
            fn2 += "-b"
        parts.append(encode_program(program2, fn2, instrumented=q.instrumented))

    init = "init"
    parts.append(f"(declare-fun {init} () State) ;; initial state.")
    parts.append(f"(assert (and (not (has-failed {init}))\n"
                 f"             (= 0 (current-pos {init}))))")
    parts.append(f"(assert (>= (remaining-input-size {init}) 0))")
    if q.instrumented:
        parts.append(f"(assert (= (branch-index {init}) 0))")

    final = f"({fn} {init})"
    if q.kind == "positive":
        parts.append(f"(assert (not (has-failed {final})))")
        if q.mode is AcceptMode.STRICT:
            parts.append(f"(assert (= 0 (remaining-input-size {final})))")
    elif q.kind == "negative":
        if q.mode is AcceptMode.STRICT:
            parts.append(f"(assert (or (has-failed {final}) "
                         f"(> (remaining-input-size {final}) 0)))")
        else:
            parts.append(f"(assert (has-failed {final}))")
    elif q.kind == "negative-fail":
        parts.append(f"(assert (has-failed {final}))")
    elif q.kind == "negative-trailing":
        if q.mode is not AcceptMode.STRICT:
            raise ValueError("trailing-bytes negatives exist only in strict mode")
        parts.append(f"(assert (and (not (has-failed {final})) "
                     f"(> (remaining-input-size {final}) 0)))")
    elif q.kind == "diff":
        parts.append(f"(assert {_accepts(fn, init, q.mode)})")
        parts.append(f"(assert (not {_accepts(fn2, init, q.mode)}))")
    else:
        raise ValueError(f"unknown query kind {q.kind!r}")

    if q.instrumented:
        for k, outcome in enumerate(q.trace_prefix):
            parts.append(f"(assert (= (branch-trace {k}) {outcome}))")
        depth = max(q.min_branch_depth, 0)
        parts.append(f"(assert (>= (branch-index {final}) {depth})) "
                     ";; make at least as many choices as branch-depth.")
    for packet in q.blocking_set:
        parts.append(blocking_clause(packet, init))
    if q.fixed_input is not None:
        parts.extend(fixed_input_clauses(q.fixed_input, init))

    return SmtScript(text="\n".join(parts) + "\n", init_name=init, entry_fn=fn,
                     min_size_hint=static_min_len(program))


def build_agreement_batch(program: FirstOrderProgram, inputs: list[bytes],
                          mode: AcceptMode, label: str = "entry") -> str:
    """One script checking, for each concrete input, whether the positive
    query is satisfiable with the input pinned; answers come back as one
    sat/unsat line per input, in order. Used by the brute-force
    SMT-vs-interpreter agreement suite."""
    base = build_query(QuerySpec(kind="positive", mode=mode), program, label)
    sections = [base.text]
    for packet in inputs:
        sections.append("(push 1)")
        sections.extend(fixed_input_clauses(packet, base.init_name))
        sections.append("(check-sat)")
        sections.append("(pop 1)")
    return "\n".join(sections) + "\n"


# ---------------------------------------------------------------------------
# Model reification
# ---------------------------------------------------------------------------

_INT_RE = re.compile(r"^\(?\s*-?\s*\d+\s*\)?$")


def _parse_int(line: str) -> int:
    s = line.strip()
    if not _INT_RE.match(s):
        raise MalformedSolverOutput(f"expected integer, got {line!r}")
    neg = "-" in s
    digits = re.sub(r"[^\d]", "", s)
    value = int(digits)
    return -value if neg else value


def parse_model(transcript: list[str], expected_bytes: int | None = None,
                max_packet: int = DEFAULT_MAX_PACKET) -> tuple[int, bytes | None]:
    """Reconstruct (size, bytes) from eval answers following a `sat` line.

    With only the size answer present (phase 1), returns (size, None).
    Values outside [0, 256) or sizes beyond the cap are rejected: the logic
    itself does not bound packet sizes, but reified corpora must stay
    writable, so oversized models are a reported error, never truncated.
    """
    if not transcript:
        raise MalformedSolverOutput("empty transcript after sat")
    size = _parse_int(transcript[0])
    if size < 0:
        raise ModelValueOutOfRange(f"negative input size {size}")
    if size > max_packet:
        raise ModelValueOutOfRange(
            f"model packet size {size} exceeds the {max_packet}-byte cap")
    if expected_bytes is None:
        return size, None
    values = [_parse_int(line) for line in transcript[1:1 + expected_bytes]]
    if len(values) < expected_bytes:
        raise MalformedSolverOutput(
            f"expected {expected_bytes} byte evals, got {len(values)}")
    for v in values:
        if not 0 <= v < 256:
            raise ModelValueOutOfRange(f"byte value {v} outside [0, 256)")
    return size, bytes(values)

"""Core data model for the binary-format DSL.

Defines the abstract syntax (integer kinds, expressions, field and type
declarations, whole specs), the runtime environment, and expression
evaluation. Everything here is immutable after construction and safe to
share across threads.

Semantics notes:
  * Arithmetic is over unbounded non-negative integers; there is no
    wraparound. Subtraction that would go negative raises NegativeResult,
    which callers treat as "the enclosing constraint failed".
  * Logical operators are strict (no short-circuit): an evaluation error
    anywhere inside a constraint fails the whole constraint. This keeps
    the interpreter and the SMT encoding in exact agreement.
  * Shift amounts must be literal constants (enforced by the typechecker)
    so shifts lower to multiplication/division by a known power of two.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

MAX_LITERAL = 2**64 - 1


class DslError(Exception):
    """Base for evaluation errors raised by this module."""


class NegativeResult(DslError):
    """Subtraction underflow: the enclosing constraint is failed."""


class UnboundIdentifier(DslError):
    """Identifier lookup failed; only reachable if typechecking was skipped."""


class LengthMismatch(DslError):
    """decode_int received the wrong number of bytes."""


# ---------------------------------------------------------------------------
# Integer kinds
# ---------------------------------------------------------------------------


class Endian(str, Enum):
    BIG = "big"
    LITTLE = "little"


@dataclass(frozen=True)
class IntKind:
    """A fixed-width unsigned integer layout (8/16/32/64 bits, big or little).

    8-bit values are canonicalized to big-endian: endianness is meaningless
    for a single byte.
    """

    width_bits: int
    endian: Endian = Endian.BIG

    def __post_init__(self) -> None:
        if self.width_bits not in (8, 16, 32, 64):
            raise ValueError(f"unsupported width: {self.width_bits}")
        if self.width_bits == 8 and self.endian is not Endian.BIG:
            object.__setattr__(self, "endian", Endian.BIG)

    @property
    def width_bytes(self) -> int:
        return self.width_bits // 8

    @property
    def max_value(self) -> int:
        return (1 << self.width_bits) - 1


UINT8 = IntKind(8)

# Surface-syntax names for the builtin integer types. Non-BE multi-byte
# names are little-endian, matching the convention that networking formats
# spell out BE explicitly.
INT_TYPE_NAMES: dict[str, IntKind] = {
    "UINT8": IntKind(8),
    "UINT16": IntKind(16, Endian.LITTLE),
    "UINT32": IntKind(32, Endian.LITTLE),
    "UINT64": IntKind(64, Endian.LITTLE),
    "UINT16BE": IntKind(16, Endian.BIG),
    "UINT32BE": IntKind(32, Endian.BIG),
    "UINT64BE": IntKind(64, Endian.BIG),
}


def decode_int(data: bytes, kind: IntKind) -> int:
    """Decode a byte string of exactly kind.width_bytes into an integer."""
    if len(data) != kind.width_bytes:
        raise LengthMismatch(
            f"expected {kind.width_bytes} bytes, got {len(data)}"
        )
    return int.from_bytes(data, kind.endian.value)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Span:
    """Byte offsets plus 1-based line/column positions into source text."""

    start: int = 0
    end: int = 0
    line: int = 1
    col: int = 1
    end_line: int = 1
    end_col: int = 1


@dataclass(frozen=True)
class Expr:
    span: Span = field(default=Span(), compare=False, repr=False)


@dataclass(frozen=True)
class IntLit(Expr):
    value: int = 0


@dataclass(frozen=True)
class Ident(Expr):
    name: str = ""


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr = None  # type: ignore[assignment]


# Binary operators, grouped by result type.
ARITH_OPS = {"+", "-", "*", "<<", ">>", "&", "|", "^"}
COMPARE_OPS = {"<", "<=", ">", ">=", "==", "!="}
LOGIC_OPS = {"&&", "||"}


@dataclass(frozen=True)
class BinOp(Expr):
    op: str = ""
    lhs: Expr = None  # type: ignore[assignment]
    rhs: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Env:
    """Identifier bindings: fields parsed so far on the current path plus
    in-scope parameters and enum constants. Values are non-negative ints."""

    bindings: dict[str, int] = field(default_factory=dict)

    def lookup(self, name: str) -> int:
        try:
            return self.bindings[name]
        except KeyError:
            raise UnboundIdentifier(name) from None

    def bind(self, name: str, value: int) -> "Env":
        new = dict(self.bindings)
        new[name] = value
        return Env(new)


def eval_expr(env: Env, e: Expr) -> Union[int, bool]:
    """Evaluate a typechecked expression. Ints are non-negative; constraint
    roots evaluate to bool. Raises NegativeResult on subtraction underflow."""
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, Ident):
        return env.lookup(e.name)
    if isinstance(e, Not):
        return not eval_expr(env, e.operand)
    if isinstance(e, BinOp):
        # Strict evaluation: both sides always evaluated, so that underflow
        # on either side fails the enclosing constraint deterministically.
        a = eval_expr(env, e.lhs)
        b = eval_expr(env, e.rhs)
        op = e.op
        if op in LOGIC_OPS:
            return (a and b) if op == "&&" else (a or b)
        if op in COMPARE_OPS:
            return {
                "<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b,
                "==": a == b, "!=": a != b,
            }[op]
        if op == "+":
            return a + b
        if op == "-":
            if b > a:
                raise NegativeResult(f"{a} - {b}")
            return a - b
        if op == "*":
            return a * b
        if op == "<<":
            return a << b
        if op == ">>":
            return a >> b
        if op == "&":
            return a & b
        if op == "|":
            return a | b
        if op == "^":
            return a ^ b
        raise ValueError(f"unknown operator {op!r}")
    raise TypeError(f"not an expression: {e!r}")


def expr_idents(e: Expr) -> set[str]:
    """All identifiers referenced by an expression."""
    if isinstance(e, Ident):
        return {e.name}
    if isinstance(e, Not):
        return expr_idents(e.operand)
    if isinstance(e, BinOp):
        return expr_idents(e.lhs) | expr_idents(e.rhs)
    return set()


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------


class ArrayForm(str, Enum):
    NONE = "none"
    FIXED = "fixed"          # UINT8 d[4]     -- sugar for byte-size(4)
    BYTE_SIZE = "byte-size"  # UINT8 d[:byte-size expr]
    CONSUME_ALL = "consume-all"


@dataclass(frozen=True)
class TypeRef:
    """A field's type: builtin integer, named type (with args), or unit."""

    int_kind: Optional[IntKind] = None
    name: Optional[str] = None
    args: tuple[Expr, ...] = ()
    span: Span = field(default=Span(), compare=False, repr=False)

    @property
    def is_int(self) -> bool:
        return self.int_kind is not None


@dataclass(frozen=True)
class FieldDecl:
    name: str
    type_ref: TypeRef
    bitwidth: Optional[int] = None
    array_form: ArrayForm = ArrayForm.NONE
    array_len: Optional[Expr] = None  # FIXED / BYTE_SIZE only
    constraint: Optional[Expr] = None
    span: Span = field(default=Span(), compare=False, repr=False)


@dataclass(frozen=True)
class StructBody:
    fields: tuple[FieldDecl, ...]


@dataclass(frozen=True)
class CaseArm:
    tag: int
    field_decl: FieldDecl
    span: Span = field(default=Span(), compare=False, repr=False)


@dataclass(frozen=True)
class CasetypeBody:
    scrutinee: Expr
    cases: tuple[CaseArm, ...]


@dataclass(frozen=True)
class EnumBody:
    underlying: IntKind
    constants: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class UnitBody:
    pass


Body = Union[StructBody, CasetypeBody, EnumBody, UnitBody]


@dataclass(frozen=True)
class TypeDef:
    name: str
    params: tuple[tuple[str, IntKind], ...]
    body: Body
    tag_name: Optional[str] = None  # leading "_Name" tag, kept for printing
    span: Span = field(default=Span(), compare=False, repr=False)


@dataclass(frozen=True)
class Spec:
    """A checked collection of type definitions with one entry point."""

    defs: dict[str, TypeDef]
    entry: str
    order: tuple[str, ...] = ()  # declaration order, for printing

    def entry_def(self) -> TypeDef:
        return self.defs[self.entry]

    def enum_constants(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for name in self.order:
            body = self.defs[name].body
            if isinstance(body, EnumBody):
                out.update(dict(body.constants))
        return out

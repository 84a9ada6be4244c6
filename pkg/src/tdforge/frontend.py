"""Lexing, parsing, and typechecking of `.3d` text into a checked Spec.

`check(text)` is the syntax-and-type gate the rest of the toolchain relies
on: every Spec it produces satisfies the structural invariants the
interpreter, specializer, and encoder assume (resolved references, no
recursion, boolean constraint roots, exact bitfield fill, tail-only
consume-all, single-assignment of names within a type body).

Diagnostics carry short stable codes (SYN*/TYP*); golden tests depend on
them, so codes must never be renumbered.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field
from typing import Optional

from .dsl import (
    ARITH_OPS,
    COMPARE_OPS,
    INT_TYPE_NAMES,
    LOGIC_OPS,
    MAX_LITERAL,
    ArrayForm,
    BinOp,
    Body,
    CaseArm,
    CasetypeBody,
    EnumBody,
    Expr,
    FieldDecl,
    Ident,
    IntKind,
    IntLit,
    Not,
    Span,
    Spec,
    StructBody,
    TypeDef,
    TypeRef,
    UnitBody,
    expr_idents,
)

KEYWORDS = {
    "typedef", "struct", "casetype", "switch", "case", "enum", "unit",
    "type", "byte-size", "consume-all",
} | set(INT_TYPE_NAMES)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    span: Span
    severity: str = "error"

    def render(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.span.line}:{self.span.col}: {self.code} {self.message}"

    def to_dict(self) -> dict:
        return {
            "severity": self.severity,
            "code": self.code,
            "message": self.message,
            "start": {"offset": self.span.start, "line": self.span.line, "col": self.span.col},
            "end": {"offset": self.span.end, "line": self.span.end_line, "col": self.span.end_col},
        }


class CheckFailure(Exception):
    """Raised by check() when the input does not produce a valid Spec."""

    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(d.code for d in diagnostics))
        self.diagnostics = diagnostics


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_PUNCT = [
    "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "{", "}", "(", ")", "[", "]", ";", ":", ",", "=",
    "+", "-", "*", "<", ">", "&", "|", "^", "!",
]

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_HEX_RE = re.compile(r"0[xX][0-9a-fA-F]+")
_DEC_RE = re.compile(r"[0-9]+")


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "int", "eof", or the punct/keyword itself
    text: str
    span: Span
    value: int = 0


class LexError(Exception):
    def __init__(self, diag: Diagnostic):
        super().__init__(diag.message)
        self.diag = diag


def _spans(text: str) -> list[int]:
    # offsets of line starts, for offset -> (line, col)
    starts = [0]
    for i, ch in enumerate(text):
        if ch == "\n":
            starts.append(i + 1)
    return starts


class Lexer:
    def __init__(self, text: str):
        self.text = text
        self.line_starts = _spans(text)

    def _pos(self, offset: int) -> tuple[int, int]:
        lo, hi = 0, len(self.line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.line_starts[mid] <= offset:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, offset - self.line_starts[lo] + 1

    def span(self, start: int, end: int) -> Span:
        line, col = self._pos(start)
        eline, ecol = self._pos(end)
        return Span(start, end, line, col, eline, ecol)

    def tokens(self) -> list[Token]:
        text, i, n = self.text, 0, len(self.text)
        out: list[Token] = []
        while i < n:
            ch = text[i]
            if ch in " \t\r\n":
                i += 1
                continue
            if text.startswith("//", i):
                j = text.find("\n", i)
                i = n if j < 0 else j + 1
                continue
            if text.startswith("/*", i):
                j = text.find("*/", i + 2)
                if j < 0:
                    raise LexError(Diagnostic(
                        "SYN003", "unterminated comment", self.span(i, n)))
                i = j + 2
                continue
            m = _HEX_RE.match(text, i)
            if m:
                v = int(m.group(0), 16)
                sp = self.span(i, m.end())
                if v > MAX_LITERAL:
                    raise LexError(Diagnostic(
                        "SYN005", f"integer literal {m.group(0)} exceeds 2^64-1", sp))
                out.append(Token("int", m.group(0), sp, v))
                i = m.end()
                continue
            m = _DEC_RE.match(text, i)
            if m:
                v = int(m.group(0))
                sp = self.span(i, m.end())
                if v > MAX_LITERAL:
                    raise LexError(Diagnostic(
                        "SYN005", f"integer literal {m.group(0)} exceeds 2^64-1", sp))
                out.append(Token("int", m.group(0), sp, v))
                i = m.end()
                continue
            m = _IDENT_RE.match(text, i)
            if m:
                word = m.group(0)
                end = m.end()
                # the two hyphenated keywords
                if word == "byte" and text.startswith("-size", end):
                    word, end = "byte-size", end + 5
                elif word == "consume" and text.startswith("-all", end):
                    word, end = "consume-all", end + 4
                sp = self.span(i, end)
                kind = word if word in KEYWORDS else "ident"
                out.append(Token(kind, word, sp))
                i = end
                continue
            for p in _PUNCT:
                if text.startswith(p, i):
                    out.append(Token(p, p, self.span(i, i + len(p))))
                    i += len(p)
                    break
            else:
                raise LexError(Diagnostic(
                    "SYN002", f"unexpected character {ch!r}", self.span(i, i + 1)))
        out.append(Token("eof", "", self.span(n, n)))
        return out


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class ParseError(Exception):
    def __init__(self, diag: Diagnostic):
        super().__init__(diag.message)
        self.diag = diag


class Parser:
    """Recursive-descent parser; stops at the first syntax error."""

    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, kind: str) -> Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(Diagnostic(
                "SYN002", f"expected {kind!r}, found {t.text or 'end of input'!r}", t.span))
        return self.next()

    def ident(self) -> Token:
        t = self.peek()
        if t.kind == "ident":
            return self.next()
        if t.kind in KEYWORDS or t.text in KEYWORDS:
            raise ParseError(Diagnostic(
                "SYN004", f"reserved keyword {t.text!r} used as identifier", t.span))
        raise ParseError(Diagnostic(
            "SYN002", f"expected identifier, found {t.text or 'end of input'!r}", t.span))

    # ---- expressions (precedence climbing) ----

    _PREC = [
        ("||",),
        ("&&",),
        ("|",),
        ("^",),
        ("&",),
        ("==", "!="),
        ("<", "<=", ">", ">="),
        ("<<", ">>"),
        ("+", "-"),
        ("*",),
    ]

    def expr(self, level: int = 0) -> Expr:
        if level == len(self._PREC):
            return self.unary()
        lhs = self.expr(level + 1)
        while self.peek().kind in self._PREC[level]:
            op = self.next()
            rhs = self.expr(level + 1)
            lhs = BinOp(span=op.span, op=op.kind, lhs=lhs, rhs=rhs)
        return lhs

    def unary(self) -> Expr:
        t = self.peek()
        if t.kind == "!":
            self.next()
            return Not(span=t.span, operand=self.unary())
        if t.kind == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "int":
            self.next()
            return IntLit(span=t.span, value=t.value)
        if t.kind == "ident":
            self.next()
            return Ident(span=t.span, name=t.text)
        raise ParseError(Diagnostic(
            "SYN006", f"expected expression, found {t.text or 'end of input'!r}", t.span))

    # ---- declarations ----

    def type_ref(self) -> TypeRef:
        t = self.peek()
        if t.kind in INT_TYPE_NAMES:
            self.next()
            return TypeRef(int_kind=INT_TYPE_NAMES[t.kind], span=t.span)
        if t.kind == "unit":
            self.next()
            return TypeRef(name="unit", span=t.span)
        name = self.ident()
        args: list[Expr] = []
        if self.peek().kind == "(":
            self.next()
            args.append(self.expr())
            while self.peek().kind == ",":
                self.next()
                args.append(self.expr())
            self.expect(")")
        return TypeRef(name=name.text, args=tuple(args), span=name.span)

    def field_decl(self) -> FieldDecl:
        tref = self.type_ref()
        name = self.ident()
        bitwidth: Optional[int] = None
        array_form = ArrayForm.NONE
        array_len: Optional[Expr] = None
        constraint: Optional[Expr] = None
        if self.peek().kind == ":":
            self.next()
            w = self.expect("int")
            bitwidth = w.value
        if self.peek().kind == "[":
            self.next()
            t = self.peek()
            if t.kind == ":":
                self.next()
                t = self.peek()
                if t.kind == "consume-all":
                    self.next()
                    array_form = ArrayForm.CONSUME_ALL
                elif t.kind == "byte-size":
                    self.next()
                    array_form = ArrayForm.BYTE_SIZE
                    array_len = self.expr()
                else:
                    raise ParseError(Diagnostic(
                        "SYN002",
                        f"expected 'byte-size' or 'consume-all', found {t.text!r}",
                        t.span))
            else:
                n = self.expect("int")
                array_form = ArrayForm.FIXED
                array_len = IntLit(span=n.span, value=n.value)
            self.expect("]")
        if self.peek().kind == "{":
            self.next()
            constraint = self.expr()
            t = self.peek()
            if t.kind != "}":
                raise ParseError(Diagnostic(
                    "SYN003", "unterminated constraint", t.span))
            self.next()
        self.expect(";")
        return FieldDecl(
            name=name.text, type_ref=tref, bitwidth=bitwidth,
            array_form=array_form, array_len=array_len,
            constraint=constraint, span=name.span)

    def param_list(self) -> tuple[tuple[str, IntKind], ...]:
        self.expect("(")
        params: list[tuple[str, IntKind]] = []
        while True:
            t = self.peek()
            if t.kind not in INT_TYPE_NAMES:
                raise ParseError(Diagnostic(
                    "SYN002", f"expected integer type in parameter list, found {t.text!r}",
                    t.span))
            self.next()
            name = self.ident()
            params.append((name.text, INT_TYPE_NAMES[t.kind]))
            if self.peek().kind == ",":
                self.next()
                continue
            break
        self.expect(")")
        return tuple(params)

    def struct_def(self) -> TypeDef:
        kw = self.expect("typedef")
        self.expect("struct")
        tag = self.ident()
        params: tuple[tuple[str, IntKind], ...] = ()
        if self.peek().kind == "(":
            params = self.param_list()
        self.expect("{")
        fields: list[FieldDecl] = []
        while self.peek().kind != "}":
            if self.peek().kind == "eof":
                raise ParseError(Diagnostic(
                    "SYN003", "unterminated struct body", self.peek().span))
            fields.append(self.field_decl())
        self.expect("}")
        name = self.ident()
        self.expect(";")
        return TypeDef(name=name.text, params=params,
                       body=StructBody(tuple(fields)),
                       tag_name=tag.text, span=kw.span)

    def unit_def(self) -> TypeDef:
        kw = self.expect("typedef")
        self.expect("unit")
        name = self.ident()
        self.expect(";")
        return TypeDef(name=name.text, params=(), body=UnitBody(), span=kw.span)

    def casetype_def(self) -> TypeDef:
        kw = self.expect("casetype")
        tag = self.ident()
        params = self.param_list()
        self.expect("{")
        self.expect("switch")
        self.expect("(")
        scrutinee = self.expr()
        self.expect(")")
        self.expect("{")
        cases: list[CaseArm] = []
        while self.peek().kind == "case":
            c = self.next()
            t = self.expect("int")
            self.expect(":")
            fd = self.field_decl()
            cases.append(CaseArm(tag=t.value, field_decl=fd, span=c.span))
        self.expect("}")
        self.expect("}")
        name = self.ident()
        self.expect(";")
        return TypeDef(name=name.text, params=params,
                       body=CasetypeBody(scrutinee, tuple(cases)),
                       tag_name=tag.text, span=kw.span)

    def enum_def(self) -> TypeDef:
        t = self.next()  # integer type keyword, checked by caller
        underlying = INT_TYPE_NAMES[t.kind]
        self.expect("enum")
        tag = self.ident()
        self.expect("{")
        constants: list[tuple[str, int]] = []
        while True:
            cname = self.ident()
            self.expect("=")
            cval = self.expect("int")
            constants.append((cname.text, cval.value))
            if self.peek().kind == ",":
                self.next()
                if self.peek().kind == "}":
                    break
                continue
            break
        self.expect("}")
        name = self.ident()
        self.expect(";")
        return TypeDef(name=name.text, params=(),
                       body=EnumBody(underlying, tuple(constants)),
                       tag_name=tag.text, span=t.span)

    def top(self) -> list[TypeDef]:
        defs: list[TypeDef] = []
        t = self.peek()
        if t.kind == "eof":
            raise ParseError(Diagnostic("SYN001", "expected typedef", t.span))
        while self.peek().kind != "eof":
            t = self.peek()
            if t.kind == "typedef":
                if self.peek(1).kind == "unit":
                    defs.append(self.unit_def())
                else:
                    defs.append(self.struct_def())
            elif t.kind == "casetype":
                defs.append(self.casetype_def())
            elif t.kind in INT_TYPE_NAMES and self.peek(1).kind == "enum":
                defs.append(self.enum_def())
            else:
                raise ParseError(Diagnostic(
                    "SYN001", f"expected typedef, found {t.text!r}", t.span))
        return defs


def parse_spec(text: str) -> tuple[Optional[list[TypeDef]], list[Diagnostic]]:
    """Parse source text into an unchecked list of type definitions."""
    try:
        tokens = Lexer(text).tokens()
    except LexError as e:
        return None, [e.diag]
    try:
        return Parser(tokens).top(), []
    except ParseError as e:
        return None, [e.diag]


# ---------------------------------------------------------------------------
# Typechecker
# ---------------------------------------------------------------------------


class _Checker:
    def __init__(self, defs: list[TypeDef], entry: Optional[str]):
        self.raw = defs
        self.entry_name = entry
        self.diags: list[Diagnostic] = []
        self.by_name: dict[str, TypeDef] = {}
        self.alias: dict[str, str] = {}  # "_Tag" -> canonical name

    def err(self, code: str, message: str, span: Span) -> None:
        self.diags.append(Diagnostic(code, message, span))

    # -- pass 1: collect names --

    def collect(self) -> None:
        for d in self.raw:
            for nm in filter(None, (d.name, d.tag_name)):
                if nm in self.by_name or nm in self.alias:
                    self.err("TYP007", f"duplicate definition of {nm!r}", d.span)
            self.by_name[d.name] = d
            if d.tag_name and d.tag_name != d.name:
                self.alias[d.tag_name] = d.name
        seen_consts: dict[str, str] = {}
        for d in self.raw:
            if isinstance(d.body, EnumBody):
                for cname, cval in d.body.constants:
                    if cname in seen_consts or cname in self.by_name:
                        self.err("TYP007",
                                 f"duplicate enum constant {cname!r}", d.span)
                    seen_consts[cname] = d.name
                    if cval > d.body.underlying.max_value:
                        self.err("TYP008",
                                 f"enum constant {cname!r} = {cval} does not fit "
                                 f"{d.body.underlying.width_bits} bits", d.span)

    def resolve(self, name: str) -> Optional[TypeDef]:
        canonical = self.alias.get(name, name)
        return self.by_name.get(canonical)

    # -- pass 2: per-definition structural checks --

    def check_field_shape(self, fd: FieldDecl) -> None:
        tref = fd.type_ref
        if tref.name == "unit":
            if fd.bitwidth is not None or fd.array_form is not ArrayForm.NONE:
                self.err("TYP016", "unit field cannot carry bitwidth or array form", fd.span)
            return
        if tref.name is not None:
            target = self.resolve(tref.name)
            if target is None:
                self.err("TYP001", f"unresolved type reference {tref.name!r}", tref.span)
            else:
                if len(tref.args) != len(target.params):
                    self.err("TYP012",
                             f"type {tref.name!r} expects {len(target.params)} "
                             f"argument(s), got {len(tref.args)}", tref.span)
                if tref.args and not isinstance(target.body, (StructBody, CasetypeBody)):
                    self.err("TYP012", f"type {tref.name!r} takes no arguments", tref.span)
                if (isinstance(target.body, (StructBody, CasetypeBody))
                        and fd.constraint is not None):
                    self.err("TYP016",
                             "constraints are only allowed on scalar and array fields",
                             fd.span)
            if fd.bitwidth is not None:
                self.err("TYP016", "bitfields require an integer container type", fd.span)
            if fd.array_form is not ArrayForm.NONE:
                self.err("TYP009", "array element type must be UINT8", fd.span)
            return
        # builtin integer type
        if fd.bitwidth is not None:
            if fd.array_form is not ArrayForm.NONE:
                self.err("TYP016", "a field cannot be both bitfield and array", fd.span)
            if not 1 <= fd.bitwidth <= tref.int_kind.width_bits:
                self.err("TYP011",
                         f"bitwidth {fd.bitwidth} out of range for "
                         f"{tref.int_kind.width_bits}-bit container", fd.span)
        if fd.array_form is not ArrayForm.NONE and tref.int_kind.width_bits != 8:
            self.err("TYP009", "array element type must be UINT8", fd.span)

    def check_bitfield_runs(self, fields: tuple[FieldDecl, ...], span: Span) -> None:
        i = 0
        while i < len(fields):
            fd = fields[i]
            if fd.bitwidth is None or not fd.type_ref.is_int:
                i += 1
                continue
            kind = fd.type_ref.int_kind
            total = 0
            j = i
            while (j < len(fields) and fields[j].bitwidth is not None
                   and fields[j].type_ref.is_int
                   and fields[j].type_ref.int_kind == kind):
                total += fields[j].bitwidth
                j += 1
            if total != kind.width_bits:
                self.err("TYP003",
                         f"bitfield run sums to {total} bits, must fill the "
                         f"{kind.width_bits}-bit container exactly", fields[i].span)
            i = j

    def check_defs(self) -> None:
        for d in self.raw:
            pnames = [p for p, _ in d.params]
            if len(set(pnames)) != len(pnames):
                self.err("TYP007", f"duplicate parameter name in {d.name!r}", d.span)
            if isinstance(d.body, StructBody):
                seen: set[str] = set(pnames)
                for fd in d.body.fields:
                    if fd.name in seen:
                        self.err("TYP007",
                                 f"duplicate field name {fd.name!r} in {d.name!r}", fd.span)
                    seen.add(fd.name)
                    self.check_field_shape(fd)
                self.check_bitfield_runs(d.body.fields, d.span)
            elif isinstance(d.body, CasetypeBody):
                bad = expr_idents(d.body.scrutinee) - set(pnames)
                if bad:
                    self.err("TYP005",
                             f"casetype scrutinee may reference only parameters; "
                             f"found {sorted(bad)}", d.span)
                tags = [c.tag for c in d.body.cases]
                if len(set(tags)) != len(tags):
                    self.err("TYP007", f"duplicate case tag in {d.name!r}", d.span)
                for c in d.body.cases:
                    self.check_field_shape(c.field_decl)

    # -- pass 3: cycle detection --

    def _refs_of(self, d: TypeDef) -> set[str]:
        out: set[str] = set()
        fds: list[FieldDecl] = []
        if isinstance(d.body, StructBody):
            fds = list(d.body.fields)
        elif isinstance(d.body, CasetypeBody):
            fds = [c.field_decl for c in d.body.cases]
        for fd in fds:
            nm = fd.type_ref.name
            if nm and nm != "unit":
                target = self.resolve(nm)
                if target:
                    out.add(target.name)
        return out

    def check_cycles(self) -> None:
        color: dict[str, int] = {}  # 0 visiting, 1 done

        def visit(name: str, chain: list[str]) -> None:
            if color.get(name) == 1:
                return
            if color.get(name) == 0:
                cyc = chain[chain.index(name):] + [name]
                self.err("TYP002",
                         "recursive type reference: " + " -> ".join(cyc),
                         self.by_name[name].span)
                return
            color[name] = 0
            for ref in sorted(self._refs_of(self.by_name[name])):
                visit(ref, chain + [name])
            color[name] = 1

        for d in self.raw:
            visit(d.name, [])

    # -- pass 4: expression typing + path expansion from the entry --

    def type_of(self, e: Expr, bound: set[str]) -> str:
        """Returns 'int' or 'bool'; records diagnostics for violations."""
        if isinstance(e, IntLit):
            return "int"
        if isinstance(e, Ident):
            if e.name not in bound:
                self.err("TYP013", f"unbound identifier {e.name!r}", e.span)
            return "int"
        if isinstance(e, Not):
            if self.type_of(e.operand, bound) != "bool":
                self.err("TYP006", "operand of '!' must be boolean", e.span)
            return "bool"
        if isinstance(e, BinOp):
            lt = self.type_of(e.lhs, bound)
            rt = self.type_of(e.rhs, bound)
            if e.op in LOGIC_OPS:
                if lt != "bool" or rt != "bool":
                    self.err("TYP006", f"operands of {e.op!r} must be boolean", e.span)
                return "bool"
            if e.op in COMPARE_OPS:
                if lt != "int" or rt != "int":
                    self.err("TYP006", f"operands of {e.op!r} must be integers", e.span)
                return "bool"
            if e.op in ARITH_OPS:
                if lt != "int" or rt != "int":
                    self.err("TYP006", f"operands of {e.op!r} must be integers", e.span)
                if e.op in ("<<", ">>") and not isinstance(e.rhs, IntLit):
                    self.err("TYP015",
                             "shift amount must be an integer literal", e.span)
                return "int"
        return "int"

    def walk_type(self, d: TypeDef, consts: set[str], tail: bool,
                  depth: int = 0) -> None:
        """Walk one type body checking expression scope; `tail` says whether
        this instantiation sits at the end of every enclosing path (which is
        what licenses consume-all)."""
        if depth > 64:  # cycle fallback; TYP002 already reported
            return
        scope = set(consts) | {p for p, _ in d.params}
        if isinstance(d.body, CasetypeBody):
            self.type_of(d.body.scrutinee, scope)
            for c in d.body.cases:
                self.walk_field(c.field_decl, set(scope), consts, tail, depth)
            return
        if not isinstance(d.body, StructBody):
            return
        fields = d.body.fields
        for idx, fd in enumerate(fields):
            is_last = idx == len(fields) - 1
            self.walk_field(fd, scope, consts, tail and is_last, depth)
            scope.add(fd.name)

    def walk_field(self, fd: FieldDecl, scope: set[str], consts: set[str],
                   tail: bool, depth: int) -> None:
        if fd.array_form is ArrayForm.CONSUME_ALL and not tail:
            self.err("TYP004",
                     f"consume-all field {fd.name!r} must be the final field "
                     "on every path of the entry type", fd.span)
        if fd.array_form in (ArrayForm.BYTE_SIZE, ArrayForm.FIXED) and fd.array_len:
            if self.type_of(fd.array_len, scope) != "int":
                self.err("TYP006", "array length must be an integer expression",
                         fd.array_len.span)
        if fd.constraint is not None:
            root = self.type_of(fd.constraint, scope | {fd.name})
            if root != "bool":
                self.err("TYP006",
                         f"constraint on {fd.name!r} must be boolean at the root",
                         fd.constraint.span)
        nm = fd.type_ref.name
        if nm and nm != "unit":
            target = self.resolve(nm)
            if target and len(fd.type_ref.args) == len(target.params):
                for arg in fd.type_ref.args:
                    self.type_of(arg, scope)
                if isinstance(target.body, (StructBody, CasetypeBody)):
                    self.walk_type(target, consts, tail, depth + 1)

    # -- driver --

    def run(self) -> Optional[Spec]:
        self.collect()
        self.check_defs()
        self.check_cycles()
        entry = self.entry_name or self.raw[-1].name
        entry_def = self.resolve(entry)
        if entry_def is None:
            self.err("TYP001", f"entry type {entry!r} is not defined",
                     Span())
            return None
        entry = entry_def.name
        if entry_def.params:
            self.err("TYP010", f"entry type {entry!r} must have no parameters",
                     entry_def.span)
        if isinstance(entry_def.body, EnumBody):
            # an enum entry parses one integer with membership; allowed
            pass
        if not self.diags:
            consts = set()
            for d in self.raw:
                if isinstance(d.body, EnumBody):
                    consts |= {c for c, _ in d.body.constants}
            self.walk_type(entry_def, consts, tail=True)
        if self.diags:
            return None
        return Spec(defs=dict(self.by_name), entry=entry,
                    order=tuple(d.name for d in self.raw))


def typecheck(defs: list[TypeDef],
              entry: Optional[str] = None) -> tuple[Optional[Spec], list[Diagnostic]]:
    checker = _Checker(defs, entry)
    spec = checker.run()
    return spec, checker.diags


def check(text: str, entry: Optional[str] = None) -> Spec:
    """parse_spec followed by typecheck; raises CheckFailure on any error."""
    ast, diags = parse_spec(text)
    if ast is None:
        raise CheckFailure(diags)
    spec, diags = typecheck(ast, entry)
    if spec is None:
        raise CheckFailure(diags)
    return spec


# ---------------------------------------------------------------------------
# Pretty printer (round-trip tested: check(pretty(spec)) == spec)
# ---------------------------------------------------------------------------

_KIND_NAMES = {v: k for k, v in reversed(list(INT_TYPE_NAMES.items()))}


def _fmt_expr(e: Expr, parent_prec: int = -1) -> str:
    prec = {op: i for i, ops in enumerate(Parser._PREC) for op in ops}
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, Ident):
        return e.name
    if isinstance(e, Not):
        return "!" + _fmt_expr(e.operand, len(Parser._PREC))
    if isinstance(e, BinOp):
        p = prec[e.op]
        s = f"{_fmt_expr(e.lhs, p)} {e.op} {_fmt_expr(e.rhs, p + 1)}"
        return f"({s})" if p < parent_prec else s
    raise TypeError(repr(e))


def _fmt_field(fd: FieldDecl, indent: str) -> str:
    if fd.type_ref.is_int:
        tname = _KIND_NAMES[fd.type_ref.int_kind]
    elif fd.type_ref.name == "unit":
        tname = "unit"
    else:
        tname = fd.type_ref.name
        if fd.type_ref.args:
            tname += "(" + ", ".join(_fmt_expr(a) for a in fd.type_ref.args) + ")"
    s = f"{indent}{tname} {fd.name}"
    if fd.bitwidth is not None:
        s += f":{fd.bitwidth}"
    if fd.array_form is ArrayForm.FIXED:
        s += f"[{_fmt_expr(fd.array_len)}]"
    elif fd.array_form is ArrayForm.BYTE_SIZE:
        s += f"[:byte-size {_fmt_expr(fd.array_len)}]"
    elif fd.array_form is ArrayForm.CONSUME_ALL:
        s += "[:consume-all]"
    if fd.constraint is not None:
        s += " { " + _fmt_expr(fd.constraint) + " }"
    return s + ";"


def pretty_print(spec: Spec) -> str:
    out: list[str] = []
    for name in spec.order:
        d = spec.defs[name]
        tag = d.tag_name or ("_" + d.name)
        params = ""
        if d.params:
            params = "(" + ", ".join(
                f"{_KIND_NAMES[k]} {p}" for p, k in d.params) + ")"
        body = d.body
        if isinstance(body, StructBody):
            out.append(f"typedef struct {tag}{params} {{")
            for fd in body.fields:
                out.append(_fmt_field(fd, "  "))
            out.append(f"}} {d.name};")
        elif isinstance(body, CasetypeBody):
            out.append(f"casetype {tag}{params} {{")
            out.append(f"  switch ({_fmt_expr(body.scrutinee)}) {{")
            for c in body.cases:
                out.append(f"    case 0x{c.tag:02X}: "
                           + _fmt_field(c.field_decl, "").lstrip())
            out.append("  }")
            out.append(f"}} {d.name};")
        elif isinstance(body, EnumBody):
            consts = ", ".join(f"{n} = {v}" for n, v in body.constants)
            out.append(f"{_KIND_NAMES[body.underlying]} enum {tag} {{ {consts} }} {d.name};")
        elif isinstance(body, UnitBody):
            out.append(f"typedef unit {d.name};")
        out.append("")
    return "\n".join(out)

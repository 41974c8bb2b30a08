"""Concrete syntax: lexer, parser, and elaborator.

Surface programs (``.elv`` files, ``--`` line comments) contain data
declarations and top-level definitions.  The parser produces a faithful
surface tree with source positions; the elaborator resolves names, desugars
numeric literals, normalizes type-level redices (a force applied to a
literal thunk) by hereditary substitution, and finally runs the checker,
which fills in any omitted mode indices.

Grammar sketch::

    module  ::= [modes "path"] (data | def)*
    data    ::= data D {m} (a : K)* = C A* ('|' C A*)*
    def     ::= def x : A = e
    kind    ::= Type@m | Up<m,l>[ ctx |- K ]
    type    ::= forall a : K . A | B -> A | B -o A | Down<m,l> B
              | force B @ (s, ...) | D{m} B* | thunk (xs . A)
              | Unit@m | a | Up<m,l>[ ctx |- A ] | ( A )
    term    ::= \\x : A . e | /\\a : K . e | susp (xs . e) | store e
              | load x = e in f | force e @ (s, ...) | match e with br*
              | e e' | e [A] | C{m} e* | x | unit@m | n@m | ( e [: A] )

The modal forms also accept an optional ``<hi,lo>`` mode suffix (emitted by
the printer); omitted modes are inferred during checking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .modes import Mode, ModeSpec
from .subst import SubstError, guess_dep_kind, subst_type
from .syntax import (
    Annot,
    App,
    Branch,
    Context,
    Ctor,
    DTmDecl,
    DTyDecl,
    Def,
    Force,
    KCtxUp,
    KType,
    Kind,
    Lam,
    Load,
    Match,
    NForce,
    NVar,
    One,
    Store,
    Subst,
    Susp,
    TApp,
    TArrow,
    TCtxUp,
    TData,
    TDown,
    TForall,
    TLam,
    TNeutral,
    TThunk,
    TUnit,
    Term,
    TmDecl,
    TmEntry,
    TyDecl,
    TyEntry,
    Type,
    Var,
)
from .typecheck import CtorDecl, DataDecl, DefEntry, Signature, check_signature


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int, expected=()):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col
        self.expected = tuple(expected)


class ElabError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.message = message
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Lexer

_SYMBOLS = ("|-", "->", "-o", "=>", "/\\", "(", ")", "[", "]", "{", "}",
            "<", ">", ",", ".", ":", "=", "|", "\\", "@")


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT | NUMBER | STRING | SYM | EOF
    value: str
    line: int
    col: int


def _ident_char(c: str) -> bool:
    return c.isalnum() or c in "_'"


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("--", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c == '"':
            j = i + 1
            while j < n and src[j] != '"':
                if src[j] == "\n":
                    raise ParseError("unterminated string", line, col)
                j += 1
            if j >= n:
                raise ParseError("unterminated string", line, col)
            toks.append(Token("STRING", src[i + 1 : j], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Token("NUMBER", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and _ident_char(src[j]):
                j += 1
            toks.append(Token("IDENT", src[i:j], line, col))
            col += j - i
            i = j
            continue
        for sym in _SYMBOLS:
            if src.startswith(sym, i):
                # `-o` only when not the start of an identifier like `-old`
                if sym == "-o" and i + 2 < n and _ident_char(src[i + 2]):
                    continue
                toks.append(Token("SYM", sym, line, col))
                col += len(sym)
                i += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Token("EOF", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Surface trees (parse-faithful; no name resolution)


@dataclass(frozen=True)
class Pos:
    line: int = 0
    col: int = 0


# Kinds
@dataclass(frozen=True)
class SKType:
    mode: str
    pos: Pos = Pos()


@dataclass(frozen=True)
class SKUp:
    hi: str
    lo: str
    ctx: tuple
    body: "SKind"
    pos: Pos = Pos()


SKind = SKType | SKUp


# Context declarations: (name, classifier) where classifier is SKind or SType
@dataclass(frozen=True)
class SDecl:
    name: str
    classifier: object
    pos: Pos = Pos()


# Types
@dataclass(frozen=True)
class SUnitT:
    mode: str
    pos: Pos = Pos()


@dataclass(frozen=True)
class SVarT:
    name: str
    pos: Pos = Pos()


@dataclass(frozen=True)
class SArrow:
    dom: "SType"
    cod: "SType"
    pos: Pos = Pos()


@dataclass(frozen=True)
class SForall:
    var: str
    kind: SKind
    body: "SType"
    pos: Pos = Pos()


@dataclass(frozen=True)
class SUpT:
    hi: str
    lo: str
    ctx: tuple
    body: "SType"
    pos: Pos = Pos()


@dataclass(frozen=True)
class SDownT:
    hi: str
    lo: str
    body: "SType"
    pos: Pos = Pos()


@dataclass(frozen=True)
class SThunkT:
    names: tuple[str, ...]
    body: "SType"
    pos: Pos = Pos()


@dataclass(frozen=True)
class SForceT:
    head: "SType"
    entries: tuple
    hi: str = ""
    lo: str = ""
    pos: Pos = Pos()


@dataclass(frozen=True)
class SDataT:
    name: str
    mode: str
    args: tuple
    pos: Pos = Pos()


SType = (
    SUnitT | SVarT | SArrow | SForall | SUpT | SDownT | SThunkT | SForceT | SDataT
)


# Terms
@dataclass(frozen=True)
class SVar:
    name: str
    pos: Pos = Pos()


@dataclass(frozen=True)
class SOne:
    mode: str
    pos: Pos = Pos()


@dataclass(frozen=True)
class SLit:
    value: int
    mode: str
    pos: Pos = Pos()


@dataclass(frozen=True)
class SLam:
    var: str
    ann: SType
    body: "STerm"
    pos: Pos = Pos()


@dataclass(frozen=True)
class STLam:
    var: str
    kind: SKind
    body: "STerm"
    pos: Pos = Pos()


@dataclass(frozen=True)
class SApp:
    head: "STerm"
    arg: "STerm"
    pos: Pos = Pos()


@dataclass(frozen=True)
class STApp:
    head: "STerm"
    arg: SType
    pos: Pos = Pos()


@dataclass(frozen=True)
class SSusp:
    names: tuple[str, ...]
    body: "STerm"
    hi: str = ""
    lo: str = ""
    pos: Pos = Pos()


@dataclass(frozen=True)
class SForce:
    head: "STerm"
    entries: tuple
    hi: str = ""
    lo: str = ""
    pos: Pos = Pos()


@dataclass(frozen=True)
class SStore:
    body: "STerm"
    hi: str = ""
    lo: str = ""
    pos: Pos = Pos()


@dataclass(frozen=True)
class SLoad:
    var: str
    bound: "STerm"
    cont: "STerm"
    hi: str = ""
    lo: str = ""
    pos: Pos = Pos()


@dataclass(frozen=True)
class SCtor:
    name: str
    mode: str
    args: tuple
    pos: Pos = Pos()


@dataclass(frozen=True)
class SBranch:
    ctor: str
    binders: tuple[str, ...]
    body: "STerm"
    pos: Pos = Pos()


@dataclass(frozen=True)
class SMatch:
    scrut: "STerm"
    branches: tuple[SBranch, ...]
    pos: Pos = Pos()


@dataclass(frozen=True)
class SAnnot:
    term: "STerm"
    type: SType
    pos: Pos = Pos()


STerm = (
    SVar | SOne | SLit | SLam | STLam | SApp | STApp | SSusp | SForce
    | SStore | SLoad | SCtor | SMatch | SAnnot
)


@dataclass(frozen=True)
class SDataDecl:
    name: str
    mode_param: str
    params: tuple[tuple[str, SKind], ...]
    ctors: tuple[tuple[str, tuple], ...]
    pos: Pos = Pos()


@dataclass(frozen=True)
class SDef:
    name: str
    type: SType
    body: "STerm"
    pos: Pos = Pos()


@dataclass(frozen=True)
class SurfaceModule:
    modes_path: str | None
    datas: tuple[SDataDecl, ...]
    defs: tuple[SDef, ...]


# ---------------------------------------------------------------------------
# Parser

_TYPE_KEYWORDS = {"Unit", "Up", "Down", "forall", "thunk"}
_RESERVED = {
    "Unit", "Up", "Down", "Type", "forall", "thunk", "susp", "force",
    "store", "load", "in", "match", "with", "unit", "def", "data", "modes",
}


class _Parser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.i = 0

    # -- token plumbing
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def at_sym(self, s: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind == "SYM" and t.value == s

    def at_word(self, w: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind == "IDENT" and t.value == w

    def expect_sym(self, s: str) -> Token:
        t = self.peek()
        if not self.at_sym(s):
            raise ParseError(
                f"expected {s!r}, found {t.value or 'end of input'!r}",
                t.line, t.col, (s,),
            )
        return self.next()

    def expect_word(self, w: str) -> Token:
        t = self.peek()
        if not self.at_word(w):
            raise ParseError(
                f"expected {w!r}, found {t.value or 'end of input'!r}",
                t.line, t.col, (w,),
            )
        return self.next()

    def ident(self, what: str = "identifier") -> Token:
        t = self.peek()
        if t.kind != "IDENT":
            raise ParseError(
                f"expected {what}, found {t.value or 'end of input'!r}",
                t.line, t.col,
            )
        return self.next()

    def pos(self) -> Pos:
        t = self.peek()
        return Pos(t.line, t.col)

    # -- shared pieces
    def mode_suffix(self) -> tuple[str, str]:
        """Optional `<hi,lo>` after a modal keyword."""
        if self.at_sym("<"):
            self.next()
            hi = self.ident("mode name").value
            self.expect_sym(",")
            lo = self.ident("mode name").value
            self.expect_sym(">")
            return hi, lo
        return "", ""

    def at_mode(self) -> str:
        self.expect_sym("@")
        return self.ident("mode name").value

    def angle_modes(self) -> tuple[str, str]:
        self.expect_sym("<")
        hi = self.ident("mode name").value
        self.expect_sym(",")
        lo = self.ident("mode name").value
        self.expect_sym(">")
        return hi, lo

    def binder_names(self) -> tuple[str, ...]:
        """`x1, ..., xn .` inside susp/thunk parentheses (possibly empty)."""
        names: list[str] = []
        if not self.at_sym("."):
            names.append(self.ident("binder").value)
            while self.at_sym(","):
                self.next()
                names.append(self.ident("binder").value)
        self.expect_sym(".")
        return tuple(names)

    # -- kinds / classifiers
    def parse_kind(self) -> SKind:
        p = self.pos()
        if self.at_word("Type"):
            self.next()
            return SKType(self.at_mode(), p)
        if self.at_word("Up"):
            self.next()
            hi, lo = self.angle_modes()
            self.expect_sym("[")
            ctx = self.parse_context()
            self.expect_sym("|-")
            body = self.parse_kind()
            self.expect_sym("]")
            return SKUp(hi, lo, ctx, body, p)
        t = self.peek()
        raise ParseError(f"expected kind, found {t.value!r}", t.line, t.col)

    def at_kind(self) -> bool:
        """Does a kind start here?  `Up<..>[ .. |- K ]` needs lookahead only
        down the chain of Ups; resolved by trial parse."""
        if self.at_word("Type"):
            return True
        if not self.at_word("Up"):
            return False
        save = self.i
        try:
            self.parse_kind()
            return True
        except ParseError:
            return False
        finally:
            self.i = save

    def parse_context(self) -> tuple:
        decls: list[SDecl] = []
        if self.at_sym("|-"):
            return ()
        while True:
            p = self.pos()
            name = self.ident("context variable").value
            self.expect_sym(":")
            if self.at_kind():
                cls: object = self.parse_kind()
            else:
                cls = self.parse_type()
            decls.append(SDecl(name, cls, p))
            if self.at_sym(","):
                self.next()
                continue
            return tuple(decls)

    # -- types
    def parse_type(self) -> SType:
        p = self.pos()
        if self.at_word("forall"):
            self.next()
            var = self.ident("type variable").value
            self.expect_sym(":")
            kind = self.parse_kind()
            self.expect_sym(".")
            return SForall(var, kind, self.parse_type(), p)
        left = self.parse_type_app()
        if self.at_sym("->") or self.at_sym("-o"):
            self.next()
            return SArrow(left, self.parse_type(), p)
        return left

    def parse_type_app(self) -> SType:
        p = self.pos()
        if self.at_word("Down"):
            self.next()
            hi, lo = self.angle_modes()
            return SDownT(hi, lo, self.parse_type_app(), p)
        if self.at_word("force"):
            self.next()
            hi, lo = self.mode_suffix()
            head = self.parse_type_atom()
            self.expect_sym("@")
            entries = self.parse_entries()
            return SForceT(head, entries, hi, lo, p)
        t = self.peek()
        if t.kind == "IDENT" and self.at_sym("{", 1) and t.value not in _RESERVED:
            self.next()
            self.expect_sym("{")
            mode = self.ident("mode name").value
            self.expect_sym("}")
            args: list[SType] = []
            while self.at_type_atom():
                args.append(self.parse_type_atom())
            return SDataT(t.value, mode, tuple(args), Pos(t.line, t.col))
        return self.parse_type_atom()

    def at_type_atom(self) -> bool:
        t = self.peek()
        if t.kind == "IDENT":
            if t.value in _TYPE_KEYWORDS:
                return t.value != "forall"
            return t.value not in _RESERVED
        return self.at_sym("(")

    def parse_type_atom(self) -> SType:
        p = self.pos()
        if self.at_word("Unit"):
            self.next()
            return SUnitT(self.at_mode(), p)
        if self.at_word("Up"):
            self.next()
            hi, lo = self.angle_modes()
            self.expect_sym("[")
            ctx = self.parse_context()
            self.expect_sym("|-")
            body = self.parse_type()
            self.expect_sym("]")
            return SUpT(hi, lo, ctx, body, p)
        if self.at_word("thunk"):
            self.next()
            self.expect_sym("(")
            names = self.binder_names()
            body = self.parse_type()
            self.expect_sym(")")
            return SThunkT(names, body, p)
        if self.at_sym("("):
            self.next()
            a = self.parse_type()
            self.expect_sym(")")
            return a
        t = self.peek()
        if t.kind == "IDENT" and t.value not in _RESERVED:
            self.next()
            if self.at_sym("{"):
                self.next()
                mode = self.ident("mode name").value
                self.expect_sym("}")
                return SDataT(t.value, mode, (), Pos(t.line, t.col))
            return SVarT(t.value, Pos(t.line, t.col))
        raise ParseError(f"expected type, found {t.value!r}", t.line, t.col)

    # -- substitution entries: each is a term or a type, resolved later
    def parse_entries(self) -> tuple:
        self.expect_sym("(")
        entries: list[object] = []
        if not self.at_sym(")"):
            while True:
                entries.append(self.parse_entry())
                if self.at_sym(","):
                    self.next()
                    continue
                break
        self.expect_sym(")")
        return tuple(entries)

    def parse_entry(self):
        save = self.i
        try:
            e = self.parse_term()
            if self.at_sym(",") or self.at_sym(")"):
                return e
        except ParseError:
            pass
        self.i = save
        return self.parse_type()

    # -- terms
    def parse_term(self) -> STerm:
        p = self.pos()
        if self.at_sym("\\"):
            self.next()
            var = self.ident("variable").value
            self.expect_sym(":")
            ann = self.parse_type()
            self.expect_sym(".")
            return SLam(var, ann, self.parse_term(), p)
        if self.at_sym("/\\"):
            self.next()
            var = self.ident("type variable").value
            self.expect_sym(":")
            kind = self.parse_kind()
            self.expect_sym(".")
            return STLam(var, kind, self.parse_term(), p)
        if self.at_word("load"):
            self.next()
            hi, lo = self.mode_suffix()
            var = self.ident("variable").value
            self.expect_sym("=")
            bound = self.parse_term()
            self.expect_word("in")
            cont = self.parse_term()
            return SLoad(var, bound, cont, hi, lo, p)
        if self.at_word("match"):
            self.next()
            scrut = self.parse_app()
            self.expect_word("with")
            branches: list[SBranch] = []
            while self.at_sym("|"):
                bp = self.pos()
                self.next()
                ctor = self.ident("constructor").value
                binders: list[str] = []
                while self.peek().kind == "IDENT" and not self.at_sym("=>"):
                    binders.append(self.ident().value)
                self.expect_sym("=>")
                branches.append(SBranch(ctor, tuple(binders), self.parse_term(), bp))
            if not branches:
                t = self.peek()
                raise ParseError("match with no branches", t.line, t.col)
            return SMatch(scrut, tuple(branches), p)
        return self.parse_app()

    def parse_app(self) -> STerm:
        p = self.pos()
        if self.at_word("store"):
            self.next()
            hi, lo = self.mode_suffix()
            return SStore(self.parse_app(), hi, lo, p)
        if self.at_word("force"):
            self.next()
            hi, lo = self.mode_suffix()
            head = self.parse_term_atom()
            self.expect_sym("@")
            return SForce(head, self.parse_entries(), hi, lo, p)
        if self.at_word("susp"):
            self.next()
            hi, lo = self.mode_suffix()
            self.expect_sym("(")
            names = self.binder_names()
            body = self.parse_term()
            self.expect_sym(")")
            return SSusp(names, body, hi, lo, p)
        t = self.peek()
        if t.kind == "IDENT" and self.at_sym("{", 1) and t.value not in _RESERVED:
            self.next()
            self.expect_sym("{")
            mode = self.ident("mode name").value
            self.expect_sym("}")
            args: list[STerm] = []
            while self.at_term_atom():
                args.append(self.parse_term_atom())
            return SCtor(t.value, mode, tuple(args), Pos(t.line, t.col))
        e = self.parse_term_atom()
        while True:
            if self.at_sym("["):
                self.next()
                a = self.parse_type()
                self.expect_sym("]")
                e = STApp(e, a, p)
                continue
            if self.at_term_atom():
                e = SApp(e, self.parse_term_atom(), p)
                continue
            return e

    def at_term_atom(self) -> bool:
        t = self.peek()
        if t.kind == "NUMBER":
            return True
        if t.kind == "IDENT":
            return t.value == "unit" or t.value not in _RESERVED
        return self.at_sym("(")

    def parse_term_atom(self) -> STerm:
        t = self.peek()
        p = Pos(t.line, t.col)
        if t.kind == "NUMBER":
            self.next()
            return SLit(int(t.value), self.at_mode(), p)
        if self.at_word("unit"):
            self.next()
            return SOne(self.at_mode(), p)
        if self.at_sym("("):
            self.next()
            e = self.parse_term()
            if self.at_sym(":"):
                self.next()
                a = self.parse_type()
                self.expect_sym(")")
                return SAnnot(e, a, p)
            self.expect_sym(")")
            return e
        if t.kind == "IDENT" and t.value not in _RESERVED:
            self.next()
            if self.at_sym("{"):
                self.next()
                mode = self.ident("mode name").value
                self.expect_sym("}")
                return SCtor(t.value, mode, (), p)
            return SVar(t.value, p)
        raise ParseError(
            f"expected term, found {t.value or 'end of input'!r}", t.line, t.col
        )

    # -- module items
    def parse_module(self) -> SurfaceModule:
        modes_path = None
        datas: list[SDataDecl] = []
        defs: list[SDef] = []
        while self.peek().kind != "EOF":
            if self.at_word("modes"):
                self.next()
                t = self.peek()
                if t.kind != "STRING":
                    raise ParseError(
                        "expected quoted path after 'modes'", t.line, t.col
                    )
                self.next()
                modes_path = t.value
            elif self.at_word("data"):
                datas.append(self.parse_data())
            elif self.at_word("def"):
                defs.append(self.parse_def())
            else:
                t = self.peek()
                raise ParseError(
                    f"expected 'data' or 'def', found {t.value!r}", t.line, t.col
                )
        return SurfaceModule(modes_path, tuple(datas), tuple(defs))

    def parse_data(self) -> SDataDecl:
        p = self.pos()
        self.expect_word("data")
        name = self.ident("data type name").value
        self.expect_sym("{")
        mode_param = self.ident("mode parameter").value
        self.expect_sym("}")
        params: list[tuple[str, SKind]] = []
        while self.at_sym("("):
            self.next()
            pname = self.ident("type parameter").value
            self.expect_sym(":")
            params.append((pname, self.parse_kind()))
            self.expect_sym(")")
        self.expect_sym("=")
        ctors: list[tuple[str, tuple]] = []
        while True:
            cname = self.ident("constructor").value
            args: list[SType] = []
            while self.at_type_atom():
                args.append(self.parse_type_atom())
            ctors.append((cname, tuple(args)))
            if self.at_sym("|"):
                self.next()
                continue
            break
        return SDataDecl(name, mode_param, tuple(params), tuple(ctors), p)

    def parse_def(self) -> SDef:
        p = self.pos()
        self.expect_word("def")
        name = self.ident("definition name").value
        self.expect_sym(":")
        ty = self.parse_type()
        self.expect_sym("=")
        body = self.parse_term()
        return SDef(name, ty, body, p)


def parse(source: str) -> SurfaceModule:
    return _Parser(tokenize(source)).parse_module()


def parse_term(source: str) -> STerm:
    """Parse a single term (REPL use)."""
    p = _Parser(tokenize(source))
    e = p.parse_term()
    t = p.peek()
    if t.kind != "EOF":
        raise ParseError(f"unexpected trailing input {t.value!r}", t.line, t.col)
    return e


def parse_type(source: str) -> SType:
    p = _Parser(tokenize(source))
    a = p.parse_type()
    t = p.peek()
    if t.kind != "EOF":
        raise ParseError(f"unexpected trailing input {t.value!r}", t.line, t.col)
    return a


# ---------------------------------------------------------------------------
# Elaboration


def _kind_mode(k: Kind) -> Mode:
    return k.mode if isinstance(k, KType) else k.hi


@dataclass
class _Env:
    spec: ModeSpec
    datas: dict[str, DataDecl]
    ctor_owner: dict[str, str]
    defs: dict[str, DefEntry]
    mode_params: frozenset[str] = frozenset()
    tyvars: dict[str, Kind | None] = field(default_factory=dict)
    tmvars: frozenset[str] = frozenset()

    def check_mode(self, m: str, pos: Pos) -> str:
        if m in self.spec.modes or m in self.mode_params:
            return m
        raise ElabError(f"unknown mode {m!r}", pos.line, pos.col)

    def bind_ty(self, name: str, kind: Kind | None) -> "_Env":
        out = _Env(self.spec, self.datas, self.ctor_owner, self.defs,
                   self.mode_params, dict(self.tyvars), self.tmvars)
        out.tyvars[name] = kind
        return out

    def bind_tm(self, name: str) -> "_Env":
        return _Env(self.spec, self.datas, self.ctor_owner, self.defs,
                    self.mode_params, dict(self.tyvars),
                    self.tmvars | {name})

    def bind_unknown(self, names: tuple[str, ...]) -> "_Env":
        """Bind suspension/thunk binders whose sort is not yet known: they
        may stand for either a type or a term; checking resolves them."""
        out = _Env(self.spec, self.datas, self.ctor_owner, self.defs,
                   self.mode_params, dict(self.tyvars),
                   self.tmvars | set(names))
        for n in names:
            out.tyvars[n] = None
        return out


def _elab_kind(env: _Env, k: SKind) -> Kind:
    if isinstance(k, SKType):
        return KType(env.check_mode(k.mode, k.pos))
    ctx, inner = _elab_context(env, k.ctx)
    return KCtxUp(
        env.check_mode(k.hi, k.pos),
        env.check_mode(k.lo, k.pos),
        ctx,
        _elab_kind(inner, k.body),
    )


def _elab_context(env: _Env, decls: tuple) -> tuple[Context, _Env]:
    out: list = []
    for d in decls:
        if isinstance(d.classifier, (SKType, SKUp)):
            kind = _elab_kind(env, d.classifier)
            out.append(TyDecl(d.name, kind))
            env = env.bind_ty(d.name, kind)
        else:
            ty = _elab_type(env, d.classifier)
            try:
                mode = ty.mode if not isinstance(ty, TThunk) else ""
            except AttributeError:
                mode = ""
            out.append(TmDecl(d.name, ty, mode))
            env = env.bind_tm(d.name)
    return tuple(out), env


def _elab_type(env: _Env, a: SType) -> Type:
    if isinstance(a, SUnitT):
        return TUnit(env.check_mode(a.mode, a.pos))
    if isinstance(a, SVarT):
        if a.name in env.tyvars:
            kind = env.tyvars[a.name]
            mode = _kind_mode(kind) if isinstance(kind, KType) else (
                kind.hi if isinstance(kind, KCtxUp) else ""
            )
            return TNeutral(NVar(a.name), mode)
        if a.name in env.datas:
            raise ElabError(
                f"data type {a.name!r} needs a mode argument {{m}}",
                a.pos.line, a.pos.col,
            )
        raise ElabError(f"unbound type variable {a.name!r}", a.pos.line, a.pos.col)
    if isinstance(a, SArrow):
        dom = _elab_type(env, a.dom)
        cod = _elab_type(env, a.cod)
        return TArrow(dom, cod, _type_mode_or(cod, ""))
    if isinstance(a, SForall):
        kind = _elab_kind(env, a.kind)
        body = _elab_type(env.bind_ty(a.var, kind), a.body)
        return TForall(a.var, kind, body, _type_mode_or(body, ""))
    if isinstance(a, SUpT):
        ctx, inner = _elab_context(env, a.ctx)
        return TCtxUp(
            env.check_mode(a.hi, a.pos),
            env.check_mode(a.lo, a.pos),
            ctx,
            _elab_type(inner, a.body),
        )
    if isinstance(a, SDownT):
        return TDown(
            env.check_mode(a.hi, a.pos),
            env.check_mode(a.lo, a.pos),
            _elab_type(env, a.body),
        )
    if isinstance(a, SThunkT):
        return TThunk(a.names, _elab_type(env.bind_unknown(a.names), a.body))
    if isinstance(a, SForceT):
        return _elab_type_force(env, a)
    if isinstance(a, SDataT):
        if a.name not in env.datas:
            raise ElabError(f"unknown data type {a.name!r}", a.pos.line, a.pos.col)
        mode = env.check_mode(a.mode, a.pos)
        args = tuple(_elab_type(env, x) for x in a.args)
        return TData(a.name, mode, args)
    raise ElabError("unsupported type form")


def _type_mode_or(a: Type, default: Mode) -> Mode:
    if isinstance(a, TThunk):
        return default
    return a.mode


def _elab_type_force(env: _Env, a: SForceT) -> Type:
    head = _elab_type(env, a.head)
    entries = tuple(_elab_entry(env, x) for x in a.entries)
    hi, lo = a.hi, a.lo
    if isinstance(head, TNeutral):
        kind = env.tyvars.get(head.neutral.name) if isinstance(
            head.neutral, NVar
        ) else None
        if isinstance(kind, KCtxUp):
            hi = hi or kind.hi
            lo = lo or kind.lo
            mode = _kind_mode(kind.body)
        else:
            mode = ""
        if hi:
            hi = env.check_mode(hi, a.pos)
        if lo:
            lo = env.check_mode(lo, a.pos)
        return TNeutral(NForce(head.neutral, entries, hi, lo), mode)
    if isinstance(head, TThunk):
        # Hereditary normalization of a surface type-level redex.
        if len(entries) != len(head.names):
            raise ElabError(
                f"force expects {len(head.names)} entries, got {len(entries)}",
                a.pos.line, a.pos.col,
            )
        sigma = []
        gamma = []
        for name, entry in zip(head.names, entries):
            if isinstance(entry, TyEntry):
                sigma.append(TyEntry(name, entry.type))
                gamma.append(DTyDecl(name, guess_dep_kind(entry.type)))
            else:
                sigma.append(TmEntry(name, entry.term, entry.mode))
                gamma.append(DTmDecl(name))
        try:
            return subst_type(tuple(sigma), tuple(gamma), head.body)
        except SubstError as exc:
            raise ElabError(str(exc), a.pos.line, a.pos.col) from exc
    raise ElabError(
        "force head must be a type variable or a thunk",
        a.pos.line, a.pos.col,
    )


def _elab_entry(env: _Env, x):
    """A substitution entry: surface term or type, decided by resolution."""
    if isinstance(x, SCtor) and not x.args and x.name in env.datas:
        return TyEntry("", TData(x.name, env.check_mode(x.mode, x.pos), ()))
    if isinstance(x, SVar) and x.name in env.tyvars and x.name not in env.tmvars:
        kind = env.tyvars[x.name]
        mode = _kind_mode(kind) if kind is not None else ""
        return TyEntry("", TNeutral(NVar(x.name), mode))
    if isinstance(x, (SVar, SOne, SLit, SLam, STLam, SApp, STApp, SSusp,
                      SForce, SStore, SLoad, SCtor, SMatch, SAnnot)):
        return TmEntry("", _elab_term(env, x), "")
    return TyEntry("", _elab_type(env, x))


def _elab_term(env: _Env, e: STerm) -> Term:
    if isinstance(e, SVar):
        if e.name in env.tmvars:
            return Var(e.name)
        if e.name in env.defs:
            return Def(e.name)
        if e.name in env.ctor_owner:
            owner = env.ctor_owner[e.name]
            raise ElabError(
                f"constructor {e.name!r} of {owner!r} needs a mode argument {{m}}",
                e.pos.line, e.pos.col,
            )
        raise ElabError(f"unbound variable {e.name!r}", e.pos.line, e.pos.col)
    if isinstance(e, SOne):
        return One(env.check_mode(e.mode, e.pos))
    if isinstance(e, SLit):
        return _desugar_literal(env, e)
    if isinstance(e, SLam):
        ann = _elab_type(env, e.ann)
        return Lam(e.var, ann, _elab_term(env.bind_tm(e.var), e.body))
    if isinstance(e, STLam):
        kind = _elab_kind(env, e.kind)
        return TLam(e.var, kind, _elab_term(env.bind_ty(e.var, kind), e.body))
    if isinstance(e, SApp):
        return App(_elab_term(env, e.head), _elab_term(env, e.arg))
    if isinstance(e, STApp):
        return TApp(_elab_term(env, e.head), _elab_type(env, e.arg))
    if isinstance(e, SSusp):
        hi = env.check_mode(e.hi, e.pos) if e.hi else ""
        lo = env.check_mode(e.lo, e.pos) if e.lo else ""
        body = _elab_term(env.bind_unknown(e.names), e.body)
        return Susp(hi, lo, e.names, body)
    if isinstance(e, SForce):
        hi = env.check_mode(e.hi, e.pos) if e.hi else ""
        lo = env.check_mode(e.lo, e.pos) if e.lo else ""
        head = _elab_term(env, e.head)
        entries = tuple(_elab_entry(env, x) for x in e.entries)
        return Force(hi, lo, head, entries)
    if isinstance(e, SStore):
        hi = env.check_mode(e.hi, e.pos) if e.hi else ""
        lo = env.check_mode(e.lo, e.pos) if e.lo else ""
        return Store(hi, lo, _elab_term(env, e.body))
    if isinstance(e, SLoad):
        hi = env.check_mode(e.hi, e.pos) if e.hi else ""
        lo = env.check_mode(e.lo, e.pos) if e.lo else ""
        bound = _elab_term(env, e.bound)
        cont = _elab_term(env.bind_tm(e.var), e.cont)
        return Load(hi, lo, e.var, bound, cont)
    if isinstance(e, SCtor):
        if e.name not in env.ctor_owner:
            raise ElabError(f"unknown constructor {e.name!r}", e.pos.line, e.pos.col)
        owner = env.ctor_owner[e.name]
        mode = env.check_mode(e.mode, e.pos)
        args = tuple(_elab_term(env, x) for x in e.args)
        return Ctor(owner, mode, e.name, args)
    if isinstance(e, SMatch):
        scrut = _elab_term(env, e.scrut)
        branches = []
        for br in e.branches:
            if br.ctor not in env.ctor_owner:
                raise ElabError(
                    f"unknown constructor {br.ctor!r} in pattern",
                    br.pos.line, br.pos.col,
                )
            benv = env
            for b in br.binders:
                benv = benv.bind_tm(b)
            branches.append(Branch(br.ctor, br.binders, _elab_term(benv, br.body)))
        return Match("", scrut, tuple(branches))
    if isinstance(e, SAnnot):
        return Annot(_elab_term(env, e.term), _elab_type(env, e.type))
    raise ElabError("unsupported term form")


def _desugar_literal(env: _Env, e: SLit) -> Term:
    owner = env.ctor_owner.get("Zero")
    if owner is None:
        raise ElabError(
            "numeric literals need the Nat declaration in scope",
            e.pos.line, e.pos.col,
        )
    mode = env.check_mode(e.mode, e.pos)
    out: Term = Ctor(owner, mode, "Zero", ())
    for _ in range(e.value):
        out = Ctor(owner, mode, "Succ", (out,))
    return out


def _elab_data(env: _Env, d: SDataDecl) -> DataDecl:
    inner = _Env(env.spec, env.datas, env.ctor_owner, env.defs,
                 env.mode_params | {d.mode_param}, dict(env.tyvars), env.tmvars)
    params = []
    for pname, skind in d.params:
        kind = _elab_kind(inner, skind)
        params.append((pname, kind))
        inner = inner.bind_ty(pname, kind)
    # The declaration must be visible to its own constructors (recursive
    # occurrences like `Succ (Nat{m})`).
    stub = DataDecl(d.name, d.mode_param, tuple(params), ())
    inner.datas = dict(inner.datas)
    inner.datas[d.name] = stub
    ctors = []
    for cname, sargs in d.ctors:
        args = tuple(_elab_type(inner, a) for a in sargs)
        ctors.append(CtorDecl(cname, args))
    return DataDecl(d.name, d.mode_param, tuple(params), tuple(ctors))


def elaborate(module: SurfaceModule, spec: ModeSpec) -> Signature:
    """Resolve and check a parsed module, producing a core signature."""
    env = _Env(spec, {}, {}, {})
    for d in module.datas:
        if d.name in env.datas:
            raise ElabError(f"duplicate data type {d.name!r}", d.pos.line, d.pos.col)
        decl = _elab_data(env, d)
        env.datas[d.name] = decl
        for c in decl.ctors:
            if c.name in env.ctor_owner:
                raise ElabError(
                    f"duplicate constructor {c.name!r}", d.pos.line, d.pos.col
                )
            env.ctor_owner[c.name] = d.name
    entries = []
    for sdef in module.defs:
        if sdef.name in env.defs:
            raise ElabError(
                f"duplicate definition {sdef.name!r}", sdef.pos.line, sdef.pos.col
            )
        ty = _elab_type(env, sdef.type)
        # The name is in scope for its own body; the checker enforces the
        # mode's recursion policy.
        env.defs[sdef.name] = DefEntry(sdef.name, ty, One(""))
        body = _elab_term(env, sdef.body)
        entry = DefEntry(sdef.name, ty, body)
        entries.append(entry)
        env.defs[sdef.name] = entry
    sig = Signature(tuple(env.datas.values()), tuple(entries))
    return check_signature(sig, spec)


def load_module(source: str, spec: ModeSpec) -> Signature:
    """Parse and elaborate in one step."""
    return elaborate(parse(source), spec)


def _env_of(sig: Signature, spec: ModeSpec) -> _Env:
    env = _Env(spec, {}, {}, {})
    for d in sig.datas:
        env.datas[d.name] = d
        for c in d.ctors:
            env.ctor_owner[c.name] = d.name
    for e in sig.defs:
        env.defs[e.name] = e
    return env


def elaborate_term(source: str, spec: ModeSpec, sig: Signature) -> Term:
    """Parse and resolve a standalone term against a signature (REPL use).

    The result is unchecked core syntax; mode slots the surface form omits
    are left blank for the checker to fill in.
    """
    return _elab_term(_env_of(sig, spec), parse_term(source))

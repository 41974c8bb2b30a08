"""Core abstract syntax: kinds, normal/neutral types, elaborated terms,
contexts and substitutions, plus the syntactic operations on them
(dependency erasure, free variables, alpha equivalence).

Types are represented in normal form only: the head of a type-level force is
always neutral, so no constructor can express a type-level redex.  Every term
that came out of the checker carries both mode indices on its modal
constructs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

from .modes import Mode

# ---------------------------------------------------------------------------
# Kinds


@dataclass(frozen=True)
class KType:
    mode: Mode


@dataclass(frozen=True)
class KCtxUp:
    """Contextual kind: a suspended kind over a context, tagged at a higher mode."""

    hi: Mode
    lo: Mode
    ctx: Context
    body: Kind


Kind = Union[KType, KCtxUp]


# ---------------------------------------------------------------------------
# Types (normal) and neutral types


@dataclass(frozen=True)
class TUnit:
    mode: Mode


@dataclass(frozen=True)
class NVar:
    name: str


@dataclass(frozen=True)
class NForce:
    """Splice of a neutral type head; never has a thunk head."""

    head: Neutral
    sub: Subst
    hi: Mode
    lo: Mode


Neutral = Union[NVar, NForce]


@dataclass(frozen=True)
class TNeutral:
    neutral: Neutral
    mode: Mode


@dataclass(frozen=True)
class TThunk:
    """A type template literal; checked against a contextual kind."""

    names: tuple[str, ...]
    body: Type


@dataclass(frozen=True)
class TCtxUp:
    hi: Mode
    lo: Mode
    ctx: Context
    body: Type

    @property
    def mode(self) -> Mode:
        return self.hi


@dataclass(frozen=True)
class TDown:
    hi: Mode
    lo: Mode
    body: Type

    @property
    def mode(self) -> Mode:
        return self.lo


@dataclass(frozen=True)
class TForall:
    var: str
    kind: Kind
    body: Type
    mode: Mode


@dataclass(frozen=True)
class TArrow:
    dom: Type
    cod: Type
    mode: Mode


@dataclass(frozen=True)
class TData:
    name: str
    mode: Mode
    args: tuple[Type, ...] = ()


Type = Union[TUnit, TNeutral, TThunk, TCtxUp, TDown, TForall, TArrow, TData]


def type_mode(a: Type) -> Mode:
    """The mode a type node lives at.  Thunks take it from their kind and
    have no intrinsic mode."""
    if isinstance(a, TThunk):
        raise ValueError("a type thunk has no intrinsic mode; use its kind")
    return a.mode


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class One:
    mode: Mode


@dataclass(frozen=True)
class Susp:
    hi: Mode
    lo: Mode
    names: tuple[str, ...]
    body: Term


@dataclass(frozen=True)
class Force:
    hi: Mode
    lo: Mode
    head: Term
    sub: Subst


@dataclass(frozen=True)
class Store:
    hi: Mode
    lo: Mode
    body: Term


@dataclass(frozen=True)
class Load:
    hi: Mode
    lo: Mode
    var: str
    bound: Term
    cont: Term


@dataclass(frozen=True)
class TLam:
    var: str
    kind: Kind
    body: Term


@dataclass(frozen=True)
class TApp:
    head: Term
    arg: Type


@dataclass(frozen=True)
class Lam:
    var: str
    ann: Type
    body: Term


@dataclass(frozen=True)
class App:
    head: Term
    arg: Term


@dataclass(frozen=True)
class Ctor:
    data: str
    mode: Mode
    name: str
    args: tuple[Term, ...] = ()


@dataclass(frozen=True)
class Branch:
    ctor: str
    binders: tuple[str, ...]
    body: Term


@dataclass(frozen=True)
class Match:
    mode: Mode
    scrut: Term
    branches: tuple[Branch, ...]


@dataclass(frozen=True)
class Def:
    """Reference to a top-level definition; lives outside the substructural
    context."""

    name: str


@dataclass(frozen=True)
class Annot:
    """A term with an explicit type annotation; bridges checking into
    synthesis positions."""

    term: "Term"
    type: Type


Term = Union[
    Var, One, Susp, Force, Store, Load, TLam, TApp, Lam, App, Ctor, Match, Def, Annot
]


# ---------------------------------------------------------------------------
# Contexts and substitutions


@dataclass(frozen=True)
class TyDecl:
    name: str
    kind: Kind

    @property
    def mode(self) -> Mode:
        return self.kind.mode if isinstance(self.kind, KType) else self.kind.hi


@dataclass(frozen=True)
class TmDecl:
    name: str
    type: Type
    mode: Mode


Decl = Union[TyDecl, TmDecl]
Context = tuple[Decl, ...]


@dataclass(frozen=True)
class TyEntry:
    name: str
    type: Type


@dataclass(frozen=True)
class TmEntry:
    name: str
    term: Term
    mode: Mode


Entry = Union[TyEntry, TmEntry]
Subst = tuple[Entry, ...]


def names_of(ctx: Context) -> tuple[str, ...]:
    """The declaration names of a context, in order."""
    return tuple(d.name for d in ctx)


def lookup(ctx: Context, name: str) -> Decl | None:
    for d in ctx:
        if d.name == name:
            return d
    return None


# ---------------------------------------------------------------------------
# Dependency-free kinds and contexts (the hereditary-substitution measure)


@dataclass(frozen=True)
class DKType:
    mode: Mode


@dataclass(frozen=True)
class DKCtxUp:
    hi: Mode
    lo: Mode
    ctx: DepCtx
    body: DepKind


DepKind = Union[DKType, DKCtxUp]


@dataclass(frozen=True)
class DTyDecl:
    name: str
    kind: DepKind


@dataclass(frozen=True)
class DTmDecl:
    name: str


DepDecl = Union[DTyDecl, DTmDecl]
DepCtx = tuple[DepDecl, ...]


def erase_kind(k: Kind) -> DepKind:
    if isinstance(k, KType):
        return DKType(k.mode)
    return DKCtxUp(k.hi, k.lo, erase_context(k.ctx), erase_kind(k.body))


def erase_context(ctx: Context) -> DepCtx:
    out: list[DepDecl] = []
    for d in ctx:
        if isinstance(d, TyDecl):
            out.append(DTyDecl(d.name, erase_kind(d.kind)))
        else:
            out.append(DTmDecl(d.name))
    return tuple(out)


def dep_lookup(gamma: DepCtx, name: str) -> DTyDecl | None:
    for d in gamma:
        if isinstance(d, DTyDecl) and d.name == name:
            return d
    return None


# ---------------------------------------------------------------------------
# Free names and fresh renaming


def _free_in_subst(s: Subst, acc: set[str]) -> None:
    for e in s:
        if isinstance(e, TyEntry):
            _free_in_type(e.type, acc, set())
        else:
            _free_in_term(e.term, acc, set())


def _free_in_kind(k: Kind, acc: set[str], bound: set[str]) -> None:
    if isinstance(k, KCtxUp):
        inner = set(bound)
        for d in k.ctx:
            if isinstance(d, TyDecl):
                _free_in_kind(d.kind, acc, inner)
            else:
                _free_in_type(d.type, acc, inner)
            inner.add(d.name)
        _free_in_kind(k.body, acc, inner)


def _free_in_type(a: Type, acc: set[str], bound: set[str]) -> None:
    if isinstance(a, TUnit):
        return
    if isinstance(a, TNeutral):
        _free_in_neutral(a.neutral, acc, bound)
    elif isinstance(a, TThunk):
        _free_in_type(a.body, acc, bound | set(a.names))
    elif isinstance(a, TCtxUp):
        inner = set(bound)
        for d in a.ctx:
            if isinstance(d, TyDecl):
                _free_in_kind(d.kind, acc, inner)
            else:
                _free_in_type(d.type, acc, inner)
            inner.add(d.name)
        _free_in_type(a.body, acc, inner)
    elif isinstance(a, TDown):
        _free_in_type(a.body, acc, bound)
    elif isinstance(a, TForall):
        _free_in_kind(a.kind, acc, bound)
        _free_in_type(a.body, acc, bound | {a.var})
    elif isinstance(a, TArrow):
        _free_in_type(a.dom, acc, bound)
        _free_in_type(a.cod, acc, bound)
    elif isinstance(a, TData):
        for t in a.args:
            _free_in_type(t, acc, bound)


def _free_in_neutral(p: Neutral, acc: set[str], bound: set[str]) -> None:
    if isinstance(p, NVar):
        if p.name not in bound:
            acc.add(p.name)
    else:
        _free_in_neutral(p.head, acc, bound)
        for e in p.sub:
            if isinstance(e, TyEntry):
                _free_in_type(e.type, acc, bound)
            else:
                _free_in_term(e.term, acc, bound)


def _free_in_term(e: Term, acc: set[str], bound: set[str]) -> None:
    if isinstance(e, Var):
        if e.name not in bound:
            acc.add(e.name)
    elif isinstance(e, (One, Def)):
        return
    elif isinstance(e, Susp):
        _free_in_term(e.body, acc, bound | set(e.names))
    elif isinstance(e, Force):
        _free_in_term(e.head, acc, bound)
        for entry in e.sub:
            if isinstance(entry, TyEntry):
                _free_in_type(entry.type, acc, bound)
            else:
                _free_in_term(entry.term, acc, bound)
    elif isinstance(e, Store):
        _free_in_term(e.body, acc, bound)
    elif isinstance(e, Load):
        _free_in_term(e.bound, acc, bound)
        _free_in_term(e.cont, acc, bound | {e.var})
    elif isinstance(e, TLam):
        _free_in_kind(e.kind, acc, bound)
        _free_in_term(e.body, acc, bound | {e.var})
    elif isinstance(e, TApp):
        _free_in_term(e.head, acc, bound)
        _free_in_type(e.arg, acc, bound)
    elif isinstance(e, Lam):
        _free_in_type(e.ann, acc, bound)
        _free_in_term(e.body, acc, bound | {e.var})
    elif isinstance(e, App):
        _free_in_term(e.head, acc, bound)
        _free_in_term(e.arg, acc, bound)
    elif isinstance(e, Ctor):
        for a in e.args:
            _free_in_term(a, acc, bound)
    elif isinstance(e, Match):
        _free_in_term(e.scrut, acc, bound)
        for br in e.branches:
            _free_in_term(br.body, acc, bound | set(br.binders))
    elif isinstance(e, Annot):
        _free_in_term(e.term, acc, bound)
        _free_in_type(e.type, acc, bound)


def free_names(x: Type | Term | Neutral | Kind | Subst) -> frozenset[str]:
    """Free variable names (both type and term variables) of a syntax value."""
    acc: set[str] = set()
    if isinstance(x, tuple):
        _free_in_subst(x, acc)
    elif isinstance(x, (KType, KCtxUp)):
        _free_in_kind(x, acc, set())
    elif isinstance(x, (NVar, NForce)):
        _free_in_neutral(x, acc, set())
    elif isinstance(
        x, (TUnit, TNeutral, TThunk, TCtxUp, TDown, TForall, TArrow, TData)
    ):
        _free_in_type(x, acc, set())
    else:
        _free_in_term(x, acc, set())
    return frozenset(acc)


def fresh(base: str, avoid: frozenset[str] | set[str]) -> str:
    """A name not in ``avoid``, derived from ``base`` deterministically."""
    stem = base.rstrip("0123456789'")
    if not stem:
        stem = base or "x"
    if base not in avoid:
        return base
    i = 1
    while f"{stem}{i}" in avoid:
        i += 1
    return f"{stem}{i}"


# ---------------------------------------------------------------------------
# Alpha equivalence
#
# Compared up to consistent renaming of bound names; mode annotations compare
# exactly.  We thread two renaming environments (left name -> canonical index
# and right name -> canonical index).


class _AlphaEnv:
    __slots__ = ("left", "right", "depth")

    def __init__(self) -> None:
        self.left: dict[str, int] = {}
        self.right: dict[str, int] = {}
        self.depth = 0

    def bind(self, l: str, r: str) -> "_AlphaEnv":
        env = _AlphaEnv()
        env.left = dict(self.left)
        env.right = dict(self.right)
        env.left[l] = self.depth
        env.right[r] = self.depth
        env.depth = self.depth + 1
        return env

    def same_var(self, l: str, r: str) -> bool:
        li = self.left.get(l)
        ri = self.right.get(r)
        if li is None and ri is None:
            return l == r
        return li is not None and li == ri


def _alpha_kind(a: Kind, b: Kind, env: _AlphaEnv) -> bool:
    if isinstance(a, KType) and isinstance(b, KType):
        return a.mode == b.mode
    if isinstance(a, KCtxUp) and isinstance(b, KCtxUp):
        if a.hi != b.hi or a.lo != b.lo:
            return False
        inner = _alpha_context(a.ctx, b.ctx, env)
        if inner is None:
            return False
        return _alpha_kind(a.body, b.body, inner)
    return False


def _alpha_context(a: Context, b: Context, env: _AlphaEnv) -> _AlphaEnv | None:
    if len(a) != len(b):
        return None
    for da, db in zip(a, b):
        if isinstance(da, TyDecl) and isinstance(db, TyDecl):
            if not _alpha_kind(da.kind, db.kind, env):
                return None
        elif isinstance(da, TmDecl) and isinstance(db, TmDecl):
            if da.mode != db.mode or not _alpha_type(da.type, db.type, env):
                return None
        else:
            return None
        env = env.bind(da.name, db.name)
    return env


def _alpha_neutral(a: Neutral, b: Neutral, env: _AlphaEnv) -> bool:
    if isinstance(a, NVar) and isinstance(b, NVar):
        return env.same_var(a.name, b.name)
    if isinstance(a, NForce) and isinstance(b, NForce):
        return (
            a.hi == b.hi
            and a.lo == b.lo
            and _alpha_neutral(a.head, b.head, env)
            and _alpha_subst(a.sub, b.sub, env)
        )
    return False


def _alpha_type(a: Type, b: Type, env: _AlphaEnv) -> bool:
    if isinstance(a, TUnit) and isinstance(b, TUnit):
        return a.mode == b.mode
    if isinstance(a, TNeutral) and isinstance(b, TNeutral):
        return a.mode == b.mode and _alpha_neutral(a.neutral, b.neutral, env)
    if isinstance(a, TThunk) and isinstance(b, TThunk):
        if len(a.names) != len(b.names):
            return False
        inner = env
        for l, r in zip(a.names, b.names):
            inner = inner.bind(l, r)
        return _alpha_type(a.body, b.body, inner)
    if isinstance(a, TCtxUp) and isinstance(b, TCtxUp):
        if a.hi != b.hi or a.lo != b.lo:
            return False
        inner = _alpha_context(a.ctx, b.ctx, env)
        return inner is not None and _alpha_type(a.body, b.body, inner)
    if isinstance(a, TDown) and isinstance(b, TDown):
        return a.hi == b.hi and a.lo == b.lo and _alpha_type(a.body, b.body, env)
    if isinstance(a, TForall) and isinstance(b, TForall):
        return (
            a.mode == b.mode
            and _alpha_kind(a.kind, b.kind, env)
            and _alpha_type(a.body, b.body, env.bind(a.var, b.var))
        )
    if isinstance(a, TArrow) and isinstance(b, TArrow):
        return (
            a.mode == b.mode
            and _alpha_type(a.dom, b.dom, env)
            and _alpha_type(a.cod, b.cod, env)
        )
    if isinstance(a, TData) and isinstance(b, TData):
        return (
            a.name == b.name
            and a.mode == b.mode
            and len(a.args) == len(b.args)
            and all(_alpha_type(x, y, env) for x, y in zip(a.args, b.args))
        )
    return False


def _alpha_subst(a: Subst, b: Subst, env: _AlphaEnv) -> bool:
    if len(a) != len(b):
        return False
    for ea, eb in zip(a, b):
        if isinstance(ea, TyEntry) and isinstance(eb, TyEntry):
            if ea.name != eb.name or not _alpha_type(ea.type, eb.type, env):
                return False
        elif isinstance(ea, TmEntry) and isinstance(eb, TmEntry):
            if (
                ea.name != eb.name
                or ea.mode != eb.mode
                or not _alpha_term(ea.term, eb.term, env)
            ):
                return False
        else:
            return False
    return True


def _alpha_term(a: Term, b: Term, env: _AlphaEnv) -> bool:
    if isinstance(a, Var) and isinstance(b, Var):
        return env.same_var(a.name, b.name)
    if isinstance(a, One) and isinstance(b, One):
        return a.mode == b.mode
    if isinstance(a, Def) and isinstance(b, Def):
        return a.name == b.name
    if isinstance(a, Susp) and isinstance(b, Susp):
        if a.hi != b.hi or a.lo != b.lo or len(a.names) != len(b.names):
            return False
        inner = env
        for l, r in zip(a.names, b.names):
            inner = inner.bind(l, r)
        return _alpha_term(a.body, b.body, inner)
    if isinstance(a, Force) and isinstance(b, Force):
        return (
            a.hi == b.hi
            and a.lo == b.lo
            and _alpha_term(a.head, b.head, env)
            and _alpha_subst(a.sub, b.sub, env)
        )
    if isinstance(a, Store) and isinstance(b, Store):
        return a.hi == b.hi and a.lo == b.lo and _alpha_term(a.body, b.body, env)
    if isinstance(a, Load) and isinstance(b, Load):
        return (
            a.hi == b.hi
            and a.lo == b.lo
            and _alpha_term(a.bound, b.bound, env)
            and _alpha_term(a.cont, b.cont, env.bind(a.var, b.var))
        )
    if isinstance(a, TLam) and isinstance(b, TLam):
        return _alpha_kind(a.kind, b.kind, env) and _alpha_term(
            a.body, b.body, env.bind(a.var, b.var)
        )
    if isinstance(a, TApp) and isinstance(b, TApp):
        return _alpha_term(a.head, b.head, env) and _alpha_type(a.arg, b.arg, env)
    if isinstance(a, Lam) and isinstance(b, Lam):
        return _alpha_type(a.ann, b.ann, env) and _alpha_term(
            a.body, b.body, env.bind(a.var, b.var)
        )
    if isinstance(a, App) and isinstance(b, App):
        return _alpha_term(a.head, b.head, env) and _alpha_term(a.arg, b.arg, env)
    if isinstance(a, Ctor) and isinstance(b, Ctor):
        return (
            a.data == b.data
            and a.mode == b.mode
            and a.name == b.name
            and len(a.args) == len(b.args)
            and all(_alpha_term(x, y, env) for x, y in zip(a.args, b.args))
        )
    if isinstance(a, Match) and isinstance(b, Match):
        if a.mode != b.mode or len(a.branches) != len(b.branches):
            return False
        if not _alpha_term(a.scrut, b.scrut, env):
            return False
        for ba, bb in zip(a.branches, b.branches):
            if ba.ctor != bb.ctor or len(ba.binders) != len(bb.binders):
                return False
            inner = env
            for l, r in zip(ba.binders, bb.binders):
                inner = inner.bind(l, r)
            if not _alpha_term(ba.body, bb.body, inner):
                return False
        return True
    if isinstance(a, Annot) and isinstance(b, Annot):
        return _alpha_term(a.term, b.term, env) and _alpha_type(a.type, b.type, env)
    return False


_TYPE_CLASSES = (TUnit, TNeutral, TThunk, TCtxUp, TDown, TForall, TArrow, TData)
_KIND_CLASSES = (KType, KCtxUp)
_NEUTRAL_CLASSES = (NVar, NForce)


def alpha_eq(a, b) -> bool:
    """Equality up to consistent renaming of bound names.

    Overloaded on kinds, types, neutral types, terms, and substitutions.
    Mode annotations compare exactly.
    """
    env = _AlphaEnv()
    if isinstance(a, _KIND_CLASSES):
        return isinstance(b, _KIND_CLASSES) and _alpha_kind(a, b, env)
    if isinstance(a, _NEUTRAL_CLASSES):
        return isinstance(b, _NEUTRAL_CLASSES) and _alpha_neutral(a, b, env)
    if isinstance(a, _TYPE_CLASSES):
        return isinstance(b, _TYPE_CLASSES) and _alpha_type(a, b, env)
    if isinstance(a, tuple):
        return isinstance(b, tuple) and _alpha_subst(a, b, env)
    return _alpha_term(a, b, env)


def count_occurrences(e: Term, x: str) -> int:
    """Free occurrences of term variable x in e.

    Types, kinds, and substitution type entries never contribute: they cannot
    refer to term variables in a way that consumes them.
    """
    if isinstance(e, Var):
        return 1 if e.name == x else 0
    if isinstance(e, (One, Def)):
        return 0
    if isinstance(e, Susp):
        return 0 if x in e.names else count_occurrences(e.body, x)
    if isinstance(e, Force):
        n = count_occurrences(e.head, x)
        for entry in e.sub:
            if isinstance(entry, TmEntry):
                n += count_occurrences(entry.term, x)
        return n
    if isinstance(e, Store):
        return count_occurrences(e.body, x)
    if isinstance(e, Load):
        n = count_occurrences(e.bound, x)
        if e.var != x:
            n += count_occurrences(e.cont, x)
        return n
    if isinstance(e, TLam):
        return 0 if e.var == x else count_occurrences(e.body, x)
    if isinstance(e, TApp):
        return count_occurrences(e.head, x)
    if isinstance(e, Lam):
        return 0 if e.var == x else count_occurrences(e.body, x)
    if isinstance(e, App):
        return count_occurrences(e.head, x) + count_occurrences(e.arg, x)
    if isinstance(e, Ctor):
        return sum(count_occurrences(a, x) for a in e.args)
    if isinstance(e, Match):
        n = count_occurrences(e.scrut, x)
        for br in e.branches:
            if x not in br.binders:
                n += count_occurrences(br.body, x)
        return n
    if isinstance(e, Annot):
        return count_occurrences(e.term, x)
    raise TypeError(f"not a term: {e!r}")

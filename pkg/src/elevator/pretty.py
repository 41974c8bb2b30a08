"""Pretty-printing of core syntax to the surface grammar.

Core terms carry elaborated mode indices on the modal constructs; those are
printed in an optional ``<hi,lo>`` suffix (``susp<C,P> (...)``) that the
parser also accepts, so printing and re-parsing round-trips.
"""

from __future__ import annotations

from .syntax import (
    Annot,
    App,
    Context,
    Ctor,
    Def,
    Force,
    KCtxUp,
    Kind,
    KType,
    Lam,
    Load,
    Match,
    NForce,
    NVar,
    Neutral,
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

# Precedence levels: 0 = top (binders, arrows live at 1), 2 = application,
# 3 = atoms.
_TOP, _ARROW, _APP, _ATOM = 0, 1, 2, 3


def _paren(s: str, have: int, need: int) -> str:
    return f"({s})" if have < need else s


def pp_kind(k: Kind) -> str:
    if isinstance(k, KType):
        return f"Type@{k.mode}"
    return f"Up<{k.hi},{k.lo}>[ {pp_context(k.ctx)} |- {pp_kind(k.body)} ]"


def pp_context(ctx: Context) -> str:
    parts = []
    for d in ctx:
        if isinstance(d, TyDecl):
            parts.append(f"{d.name} : {pp_kind(d.kind)}")
        else:
            parts.append(f"{d.name} : {pp_type(d.type)}")
    return ", ".join(parts)


def pp_type(a: Type, prec: int = _TOP) -> str:
    if isinstance(a, TUnit):
        return f"Unit@{a.mode}"
    if isinstance(a, TNeutral):
        return pp_neutral(a.neutral, prec)
    if isinstance(a, TThunk):
        names = ", ".join(a.names)
        return f"thunk ({names} . {pp_type(a.body)})"
    if isinstance(a, TCtxUp):
        return f"Up<{a.hi},{a.lo}>[ {pp_context(a.ctx)} |- {pp_type(a.body)} ]"
    if isinstance(a, TDown):
        s = f"Down<{a.hi},{a.lo}> {pp_type(a.body, _ATOM)}"
        return _paren(s, _APP, prec)
    if isinstance(a, TForall):
        s = f"forall {a.var} : {pp_kind(a.kind)} . {pp_type(a.body)}"
        return _paren(s, _TOP, prec)
    if isinstance(a, TArrow):
        s = f"{pp_type(a.dom, _APP)} -> {pp_type(a.cod, _ARROW)}"
        return _paren(s, _ARROW, prec)
    if isinstance(a, TData):
        if not a.args:
            return f"{a.name}{{{a.mode}}}"
        s = f"{a.name}{{{a.mode}}} " + " ".join(pp_type(t, _ATOM) for t in a.args)
        return _paren(s, _APP, prec)
    raise TypeError(f"not a type: {a!r}")


def pp_neutral(p: Neutral, prec: int = _TOP) -> str:
    if isinstance(p, NVar):
        return p.name
    head = p.head.name if isinstance(p.head, NVar) else f"({pp_neutral(p.head)})"
    s = f"force<{p.hi},{p.lo}> {head} @ ({pp_subst(p.sub)})"
    return _paren(s, _APP, prec)


def pp_subst(sigma: Subst) -> str:
    parts = []
    for e in sigma:
        if isinstance(e, TyEntry):
            parts.append(pp_type(e.type))
        else:
            parts.append(pp_term(e.term))
    return ", ".join(parts)


def pp_term(e: Term, prec: int = _TOP) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Def):
        return e.name
    if isinstance(e, One):
        return f"unit@{e.mode}"
    if isinstance(e, Susp):
        names = ", ".join(e.names)
        return f"susp<{e.hi},{e.lo}> ({names} . {pp_term(e.body)})"
    if isinstance(e, Force):
        s = f"force<{e.hi},{e.lo}> {pp_term(e.head, _ATOM)} @ ({pp_subst(e.sub)})"
        return _paren(s, _APP, prec)
    if isinstance(e, Store):
        s = f"store<{e.hi},{e.lo}> {pp_term(e.body, _ATOM)}"
        return _paren(s, _APP, prec)
    if isinstance(e, Load):
        s = (
            f"load<{e.hi},{e.lo}> {e.var} = {pp_term(e.bound)} in {pp_term(e.cont)}"
        )
        return _paren(s, _TOP, prec)
    if isinstance(e, TLam):
        s = f"/\\{e.var} : {pp_kind(e.kind)} . {pp_term(e.body)}"
        return _paren(s, _TOP, prec)
    if isinstance(e, TApp):
        s = f"{pp_term(e.head, _APP)} [{pp_type(e.arg)}]"
        return _paren(s, _APP, prec)
    if isinstance(e, Lam):
        s = f"\\{e.var} : {pp_type(e.ann)} . {pp_term(e.body)}"
        return _paren(s, _TOP, prec)
    if isinstance(e, App):
        s = f"{pp_term(e.head, _APP)} {pp_term(e.arg, _ATOM)}"
        return _paren(s, _APP, prec)
    if isinstance(e, Ctor):
        head = f"{e.name}{{{e.mode}}}"
        if not e.args:
            return head
        s = head + " " + " ".join(pp_term(a, _ATOM) for a in e.args)
        return _paren(s, _APP, prec)
    if isinstance(e, Annot):
        return f"({pp_term(e.term)} : {pp_type(e.type)})"
    if isinstance(e, Match):
        branches = " ".join(
            f"| {br.ctor}{' ' if br.binders else ''}{' '.join(br.binders)} => {pp_term(br.body)}"
            for br in e.branches
        )
        s = f"match {pp_term(e.scrut)} with {branches}"
        return _paren(s, _TOP, prec)
    raise TypeError(f"not a term: {e!r}")

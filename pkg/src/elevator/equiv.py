"""Equivalence over a mode.

Two well-typed subjects are equivalent over an observer mode n when their
syntax agrees everywhere the observer can see: sub-judgments whose mode is
accessible from n (mode >= n) are compared structurally with exact mode
indices, while sub-judgments at inaccessible modes succeed outright — both
sides are presupposed well-typed, and nothing else about them is observable.

Callers are expected to have type-checked both sides already; these
predicates never re-derive typing.
"""

from __future__ import annotations

from .modes import Mode, ModeSpec
from .syntax import (
    Annot,
    App,
    Context,
    Ctor,
    Def,
    Force,
    Kind,
    KCtxUp,
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
    type_mode,
)
from .subst import rename_kind, rename_term, rename_type
from .typecheck import Signature, instantiate_ctor, map_modes

_EMPTY_SIG = Signature()


def _kind_mode(k: Kind) -> Mode:
    return k.mode if isinstance(k, KType) else k.hi


def equiv_context(g1: Context, g2: Context, n: Mode, spec: ModeSpec) -> bool:
    if len(g1) != len(g2):
        return False
    for d1, d2 in zip(g1, g2):
        if type(d1) is not type(d2) or d1.name != d2.name:
            return False
        if isinstance(d1, TyDecl):
            if not equiv_kind(d1.kind, d2.kind, n, spec):
                return False
        else:
            if d1.mode != d2.mode:
                return False
            if not equiv_type(d1.type, d2.type, n, spec):
                return False
    return True


def equiv_kind(k1: Kind, k2: Kind, n: Mode, spec: ModeSpec) -> bool:
    if _kind_mode(k1) != _kind_mode(k2):
        return False
    if not spec.geq(_kind_mode(k1), n):
        return True
    if isinstance(k1, KType):
        return isinstance(k2, KType)
    if not isinstance(k2, KCtxUp):
        return False
    if k1.hi != k2.hi or k1.lo != k2.lo:
        return False
    if not equiv_context(k1.ctx, k2.ctx, n, spec):
        return False
    # The body lives at the lower mode and gates itself on entry.
    return equiv_kind(k1.body, k2.body, n, spec)


def equiv_type(a1: Type, a2: Type, n: Mode, spec: ModeSpec) -> bool:
    # Thunks are classified by a contextual kind rather than a mode; the
    # body gates itself at its own mode.
    if isinstance(a1, TThunk) or isinstance(a2, TThunk):
        return (
            isinstance(a1, TThunk)
            and isinstance(a2, TThunk)
            and _thunk_like(a1, a2, n, spec)
        )
    if type_mode(a1) != type_mode(a2):
        return False
    if not spec.geq(type_mode(a1), n):
        return True
    if type(a1) is not type(a2):
        return False
    if isinstance(a1, TUnit):
        return True
    if isinstance(a1, TNeutral):
        return equiv_neutral(a1.neutral, a2.neutral, n, spec)
    if isinstance(a1, TCtxUp):
        return (
            a1.hi == a2.hi
            and a1.lo == a2.lo
            and equiv_context(a1.ctx, a2.ctx, n, spec)
            and equiv_type(a1.body, a2.body, n, spec)
        )
    if isinstance(a1, TDown):
        return a1.hi == a2.hi and a1.lo == a2.lo and equiv_type(
            a1.body, a2.body, n, spec
        )
    if isinstance(a1, TForall):
        if not equiv_kind(a1.kind, a2.kind, n, spec):
            return False
        body2 = a2.body
        if a2.var != a1.var:
            body2 = rename_type(body2, {a2.var: a1.var})
        return equiv_type(a1.body, body2, n, spec)
    if isinstance(a1, TArrow):
        return equiv_type(a1.dom, a2.dom, n, spec) and equiv_type(
            a1.cod, a2.cod, n, spec
        )
    if isinstance(a1, TData):
        return (
            a1.name == a2.name
            and len(a1.args) == len(a2.args)
            and all(
                equiv_type(x, y, n, spec) for x, y in zip(a1.args, a2.args)
            )
        )
    return False


def equiv_neutral(p1: Neutral, p2: Neutral, n: Mode, spec: ModeSpec) -> bool:
    if type(p1) is not type(p2):
        return False
    if isinstance(p1, NVar):
        return p1.name == p2.name
    if p1.hi != p2.hi or p1.lo != p2.lo:
        return False
    if spec.geq(p1.hi, n) and not equiv_neutral(p1.head, p2.head, n, spec):
        return False
    return equiv_subst(p1.sub, p2.sub, n, spec)


def equiv_subst(s1: Subst, s2: Subst, n: Mode, spec: ModeSpec) -> bool:
    if len(s1) != len(s2):
        return False
    for e1, e2 in zip(s1, s2):
        if type(e1) is not type(e2):
            return False
        if isinstance(e1, TyEntry):
            if not equiv_type(e1.type, e2.type, n, spec):
                return False
        else:
            if e1.mode != e2.mode:
                return False
            if spec.geq(e1.mode, n) and not equiv_term(
                e1.term, e2.term, n, spec, e1.mode
            ):
                return False
    return True


def _thunk_like(a1: TThunk, a2: TThunk, n: Mode, spec: ModeSpec) -> bool:
    body2 = a2.body
    if a2.names != a1.names:
        if len(a2.names) != len(a1.names):
            return False
        body2 = rename_type(body2, dict(zip(a2.names, a1.names)))
    return equiv_type(a1.body, body2, n, spec)


def equiv_term(
    e1: Term,
    e2: Term,
    n: Mode,
    spec: ModeSpec,
    jmode: Mode | None = None,
    sig: Signature = _EMPTY_SIG,
) -> bool:
    """Compare terms judged at mode jmode; None means "always compare"."""
    if jmode is not None and not spec.geq(jmode, n):
        return True
    if type(e1) is not type(e2):
        return False
    if isinstance(e1, Var):
        return e1.name == e2.name
    if isinstance(e1, Def):
        return e1.name == e2.name
    if isinstance(e1, One):
        return e1.mode == e2.mode
    if isinstance(e1, Susp):
        if e1.hi != e2.hi or e1.lo != e2.lo:
            return False
        if not spec.geq(e1.lo, n):
            return True
        body2 = e2.body
        if e2.names != e1.names:
            if len(e2.names) != len(e1.names):
                return False
            body2 = rename_term(body2, dict(zip(e2.names, e1.names)))
        return equiv_term(e1.body, body2, n, spec, e1.lo, sig)
    if isinstance(e1, Force):
        if e1.hi != e2.hi or e1.lo != e2.lo:
            return False
        if spec.geq(e1.hi, n) and not equiv_term(
            e1.head, e2.head, n, spec, e1.hi, sig
        ):
            return False
        return equiv_subst(e1.sub, e2.sub, n, spec)
    if isinstance(e1, Store):
        if e1.hi != e2.hi or e1.lo != e2.lo:
            return False
        return equiv_term(e1.body, e2.body, n, spec, e1.hi, sig)
    if isinstance(e1, Load):
        if e1.hi != e2.hi or e1.lo != e2.lo:
            return False
        if not equiv_term(e1.bound, e2.bound, n, spec, e1.lo, sig):
            return False
        cont2 = e2.cont
        if e2.var != e1.var:
            cont2 = rename_term(cont2, {e2.var: e1.var})
        return equiv_term(e1.cont, cont2, n, spec, jmode, sig)
    if isinstance(e1, TLam):
        if not equiv_kind(e1.kind, e2.kind, n, spec):
            return False
        body2 = e2.body
        if e2.var != e1.var:
            body2 = rename_term(body2, {e2.var: e1.var})
        return equiv_term(e1.body, body2, n, spec, jmode, sig)
    if isinstance(e1, TApp):
        return equiv_term(e1.head, e2.head, n, spec, jmode, sig) and equiv_type(
            e1.arg, e2.arg, n, spec
        )
    if isinstance(e1, Lam):
        if not equiv_type(e1.ann, e2.ann, n, spec):
            return False
        body2 = e2.body
        if e2.var != e1.var:
            body2 = rename_term(body2, {e2.var: e1.var})
        return equiv_term(e1.body, body2, n, spec, jmode, sig)
    if isinstance(e1, App):
        return equiv_term(e1.head, e2.head, n, spec, jmode, sig) and equiv_term(
            e1.arg, e2.arg, n, spec, jmode, sig
        )
    if isinstance(e1, Ctor):
        if e1.data != e2.data or e1.mode != e2.mode or e1.name != e2.name:
            return False
        if len(e1.args) != len(e2.args):
            return False
        arg_modes = _ctor_arg_modes(e1, sig)
        return all(
            equiv_term(x, y, n, spec, m, sig)
            for x, y, m in zip(e1.args, e2.args, arg_modes)
        )
    if isinstance(e1, Match):
        if e1.mode != e2.mode or len(e1.branches) != len(e2.branches):
            return False
        if not equiv_term(e1.scrut, e2.scrut, n, spec, e1.mode, sig):
            return False
        for b1, b2 in zip(e1.branches, e2.branches):
            if b1.ctor != b2.ctor or len(b1.binders) != len(b2.binders):
                return False
            body2 = b2.body
            if b2.binders != b1.binders:
                body2 = rename_term(body2, dict(zip(b2.binders, b1.binders)))
            if not equiv_term(b1.body, body2, n, spec, jmode, sig):
                return False
        return True
    if isinstance(e1, Annot):
        return equiv_type(e1.type, e2.type, n, spec) and equiv_term(
            e1.term, e2.term, n, spec, jmode, sig
        )
    return False


def _ctor_arg_modes(e: Ctor, sig: Signature) -> list[Mode]:
    """Judgment mode of each constructor argument.

    Substituting type parameters never changes a type's top-level mode, so
    the instantiated declaration's argument modes are correct without
    knowing the type arguments.  Falls back to the data mode when the
    declaration is unknown.
    """
    decl = sig.data(e.data) if e.data else None
    if decl is not None:
        ctor = decl.ctor(e.name)
        if ctor is not None and len(ctor.args) == len(e.args):
            mapped = map_modes(
                ctor.args, lambda m: e.mode if m == decl.mode_param else m
            )
            return [type_mode(a) for a in mapped]
    return [e.mode] * len(e.args)

"""Hereditary substitution and the split operations on contexts and
substitutions.

Type-level substitution reduces the type-level redices it creates (a force
whose head becomes a thunk), so normal types stay normal.  Termination is
measured by the dependency-erased context: every recursive pass into a thunk
body uses a measure context taken from strictly inside the current one.  On
ill-typed inputs the operations fail with :class:`SubstError` instead of
producing partial output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

from .modes import Mode, ModeSpec
from .syntax import (
    Annot,
    App,
    Branch,
    Context,
    Ctor,
    DepCtx,
    DepKind,
    DKCtxUp,
    DKType,
    DTmDecl,
    DTyDecl,
    Def,
    Entry,
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
    dep_lookup,
    erase_kind,
    free_names,
    fresh,
)


class SubstError(Exception):
    """Substitution failed on an ill-typed input."""


class SplitError(Exception):
    """A context or substitution split consumed a contraction-free variable twice."""

    def __init__(self, name: str):
        super().__init__(f"variable {name!r} demanded on both sides of a split "
                         "but its mode does not allow contraction")
        self.name = name


@dataclass(frozen=True)
class Reduced:
    """A neutral head was substituted away; carries the measure kind."""

    type: Type
    kind: DepKind


@dataclass(frozen=True)
class StillNeutral:
    neutral: Neutral


NeutralResult = Union[Reduced, StillNeutral]


class _Budget:
    """Optional recursion-depth watchdog shared across one substitution call."""

    __slots__ = ("remaining",)

    def __init__(self, limit: int | None):
        self.remaining = limit

    def tick(self) -> None:
        if self.remaining is None:
            return
        self.remaining -= 1
        if self.remaining < 0:
            raise SubstError("substitution exceeded its recursion-depth watchdog")


def _lookup_ty(sigma: Subst, name: str) -> TyEntry | None:
    for e in sigma:
        if isinstance(e, TyEntry) and e.name == name:
            return e
    return None


def _lookup_tm(sigma: Subst, name: str) -> TmEntry | None:
    for e in sigma:
        if isinstance(e, TmEntry) and e.name == name:
            return e
    return None


def _drop(sigma: Subst, names) -> Subst:
    names = set(names)
    return tuple(e for e in sigma if e.name not in names)


def _avoid_set(sigma: Subst) -> set[str]:
    avoid = set(free_names(sigma))
    avoid.update(e.name for e in sigma)
    return avoid


# ---------------------------------------------------------------------------
# Substitution for types


def subst_type(sigma: Subst, gamma: DepCtx, a: Type, *, max_depth: int | None = None) -> Type:
    """Hereditary substitution on a normal type; the result is normal."""
    return _subst_type(sigma, gamma, a, _Budget(max_depth))


def subst_neutral(
    sigma: Subst, gamma: DepCtx, p: Neutral, *, max_depth: int | None = None
) -> NeutralResult:
    return _subst_neutral(sigma, gamma, p, _Budget(max_depth))


def _subst_type(sigma: Subst, gamma: DepCtx, a: Type, budget: _Budget) -> Type:
    budget.tick()
    if isinstance(a, TUnit):
        return a
    if isinstance(a, TNeutral):
        r = _subst_neutral(sigma, gamma, a.neutral, budget)
        if isinstance(r, Reduced):
            return r.type
        return TNeutral(r.neutral, a.mode)
    if isinstance(a, TThunk):
        inner, names = _enter_names(sigma, a.names, a.body)
        if inner is None:
            return a
        body = _subst_type(inner[0], gamma, inner[1], budget)
        return TThunk(names, body)
    if isinstance(a, TCtxUp):
        ctx, body_sigma, ren = _subst_context_binding(sigma, gamma, a.ctx, budget)
        body = _subst_type(body_sigma, gamma, _rename_free_type(a.body, ren), budget)
        return TCtxUp(a.hi, a.lo, ctx, body)
    if isinstance(a, TDown):
        return TDown(a.hi, a.lo, _subst_type(sigma, gamma, a.body, budget))
    if isinstance(a, TForall):
        kind = _subst_kind(sigma, gamma, a.kind, budget)
        var = a.var
        body = a.body
        rest = _drop(sigma, [var])
        avoid = _avoid_set(rest)
        if var in avoid:
            new = fresh(var, avoid | free_names(body))
            body = _rename_free_type(body, {var: new})
            var = new
        return TForall(var, kind, _subst_type(rest, gamma, body, budget), a.mode)
    if isinstance(a, TArrow):
        return TArrow(
            _subst_type(sigma, gamma, a.dom, budget),
            _subst_type(sigma, gamma, a.cod, budget),
            a.mode,
        )
    if isinstance(a, TData):
        return TData(
            a.name, a.mode, tuple(_subst_type(sigma, gamma, t, budget) for t in a.args)
        )
    raise TypeError(f"not a type: {a!r}")


def _subst_neutral(sigma: Subst, gamma: DepCtx, p: Neutral, budget: _Budget) -> NeutralResult:
    budget.tick()
    if isinstance(p, NVar):
        entry = _lookup_ty(sigma, p.name)
        if entry is None:
            return StillNeutral(p)
        decl = dep_lookup(gamma, p.name)
        if decl is None:
            raise SubstError(
                f"type variable {p.name!r} is substituted but missing from the "
                "measure context"
            )
        return Reduced(entry.type, decl.kind)
    # Force of a neutral head.
    tau = _subst_subst(sigma, gamma, p.sub, budget)
    head = _subst_neutral(sigma, gamma, p.head, budget)
    if isinstance(head, StillNeutral):
        return StillNeutral(NForce(head.neutral, tau, p.hi, p.lo))
    if isinstance(head.type, TNeutral):
        # The head was replaced by another neutral (e.g. a type variable of
        # contextual kind): the force stays stuck.
        return StillNeutral(NForce(head.type.neutral, tau, p.hi, p.lo))
    if not isinstance(head.type, TThunk):
        raise SubstError("a forced type head reduced to a non-thunk")
    if not isinstance(head.kind, DKCtxUp):
        raise SubstError("a reduced thunk head has a non-contextual recorded kind")
    psi = head.kind.ctx
    thunk = head.type
    if len(psi) != len(thunk.names):
        raise SubstError("thunk arity differs from its recorded kind context")
    if len(tau) != len(psi):
        raise SubstError("explicit substitution arity differs from the thunk kind")
    # Relabel the substitution domain and the measure context to the thunk's
    # bound names; labels carry no occurrences, so no capture is possible.
    tau2: list[Entry] = []
    psi2: list = []
    for name, entry, decl in zip(thunk.names, tau, psi):
        if isinstance(entry, TyEntry):
            if not isinstance(decl, DTyDecl):
                raise SubstError("substitution entry sort differs from its kind context")
            tau2.append(TyEntry(name, entry.type))
            psi2.append(DTyDecl(name, decl.kind))
        else:
            if not isinstance(decl, DTmDecl):
                raise SubstError("substitution entry sort differs from its kind context")
            tau2.append(TmEntry(name, entry.term, entry.mode))
            psi2.append(DTmDecl(name))
    result = _subst_type(tuple(tau2), tuple(psi2), thunk.body, budget)
    return Reduced(result, head.kind.body)


def _enter_names(
    sigma: Subst, names: tuple[str, ...], body
) -> tuple[tuple[Subst, object], tuple[str, ...]] | None:
    """Drop shadowed entries and rename bound names clashing with sigma."""
    rest = _drop(sigma, names)
    if not rest:
        return None
    avoid = _avoid_set(rest)
    ren: dict[str, str] = {}
    out: list[str] = []
    taken = set(names)
    for n in names:
        if n in avoid:
            new = fresh(n, avoid | set(free_names(body)) | taken | set(ren.values()))
            ren[n] = new
            out.append(new)
        else:
            out.append(n)
    if ren:
        if isinstance(body, (TUnit, TNeutral, TThunk, TCtxUp, TDown, TForall, TArrow, TData)):
            body = _rename_free_type(body, ren)
        else:
            body = _rename_free_term(body, ren)
    return (rest, body), tuple(out)


# ---------------------------------------------------------------------------
# Renaming of free variables (both sorts) without touching modes


def _rename_free_type(a: Type, ren: dict[str, str]) -> Type:
    if not ren:
        return a
    if isinstance(a, TUnit):
        return a
    if isinstance(a, TNeutral):
        return TNeutral(_rename_free_neutral(a.neutral, ren), a.mode)
    if isinstance(a, TThunk):
        inner = {k: v for k, v in ren.items() if k not in a.names}
        return TThunk(a.names, _rename_free_type(a.body, inner))
    if isinstance(a, TCtxUp):
        ctx, inner = _rename_free_context(a.ctx, ren)
        return TCtxUp(a.hi, a.lo, ctx, _rename_free_type(a.body, inner))
    if isinstance(a, TDown):
        return TDown(a.hi, a.lo, _rename_free_type(a.body, ren))
    if isinstance(a, TForall):
        inner = {k: v for k, v in ren.items() if k != a.var}
        return TForall(
            a.var, _rename_free_kind(a.kind, ren), _rename_free_type(a.body, inner), a.mode
        )
    if isinstance(a, TArrow):
        return TArrow(
            _rename_free_type(a.dom, ren), _rename_free_type(a.cod, ren), a.mode
        )
    if isinstance(a, TData):
        return TData(a.name, a.mode, tuple(_rename_free_type(t, ren) for t in a.args))
    raise TypeError(f"not a type: {a!r}")


def _rename_free_neutral(p: Neutral, ren: dict[str, str]) -> Neutral:
    if isinstance(p, NVar):
        return NVar(ren.get(p.name, p.name))
    return NForce(
        _rename_free_neutral(p.head, ren),
        tuple(_rename_free_entry(e, ren) for e in p.sub),
        p.hi,
        p.lo,
    )


def _rename_free_entry(e: Entry, ren: dict[str, str]) -> Entry:
    if isinstance(e, TyEntry):
        return TyEntry(e.name, _rename_free_type(e.type, ren))
    return TmEntry(e.name, _rename_free_term(e.term, ren), e.mode)


def _rename_free_kind(k: Kind, ren: dict[str, str]) -> Kind:
    if isinstance(k, KType):
        return k
    ctx, inner = _rename_free_context(k.ctx, ren)
    return KCtxUp(k.hi, k.lo, ctx, _rename_free_kind(k.body, inner))


def _rename_free_context(ctx: Context, ren: dict[str, str]) -> tuple[Context, dict[str, str]]:
    out = []
    cur = dict(ren)
    for d in ctx:
        if isinstance(d, TyDecl):
            out.append(TyDecl(d.name, _rename_free_kind(d.kind, cur)))
        else:
            out.append(TmDecl(d.name, _rename_free_type(d.type, cur), d.mode))
        cur.pop(d.name, None)
    return tuple(out), cur


def _rename_free_term(e: Term, ren: dict[str, str]) -> Term:
    if not ren:
        return e
    if isinstance(e, Var):
        return Var(ren.get(e.name, e.name))
    if isinstance(e, (One, Def)):
        return e
    if isinstance(e, Susp):
        inner = {k: v for k, v in ren.items() if k not in e.names}
        return Susp(e.hi, e.lo, e.names, _rename_free_term(e.body, inner))
    if isinstance(e, Force):
        return Force(
            e.hi,
            e.lo,
            _rename_free_term(e.head, ren),
            tuple(_rename_free_entry(x, ren) for x in e.sub),
        )
    if isinstance(e, Store):
        return Store(e.hi, e.lo, _rename_free_term(e.body, ren))
    if isinstance(e, Load):
        inner = {k: v for k, v in ren.items() if k != e.var}
        return Load(
            e.hi, e.lo, e.var, _rename_free_term(e.bound, ren), _rename_free_term(e.cont, inner)
        )
    if isinstance(e, TLam):
        inner = {k: v for k, v in ren.items() if k != e.var}
        return TLam(e.var, _rename_free_kind(e.kind, ren), _rename_free_term(e.body, inner))
    if isinstance(e, TApp):
        return TApp(_rename_free_term(e.head, ren), _rename_free_type(e.arg, ren))
    if isinstance(e, Lam):
        inner = {k: v for k, v in ren.items() if k != e.var}
        return Lam(e.var, _rename_free_type(e.ann, ren), _rename_free_term(e.body, inner))
    if isinstance(e, App):
        return App(_rename_free_term(e.head, ren), _rename_free_term(e.arg, ren))
    if isinstance(e, Ctor):
        return Ctor(e.data, e.mode, e.name, tuple(_rename_free_term(a, ren) for a in e.args))
    if isinstance(e, Match):
        branches = []
        for br in e.branches:
            inner = {k: v for k, v in ren.items() if k not in br.binders}
            branches.append(Branch(br.ctor, br.binders, _rename_free_term(br.body, inner)))
        return Match(e.mode, _rename_free_term(e.scrut, ren), tuple(branches))
    if isinstance(e, Annot):
        return Annot(_rename_free_term(e.term, ren), _rename_free_type(e.type, ren))
    raise TypeError(f"not a term: {e!r}")


# Free-variable renaming is useful to the checker and the evaluator, too.
rename_type = _rename_free_type
rename_term = _rename_free_term
rename_kind = _rename_free_kind
rename_neutral = _rename_free_neutral


# ---------------------------------------------------------------------------
# Substitution for kinds, contexts, substitutions, and terms


def subst_kind(sigma: Subst, gamma: DepCtx, k: Kind, *, max_depth: int | None = None) -> Kind:
    return _subst_kind(sigma, gamma, k, _Budget(max_depth))


def _subst_kind(sigma: Subst, gamma: DepCtx, k: Kind, budget: _Budget) -> Kind:
    if isinstance(k, KType):
        return k
    ctx, body_sigma, ren = _subst_context_binding(sigma, gamma, k.ctx, budget)
    body = _subst_kind(body_sigma, gamma, _rename_free_kind(k.body, ren), budget)
    return KCtxUp(k.hi, k.lo, ctx, body)


def subst_context(sigma: Subst, gamma: DepCtx, ctx: Context, *, max_depth: int | None = None) -> Context:
    out, _, _ = _subst_context_binding(sigma, gamma, ctx, _Budget(max_depth))
    return out


def _subst_context_binding(
    sigma: Subst, gamma: DepCtx, ctx: Context, budget: _Budget
) -> tuple[Context, Subst, dict[str, str]]:
    """Substitute a binding context; returns the substitution and renaming
    that apply past it (shadowed entries removed, clashing names freshened)."""
    out: list = []
    cur = sigma
    ren: dict[str, str] = {}
    avoid = _avoid_set(sigma)
    for d in ctx:
        name = d.name
        if name in avoid:
            name = fresh(name, avoid | {x.name for x in out} | set(ren.values()))
            ren = {**ren, d.name: name}
        if isinstance(d, TyDecl):
            kind = _subst_kind(cur, gamma, _rename_free_kind(d.kind, ren), budget)
            out.append(TyDecl(name, kind))
        else:
            ty = _subst_type(cur, gamma, _rename_free_type(d.type, ren), budget)
            out.append(TmDecl(name, ty, d.mode))
        cur = _drop(cur, [d.name])
    return tuple(out), cur, ren


def subst_subst(sigma: Subst, gamma: DepCtx, tau: Subst, *, max_depth: int | None = None) -> Subst:
    return _subst_subst(sigma, gamma, tau, _Budget(max_depth))


def _subst_subst(sigma: Subst, gamma: DepCtx, tau: Subst, budget: _Budget) -> Subst:
    out: list[Entry] = []
    for e in tau:
        if isinstance(e, TyEntry):
            out.append(TyEntry(e.name, _subst_type(sigma, gamma, e.type, budget)))
        else:
            out.append(TmEntry(e.name, _subst_term(sigma, gamma, e.term, budget), e.mode))
    return tuple(out)


def subst_term(sigma: Subst, gamma: DepCtx, e: Term, *, max_depth: int | None = None) -> Term:
    return _subst_term(sigma, gamma, e, _Budget(max_depth))


def guess_dep_kind(a: Type):
    """Dependency kind of a substitution entry inferred from its shape: a
    thunk entry is contextual, everything else is a plain type."""
    from .syntax import TThunk

    if isinstance(a, TThunk):
        return DKCtxUp(
            "", "", tuple(DTmDecl(n) for n in a.names), guess_dep_kind(a.body)
        )
    return DKType(getattr(a, "mode", ""))


def dep_ctx_of(sigma: Subst) -> DepCtx:
    """A measure context matching a substitution's entries by shape."""
    out: list = []
    for e in sigma:
        if isinstance(e, TyEntry):
            out.append(DTyDecl(e.name, guess_dep_kind(e.type)))
        else:
            out.append(DTmDecl(e.name))
    return tuple(out)


def _subst_term(sigma: Subst, gamma: DepCtx, e: Term, budget: _Budget) -> Term:
    budget.tick()
    if not sigma:
        return e
    if isinstance(e, Var):
        entry = _lookup_tm(sigma, e.name)
        return entry.term if entry is not None else e
    if isinstance(e, (One, Def)):
        return e
    if isinstance(e, Susp):
        entered = _enter_names(sigma, e.names, e.body)
        if entered is None:
            return e
        (rest, body), names = entered
        return Susp(e.hi, e.lo, names, _subst_term(rest, gamma, body, budget))
    if isinstance(e, Force):
        return Force(
            e.hi,
            e.lo,
            _subst_term(sigma, gamma, e.head, budget),
            _subst_subst(sigma, gamma, e.sub, budget),
        )
    if isinstance(e, Store):
        return Store(e.hi, e.lo, _subst_term(sigma, gamma, e.body, budget))
    if isinstance(e, Load):
        bound = _subst_term(sigma, gamma, e.bound, budget)
        var, cont, rest = _enter_binder(sigma, e.var, e.cont)
        return Load(e.hi, e.lo, var, bound, _subst_term(rest, gamma, cont, budget))
    if isinstance(e, TLam):
        kind = _subst_kind(sigma, gamma, e.kind, budget)
        var, body, rest = _enter_binder(sigma, e.var, e.body)
        return TLam(var, kind, _subst_term(rest, gamma, body, budget))
    if isinstance(e, TApp):
        return TApp(
            _subst_term(sigma, gamma, e.head, budget),
            _subst_type(sigma, gamma, e.arg, budget),
        )
    if isinstance(e, Lam):
        ann = _subst_type(sigma, gamma, e.ann, budget)
        var, body, rest = _enter_binder(sigma, e.var, e.body)
        return Lam(var, ann, _subst_term(rest, gamma, body, budget))
    if isinstance(e, App):
        return App(
            _subst_term(sigma, gamma, e.head, budget),
            _subst_term(sigma, gamma, e.arg, budget),
        )
    if isinstance(e, Ctor):
        return Ctor(
            e.data, e.mode, e.name, tuple(_subst_term(sigma, gamma, a, budget) for a in e.args)
        )
    if isinstance(e, Match):
        scrut = _subst_term(sigma, gamma, e.scrut, budget)
        branches = []
        for br in e.branches:
            entered = _enter_names(sigma, br.binders, br.body)
            if entered is None:
                branches.append(br)
                continue
            (rest, body), binders = entered
            branches.append(Branch(br.ctor, binders, _subst_term(rest, gamma, body, budget)))
        return Match(e.mode, scrut, tuple(branches))
    if isinstance(e, Annot):
        return Annot(
            _subst_term(sigma, gamma, e.term, budget),
            _subst_type(sigma, gamma, e.type, budget),
        )
    raise TypeError(f"not a term: {e!r}")


def _enter_binder(sigma: Subst, var: str, body: Term) -> tuple[str, Term, Subst]:
    rest = _drop(sigma, [var])
    avoid = _avoid_set(rest)
    if var in avoid:
        new = fresh(var, avoid | set(free_names(body)))
        return new, _rename_free_term(body, {var: new}), rest
    return var, body, rest


# ---------------------------------------------------------------------------
# Single substitutions


def single_subst_type(alpha: str, a: Type, kappa: DepKind, target: Type) -> Type:
    return subst_type((TyEntry(alpha, a),), (DTyDecl(alpha, kappa),), target)


def single_subst_term(x: str, e: Term, mode: Mode, target: Term) -> Term:
    return subst_term((TmEntry(x, e, mode),), (DTmDecl(x),), target)


# ---------------------------------------------------------------------------
# Usage masks and splits
#
# A usage mask over a context records which term declarations have been
# consumed; splits are masks of demands over one shared ordered context or
# substitution, which makes the merge a deterministic, testable operation.

UsageMask = frozenset[str]


def term_decl_modes(ctx: Context) -> dict[str, Mode]:
    return {d.name: d.mode for d in ctx if isinstance(d, TmDecl)}


def merge_usage(ctx: Context, u1: UsageMask, u2: UsageMask, spec: ModeSpec) -> UsageMask:
    """Merge consumption from two subderivations over the same context."""
    modes = term_decl_modes(ctx)
    for x in u1 & u2:
        if not spec.allows_contraction(modes[x]):
            raise SplitError(x)
    return u1 | u2


def merge_subst_usage(sigma: Subst, u1: UsageMask, u2: UsageMask, spec: ModeSpec) -> UsageMask:
    modes = {e.name: e.mode for e in sigma if isinstance(e, TmEntry)}
    for x in u1 & u2:
        if not spec.allows_contraction(modes[x]):
            raise SplitError(x)
    return u1 | u2


def split_substitution(
    sigma: Subst, demand1: UsageMask, demand2: UsageMask, spec: ModeSpec
) -> tuple[Subst, Subst]:
    """Split a substitution along two demand masks over its term entries.

    Type entries go to both sides freely; a term entry demanded on both sides
    needs contraction at its mode.
    """
    left: list[Entry] = []
    right: list[Entry] = []
    for e in sigma:
        if isinstance(e, TyEntry):
            left.append(e)
            right.append(e)
            continue
        in1 = e.name in demand1
        in2 = e.name in demand2
        if in1 and in2 and not spec.allows_contraction(e.mode):
            raise SplitError(e.name)
        if in1:
            left.append(e)
        if in2:
            right.append(e)
    return tuple(left), tuple(right)


def merge_split(
    sigma1: Subst, sigma2: Subst, spec: ModeSpec
) -> Subst:
    """Inverse of :func:`split_substitution` for covering splits."""
    out: list[Entry] = list(sigma1)
    names = {e.name for e in sigma1}
    for e in sigma2:
        if e.name in names:
            dup = next(x for x in sigma1 if x.name == e.name)
            if isinstance(e, TmEntry) and not spec.allows_contraction(e.mode):
                raise SplitError(e.name)
            if dup != e:
                raise SplitError(e.name)
            continue
        out.append(e)
    # Restore domain order where interleaved; callers pass aligned halves.
    return tuple(out)


def scan_no_redex(a: Type) -> bool:
    """Structural scan: no type-level force has a thunk head anywhere."""
    if isinstance(a, TNeutral):
        return _scan_neutral(a.neutral)
    if isinstance(a, (TUnit,)):
        return True
    if isinstance(a, TThunk):
        return scan_no_redex(a.body)
    if isinstance(a, (TCtxUp,)):
        return all(_scan_decl(d) for d in a.ctx) and scan_no_redex(a.body)
    if isinstance(a, TDown):
        return scan_no_redex(a.body)
    if isinstance(a, TForall):
        return _scan_kind(a.kind) and scan_no_redex(a.body)
    if isinstance(a, TArrow):
        return scan_no_redex(a.dom) and scan_no_redex(a.cod)
    if isinstance(a, TData):
        return all(scan_no_redex(t) for t in a.args)
    raise TypeError(f"not a type: {a!r}")


def _scan_neutral(p: Neutral) -> bool:
    if isinstance(p, NVar):
        return True
    ok = _scan_neutral(p.head)
    for e in p.sub:
        if isinstance(e, TyEntry):
            ok = ok and scan_no_redex(e.type)
    return ok


def _scan_kind(k: Kind) -> bool:
    if isinstance(k, KType):
        return True
    return all(_scan_decl(d) for d in k.ctx) and _scan_kind(k.body)


def _scan_decl(d) -> bool:
    if isinstance(d, TyDecl):
        return _scan_kind(d.kind)
    return scan_no_redex(d.type)

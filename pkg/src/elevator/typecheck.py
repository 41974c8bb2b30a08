"""Substructural bidirectional type checking.

Well-formedness of contexts, kinds, and types tracks no usage (type
variables are compile-time and duplicate freely); term checking threads a
usage mask through the premises, which algorithmizes the declarative context
splits: check the first subterm, record what it consumed, check the second
under the extended consumption, and merge.

Checking is also elaboration: the returned term carries concrete mode
indices on every modal construct, and unresolved mode slots (empty strings
produced by the frontend) are filled in from the types.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .modes import Mode, ModeSpec, Recursion
from .subst import (
    merge_usage,
    rename_kind,
    rename_term,
    rename_type,
    subst_kind,
    subst_type,
)
from .syntax import (
    Annot,
    App,
    Branch,
    Context,
    Ctor,
    Def,
    DepCtx,
    DTyDecl,
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
    alpha_eq,
    count_occurrences,
    erase_context,
    erase_kind,
    free_names,
    fresh,
    lookup,
    names_of,
    type_mode,
)

__all__ = [
    "TypingError",
    "Signature",
    "DataDecl",
    "CtorDecl",
    "DefEntry",
    "wf_context",
    "wf_kind",
    "check_type",
    "synth_neutral_kind",
    "check_term",
    "synth_term",
    "check_subst",
    "check_signature",
    "count_occurrences",
]

# Stable machine-readable error codes.
UNBOUND_VARIABLE = "UNBOUND_VARIABLE"
MODE_ACCESS = "MODE_ACCESS"
LINEARITY = "LINEARITY"
WEAKENING = "WEAKENING"
KIND_MISMATCH = "KIND_MISMATCH"
TYPE_MISMATCH = "TYPE_MISMATCH"
CONTEXT_MISMATCH = "CONTEXT_MISMATCH"
DOMAIN_MISMATCH = "DOMAIN_MISMATCH"
RECURSION_FORBIDDEN = "RECURSION_FORBIDDEN"
BRANCH_USAGE = "BRANCH_USAGE"
UNKNOWN_DATA = "UNKNOWN_DATA"
UNKNOWN_CTOR = "UNKNOWN_CTOR"
ANNOTATION_REQUIRED = "ANNOTATION_REQUIRED"


class TypingError(Exception):
    def __init__(self, code: str, message: str, *, expected=None, actual=None, name=None):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.expected = expected
        self.actual = actual
        self.name = name


# ---------------------------------------------------------------------------
# Signatures: top-level definitions and data declarations


@dataclass(frozen=True)
class CtorDecl:
    name: str
    args: tuple[Type, ...] = ()


@dataclass(frozen=True)
class DataDecl:
    """A data declaration parametric in a mode.

    ``mode_param`` names the mode variable used in ``params`` kinds and
    constructor argument types; type parameters are referred to by name.
    """

    name: str
    mode_param: str
    params: tuple[tuple[str, Kind], ...]
    ctors: tuple[CtorDecl, ...]

    def ctor(self, name: str) -> CtorDecl | None:
        for c in self.ctors:
            if c.name == name:
                return c
        return None


@dataclass(frozen=True)
class DefEntry:
    name: str
    type: Type
    body: Term


@dataclass(frozen=True)
class Signature:
    datas: tuple[DataDecl, ...] = ()
    defs: tuple[DefEntry, ...] = ()

    def data(self, name: str) -> DataDecl | None:
        for d in self.datas:
            if d.name == name:
                return d
        return None

    def def_(self, name: str) -> DefEntry | None:
        for d in self.defs:
            if d.name == name:
                return d
        return None

    def ctor_owner(self, ctor: str) -> DataDecl | None:
        for d in self.datas:
            if d.ctor(ctor) is not None:
                return d
        return None

    def with_def(self, entry: DefEntry) -> "Signature":
        return Signature(self.datas, self.defs + (entry,))


# ---------------------------------------------------------------------------
# Mode substitution (instantiating a data declaration's mode parameter)


def map_modes(x, f):
    """Rebuild a kind/type/term/context/subst applying f to every mode index."""
    if isinstance(x, KType):
        return KType(f(x.mode))
    if isinstance(x, KCtxUp):
        return KCtxUp(f(x.hi), f(x.lo), map_modes(x.ctx, f), map_modes(x.body, f))
    if isinstance(x, TUnit):
        return TUnit(f(x.mode))
    if isinstance(x, TNeutral):
        return TNeutral(map_modes(x.neutral, f), f(x.mode))
    if isinstance(x, NVar):
        return x
    if isinstance(x, NForce):
        return NForce(map_modes(x.head, f), map_modes(x.sub, f), f(x.hi), f(x.lo))
    if isinstance(x, TThunk):
        return TThunk(x.names, map_modes(x.body, f))
    if isinstance(x, TCtxUp):
        return TCtxUp(f(x.hi), f(x.lo), map_modes(x.ctx, f), map_modes(x.body, f))
    if isinstance(x, TDown):
        return TDown(f(x.hi), f(x.lo), map_modes(x.body, f))
    if isinstance(x, TForall):
        return TForall(x.var, map_modes(x.kind, f), map_modes(x.body, f), f(x.mode))
    if isinstance(x, TArrow):
        return TArrow(map_modes(x.dom, f), map_modes(x.cod, f), f(x.mode))
    if isinstance(x, TData):
        return TData(x.name, f(x.mode), tuple(map_modes(a, f) for a in x.args))
    if isinstance(x, tuple):
        return tuple(map_modes(d, f) for d in x)
    if isinstance(x, TyDecl):
        return TyDecl(x.name, map_modes(x.kind, f))
    if isinstance(x, TmDecl):
        return TmDecl(x.name, map_modes(x.type, f), f(x.mode))
    if isinstance(x, TyEntry):
        return TyEntry(x.name, map_modes(x.type, f))
    if isinstance(x, TmEntry):
        return TmEntry(x.name, map_modes(x.term, f), f(x.mode))
    raise TypeError(f"cannot map modes over {x!r}")


def _instantiate_param_kind(decl: DataDecl, mode: Mode, kind: Kind) -> Kind:
    return map_modes(kind, lambda m: mode if m == decl.mode_param else m)


def instantiate_ctor(
    decl: DataDecl, mode: Mode, targs: tuple[Type, ...], ctor: CtorDecl
) -> tuple[Type, ...]:
    """Concrete argument types of a constructor at a data instance."""
    if len(targs) != len(decl.params):
        raise TypingError(
            DOMAIN_MISMATCH,
            f"data {decl.name} expects {len(decl.params)} type arguments, "
            f"got {len(targs)}",
        )
    at_mode = lambda x: map_modes(x, lambda m: mode if m == decl.mode_param else m)
    sigma = tuple(TyEntry(p, a) for (p, _), a in zip(decl.params, targs))
    gamma: DepCtx = tuple(
        DTyDecl(p, erase_kind(at_mode(k))) for p, k in decl.params
    )
    return tuple(subst_type(sigma, gamma, at_mode(a)) for a in ctor.args)


# ---------------------------------------------------------------------------
# Mode / visibility helpers


def _decl_mode(d) -> Mode:
    return d.mode


def _require_floor(ctx: Context, x, m: Mode, spec: ModeSpec, what: str) -> None:
    """Every context variable free in x must live at a mode >= m."""
    for n in free_names(x):
        d = lookup(ctx, n)
        if d is not None and not spec.geq(_decl_mode(d), m):
            raise TypingError(
                MODE_ACCESS,
                f"{what} mentions {n!r} at mode {_decl_mode(d)}, "
                f"which is not >= {m}",
                name=n,
            )


def _fix_mode(given: Mode, inferred: Mode, what: str) -> Mode:
    if given and given != inferred:
        raise TypingError(
            TYPE_MISMATCH,
            f"{what} is annotated with mode {given} but its type requires {inferred}",
            expected=inferred,
            actual=given,
        )
    return inferred


def _freshen(name: str, ctx: Context, extra=frozenset()) -> str:
    return fresh(name, set(names_of(ctx)) | set(extra))


def _open_context(
    ctx: Context, psi: Context, names: tuple[str, ...], *bodies
) -> tuple[Context, list]:
    """Rename psi's binders to (freshened) names; rename bodies accordingly."""
    if len(names) != len(psi):
        raise TypingError(
            DOMAIN_MISMATCH,
            f"binder arity {len(names)} does not match context of length {len(psi)}",
        )
    taken = set(names_of(ctx))
    ren: dict[str, str] = {}
    out: list = []
    for d, n in zip(psi, names):
        n2 = fresh(n, taken)
        taken.add(n2)
        if isinstance(d, TyDecl):
            out.append(TyDecl(n2, rename_kind(d.kind, ren)))
        else:
            out.append(TmDecl(n2, rename_type(d.type, ren), d.mode))
        if d.name != n2:
            ren = {**ren, d.name: n2}
        else:
            ren.pop(d.name, None)
    renamed = []
    for b in bodies:
        if b is None:
            renamed.append(None)
        elif isinstance(b, (KType, KCtxUp)):
            renamed.append(rename_kind(b, ren))
        else:
            renamed.append(rename_type(b, ren))
    return tuple(out), renamed


# ---------------------------------------------------------------------------
# Well-formedness of contexts, kinds, and types (no usage tracking)


def wf_context(ctx: Context, spec: ModeSpec, sig: Signature) -> None:
    for i, d in enumerate(ctx):
        prefix = ctx[:i]
        k = _decl_mode(d)
        if k not in spec.modes:
            raise TypingError(MODE_ACCESS, f"undeclared mode {k!r} in context")
        if isinstance(d, TyDecl):
            _require_floor(prefix, d.kind, k, spec, f"kind of {d.name}")
            wf_kind(prefix, d.kind, spec, sig)
        else:
            _require_floor(prefix, d.type, k, spec, f"type of {d.name}")
            check_type(prefix, d.type, KType(k), spec, sig)


def _wf_bound_context(
    ctx: Context, psi: Context, hi: Mode, lo: Mode, spec: ModeSpec, sig: Signature
) -> None:
    """The `hi > Psi >= lo` premise of contextual shifts, including the
    empty-context proviso hi >= lo."""
    for d in psi:
        if not spec.gt(hi, _decl_mode(d)):
            raise TypingError(
                MODE_ACCESS,
                f"context entry {d.name} at mode {_decl_mode(d)} is not strictly "
                f"below {hi}",
                name=d.name,
            )
        if not spec.geq(_decl_mode(d), lo):
            raise TypingError(
                MODE_ACCESS,
                f"context entry {d.name} at mode {_decl_mode(d)} is not >= {lo}",
                name=d.name,
            )
    if not psi and not spec.geq(hi, lo):
        raise TypingError(
            MODE_ACCESS, f"empty-context shift requires {hi} >= {lo}"
        )
    wf_context(ctx + psi, spec, sig)


def wf_kind(ctx: Context, k: Kind, spec: ModeSpec, sig: Signature) -> None:
    if isinstance(k, KType):
        if k.mode not in spec.modes:
            raise TypingError(MODE_ACCESS, f"undeclared mode {k.mode!r}")
        return
    if isinstance(k, KCtxUp):
        _wf_bound_context(ctx, k.ctx, k.hi, k.lo, spec, sig)
        wf_kind(ctx + k.ctx, k.body, spec, sig)
        return
    raise TypeError(f"not a kind: {k!r}")


def synth_neutral_kind(
    ctx: Context, p: Neutral, spec: ModeSpec, sig: Signature
) -> tuple[Kind, Neutral]:
    if isinstance(p, NVar):
        d = lookup(ctx, p.name)
        if d is None or not isinstance(d, TyDecl):
            raise TypingError(
                UNBOUND_VARIABLE, f"type variable {p.name!r} is not in scope", name=p.name
            )
        return d.kind, p
    # Type-level force of a neutral head.
    kind, head = synth_neutral_kind(ctx, p.head, spec, sig)
    if not isinstance(kind, KCtxUp):
        raise TypingError(
            KIND_MISMATCH,
            "forced type head does not have a contextual kind",
            actual=kind,
        )
    hi = _fix_mode(p.hi, kind.hi, "type-level force")
    lo = _fix_mode(p.lo, kind.lo, "type-level force")
    _require_floor(ctx, p.head, hi, spec, "type-level force head")
    sub, _ = check_subst(ctx, frozenset(), p.sub, kind.ctx, spec, sig, frozenset(), types_only=True)
    out = subst_kind(sub, erase_context(kind.ctx), kind.body)
    return out, NForce(head, sub, hi, lo)


def check_type(
    ctx: Context, a: Type, k: Kind, spec: ModeSpec, sig: Signature
) -> Type:
    """Check a normal type against a kind; returns the mode-elaborated type."""
    if isinstance(a, TThunk):
        if not isinstance(k, KCtxUp):
            raise TypingError(
                KIND_MISMATCH, "a type template needs a contextual kind", expected=k
            )
        psi, [body_kind] = _open_context(ctx, k.ctx, a.names, k.body)
        names = tuple(d.name for d in psi)
        body = check_type(ctx + psi, a.body, body_kind, spec, sig)
        return TThunk(names, body)
    if isinstance(a, TNeutral):
        kind, neutral = synth_neutral_kind(ctx, a.neutral, spec, sig)
        if not alpha_eq(kind, k):
            raise TypingError(
                KIND_MISMATCH,
                "neutral type's kind does not match the expected kind",
                expected=k,
                actual=kind,
            )
        mode = kind.mode if isinstance(kind, KType) else kind.hi
        return TNeutral(neutral, _fix_mode(a.mode, mode, "neutral type"))
    if not isinstance(k, KType):
        raise TypingError(
            KIND_MISMATCH, "only templates and neutrals have contextual kinds", expected=k
        )
    mode = k.mode
    if isinstance(a, TUnit):
        if a.mode != mode:
            raise TypingError(
                KIND_MISMATCH, f"Unit@{a.mode} is not a type at mode {mode}",
                expected=mode, actual=a.mode,
            )
        return a
    if isinstance(a, TCtxUp):
        hi = _fix_mode(a.hi, mode, "contextual up-shift")
        _wf_bound_context(ctx, a.ctx, hi, a.lo, spec, sig)
        body = check_type(ctx + a.ctx, a.body, KType(a.lo), spec, sig)
        return TCtxUp(hi, a.lo, a.ctx, body)
    if isinstance(a, TDown):
        lo = _fix_mode(a.lo, mode, "down-shift")
        if not spec.geq(a.hi, lo):
            raise TypingError(MODE_ACCESS, f"down-shift requires {a.hi} >= {lo}")
        _require_floor(ctx, a.body, a.hi, spec, "down-shift body")
        body = check_type(ctx, a.body, KType(a.hi), spec, sig)
        return TDown(a.hi, lo, body)
    if isinstance(a, TForall):
        wf_kind(ctx, a.kind, spec, sig)
        m = a.kind.mode if isinstance(a.kind, KType) else a.kind.hi
        if not spec.geq(m, mode):
            raise TypingError(
                MODE_ACCESS,
                f"quantified kind mode {m} must be >= the body mode {mode}",
            )
        _require_floor(ctx, a.kind, m, spec, "quantified kind")
        var = _freshen(a.var, ctx)
        body = a.body if var == a.var else rename_type(a.body, {a.var: var})
        body = check_type(ctx + (TyDecl(var, a.kind),), body, KType(mode), spec, sig)
        return TForall(var, a.kind, body, _fix_mode(a.mode, mode, "forall"))
    if isinstance(a, TArrow):
        dom = check_type(ctx, a.dom, KType(mode), spec, sig)
        cod = check_type(ctx, a.cod, KType(mode), spec, sig)
        return TArrow(dom, cod, _fix_mode(a.mode, mode, "arrow"))
    if isinstance(a, TData):
        decl = sig.data(a.name)
        if decl is None:
            raise TypingError(UNKNOWN_DATA, f"unknown data type {a.name!r}", name=a.name)
        m = _fix_mode(a.mode, mode, "data type") if a.mode else mode
        if m != mode:
            raise TypingError(
                KIND_MISMATCH, f"{a.name}{{{m}}} is not a type at mode {mode}"
            )
        if len(a.args) != len(decl.params):
            raise TypingError(
                DOMAIN_MISMATCH,
                f"data {a.name} takes {len(decl.params)} type arguments",
            )
        args = tuple(
            check_type(ctx, t, _instantiate_param_kind(decl, m, pk), spec, sig)
            for t, (_, pk) in zip(a.args, decl.params)
        )
        return TData(a.name, m, args)
    raise TypeError(f"not a type: {a!r}")


# ---------------------------------------------------------------------------
# Term checking with usage threading


Usage = frozenset


def _consume(
    ctx: Context, used: Usage, name: str, mode: Mode, jmode: Mode, spec: ModeSpec
) -> Usage:
    if not spec.geq(mode, jmode):
        raise TypingError(
            MODE_ACCESS,
            f"{name!r} lives at mode {mode}, not accessible from mode {jmode}",
            name=name,
        )
    if name in used and not spec.allows_contraction(mode):
        raise TypingError(
            LINEARITY,
            f"{name!r} at mode {mode} is used more than once",
            name=name,
        )
    return frozenset({name})


def _exit_binder(name: str, mode: Mode, consumed: Usage, spec: ModeSpec) -> Usage:
    if name not in consumed and not spec.allows_weakening(mode):
        raise TypingError(
            WEAKENING,
            f"{name!r} at mode {mode} is never used and cannot be discarded",
            name=name,
        )
    return consumed - {name}


def check_term(
    ctx: Context,
    used: Usage,
    e: Term,
    a: Type,
    spec: ModeSpec,
    sig: Signature,
    forbidden: frozenset = frozenset(),
) -> tuple[Term, Usage]:
    """Check e against the normal type a; judgment mode is a's mode."""
    jmode = type_mode(a)
    if isinstance(e, One):
        if not isinstance(a, TUnit):
            raise TypingError(TYPE_MISMATCH, "unit checks only against Unit", expected=a)
        _fix_mode(e.mode, a.mode, "unit")
        return One(a.mode), frozenset()
    if isinstance(e, Susp):
        if not isinstance(a, TCtxUp):
            raise TypingError(
                TYPE_MISMATCH,
                "a suspension checks only against a contextual up-shift",
                expected=a,
            )
        hi = _fix_mode(e.hi, a.hi, "suspension")
        lo = _fix_mode(e.lo, a.lo, "suspension")
        psi, [body_type] = _open_context(ctx, a.ctx, e.names, a.body)
        names = tuple(d.name for d in psi)
        body_term = e.body
        ren = {old: new for old, new in zip(e.names, names) if old != new}
        if ren:
            body_term = rename_term(body_term, ren)
        body, consumed = check_term(
            ctx + psi, used, body_term, body_type, spec, sig, forbidden
        )
        for d in psi:
            if isinstance(d, TmDecl):
                consumed = _exit_binder(d.name, d.mode, consumed, spec)
        return Susp(hi, lo, names, body), consumed
    if isinstance(e, Store):
        if not isinstance(a, TDown):
            raise TypingError(
                TYPE_MISMATCH, "store checks only against a down-shift", expected=a
            )
        hi = _fix_mode(e.hi, a.hi, "store")
        lo = _fix_mode(e.lo, a.lo, "store")
        _require_floor(ctx, e.body, hi, spec, "store body")
        body, consumed = check_term(ctx, used, e.body, a.body, spec, sig, forbidden)
        return Store(hi, lo, body), consumed
    if isinstance(e, TLam):
        if not isinstance(a, TForall):
            raise TypingError(
                TYPE_MISMATCH, "type abstraction checks only against forall", expected=a
            )
        if not alpha_eq(e.kind, a.kind):
            raise TypingError(
                KIND_MISMATCH,
                "type abstraction's kind annotation does not match",
                expected=a.kind,
                actual=e.kind,
            )
        var = _freshen(e.var, ctx)
        body_term = e.body if var == e.var else rename_term(e.body, {e.var: var})
        body_type = a.body if var == a.var else rename_type(a.body, {a.var: var})
        body, consumed = check_term(
            ctx + (TyDecl(var, a.kind),), used, body_term, body_type, spec, sig, forbidden
        )
        return TLam(var, a.kind, body), consumed
    if isinstance(e, Lam):
        if not isinstance(a, TArrow):
            raise TypingError(
                TYPE_MISMATCH, "lambda checks only against an arrow type", expected=a
            )
        if e.ann is not None and not alpha_eq(e.ann, a.dom):
            raise TypingError(
                TYPE_MISMATCH,
                "lambda annotation does not match the arrow domain",
                expected=a.dom,
                actual=e.ann,
            )
        var = _freshen(e.var, ctx)
        body_term = e.body if var == e.var else rename_term(e.body, {e.var: var})
        body, consumed = check_term(
            ctx + (TmDecl(var, a.dom, jmode),), used, body_term, a.cod, spec, sig, forbidden
        )
        consumed = _exit_binder(var, jmode, consumed, spec)
        return Lam(var, a.dom, body), consumed
    if isinstance(e, Ctor):
        if not isinstance(a, TData):
            raise TypingError(
                TYPE_MISMATCH, "a constructor checks only against its data type",
                expected=a,
            )
        decl = sig.data(a.name)
        if decl is None:
            raise TypingError(UNKNOWN_DATA, f"unknown data type {a.name!r}")
        cdecl = decl.ctor(e.name)
        if cdecl is None or (e.data and e.data != a.name):
            raise TypingError(
                UNKNOWN_CTOR,
                f"{e.name!r} is not a constructor of {a.name}",
                name=e.name,
            )
        _fix_mode(e.mode, a.mode, "constructor")
        arg_types = instantiate_ctor(decl, a.mode, a.args, cdecl)
        if len(arg_types) != len(e.args):
            raise TypingError(
                DOMAIN_MISMATCH,
                f"constructor {e.name} takes {len(arg_types)} arguments",
            )
        consumed: Usage = frozenset()
        args = []
        for arg, at in zip(e.args, arg_types):
            ea, c = check_term(ctx, used | consumed, arg, at, spec, sig, forbidden)
            consumed = merge_usage(ctx, consumed, c, spec)
            args.append(ea)
        return Ctor(a.name, a.mode, e.name, tuple(args)), consumed
    if isinstance(e, Load):
        elab, consumed = _check_load(ctx, used, e, spec, sig, forbidden, expected=a)
        return elab, consumed
    if isinstance(e, Match):
        elab, _, consumed = _check_match(ctx, used, e, spec, sig, forbidden, expected=a, jmode=jmode)
        return elab, consumed
    # Fall back to synthesis.
    got, elab, consumed = synth_term(ctx, used, jmode, e, spec, sig, forbidden)
    if not alpha_eq(got, a):
        raise TypingError(
            TYPE_MISMATCH, "synthesized type does not match the expected type",
            expected=a, actual=got,
        )
    return elab, consumed


def _peek_mode(ctx: Context, sig: Signature, e: Term) -> Mode | None:
    """Syntactic guess at the judgment mode of a synthesizable term.

    Elimination heads (force heads, load sources, match scrutinees) are
    judged at the mode of their own type, which may sit above the ambient
    judgment mode; this recovers it without running synthesis."""
    if isinstance(e, Var):
        d = lookup(ctx, e.name)
        return d.mode if isinstance(d, TmDecl) else None
    if isinstance(e, Def):
        entry = sig.def_(e.name)
        return type_mode(entry.type) if entry is not None else None
    if isinstance(e, (App, TApp)):
        return _peek_mode(ctx, sig, e.head)
    if isinstance(e, Annot):
        try:
            return type_mode(e.type)
        except ValueError:
            return None
    if isinstance(e, Force):
        return e.lo or None
    if isinstance(e, (Susp, Store)):
        return e.hi or None
    if isinstance(e, Ctor):
        return e.mode or None
    if isinstance(e, One):
        return e.mode or None
    return None


def synth_term(
    ctx: Context,
    used: Usage,
    jmode: Mode,
    e: Term,
    spec: ModeSpec,
    sig: Signature,
    forbidden: frozenset = frozenset(),
) -> tuple[Type, Term, Usage]:
    if isinstance(e, Var):
        d = lookup(ctx, e.name)
        if d is None or not isinstance(d, TmDecl):
            raise TypingError(
                UNBOUND_VARIABLE, f"variable {e.name!r} is not in scope", name=e.name
            )
        consumed = _consume(ctx, used, e.name, d.mode, jmode, spec)
        return d.type, e, consumed
    if isinstance(e, Def):
        entry = sig.def_(e.name)
        if entry is None:
            raise TypingError(
                UNBOUND_VARIABLE, f"no definition named {e.name!r}", name=e.name
            )
        if e.name in forbidden:
            raise TypingError(
                RECURSION_FORBIDDEN,
                f"{e.name!r} may not refer to itself: its mode forbids recursion",
                name=e.name,
            )
        dmode = type_mode(entry.type)
        if not spec.geq(dmode, jmode):
            raise TypingError(
                MODE_ACCESS,
                f"definition {e.name!r} lives at mode {dmode}, "
                f"not accessible from mode {jmode}",
                name=e.name,
            )
        return entry.type, e, frozenset()
    if isinstance(e, One) and e.mode:
        if not spec.geq(e.mode, jmode):
            raise TypingError(
                MODE_ACCESS, f"unit at mode {e.mode} is not accessible from {jmode}"
            )
        return TUnit(e.mode), e, frozenset()
    if isinstance(e, Ctor) and e.mode:
        data = sig.data(e.data) if e.data else sig.ctor_owner(e.name)
        if data is not None and not data.params:
            a = TData(data.name, e.mode)
            elab, consumed = check_term(ctx, used, e, a, spec, sig, forbidden)
            return a, elab, consumed
    if isinstance(e, Annot):
        a = check_type(ctx, e.type, KType(type_mode(e.type)), spec, sig)
        elab, consumed = check_term(ctx, used, e.term, a, spec, sig, forbidden)
        return a, Annot(elab, a), consumed
    if isinstance(e, Force):
        hmode = e.hi or _peek_mode(ctx, sig, e.head) or jmode
        head_type, head, consumed = synth_term(ctx, used, hmode, e.head, spec, sig, forbidden)
        if not isinstance(head_type, TCtxUp):
            raise TypingError(
                TYPE_MISMATCH,
                "force head does not have a contextual up-shift type",
                actual=head_type,
            )
        if head_type.hi != hmode:
            raise TypingError(
                MODE_ACCESS,
                f"force head lives at mode {head_type.hi}, judged at {hmode}",
            )
        hi = _fix_mode(e.hi, head_type.hi, "force")
        lo = _fix_mode(e.lo, head_type.lo, "force")
        if lo != jmode:
            raise TypingError(
                MODE_ACCESS,
                f"forcing a template of mode {lo} inside a judgment at mode {jmode}",
            )
        _require_floor(ctx, e.head, hi, spec, "force head")
        sub, sub_consumed = check_subst(
            ctx, used | consumed, e.sub, head_type.ctx, spec, sig, forbidden
        )
        consumed = merge_usage(ctx, consumed, sub_consumed, spec)
        out = subst_type(sub, erase_context(head_type.ctx), head_type.body)
        return out, Force(hi, lo, head, sub), consumed
    if isinstance(e, Load):
        return _synth_load(ctx, used, jmode, e, spec, sig, forbidden)
    if isinstance(e, TApp):
        head_type, head, consumed = synth_term(ctx, used, jmode, e.head, spec, sig, forbidden)
        if not isinstance(head_type, TForall):
            raise TypingError(
                TYPE_MISMATCH, "type application head is not polymorphic",
                actual=head_type,
            )
        if head_type.mode != jmode:
            raise TypingError(
                MODE_ACCESS,
                f"polymorphic value at mode {head_type.mode} used at mode {jmode}",
            )
        m = head_type.kind.mode if isinstance(head_type.kind, KType) else head_type.kind.hi
        if not spec.geq(m, jmode):
            raise TypingError(MODE_ACCESS, f"type argument mode {m} must be >= {jmode}")
        _require_floor(ctx, e.arg, m, spec, "type argument")
        arg = check_type(ctx, e.arg, head_type.kind, spec, sig)
        out = subst_type(
            (TyEntry(head_type.var, arg),),
            (DTyDecl(head_type.var, erase_kind(head_type.kind)),),
            head_type.body,
        )
        return out, TApp(head, arg), consumed
    if isinstance(e, App):
        head_type, head, consumed = synth_term(ctx, used, jmode, e.head, spec, sig, forbidden)
        if not isinstance(head_type, TArrow):
            raise TypingError(
                TYPE_MISMATCH, "application head is not a function", actual=head_type
            )
        if head_type.mode != jmode:
            raise TypingError(
                MODE_ACCESS,
                f"function at mode {head_type.mode} applied at mode {jmode}",
            )
        arg, arg_consumed = check_term(
            ctx, used | consumed, e.arg, head_type.dom, spec, sig, forbidden
        )
        consumed = merge_usage(ctx, consumed, arg_consumed, spec)
        return head_type.cod, App(head, arg), consumed
    if isinstance(e, Match):
        elab, out, consumed = _check_match(
            ctx, used, e, spec, sig, forbidden, expected=None, jmode=jmode
        )
        return out, elab, consumed
    if isinstance(e, Ctor):
        if not e.mode:
            raise TypingError(
                ANNOTATION_REQUIRED, "constructor without a mode cannot be synthesized"
            )
        decl = sig.ctor_owner(e.name) if not e.data else sig.data(e.data)
        if decl is None:
            raise TypingError(UNKNOWN_CTOR, f"unknown constructor {e.name!r}", name=e.name)
        if decl.params:
            raise TypingError(
                ANNOTATION_REQUIRED,
                f"constructor of parametrized data {decl.name} needs a type annotation",
            )
        a = TData(decl.name, e.mode, ())
        elab, consumed = check_term(ctx, used, e, a, spec, sig, forbidden)
        return a, elab, consumed
    raise TypingError(
        ANNOTATION_REQUIRED,
        f"cannot synthesize a type for this {type(e).__name__}; add an annotation",
    )


def _synth_bound(ctx, used, jmode, e, spec, sig, forbidden):
    """Shared by load in both directions: synthesize the bound pointer."""
    bmode = e.lo or _peek_mode(ctx, sig, e.bound) or jmode
    bound_type, bound, consumed = synth_term(ctx, used, bmode, e.bound, spec, sig, forbidden)
    if not isinstance(bound_type, TDown):
        raise TypingError(
            TYPE_MISMATCH, "load needs a pointer (down-shifted) value",
            actual=bound_type,
        )
    if bound_type.lo != bmode:
        raise TypingError(
            MODE_ACCESS,
            f"load source lives at mode {bound_type.lo}, judged at {bmode}",
        )
    hi = _fix_mode(e.hi, bound_type.hi, "load")
    lo = _fix_mode(e.lo, bound_type.lo, "load")
    if not spec.geq(lo, jmode):
        raise TypingError(
            MODE_ACCESS, f"loading at mode {lo} inside a judgment at mode {jmode}"
        )
    _require_floor(ctx, e.bound, lo, spec, "load source")
    return bound_type, bound, consumed, hi, lo


def _check_load(ctx, used, e, spec, sig, forbidden, expected):
    jmode = type_mode(expected)
    bound_type, bound, consumed, hi, lo = _synth_bound(
        ctx, used, jmode, e, spec, sig, forbidden
    )
    var = _freshen(e.var, ctx)
    cont_term = e.cont if var == e.var else rename_term(e.cont, {e.var: var})
    ctx2 = ctx + (TmDecl(var, bound_type.body, hi),)
    cont, cont_consumed = check_term(
        ctx2, used | consumed, cont_term, expected, spec, sig, forbidden
    )
    cont_consumed = _exit_binder(var, hi, cont_consumed, spec)
    consumed = merge_usage(ctx, consumed, cont_consumed, spec)
    return Load(hi, lo, var, bound, cont), consumed


def _synth_load(ctx, used, jmode, e, spec, sig, forbidden):
    bound_type, bound, consumed, hi, lo = _synth_bound(
        ctx, used, jmode, e, spec, sig, forbidden
    )
    var = _freshen(e.var, ctx)
    cont_term = e.cont if var == e.var else rename_term(e.cont, {e.var: var})
    ctx2 = ctx + (TmDecl(var, bound_type.body, hi),)
    out, cont, cont_consumed = synth_term(
        ctx2, used | consumed, jmode, cont_term, spec, sig, forbidden
    )
    cont_consumed = _exit_binder(var, hi, cont_consumed, spec)
    consumed = merge_usage(ctx, consumed, cont_consumed, spec)
    if var in free_names(out):
        raise TypingError(TYPE_MISMATCH, "load result type mentions the bound variable")
    return out, Load(hi, lo, var, bound, cont), consumed


def _check_match(ctx, used, e, spec, sig, forbidden, expected, jmode):
    smode = e.mode or _peek_mode(ctx, sig, e.scrut) or jmode
    scrut_type, scrut, consumed = synth_term(ctx, used, smode, e.scrut, spec, sig, forbidden)
    if not isinstance(scrut_type, TData):
        raise TypingError(
            TYPE_MISMATCH, "match scrutinee is not of a data type", actual=scrut_type
        )
    decl = sig.data(scrut_type.name)
    if decl is None:
        raise TypingError(UNKNOWN_DATA, f"unknown data type {scrut_type.name!r}")
    m = scrut_type.mode
    if not spec.geq(m, jmode):
        raise TypingError(
            MODE_ACCESS,
            f"matching on data at mode {m} inside a judgment at mode {jmode}",
        )
    _require_floor(ctx, e.scrut, m, spec, "match scrutinee")
    _fix_mode(e.mode, m, "match")
    if not e.branches:
        raise TypingError(ANNOTATION_REQUIRED, "match must have at least one branch")
    seen = set()
    branches = []
    branch_usages = []
    out = expected
    for br in e.branches:
        cdecl = decl.ctor(br.ctor)
        if cdecl is None:
            raise TypingError(
                UNKNOWN_CTOR,
                f"{br.ctor!r} is not a constructor of {decl.name}",
                name=br.ctor,
            )
        if br.ctor in seen:
            raise TypingError(DOMAIN_MISMATCH, f"duplicate branch for {br.ctor}")
        seen.add(br.ctor)
        arg_types = instantiate_ctor(decl, m, scrut_type.args, cdecl)
        if len(arg_types) != len(br.binders):
            raise TypingError(
                DOMAIN_MISMATCH,
                f"constructor {br.ctor} binds {len(arg_types)} arguments",
            )
        binders = []
        decls = []
        taken = set(names_of(ctx))
        ren = {}
        for b, bt in zip(br.binders, arg_types):
            b2 = fresh(b, taken)
            taken.add(b2)
            if b2 != b:
                ren[b] = b2
            binders.append(b2)
            decls.append(TmDecl(b2, bt, type_mode(bt)))
        body_term = rename_term(br.body, ren) if ren else br.body
        ctx2 = ctx + tuple(decls)
        if out is None:
            out, body, bc = synth_term(
                ctx2, used | consumed, jmode, body_term, spec, sig, forbidden
            )
            if any(b in free_names(out) for b in binders):
                raise TypingError(
                    TYPE_MISMATCH, "branch result type mentions pattern variables"
                )
        else:
            body, bc = check_term(ctx2, used | consumed, body_term, out, spec, sig, forbidden)
        for d in decls:
            bc = _exit_binder(d.name, d.mode, bc, spec)
        branch_usages.append(bc)
        branches.append(Branch(br.ctor, tuple(binders), body))
    # Branches must agree on consumption of every variable whose mode is
    # substructurally restricted.
    restricted = {
        d.name
        for d in ctx
        if isinstance(d, TmDecl)
        and not (spec.allows_contraction(d.mode) and spec.allows_weakening(d.mode))
    }
    reference = branch_usages[0] & restricted
    for bu in branch_usages[1:]:
        if bu & restricted != reference:
            raise TypingError(
                BRANCH_USAGE,
                "match branches disagree on the use of substructural variables",
            )
    total = consumed
    for bu in branch_usages:
        total = total | bu
    return Match(m, scrut, tuple(branches)), out, total


def check_subst(
    ctx: Context,
    used: Usage,
    sigma: Subst,
    psi: Context,
    spec: ModeSpec,
    sig: Signature,
    forbidden: frozenset = frozenset(),
    types_only: bool = False,
) -> tuple[Subst, Usage]:
    """Check sigma against the bound context psi; entries are positional.

    Returns the elaborated substitution, with entry names aligned to psi's
    declaration names, and the usage consumed by term entries.
    """
    if len(sigma) != len(psi):
        raise TypingError(
            DOMAIN_MISMATCH,
            f"substitution has {len(sigma)} entries, context expects {len(psi)}",
        )
    out: list[Entry] = []
    consumed: Usage = frozenset()
    prefix: list = []
    for entry, d in zip(sigma, psi):
        gamma = erase_context(tuple(prefix))
        if isinstance(d, TyDecl):
            if isinstance(entry, TmEntry):
                # A bare variable parsed as a term may stand for a type
                # variable; re-read it by sort.
                if isinstance(entry.term, Var):
                    entry = TyEntry(entry.name, TNeutral(NVar(entry.term.name), ""))
                else:
                    raise TypingError(
                        DOMAIN_MISMATCH,
                        f"{d.name} is a type variable but the entry is a term",
                    )
            target = subst_kind(tuple(out), gamma, d.kind)
            _require_floor(ctx, entry.type, d.mode, spec, "type entry")
            ty = check_type(ctx, entry.type, target, spec, sig)
            out.append(TyEntry(d.name, ty))
        else:
            if types_only:
                raise TypingError(
                    DOMAIN_MISMATCH, "term entries are not allowed in a type-level force"
                )
            if isinstance(entry, TyEntry):
                raise TypingError(
                    DOMAIN_MISMATCH,
                    f"{d.name} is a term variable but the entry is a type",
                )
            target = subst_type(tuple(out), gamma, d.type)
            _require_floor(ctx, entry.term, d.mode, spec, "substitution entry")
            term, c = check_term(
                ctx, used | consumed, entry.term, target, spec, sig, forbidden
            )
            consumed = merge_usage(ctx, consumed, c, spec)
            out.append(TmEntry(d.name, term, d.mode))
        prefix.append(d)
    return tuple(out), consumed


# ---------------------------------------------------------------------------
# Signature checking


def check_signature(sig: Signature, spec: ModeSpec) -> Signature:
    """Validate data declarations and check every definition body."""
    names = [d.name for d in sig.datas] + [d.name for d in sig.defs]
    if len(names) != len(set(names)):
        raise TypingError(DOMAIN_MISMATCH, "duplicate top-level names in signature")
    for data in sig.datas:
        for mode in sorted(spec.modes):
            _check_data_at(data, mode, spec, sig)
    checked: list[DefEntry] = []
    acc = Signature(sig.datas, ())
    for entry in sig.defs:
        dmode = type_mode(entry.type)
        ty = check_type((), entry.type, KType(dmode), spec, acc)
        policy = spec.recursion_policy(dmode)
        env = acc.with_def(DefEntry(entry.name, ty, entry.body))
        forbidden = frozenset() if policy is Recursion.GENERAL else frozenset({entry.name})
        try:
            body, consumed = check_term((), frozenset(), entry.body, ty, spec, env, forbidden)
        except TypingError as err:
            if err.name is None:
                err.name = entry.name
            raise
        assert not consumed
        done = DefEntry(entry.name, ty, body)
        checked.append(done)
        acc = acc.with_def(done)
    return Signature(sig.datas, tuple(checked))


def _check_data_at(data: DataDecl, mode: Mode, spec: ModeSpec, sig: Signature) -> None:
    at_mode = lambda x: map_modes(x, lambda m: mode if m == data.mode_param else m)
    ctx: Context = ()
    for p, k in data.params:
        kind = at_mode(k)
        wf_kind(ctx, kind, spec, sig)
        ctx = ctx + (TyDecl(p, kind),)
    for c in data.ctors:
        for arg in c.args:
            check_type(ctx, at_mode(arg), KType(mode), spec, sig)

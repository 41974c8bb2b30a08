"""Two-level small-step semantics.

Term evaluation (step) reduces redices at the current mode; template
reduction (template_step) walks under suspensions with an ambient mode and
only evaluates subterms whose mode is accessible from it, splicing templates
and otherwise treating inaccessible subterms as syntax.

The relation is deterministic: guards are tried in a fixed priority order
(reductions before congruences), and each congruence fires on the leftmost
reducible position.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .modes import Mode, ModeSpec
from .syntax import (
    Annot,
    App,
    Branch,
    Ctor,
    DTyDecl,
    Def,
    erase_kind,
    Force,
    Lam,
    Load,
    Match,
    One,
    Store,
    Subst,
    Susp,
    TApp,
    TLam,
    Term,
    TmEntry,
    TyEntry,
    Var,
    type_mode,
)
from .subst import dep_ctx_of, subst_term
from .typecheck import Signature


@dataclass(frozen=True)
class Stepped:
    term: Term
    rule: str


StepResult = Stepped | None  # None encodes NOSTEP


class Outcome(Enum):
    VALUE = "value"
    FUEL_EXHAUSTED = "fuel_exhausted"
    STUCK = "stuck"


@dataclass(frozen=True)
class EvalResult:
    outcome: Outcome
    term: Term
    steps: int
    trace: tuple[tuple[str, Term], ...] = ()


_EMPTY_SIG = Signature()


def _def_mode(name: str, sig: Signature) -> Mode | None:
    entry = sig.def_(name)
    return type_mode(entry.type) if entry is not None else None


def _splice(susp: Susp, sigma: Subst) -> Term:
    """Instantiate a suspension body with a positional substitution."""
    entries = []
    for name, entry in zip(susp.names, sigma):
        if isinstance(entry, TyEntry):
            entries.append(TyEntry(name, entry.type))
        else:
            entries.append(TmEntry(name, entry.term, entry.mode))
    entries = tuple(entries)
    return subst_term(entries, dep_ctx_of(entries), susp.body)


def _app_redex_mode(e: App) -> Mode | None:
    """The judgment mode of a beta redex, read off the Lam annotation."""
    if isinstance(e.head, Lam) and e.head.ann is not None:
        try:
            return type_mode(e.head.ann)
        except ValueError:
            return None
    return None


def _select_branch(e: Match) -> Term | None:
    if not isinstance(e.scrut, Ctor):
        return None
    for br in e.branches:
        if br.ctor == e.scrut.name:
            if len(br.binders) != len(e.scrut.args):
                return None
            sigma = tuple(
                TmEntry(b, a, e.mode) for b, a in zip(br.binders, e.scrut.args)
            )
            return subst_term(sigma, (), br.body)
    return None


# ---------------------------------------------------------------------------
# Normal-form classification


def is_weak_normal(e: Term, spec: ModeSpec, sig: Signature = _EMPTY_SIG) -> bool:
    if isinstance(e, Susp):
        return is_normal_template(e.body, e.hi, spec, sig)
    if isinstance(e, Store):
        return is_weak_normal(e.body, spec, sig)
    if isinstance(e, (TLam, Lam, One)):
        return True
    if isinstance(e, Ctor):
        return all(is_weak_normal(a, spec, sig) for a in e.args)
    return is_weak_neutral(e, spec, sig)


def is_weak_neutral(e: Term, spec: ModeSpec, sig: Signature = _EMPTY_SIG) -> bool:
    if isinstance(e, Var):
        return True
    if isinstance(e, Force):
        return is_weak_neutral(e.head, spec, sig)
    if isinstance(e, Load):
        return is_weak_neutral(e.bound, spec, sig)
    if isinstance(e, TApp):
        return is_weak_neutral(e.head, spec, sig)
    if isinstance(e, App):
        return is_weak_neutral(e.head, spec, sig) and is_weak_normal(e.arg, spec, sig)
    if isinstance(e, Match):
        return is_weak_neutral(e.scrut, spec, sig)
    return False


def is_normal_template(
    e: Term, m: Mode, spec: ModeSpec, sig: Signature = _EMPTY_SIG
) -> bool:
    if isinstance(e, (Var, One)):
        return True
    if isinstance(e, Susp):
        return is_normal_template(e.body, m, spec, sig)
    if isinstance(e, Force):
        if spec.geq(e.hi, m):
            return is_weak_neutral(e.head, spec, sig)
        return is_normal_template(e.head, m, spec, sig)
    if isinstance(e, Store):
        if spec.geq(e.hi, m):
            return is_weak_normal(e.body, spec, sig)
        return is_normal_template(e.body, m, spec, sig)
    if isinstance(e, Load):
        if spec.geq(e.lo, m):
            bound_ok = is_weak_normal(e.bound, spec, sig)
        else:
            bound_ok = is_normal_template(e.bound, m, spec, sig)
        return bound_ok and is_normal_template(e.cont, m, spec, sig)
    if isinstance(e, TLam):
        return is_normal_template(e.body, m, spec, sig)
    if isinstance(e, TApp):
        return is_normal_template(e.head, m, spec, sig)
    if isinstance(e, Lam):
        return is_normal_template(e.body, m, spec, sig)
    if isinstance(e, App):
        nmode = _app_redex_mode(e)
        if nmode is not None and spec.geq(nmode, m):
            # a beta redex at an accessible mode is evaluated, not kept
            return False
        return is_normal_template(e.head, m, spec, sig) and is_normal_template(
            e.arg, m, spec, sig
        )
    if isinstance(e, Ctor):
        if spec.geq(e.mode, m):
            return all(is_weak_normal(a, spec, sig) for a in e.args)
        return all(is_normal_template(a, m, spec, sig) for a in e.args)
    if isinstance(e, Match):
        if spec.geq(e.mode, m):
            scrut_ok = is_weak_neutral(e.scrut, spec, sig)
        else:
            scrut_ok = is_normal_template(e.scrut, m, spec, sig)
        return scrut_ok and all(
            is_normal_template(br.body, m, spec, sig) for br in e.branches
        )
    if isinstance(e, Def):
        dmode = _def_mode(e.name, sig)
        return dmode is not None and not spec.geq(dmode, m)
    return False


# ---------------------------------------------------------------------------
# Term evaluation


def step(e: Term, spec: ModeSpec, sig: Signature = _EMPTY_SIG) -> StepResult:
    # Reductions.
    if isinstance(e, Force) and isinstance(e.head, Susp):
        if is_normal_template(e.head.body, e.head.hi, spec, sig):
            return Stepped(_splice(e.head, e.sub), "force-susp")
    if (
        isinstance(e, Load)
        and isinstance(e.bound, Store)
        and is_weak_normal(e.bound.body, spec, sig)
    ):
        sigma = ((TmEntry(e.var, e.bound.body, e.hi)),)
        return Stepped(subst_term(sigma, (), e.cont), "load-store")
    if isinstance(e, TApp) and isinstance(e.head, TLam):
        out = subst_term(
            (TyEntry(e.head.var, e.arg),),
            (DTyDecl(e.head.var, erase_kind(e.head.kind)),),
            e.head.body,
        )
        return Stepped(out, "type-beta")
    if (
        isinstance(e, App)
        and isinstance(e.head, Lam)
        and is_weak_normal(e.arg, spec, sig)
    ):
        mode = type_mode(e.head.ann) if e.head.ann is not None else ""
        sigma = ((TmEntry(e.head.var, e.arg, mode)),)
        return Stepped(subst_term(sigma, (), e.head.body), "beta")
    if isinstance(e, Match):
        selected = _select_branch(e)
        if selected is not None and all(
            is_weak_normal(a, spec, sig) for a in e.scrut.args
        ):
            return Stepped(selected, "match")
    if isinstance(e, Def):
        entry = sig.def_(e.name)
        if entry is not None:
            return Stepped(entry.body, "delta")
        return None
    if isinstance(e, Annot):
        return Stepped(e.term, "annot")
    # Congruences.
    if isinstance(e, Susp):
        r = template_step(e.body, e.hi, spec, sig)
        if r is not None:
            return Stepped(Susp(e.hi, e.lo, e.names, r.term), r.rule)
        return None
    if isinstance(e, Force):
        r = step(e.head, spec, sig)
        if r is not None:
            return Stepped(Force(e.hi, e.lo, r.term, e.sub), r.rule)
        return None
    if isinstance(e, Store):
        r = step(e.body, spec, sig)
        if r is not None:
            return Stepped(Store(e.hi, e.lo, r.term), r.rule)
        return None
    if isinstance(e, Load):
        r = step(e.bound, spec, sig)
        if r is not None:
            return Stepped(Load(e.hi, e.lo, e.var, r.term, e.cont), r.rule)
        return None
    if isinstance(e, TApp):
        r = step(e.head, spec, sig)
        if r is not None:
            return Stepped(TApp(r.term, e.arg), r.rule)
        return None
    if isinstance(e, App):
        r = step(e.head, spec, sig)
        if r is not None:
            return Stepped(App(r.term, e.arg), r.rule)
        if is_weak_normal(e.head, spec, sig):
            r = step(e.arg, spec, sig)
            if r is not None:
                return Stepped(App(e.head, r.term), r.rule)
        return None
    if isinstance(e, Ctor):
        for i, a in enumerate(e.args):
            if is_weak_normal(a, spec, sig):
                continue
            r = step(a, spec, sig)
            if r is not None:
                args = e.args[:i] + (r.term,) + e.args[i + 1 :]
                return Stepped(Ctor(e.data, e.mode, e.name, args), r.rule)
            return None
        return None
    if isinstance(e, Match):
        r = step(e.scrut, spec, sig)
        if r is not None:
            return Stepped(Match(e.mode, r.term, e.branches), r.rule)
        return None
    return None


# ---------------------------------------------------------------------------
# Template reduction under an ambient mode


def template_step(
    e: Term, m: Mode, spec: ModeSpec, sig: Signature = _EMPTY_SIG
) -> StepResult:
    if isinstance(e, Susp):
        r = template_step(e.body, m, spec, sig)
        if r is not None:
            return Stepped(Susp(e.hi, e.lo, e.names, r.term), r.rule)
        return None
    if isinstance(e, Force):
        if spec.geq(e.hi, m):
            # Splice once the generator produced a finished template.
            if isinstance(e.head, Susp) and is_normal_template(
                e.head.body, e.head.hi, spec, sig
            ):
                return Stepped(_splice(e.head, e.sub), "splice")
            r = step(e.head, spec, sig)
        else:
            r = template_step(e.head, m, spec, sig)
        if r is not None:
            return Stepped(Force(e.hi, e.lo, r.term, e.sub), r.rule)
        return None
    if isinstance(e, Store):
        if spec.geq(e.hi, m):
            r = step(e.body, spec, sig)
        else:
            r = template_step(e.body, m, spec, sig)
        if r is not None:
            return Stepped(Store(e.hi, e.lo, r.term), r.rule)
        return None
    if isinstance(e, Load):
        if spec.geq(e.lo, m):
            r = step(e.bound, spec, sig)
            bound_done = is_weak_normal(e.bound, spec, sig)
        else:
            r = template_step(e.bound, m, spec, sig)
            bound_done = is_normal_template(e.bound, m, spec, sig)
        if r is not None:
            return Stepped(Load(e.hi, e.lo, e.var, r.term, e.cont), r.rule)
        if bound_done:
            r = template_step(e.cont, m, spec, sig)
            if r is not None:
                return Stepped(Load(e.hi, e.lo, e.var, e.bound, r.term), r.rule)
        return None
    if isinstance(e, TLam):
        r = template_step(e.body, m, spec, sig)
        if r is not None:
            return Stepped(TLam(e.var, e.kind, r.term), r.rule)
        return None
    if isinstance(e, TApp):
        r = template_step(e.head, m, spec, sig)
        if r is not None:
            return Stepped(TApp(r.term, e.arg), r.rule)
        return None
    if isinstance(e, Lam):
        r = template_step(e.body, m, spec, sig)
        if r is not None:
            return Stepped(Lam(e.var, e.ann, r.term), r.rule)
        return None
    if isinstance(e, App):
        nmode = _app_redex_mode(e)
        if nmode is not None and spec.geq(nmode, m):
            return step(e, spec, sig)
        r = template_step(e.head, m, spec, sig)
        if r is not None:
            return Stepped(App(r.term, e.arg), r.rule)
        if is_normal_template(e.head, m, spec, sig):
            r = template_step(e.arg, m, spec, sig)
            if r is not None:
                return Stepped(App(e.head, r.term), r.rule)
        return None
    if isinstance(e, Ctor):
        stepper = (
            (lambda t: step(t, spec, sig))
            if spec.geq(e.mode, m)
            else (lambda t: template_step(t, m, spec, sig))
        )
        done = (
            (lambda t: is_weak_normal(t, spec, sig))
            if spec.geq(e.mode, m)
            else (lambda t: is_normal_template(t, m, spec, sig))
        )
        for i, a in enumerate(e.args):
            if done(a):
                continue
            r = stepper(a)
            if r is not None:
                args = e.args[:i] + (r.term,) + e.args[i + 1 :]
                return Stepped(Ctor(e.data, e.mode, e.name, args), r.rule)
            return None
        return None
    if isinstance(e, Match):
        if spec.geq(e.mode, m):
            selected = _select_branch(e)
            if selected is not None and all(
                is_weak_normal(a, spec, sig) for a in e.scrut.args
            ):
                return Stepped(selected, "match")
            r = step(e.scrut, spec, sig)
            if r is not None:
                return Stepped(Match(e.mode, r.term, e.branches), r.rule)
            scrut_done = is_weak_neutral(e.scrut, spec, sig)
        else:
            r = template_step(e.scrut, m, spec, sig)
            if r is not None:
                return Stepped(Match(e.mode, r.term, e.branches), r.rule)
            scrut_done = is_normal_template(e.scrut, m, spec, sig)
        if scrut_done:
            for i, br in enumerate(e.branches):
                r = template_step(br.body, m, spec, sig)
                if r is not None:
                    branches = (
                        e.branches[:i]
                        + (Branch(br.ctor, br.binders, r.term),)
                        + e.branches[i + 1 :]
                    )
                    return Stepped(Match(e.mode, e.scrut, branches), r.rule)
        return None
    if isinstance(e, Def):
        dmode = _def_mode(e.name, sig)
        if dmode is not None and spec.geq(dmode, m):
            entry = sig.def_(e.name)
            return Stepped(entry.body, "delta")
        return None
    if isinstance(e, Annot):
        return Stepped(e.term, "annot")
    return None


# ---------------------------------------------------------------------------
# Driver


def evaluate(
    e: Term,
    fuel: int,
    spec: ModeSpec,
    sig: Signature = _EMPTY_SIG,
    trace: bool = False,
) -> EvalResult:
    """Iterate term evaluation up to fuel steps."""
    collected: list[tuple[str, Term]] = []
    steps = 0
    cur = e
    while True:
        r = step(cur, spec, sig)
        if r is None:
            if is_weak_normal(cur, spec, sig):
                return EvalResult(Outcome.VALUE, cur, steps, tuple(collected))
            return EvalResult(Outcome.STUCK, cur, steps, tuple(collected))
        if steps >= fuel:
            return EvalResult(Outcome.FUEL_EXHAUSTED, cur, steps, tuple(collected))
        cur = r.term
        steps += 1
        if trace:
            collected.append((r.rule, cur))

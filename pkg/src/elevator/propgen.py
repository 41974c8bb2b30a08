"""Rule-directed generation of well-typed terms and the property harness.

The generator builds candidate terms by following the typing rules in the
checking direction (biased toward modal constructs: stores, suspensions,
splices), then validates each candidate with the checker; only terms that
actually check are used.  Properties exercised here are the system's
metatheorems — preservation, progress/classifier agreement, substructural
occurrence counts, usage-merge laws, the substitution lemma, splice-order
invariance, and mode safety — so any failure is an implementation bug.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .equiv import equiv_term
from .evaluator import evaluate, is_weak_normal, step, Outcome
from .modes import Mode, ModeSpec, StructRule
from .pretty import pp_term
from .subst import dep_ctx_of, merge_usage, subst_term, SplitError, subst_type
from .syntax import (
    App,
    Branch,
    Context,
    Ctor,
    Force,
    Lam,
    Load,
    Match,
    One,
    Store,
    Susp,
    TArrow,
    TCtxUp,
    TData,
    TDown,
    TUnit,
    Term,
    TmDecl,
    TmEntry,
    Type,
    alpha_eq,
    count_occurrences,
    erase_context,
    type_mode,
)
from .typecheck import (
    CtorDecl,
    DataDecl,
    Signature,
    TypingError,
    check_term,
)


def base_signature() -> Signature:
    """Natural numbers, one copy per mode: enough data for the harness."""
    nat = DataDecl(
        "Nat", "m", (), (CtorDecl("Zero", ()), CtorDecl("Succ", (TData("Nat", "m"),)))
    )
    return Signature((nat,), ())


@dataclass
class Gen:
    rng: random.Random
    spec: ModeSpec
    sig: Signature
    max_depth: int = 3

    def mode(self) -> Mode:
        return self.rng.choice(sorted(self.spec.modes))

    def ups(self, m: Mode) -> list[Mode]:
        return [k for k in sorted(self.spec.modes) if self.spec.geq(k, m)]

    def strict_ups(self, m: Mode) -> list[Mode]:
        return [k for k in sorted(self.spec.modes) if self.spec.gt(k, m)]

    # -- types ---------------------------------------------------------
    def gen_type(self, mode: Mode, depth: int) -> Type:
        opts = ["unit", "nat"]
        if depth > 0:
            opts += ["arrow", "down", "up"]
        while True:
            pick = self.rng.choice(opts)
            if pick == "unit":
                return TUnit(mode)
            if pick == "nat":
                return TData("Nat", mode)
            if pick == "arrow":
                return TArrow(
                    self.gen_type(mode, depth - 1),
                    self.gen_type(mode, depth - 1),
                    mode,
                )
            if pick == "down":
                hi = self.rng.choice(self.ups(mode))
                return TDown(hi, mode, self.gen_type(hi, depth - 1))
            if pick == "up":
                his = self.strict_ups(mode)
                if not his:
                    continue
                hi = self.rng.choice(his)
                ctx: list[TmDecl] = []
                for i in range(self.rng.randint(0, 2)):
                    ks = [
                        k
                        for k in self.ups(mode)
                        if self.spec.gt(hi, k)
                    ]
                    if not ks:
                        continue
                    k = self.rng.choice(ks)
                    ctx.append(TmDecl(f"h{i}", self.gen_type(k, 0), k))
                return TCtxUp(hi, mode, tuple(ctx), self.gen_type(mode, depth - 1))

    # -- terms ---------------------------------------------------------
    def gen_term(self, ctx: Context, a: Type, depth: int, used: frozenset) -> Term:
        """One candidate; may not actually check (the caller validates)."""
        jmode = type_mode(a)
        rng = self.rng
        # Sometimes use a variable of the right type.
        candidates = [
            d
            for d in ctx
            if isinstance(d, TmDecl)
            and alpha_eq(d.type, a)
            and self.spec.geq(d.mode, jmode)
            and (d.name not in used or self.spec.allows_contraction(d.mode))
        ]
        if candidates and rng.random() < 0.5:
            return rng.choice(candidates).name  # placeholder; replaced below
        if depth > 0 and rng.random() < 0.3:
            return self._gen_elim(ctx, a, depth, used)
        return self._gen_intro(ctx, a, depth, used)

    def _gen_intro(self, ctx: Context, a: Type, depth: int, used: frozenset) -> Term:
        rng = self.rng
        if isinstance(a, TUnit):
            return One(a.mode)
        if isinstance(a, TData):
            n = rng.randint(0, 2)
            out: Term = Ctor("Nat", a.mode, "Zero", ())
            for _ in range(n):
                out = Ctor("Nat", a.mode, "Succ", (out,))
            return out
        if isinstance(a, TArrow):
            x = f"x{rng.randint(0, 999)}"
            binder_mode = type_mode(a.dom)
            body_ctx = ctx + (TmDecl(x, a.dom, binder_mode),)
            body = self.gen_term(body_ctx, a.cod, depth - 1, used)
            if not self.spec.allows_weakening(binder_mode) and not isinstance(
                body, str
            ):
                # The binder must be consumed: fall back to returning it when
                # the domain and codomain agree, otherwise retry smaller.
                if alpha_eq(a.dom, a.cod):
                    body = x
            return Lam(x, a.dom, self._resolve(body))
        if isinstance(a, TDown):
            return Store(a.hi, a.lo, self._resolve(
                self.gen_term(ctx, a.body, depth - 1, used)
            ))
        if isinstance(a, TCtxUp):
            names = tuple(d.name for d in a.ctx)
            body = self.gen_term(ctx + a.ctx, a.body, depth - 1, used)
            return Susp(a.hi, a.lo, names, self._resolve(body))
        raise RuntimeError(f"no intro for {a!r}")

    def _gen_elim(self, ctx: Context, a: Type, depth: int, used: frozenset) -> Term:
        rng = self.rng
        jmode = type_mode(a)
        pick = rng.choice(["beta", "load", "splice", "match"])
        if pick == "beta":
            b = self.gen_type(jmode, 0)
            fun = self._resolve(
                self.gen_term(ctx, TArrow(b, a, jmode), depth - 1, used)
            )
            arg = self._resolve(self.gen_term(ctx, b, depth - 1, used))
            return App(fun, arg)
        if pick == "load":
            hi = rng.choice(self.ups(jmode))
            b = self.gen_type(hi, 0)
            bound = self._resolve(
                self.gen_term(ctx, TDown(hi, jmode, b), depth - 1, used)
            )
            x = f"p{rng.randint(0, 999)}"
            cont = self.gen_term(
                ctx + (TmDecl(x, b, hi),), a, depth - 1, used
            )
            return Load(hi, jmode, x, bound, self._resolve(cont))
        if pick == "splice":
            hi = rng.choice(self.ups(jmode))
            body = self._resolve(self.gen_term(ctx, a, depth - 1, used))
            return Force(hi, jmode, Susp(hi, jmode, (), body), ())
        # match on a small Nat scrutinee
        scrut = self._gen_intro(ctx, TData("Nat", jmode), 0, used)
        arm = self._resolve(self.gen_term(ctx, a, depth - 1, used))
        n = f"n{rng.randint(0, 999)}"
        other = self._resolve(self.gen_term(ctx, a, depth - 1, used))
        return Match(
            jmode,
            scrut,
            (Branch("Zero", (), arm), Branch("Succ", (n,), other)),
        )

    @staticmethod
    def _resolve(t) -> Term:
        from .syntax import Var

        return Var(t) if isinstance(t, str) else t

    def well_typed(self, tries: int = 40) -> tuple[Term, Type] | None:
        """A closed term that the checker accepts, with its type."""
        for _ in range(tries):
            mode = self.mode()
            a = self.gen_type(mode, self.max_depth - 1)
            cand = self._resolve(self.gen_term((), a, self.max_depth, frozenset()))
            try:
                elab, _ = check_term((), frozenset(), cand, a, self.spec, self.sig)
                return elab, a
            except (TypingError, RuntimeError):
                continue
        return None


# ---------------------------------------------------------------------------
# Properties


@dataclass
class PropResult:
    name: str
    cases: int
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _binder_modes(e: Term, spec: ModeSpec):
    """Yield (binder name, mode, scope) for usage-restricted binders."""
    if isinstance(e, Lam):
        try:
            yield e.var, type_mode(e.ann), e.body
        except ValueError:
            pass
        yield from _binder_modes(e.body, spec)
    elif isinstance(e, Load):
        yield e.var, e.hi, e.cont
        yield from _binder_modes(e.bound, spec)
        yield from _binder_modes(e.cont, spec)
    elif isinstance(e, (Store, Susp)):
        yield from _binder_modes(e.body, spec)
    elif isinstance(e, App):
        yield from _binder_modes(e.head, spec)
        yield from _binder_modes(e.arg, spec)
    elif isinstance(e, Force):
        yield from _binder_modes(e.head, spec)
        for entry in e.sub:
            if isinstance(entry, TmEntry):
                yield from _binder_modes(entry.term, spec)
    elif isinstance(e, Match):
        yield from _binder_modes(e.scrut, spec)
        for br in e.branches:
            yield from _binder_modes(br.body, spec)
    elif isinstance(e, Ctor):
        for arg in e.args:
            yield from _binder_modes(arg, spec)


def prop_preservation(gen: Gen, count: int, fuel: int = 60) -> PropResult:
    res = PropResult("preservation", 0)
    while res.cases < count:
        got = gen.well_typed()
        if got is None:
            continue
        e, a = got
        res.cases += 1
        cur = e
        for _ in range(fuel):
            r = step(cur, gen.spec, gen.sig)
            if r is None:
                break
            cur = r.term
            try:
                check_term((), frozenset(), cur, a, gen.spec, gen.sig)
            except TypingError as ex:
                res.failures.append(
                    f"{pp_term(e)} stepped to ill-typed {pp_term(cur)}: {ex}"
                )
                break
    return res


def prop_progress(gen: Gen, count: int, fuel: int = 60) -> PropResult:
    res = PropResult("progress", 0)
    while res.cases < count:
        got = gen.well_typed()
        if got is None:
            continue
        e, _ = got
        res.cases += 1
        cur = e
        for _ in range(fuel):
            r = step(cur, gen.spec, gen.sig)
            normal = is_weak_normal(cur, gen.spec, gen.sig)
            if (r is None) != normal:
                res.failures.append(
                    f"classifier disagreement on {pp_term(cur)}: "
                    f"step={'none' if r is None else r.rule}, normal={normal}"
                )
                break
            if r is None:
                break
            cur = r.term
    return res


def prop_substructural(gen: Gen, count: int) -> PropResult:
    res = PropResult("substructural-occurrences", 0)
    while res.cases < count:
        got = gen.well_typed()
        if got is None:
            continue
        e, _ = got
        res.cases += 1
        for name, mode, scope in _binder_modes(e, gen.spec):
            n = count_occurrences(scope, name)
            if not gen.spec.allows_contraction(mode) and n > 1:
                res.failures.append(
                    f"{name} at {mode} occurs {n} times in {pp_term(e)}"
                )
            if not gen.spec.allows_weakening(mode) and n < 1:
                res.failures.append(
                    f"{name} at {mode} is unused in {pp_term(e)}"
                )
    return res


def prop_usage_merge(gen: Gen, count: int) -> PropResult:
    """merge_usage is commutative and associative where defined."""
    res = PropResult("usage-merge-laws", 0)
    rng = gen.rng
    modes = sorted(gen.spec.modes)
    for _ in range(count):
        ctx = tuple(
            TmDecl(f"v{i}", TUnit(rng.choice(modes)), rng.choice(modes))
            for i in range(4)
        )
        names = [d.name for d in ctx]
        def pick():
            return frozenset(rng.sample(names, rng.randint(0, 3)))
        u1, u2, u3 = pick(), pick(), pick()
        res.cases += 1
        def merge(a, b):
            try:
                return merge_usage(ctx, a, b, gen.spec)
            except SplitError:
                return None
        ab = merge(u1, u2)
        ba = merge(u2, u1)
        if ab != ba:
            res.failures.append(f"commutativity: {u1} {u2}")
            continue
        left = merge(ab, u3) if ab is not None else None
        bc = merge(u2, u3)
        right = merge(u1, bc) if bc is not None else None
        if left != right:
            res.failures.append(f"associativity: {u1} {u2} {u3}")
    return res


def prop_substitution(gen: Gen, count: int) -> PropResult:
    """Splicing a checked substitution into a checked template body yields a
    term of the hereditarily substituted type."""
    res = PropResult("substitution-lemma", 0)
    rng = gen.rng
    while res.cases < count:
        mode = gen.mode()
        his = gen.strict_ups(mode)
        if not his:
            his = [mode]
        hi = rng.choice(his)
        decl_modes = [k for k in gen.ups(mode) if gen.spec.gt(hi, k)]
        ctx = []
        if decl_modes:
            k = rng.choice(decl_modes)
            ctx.append(TmDecl("h0", gen.gen_type(k, 0), k))
        up = TCtxUp(hi, mode, tuple(ctx), gen.gen_type(mode, 1))
        cand = Gen._resolve(gen.gen_term((), up, gen.max_depth, frozenset()))
        sigma = tuple(
            TmEntry(
                d.name,
                Gen._resolve(gen.gen_term((), d.type, gen.max_depth - 1, frozenset())),
                d.mode,
            )
            for d in ctx
        )
        # Check the suspension and entries independently, then substitute.
        try:
            susp_elab, _ = check_term((), frozenset(), cand, up, gen.spec, gen.sig)
            entries = []
            for d, entry in zip(ctx, sigma):
                t_elab, _ = check_term(
                    (), frozenset(), entry.term, d.type, gen.spec, gen.sig
                )
                entries.append(TmEntry(d.name, t_elab, d.mode))
        except TypingError:
            continue
        if not isinstance(susp_elab, Susp):
            continue
        res.cases += 1
        spliced = subst_term(
            tuple(entries), erase_context(tuple(ctx)), susp_elab.body
        )
        expected_type = subst_type(
            tuple(entries), erase_context(tuple(ctx)), up.body
        )
        try:
            check_term((), frozenset(), spliced, expected_type, gen.spec, gen.sig)
        except TypingError as ex:
            res.failures.append(
                f"substituted body ill-typed: {pp_term(spliced)}: {ex}"
            )
    return res


def prop_splice_order(gen: Gen, count: int, fuel: int = 500) -> PropResult:
    """Composing templates in either order yields alpha-equal results."""
    res = PropResult("splice-order-invariance", 0)
    rng = gen.rng
    fertile = [m for m in sorted(gen.spec.modes) if gen.strict_ups(m)]
    if not fertile:
        # No mode sits strictly below another: templates with holes cannot
        # be formed, so the property holds vacuously.
        return PropResult("splice-order-invariance", count)
    while res.cases < count:
        mode = rng.choice(fertile)
        hi = rng.choice(gen.strict_ups(mode))
        inner_ty = gen.gen_type(mode, 0)
        hole = TmDecl("hole", inner_ty, mode)
        body_ty = gen.gen_type(mode, 1)
        up1 = TCtxUp(hi, mode, (hole,), body_ty)
        t1 = Gen._resolve(gen.gen_term((), up1, gen.max_depth, frozenset()))
        t2 = Gen._resolve(
            gen.gen_term((), TCtxUp(hi, mode, (), inner_ty), 2, frozenset())
        )
        try:
            t1, _ = check_term((), frozenset(), t1, up1, gen.spec, gen.sig)
            t2, _ = check_term(
                (), frozenset(), t2, TCtxUp(hi, mode, (), inner_ty),
                gen.spec, gen.sig,
            )
        except TypingError:
            continue
        if not isinstance(t1, Susp):
            continue
        res.cases += 1
        plug = Force(hi, mode, t2, ())
        # Order A: splice t2 into t1 at evaluation time.
        ea = Susp(
            hi, mode, (), Force(hi, mode, t1, (TmEntry(t1.names[0], plug, mode),))
        )
        # Order B: substitute first, then evaluate.
        sigma = (TmEntry(t1.names[0], plug, mode),)
        eb = Susp(hi, mode, (), subst_term(sigma, dep_ctx_of(sigma), t1.body))
        ra = evaluate(ea, fuel, gen.spec, gen.sig)
        rb = evaluate(eb, fuel, gen.spec, gen.sig)
        if ra.outcome is not Outcome.VALUE or rb.outcome is not Outcome.VALUE:
            continue
        if not alpha_eq(ra.term, rb.term):
            res.failures.append(
                f"splice orders diverge: {pp_term(ra.term)} vs {pp_term(rb.term)}"
            )
    return res


def _twin(gen: Gen, a: Type, observer: Mode) -> tuple[Term, Term] | None:
    """Two checked terms of type a differing only inside suspensions whose
    body mode is inaccessible from the observer."""
    base = Gen._resolve(gen.gen_term((), a, gen.max_depth, frozenset()))
    try:
        left, _ = check_term((), frozenset(), base, a, gen.spec, gen.sig)
    except TypingError:
        return None
    right = _mutate_inaccessible(gen, left, a, observer)
    try:
        right, _ = check_term((), frozenset(), right, a, gen.spec, gen.sig)
    except TypingError:
        return None
    return left, right


def _mutate_inaccessible(gen: Gen, e: Term, a: Type, observer: Mode) -> Term:
    """Regenerate suspension bodies living at modes the observer cannot see."""
    if isinstance(e, Susp) and isinstance(a, TCtxUp) and not gen.spec.geq(
        a.lo, observer
    ):
        body = Gen._resolve(gen.gen_term(a.ctx, a.body, gen.max_depth - 1, frozenset()))
        return Susp(e.hi, e.lo, tuple(d.name for d in a.ctx), body)
    if isinstance(e, Store) and isinstance(a, TDown):
        return Store(e.hi, e.lo, _mutate_inaccessible(gen, e.body, a.body, observer))
    if isinstance(e, Lam) and isinstance(a, TArrow):
        return Lam(e.var, e.ann, _mutate_inaccessible(gen, e.body, a.cod, observer))
    return e


def prop_mode_safety(gen: Gen, count: int, fuel: int = 500) -> PropResult:
    res = PropResult("mode-safety", 0)
    rng = gen.rng
    while res.cases < count:
        observer = gen.mode()
        mode = rng.choice(gen.ups(observer))
        a = gen.gen_type(mode, gen.max_depth - 1)
        pair = _twin(gen, a, observer)
        if pair is None:
            continue
        left, right = pair
        if not equiv_term(left, right, observer, gen.spec, mode, gen.sig):
            # Mutation failed to stay in the relation; not a counterexample.
            continue
        res.cases += 1
        ra = evaluate(left, fuel, gen.spec, gen.sig)
        rb = evaluate(right, fuel, gen.spec, gen.sig)
        if ra.outcome is not Outcome.VALUE or rb.outcome is not Outcome.VALUE:
            continue
        if not equiv_term(ra.term, rb.term, observer, gen.spec, mode, gen.sig):
            res.failures.append(
                f"observer {observer}: {pp_term(ra.term)} !~ {pp_term(rb.term)}"
            )
    return res


ALL_PROPS = (
    ("preservation", prop_preservation),
    ("progress", prop_progress),
    ("substructural-occurrences", prop_substructural),
    ("usage-merge-laws", prop_usage_merge),
    ("substitution-lemma", prop_substitution),
    ("splice-order-invariance", prop_splice_order),
    ("mode-safety", prop_mode_safety),
)


def run_properties(
    spec: ModeSpec, seed: int = 0, count: int = 500, sig: Signature | None = None
) -> list[PropResult]:
    results = []
    for name, prop in ALL_PROPS:
        gen = Gen(random.Random(f"{seed}:{name}"), spec, sig or base_signature())
        results.append(prop(gen, count))
    return results

"""Bidirectional checking: modal introductions/eliminations, substructural
usage, mode accessibility, recursion policy, and data declarations."""

import pytest

from elevator.modes import (
    Recursion,
    linear_two_mode_spec,
    three_mode_spec,
    two_mode_spec,
    validate,
    FULL,
)
from elevator.syntax import (
    Annot,
    App,
    Branch,
    Ctor,
    Force,
    KType,
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
    TForall,
    TLam,
    TApp,
    TUnit,
    TmDecl,
    TmEntry,
    Var,
    alpha_eq,
)
from elevator.typecheck import (
    ANNOTATION_REQUIRED,
    BRANCH_USAGE,
    CtorDecl,
    DataDecl,
    DefEntry,
    LINEARITY,
    MODE_ACCESS,
    RECURSION_FORBIDDEN,
    Signature,
    TYPE_MISMATCH,
    TypingError,
    UNBOUND_VARIABLE,
    WEAKENING,
    check_signature,
    check_term,
    synth_term,
)

SIG = Signature(
    (
        DataDecl(
            "Nat",
            "m",
            (),
            (CtorDecl("Zero", ()), CtorDecl("Succ", (TData("Nat", "m"),))),
        ),
    ),
    (),
)


def _check(term, ty, spec=None, sig=SIG, ctx=()):
    spec = spec or two_mode_spec()
    return check_term(ctx, frozenset(), term, ty, spec, sig)


def _err(term, ty, spec=None, sig=SIG, ctx=()):
    with pytest.raises(TypingError) as exc:
        _check(term, ty, spec, sig, ctx)
    return exc.value.code


def test_unit_and_mode_fill():
    # elaboration fills an omitted mode slot from the expected type
    elab, used = _check(One(""), TUnit("P"))
    assert elab == One("P")
    assert used == frozenset()


def test_unit_wrong_mode():
    assert _err(One("C"), TUnit("P")) == TYPE_MISMATCH


def test_identity_lambda():
    e = Lam("x", TUnit("P"), Var("x"))
    ty = TArrow(TUnit("P"), TUnit("P"), "P")
    elab, used = _check(e, ty)
    assert alpha_eq(elab, e)


def test_unbound_variable():
    assert _err(Var("nope"), TUnit("P")) == UNBOUND_VARIABLE


def test_linearity_violation():
    spec = linear_two_mode_spec()
    ok = Lam("x", TData("Nat", "L"), Ctor("Nat", "L", "Succ", (Var("x"),)))
    ty = TArrow(TData("Nat", "L"), TData("Nat", "L"), "L")
    _check(ok, ty, spec)  # single use is fine
    # x consumed by the scrutinee and again in the Zero branch
    dup = Lam(
        "x",
        TData("Nat", "L"),
        Match(
            "L",
            Var("x"),
            (
                Branch("Zero", (), Var("x")),
                Branch("Succ", ("n",), Ctor("Nat", "L", "Succ", (Var("n"),))),
            ),
        ),
    )
    assert _err(dup, ty, spec) == LINEARITY


def test_weakening_violation():
    spec = linear_two_mode_spec()
    e = Lam("x", TUnit("L"), One("L"))
    ty = TArrow(TUnit("L"), TUnit("L"), "L")
    assert _err(e, ty, spec) == WEAKENING


def test_mode_access_variable():
    # a P variable may not be referenced from a judgment at C
    ctx = (TmDecl("p", TUnit("P"), "P"),)
    assert _err(Var("p"), TUnit("C"), ctx=ctx) == MODE_ACCESS


def test_higher_mode_variable_accessible():
    ctx = (TmDecl("c", TUnit("C"), "C"),)
    with pytest.raises(TypingError):
        # accessible, but the types disagree: C unit against P unit
        _check(Var("c"), TUnit("P"), ctx=ctx)
    _check(Var("c"), TUnit("C"), ctx=ctx)


def test_store_load_roundtrip():
    down = TDown("C", "P", TUnit("C"))
    # load sources are synthesized, so the store needs an annotation
    e = Load(
        "C", "P", "x", Annot(Store("C", "P", One("C")), down), Store("C", "P", Var("x"))
    )
    elab, _ = _check(e, down)
    assert isinstance(elab, Load)


def test_store_body_judged_at_hi():
    assert _err(Store("C", "P", One("P")), TDown("C", "P", TUnit("C"))) == TYPE_MISMATCH


def test_store_floor_violation():
    # a susp/store body may not mention variables below its tag mode
    ctx = (TmDecl("p", TUnit("P"), "P"),)
    assert (
        _err(Store("C", "P", Var("p")), TDown("C", "P", TUnit("C")), ctx=ctx)
        == MODE_ACCESS
    )


def test_susp_force_roundtrip():
    up = TCtxUp("C", "P", (TmDecl("h", TUnit("P"), "P"),), TUnit("P"))
    susp = Susp("", "", ("h",), Var("h"))
    elab, _ = _check(susp, up)
    assert isinstance(elab, Susp) and elab.hi == "C" and elab.lo == "P"
    force = Force(
        "", "", Annot(susp, up), (TmEntry("", One("P"), ""),)
    )
    elab2, _ = _check(force, TUnit("P"))
    assert isinstance(elab2, Force) and elab2.hi == "C"


def test_forall_and_type_application():
    ty = TForall("a", KType("P"), TArrow(TUnit("P"), TUnit("P"), "P"), "P")
    e = TLam("a", KType("P"), Lam("x", TUnit("P"), Var("x")))
    elab, _ = _check(e, ty)
    inst = App(TApp(Annot(e, ty), TUnit("P")), One("P"))
    elab2, _ = _check(inst, TUnit("P"))
    assert isinstance(elab2, App)


def test_ctor_and_match():
    two = Ctor("", "", "Succ", (Ctor("", "", "Succ", (Ctor("", "", "Zero", ()),)),))
    elab, _ = _check(two, TData("Nat", "P"))
    assert isinstance(elab, Ctor) and elab.mode == "P" and elab.data == "Nat"
    m = Match(
        "",
        elab,
        (
            Branch("Zero", (), One("P")),
            Branch("Succ", ("n",), One("P")),
        ),
    )
    # P allows weakening, so discarding n is fine
    _check(m, TUnit("P"))


def test_match_may_be_partial():
    # matches need not be exhaustive (the corpus's head/tail match only Cons)
    scrut = Ctor("Nat", "P", "Zero", ())
    m = Match("P", scrut, (Branch("Succ", ("n",), One("P")),))
    _check(m, TUnit("P"))


def test_branch_usage_agreement():
    spec = linear_two_mode_spec()
    duo = DataDecl("Duo", "m", (), (CtorDecl("A", ()), CtorDecl("B", ())))
    sig = Signature(SIG.datas + (duo,), ())
    ctx = (TmDecl("l", TUnit("L"), "L"), TmDecl("s", TData("Duo", "L"), "L"))
    good = Match(
        "L",
        Var("s"),
        (Branch("A", (), Var("l")), Branch("B", (), Var("l"))),
    )
    _check(good, TUnit("L"), spec, sig, ctx)  # both branches use l
    bad = Match(
        "L",
        Var("s"),
        (Branch("A", (), Var("l")), Branch("B", (), One("L"))),
    )
    assert _err(bad, TUnit("L"), spec, sig, ctx) == BRANCH_USAGE


def test_annotation_required_for_bare_susp_in_synthesis():
    spec = two_mode_spec()
    with pytest.raises(TypingError) as exc:
        synth_term((), frozenset(), "P", Susp("C", "P", (), One("P")), spec, SIG)
    assert exc.value.code == ANNOTATION_REQUIRED


def test_synth_one_and_ctor():
    spec = two_mode_spec()
    ty, _, _ = synth_term((), frozenset(), "P", One("P"), spec, SIG)
    assert ty == TUnit("P")
    ty2, elab2, _ = synth_term(
        (), frozenset(), "P", Ctor("", "P", "Zero", ()), spec, SIG
    )
    assert ty2 == TData("Nat", "P")
    assert elab2.data == "Nat"


def test_recursion_policy_blocks_self_reference():
    # GF definitions may not recurse under the default (empty-signature) policy
    spec = three_mode_spec()
    assert spec.recursion_policy("GF") is Recursion.NONE
    body = Lam("x", TUnit("GF"), App(App(Var("loop_"), One("GF")), Var("x")))
    # a self-referential def via Def node
    from elevator.syntax import Def

    entry = DefEntry(
        "w",
        TArrow(TUnit("GF"), TUnit("GF"), "GF"),
        Lam("x", TUnit("GF"), App(Def("w"), Var("x"))),
    )
    sig = Signature(SIG.datas, (entry,))
    with pytest.raises(TypingError) as exc:
        check_signature(sig, spec)
    assert exc.value.code == RECURSION_FORBIDDEN


def test_recursion_allowed_with_general_policy():
    spec = validate(
        ["GF"], [], {"GF": frozenset()}, {"GF": Recursion.GENERAL}
    )
    from elevator.syntax import Def

    entry = DefEntry(
        "w",
        TArrow(TUnit("GF"), TUnit("GF"), "GF"),
        Lam("x", TUnit("GF"), App(Def("w"), Var("x"))),
    )
    sig = Signature(SIG.datas, (entry,))
    check_signature(sig, spec)  # does not raise


def test_check_signature_validates_data_per_mode():
    bad = DataDecl(
        "Weird", "m", (), (CtorDecl("Mk", (TData("Missing", "m"),)),)
    )
    with pytest.raises(TypingError):
        check_signature(Signature((bad,), ()), two_mode_spec())


def test_force_head_judged_at_its_own_mode():
    # force of a C-tagged template is usable from a P judgment
    up = TCtxUp("C", "P", (), TUnit("P"))
    ctx = (TmDecl("t", up, "C"),)
    e = Force("", "", Var("t"), ())
    elab, _ = _check(e, TUnit("P"), ctx=ctx)
    assert elab.hi == "C" and elab.lo == "P"


def test_load_bound_judged_at_its_own_mode():
    down = TDown("C", "P", TUnit("C"))
    ctx = (TmDecl("d", down, "P"),)
    e = Load("", "", "x", Var("d"), Store("", "", Var("x")))
    elab, _ = _check(e, down, ctx=ctx)
    assert elab.hi == "C" and elab.lo == "P"

"""Core syntax: alpha-equivalence, free names, dependency erasure."""

import pytest

from elevator.syntax import (
    App,
    Branch,
    Ctor,
    DKCtxUp,
    DKType,
    DTmDecl,
    DTyDecl,
    Force,
    KCtxUp,
    KType,
    Lam,
    Load,
    Match,
    NVar,
    One,
    Store,
    Susp,
    TArrow,
    TCtxUp,
    TData,
    TDown,
    TForall,
    TNeutral,
    TThunk,
    TUnit,
    TmDecl,
    TmEntry,
    TyDecl,
    Var,
    alpha_eq,
    count_occurrences,
    erase_context,
    erase_kind,
    free_names,
    fresh,
    type_mode,
)


def test_alpha_eq_renames_lambda_binders():
    a = Lam("x", TUnit("P"), Var("x"))
    b = Lam("y", TUnit("P"), Var("y"))
    assert alpha_eq(a, b)
    assert not alpha_eq(a, Lam("y", TUnit("C"), Var("y")))


def test_alpha_eq_distinguishes_free_variables():
    assert alpha_eq(Var("x"), Var("x"))
    assert not alpha_eq(Var("x"), Var("y"))


def test_alpha_eq_susp_binders():
    a = Susp("C", "P", ("u",), Var("u"))
    b = Susp("C", "P", ("v",), Var("v"))
    assert alpha_eq(a, b)
    assert not alpha_eq(a, Susp("C", "P", ("v",), Var("w")))
    assert not alpha_eq(a, Susp("P", "P", ("v",), Var("v")))


def test_alpha_eq_types_with_binders():
    a = TForall("a", KType("P"), TNeutral(NVar("a"), "P"), "P")
    b = TForall("b", KType("P"), TNeutral(NVar("b"), "P"), "P")
    assert alpha_eq(a, b)
    assert not alpha_eq(a, TForall("b", KType("C"), TNeutral(NVar("b"), "P"), "P"))


def test_alpha_eq_contexts_positionally():
    a = TCtxUp("C", "P", (TmDecl("x", TUnit("P"), "P"),), TUnit("P"))
    b = TCtxUp("C", "P", (TmDecl("y", TUnit("P"), "P"),), TUnit("P"))
    assert alpha_eq(a, b)


def test_type_mode():
    assert type_mode(TUnit("P")) == "P"
    assert type_mode(TDown("C", "P", TUnit("C"))) == "P"
    assert type_mode(TCtxUp("C", "P", (), TUnit("P"))) == "C"
    assert type_mode(TArrow(TUnit("P"), TUnit("P"), "P")) == "P"
    assert type_mode(TData("Nat", "C")) == "C"
    with pytest.raises(ValueError):
        type_mode(TThunk((), TUnit("P")))


def test_free_names_terms():
    e = Lam("x", TUnit("P"), App(Var("x"), Var("y")))
    assert free_names(e) == frozenset({"y"})
    e2 = Load("C", "P", "z", Var("w"), Var("z"))
    assert free_names(e2) == frozenset({"w"})
    e3 = Match("P", Var("s"), (Branch("Succ", ("n",), Var("n")),))
    assert free_names(e3) == frozenset({"s"})


def test_free_names_types():
    a = TForall("a", KType("P"), TNeutral(NVar("a"), "P"), "P")
    assert free_names(a) == frozenset()
    b = TCtxUp("C", "P", (TmDecl("x", TNeutral(NVar("c"), "P"), "P"),),
               TNeutral(NVar("c"), "P"))
    assert free_names(b) == frozenset({"c"})


def test_fresh_avoids_collisions():
    got = fresh("x", {"x", "x'", "x''"})
    assert got not in {"x", "x'", "x''"}


def test_count_occurrences():
    e = App(Var("x"), Lam("x", TUnit("P"), Var("x")))
    assert count_occurrences(e, "x") == 1  # the inner x is bound
    e2 = App(Var("x"), Var("x"))
    assert count_occurrences(e2, "x") == 2
    assert count_occurrences(One("P"), "x") == 0
    # load binds its variable in the continuation only
    e3 = Load("C", "P", "x", Var("x"), Var("x"))
    assert count_occurrences(e3, "x") == 1


def test_erase_kind():
    assert erase_kind(KType("P")) == DKType("P")
    k = KCtxUp("C", "P", (TmDecl("x", TUnit("P"), "P"),), KType("P"))
    erased = erase_kind(k)
    assert isinstance(erased, DKCtxUp)
    assert erased.body == DKType("P")
    assert erased.ctx == (DTmDecl("x"),)


def test_erase_context():
    ctx = (TyDecl("a", KType("P")), TmDecl("x", TUnit("P"), "P"))
    erased = erase_context(ctx)
    assert erased == (DTyDecl("a", DKType("P")), DTmDecl("x"))


def test_alpha_eq_substitutions_in_force():
    a = Force("C", "P", Var("t"), (TmEntry("x", One("P"), "P"),))
    b = Force("C", "P", Var("t"), (TmEntry("x", One("P"), "P"),))
    assert alpha_eq(a, b)
    c = Force("C", "P", Var("t"), (TmEntry("x", One("C"), "P"),))
    assert not alpha_eq(a, c)


def test_alpha_eq_store_and_ctor():
    assert alpha_eq(Store("C", "P", One("C")), Store("C", "P", One("C")))
    assert not alpha_eq(Store("C", "P", One("C")), Store("C", "C", One("C")))
    x = Ctor("Nat", "P", "Succ", (Ctor("Nat", "P", "Zero", ()),))
    assert alpha_eq(x, Ctor("Nat", "P", "Succ", (Ctor("Nat", "P", "Zero", ()),)))
    assert not alpha_eq(x, Ctor("Nat", "P", "Zero", ()))

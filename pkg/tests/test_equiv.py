"""Equivalence over an observer mode: accessible skeletons must agree
syntactically; subterms at inaccessible modes are unconstrained."""

from elevator.equiv import (
    equiv_context,
    equiv_kind,
    equiv_subst,
    equiv_term,
    equiv_type,
)
from elevator.modes import three_mode_spec, two_mode_spec
from elevator.syntax import (
    App,
    Branch,
    Ctor,
    Force,
    KType,
    Lam,
    Load,
    Match,
    NVar,
    One,
    Store,
    Susp,
    TCtxUp,
    TData,
    TDown,
    TNeutral,
    TUnit,
    TmDecl,
    TmEntry,
    Var,
)
from elevator.typecheck import CtorDecl, DataDecl, Signature

SPEC = two_mode_spec()
THREE = three_mode_spec()

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


def test_identical_terms_equiv():
    e = Lam("x", TUnit("P"), Var("x"))
    assert equiv_term(e, e, "P", SPEC, "P", SIG)
    assert equiv_term(e, e, "C", SPEC, "P", SIG)


def test_judgment_mode_gate():
    # terms judged at a mode inaccessible from the observer are never compared
    e1, e2 = One("P"), Lam("x", TUnit("P"), Var("x"))
    assert equiv_term(e1, e2, "C", SPEC, jmode="P", sig=SIG)
    assert not equiv_term(e1, e2, "P", SPEC, jmode="P", sig=SIG)


def test_susp_bodies_gated_by_lo():
    a = Susp("C", "P", (), One("P"))
    b = Susp("C", "P", (), App(Lam("x", TUnit("P"), Var("x")), One("P")))
    # observed from C: the P body is invisible
    assert equiv_term(a, b, "C", SPEC, "C", SIG)
    # observed from P: the bodies differ
    assert not equiv_term(a, b, "P", SPEC, "C", SIG)


def test_susp_mode_indices_always_compared():
    a = Susp("C", "P", (), One("P"))
    b = Susp("C", "C", (), One("C"))
    assert not equiv_term(a, b, "C", SPEC, "C", SIG)


def test_store_visibility():
    a = Store("P", "GF", One("P"))
    b = Store("P", "GF", App(Lam("x", TUnit("P"), Var("x")), One("P")))
    # observed from GF the body (judged at P >= GF) is compared
    assert not equiv_term(a, b, "GF", THREE, "GF", SIG)
    # a store judged at GF is wholly invisible to a P observer
    assert equiv_term(a, b, "P", THREE, "GF", SIG)


def test_binders_matched_positionally():
    a = Susp("C", "P", ("u",), Var("u"))
    b = Susp("C", "P", ("v",), Var("v"))
    assert equiv_term(a, b, "P", SPEC, "C", SIG)
    m1 = Match("P", Var("s"), (Branch("Succ", ("n",), Var("n")),))
    m2 = Match("P", Var("s"), (Branch("Succ", ("k",), Var("k")),))
    assert equiv_term(m1, m2, "P", SPEC, "P", SIG)


def test_ctor_args_compared_at_data_mode():
    a = Ctor("Nat", "P", "Succ", (Ctor("Nat", "P", "Zero", ()),))
    b = Ctor("Nat", "P", "Succ", (Ctor("Nat", "P", "Zero", ()),))
    c = Ctor("Nat", "P", "Succ", (Ctor("Nat", "P", "Succ", (Ctor("Nat", "P", "Zero", ()),)),))
    assert equiv_term(a, b, "P", SPEC, "P", SIG)
    assert not equiv_term(a, c, "P", SPEC, "P", SIG)
    # from C, P-mode constructor arguments are invisible
    assert equiv_term(a, c, "C", SPEC, "P", SIG)


def test_force_heads_gated_by_hi():
    f1 = Force("C", "GF", Var("t"), ())
    f2 = Force("C", "GF", Var("u"), ())
    # the head lives at C: always visible when C >= n
    assert not equiv_term(f1, f2, "GF", THREE, "GF", SIG)
    # a P-tagged head is invisible to a C observer (P >= C fails)
    p1 = Force("P", "GF", Var("t"), ())
    p2 = Force("P", "GF", Var("u"), ())
    assert equiv_term(p1, p2, "C", THREE, None, SIG)


def test_load_bound_gated_by_lo():
    l1 = Load("C", "P", "x", Var("d"), Var("x"))
    l2 = Load("C", "P", "x", Var("e"), Var("x"))
    # bound judged at P: invisible from C
    assert equiv_term(l1, l2, "C", SPEC, "C", SIG)
    assert not equiv_term(l1, l2, "P", SPEC, "P", SIG)


def test_equiv_types():
    assert equiv_type(TUnit("P"), TUnit("P"), "P", SPEC)
    assert not equiv_type(TUnit("P"), TUnit("C"), "P", SPEC)
    # types at inaccessible modes compare trivially
    assert equiv_type(TUnit("P"), TData("Nat", "P"), "C", SPEC)
    a = TDown("C", "P", TUnit("C"))
    b = TDown("C", "P", TData("Nat", "C"))
    assert not equiv_type(a, b, "P", SPEC)
    # TCtxUp bodies gated at lo
    u1 = TCtxUp("C", "P", (), TUnit("P"))
    u2 = TCtxUp("C", "P", (), TData("Nat", "P"))
    assert not equiv_type(u1, u2, "P", SPEC)
    assert equiv_type(u1, u2, "C", SPEC)


def test_equiv_kinds_and_contexts():
    assert equiv_kind(KType("P"), KType("P"), "P", SPEC)
    assert not equiv_kind(KType("P"), KType("C"), "P", SPEC)
    g1 = (TmDecl("x", TUnit("P"), "P"),)
    g2 = (TmDecl("x", TUnit("C"), "C"),)
    assert equiv_context(g1, g1, "P", SPEC)
    assert not equiv_context(g1, g2, "P", SPEC)
    assert not equiv_context(g1, (), "P", SPEC)


def test_equiv_subst_entries():
    s1 = (TmEntry("x", One("P"), "P"),)
    s2 = (TmEntry("x", App(Lam("y", TUnit("P"), Var("y")), One("P")), "P"),)
    assert not equiv_subst(s1, s2, "P", SPEC)
    assert equiv_subst(s1, s2, "C", SPEC)
    t1 = (TmEntry("x", One("P"), "P"),)
    t2 = (TmEntry("x", One("P"), "C"),)
    # entry modes are part of the skeleton
    assert not equiv_subst(t1, t2, "C", SPEC)


def test_neutral_type_equiv():
    n1 = TNeutral(NVar("a"), "P")
    n2 = TNeutral(NVar("b"), "P")
    assert not equiv_type(n1, n2, "P", SPEC)
    assert equiv_type(n1, n1, "P", SPEC)

"""Two-level small-step evaluation: term reductions, template reduction
gated by the ambient mode, and the value classifier."""

from elevator.evaluator import (
    Outcome,
    evaluate,
    is_normal_template,
    is_weak_normal,
    step,
    template_step,
)
from elevator.modes import FULL, two_mode_spec, validate
from elevator.syntax import (
    Annot,
    App,
    Branch,
    Ctor,
    Def,
    Force,
    Lam,
    Load,
    Match,
    One,
    Store,
    Susp,
    TArrow,
    TUnit,
    TmEntry,
    Var,
    alpha_eq,
)
from elevator.typecheck import DefEntry, Signature

SPEC = two_mode_spec()
SIG = Signature()

# m > k > l for the template-gating tests
MKL = validate(["m", "k", "l"], [("m", "k"), ("k", "l")], {x: FULL for x in "mkl"})
# reordered: l >= k
LKM = validate(["m", "k", "l"], [("m", "l"), ("l", "k")], {x: FULL for x in "mkl"})


def test_unit_is_value():
    r = evaluate(One("P"), 10, SPEC)
    assert r.outcome is Outcome.VALUE and r.steps == 0 and r.term == One("P")


def test_beta():
    e = App(Lam("x", TUnit("P"), Var("x")), One("P"))
    r = step(e, SPEC, SIG)
    assert r is not None and r.rule == "beta" and r.term == One("P")


def test_beta_waits_for_argument():
    # the argument is evaluated to a weak normal before beta fires
    inner = App(Lam("y", TUnit("P"), Var("y")), One("P"))
    e = App(Lam("x", TUnit("P"), Var("x")), inner)
    r = step(e, SPEC, SIG)
    # the inner redex in argument position fires first
    assert r.rule == "beta"
    assert r.term == App(Lam("x", TUnit("P"), Var("x")), One("P"))
    # head evaluates before the argument
    e2 = App(Annot(Lam("x", TUnit("P"), Var("x")), TArrow(TUnit("P"), TUnit("P"), "P")), One("P"))
    r2 = step(e2, SPEC, SIG)
    assert r2.rule == "annot"


def test_load_store():
    e = Load("C", "P", "x", Store("C", "P", One("C")), Var("x"))
    r = step(e, SPEC, SIG)
    assert r.rule == "load-store" and r.term == One("C")


def test_force_susp_splice():
    e = Force(
        "C", "P", Susp("C", "P", ("h",), Var("h")), (TmEntry("h", One("P"), "P"),)
    )
    r = step(e, SPEC, SIG)
    assert r.rule == "force-susp" and r.term == One("P")


def test_match_select():
    two = Ctor("Nat", "P", "Succ", (Ctor("Nat", "P", "Zero", ()),))
    m = Match(
        "P",
        two,
        (Branch("Zero", (), One("P")), Branch("Succ", ("n",), Var("n"))),
    )
    r = step(m, SPEC, SIG)
    assert r.rule == "match" and r.term == Ctor("Nat", "P", "Zero", ())


def test_delta_unfolds_definitions():
    sig = Signature((), (DefEntry("u", TUnit("P"), One("P")),))
    r = step(Def("u"), SPEC, sig)
    assert r.rule == "delta" and r.term == One("P")


def test_fuel_exhaustion():
    sig = Signature(
        (), (DefEntry("w", TUnit("P"), Def("w")),)
    )
    r = evaluate(Def("w"), 7, SPEC, sig)
    assert r.outcome is Outcome.FUEL_EXHAUSTED and r.steps == 7


def test_stuck_term():
    r = evaluate(App(One("P"), One("P")), 10, SPEC)
    assert r.outcome is Outcome.STUCK


def test_trace_records_rules():
    e = App(Lam("x", TUnit("P"), Var("x")), One("P"))
    r = evaluate(e, 10, SPEC, SIG, trace=True)
    assert [rule for rule, _ in r.trace] == ["beta"]
    assert r.trace[-1][1] == One("P")


def test_weak_normal_forms():
    assert is_weak_normal(One("P"), SPEC, SIG)
    assert is_weak_normal(Lam("x", TUnit("P"), App(Var("x"), Var("x"))), SPEC, SIG)
    assert is_weak_normal(Var("free"), SPEC, SIG)  # weak neutral
    assert not is_weak_normal(App(Lam("x", TUnit("P"), Var("x")), One("P")), SPEC, SIG)
    # a store's body must itself be weak normal
    redex = App(Lam("x", TUnit("C"), Var("x")), One("C"))
    assert not is_weak_normal(Store("C", "P", redex), SPEC, SIG)
    assert is_weak_normal(Store("C", "P", One("C")), SPEC, SIG)


def test_susp_body_gated_by_its_tag_mode():
    # the body of a susp is template-reduced under ambient hi: redices at
    # modes below hi are kept as syntax
    p_redex = App(Lam("x", TUnit("P"), Var("x")), One("P"))
    assert is_weak_normal(Susp("C", "P", (), p_redex), SPEC, SIG)
    assert step(Susp("C", "P", (), p_redex), SPEC, SIG) is None
    # a redex at the tag mode itself is still reduced
    c_redex = App(Lam("x", TUnit("C"), Var("x")), One("C"))
    susp = Susp("C", "C", (), c_redex)
    assert not is_weak_normal(susp, SPEC, SIG)
    assert step(susp, SPEC, SIG).rule == "beta"


def _mkl_example():
    """load x = (\\x:1_l. store (\\y:1_m.y)) 1_l in store (x 1_m)."""
    return Load(
        "m",
        "l",
        "x",
        App(Lam("x", TUnit("l"), Store("m", "l", Lam("y", TUnit("m"), Var("y")))), One("l")),
        Store("m", "l", App(Var("x"), One("m"))),
    )


def test_template_gating_under_mkl():
    e = _mkl_example()
    assert is_normal_template(e, "k", MKL, SIG)
    assert template_step(e, "k", MKL, SIG) is None


def test_template_fires_when_l_accessible():
    e = _mkl_example()
    assert not is_normal_template(e, "k", LKM, SIG)
    r = template_step(e, "k", LKM, SIG)
    assert r is not None and r.rule == "beta"


def test_template_splice_rule():
    # force(susp)@sigma inside a template at an accessible mode is spliced
    inner = Force(
        "C", "P", Susp("C", "P", ("h",), Var("h")), (TmEntry("h", One("P"), "P"),)
    )
    outer = Susp("C", "P", (), inner)
    r = step(outer, SPEC, SIG)
    assert r.rule == "splice"
    assert r.term == Susp("C", "P", (), One("P"))


def test_evaluation_is_deterministic():
    e = App(
        Lam("x", TUnit("P"), App(Lam("y", TUnit("P"), Var("y")), Var("x"))),
        One("P"),
    )
    r1 = evaluate(e, 100, SPEC, SIG, trace=True)
    r2 = evaluate(e, 100, SPEC, SIG, trace=True)
    assert r1 == r2 and r1.outcome is Outcome.VALUE
    assert alpha_eq(r1.term, One("P"))

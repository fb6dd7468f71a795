from trsterm.terms import Symbol, parse_trs, print_trs
from trsterm.uncurry import applicative_arity, detect_application_symbol, uncurry

MAP = (
    "(VAR z x l) (RULES "
    "app(app(map,z),cons(x,l)) -> cons(app(z,x),app(app(map,z),l)) "
    "app(app(map,z),nil) -> nil)"
)


def test_detect_none_without_nested_application():
    assert detect_application_symbol(parse_trs("(VAR x) (RULES f(x) -> x)")) is None


def test_detect_app_in_map():
    sym = detect_application_symbol(parse_trs(MAP))
    assert sym == Symbol("app", 2)


def test_detect_rejects_variable_head_in_lhs():
    assert detect_application_symbol(parse_trs("(VAR x y) (RULES app(x,y) -> y)")) is None


def test_detect_needs_nonvariable_head_in_rhs():
    # every application in a right-hand side has a variable head here
    trs = parse_trs("(VAR x y) (RULES f(app(g,x)) -> app(x,y0)  )".replace("y0", "x"))
    assert detect_application_symbol(trs) is None


def test_applicative_arities_in_map():
    trs = parse_trs(MAP)
    app = Symbol("app", 2)
    assert applicative_arity(Symbol("map", 0), app, trs) == 2
    assert applicative_arity(Symbol("cons", 2), app, trs) == 0
    assert applicative_arity(Symbol("nil", 0), app, trs) == 0


def test_applicative_arity_single_spine():
    trs = parse_trs("(VAR x) (RULES app(f0,x) -> app(g0,a))")
    app = Symbol("app", 2)
    # g0 heads one right-hand-side spine of length 1 and no left-hand side
    assert applicative_arity(Symbol("g0", 0), app, trs) == 1


def test_applicative_arity_ignores_whole_lhs_spines():
    # uncurrying a spine that only occurs as a full left-hand side would just
    # rename the rule, so it must not trigger
    trs = parse_trs("(VAR x y) (RULES app(f0,x) -> x)")
    app = Symbol("app", 2)
    assert applicative_arity(Symbol("f0", 0), app, trs) == 0


def test_uncurry_unchanged_without_application():
    trs = parse_trs("(VAR x) (RULES f(x) -> x)")
    out, plans = uncurry(trs)
    assert plans == []
    assert out.rules == trs.rules


def test_uncurry_map_produces_expected_system():
    out, plans = uncurry(parse_trs(MAP))
    assert len(plans) == 1
    plan = plans[0]
    assert plan.app == Symbol("app", 2)
    assert dict(plan.arities)[Symbol("map", 0)] == 2
    rendered = {str(r) for r in out.rules}
    assert rendered == {
        "app_2_map(z,cons(x,l)) -> cons(app(z,x),app_2_map(z,l))",
        "app_2_map(z,nil) -> nil",
        "app(map,y0) -> app_1_map(y0)",
        "app(app_1_map(x0),y0) -> app_2_map(x0,y0)",
    }
    # arity bookkeeping: arity(f^l g) = arity(g) + l * (arity(app) - 1)
    for (g, level), sym in plan.fresh.items():
        assert sym.arity == g.arity + level * (plan.app.arity - 1)


def test_uncurry_idempotent_on_corpus():
    import glob, os

    here = os.path.dirname(__file__)
    for path in sorted(glob.glob(os.path.join(here, "corpus", "*.trs"))):
        try:
            trs = parse_trs(open(path).read())
        except Exception:
            continue
        once, _ = uncurry(trs)
        twice, plans = uncurry(once)
        assert plans == [], f"{os.path.basename(path)} not idempotent"
        assert twice.rules == once.rules


def test_uncurried_rules_stay_well_formed():
    out, _ = uncurry(parse_trs(MAP))
    # reparse through the printer: Rule invariants re-validate on the way in
    again = parse_trs(print_trs(out))
    assert len(again.rules) == len(out.rules)

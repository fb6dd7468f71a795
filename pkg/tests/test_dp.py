import itertools
import random

import pytest

from trsterm.dp import (
    DependencyGraph,
    DpProblem,
    ProcessorSpec,
    SolverConfig,
    StrategyError,
    dependency_pairs,
    estimated_edg,
    run_pipeline,
    sccs,
    usable_rules,
    validate_strategy,
)
from trsterm.cli import default_strategy
from trsterm.smt import default_solver_command
from trsterm.terms import App, Symbol, Var, parse_trs

ACK = (
    "(VAR x y) (RULES ack(0,y) -> s(y) ack(s(x),0) -> ack(x,s(0)) "
    "ack(s(x),s(y)) -> ack(x,ack(s(x),y)))"
)


def solver_config(**kw):
    return SolverConfig(command=default_solver_command(check_seconds=8), **kw)


def test_dependency_pairs_none_for_constructor_rhs():
    assert dependency_pairs(parse_trs("(VAR x) (RULES f(x) -> x)")) == []


def test_dependency_pairs_single():
    pairs = dependency_pairs(parse_trs("(VAR x) (RULES f(s(x)) -> f(x))"))
    assert [str(p) for p in pairs] == ["f#(s(x)) -> f#(x)"]


def test_dependency_pairs_ackermann():
    pairs = dependency_pairs(parse_trs(ACK))
    assert [str(p) for p in pairs] == [
        "ack#(s(x),0) -> ack#(x,s(0))",
        "ack#(s(x),s(y)) -> ack#(x,ack(s(x),y))",
        "ack#(s(x),s(y)) -> ack#(s(x),y)",
    ]


def test_dependency_pair_count_bound():
    from trsterm.terms import defined_symbols, subterms

    for text in (ACK, "(VAR x) (RULES f(s(x)) -> f(x) g(x) -> f(g(x)))"):
        trs = parse_trs(text)
        defined = defined_symbols(trs)
        bound = sum(
            sum(1 for _, u in subterms(r.rhs) if isinstance(u, App) and u.sym in defined)
            for r in trs.rules
        )
        assert len(dependency_pairs(trs)) <= bound


def test_edg_self_loop():
    trs = parse_trs("(VAR x) (RULES f(s(x)) -> f(x))")
    pairs = dependency_pairs(trs)
    graph = estimated_edg(pairs, trs)
    assert (0, 0) in graph.edges


def test_edg_distinct_sharp_roots_no_edge():
    trs = parse_trs("(VAR x) (RULES f(s(x)) -> f(x) g(s(x)) -> g(x))")
    pairs = dependency_pairs(trs)
    graph = estimated_edg(pairs, trs)
    assert (0, 1) not in graph.edges and (1, 0) not in graph.edges


def test_edg_constructor_clash():
    # f#(x) -> g#(a) cannot reach g#(b)'s pair; the reverse direction can
    trs = parse_trs("(VAR x) (RULES f(x) -> g(a) g(b) -> f(b))")
    pairs = dependency_pairs(trs)
    assert [str(p) for p in pairs] == ["f#(x) -> g#(a)", "g#(b) -> f#(b)"]
    graph = estimated_edg(pairs, trs)
    assert (0, 1) not in graph.edges
    assert (1, 0) in graph.edges


def brute_force_sccs(nodes, edges):
    reach = {n: {n} for n in nodes}
    changed = True
    while changed:
        changed = False
        for a, b in edges:
            new = reach[b] - reach[a]
            if new:
                reach[a] |= new
                changed = True
    on_cycle = {n for n in nodes if any((n, m) in edges and n in reach[m] for m in nodes)}
    comps = []
    for n in sorted(on_cycle):
        if any(n in c for c in comps):
            continue
        comps.append(frozenset(m for m in on_cycle if m in reach[n] and n in reach[m]))
    return sorted(comps, key=lambda c: (len(c), min(c)))


def test_sccs_examples():
    g = DependencyGraph((0, 1, 2), frozenset({(0, 1), (1, 0), (1, 2)}))
    assert sccs(g) == [frozenset({0, 1})]
    g2 = DependencyGraph((0,), frozenset({(0, 0)}))
    assert sccs(g2) == [frozenset({0})]


def test_sccs_against_brute_force():
    rng = random.Random(7)
    for _ in range(120):
        n = rng.randrange(1, 9)
        nodes = tuple(range(n))
        edges = frozenset(
            (a, b) for a in nodes for b in nodes if rng.random() < 0.25
        )
        g = DependencyGraph(nodes, edges)
        assert sccs(g) == brute_force_sccs(nodes, edges)


def test_sccs_disjoint_and_cover_cycles():
    rng = random.Random(11)
    for _ in range(40):
        n = rng.randrange(2, 9)
        nodes = tuple(range(n))
        edges = frozenset((a, b) for a in nodes for b in nodes if rng.random() < 0.3)
        comps = sccs(DependencyGraph(nodes, edges))
        for c1, c2 in itertools.combinations(comps, 2):
            assert not (c1 & c2)
        expected = brute_force_sccs(nodes, edges)
        covered = set().union(*comps) if comps else set()
        on_cycle = set().union(*expected) if expected else set()
        assert covered == on_cycle


def test_usable_rules_empty_when_rhs_has_no_defined_symbols():
    trs = parse_trs("(VAR x) (RULES f(s(x)) -> f(x))")
    pairs = dependency_pairs(trs)
    assert usable_rules(pairs, trs) == set()


def test_usable_rules_ackermann_all():
    trs = parse_trs(ACK)
    pairs = dependency_pairs(trs)
    assert usable_rules(pairs, trs) == {0, 1, 2}


def test_usable_rules_closure():
    trs = parse_trs("(VAR x) (RULES f(x) -> g(x) g(x) -> x h(x) -> h(h(x)))")
    h = Symbol("h#", 1, "sharp")
    f = Symbol("f", 1)
    pairs = [p for p in dependency_pairs(trs)]
    # a pair with f in its right-hand side pulls in f's rule and then g's
    from trsterm.terms import Rule

    pair = Rule(App(h, (Var("x"),)), App(h, (App(f, (Var("x"),)),)), 0)
    assert usable_rules([pair], trs) == {0, 1}


def test_validate_strategy_rejects_nonmonotone_before_edg():
    from trsterm.orders import preset

    with pytest.raises(StrategyError, match="monotone"):
        validate_strategy([ProcessorSpec("order", preset("lpo-af")), ProcessorSpec("edg")])


def test_validate_strategy_rejects_duplicate_edg():
    with pytest.raises(StrategyError, match="duplicate EDG"):
        validate_strategy([ProcessorSpec("edg"), ProcessorSpec("edg")])


def test_validate_strategy_requires_loop_last():
    with pytest.raises(StrategyError, match="last"):
        validate_strategy([ProcessorSpec("loop"), ProcessorSpec("edg")])


def test_pipeline_empty_trs_is_terminating():
    verdict = run_pipeline(parse_trs("(RULES )"), default_strategy(), solver_config())
    assert verdict.answer == "YES"


def test_pipeline_self_loop_is_nonterminating():
    verdict = run_pipeline(parse_trs("(RULES a -> a)"), default_strategy(), solver_config())
    assert verdict.answer == "NO"
    assert verdict.witness is not None


def test_pipeline_simple_yes():
    verdict = run_pipeline(parse_trs("(VAR x) (RULES f(s(x)) -> f(x))"), default_strategy(), solver_config())
    assert verdict.answer == "YES"


def test_edg_overapproximates_reachable_instances():
    # a concrete one-step chain instance implies the estimated edge
    rng = random.Random(3)
    trs = parse_trs(ACK)
    pairs = dependency_pairs(trs)
    graph = estimated_edg(pairs, trs)
    zero = App(Symbol("0", 0))
    s = Symbol("s", 1)
    grounds = [zero, App(s, (zero,)), App(s, (App(s, (zero,)),))]
    from trsterm.terms import apply_substitution, match, rewrite_step, variables

    for _ in range(100):
        p = rng.choice(pairs)
        q = rng.choice(pairs)
        sigma = {v: rng.choice(grounds) for v in variables(p.lhs)}
        t = apply_substitution(p.rhs, sigma)
        # chase at most two rewrite steps below the root looking for a q-lhs instance
        frontier = {t}
        for _ in range(3):
            if any(match(q.lhs, u) is not None for u in frontier):
                assert (p.rid, q.rid) in graph.edges
                break
            frontier = {w for u in frontier for w in rewrite_step(u, trs)} or frontier

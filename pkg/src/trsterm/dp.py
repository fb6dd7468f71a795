"""Dependency pairs, the estimated dependency graph, SCC decomposition,
usable rules, and the top-level processor pipeline.

The pipeline drives one SMT solver session: rule-removal orders run first and
repeat while they remove something, then the rule set is uncurried, dependency
pairs and the graph are built, and each SCC (smallest first) is attacked with
the reduction-pair orders in strategy order.  A resisting SCC triggers loop
detection; a found loop means nontermination, otherwise the analysis gives up.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from . import orders, smt
from .loops import LoopWitness, find_loop
from .orders import OrderParams, ReductionPairEncoder, decode_model
from .smt import SolverError, SolverSession
from .terms import (
    App,
    Rule,
    Symbol,
    Term,
    Trs,
    UnsupportedFeatureError,
    Var,
    defined_symbols,
    match,
    subterms,
    unify,
    variables,
)
from .uncurry import uncurry


@dataclass(frozen=True)
class DpProblem:
    pairs: tuple
    rules: Trs


def sharp(sym: Symbol) -> Symbol:
    return sym.sharp()


def dependency_pairs(trs: Trs) -> list[Rule]:
    """One pair per defined-rooted subterm of each right-hand side, in rule
    order then root-first left-to-right; structural duplicates kept once."""
    defined = defined_symbols(trs)
    out: list[Rule] = []
    seen = set()
    for rule in trs.rules:
        lhs_sharp = App(sharp(rule.lhs.sym), rule.lhs.args)
        for _, sub in subterms(rule.rhs):
            if isinstance(sub, App) and sub.sym in defined:
                pair = (lhs_sharp, App(sharp(sub.sym), sub.args))
                if pair not in seen:
                    seen.add(pair)
                    out.append(Rule(pair[0], pair[1], len(out)))
    return out


@dataclass(frozen=True)
class DependencyGraph:
    nodes: tuple
    edges: frozenset  # (source pair id, target pair id)

    def successors(self, n: int):
        return [b for a, b in self.edges if a == n]


def tcap(t: Term, defined: set, counter: itertools.count) -> Term:
    """Replace variables and defined-rooted subterms by fresh variables,
    bottom up."""
    if isinstance(t, Var):
        return Var(f"_tc{next(counter)}")
    args = tuple(tcap(a, defined, counter) for a in t.args)
    if t.sym in defined:
        return Var(f"_tc{next(counter)}")
    return App(t.sym, args)


def estimated_edg(pairs, trs: Trs) -> DependencyGraph:
    """Edge i -> j iff TCAP of pair i's rhs unifies with pair j's lhs."""
    defined = defined_symbols(trs)
    counter = itertools.count()
    caps = [tcap(p.rhs, defined, counter) for p in pairs]
    edges = set()
    for i, p in enumerate(pairs):
        for j, q in enumerate(pairs):
            lhs = q.renamed(f"_r{j}").lhs
            if unify(caps[i], lhs) is not None:
                edges.add((p.rid, q.rid))
    return DependencyGraph(tuple(p.rid for p in pairs), frozenset(edges))


def sccs(graph: DependencyGraph) -> list[frozenset]:
    """Nontrivial strongly connected components (singletons only with a
    self-loop), ascending by size then smallest member."""
    adjacency: dict = {n: [] for n in graph.nodes}
    for a, b in sorted(graph.edges):
        adjacency[a].append(b)
    index: dict = {}
    lowlink: dict = {}
    on_stack: set = set()
    stack: list = []
    counter = itertools.count()
    out = []

    for root in graph.nodes:
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            node, pi = work.pop()
            if pi == 0:
                index[node] = lowlink[node] = next(counter)
                stack.append(node)
                on_stack.add(node)
            recurse = False
            for k in range(pi, len(adjacency[node])):
                succ = adjacency[node][k]
                if succ not in index:
                    work.append((node, k + 1))
                    work.append((succ, 0))
                    recurse = True
                    break
                if succ in on_stack:
                    lowlink[node] = min(lowlink[node], index[succ])
            if recurse:
                continue
            if lowlink[node] == index[node]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == node:
                        break
                if len(comp) > 1 or (node, node) in graph.edges:
                    out.append(frozenset(comp))
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
    return sorted(out, key=lambda c: (len(c), min(c)))


def usable_rules(pairs, trs: Trs) -> set:
    """Least set closed under: a rule is usable when its lhs root occurs in a
    pair's rhs or in the rhs of a usable rule (syntactic, filter-independent)."""
    by_root: dict = {}
    for r in trs.rules:
        by_root.setdefault(r.lhs.sym, []).append(r)

    def rhs_symbols(t: Term):
        stack = [t]
        while stack:
            u = stack.pop()
            if isinstance(u, App):
                yield u.sym
                stack.extend(u.args)

    usable: set = set()
    queue = []
    seen_syms: set = set()
    for p in pairs:
        for sym in rhs_symbols(p.rhs):
            if sym not in seen_syms:
                seen_syms.add(sym)
                queue.append(sym)
    while queue:
        sym = queue.pop()
        for r in by_root.get(sym, ()):
            if r.rid in usable:
                continue
            usable.add(r.rid)
            for s2 in rhs_symbols(r.rhs):
                if s2 not in seen_syms:
                    seen_syms.add(s2)
                    queue.append(s2)
    return usable


# ---------------------------------------------------------------------------
# Strategy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProcessorSpec:
    kind: str  # "order" | "uncurry" | "edg" | "loop"
    params: Optional[OrderParams] = None

    def __str__(self) -> str:
        return self.params.describe() if self.kind == "order" else self.kind.upper()


class StrategyError(Exception):
    pass


@dataclass
class Strategy:
    rule_removal: list
    has_uncurry: bool
    has_edg: bool
    reduction_pairs: list
    has_loop: bool


def validate_strategy(specs: list[ProcessorSpec]) -> Strategy:
    pre: list[OrderParams] = []
    post: list[OrderParams] = []
    has_uncurry = has_edg = has_loop = False
    for spec in specs:
        if has_loop:
            raise StrategyError("LOOP must be the last processor")
        if spec.kind == "edg":
            if has_edg:
                raise StrategyError("duplicate EDG processor")
            has_edg = True
        elif spec.kind == "uncurry":
            if has_uncurry:
                raise StrategyError("duplicate UNCURRY processor")
            if has_edg:
                raise StrategyError("UNCURRY must precede EDG")
            has_uncurry = True
        elif spec.kind == "loop":
            has_loop = True
        elif spec.kind == "order":
            if not has_edg:
                if not spec.params.monotone:
                    raise StrategyError(
                        f"order {spec.params.name} precedes EDG and must be a monotone reduction pair"
                    )
                pre.append(spec.params)
            else:
                post.append(spec.params)
        else:
            raise StrategyError(f"unknown processor kind {spec.kind}")
    return Strategy(pre, has_uncurry, has_edg, post, has_loop)


# ---------------------------------------------------------------------------
# Verdict
# ---------------------------------------------------------------------------


@dataclass
class Verdict:
    answer: str  # "YES" | "NO" | "MAYBE"
    proof: list = field(default_factory=list)
    witness: Optional[LoopWitness] = None
    removals: list = field(default_factory=list)  # (technique, scope ids, removed ids)
    certificates: list = field(default_factory=list)  # one per successful orientation
    stats: dict = field(default_factory=dict)

    def render(self) -> str:
        return "\n".join([self.answer] + [f"# {line}" for line in self.proof])


@dataclass
class Certificate:
    """Everything needed to re-check one successful order application."""

    technique: str
    order: object  # ConcreteOrder
    pairs: list
    removed: list
    usable: set
    rules: Trs
    pairs_are_rules: bool


# ---------------------------------------------------------------------------
# Solver orchestration
# ---------------------------------------------------------------------------


@dataclass
class SolverConfig:
    command: str
    timeout: float = 10.0
    transcript: Optional[str] = None
    fresh_per_check: bool = False
    nonlinear: bool = False
    loop_depth: int = 3
    loop_budget: int = 10_000
    stale_threshold: float = 1.0 / 3.0

    def logic(self) -> str:
        return "QF_NIA" if self.nonlinear else "QF_LIA"


class OrientResult:
    def __init__(self, status: str, order=None, removed=None, note: str = ""):
        self.status = status  # "sat" | "unsat" | "unknown" | "error"
        self.order = order
        self.removed = removed or []
        self.note = note


class SessionManager:
    """One live solver process shared by all techniques; switching technique
    resets and re-initializes; a high unusable-rule fraction also forces a
    reset before the next use."""

    def __init__(self, config: SolverConfig):
        self.config = config
        self.session: Optional[SolverSession] = None
        self.current_key = None
        self.stale = False
        self.totals = smt.SessionStats()
        self._last_usable: dict = {}  # technique key -> usable set of its previous check

    def reset_if_stale(self, fraction: float) -> None:
        """Mark the session for re-initialization when enough rules changed
        usability; the reset happens before the next use."""
        if fraction > self.config.stale_threshold:
            self.stale = True

    def _absorb(self) -> None:
        if self.session is None:
            return
        s, t = self.session.stats, self.totals
        t.asserts += s.asserts
        t.check_sats += s.check_sats
        t.pushes += s.pushes
        t.pops += s.pops
        t.resets += s.resets
        t.restarts += s.restarts
        t.reused_checks += s.reused_checks

    def close(self) -> None:
        self._absorb()
        if self.session is not None:
            self.session.exit()
            self.session = None

    def _fresh_session(self) -> SolverSession:
        return SolverSession(
            self.config.command,
            timeout=self.config.timeout,
            logic=self.config.logic(),
            transcript=self.config.transcript,
        )

    def _init_into(self, session: SolverSession, encoder: ReductionPairEncoder) -> None:
        for name, sort in encoder.init_decls():
            session.declare(name, sort)
        for a in encoder.init_asserts():
            session.assert_expr(a)

    def ensure(self, key, encoder: ReductionPairEncoder) -> SolverSession:
        if self.session is not None and self.session.dead:
            self._absorb()
            self.session = None
            self.totals.restarts += 1
            self.current_key = None
        if self.session is None:
            self.session = self._fresh_session()
            self.current_key = None
        if self.current_key != key or self.stale:
            if self.current_key is not None or self.stale:
                self.session.reset()
            self._init_into(self.session, encoder)
            self.current_key = key
            self.stale = False
            self._last_usable.pop(key, None)
        return self.session

    def try_orient(self, key, encoder: ReductionPairEncoder, pairs, usable: set, pairs_are_rules: bool) -> OrientResult:
        nrules = len(encoder.rules.rules)
        try:
            if self.config.fresh_per_check:
                session = self._fresh_session()
                try:
                    self._init_into(session, encoder)
                    result = self._attempt(session, encoder, pairs, usable, pairs_are_rules)
                finally:
                    st, t = session.stats, self.totals
                    t.asserts += st.asserts
                    t.check_sats += st.check_sats
                    t.pushes += st.pushes
                    t.pops += st.pops
                    t.resets += st.resets
                    t.reused_checks += st.reused_checks
                    session.exit()
            else:
                session = self.ensure(key, encoder)
                result = self._attempt(session, encoder, pairs, usable, pairs_are_rules)
                # rules that became (un)usable since the previous check of this
                # technique degrade the saved context; a large shift resets it
                previous = self._last_usable.get(key)
                if previous is not None and nrules:
                    self.reset_if_stale(len(previous ^ set(usable)) / nrules)
                self._last_usable[key] = set(usable)
        except (SolverError, smt.NonlinearError, orders.OrderEncodingError) as exc:
            return OrientResult("error", note=str(exc))
        return result

    def _attempt(self, session, encoder, pairs, usable, pairs_are_rules) -> OrientResult:
        asserts, strict_names = encoder.scc_asserts(pairs, usable, pairs_are_rules)
        session.push()
        try:
            for a in asserts:
                session.assert_expr(a)
            answer = session.check_sat()
            if answer != "sat":
                return OrientResult(answer)
            names = encoder.model_var_names() + list(strict_names.values())
            values = session.get_value(names)
        finally:
            if not session.dead:
                session.pop()
        order = decode_model(values, encoder)
        removed = [pairs[idx] for idx, name in strict_names.items() if values.get(name)]
        return OrientResult("sat", order=order, removed=removed)


# ---------------------------------------------------------------------------
# The pipeline
# ---------------------------------------------------------------------------


def _soundness_check(order, removed, pairs, rules: Trs, usable: set, pairs_are_rules: bool) -> Optional[str]:
    """Re-evaluate the decoded order: removed pairs must be strictly
    decreasing, kept pairs and usable rules weakly decreasing."""
    for p in removed:
        if not order.gt(p.lhs, p.rhs):
            return f"decoded order does not strictly orient removed pair {p}"
    if not pairs_are_rules:
        for p in pairs:
            if not order.ge(p.lhs, p.rhs):
                return f"decoded order does not weakly orient pair {p}"
    for r in rules.rules:
        if r.rid in usable and not order.ge(r.lhs, r.rhs):
            return f"decoded order does not weakly orient usable rule {r}"
    return None


class Pipeline:
    def __init__(self, specs: list[ProcessorSpec], config: SolverConfig):
        self.strategy = validate_strategy(specs)
        self.config = config

    def run(self, trs: Trs) -> Verdict:
        verdict = Verdict("MAYBE")
        manager = SessionManager(self.config)
        try:
            return self._run(trs, verdict, manager)
        finally:
            manager.close()
            verdict.stats = {
                "asserts": manager.totals.asserts,
                "check_sats": manager.totals.check_sats,
                "pushes": manager.totals.pushes,
                "pops": manager.totals.pops,
                "resets": manager.totals.resets,
                "restarts": manager.totals.restarts,
                "reused_checks": manager.totals.reused_checks,
            }

    # -- phases ---------------------------------------------------------------

    def _run(self, trs: Trs, verdict: Verdict, manager: SessionManager) -> Verdict:
        log = verdict.proof
        rules = trs

        # 1. rule removal, each processor repeated while it removes something
        for ti, params in enumerate(self.strategy.rule_removal):
            rules = self._rule_removal(rules, params, ("pre", ti), manager, verdict)

        # 2. uncurrying
        if self.strategy.has_uncurry:
            rules, plans = uncurry(rules)
            if plans:
                for plan in plans:
                    created = ", ".join(
                        f"{sym}/{sym.arity}" for (_, _), sym in sorted(plan.fresh.items(), key=lambda kv: str(kv[1]))
                    )
                    log.append(f"uncurrying: application symbol {plan.app}/{plan.app.arity}; created {created}")
            else:
                log.append("uncurrying: no application symbol detected")

        if not self.strategy.has_edg:
            if not rules.rules:
                verdict.answer = "YES"
                log.append("all rules removed; the system is terminating")
                return verdict
            return self._give_up(rules, DpProblem((), rules), None, verdict)

        # 3. dependency pairs + EDG
        pairs = dependency_pairs(rules)
        log.append(f"dependency pairs: {len(pairs)}")
        for p in pairs:
            log.append(f"  pair {p.rid}: {p}")
        if not pairs:
            verdict.answer = "YES"
            log.append("no dependency pairs; the system is terminating")
            return verdict
        graph = estimated_edg(pairs, rules)
        components = sccs(graph)
        log.append(
            f"dependency graph: {len(graph.nodes)} nodes, {len(graph.edges)} edges, "
            f"{len(components)} SCC(s)"
        )
        if not components:
            verdict.answer = "YES"
            log.append("dependency graph has no cycles; the system is terminating")
            return verdict

        # 4. SCC worklist, smallest first
        pair_by_id = {p.rid: p for p in pairs}
        encoders: dict = {}
        worklist = list(components)
        while worklist:
            worklist.sort(key=lambda c: (len(c), min(c)))
            comp = worklist.pop(0)
            solved = False
            for ti, params in enumerate(self.strategy.reduction_pairs):
                key = ("post", ti)
                if key not in encoders:
                    try:
                        encoders[key] = ReductionPairEncoder(rules, pairs, params, self.config.nonlinear)
                    except orders.OrderEncodingError as exc:
                        log.append(f"SCC {set(comp)}: {params.describe()} failed ({exc})")
                        continue
                encoder = encoders[key]
                scc_pairs = [pair_by_id[i] for i in sorted(comp)]
                usable = usable_rules(scc_pairs, rules)
                result = manager.try_orient(key, encoder, scc_pairs, usable, pairs_are_rules=False)
                if result.status != "sat":
                    note = f" ({result.note})" if result.note else ""
                    log.append(f"SCC {sorted(comp)}: {params.describe()} gives {result.status}{note}")
                    continue
                problem = _soundness_check(result.order, result.removed, scc_pairs, rules, usable, False)
                if problem or not result.removed:
                    log.append(f"SCC {sorted(comp)}: {params.describe()} rejected ({problem or 'nothing removed'})")
                    continue
                removed_ids = sorted(p.rid for p in result.removed)
                log.append(f"SCC {sorted(comp)}: {params.describe()} removes pairs {removed_ids}")
                for line in result.order.describe():
                    log.append(f"  {line}")
                verdict.removals.append((params.describe(), tuple(sorted(comp)), tuple(removed_ids)))
                verdict.certificates.append(
                    Certificate(params.describe(), result.order, scc_pairs, result.removed, usable, rules, False)
                )
                remaining = comp - set(removed_ids)
                if remaining:
                    subgraph = DependencyGraph(
                        tuple(sorted(remaining)),
                        frozenset((a, b) for a, b in graph.edges if a in remaining and b in remaining),
                    )
                    worklist.extend(sccs(subgraph))
                solved = True
                break
            if not solved:
                return self._give_up(rules, DpProblem(tuple(pair_by_id[i] for i in sorted(comp)), rules), comp, verdict)
        verdict.answer = "YES"
        log.append("all SCCs eliminated; the system is terminating")
        return verdict

    def _rule_removal(self, rules: Trs, params: OrderParams, key, manager: SessionManager, verdict: Verdict) -> Trs:
        if not rules.rules:
            return rules
        try:
            encoder = ReductionPairEncoder(rules, [], params, self.config.nonlinear)
        except orders.OrderEncodingError as exc:
            verdict.proof.append(f"rule removal {params.describe()} failed ({exc})")
            return rules
        alive = list(rules.rules)
        passes = 0
        while alive:
            passes += 1
            alive_ids = {r.rid for r in alive}
            result = manager.try_orient(key, encoder, alive, alive_ids, pairs_are_rules=True)
            if result.status != "sat":
                note = f" ({result.note})" if result.note else ""
                verdict.proof.append(
                    f"rule removal {params.describe()}: {result.status}{note} (pass {passes})"
                )
                break
            problem = _soundness_check(result.order, result.removed, alive, rules, alive_ids, True)
            if problem or not result.removed:
                verdict.proof.append(f"rule removal {params.describe()} rejected ({problem or 'nothing removed'})")
                break
            removed_ids = sorted(r.rid for r in result.removed)
            verdict.proof.append(
                f"rule removal {params.describe()} removes rules {removed_ids} (pass {passes})"
            )
            for line in result.order.describe():
                verdict.proof.append(f"  {line}")
            verdict.removals.append((params.describe(), tuple(sorted(alive_ids)), tuple(removed_ids)))
            verdict.certificates.append(
                Certificate(params.describe(), result.order, list(alive), result.removed, alive_ids, rules, True)
            )
            alive = [r for r in alive if r.rid not in removed_ids]
        if len(alive) == len(rules.rules):
            return rules
        return Trs.make(Rule(r.lhs, r.rhs, i) for i, r in enumerate(alive))

    def _give_up(self, rules: Trs, problem: DpProblem, comp, verdict: Verdict) -> Verdict:
        log = verdict.proof
        where = f"SCC {sorted(comp)}" if comp else "remaining system"
        if self.strategy.has_loop:
            log.append(f"{where}: no processor applies; searching for a loop")
            witness = find_loop(problem, depth=self.config.loop_depth, budget=self.config.loop_budget)
            if witness is not None:
                verdict.answer = "NO"
                verdict.witness = witness
                log.append("loop found:")
                for line in witness.render():
                    log.append(f"  {line}")
                return verdict
            log.append(f"no loop found within depth {self.config.loop_depth}")
        else:
            log.append(f"{where}: no processor applies")
        verdict.answer = "MAYBE"
        return verdict


def run_pipeline(trs: Trs, specs: list[ProcessorSpec], config: SolverConfig) -> Verdict:
    return Pipeline(specs, config).run(trs)

"""The uncurrying transformation.

Detects an application symbol (defined, never applied to a variable in a
left-hand side, applied to a non-variable somewhere in a right-hand side),
computes applicative arities, and rewrites the system with the uncurrying
rules

    f(f^l g(x1..xm), y1..yn)  ->  f^{l+1} g(x1..xm, y1..yn)

appending those rules to the result.  Detection repeats until no symbol
qualifies; each application symbol is handled once.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .terms import (
    App,
    Rule,
    Symbol,
    Term,
    Trs,
    UNCURRIED,
    Var,
    apply_substitution,
    defined_symbols,
    match,
    subterms,
)


@dataclass(frozen=True)
class UncurryPlan:
    app: Symbol
    arities: tuple  # sorted tuple of (Symbol, applicative arity)
    fresh: dict  # (Symbol, level >= 1) -> created Symbol


def _occurrences(sym: Symbol, trs: Trs) -> int:
    count = 0
    for r in trs.rules:
        for t in (r.lhs, r.rhs):
            count += sum(1 for _, u in subterms(t) if isinstance(u, App) and u.sym == sym)
    return count


def detect_application_symbol(trs: Trs, exclude: frozenset = frozenset()) -> Optional[Symbol]:
    """An application symbol is defined with positive arity, never has a
    variable first argument in a left-hand side, and has a non-variable first
    argument somewhere in a right-hand side.  Ties go to the most frequent
    symbol, then the smallest name."""
    defined = defined_symbols(trs)
    candidates = []
    for sym in trs.signature.values():
        if sym in exclude or sym.arity < 1 or sym not in defined:
            continue
        bad_lhs = any(
            isinstance(u, App) and u.sym == sym and isinstance(u.args[0], Var)
            for r in trs.rules
            for _, u in subterms(r.lhs)
        )
        if bad_lhs:
            continue
        applied = any(
            isinstance(u, App) and u.sym == sym and isinstance(u.args[0], App)
            for r in trs.rules
            for _, u in subterms(r.rhs)
        )
        if applied:
            candidates.append(sym)
    if not candidates:
        return None
    candidates.sort(key=lambda s: (-_occurrences(s, trs), s.name))
    return candidates[0]


def _spine_length(t: Term, f: Symbol, g: Symbol) -> Optional[int]:
    """Number of nested f-applications if t is an f-spine headed by g."""
    depth = 0
    while isinstance(t, App) and t.sym == f:
        depth += 1
        t = t.args[0]
    if isinstance(t, App) and t.sym == g:
        return depth
    return None


def applicative_arity(g: Symbol, f: Symbol, trs: Trs) -> int:
    """How many application layers of g get uncurried.

    The maximum f-spine length headed by g over right-hand sides and proper
    left-hand-side subterms, capped by the shortest spine length at which g
    heads a whole left-hand side (so no uncurrying rule hides a redex and
    eta-saturation stays unnecessary).  A spine that only ever occurs as a
    whole left-hand side gains nothing from uncurrying (the rewrite would
    merely rename that rule), so it does not count.  Symbols of positive
    arity occur directly applied and are never treated as curried heads.
    """
    if g == f or g.arity >= 1:
        return 0
    max_spine = 0
    lhs_cap: Optional[int] = None
    for r in trs.rules:
        root = _spine_length(r.lhs, f, g)
        if root is not None:
            lhs_cap = root if lhs_cap is None else min(lhs_cap, root)
        for pos, u in subterms(r.lhs):
            if pos == ():
                continue
            depth = _spine_length(u, f, g)
            if depth is not None:
                max_spine = max(max_spine, depth)
        for _, u in subterms(r.rhs):
            depth = _spine_length(u, f, g)
            if depth is not None:
                max_spine = max(max_spine, depth)
    if lhs_cap is not None:
        return min(max_spine, lhs_cap)
    return max_spine


def _count_app(t: Term, f: Symbol) -> int:
    return sum(1 for _, u in subterms(t) if isinstance(u, App) and u.sym == f)


def _normalize(t: Term, urules: list[Rule], f: Symbol) -> Term:
    if isinstance(t, Var):
        return t
    out = App(t.sym, tuple(_normalize(a, urules, f) for a in t.args))
    for rule in urules:
        sigma = match(rule.lhs, out)
        if sigma is not None:
            result = apply_substitution(rule.rhs, sigma)
            assert _count_app(result, f) < _count_app(out, f), "uncurrying step must shrink the spine count"
            return _normalize(result, urules, f)
    return out


def _uncurry_round(trs: Trs, app: Symbol) -> Optional[tuple[Trs, UncurryPlan]]:
    arities = {}
    for sym in trs.signature.values():
        aa = applicative_arity(sym, app, trs)
        if aa > 0:
            arities[sym] = aa
    if not arities:
        return None
    taken = set(trs.signature)
    fresh: dict = {}
    for g in sorted(arities, key=str):
        for level in range(1, arities[g] + 1):
            name = f"{app.name}_{level}_{g.name}"
            while name in taken:
                name += "'"
            taken.add(name)
            arity = g.arity + level * (app.arity - 1)
            fresh[(g, level)] = Symbol(name, arity, UNCURRIED, base=g.name, level=level)

    def curried(g: Symbol, level: int) -> Symbol:
        return g if level == 0 else fresh[(g, level)]

    urules: list[Rule] = []
    for g in sorted(arities, key=str):
        for level in range(arities[g]):
            inner = curried(g, level)
            xs = tuple(Var(f"x{i}") for i in range(inner.arity))
            ys = tuple(Var(f"y{i}") for i in range(app.arity - 1))
            lhs = App(app, (App(inner, xs),) + ys)
            rhs = App(curried(g, level + 1), xs + ys)
            urules.append(Rule(lhs, rhs, len(urules)))

    transformed = [
        Rule(_normalize(r.lhs, urules, app), _normalize(r.rhs, urules, app), i)
        for i, r in enumerate(trs.rules)
    ]
    offset = len(transformed)
    appended = [Rule(r.lhs, r.rhs, offset + i) for i, r in enumerate(urules)]
    plan = UncurryPlan(app, tuple(sorted(arities.items(), key=lambda kv: str(kv[0]))), fresh)
    return Trs.make(transformed + appended), plan


def uncurry(trs: Trs) -> tuple[Trs, list[UncurryPlan]]:
    """Uncurry until no application symbol qualifies; an empty plan list means
    the system came back unchanged."""
    plans: list[UncurryPlan] = []
    processed: set = set()
    current = trs
    while True:
        app = detect_application_symbol(current, frozenset(processed))
        if app is None:
            return current, plans
        processed.add(app)
        result = _uncurry_round(current, app)
        if result is None:
            continue
        current, plan = result
        plans.append(plan)

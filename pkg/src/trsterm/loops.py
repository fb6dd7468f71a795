"""Naive bounded loop detection.

Two searches, both bounded by a depth and a node budget:

* forward rewriting on the rules, starting from each left-hand side, looking
  for a reached term that contains an instance of the start;
* forward narrowing on pairs-plus-rules, seeded by each dependency pair.

Every candidate is verified by replaying its steps with plain rewriting
before it is reported, so a returned witness is always a real loop and the
resulting NO verdict cannot be wrong.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .terms import (
    App,
    Position,
    Rule,
    Substitution,
    Term,
    Trs,
    Var,
    apply_substitution,
    match,
    rewrite_steps,
    subterm_at,
    subterms,
    unify,
    variables,
)


@dataclass
class LoopWitness:
    start: Term
    steps: list  # (rule id, position)
    final: Term
    match_pos: Position
    sub: Substitution
    system: Trs  # the rules the step ids refer to

    def render(self) -> list[str]:
        out = [str(self.start)]
        t = self.start
        for rid, pos in self.steps:
            t = _apply_step(t, self.system, rid, pos)
            where = "at the root" if not pos else f"at position {'.'.join(map(str, pos))}"
            out.append(f"-> {t}   (rule {self.system.rule_by_id(rid)} {where})")
        out.append(
            f"the final term contains the start instance {apply_substitution(self.start, self.sub)}"
            + (f" at position {'.'.join(map(str, self.match_pos))}" if self.match_pos else " at the root")
        )
        return out


def _apply_step(t: Term, trs: Trs, rid: int, pos: Position) -> Term:
    for r, p, result in rewrite_steps(t, trs):
        if r == rid and p == pos:
            return result
    raise ValueError(f"step (rule {rid}, position {pos}) does not apply to {t}")


def replay(witness: LoopWitness) -> bool:
    """Re-run the witness with plain rewriting and re-check the embedding."""
    try:
        t = witness.start
        for rid, pos in witness.steps:
            t = _apply_step(t, witness.system, rid, pos)
    except ValueError:
        return False
    if t != witness.final:
        return False
    sub = match(witness.start, subterm_at(t, witness.match_pos))
    return sub is not None


def _embedding(start: Term, reached: Term) -> Optional[tuple[Position, Substitution]]:
    for pos, sub in subterms(reached):
        sigma = match(start, sub)
        if sigma is not None:
            return pos, sigma
    return None


def _combined(problem) -> Trs:
    rules = [Rule(r.lhs, r.rhs, i) for i, r in enumerate(problem.pairs)]
    off = len(rules)
    rules.extend(Rule(r.lhs, r.rhs, off + i) for i, r in enumerate(problem.rules.rules))
    return Trs.make(rules)


def _forward_rewrite_search(system: Trs, starts, depth: int, budget: list) -> Optional[LoopWitness]:
    for start in starts:
        frontier = [(start, [])]
        for _ in range(depth):
            nxt = []
            for term, steps in frontier:
                if budget[0] <= 0:
                    return None
                for rid, pos, result in rewrite_steps(term, system):
                    budget[0] -= 1
                    trail = steps + [(rid, pos)]
                    hit = _embedding(start, result)
                    if hit is not None:
                        witness = LoopWitness(start, trail, result, hit[0], hit[1], system)
                        if replay(witness):
                            return witness
                    nxt.append((result, trail))
                    if budget[0] <= 0:
                        break
            frontier = nxt
    return None


def _narrowing_search(pairs, system: Trs, depth: int, budget: list) -> Optional[LoopWitness]:
    for pid, pair in enumerate(pairs):
        # seed: the pair applied at the root
        frontier = [(pair.lhs, pair.rhs, [(pid, ())])]
        hit = _embedding(pair.lhs, pair.rhs)
        if hit is not None:
            witness = LoopWitness(pair.lhs, [(pid, ())], pair.rhs, hit[0], hit[1], system)
            if replay(witness):
                return witness
        for level in range(depth - 1):
            nxt = []
            for start, current, steps in frontier:
                if budget[0] <= 0:
                    return None
                for pos, sub in subterms(current):
                    if isinstance(sub, Var):
                        continue
                    for rule in system.rules:
                        budget[0] -= 1
                        if budget[0] <= 0:
                            return None
                        fresh = rule.renamed(f"_n{level}_{rule.rid}")
                        sigma = unify(sub, fresh.lhs)
                        if sigma is None:
                            continue
                        new_start = apply_substitution(start, sigma)
                        new_current = apply_substitution(
                            _replace(current, pos, fresh.rhs), sigma
                        )
                        trail = steps + [(rule.rid, pos)]
                        hit = _embedding(new_start, new_current)
                        if hit is not None:
                            witness = LoopWitness(new_start, trail, new_current, hit[0], hit[1], system)
                            if replay(witness):
                                return witness
                        nxt.append((new_start, new_current, trail))
            frontier = nxt
    return None


def _replace(t: Term, pos: Position, s: Term) -> Term:
    if not pos:
        return s
    args = list(t.args)
    args[pos[0]] = _replace(args[pos[0]], pos[1:], s)
    return App(t.sym, tuple(args))


def find_loop(problem, depth: int = 3, budget: int = 10_000) -> Optional[LoopWitness]:
    """Bounded loop search on a dependency-pair problem.

    Searches plain rewrite loops on the rules first (their witnesses read
    directly as rewrite sequences), then narrowing chains seeded by the
    pairs over pairs-plus-rules.
    """
    remaining = [budget]
    starts = [r.lhs for r in problem.rules.rules]
    witness = _forward_rewrite_search(problem.rules, starts, depth, remaining)
    if witness is not None:
        return witness
    if problem.pairs:
        combined = _combined(problem)
        seeds = [combined.rules[i] for i in range(len(problem.pairs))]
        witness = _narrowing_search(seeds, combined, depth, remaining)
        if witness is not None:
            return witness
    return None

"""A small SMT-LIB 2.0 solver for QF_LIA, usable as a subprocess.

Reads SMT-LIB 2.0 commands on standard input and answers on standard output:
set-option/set-logic/declare-fun/declare-const/define-fun/assert/push/pop/
reset/check-sat/get-value/echo/exit.  Intended as a stand-in backend when no
external solver is installed; it is complete for the fragment the encoders in
this package emit (boolean structure over linear integer comparisons where
every integer variable is bounded by asserted range constraints).

Architecture: assertions are Tseitin-translated to CNF over boolean variables
and linear-comparison atoms; a CDCL SAT core enumerates assignments; a
bounds-propagating branch-and-bound checker decides the conjunction of atom
literals, returning either an integer model or a conflict core that becomes a
blocking clause.

Run with:  python -m trsterm.minismt
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from heapq import heapify, heappop, heappush
from math import gcd


class SmtInputError(Exception):
    pass


# ---------------------------------------------------------------------------
# S-expression reading
# ---------------------------------------------------------------------------


def tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            yield c
            i += 1
        elif c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            yield text[i : j + 1]
            i = j + 1
        elif c == "|":
            j = i + 1
            while j < n and text[j] != "|":
                j += 1
            yield text[i : j + 1]
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();\"|":
                j += 1
            yield text[i:j]
            i = j


class SexprReader:
    """Incremental reader: feed lines, pop complete top-level s-expressions."""

    def __init__(self):
        self.tokens: list[str] = []
        self.depth = 0

    def feed(self, line: str) -> list:
        out = []
        for tok in tokenize(line):
            self.tokens.append(tok)
            if tok == "(":
                self.depth += 1
            elif tok == ")":
                self.depth -= 1
                if self.depth < 0:
                    self.tokens.clear()
                    self.depth = 0
                    raise SmtInputError("unbalanced ')'")
            if self.depth == 0:
                out.append(self._take())
        return out

    def _take(self):
        toks = self.tokens
        self.tokens = []
        pos = 0

        def read():
            nonlocal pos
            tok = toks[pos]
            pos += 1
            if tok == "(":
                items = []
                while toks[pos] != ")":
                    items.append(read())
                pos += 1
                return items
            return tok

        return read()


# ---------------------------------------------------------------------------
# Internal term graph
# ---------------------------------------------------------------------------


class Node:
    __slots__ = ("op", "args", "val", "sort")

    def __init__(self, op, args=(), val=None, sort="Int"):
        self.op = op
        self.args = args
        self.val = val
        self.sort = sort


def _num(tok: str):
    try:
        return int(tok)
    except ValueError:
        return None


class Env:
    """Declarations and macro definitions, with push/pop framing."""

    def __init__(self):
        self.frames = [{}]

    def push(self):
        self.frames.append({})

    def pop(self):
        self.frames.pop()

    def define(self, name, entry):
        self.frames[-1][name] = entry

    def lookup(self, name):
        for frame in reversed(self.frames):
            if name in frame:
                return frame[name]
        return None


_BOOL_CONN = {"and", "or", "not", "=>", "xor"}
_CMP = {">", ">=", "<", "<=", "="}


def build(sx, env: Env, cache: dict) -> Node:
    """Convert a parsed s-expression to a Node; define-fun names resolve to
    their (shared) definition nodes so structure sharing survives."""
    key = id(sx)
    if isinstance(sx, str):
        v = _num(sx)
        if v is not None:
            return Node("int", val=v)
        if sx == "true":
            return Node("bool", val=True, sort="Bool")
        if sx == "false":
            return Node("bool", val=False, sort="Bool")
        entry = env.lookup(sx)
        if entry is None:
            raise SmtInputError(f"unknown identifier {sx}")
        kind, payload = entry
        if kind == "var":
            return payload
        return payload  # macro: the definition node itself
    if key in cache:
        return cache[key]
    head, rest = sx[0], sx[1:]
    if head == "-" and len(rest) == 1:
        a = build(rest[0], env, cache)
        if a.op == "int":
            node = Node("int", val=-a.val)
        else:
            node = Node("-", (Node("int", val=0), a))
    elif head in ("+", "*"):
        kids = [build(r, env, cache) for r in rest]
        node = kids[0]
        for k in kids[1:]:
            node = Node(head, (node, k))
    elif head == "-":
        kids = [build(r, env, cache) for r in rest]
        node = kids[0]
        for k in kids[1:]:
            node = Node("-", (node, k))
    elif head in _CMP:
        kids = tuple(build(r, env, cache) for r in rest)
        if len(kids) != 2:
            raise SmtInputError(f"{head} expects 2 arguments")
        node = Node(head, kids, sort="Bool")
    elif head in _BOOL_CONN:
        kids = tuple(build(r, env, cache) for r in rest)
        node = Node(head, kids, sort="Bool")
    elif head == "ite":
        c, t, e = (build(r, env, cache) for r in rest)
        node = Node("ite", (c, t, e), sort=t.sort)
    elif head == "let":
        bindings, body = rest
        env.push()
        try:
            for name, bsx in bindings:
                env.define(name, ("macro", build(bsx, env, cache)))
            node = build(body, env, cache)
        finally:
            env.pop()
    else:
        raise SmtInputError(f"unsupported operator {head}")
    cache[key] = node
    return node


# ---------------------------------------------------------------------------
# Linear forms and atoms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lin:
    coeffs: tuple  # sorted tuple of (var_index, coeff)
    const: int

    def scale(self, k: int) -> "Lin":
        return Lin(tuple((v, c * k) for v, c in self.coeffs), self.const * k)

    def plus(self, other: "Lin") -> "Lin":
        d = dict(self.coeffs)
        for v, c in other.coeffs:
            d[v] = d.get(v, 0) + c
        return Lin(tuple(sorted((v, c) for v, c in d.items() if c)), self.const + other.const)


def lin_const(k: int) -> Lin:
    return Lin((), k)


class Unsupported(Exception):
    pass


# ---------------------------------------------------------------------------
# CDCL SAT core (incremental clause addition, deterministic)
# ---------------------------------------------------------------------------


class Sat:
    def __init__(self):
        self.nvars = 0
        self.clauses: list[list[int]] = []
        self.watches: dict[int, list[int]] = {}
        self.assign: list[int] = [0]  # 1-indexed: 0 unassigned, 1 true, -1 false
        self.level: list[int] = [0]
        self.reason: list[int] = [-1]
        self.trail: list[int] = []
        self.lim: list[int] = []
        self.activity: list[float] = [0.0]
        self.phase: list[int] = [0]
        self.var_inc = 1.0
        self.heap: list[tuple[float, int]] = []  # (-activity, var), lazy deletion
        self.qhead = 0

    def new_var(self) -> int:
        self.nvars += 1
        self.assign.append(0)
        self.level.append(0)
        self.reason.append(-1)
        self.activity.append(0.0)
        self.phase.append(-1)
        heappush(self.heap, (0.0, self.nvars))
        return self.nvars

    def add_clause(self, lits: list[int]) -> bool:
        """Add a clause; returns False if the instance is trivially unsat."""
        lits = sorted(set(lits), key=abs)
        if any(-l in lits for l in lits):
            return True
        self.backtrack(0)
        lits = [l for l in lits if self.value(l) != -1 or self.level[abs(l)] > 0]
        if not lits:
            return False
        if len(lits) == 1:
            l = lits[0]
            v = self.value(l)
            if v == -1:
                return False
            if v == 0:
                self.enqueue(l, -1)
            return self.propagate() == -1
        idx = len(self.clauses)
        self.clauses.append(lits)
        self.watches.setdefault(lits[0], []).append(idx)
        self.watches.setdefault(lits[1], []).append(idx)
        return True

    def value(self, lit: int) -> int:
        v = self.assign[abs(lit)]
        return v if lit > 0 else -v

    def enqueue(self, lit: int, reason: int) -> None:
        var = abs(lit)
        self.assign[var] = 1 if lit > 0 else -1
        self.level[var] = len(self.lim)
        self.reason[var] = reason
        self.trail.append(lit)

    def propagate(self) -> int:
        """Returns conflicting clause index or -1."""
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            falsified = -lit
            watching = self.watches.get(falsified, [])
            j = 0
            while j < len(watching):
                cidx = watching[j]
                clause = self.clauses[cidx]
                # make sure falsified is at position 1
                if clause[0] == falsified:
                    clause[0], clause[1] = clause[1], clause[0]
                if self.value(clause[0]) == 1:
                    j += 1
                    continue
                for k in range(2, len(clause)):
                    if self.value(clause[k]) != -1:
                        clause[1], clause[k] = clause[k], clause[1]
                        self.watches.setdefault(clause[1], []).append(cidx)
                        watching[j] = watching[-1]
                        watching.pop()
                        break
                else:
                    if self.value(clause[0]) == -1:
                        return cidx
                    self.enqueue(clause[0], cidx)
                    j += 1
        return -1

    def bump(self, var: int) -> None:
        self.activity[var] += self.var_inc
        if self.activity[var] > 1e100:
            for v in range(1, self.nvars + 1):
                self.activity[v] *= 1e-100
            self.var_inc *= 1e-100
            self.heap = [(-self.activity[v], v) for v in range(1, self.nvars + 1) if self.assign[v] == 0]
            heapify(self.heap)
        else:
            heappush(self.heap, (-self.activity[var], var))

    def analyze(self, conflict: int) -> tuple[list[int], int]:
        learnt = []
        seen = [False] * (self.nvars + 1)
        counter = 0
        lit = 0
        idx = len(self.trail) - 1
        clause = self.clauses[conflict]
        while True:
            for l in clause:
                var = abs(l)
                if not seen[var] and self.level[var] > 0 and (lit == 0 or l != lit):
                    seen[var] = True
                    self.bump(var)
                    if self.level[var] == len(self.lim):
                        counter += 1
                    else:
                        learnt.append(l)
            while not seen[abs(self.trail[idx])]:
                idx -= 1
            lit = self.trail[idx]
            seen[abs(lit)] = False
            idx -= 1
            counter -= 1
            if counter == 0:
                break
            clause = self.clauses[self.reason[abs(lit)]]
        learnt.insert(0, -lit)
        if len(learnt) == 1:
            return learnt, 0
        # watch position 1 must hold the highest-level literal
        k = max(range(1, len(learnt)), key=lambda i: self.level[abs(learnt[i])])
        learnt[1], learnt[k] = learnt[k], learnt[1]
        bt = self.level[abs(learnt[1])]
        return learnt, bt

    def backtrack(self, level: int) -> None:
        while self.lim and len(self.lim) > level:
            limit = self.lim.pop()
            while len(self.trail) > limit:
                lit = self.trail.pop()
                var = abs(lit)
                self.phase[var] = 1 if lit > 0 else -1
                self.assign[var] = 0
                heappush(self.heap, (-self.activity[var], var))
        self.qhead = min(self.qhead, len(self.trail))

    def solve(self, deadline: float | None = None) -> bool:
        if self.propagate() != -1:
            return False
        conflicts_budget = 128
        since_check = 0
        while True:
            since_check += 1
            if deadline is not None and since_check >= 256:
                since_check = 0
                if time.monotonic() > deadline:
                    raise SatTimeout()
            conflict = self.propagate()
            if conflict != -1:
                if not self.lim:
                    return False
                learnt, bt = self.analyze(conflict)
                self.backtrack(bt)
                self.var_inc *= 1.05
                if len(learnt) == 1:
                    if self.value(learnt[0]) == -1:
                        return False
                    if self.value(learnt[0]) == 0:
                        self.enqueue(learnt[0], -1)
                else:
                    idx = len(self.clauses)
                    self.clauses.append(learnt)
                    self.watches.setdefault(learnt[0], []).append(idx)
                    self.watches.setdefault(learnt[1], []).append(idx)
                    self.enqueue(learnt[0], idx)
                conflicts_budget -= 1
                if conflicts_budget <= 0:
                    conflicts_budget = 128
                    self.backtrack(0)
                continue
            # decide: highest activity from the lazy heap
            best = 0
            while self.heap:
                _, v = heappop(self.heap)
                if self.assign[v] == 0:
                    best = v
                    break
            if best == 0:
                if all(self.assign[v] != 0 for v in range(1, self.nvars + 1)):
                    return True
                self.heap = [(-self.activity[v], v) for v in range(1, self.nvars + 1) if self.assign[v] == 0]
                heapify(self.heap)
                continue
            self.lim.append(len(self.trail))
            self.enqueue(best if self.phase[best] == 1 else -best, -1)

    def model(self) -> list[int]:
        return list(self.assign)


# ---------------------------------------------------------------------------
# Theory: conjunctions of linear constraints over bounded ints
# ---------------------------------------------------------------------------

INF = None  # open bound


def ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def floor_div(a: int, b: int) -> int:
    return a // b


class TheoryUnknown(Exception):
    pass


class SatTimeout(Exception):
    pass


class LinChecker:
    """Feasibility of { Σ c·x + k >= 0 } over integers via bounds propagation
    with reason tracking, then branch and bound over finite ranges."""

    def __init__(
        self,
        constraints: list[Lin],
        budget: int = 400_000,
        minimize: bool = True,
        deadline: float | None = None,
    ):
        self.cons = constraints
        self.budget = budget
        self.minimize = minimize
        self.deadline = deadline
        self.occ: dict[int, list[int]] = {}
        for i, c in enumerate(constraints):
            for v, _ in c.coeffs:
                self.occ.setdefault(v, []).append(i)
        self.lo: dict[int, int | None] = {v: INF for v in self.occ}
        self.hi: dict[int, int | None] = {v: INF for v in self.occ}
        # reason[(v, side)] = (constraint index, premises) for the current bound
        self.reason: dict = {}
        self.trail: list = []
        # constraints explaining why the exhaustive search failed
        self.acc: set[int] = set()

    # -- bounds ------------------------------------------------------------

    def _set(self, v: int, side: str, val: int, reason) -> bool:
        cur = self.lo[v] if side == "lo" else self.hi[v]
        if cur is not None and (val <= cur if side == "lo" else val >= cur):
            return False
        self.trail.append((v, side, cur, self.reason.get((v, side))))
        if side == "lo":
            self.lo[v] = val
        else:
            self.hi[v] = val
        self.reason[(v, side)] = reason
        return True

    def _undo_to(self, mark: int) -> None:
        while len(self.trail) > mark:
            v, side, old, old_reason = self.trail.pop()
            if side == "lo":
                self.lo[v] = old
            else:
                self.hi[v] = old
            self.reason[(v, side)] = old_reason

    def propagate(self, queue: list[int]) -> int | None:
        """Fixpoint; returns a conflicting constraint index or None."""
        pending = list(dict.fromkeys(queue))
        in_queue = set(pending)
        rounds = 0
        while pending:
            rounds += 1
            self.budget -= 1
            if self.budget <= 0 or rounds > 50_000:
                raise TheoryUnknown()
            if rounds % 2048 == 0 and self.deadline is not None and time.monotonic() > self.deadline:
                raise TheoryUnknown()
            ci = pending.pop(0)
            in_queue.discard(ci)
            con = self.cons[ci]
            # residual upper bounds of the other addends
            for v, c in con.coeffs:
                rest = con.const
                ok = True
                premises = []
                for w, d in con.coeffs:
                    if w == v:
                        continue
                    if d > 0:
                        b = self.hi[w]
                        side = "hi"
                    else:
                        b = self.lo[w]
                        side = "lo"
                    if b is INF:
                        ok = False
                        break
                    rest += d * b
                    premises.append((w, side))
                if not ok:
                    continue
                # c*v >= -rest
                if c > 0:
                    newb = ceil_div(-rest, c)
                    changed = self._set(v, "lo", newb, (ci, premises))
                else:
                    newb = floor_div(-rest, c)
                    changed = self._set(v, "hi", newb, (ci, premises))
                if changed:
                    lo, hi = self.lo[v], self.hi[v]
                    if lo is not INF and hi is not INF and lo > hi:
                        return ci
                    for cj in self.occ.get(v, ()):
                        if cj not in in_queue:
                            pending.append(cj)
                            in_queue.add(cj)
        return None

    def _core_from(self, conflict_ci: int) -> set[int]:
        core = {conflict_ci}
        seen = set()
        work = []
        for v, _ in self.cons[conflict_ci].coeffs:
            work.append((v, "lo"))
            work.append((v, "hi"))
        return self._walk_reasons(core, work, seen)

    def _bound_reasons(self, v: int) -> set[int]:
        return self._walk_reasons(set(), [(v, "lo"), (v, "hi")], set())

    def _walk_reasons(self, core: set, work: list, seen: set) -> set:
        while work:
            key = work.pop()
            if key in seen:
                continue
            seen.add(key)
            r = self.reason.get(key)
            if r is None:
                continue
            ci, premises = r
            if ci is not None:
                core.add(ci)
            work.extend(premises)
        return core

    def _eval_feasible(self) -> bool:
        for ci, con in enumerate(self.cons):
            total = con.const
            for v, c in con.coeffs:
                total += c * self.lo[v]
            if total < 0:
                self.acc |= self._core_from(ci)
                return False
        return True

    def solve(self) -> tuple[dict | None, set[int] | None]:
        """Return (model, None) or (None, conflict core)."""
        try:
            conflict = self.propagate(list(range(len(self.cons))))
        except TheoryUnknown:
            raise
        if conflict is not None:
            return None, self._core_from(conflict)
        result = self._search()
        if result:
            model = {v: self.lo[v] for v in self.occ}
            return model, None
        # exhausted: the accumulated leaf conflicts plus the bound reasons of
        # the branched variables explain the failure
        core = self.acc if self.acc else set(range(len(self.cons)))
        return None, (self._minimize(core) if self.minimize else core)

    def _search(self) -> bool:
        self.budget -= 1
        if self.budget <= 0:
            raise TheoryUnknown()
        # pick the tightest unfixed variable
        best_v, best_range = None, None
        for v in self.occ:
            lo, hi = self.lo[v], self.hi[v]
            if lo is INF or hi is INF:
                # clamp open domains; encoders always assert ranges so this
                # only triggers on exotic hand-written input
                lo = -(1 << 16) if lo is INF else lo
                hi = (1 << 16) if hi is INF else hi
                self._set(v, "lo", lo, (None, []))
                self._set(v, "hi", hi, (None, []))
            if lo < hi and (best_range is None or hi - lo < best_range):
                best_v, best_range = v, hi - lo
        if best_v is None:
            return self._eval_feasible()
        v = best_v
        self.acc |= self._bound_reasons(v)
        for val in range(self.lo[v], self.hi[v] + 1):
            mark = len(self.trail)
            self._set(v, "lo", val, (None, []))
            self._set(v, "hi", val, (None, []))
            try:
                conflict = self.propagate(list(self.occ.get(v, ())))
            except TheoryUnknown:
                self._undo_to(mark)
                raise
            if conflict is not None:
                self.acc |= self._core_from(conflict)
            elif self._search():
                return True
            self._undo_to(mark)
        return False

    def _minimize(self, core: set[int]) -> set[int]:
        if len(core) > 48:
            return core
        kept = sorted(core)
        i = 0
        while i < len(kept):
            trial = kept[:i] + kept[i + 1 :]
            sub = LinChecker([self.cons[j] for j in trial], budget=20_000, minimize=False)
            try:
                model, _ = sub.solve()
            except TheoryUnknown:
                i += 1
                continue
            if model is None:
                kept = trial
            else:
                i += 1
        return set(kept)


# ---------------------------------------------------------------------------
# Solver session: frames, conversion, check-sat driver
# ---------------------------------------------------------------------------


class Frame:
    def __init__(self):
        self.assertions: list[Node] = []


class MiniSmt:
    def __init__(self, check_seconds: float | None = None):
        self.env = Env()
        self.frames = [Frame()]
        self.print_success = False
        self.logic = None
        self.check_seconds = check_seconds
        # conversion state (rebuilt on pop/reset)
        self._reset_conversion()
        self.model_bool: dict[int, bool] = {}
        self.model_int: dict[int, int] = {}
        self.have_model = False

    def _reset_conversion(self):
        self.sat_of_node: dict = {}
        self.atom_var: dict = {}
        self.atom_by_var: dict[int, Lin] = {}
        self.atom_groups: dict = {}  # coeffs -> sorted list of (const, satvar)
        self.intvar_index: dict[str, int] = {}
        self.intvar_names: list[str] = []
        self.ite_aux: dict[int, int] = {}
        self.converted_upto = [0 for _ in self.frames]
        self.true_var: int | None = None
        self.sat = Sat()
        self.unsat_flag = False

    # -- command dispatch ----------------------------------------------------

    def execute(self, sx) -> str | None:
        if not isinstance(sx, list) or not sx:
            raise SmtInputError("expected a command")
        cmd = sx[0]
        if cmd == "set-option":
            if len(sx) >= 3 and sx[1] == ":print-success":
                self.print_success = sx[2] == "true"
                return "success"
            return self._ok()
        if cmd in ("set-info", "set-logic"):
            if cmd == "set-logic":
                self.logic = sx[1]
            return self._ok()
        if cmd in ("declare-fun", "declare-const"):
            name = sx[1]
            sort = sx[3] if cmd == "declare-fun" else sx[2]
            if cmd == "declare-fun" and sx[2] != []:
                raise SmtInputError("only 0-ary declare-fun supported")
            if sort not in ("Int", "Bool"):
                raise SmtInputError(f"unsupported sort {sort}")
            self.env.define(name, ("var", Node("var", val=name, sort=sort)))
            return self._ok()
        if cmd == "define-fun":
            name, params, sort, body = sx[1], sx[2], sx[3], sx[4]
            if params != []:
                raise SmtInputError("only 0-ary define-fun supported")
            node = build(body, self.env, {})
            self.env.define(name, ("macro", node))
            return self._ok()
        if cmd == "assert":
            node = build(sx[1], self.env, {})
            self.frames[-1].assertions.append(node)
            return self._ok()
        if cmd == "push":
            n = int(sx[1]) if len(sx) > 1 else 1
            for _ in range(n):
                self.env.push()
                self.frames.append(Frame())
                self.converted_upto.append(0)
            return self._ok()
        if cmd == "pop":
            n = int(sx[1]) if len(sx) > 1 else 1
            if n >= len(self.frames):
                raise SmtInputError("pop below base frame")
            for _ in range(n):
                self.env.pop()
                self.frames.pop()
            self._reset_conversion()
            return self._ok()
        if cmd == "reset":
            self.__init__(self.check_seconds)
            return self._ok()
        if cmd == "check-sat":
            return self.check_sat()
        if cmd == "get-value":
            return self.get_value(sx[1])
        if cmd == "echo":
            return sx[1].strip('"')
        if cmd == "exit":
            return None
        if cmd == "get-model":
            return "(model )"
        raise SmtInputError(f"unsupported command {cmd}")

    def _ok(self):
        return "success" if self.print_success else ""

    # -- conversion ----------------------------------------------------------

    def _true_lit(self) -> int:
        if self.true_var is None:
            self.true_var = self.sat.new_var()
            self._add_clause([self.true_var])
        return self.true_var

    def _add_clause(self, lits: list[int]) -> None:
        if not self.sat.add_clause(list(lits)):
            self.unsat_flag = True

    def _intvar(self, name: str) -> int:
        idx = self.intvar_index.get(name)
        if idx is None:
            idx = len(self.intvar_names)
            self.intvar_index[name] = idx
            self.intvar_names.append(name)
        return idx

    def _lin(self, node: Node) -> Lin:
        if node.op == "int":
            return lin_const(node.val)
        if node.op == "var":
            return Lin(((self._intvar(node.val), 1),), 0)
        if node.op == "+":
            return self._lin(node.args[0]).plus(self._lin(node.args[1]))
        if node.op == "-":
            return self._lin(node.args[0]).plus(self._lin(node.args[1]).scale(-1))
        if node.op == "*":
            a, b = node.args
            la, lb = self._lin(a), self._lin(b)
            if not la.coeffs:
                return lb.scale(la.const)
            if not lb.coeffs:
                return la.scale(lb.const)
            self.nonlinear_seen = True
            raise Unsupported("nonlinear multiplication")
        if node.op == "ite":
            key = id(node)
            entry = self.ite_aux.get(key)
            if entry is None:
                aux = self._intvar(f"_ite!{len(self.ite_aux)}")
                # the entry holds the node so its id cannot be recycled
                self.ite_aux[key] = (node, aux)
                cond = self._bool(node.args[0])
                t = self._lin(node.args[1])
                e = self._lin(node.args[2])
                av = Lin(((aux, 1),), 0)
                # cond -> aux = t ; ~cond -> aux = e
                for guard, branch in ((cond, t), (-cond, e)):
                    diff = av.plus(branch.scale(-1))
                    self._add_clause([-guard, self._atom(diff)])
                    self._add_clause([-guard, self._atom(diff.scale(-1))])
            else:
                aux = entry[1]
            return Lin(((aux, 1),), 0)
        raise SmtInputError(f"expected an Int term, found {node.op}")

    def _atom(self, lin: Lin) -> int:
        """SAT literal for lin >= 0."""
        if not lin.coeffs:
            t = self._true_lit()
            return t if lin.const >= 0 else -t
        g = 0
        for _, c in lin.coeffs:
            g = gcd(g, abs(c))
        if g > 1:
            lin = Lin(tuple((v, c // g) for v, c in lin.coeffs), floor_div(lin.const, g))
        if lin.coeffs[0][1] < 0:
            # canonical polarity: lin >= 0  iff  not(-lin - 1 >= 0)
            return -self._atom(lin.scale(-1).plus(lin_const(-1)))
        key = (lin.coeffs, lin.const)
        var = self.atom_var.get(key)
        if var is None:
            var = self.sat.new_var()
            self.atom_var[key] = var
            self.atom_by_var[var] = lin
            # atoms over one linear form are totally ordered by their
            # constant; chaining the implications keeps the SAT core from
            # rediscovering those conflicts through the theory one by one
            from bisect import bisect_left, insort

            group = self.atom_groups.setdefault(lin.coeffs, [])
            pos = bisect_left(group, (lin.const, var))
            if pos > 0:
                self._add_clause([-group[pos - 1][1], var])  # smaller const is stronger
            if pos < len(group):
                self._add_clause([-var, group[pos][1]])
            insort(group, (lin.const, var))
        return var

    def _int_ites(self, node: Node, found: dict, seen: set) -> None:
        if id(node) in seen:
            return
        seen.add(id(node))
        if node.op == "ite" and node.sort == "Int":
            found[id(node)] = node
        for a in node.args:
            self._int_ites(a, found, seen)

    def _subst_node(self, node: Node, target: Node, repl: Node, memo: dict) -> Node:
        if node is target:
            return repl
        key = id(node)
        got = memo.get(key)
        if got is not None:
            return got
        if not node.args:
            out = node
        else:
            kids = tuple(self._subst_node(a, target, repl, memo) for a in node.args)
            out = node if all(k is a for k, a in zip(kids, node.args)) else Node(node.op, kids, node.val, node.sort)
        memo[key] = out
        return out

    _ITE_SPLIT_CAP = 10

    def _cmp_lit(self, node: Node) -> int:
        """Comparisons case-split their integer ites (up to a cap) so the
        theory only ever sees pure linear atoms."""
        found: dict = {}
        self._int_ites(node, found, set())
        if found and len(found) <= self._ITE_SPLIT_CAP:
            target = next(iter(found.values()))
            cond, then_b, else_b = target.args
            node_t = self._subst_node(node, target, then_b, {})
            node_f = self._subst_node(node, target, else_b, {})
            return self._bool(Node("ite", (cond, node_t, node_f), sort="Bool"))
        return self._cmp_atom(node)

    def _cmp_atom(self, node: Node) -> int:
        op = node.op
        a, b = node.args
        la = self._lin(a)
        lb = self._lin(b)
        if op == ">=":
            return self._atom(la.plus(lb.scale(-1)))
        if op == ">":
            return self._atom(la.plus(lb.scale(-1)).plus(lin_const(-1)))
        if op == "<=":
            return self._atom(lb.plus(la.scale(-1)))
        if op == "<":
            return self._atom(lb.plus(la.scale(-1)).plus(lin_const(-1)))
        # integer equality
        ge1 = self._atom(la.plus(lb.scale(-1)))
        ge2 = self._atom(lb.plus(la.scale(-1)))
        x = self.sat.new_var()
        self._add_clause([-x, ge1])
        self._add_clause([-x, ge2])
        self._add_clause([x, -ge1, -ge2])
        return x

    def _bool(self, node: Node) -> int:
        key = id(node)
        cached = self.sat_of_node.get(key)
        if cached is not None:
            return cached[1]
        op = node.op
        if op == "bool":
            lit = self._true_lit() if node.val else -self._true_lit()
        elif op == "var":
            if node.sort != "Bool":
                raise SmtInputError(f"{node.val} is not boolean")
            ent = self.sat_of_node.get(("bv", node.val))
            if ent is None:
                ent = (None, self.sat.new_var())
                self.sat_of_node[("bv", node.val)] = ent
            lit = ent[1]
        elif op == "not":
            lit = -self._bool(node.args[0])
        elif op in (">", ">=", "<", "<="):
            lit = self._cmp_lit(node)
        elif op == "=":
            a, b = node.args
            if a.sort == "Bool":
                la, lb = self._bool(a), self._bool(b)
                x = self.sat.new_var()
                self._add_clause([-x, -la, lb])
                self._add_clause([-x, la, -lb])
                self._add_clause([x, la, lb])
                self._add_clause([x, -la, -lb])
                lit = x
            else:
                lit = self._cmp_lit(node)
        elif op in ("and", "or"):
            lits = [self._bool(a) for a in node.args]
            if not lits:
                t = self._true_lit()
                lit = t if op == "and" else -t
            else:
                x = self.sat.new_var()
                if op == "and":
                    for l in lits:
                        self._add_clause([-x, l])
                    self._add_clause([x] + [-l for l in lits])
                else:
                    for l in lits:
                        self._add_clause([x, -l])
                    self._add_clause([-x] + lits)
                lit = x
        elif op == "=>":
            lits = [self._bool(a) for a in node.args]
            # right-associated implication chain
            acc = lits[-1]
            for l in reversed(lits[:-1]):
                x = self.sat.new_var()
                self._add_clause([-x, -l, acc])
                self._add_clause([x, l])
                self._add_clause([x, -acc])
                acc = x
            lit = acc
        elif op == "xor":
            la, lb = (self._bool(a) for a in node.args)
            x = self.sat.new_var()
            self._add_clause([-x, la, lb])
            self._add_clause([-x, -la, -lb])
            self._add_clause([x, -la, lb])
            self._add_clause([x, la, -lb])
            lit = x
        elif op == "ite":
            lc, lt, le = (self._bool(a) for a in node.args)
            x = self.sat.new_var()
            self._add_clause([-x, -lc, lt])
            self._add_clause([-x, lc, le])
            self._add_clause([x, -lc, -lt])
            self._add_clause([x, lc, -le])
            lit = x
        else:
            raise SmtInputError(f"expected a Bool term, found {op}")
        # the entry holds the node so its id cannot be recycled by a fresh one
        self.sat_of_node[key] = (node, lit)
        return lit

    # -- check-sat -----------------------------------------------------------

    def check_sat(self) -> str:
        self.have_model = False
        deadline = None if self.check_seconds is None else time.monotonic() + self.check_seconds
        try:
            for fi, frame in enumerate(self.frames):
                start = self.converted_upto[fi]
                for node in frame.assertions[start:]:
                    self._add_clause([self._bool(node)])
                self.converted_upto[fi] = len(frame.assertions)
        except Unsupported:
            return "unknown"
        if self.unsat_flag:
            return "unsat"
        blocked = 0
        while True:
            try:
                if not self.sat.solve(deadline):
                    return "unsat"
            except SatTimeout:
                return "unknown"
            assign = self.sat.model()
            constraints = []
            idxs = []
            for var, lin in self.atom_by_var.items():
                if assign[var] == 1:
                    constraints.append(lin)
                elif assign[var] == -1:
                    constraints.append(lin.scale(-1).plus(lin_const(-1)))
                else:
                    continue
                idxs.append(var)
            checker = LinChecker(constraints, deadline=deadline)
            try:
                model, core = checker.solve()
            except TheoryUnknown:
                return "unknown"
            if model is not None:
                self.model_int = model
                self.model_bool = {v: assign[v] == 1 for v in range(1, self.sat.nvars + 1)}
                self.have_model = True
                return "sat"
            block = []
            for ci in sorted(core):
                var = idxs[ci]
                block.append(-var if assign[var] == 1 else var)
            if not block:
                return "unsat"
            self._add_clause(block)
            if self.unsat_flag:
                return "unsat"
            blocked += 1
            if blocked > 20_000 or (deadline is not None and time.monotonic() > deadline):
                return "unknown"

    # -- get-value -----------------------------------------------------------

    def _eval(self, node: Node):
        if node.op == "int" or node.op == "bool":
            return node.val
        if node.op == "var":
            if node.sort == "Bool":
                ent = self.sat_of_node.get(("bv", node.val))
                return self.model_bool.get(ent[1], False) if ent else False
            idx = self.intvar_index.get(node.val)
            if idx is None:
                return 0
            return self.model_int.get(idx, 0)
        args = [self._eval(a) for a in node.args]
        op = node.op
        if op == "+":
            return args[0] + args[1]
        if op == "-":
            return args[0] - args[1]
        if op == "*":
            return args[0] * args[1]
        if op == ">":
            return args[0] > args[1]
        if op == ">=":
            return args[0] >= args[1]
        if op == "<":
            return args[0] < args[1]
        if op == "<=":
            return args[0] <= args[1]
        if op == "=":
            return args[0] == args[1]
        if op == "and":
            return all(args)
        if op == "or":
            return any(args)
        if op == "not":
            return not args[0]
        if op == "=>":
            acc = args[-1]
            for a in reversed(args[:-1]):
                acc = (not a) or acc
            return acc
        if op == "xor":
            return args[0] != args[1]
        if op == "ite":
            return args[1] if args[0] else args[2]
        raise SmtInputError(f"cannot evaluate {op}")

    def get_value(self, items) -> str:
        if not self.have_model:
            return '(error "no model available")'
        parts = []
        for sx in items:
            node = build(sx, self.env, {})
            val = self._eval(node)
            if val is True:
                txt = "true"
            elif val is False:
                txt = "false"
            elif isinstance(val, int) and val < 0:
                txt = f"(- {-val})"
            else:
                txt = str(val)
            parts.append(f"({_render(sx)} {txt})")
        return "(" + " ".join(parts) + ")"


def _render(sx) -> str:
    if isinstance(sx, str):
        return sx
    return "(" + " ".join(_render(x) for x in sx) + ")"


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    check_seconds = None
    if "--check-seconds" in argv:
        i = argv.index("--check-seconds")
        check_seconds = float(argv[i + 1])
    solver = MiniSmt(check_seconds)
    reader = SexprReader()
    out = sys.stdout
    for line in sys.stdin:
        try:
            commands = reader.feed(line)
        except SmtInputError as exc:
            out.write(f'(error "{exc}")\n')
            out.flush()
            continue
        for sx in commands:
            try:
                resp = solver.execute(sx)
            except SmtInputError as exc:
                out.write(f'(error "{exc}")\n')
                out.flush()
                continue
            if resp is None:
                out.flush()
                return 0
            if resp != "":
                out.write(resp + "\n")
                out.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Sorted SMT expressions, linearization, SMT-LIB 2.0 printing, and the
interactive solver session over a subprocess.

Expressions are immutable trees over integer and boolean sorts.  The only
nonlinearity the encoders ever produce is multiplication by a coefficient that
is either a literal or an ite-tree over literals; `linearize` pushes those
ites outward so the result stays inside QF_LIA:

    (* (ite b 2 1) e)  ->  (ite b (* 2 e) (* 1 e))

binding e to a shared name first when it would be duplicated.
"""

from __future__ import annotations

import os
import select
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

INT = "Int"
BOOL = "Bool"

_BOOL_OPS = {"and", "or", "not", "=>", ">", ">=", "<", "<=", "="}
_INT_OPS = {"+", "-", "*"}


@dataclass(frozen=True)
class Expr:
    op: str  # "int", "bool", "var", "ite", arithmetic/boolean operator, "shared"
    args: tuple = ()
    value: object = None  # literal value or variable/shared name
    sort: str = INT

    def __str__(self) -> str:
        return print_smtlib(self)


TRUE = Expr("bool", value=True, sort=BOOL)
FALSE = Expr("bool", value=False, sort=BOOL)


def ilit(v: int) -> Expr:
    return Expr("int", value=int(v))


def blit(v: bool) -> Expr:
    return TRUE if v else FALSE


def ivar(name: str) -> Expr:
    return Expr("var", value=name, sort=INT)


def bvar(name: str) -> Expr:
    return Expr("var", value=name, sort=BOOL)


def is_int_lit(e: Expr) -> bool:
    return e.op == "int"


def is_true(e: Expr) -> bool:
    return e.op == "bool" and e.value is True


def is_false(e: Expr) -> bool:
    return e.op == "bool" and e.value is False


def add(*terms: Expr) -> Expr:
    flat: list[Expr] = []
    const = 0
    for t in terms:
        if t.op == "+":
            parts = t.args
        else:
            parts = (t,)
        for p in parts:
            if is_int_lit(p):
                const += p.value
            else:
                flat.append(p)
    if const or not flat:
        flat.append(ilit(const))
    if len(flat) == 1:
        return flat[0]
    return Expr("+", tuple(flat))


def sub(a: Expr, b: Expr) -> Expr:
    if is_int_lit(a) and is_int_lit(b):
        return ilit(a.value - b.value)
    return Expr("-", (a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if is_int_lit(a) and is_int_lit(b):
        return ilit(a.value * b.value)
    # literal goes first; (* 1 e) and (* 0 e) simplify away
    if is_int_lit(b):
        a, b = b, a
    if is_int_lit(a):
        if a.value == 0:
            return ilit(0)
        if a.value == 1:
            return b
    return Expr("*", (a, b))


_TREE_LEAF_CAP = 64


def _tree_leaves(e: Expr) -> int:
    if e.op == "int":
        return 1
    return _tree_leaves(e.args[1]) + _tree_leaves(e.args[2])


def _tree_zip(a: Expr, b: Expr, py):
    """Combine two literal-ite-trees pointwise with py; None when too big."""
    if is_int_lit(a) and is_int_lit(b):
        return ilit(py(a.value, b.value))
    if a.op == "ite" and b.op == "ite" and a.args[0] == b.args[0]:
        return ite(a.args[0], _tree_zip(a.args[1], b.args[1], py), _tree_zip(a.args[2], b.args[2], py))
    if a.op == "ite":
        return ite(a.args[0], _tree_zip(a.args[1], b, py), _tree_zip(a.args[2], b, py))
    return ite(b.args[0], _tree_zip(a, b.args[1], py), _tree_zip(a, b.args[2], py))


def as_literal_tree(e: Expr) -> Optional[Expr]:
    """Rewrite arithmetic over finite-range coefficient trees into a single
    ite tree over literals; None when e mentions a variable or grows past the
    size cap."""
    if e.op == "int":
        return e
    if e.op == "ite":
        t = as_literal_tree(e.args[1])
        f = as_literal_tree(e.args[2]) if t is not None else None
        if t is None or f is None:
            return None
        return ite(e.args[0], t, f)
    if e.op in ("+", "*", "-"):
        kids = []
        leaves = 1
        for k in e.args:
            tk = as_literal_tree(k)
            if tk is None:
                return None
            leaves *= max(_tree_leaves(tk), 1)
            if leaves > _TREE_LEAF_CAP:
                return None
            kids.append(tk)
        py = {"+": lambda x, y: x + y, "*": lambda x, y: x * y, "-": lambda x, y: x - y}[e.op]
        out = kids[0]
        for k in kids[1:]:
            out = _tree_zip(out, k, py)
        return out
    return None


def _expand_tree_cmp(a: Expr, b: Expr, py) -> Expr:
    # Shannon expansion: comparisons of finite-range coefficient trees are
    # boolean formulas, so the solver never sees them as arithmetic
    if is_int_lit(a) and is_int_lit(b):
        return blit(py(a.value, b.value))
    if a.op == "ite":
        return ite(a.args[0], _expand_tree_cmp(a.args[1], b, py), _expand_tree_cmp(a.args[2], b, py))
    return ite(b.args[0], _expand_tree_cmp(a, b.args[1], py), _expand_tree_cmp(a, b.args[2], py))


def _cmp(op: str, a: Expr, b: Expr, py) -> Expr:
    if is_int_lit(a) and is_int_lit(b):
        return blit(py(a.value, b.value))
    if a == b:
        return blit(py(0, 0))
    ta = as_literal_tree(a)
    if ta is not None:
        tb = as_literal_tree(b)
        if tb is not None and _tree_leaves(ta) * _tree_leaves(tb) <= _TREE_LEAF_CAP * 4:
            return _expand_tree_cmp(ta, tb, py)
    return Expr(op, (a, b), sort=BOOL)


def ge(a: Expr, b: Expr) -> Expr:
    return _cmp(">=", a, b, lambda x, y: x >= y)


def gt(a: Expr, b: Expr) -> Expr:
    return _cmp(">", a, b, lambda x, y: x > y)


def le(a: Expr, b: Expr) -> Expr:
    return _cmp("<=", a, b, lambda x, y: x <= y)


def eq(a: Expr, b: Expr) -> Expr:
    if a.sort == BOOL:
        if is_true(a):
            return b
        if is_true(b):
            return a
        if is_false(a):
            return not_(b)
        if is_false(b):
            return not_(a)
        if a == b:
            return TRUE
        return Expr("=", (a, b), sort=BOOL)
    return _cmp("=", a, b, lambda x, y: x == y)


def not_(a: Expr) -> Expr:
    if is_true(a):
        return FALSE
    if is_false(a):
        return TRUE
    if a.op == "not":
        return a.args[0]
    return Expr("not", (a,), sort=BOOL)


def and_(*parts: Expr) -> Expr:
    flat: list[Expr] = []
    for p in parts:
        if is_true(p):
            continue
        if is_false(p):
            return FALSE
        if p.op == "and":
            flat.extend(p.args)
        else:
            flat.append(p)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return Expr("and", tuple(flat), sort=BOOL)


def or_(*parts: Expr) -> Expr:
    flat: list[Expr] = []
    for p in parts:
        if is_false(p):
            continue
        if is_true(p):
            return TRUE
        if p.op == "or":
            flat.extend(p.args)
        else:
            flat.append(p)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Expr("or", tuple(flat), sort=BOOL)


def implies(a: Expr, b: Expr) -> Expr:
    if is_true(a):
        return b
    if is_false(a) or is_true(b):
        return TRUE
    if is_false(b):
        return not_(a)
    return Expr("=>", (a, b), sort=BOOL)


def ite(c: Expr, t: Expr, f: Expr) -> Expr:
    if is_true(c):
        return t
    if is_false(c):
        return f
    if t == f:
        return t
    return Expr("ite", (c, t, f), sort=t.sort)


def shared(name: str, body: Expr) -> Expr:
    return Expr("shared", (body,), value=name, sort=body.sort)


def expr_size(e: Expr) -> int:
    if e.op == "shared":
        return 1
    return 1 + sum(expr_size(a) for a in e.args)


# ---------------------------------------------------------------------------
# Linearization (ite-pull on multiplications)
# ---------------------------------------------------------------------------


class NonlinearError(Exception):
    pass


def is_ite_literal_tree(e: Expr) -> bool:
    """Literal, or an ite whose branches are again ite-literal-trees."""
    if is_int_lit(e):
        return True
    return e.op == "ite" and is_ite_literal_tree(e.args[1]) and is_ite_literal_tree(e.args[2])


def _trivial(e: Expr) -> bool:
    return e.op in ("int", "var", "shared")


class FreshNames:
    """Monotone counter per prefix; deterministic given construction order."""

    def __init__(self):
        self.counters: dict = {}

    def next(self, prefix: str) -> str:
        n = self.counters.get(prefix, 0)
        self.counters[prefix] = n + 1
        return f"{prefix}{n}"


def linearize(
    e: Expr,
    names: FreshNames | None = None,
    nonlinear_ok: bool = False,
    memo: dict | None = None,
) -> Expr:
    """Rewrite (* (ite c a b) e4) -> (ite c (* a e4) (* b e4)) to fixpoint.

    A non-trivial duplicated e4 is first bound to a fresh shared name.  If a
    product of two non-literal factors remains and neither is an ite-tree over
    literals, raises NonlinearError unless nonlinear_ok.

    A caller-supplied memo makes repeated linearization of shared nodes yield
    the identical result objects (and fresh names), which keeps define-fun
    references consistent across several asserts.
    """
    if names is None:
        names = FreshNames()
    if memo is None:
        memo = {}

    def distribute(coeff: Expr, e4: Expr) -> Expr:
        # coeff is an ite-literal-tree
        if is_int_lit(coeff):
            return mul(coeff, e4)
        c, t, f = coeff.args
        return ite(c, distribute(t, e4), distribute(f, e4))

    def go(e: Expr) -> Expr:
        key = id(e)
        if key in memo:
            return memo[key][1]
        if e.args:
            kids = tuple(go(a) for a in e.args)
            if e.op == "shared":
                out = Expr("shared", kids, value=e.value, sort=e.sort) if kids != e.args else e
            elif kids != e.args:
                out = _rebuild(e.op, kids, e.sort)
            else:
                out = e
        else:
            out = e
        if out.op == "*":
            a, b = out.args
            if not is_int_lit(a) and not is_int_lit(b):
                if is_ite_literal_tree(b) and not is_ite_literal_tree(a):
                    a, b = b, a
                if is_ite_literal_tree(a):
                    if not _trivial(b):
                        b = shared(names.next("_v"), b)
                    out = distribute(a, b)
                elif not nonlinear_ok:
                    raise NonlinearError(f"nonlinear product remains: {print_smtlib(out)}")
        memo[key] = (e, out)
        return out

    def _rebuild(op: str, kids: tuple, sort: str) -> Expr:
        if op == "+":
            return add(*kids)
        if op == "-":
            return sub(*kids)
        if op == "*":
            return Expr("*", kids)
        if op == "ite":
            return ite(*kids)
        if op == "and":
            return and_(*kids)
        if op == "or":
            return or_(*kids)
        if op == "not":
            return not_(*kids)
        if op == "=>":
            return implies(*kids)
        if op in (">", ">=", "<", "<=", "="):
            return Expr(op, kids, sort=BOOL)
        return Expr(op, kids, sort=sort)

    return go(e)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def print_smtlib(e: Expr) -> str:
    if e.op == "int":
        return str(e.value) if e.value >= 0 else f"(- {-e.value})"
    if e.op == "bool":
        return "true" if e.value else "false"
    if e.op == "var" or e.op == "shared":
        return str(e.value)
    parts = " ".join(print_smtlib(a) for a in e.args)
    return f"({e.op} {parts})"


def collect_shared(e: Expr, seen: set, out: list) -> None:
    """Postorder list of shared definitions reachable from e (each once)."""
    if e.op == "shared":
        if e.value in seen:
            return
        seen.add(e.value)
        collect_shared(e.args[0], seen, out)
        out.append(e)
        return
    for a in e.args:
        collect_shared(a, seen, out)


def eval_expr(e: Expr, model: dict) -> object:
    """Evaluate under a model mapping variable names to ints/bools.

    Shared nodes evaluate through their bodies.
    """
    if e.op == "int" or e.op == "bool":
        return e.value
    if e.op == "var":
        return model[e.value]
    if e.op == "shared":
        return eval_expr(e.args[0], model)
    a = [eval_expr(x, model) for x in e.args]
    op = e.op
    if op == "+":
        return sum(a)
    if op == "-":
        return a[0] - a[1]
    if op == "*":
        return a[0] * a[1]
    if op == ">":
        return a[0] > a[1]
    if op == ">=":
        return a[0] >= a[1]
    if op == "<":
        return a[0] < a[1]
    if op == "<=":
        return a[0] <= a[1]
    if op == "=":
        return a[0] == a[1]
    if op == "and":
        return all(a)
    if op == "or":
        return any(a)
    if op == "not":
        return not a[0]
    if op == "=>":
        return (not a[0]) or a[1]
    if op == "ite":
        return a[1] if a[0] else a[2]
    raise ValueError(f"cannot evaluate {op}")


# ---------------------------------------------------------------------------
# Solver session
# ---------------------------------------------------------------------------


class SolverError(Exception):
    pass


class ProtocolError(SolverError):
    pass


@dataclass
class SessionStats:
    asserts: int = 0
    check_sats: int = 0
    pushes: int = 0
    pops: int = 0
    resets: int = 0
    restarts: int = 0
    reused_checks: int = 0  # check-sat on a context that already served one


def default_solver_command(check_seconds: Optional[float] = None) -> str:
    import sys

    cmd = f"{sys.executable} -m trsterm.minismt"
    if check_seconds is not None:
        cmd += f" --check-seconds {check_seconds:g}"
    return cmd


class SolverSession:
    """One SMT-LIB 2.0 solver subprocess with context-depth tracking.

    The session is exclusively owned by one logical thread.  All commands are
    acknowledged (print-success mode); check-sat obeys a per-check timeout,
    after which the process is killed and the session is marked dead.
    """

    def __init__(
        self,
        command: str,
        timeout: float = 10.0,
        logic: str = "QF_LIA",
        transcript: Optional[str] = None,
    ):
        self.command = command
        self.timeout = timeout
        self.logic = logic
        self.depth = 0
        self.stats = SessionStats()
        self.dead = False
        self._emitted: dict = {}  # shared name -> depth at which define-fun was sent
        self._declared: dict = {}  # var name -> depth
        self._checks_since_reset = 0
        self._transcript_path = transcript
        self._transcript = open(transcript, "w") if transcript else None
        try:
            self.proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise SolverError(f"cannot start solver '{command}': {exc}") from exc
        try:
            self._command("(set-option :print-success true)")
            self._command(f"(set-logic {self.logic})")
        except SolverError:
            self.kill()
            raise

    # -- low level ---------------------------------------------------------

    def _send(self, line: str) -> None:
        if self.dead:
            raise SolverError("session is dead")
        if self._transcript:
            self._transcript.write(line + "\n")
            self._transcript.flush()
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self.dead = True
            raise SolverError(f"solver pipe broken: {exc}") from exc

    def _read_line(self, timeout: Optional[float]) -> str:
        deadline = None if timeout is None else time.monotonic() + timeout
        fd = self.proc.stdout
        while True:
            if deadline is not None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    self.kill()
                    raise TimeoutError("solver timed out")
                ready, _, _ = select.select([fd], [], [], remaining)
                if not ready:
                    continue
            line = fd.readline()
            if line == "":
                self.dead = True
                raise SolverError("solver closed its output")
            line = line.strip()
            if line:
                return line

    def _read_sexpr(self, timeout: Optional[float]) -> str:
        buf = self._read_line(timeout)
        while buf.count("(") > buf.count(")"):
            buf += " " + self._read_line(timeout)
        return buf

    def _command(self, line: str) -> None:
        self._send(line)
        resp = self._read_line(timeout=self.timeout)
        if resp != "success":
            self.dead = True
            raise ProtocolError(f"expected success for {line!r}, got {resp!r}")

    # -- protocol ----------------------------------------------------------

    def declare(self, name: str, sort: str) -> None:
        if name in self._declared:
            return
        self._declared[name] = self.depth
        self._command(f"(declare-fun {name} () {sort})")

    def _define_shared(self, e: Expr) -> None:
        defs: list = []
        collect_shared(e, set(self._emitted), defs)
        for d in defs:
            self._emitted[d.value] = self.depth
            self._command(f"(define-fun {d.value} () {d.sort} {print_smtlib(d.args[0])})")

    def assert_expr(self, e: Expr) -> None:
        self._define_shared(e)
        self._command(f"(assert {print_smtlib(e)})")
        self.stats.asserts += 1

    def push(self) -> None:
        self._command("(push 1)")
        self.depth += 1
        self.stats.pushes += 1

    def pop(self) -> None:
        if self.depth == 0:
            raise ProtocolError("pop at context depth 0")
        self._command("(pop 1)")
        self.depth -= 1
        self._emitted = {k: d for k, d in self._emitted.items() if d <= self.depth}
        self._declared = {k: d for k, d in self._declared.items() if d <= self.depth}
        self.stats.pops += 1

    def reset(self) -> None:
        # solvers differ on whether (reset) itself is acknowledged once
        # print-success is cleared, so sync through an echo marker
        self._send("(reset)")
        self._send('(echo "_sync_")')
        while True:
            line = self._read_line(timeout=self.timeout)
            if line in ('"_sync_"', "_sync_"):
                break
            if line != "success":
                self.dead = True
                raise ProtocolError(f"unexpected reset response {line!r}")
        self.depth = 0
        self._emitted.clear()
        self._declared.clear()
        self.stats.resets += 1
        self._checks_since_reset = 0
        self._command("(set-option :print-success true)")
        self._command(f"(set-logic {self.logic})")

    def check_sat(self) -> str:
        self._send("(check-sat)")
        self.stats.check_sats += 1
        # a later check at depth >= 1 after a pop reuses the pushed base context
        if self.depth >= 1 and self._checks_since_reset >= 1:
            self.stats.reused_checks += 1
        self._checks_since_reset += 1
        try:
            resp = self._read_line(timeout=self.timeout)
        except TimeoutError:
            return "unknown"
        if resp not in ("sat", "unsat", "unknown"):
            self.dead = True
            raise ProtocolError(f"unexpected check-sat answer {resp!r}")
        if self._transcript:
            self._transcript.write(f";; -> {resp}\n")
            self._transcript.flush()
        return resp

    def get_value(self, names: Iterable[str]) -> dict:
        names = list(names)
        if not names:
            return {}
        out: dict = {}
        # chunk to keep lines reasonable
        for i in range(0, len(names), 64):
            chunk = names[i : i + 64]
            self._send(f"(get-value ({' '.join(chunk)}))")
            resp = self._read_sexpr(timeout=self.timeout)
            out.update(_parse_values(resp))
        missing = [n for n in names if n not in out]
        if missing:
            self.dead = True
            raise ProtocolError(f"get-value response missing {missing[:3]}")
        return out

    def exit(self) -> None:
        if not self.dead:
            try:
                self._send("(exit)")
            except SolverError:
                pass
        self.kill()

    def kill(self) -> None:
        self.dead = True
        if self._transcript:
            self._transcript.close()
            self._transcript = None
        try:
            self.proc.kill()
            self.proc.wait(timeout=5)
        except Exception:
            pass


def _parse_values(text: str) -> dict:
    """Parse a ((name value) ...) get-value response."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()

    def read(i):
        if tokens[i] == "(":
            out = []
            i += 1
            while tokens[i] != ")":
                item, i = read(i)
                out.append(item)
            return out, i + 1
        return tokens[i], i + 1

    tree, _ = read(0)
    if not isinstance(tree, list):
        raise ProtocolError(f"malformed get-value response: {text!r}")

    def as_value(v):
        if v == "true":
            return True
        if v == "false":
            return False
        if isinstance(v, list):
            if len(v) == 2 and v[0] == "-":
                return -int(v[1])
            raise ProtocolError(f"unsupported value {v!r}")
        return int(v)

    out = {}
    for entry in tree:
        if not (isinstance(entry, list) and len(entry) == 2):
            raise ProtocolError(f"malformed get-value entry: {entry!r}")
        name, v = entry
        out[name] = as_value(v)
    return out

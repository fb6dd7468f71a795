"""First-order terms, rewrite rules, TRSs, and the TPDB old-format parser.

Everything here is an immutable value with structural equality; the syntactic
algorithms (substitution, matching, unification, one-step rewriting) are pure
functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

PLAIN = "plain"
SHARP = "sharp"
UNCURRIED = "uncurried"


class TrsError(Exception):
    """Malformed input: syntax errors, arity clashes, ill-formed rules."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        if line is not None:
            message = f"{line}:{col}: {message}"
        super().__init__(message)
        self.line = line
        self.col = col


class UnsupportedFeatureError(TrsError):
    """Input uses a feature outside the supported TPDB fragment.

    The pipeline answers MAYBE on this instead of crashing.
    """


@dataclass(frozen=True)
class Symbol:
    """Function symbol: identity is (name, kind, arity)."""

    name: str
    arity: int
    kind: str = PLAIN
    # For uncurried symbols only: the base symbol name and application level.
    base: Optional[str] = None
    level: int = 0

    def __str__(self) -> str:
        return self.name + "#" if self.kind == SHARP else self.name

    def sharp(self) -> "Symbol":
        return Symbol(self.name, self.arity, SHARP, self.base, self.level)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class App:
    sym: Symbol
    args: tuple = ()

    def __post_init__(self):
        if len(self.args) != self.sym.arity:
            raise TrsError(f"symbol {self.sym} expects {self.sym.arity} arguments, got {len(self.args)}")

    def __str__(self) -> str:
        if not self.args:
            return str(self.sym)
        return f"{self.sym}({','.join(str(a) for a in self.args)})"


Term = Var | App
Substitution = dict

Position = tuple  # path of argument indices from the root


def variables(t: Term) -> set:
    """Set of variable names occurring in t."""
    out: set = set()
    stack = [t]
    while stack:
        u = stack.pop()
        if isinstance(u, Var):
            out.add(u.name)
        else:
            stack.extend(u.args)
    return out


def symbols_of(t: Term) -> set:
    out: set = set()
    stack = [t]
    while stack:
        u = stack.pop()
        if isinstance(u, App):
            out.add(u.sym)
            stack.extend(u.args)
    return out


def subterms(t: Term) -> Iterator[tuple[Position, Term]]:
    """All subterms with their positions, root first, left to right."""
    stack = [((), t)]
    while stack:
        pos, u = stack.pop(0)
        yield pos, u
        if isinstance(u, App):
            stack[:0] = [(pos + (i,), a) for i, a in enumerate(u.args)]


def subterm_at(t: Term, pos: Position) -> Term:
    for i in pos:
        t = t.args[i]
    return t


def replace_at(t: Term, pos: Position, s: Term) -> Term:
    if not pos:
        return s
    i = pos[0]
    args = list(t.args)
    args[i] = replace_at(args[i], pos[1:], s)
    return App(t.sym, tuple(args))


def term_size(t: Term) -> int:
    return 1 + sum(term_size(a) for a in t.args) if isinstance(t, App) else 1


def apply_substitution(t: Term, sigma: Substitution) -> Term:
    """Simultaneous replacement; variables outside the map are unchanged."""
    if isinstance(t, Var):
        return sigma.get(t.name, t)
    if not t.args:
        return t
    return App(t.sym, tuple(apply_substitution(a, sigma) for a in t.args))


def rename_term(t: Term, suffix: str) -> Term:
    if isinstance(t, Var):
        return Var(t.name + suffix)
    return App(t.sym, tuple(rename_term(a, suffix) for a in t.args))


def match(pattern: Term, subject: Term) -> Optional[Substitution]:
    """Unique sigma with pattern*sigma == subject, or None."""
    sigma: Substitution = {}
    stack = [(pattern, subject)]
    while stack:
        p, s = stack.pop()
        if isinstance(p, Var):
            bound = sigma.get(p.name)
            if bound is None:
                sigma[p.name] = s
            elif bound != s:
                return None
        else:
            if not isinstance(s, App) or s.sym != p.sym:
                return None
            stack.extend(zip(p.args, s.args))
    return sigma


def unify(s: Term, t: Term) -> Optional[Substitution]:
    """Most general unifier with occurs check, or None."""

    def resolve(u: Term, sigma: Substitution) -> Term:
        while isinstance(u, Var) and u.name in sigma:
            u = sigma[u.name]
        return u

    def occurs(name: str, u: Term, sigma: Substitution) -> bool:
        u = resolve(u, sigma)
        if isinstance(u, Var):
            return u.name == name
        return any(occurs(name, a, sigma) for a in u.args)

    sigma: Substitution = {}
    stack = [(s, t)]
    while stack:
        a, b = stack.pop()
        a, b = resolve(a, sigma), resolve(b, sigma)
        if a == b:
            continue
        if isinstance(a, Var):
            if occurs(a.name, b, sigma):
                return None
            sigma[a.name] = b
        elif isinstance(b, Var):
            if occurs(b.name, a, sigma):
                return None
            sigma[b.name] = a
        else:
            if a.sym != b.sym:
                return None
            stack.extend(zip(a.args, b.args))

    # Close the bindings so the result is an idempotent substitution.
    def close(u: Term) -> Term:
        u = resolve(u, sigma)
        if isinstance(u, Var):
            return u
        return App(u.sym, tuple(close(a) for a in u.args))

    return {x: close(Var(x)) for x in sigma}


@dataclass(frozen=True)
class Rule:
    lhs: Term
    rhs: Term
    rid: int = 0

    def __post_init__(self):
        if isinstance(self.lhs, Var):
            raise TrsError(f"left-hand side of rule {self.rid} is a variable")
        extra = variables(self.rhs) - variables(self.lhs)
        if extra:
            raise TrsError(
                f"rule {self.rid}: right-hand side variables {sorted(extra)} do not occur on the left"
            )

    def __str__(self) -> str:
        return f"{self.lhs} -> {self.rhs}"

    def renamed(self, suffix: str) -> "Rule":
        return Rule(rename_term(self.lhs, suffix), rename_term(self.rhs, suffix), self.rid)


@dataclass(frozen=True)
class Trs:
    rules: tuple = ()
    signature: dict = field(default_factory=dict, compare=False)

    @staticmethod
    def make(rules) -> "Trs":
        rules = tuple(rules)
        sig: dict = {}
        for r in rules:
            for t in (r.lhs, r.rhs):
                for sym in symbols_of(t):
                    seen = sig.get(str(sym))
                    if seen is not None and seen != sym:
                        raise TrsError(f"symbol {sym} used with arities {seen.arity} and {sym.arity}")
                    sig[str(sym)] = sym
        return Trs(rules, sig)

    def __str__(self) -> str:
        return print_trs(self)

    def rule_by_id(self, rid: int) -> Rule:
        for r in self.rules:
            if r.rid == rid:
                return r
        raise KeyError(rid)


def defined_symbols(trs: Trs) -> set:
    """Root symbols of the left-hand sides."""
    return {r.lhs.sym for r in trs.rules}


def rewrite_steps(t: Term, trs: Trs) -> list[tuple[int, Position, Term]]:
    """All one-step rewrites of t: (rule id, position, result).

    Rules are renamed apart from t before matching.
    """
    out = []
    seen = set()
    for pos, sub in subterms(t):
        if isinstance(sub, Var):
            continue
        for rule in trs.rules:
            r = rule.renamed("'") if variables(rule.lhs) & variables(t) else rule
            sigma = match(r.lhs, sub)
            if sigma is None:
                continue
            result = replace_at(t, pos, apply_substitution(r.rhs, sigma))
            key = (rule.rid, pos, result)
            if key not in seen:
                seen.add(key)
                out.append(key)
    return out


def rewrite_step(t: Term, trs: Trs) -> set:
    """Set of all one-step successors of t."""
    return {res for _, _, res in rewrite_steps(t, trs)}


# ---------------------------------------------------------------------------
# TPDB old format
# ---------------------------------------------------------------------------

_STRUCTURAL = "(),"


def _tokenize(text: str) -> list[tuple[str, int, int]]:
    """Tokens with 1-based line/column. "->" and "->=" are operator tokens."""
    tokens = []
    line, col = 1, 1
    i, n = 0, len(text)
    word_start = None

    def flush(end_i, end_line, end_col):
        nonlocal word_start
        if word_start is None:
            return
        start_i, start_line, start_col = word_start
        chunk = text[start_i:end_i]
        # split embedded arrows: "f(x)->x" style input
        c = 0
        cl, cc = start_line, start_col
        while chunk:
            j = chunk.find("->")
            if j < 0:
                tokens.append((chunk, cl, cc))
                break
            if j > 0:
                tokens.append((chunk[:j], cl, cc))
            arrow = "->=" if chunk[j : j + 3] == "->=" else "->"
            tokens.append((arrow, cl, cc + j))
            cc += j + len(arrow)
            chunk = chunk[j + len(arrow) :]
        word_start = None

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            flush(i, line, col)
            if ch == "\n":
                line += 1
                col = 0
        elif ch in _STRUCTURAL:
            flush(i, line, col)
            tokens.append((ch, line, col))
        else:
            if word_start is None:
                word_start = (i, line, col)
        i += 1
        col += 1
    flush(n, line, col)
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, -1, -1)

    def next(self):
        tok = self.peek()
        if tok[0] is None:
            raise TrsError("unexpected end of input")
        self.pos += 1
        return tok

    def expect(self, what: str):
        tok, line, col = self.next()
        if tok != what:
            raise TrsError(f"expected '{what}', found '{tok}'", line, col)

    def skip_balanced(self):
        """Consume tokens up to and including the ')' closing the current section."""
        depth = 1
        while depth:
            tok, line, col = self.next()
            if tok == "(":
                depth += 1
            elif tok == ")":
                depth -= 1


def parse_term(p: _Parser, var_names: set, arities: dict) -> Term:
    tok, line, col = p.next()
    if tok in _STRUCTURAL or tok in ("->", "->="):
        raise TrsError(f"expected a term, found '{tok}'", line, col)
    if p.peek()[0] == "(":
        p.next()
        args = []
        if p.peek()[0] == ")":
            p.next()
        else:
            while True:
                args.append(parse_term(p, var_names, arities))
                nxt, nline, ncol = p.next()
                if nxt == ")":
                    break
                if nxt != ",":
                    raise TrsError(f"expected ',' or ')', found '{nxt}'", nline, ncol)
        if tok in var_names:
            raise TrsError(f"variable '{tok}' used as a function symbol", line, col)
        seen = arities.get(tok)
        if seen is not None and seen != len(args):
            raise TrsError(f"symbol '{tok}' used with arities {seen} and {len(args)}", line, col)
        arities[tok] = len(args)
        return App(Symbol(tok, len(args)), tuple(args))
    if tok in var_names:
        return Var(tok)
    seen = arities.get(tok)
    if seen is not None and seen != 0:
        raise TrsError(f"symbol '{tok}' used with arities {seen} and 0", line, col)
    arities[tok] = 0
    return App(Symbol(tok, 0))


def parse_trs(text: str) -> Trs:
    """Parse a TPDB old-format problem: (VAR ...) and (RULES ...) sections.

    (COMMENT ...) is ignored.  (STRATEGY ...), (THEORY ...), relative rules
    "->=" and conditional rules raise UnsupportedFeatureError; anything else
    malformed raises TrsError with a position.
    """
    p = _Parser(text)
    var_names: set = set()
    arities: dict = {}
    rules: list[Rule] = []
    saw_rules = False

    while p.peek()[0] is not None:
        tok, line, col = p.next()
        if tok != "(":
            raise TrsError(f"expected '(', found '{tok}'", line, col)
        section, sline, scol = p.next()
        if section == "VAR":
            while p.peek()[0] != ")":
                name, nline, ncol = p.next()
                if name in _STRUCTURAL or name in ("->", "->=") or name is None:
                    raise TrsError(f"bad variable name '{name}'", nline, ncol)
                var_names.add(name)
            p.next()
        elif section == "RULES":
            saw_rules = True
            while p.peek()[0] != ")":
                lhs = parse_term(p, var_names, arities)
                arrow, aline, acol = p.next()
                if arrow == "->=":
                    raise UnsupportedFeatureError("relative rules (->=) are not supported", aline, acol)
                if arrow != "->":
                    raise TrsError(f"expected '->', found '{arrow}'", aline, acol)
                rhs = parse_term(p, var_names, arities)
                if p.peek()[0] == "|":
                    raise UnsupportedFeatureError("conditional rules are not supported", *p.peek()[1:])
                rules.append(Rule(lhs, rhs, len(rules)))
            p.next()
        elif section == "COMMENT":
            p.skip_balanced()
        elif section in ("STRATEGY", "THEORY", "CONDITION", "CONDITIONTYPE", "EQUATIONS"):
            raise UnsupportedFeatureError(f"({section} ...) sections are not supported", sline, scol)
        else:
            raise UnsupportedFeatureError(f"unknown section '({section} ...)'", sline, scol)

    if not saw_rules:
        raise TrsError("no (RULES ...) section found")
    return Trs.make(rules)


def print_term(t: Term) -> str:
    return str(t)


def print_trs(trs: Trs) -> str:
    """Emit TPDB old format; parse_trs(print_trs(x)) == x structurally."""
    vs: set = set()
    for r in trs.rules:
        vs |= variables(r.lhs) | variables(r.rhs)
    lines = []
    if vs:
        lines.append(f"(VAR {' '.join(sorted(vs))})")
    body = "\n".join(f"  {r.lhs} -> {r.rhs}" for r in trs.rules)
    lines.append("(RULES" + ("\n" + body + "\n" if body else " ") + ")")
    return "\n".join(lines)

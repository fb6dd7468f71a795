"""The unified weighted-path-order reduction-pair engine.

A reduction pair is searched as an SMT problem: symbols get template
interpretations (linear sum, max, or a mixed shape chosen per symbol),
precedence levels, status slot assignments, collapsing argument filters, and
per-rule usability booleans.  Term comparisons unfold into boolean formulas
over those template variables; a model decodes into a concrete order that can
be re-evaluated without the solver.

Weights are kept in a "max of guarded linear forms" normal form, so the
weak/strict weight comparisons are the standard branchwise dominance
criterion (sound for all-naturals variable values) and no max operator ever
reaches the solver.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Optional

from .terms import App, Rule, Symbol, Term, Trs, Var, variables
from . import smt
from .smt import (
    Expr,
    FALSE,
    TRUE,
    add,
    and_,
    blit,
    bvar,
    eq,
    ge,
    gt,
    ilit,
    implies,
    ite,
    ivar,
    mul,
    not_,
    or_,
    shared,
)

POL = "pol"
MAX = "max"
MP = "mp"

SUM_SHAPE = "sum"
MAX_SHAPE = "max"


class OrderEncodingError(Exception):
    pass


@dataclass(frozen=True)
class CoeffRange:
    kind: str  # "one" | "zero_one" | "one_two" | "pos" | "nat" | "matrix"
    dim: int = 1
    entry: str = "nat"  # matrix entry range

    def excludes_zero(self) -> bool:
        return self.kind in ("one", "one_two", "pos")

    def __str__(self) -> str:
        if self.kind == "matrix":
            entry = "{0,1}" if self.entry == "zero_one" else "nat"
            return f"{entry}^({self.dim}x{self.dim})"
        return {
            "one": "{1}",
            "zero_one": "{0,1}",
            "one_two": "{1,2}",
            "pos": "pos-nat",
            "nat": "nat",
        }[self.kind]


@dataclass(frozen=True)
class ConstRange:
    kind: str  # "zero" | "nat" | "int" | "vec"
    dim: int = 1

    def __str__(self) -> str:
        return {"zero": "{0}", "nat": "nat", "int": "int", "vec": f"nat^{self.dim}"}[self.kind]


@dataclass(frozen=True)
class Bounds:
    nat_max: int = 4
    int_min: int = -4
    pos_max: int = 4


@dataclass(frozen=True)
class OrderParams:
    name: str
    template: str  # POL | MAX | MP
    coeff: CoeffRange
    const: ConstRange
    precedence: str = "none"  # "none" | "quasi" | "strict"
    status: str = "empty"  # "empty" | "total" | "partial"
    collapsing_filter: bool = False
    monotone: bool = False
    admissible_kbo: bool = False
    bounds: Bounds = Bounds()

    def __post_init__(self):
        if self.monotone:
            if not self.coeff.excludes_zero():
                raise ValueError(f"{self.name}: monotone order needs zero-free coefficients")
            if self.status == "partial" or self.collapsing_filter:
                raise ValueError(f"{self.name}: monotone order excludes partial status and filters")
        if self.admissible_kbo:
            if self.template != POL or self.coeff.kind not in ("one", "zero_one", "pos"):
                raise ValueError(f"{self.name}: admissibility needs a linear template with unit-capable coefficients")
        if self.coeff.kind == "matrix" and self.const.kind != "vec":
            raise ValueError(f"{self.name}: matrix coefficients need vector constants")

    @property
    def dim(self) -> int:
        return self.coeff.dim if self.coeff.kind == "matrix" else 1

    def describe(self) -> str:
        bits = [self.template, f"coeff={self.coeff}", f"const={self.const}"]
        if self.precedence != "none":
            bits.append(f"prec={self.precedence}")
        if self.status != "empty":
            bits.append(f"status={self.status}")
        if self.collapsing_filter:
            bits.append("filter")
        if self.monotone:
            bits.append("monotone")
        if self.admissible_kbo:
            bits.append("admissible")
        return f"{self.name}({', '.join(bits)})"


def preset(name: str, dim: int = 2) -> OrderParams:
    """The parameter rows for the classic reduction pairs."""
    key = name.lower().replace("_", "-")
    if key.startswith("matrix"):
        inside = key[len("matrix") :].strip("()")
        if inside:
            dim = int(inside)
        key = "matrix"
    table = {
        "polo-linear-mono": OrderParams(
            "POLO", POL, CoeffRange("pos"), ConstRange("nat"), "none", "empty", monotone=True
        ),
        "lpo-mono": OrderParams("LPO", MAX, CoeffRange("one"), ConstRange("zero"), "quasi", "total", monotone=True),
        "kbo": OrderParams(
            "KBO", POL, CoeffRange("one"), ConstRange("nat"), "quasi", "total", monotone=True, admissible_kbo=True
        ),
        "tkbo": OrderParams(
            "TKBO", POL, CoeffRange("pos"), ConstRange("nat"), "quasi", "total", monotone=True, admissible_kbo=True
        ),
        "polo-linear": OrderParams("POLO", POL, CoeffRange("nat"), ConstRange("nat"), "none", "empty"),
        "maxpolo": OrderParams("MaxPOLO", MP, CoeffRange("nat"), ConstRange("int"), "none", "empty"),
        "lpo-af": OrderParams(
            "LPO", MAX, CoeffRange("zero_one"), ConstRange("zero"), "quasi", "total", collapsing_filter=True
        ),
        "kbo-af": OrderParams(
            "KBO",
            POL,
            CoeffRange("zero_one"),
            ConstRange("nat"),
            "quasi",
            "total",
            collapsing_filter=True,
            admissible_kbo=True,
        ),
        "matrix": OrderParams(
            f"Matrix{dim}", POL, CoeffRange("matrix", dim, "nat"), ConstRange("vec", dim), "none", "empty"
        ),
        "wpo-ms": OrderParams(
            "WPO", MP, CoeffRange("zero_one"), ConstRange("nat"), "quasi", "partial", collapsing_filter=True
        ),
    }
    if key not in table:
        raise ValueError(f"unknown preset {name!r}; known: {', '.join(sorted(table))}")
    return table.get(key)


# ---------------------------------------------------------------------------
# Weight polynomials: max of guarded linear forms over vector components
# ---------------------------------------------------------------------------

Matrix = tuple  # d rows of d Exprs
Vector = tuple  # d Exprs


def zero_vector(d: int) -> Vector:
    return tuple(ilit(0) for _ in range(d))


def identity_matrix(d: int) -> Matrix:
    return tuple(tuple(ilit(1 if i == j else 0) for j in range(d)) for i in range(d))


def mat_vec(m: Matrix, v: Vector) -> Vector:
    return tuple(add(*[mul(m[i][k], v[k]) for k in range(len(v))]) for i in range(len(m)))


def mat_mat(a: Matrix, b: Matrix) -> Matrix:
    d = len(a)
    return tuple(tuple(add(*[mul(a[i][k], b[k][j]) for k in range(d)]) for j in range(d)) for i in range(d))


def vec_add(a: Vector, b: Vector) -> Vector:
    return tuple(add(x, y) for x, y in zip(a, b))


@dataclass(frozen=True)
class Branch:
    guard: Expr
    const: Vector
    coeffs: tuple  # sorted tuple of (var name, Matrix)


def _merge_coeffs(parts: list[tuple]) -> tuple:
    acc: dict = {}
    for coeffs in parts:
        for x, m in coeffs:
            if x in acc:
                acc[x] = tuple(tuple(add(a, b) for a, b in zip(ra, rb)) for ra, rb in zip(acc[x], m))
            else:
                acc[x] = m
    return tuple(sorted(acc.items()))


MAX_BRANCHES = 512


# ---------------------------------------------------------------------------
# Template environment
# ---------------------------------------------------------------------------


class VarPool:
    def __init__(self, names: smt.FreshNames, nonlinear: bool = False):
        self.names = names
        self.nonlinear = nonlinear
        self.decls: list[tuple[str, str]] = []
        self.range_asserts: list[Expr] = []
        self.int_vars: list[str] = []
        self.bool_vars: list[str] = []

    def int_var(self, name: str, lo: Optional[int], hi: Optional[int]) -> Expr:
        self.decls.append((name, smt.INT))
        self.int_vars.append(name)
        v = ivar(name)
        if lo is not None:
            self.range_asserts.append(ge(v, ilit(lo)))
        if hi is not None:
            self.range_asserts.append(smt.le(v, ilit(hi)))
        return v

    def bool_var(self, name: str) -> Expr:
        self.decls.append((name, smt.BOOL))
        self.bool_vars.append(name)
        return bvar(name)

    def value_tree(self, values: list[int], prefix: str) -> Expr:
        """A coefficient expression ranging over the given values.

        Rendered as an ite-tree over fresh booleans so products stay
        linearizable; in nonlinear mode a plain bounded integer variable.
        """
        if len(values) == 1:
            return ilit(values[0])
        if self.nonlinear:
            return self.int_var(self.names.next(prefix), min(values), max(values))
        mid = len(values) // 2
        b = self.bool_var(self.names.next(prefix))
        return ite(b, self.value_tree(values[mid:], prefix), self.value_tree(values[:mid], prefix))


@dataclass
class SymbolTemplate:
    sym: Symbol
    shape: str  # SUM_SHAPE | MAX_SHAPE
    const: Vector  # w_f (sum shape / constants)
    max_consts: list  # p_{f,i} vectors (max shape)
    coeffs: list  # c_{f,i} matrices
    prec: Expr
    status: list  # status[k][i] boolean: slot k holds argument i ([] when empty)
    collapse: list  # col_{f,i} booleans ([] when no filter)
    not_collapsed: Expr


class TemplateEnv:
    """All template/precedence/status/filter variables for one technique."""

    def __init__(self, symbols: list[Symbol], params: OrderParams, shapes: dict, names: smt.FreshNames | None = None, nonlinear: bool = False):
        self.params = params
        self.names = names or smt.FreshNames()
        self.pool = VarPool(self.names, nonlinear)
        self.d = params.dim
        self.var_base = 1 if params.admissible_kbo else 0
        self.symbols = list(symbols)
        self.templates: dict[Symbol, SymbolTemplate] = {}
        self.struct_asserts: list[Expr] = []
        self._shared_cache: dict = {}
        b = params.bounds
        nsym = max(len(self.symbols), 1)
        for k, sym in enumerate(self.symbols):
            shape = shapes.get(sym, SUM_SHAPE)
            if sym.arity == 0:
                shape = SUM_SHAPE
            self.templates[sym] = self._build_symbol(k, sym, shape, nsym)
        self._admissibility()

    # -- construction --------------------------------------------------------

    def _const_vector(self, base: str) -> Vector:
        p, b = self.params, self.params.bounds
        if p.const.kind == "zero":
            return zero_vector(self.d)
        if p.const.kind == "int":
            return (self.pool.int_var(base, b.int_min, b.nat_max),)
        if p.const.kind == "vec":
            return tuple(self.pool.int_var(f"{base}_{i}", 0, b.nat_max) for i in range(self.d))
        return (self.pool.int_var(base, 0, b.nat_max),)

    def _coeff_matrix(self, k: int, i: int) -> Matrix:
        p, b = self.params, self.params.bounds
        kind = p.coeff.kind
        if kind == "matrix":
            entry_vals = [0, 1] if p.coeff.entry == "zero_one" else list(range(0, b.nat_max + 1))
            return tuple(
                tuple(self.pool.value_tree(entry_vals, f"_c{k}_{i}r{r}c{c}_") for c in range(self.d))
                for r in range(self.d)
            )
        values = {
            "one": [1],
            "zero_one": [0, 1],
            "one_two": [1, 2],
            "pos": list(range(1, b.pos_max + 1)),
            "nat": list(range(0, b.nat_max + 1)),
        }[kind]
        return (( self.pool.value_tree(values, f"_c{k}_{i}_"),),)

    def _build_symbol(self, k: int, sym: Symbol, shape: str, nsym: int) -> SymbolTemplate:
        p = self.params
        n = sym.arity
        coeffs = [self._coeff_matrix(k, i) for i in range(n)]
        if shape == MAX_SHAPE and n >= 1:
            const = zero_vector(self.d)
            max_consts = [self._const_vector(f"_p{k}_{i}") for i in range(n)]
        else:
            const = self._const_vector(f"_w{k}")
            max_consts = []
        if p.precedence == "none":
            prec = ilit(0)
        else:
            prec = self.pool.int_var(f"_pr{k}", 0, nsym - 1)
        status: list = []
        if p.status != "empty" and n >= 1:
            status = [[self.pool.bool_var(f"_st{k}_{slot}_{i}") for i in range(n)] for slot in range(n)]
            for slot in range(n):
                row = status[slot]
                for a, b2 in itertools.combinations(row, 2):
                    self.struct_asserts.append(or_(not_(a), not_(b2)))
            for i in range(n):
                col = [status[slot][i] for slot in range(n)]
                for a, b2 in itertools.combinations(col, 2):
                    self.struct_asserts.append(or_(not_(a), not_(b2)))
            if p.status == "total":
                for slot in range(n):
                    self.struct_asserts.append(or_(*status[slot]))
                for i in range(n):
                    self.struct_asserts.append(or_(*[status[slot][i] for slot in range(n)]))
            else:
                # filled slots form a prefix, so lexicographic slots are dense
                for slot in range(n - 1):
                    self.struct_asserts.append(implies(or_(*status[slot + 1]), or_(*status[slot])))
        collapse: list = []
        not_collapsed: Expr = TRUE
        if p.collapsing_filter and n >= 1:
            nc = self.pool.bool_var(f"_nc{k}")
            collapse = [self.pool.bool_var(f"_col{k}_{i}") for i in range(n)]
            options = [nc] + collapse
            self.struct_asserts.append(or_(*options))
            for a, b2 in itertools.combinations(options, 2):
                self.struct_asserts.append(or_(not_(a), not_(b2)))
            not_collapsed = nc
        return SymbolTemplate(sym, shape, const, max_consts, coeffs, prec, status, collapse, not_collapsed)

    def _admissibility(self) -> None:
        if not self.params.admissible_kbo:
            return
        # unit weight 1: constants weigh at least the unit; a weight-zero
        # unary symbol must be maximal in the precedence
        for sym, tpl in self.templates.items():
            if sym.arity == 0:
                self.struct_asserts.append(ge(tpl.const[0], ilit(1)))
            elif sym.arity == 1:
                maximal = and_(*[ge(tpl.prec, other.prec) for other in self.templates.values()])
                self.struct_asserts.append(implies(eq(tpl.const[0], ilit(0)), maximal))

    # -- shared helpers ------------------------------------------------------

    def share(self, key, expr: Expr) -> Expr:
        if smt.expr_size(expr) <= 3 or expr.op in ("bool", "int", "var", "shared"):
            return expr
        cached = self._shared_cache.get(key)
        if cached is None:
            cached = shared(self.names.next("_v"), expr)
            self._shared_cache[key] = cached
        return cached

    def in_status(self, sym: Symbol, i: int) -> Expr:
        tpl = self.templates[sym]
        if not tpl.status:
            return FALSE
        return self.share(("inst", sym, i), or_(*[tpl.status[slot][i] for slot in range(sym.arity)]))

    def slot_filled(self, sym: Symbol, slot: int) -> Expr:
        tpl = self.templates[sym]
        if not tpl.status or slot >= sym.arity:
            return FALSE
        return self.share(("fill", sym, slot), or_(*tpl.status[slot]))

    def prec_gt(self, f: Symbol, g: Symbol) -> Expr:
        return gt(self.templates[f].prec, self.templates[g].prec)

    def prec_eq(self, f: Symbol, g: Symbol) -> Expr:
        return eq(self.templates[f].prec, self.templates[g].prec)


# ---------------------------------------------------------------------------
# Shape selection for the mixed template
# ---------------------------------------------------------------------------


def choose_shapes_amp(pairs, rules: Trs) -> dict:
    """Assign the max shape to symbols whose argument duplication would force
    a coefficient-sum constraint on the weaker side of some rule.

    Trigger: a right-hand-side subterm g(t1..tn) where some variable occurs in
    more argument positions of g than it occurs in the whole left-hand side.
    Unary symbols and constants always get the sum shape.
    """
    shapes: dict = {}
    all_rules = list(pairs) + list(rules.rules)
    for rule in all_rules:
        lhs_occ: dict = {}
        stack = [rule.lhs]
        while stack:
            u = stack.pop()
            if isinstance(u, Var):
                lhs_occ[u.name] = lhs_occ.get(u.name, 0) + 1
            else:
                stack.extend(u.args)
        stack = [rule.rhs]
        while stack:
            u = stack.pop()
            if isinstance(u, Var):
                continue
            stack.extend(u.args)
            if u.sym.arity < 2:
                continue
            for x in variables(u):
                spread = sum(1 for a in u.args if x in variables(a))
                if spread > lhs_occ.get(x, 0):
                    shapes[u.sym] = MAX_SHAPE
                    break
    return shapes


def shapes_for(params: OrderParams, pairs, rules: Trs, symbols) -> dict:
    if params.template == POL:
        return {s: SUM_SHAPE for s in symbols}
    if params.template == MAX:
        return {s: (MAX_SHAPE if s.arity >= 1 else SUM_SHAPE) for s in symbols}
    chosen = choose_shapes_amp(pairs, rules)
    return {s: chosen.get(s, SUM_SHAPE) for s in symbols}


# ---------------------------------------------------------------------------
# WPO encoder
# ---------------------------------------------------------------------------


class WpoEncoder:
    def __init__(self, env: TemplateEnv):
        self.env = env
        self._weights: dict = {}
        self._cmp_memo: dict = {}
        self._wcmp_memo: dict = {}

    # -- weights -------------------------------------------------------------

    def weight(self, t: Term) -> tuple:
        got = self._weights.get(t)
        if got is not None:
            return got
        env = self.env
        d = env.d
        if isinstance(t, Var):
            const = list(zero_vector(d))
            const[0] = ilit(env.var_base)
            out = (Branch(TRUE, tuple(const), ((t.name, identity_matrix(d)),)),)
        else:
            tpl = env.templates[t.sym]
            branches: list[Branch] = []
            if tpl.collapse:
                for i, col in enumerate(tpl.collapse):
                    for br in self.weight(t.args[i]):
                        branches.append(Branch(and_(col, br.guard), br.const, br.coeffs))
            base = tpl.not_collapsed
            arg_branches = [self.weight(a) for a in t.args]
            if tpl.shape == MAX_SHAPE and t.sym.arity >= 1:
                for i in range(t.sym.arity):
                    ci = tpl.coeffs[i]
                    pi = tpl.max_consts[i]
                    for br in arg_branches[i]:
                        const = vec_add(pi, mat_vec(ci, br.const))
                        coeffs = tuple((x, mat_mat(ci, m)) for x, m in br.coeffs)
                        branches.append(Branch(and_(base, br.guard), const, coeffs))
            else:
                for combo in itertools.product(*arg_branches):
                    const = tpl.const
                    coeff_parts = []
                    guard = base
                    for i, br in enumerate(combo):
                        ci = tpl.coeffs[i]
                        const = vec_add(const, mat_vec(ci, br.const))
                        coeff_parts.append(tuple((x, mat_mat(ci, m)) for x, m in br.coeffs))
                        guard = and_(guard, br.guard)
                    branches.append(Branch(guard, const, _merge_coeffs(coeff_parts)))
            if env.params.const.kind == "int":
                # negative constants: the interpretation is max(0, ...)
                branches.append(Branch(base, zero_vector(d), ()))
            if len(branches) > MAX_BRANCHES:
                raise OrderEncodingError(f"weight of {t} explodes to {len(branches)} branches")
            out = tuple(branches)
        self._weights[t] = out
        return out

    def _dominates(self, s: Branch, t: Branch, strict: bool) -> Expr:
        parts = []
        for i, (a, b) in enumerate(zip(s.const, t.const)):
            parts.append(gt(a, b) if strict and i == 0 else ge(a, b))
        svars = dict(s.coeffs)
        tvars = dict(t.coeffs)
        d = self.env.d
        zero = tuple(tuple(ilit(0) for _ in range(d)) for _ in range(d))
        for x in sorted(set(svars) | set(tvars)):
            ms = svars.get(x, zero)
            mt = tvars.get(x, zero)
            for r in range(d):
                for c in range(d):
                    parts.append(ge(ms[r][c], mt[r][c]))
        return and_(*parts)

    def weight_cmp(self, s: Term, t: Term, strict: bool) -> Expr:
        key = (s, t, strict)
        got = self._wcmp_memo.get(key)
        if got is not None:
            return got
        sb = self.weight(s)
        tb = self.weight(t)
        conjuncts = []
        for tau in tb:
            options = [and_(sigma.guard, self._dominates(sigma, tau, strict)) for sigma in sb]
            conjuncts.append(implies(tau.guard, or_(*options)))
        out = self.env.share(("wcmp", key), and_(*conjuncts))
        self._wcmp_memo[key] = out
        return out

    # -- path comparison ------------------------------------------------------

    def compare(self, s: Term, t: Term, strict: bool) -> Expr:
        """GE(s, t) or GT(s, t) with collapsing filters unwrapped first."""
        key = (s, t, strict)
        got = self._cmp_memo.get(key)
        if got is not None:
            return got
        env = self.env
        alts: list[Expr] = []
        s_tpl = env.templates[s.sym] if isinstance(s, App) else None
        t_tpl = env.templates[t.sym] if isinstance(t, App) else None
        if s_tpl is not None and s_tpl.collapse:
            for i, col in enumerate(s_tpl.collapse):
                alts.append(and_(col, self.compare(s.args[i], t, strict)))
        if t_tpl is not None and t_tpl.collapse:
            for j, col in enumerate(t_tpl.collapse):
                alts.append(and_(col, self.compare(s, t.args[j], strict)))
        nc = and_(
            s_tpl.not_collapsed if s_tpl is not None else TRUE,
            t_tpl.not_collapsed if t_tpl is not None else TRUE,
        )
        core = or_(
            self.weight_cmp(s, t, True),
            and_(self.weight_cmp(s, t, False), self._rest(s, t, strict)),
        )
        alts.append(and_(nc, core))
        out = env.share(("cmp", key), or_(*alts))
        self._cmp_memo[key] = out
        return out

    def _rest(self, s: Term, t: Term, strict: bool) -> Expr:
        env = self.env
        if not strict and s == t:
            return TRUE
        rest_gt: Expr = FALSE
        if isinstance(s, App):
            f = s.sym
            sub = or_(*[and_(env.in_status(f, i), self.compare(s.args[i], t, False)) for i in range(f.arity)])
            if isinstance(t, App):
                g = t.sym
                args_part = and_(
                    *[implies(env.in_status(g, j), self.compare(s, t.args[j], True)) for j in range(g.arity)]
                )
                prec_part = or_(
                    env.prec_gt(f, g),
                    and_(env.prec_eq(f, g), self._lex(s, t, True)),
                )
                rest_gt = or_(sub, and_(args_part, prec_part))
            else:
                rest_gt = sub
        if strict:
            return rest_gt
        if isinstance(s, App) and isinstance(t, App):
            return or_(rest_gt, and_(env.prec_eq(s.sym, t.sym), self._lex(s, t, False)))
        return rest_gt

    def _lex(self, s: App, t: App, strict: bool) -> Expr:
        env = self.env
        f, g = s.sym, t.sym
        tpl_f, tpl_g = env.templates[f], env.templates[g]
        kmax = max(f.arity, g.arity)

        def at(k: int) -> Expr:
            if k >= kmax:
                return FALSE if strict else TRUE
            fill_f = env.slot_filled(f, k)
            fill_g = env.slot_filled(g, k)
            pairs = []
            if tpl_f.status and tpl_g.status and k < f.arity and k < g.arity:
                nxt = at(k + 1)
                for i in range(f.arity):
                    for j in range(g.arity):
                        step = or_(
                            self.compare(s.args[i], t.args[j], True),
                            and_(self.compare(s.args[i], t.args[j], False), nxt),
                        )
                        pairs.append(and_(tpl_f.status[k][i], tpl_g.status[k][j], step))
            body = or_(not_(fill_g), or_(*pairs))
            if strict:
                return and_(fill_f, body)
            return body

        return at(0)


# ---------------------------------------------------------------------------
# Reduction-pair constraint builder
# ---------------------------------------------------------------------------


def problem_symbols(rules: Trs, pairs) -> list[Symbol]:
    seen: dict = {}
    for r in list(rules.rules) + list(pairs):
        for t in (r.lhs, r.rhs):
            stack = [t]
            while stack:
                u = stack.pop(0)
                if isinstance(u, App):
                    seen.setdefault(u.sym, None)
                    stack.extend(u.args)
    return list(seen)


class ReductionPairEncoder:
    """Builds the init script (guarded weak decreases + ranges) and per-SCC
    scripts (weak pair decreases, the strict disjunction, usability forcing)
    for one parameterized order over one rule set."""

    def __init__(self, rules: Trs, all_pairs, params: OrderParams, nonlinear: bool = False):
        self.rules = rules
        self.params = params
        self.nonlinear = nonlinear
        self.names = smt.FreshNames()
        symbols = problem_symbols(rules, all_pairs)
        shapes = shapes_for(params, all_pairs, rules, symbols)
        self.env = TemplateEnv(symbols, params, shapes, self.names, nonlinear)
        self.wpo = WpoEncoder(self.env)
        self.usable_vars = {r.rid: bvar(f"_u{r.rid}") for r in rules.rules}
        self._scc_counter = 0
        self._lin_memo: dict = {}

    def _linearize(self, e: Expr) -> Expr:
        return smt.linearize(e, self.names, nonlinear_ok=self.nonlinear, memo=self._lin_memo)

    def init_decls(self) -> list[tuple[str, str]]:
        decls = list(self.env.pool.decls)
        decls.extend((f"_u{r.rid}", smt.BOOL) for r in self.rules.rules)
        return decls

    def init_asserts(self) -> list[Expr]:
        out = [self._linearize(e) for e in self.env.pool.range_asserts]
        out.extend(self._linearize(e) for e in self.env.struct_asserts)
        if self.params.precedence == "strict":
            tpls = list(self.env.templates.values())
            for a, b in itertools.combinations(tpls, 2):
                out.append(not_(eq(a.prec, b.prec)))
        for r in self.rules.rules:
            weak = self.wpo.compare(r.lhs, r.rhs, strict=False)
            out.append(self._linearize(implies(self.usable_vars[r.rid], weak)))
        return out

    def scc_asserts(self, pairs, usable_ids, pairs_are_rules: bool = False):
        """Returns (assert list, {pair index -> strict indicator name})."""
        self._scc_counter += 1
        out: list[Expr] = []
        for r in self.rules.rules:
            u = self.usable_vars[r.rid]
            out.append(u if r.rid in usable_ids else not_(u))
        strict_names: dict[int, str] = {}
        strict_vars = []
        for idx, p in enumerate(pairs):
            if not pairs_are_rules:
                out.append(self._linearize(self.wpo.compare(p.lhs, p.rhs, strict=False)))
            name = self.names.next("_v")
            indicator = shared(name, self._linearize(self.wpo.compare(p.lhs, p.rhs, strict=True)))
            strict_names[idx] = name
            strict_vars.append(indicator)
        out.append(or_(*strict_vars))
        return out, strict_names

    def model_var_names(self) -> list[str]:
        return self.env.pool.int_vars + self.env.pool.bool_vars + [f"_u{r.rid}" for r in self.rules.rules]


# ---------------------------------------------------------------------------
# Public single-term weight encoding (expression form)
# ---------------------------------------------------------------------------


def encode_weight(t: Term, env: TemplateEnv) -> Expr:
    """The weight of t as one integer expression; term variables become SMT
    integer variables of the same name (scalar interpretations only).

    The max operator is eliminated with ite chains, so the result evaluates
    to the true maximum under every assignment.
    """
    if env.d != 1:
        raise OrderEncodingError("expression form is defined for scalar interpretations")
    enc = WpoEncoder(env)
    branches = enc.weight(t)

    def branch_expr(br: Branch) -> Expr:
        terms = [br.const[0]]
        for x, m in br.coeffs:
            terms.append(mul(m[0][0], ivar(x)))
        return add(*terms)

    exprs = [branch_expr(br) for br in branches if not smt.is_false(br.guard)]
    out = exprs[0]
    for e in exprs[1:]:
        out = ite(ge(out, e), out, e)
    return out


# ---------------------------------------------------------------------------
# Decoded concrete orders
# ---------------------------------------------------------------------------


@dataclass
class ConcreteSymbol:
    shape: str
    const: tuple  # int vector
    max_consts: list  # per-argument int vectors (max shape)
    coeffs: list  # per-argument int matrices
    prec: int
    status: list  # argument indices in slot order
    collapse: Optional[int]


@dataclass
class ConcreteOrder:
    dim: int
    var_base: int
    symbols: dict  # Symbol -> ConcreteSymbol
    usable: set
    model: dict

    # -- filters -------------------------------------------------------------

    def filtered(self, t: Term) -> Term:
        if isinstance(t, Var):
            return t
        args = tuple(self.filtered(a) for a in t.args)
        info = self.symbols[t.sym]
        if info.collapse is not None:
            return args[info.collapse]
        return App(t.sym, args)

    # -- weights -------------------------------------------------------------

    def weight_branches(self, t: Term) -> list:
        """Branches (const vector, {var: matrix}) of the filtered term."""
        d = self.dim
        if isinstance(t, Var):
            const = [0] * d
            const[0] = self.var_base
            ident = tuple(tuple(1 if i == j else 0 for j in range(d)) for i in range(d))
            return [(tuple(const), {t.name: ident})]
        info = self.symbols[t.sym]
        arg_branches = [self.weight_branches(a) for a in t.args]

        def m_vec(m, v):
            return tuple(sum(m[i][k] * v[k] for k in range(d)) for i in range(d))

        def m_mat(a, b):
            return tuple(tuple(sum(a[i][k] * b[k][j] for k in range(d)) for j in range(d)) for i in range(d))

        out = []
        if info.shape == MAX_SHAPE and t.sym.arity >= 1:
            for i in range(t.sym.arity):
                for const, coeffs in arg_branches[i]:
                    c2 = tuple(x + y for x, y in zip(info.max_consts[i], m_vec(info.coeffs[i], const)))
                    out.append((c2, {x: m_mat(info.coeffs[i], m) for x, m in coeffs.items()}))
        else:
            for combo in itertools.product(*arg_branches):
                const = list(info.const)
                coeffs: dict = {}
                for i, (bc, bcf) in enumerate(combo):
                    mv = m_vec(info.coeffs[i], bc)
                    const = [x + y for x, y in zip(const, mv)]
                    for x, m in bcf.items():
                        mm = m_mat(info.coeffs[i], m)
                        if x in coeffs:
                            coeffs[x] = tuple(
                                tuple(a + b for a, b in zip(ra, rb)) for ra, rb in zip(coeffs[x], mm)
                            )
                        else:
                            coeffs[x] = mm
                out.append((tuple(const), coeffs))
        if self.negative_consts:
            out.append((tuple([0] * d), {}))
        return out

    negative_consts: bool = False

    def weight_cmp(self, s: Term, t: Term, strict: bool) -> bool:
        sb = self.weight_branches(s)
        tb = self.weight_branches(t)
        d = self.dim
        zero = tuple(tuple(0 for _ in range(d)) for _ in range(d))

        def dominates(a, b):
            (ca, fa), (cb, fb) = a, b
            if strict and not ca[0] > cb[0]:
                return False
            if any(x < y for x, y in zip(ca, cb)):
                return False
            for x in set(fa) | set(fb):
                ma, mb = fa.get(x, zero), fb.get(x, zero)
                for r in range(d):
                    if any(ma[r][c] < mb[r][c] for c in range(d)):
                        return False
            return True

        return all(any(dominates(sigma, tau) for sigma in sb) for tau in tb)

    def weight_value(self, t: Term, assignment: dict) -> tuple:
        """True (max-evaluated) weight vector of the filtered term; variable
        values are scalars lifted to constant vectors."""
        d = self.dim
        best = None
        for const, coeffs in self.weight_branches(t):
            val = list(const)
            for x, m in coeffs.items():
                xv = assignment.get(x, 0)
                for i in range(d):
                    val[i] += sum(m[i][k] * xv for k in range(d))
            if best is None or val[0] > best[0]:
                best = val
        return tuple(best)

    # -- path recursion --------------------------------------------------------

    def gt(self, s: Term, t: Term) -> bool:
        return self._cmp(self.filtered(s), self.filtered(t), True)

    def ge(self, s: Term, t: Term) -> bool:
        return self._cmp(self.filtered(s), self.filtered(t), False)

    def _status(self, sym: Symbol) -> list:
        return self.symbols[sym].status

    def _cmp(self, s: Term, t: Term, strict: bool) -> bool:
        if self.weight_cmp(s, t, True):
            return True
        if not self.weight_cmp(s, t, False):
            return False
        return self._rest(s, t, strict)

    def _rest(self, s: Term, t: Term, strict: bool) -> bool:
        if not strict and s == t:
            return True
        if isinstance(s, Var):
            return False
        f = s.sym
        if any(self._cmp(s.args[i], t, False) for i in self._status(f)):
            return True
        if isinstance(t, Var):
            return False
        g = t.sym
        pf, pg = self.symbols[f].prec, self.symbols[g].prec
        if not strict and pf == pg and self._lex(s, t, False):
            return True
        if all(self._cmp(s, t.args[j], True) for j in self._status(g)):
            if pf > pg:
                return True
            if pf == pg and self._lex(s, t, True):
                return True
        return False

    def _lex(self, s: App, t: App, strict: bool) -> bool:
        ss = [s.args[i] for i in self._status(s.sym)]
        ts = [t.args[j] for j in self._status(t.sym)]
        while True:
            if not ts:
                return bool(ss) if strict else True
            if not ss:
                return False
            if self._cmp(ss[0], ts[0], True):
                return True
            if not self._cmp(ss[0], ts[0], False):
                return False
            ss, ts = ss[1:], ts[1:]

    # -- rendering -------------------------------------------------------------

    def describe(self) -> list[str]:
        out = []
        for sym, info in sorted(self.symbols.items(), key=lambda kv: str(kv[0])):
            args = [f"x{i+1}" for i in range(sym.arity)]
            if info.collapse is not None:
                interp = args[info.collapse]
            elif info.shape == MAX_SHAPE and sym.arity >= 1:
                parts = [
                    f"max({', '.join(self._lin_str(info.max_consts[i], info.coeffs[i], args[i]) for i in range(sym.arity))})"
                ]
                interp = parts[0]
            else:
                terms = []
                for i in range(sym.arity):
                    terms.append(self._lin_str(None, info.coeffs[i], args[i]))
                base = _vec_str(info.const)
                terms = [t for t in terms if t != "0"]
                interp = " + ".join([base] + terms) if terms else base
            bits = [f"w[{sym}({', '.join(args)})] = {interp}" if args else f"w[{sym}] = {interp}"]
            if info.prec:
                bits.append(f"prec {info.prec}")
            if info.status and sym.arity:
                bits.append(f"status {[i + 1 for i in info.status]}")
            out.append("; ".join(bits))
        return out

    def _lin_str(self, const, matrix, var: str) -> str:
        if self.dim == 1:
            c = matrix[0][0]
            body = "0" if c == 0 else (var if c == 1 else f"{c}*{var}")
            if const is not None and any(const):
                return str(const[0]) if c == 0 else f"{const[0]} + {body}"
            return body
        body = f"{_mat_str(matrix)}*{var}"
        if const is not None and any(const):
            return f"{_vec_str(const)} + {body}"
        return body


def _vec_str(v) -> str:
    return str(v[0]) if len(v) == 1 else "(" + ",".join(str(x) for x in v) + ")"


def _mat_str(m) -> str:
    return "[" + ";".join(",".join(str(x) for x in row) for row in m) + "]"


def decode_model(values: dict, encoder: ReductionPairEncoder) -> ConcreteOrder:
    """Turn a get-value answer for all template variables into a concrete,
    solver-free order."""
    env = encoder.env

    def ev(e: Expr):
        return smt.eval_expr(e, values)

    symbols: dict = {}
    for sym, tpl in env.templates.items():
        status: list = []
        if tpl.status:
            for slot in range(sym.arity):
                hit = [i for i in range(sym.arity) if ev(tpl.status[slot][i])]
                if hit:
                    status.append(hit[0])
        collapse = None
        if tpl.collapse and not ev(tpl.not_collapsed):
            collapse = next(i for i, col in enumerate(tpl.collapse) if ev(col))
        symbols[sym] = ConcreteSymbol(
            shape=tpl.shape,
            const=tuple(ev(c) for c in tpl.const),
            max_consts=[tuple(ev(c) for c in vec) for vec in tpl.max_consts],
            coeffs=[tuple(tuple(ev(e) for e in row) for row in m) for m in tpl.coeffs],
            prec=ev(tpl.prec),
            status=status,
            collapse=collapse,
        )
    usable = {r.rid for r in encoder.rules.rules if values.get(f"_u{r.rid}", False)}
    order = ConcreteOrder(
        dim=env.d,
        var_base=env.var_base,
        symbols=symbols,
        usable=usable,
        model=dict(values),
    )
    order.negative_consts = env.params.const.kind == "int"
    return order

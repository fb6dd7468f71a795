"""The bundled SMT-LIB solver gets its own checks: protocol behavior, small
satisfiability facts, and a randomized differential test against direct
expression evaluation."""

import itertools
import random
import subprocess
import sys

import pytest

from trsterm import smt
from trsterm.minismt import Lin, LinChecker, MiniSmt, SexprReader


def make():
    solver = MiniSmt(check_seconds=10)
    reader = SexprReader()

    def run(txt):
        out = []
        for sx in reader.feed(txt):
            out.append(solver.execute(sx))
        return out[-1] if out else ""

    return solver, run


def test_protocol_success_and_echo():
    solver, run = make()
    assert run("(set-option :print-success true)") == "success"
    assert run("(set-logic QF_LIA)") == "success"
    assert run('(echo "hello")') == "hello"


def test_basic_sat_unsat():
    solver, run = make()
    run("(set-logic QF_LIA)")
    run("(declare-fun x () Int)")
    run("(assert (>= x 2))")
    run("(assert (<= x 2))")
    assert run("(check-sat)") == "sat"
    assert run("(get-value (x))") == "((x 2))"
    run("(assert (>= x 3))")
    assert run("(check-sat)") == "unsat"


def test_push_pop_scoping():
    solver, run = make()
    run("(declare-fun x () Int)")
    run("(assert (>= x 0)) (assert (<= x 5))")
    run("(push 1)")
    run("(assert (>= x 6))")
    assert run("(check-sat)") == "unsat"
    run("(pop 1)")
    assert run("(check-sat)") == "sat"


def test_define_fun_macros_share():
    solver, run = make()
    run("(declare-fun w () Int) (declare-fun b () Bool)")
    run("(define-fun v () Int (+ w (ite b 2 1)))")
    run("(assert (= v 5)) (assert (not b))")
    assert run("(check-sat)") == "sat"
    assert run("(get-value (w v b))") == "((w 4) (v 5) (b false))"


def test_reset_clears_everything():
    solver, run = make()
    run("(declare-fun x () Int) (assert (>= x 1)) (assert (<= x 0))")
    assert run("(check-sat)") == "unsat"
    run("(reset)")
    run("(declare-fun x () Int) (assert (>= x 1))")
    assert run("(check-sat)") == "sat"


def test_let_binding():
    solver, run = make()
    run("(declare-fun x () Int)")
    run("(assert (let ((y (+ x 1))) (= y 3)))")
    assert run("(check-sat)") == "sat"
    assert run("(get-value (x))") == "((x 2))"


def test_unknown_identifier_is_an_error():
    from trsterm.minismt import SmtInputError

    solver, run = make()
    with pytest.raises(SmtInputError):
        run("(assert (>= nope 0))")


def test_process_interface_end_to_end():
    script = (
        "(set-option :print-success true)\n"
        "(set-logic QF_LIA)\n"
        "(declare-fun x () Int)\n"
        "(assert (and (>= x (- 3)) (<= x (- 1))))\n"
        "(check-sat)\n"
        "(get-value (x))\n"
        "(exit)\n"
    )
    proc = subprocess.run(
        [sys.executable, "-m", "trsterm.minismt"],
        input=script,
        capture_output=True,
        text=True,
        timeout=60,
    )
    lines = proc.stdout.splitlines()
    assert lines.count("success") == 4
    assert "sat" in lines
    assert any(line.startswith("((x (- ") for line in lines)


def test_error_reporting_through_process():
    proc = subprocess.run(
        [sys.executable, "-m", "trsterm.minismt"],
        input="(assert (>= mystery 0))\n(exit)\n",
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert "(error" in proc.stdout


def test_lin_checker_finds_core():
    # x >= 3 and x <= 1 conflict
    cons = [Lin(((0, 1),), -3), Lin(((0, -1),), 1), Lin(((1, 1),), 0)]
    model, core = LinChecker(cons).solve()
    assert model is None
    assert core == {0, 1}


def test_lin_checker_solves_bounded_system():
    # 0 <= x,y <= 4, x + y >= 7, x <= y
    cons = [
        Lin(((0, 1),), 0),
        Lin(((0, -1),), 4),
        Lin(((1, 1),), 0),
        Lin(((1, -1),), 4),
        Lin(((0, 1), (1, 1)), -7),
        Lin(((0, -1), (1, 1)), 0),
    ]
    model, core = LinChecker(cons).solve()
    assert core is None
    x, y = model[0], model[1]
    assert 0 <= x <= 4 and 0 <= y <= 4 and x + y >= 7 and x <= y


def random_expr(rng, ivars, bvars, depth, want_bool):
    if want_bool:
        if depth <= 0:
            return smt.bvar(rng.choice(bvars)) if rng.random() < 0.7 else smt.blit(rng.random() < 0.5)
        k = rng.randrange(8)
        if k == 0:
            return smt.and_(random_expr(rng, ivars, bvars, depth - 1, True), random_expr(rng, ivars, bvars, depth - 1, True))
        if k == 1:
            return smt.or_(random_expr(rng, ivars, bvars, depth - 1, True), random_expr(rng, ivars, bvars, depth - 1, True))
        if k == 2:
            return smt.not_(random_expr(rng, ivars, bvars, depth - 1, True))
        if k == 3:
            return smt.implies(random_expr(rng, ivars, bvars, depth - 1, True), random_expr(rng, ivars, bvars, depth - 1, True))
        if k == 4:
            return smt.ite(
                random_expr(rng, ivars, bvars, depth - 1, True),
                random_expr(rng, ivars, bvars, depth - 1, True),
                random_expr(rng, ivars, bvars, depth - 1, True),
            )
        op = rng.choice([smt.ge, smt.gt, smt.le, smt.eq])
        return op(random_expr(rng, ivars, bvars, depth - 1, False), random_expr(rng, ivars, bvars, depth - 1, False))
    if depth <= 0:
        if rng.random() < 0.4:
            return smt.ivar(rng.choice(ivars))
        return smt.ilit(rng.randrange(-3, 4))
    k = rng.randrange(4)
    if k == 0:
        return smt.add(random_expr(rng, ivars, bvars, depth - 1, False), random_expr(rng, ivars, bvars, depth - 1, False))
    if k == 1:
        return smt.sub(random_expr(rng, ivars, bvars, depth - 1, False), random_expr(rng, ivars, bvars, depth - 1, False))
    if k == 2:
        return smt.mul(smt.ilit(rng.randrange(-2, 3)), random_expr(rng, ivars, bvars, depth - 1, False))
    return smt.ite(
        random_expr(rng, ivars, bvars, depth - 1, True),
        random_expr(rng, ivars, bvars, depth - 1, False),
        random_expr(rng, ivars, bvars, depth - 1, False),
    )


def test_differential_against_direct_evaluation():
    ivars = ["x", "y", "z"]
    bvars = ["p", "q"]
    for trial in range(400):
        rng = random.Random(trial)
        e = random_expr(rng, ivars, bvars, 4, True)
        solver, run = make()
        run("(set-logic QF_LIA)")
        for v in ivars:
            run(f"(declare-fun {v} () Int)")
            run(f"(assert (>= {v} (- 4))) (assert (<= {v} 4))")
        for v in bvars:
            run(f"(declare-fun {v} () Bool)")
        run(f"(assert {smt.print_smtlib(e)})")
        answer = run("(check-sat)")
        if answer == "sat":
            model = {v: solver._eval(solver.env.lookup(v)[1]) for v in ivars + bvars}
            assert smt.eval_expr(e, model) is True, f"bad model on trial {trial}"
            assert all(-4 <= model[v] <= 4 for v in ivars)
        else:
            assert answer == "unsat"
            found = any(
                smt.eval_expr(e, dict(zip(ivars, vals)) | dict(zip(bvars, bs))) is True
                for vals in itertools.product(range(-4, 5), repeat=3)
                for bs in itertools.product([False, True], repeat=2)
            )
            assert not found, f"false unsat on trial {trial}"

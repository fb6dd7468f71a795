"""Command line driver.

    trsterm [FILE] [OPTION]... [PROCESSOR]...

The input system is read from FILE or standard input.  Each PROCESSOR is an
order name (POLO, MAX, LPO, KBO, TKBO, MAXPOLO, WPO, MATRIX), possibly
followed by key=value options, or UNCURRY, EDG, or LOOP.  Orders before EDG
run as rule removal and must be monotone; orders after EDG run as
reduction-pair processors on each SCC.  Without processors the default
strategy applies.

The first output line is YES, NO, or MAYBE, followed by the proof log.
"""

from __future__ import annotations

import shutil
import sys

from . import orders
from .dp import Pipeline, ProcessorSpec, SolverConfig, StrategyError
from .orders import Bounds, CoeffRange, ConstRange, OrderParams
from .smt import default_solver_command
from .terms import TrsError, UnsupportedFeatureError, parse_trs

ORDER_NAMES = ("POLO", "MAX", "LPO", "KBO", "TKBO", "MAXPOLO", "WPO", "MATRIX")
PROCESSOR_NAMES = ORDER_NAMES + ("UNCURRY", "EDG", "LOOP")

USAGE = """usage: trsterm [FILE] [OPTION]... [PROCESSOR]...

Determines termination of the first-order term rewrite system in FILE
(TPDB old format; standard input when FILE is omitted).  Prints YES, NO,
or MAYBE on the first line, then a proof log.

options:
  --smt "COMMAND"   SMT-LIB 2.0 solver reading scripts on stdin
                    (default: z3 -in -smt2 when installed, else the
                    bundled solver "python -m trsterm.minismt")
  --timeout SECS    per check-sat timeout (default 10)
  --depth N         loop search depth for LOOP (default 3)
  --transcript F    record everything sent to the solver in file F
  --fresh-solver    use a fresh solver process per satisfiability check
                    instead of incremental push/pop reuse
  --nonlinear       keep coefficient products nonlinear and use QF_NIA
                    (experimental escape hatch)
  --help            this text

processors (in command order; orders take key=value suboptions):
  POLO     linear polynomial interpretations
  MAX      max-of-linear interpretations
  LPO      lexicographic path order (quasi-precedence, status, filter)
  KBO      Knuth-Bendix order (admissible weights)
  TKBO     transfinite KBO parameterization
  MAXPOLO  mixed sum/max interpretations with negative constants
  WPO      weighted path order, partial status, mixed shapes
  MATRIX   matrix interpretations (dim=N, default 2)
  UNCURRY  uncurry applicative systems (before EDG)
  EDG      dependency pairs + estimated dependency graph decomposition
  LOOP     bounded loop search for a nontermination witness (last)

order suboptions: coeff={1}|{0,1}|{1,2}|pos|nat  const=zero|nat|int
                  prec=none|quasi|strict  status=empty|total|partial
                  filter=on|off  dim=N

Orders before EDG must be monotone (coefficients without 0, no partial
status, no filter); they are applied as rule-removal processors.
"""


def default_strategy() -> list[ProcessorSpec]:
    """Rule removal by POLO with coefficients in {1,2}, uncurrying, EDG, then
    six reduction pairs from cheap to expensive, then loop search."""
    order = lambda p: ProcessorSpec("order", p)
    return [
        order(OrderParams("POLO", orders.POL, CoeffRange("one_two"), ConstRange("nat"), monotone=True)),
        ProcessorSpec("uncurry"),
        ProcessorSpec("edg"),
        order(OrderParams("POLO", orders.POL, CoeffRange("zero_one"), ConstRange("nat"))),
        order(OrderParams("MAX", orders.MAX, CoeffRange("zero_one"), ConstRange("nat"))),
        order(orders.preset("lpo-af")),
        order(OrderParams("MaxPOLO", orders.MP, CoeffRange("zero_one"), ConstRange("int"))),
        order(orders.preset("wpo-ms")),
        order(
            OrderParams(
                "Matrix2",
                orders.POL,
                CoeffRange("matrix", 2, "zero_one"),
                ConstRange("vec", 2),
            )
        ),
        ProcessorSpec("loop"),
    ]


class ArgError(Exception):
    pass


_COEFF = {
    "{1}": "one",
    "1": "one",
    "{0,1}": "zero_one",
    "0,1": "zero_one",
    "{1,2}": "one_two",
    "1,2": "one_two",
    "pos": "pos",
    "nat": "nat",
}
_CONST = {"zero": "zero", "{0}": "zero", "0": "zero", "nat": "nat", "int": "int"}


def _base_order(name: str, monotone_position: bool) -> OrderParams:
    """Table-1 row before EDG, table-2 row after."""
    if name == "POLO":
        return orders.preset("polo-linear-mono") if monotone_position else orders.preset("polo-linear")
    if name == "MAX":
        base = OrderParams("MAX", orders.MAX, CoeffRange("nat"), ConstRange("nat"))
        if monotone_position:
            base = OrderParams("MAX", orders.MAX, CoeffRange("pos"), ConstRange("nat"), monotone=True)
        return base
    if name == "LPO":
        return orders.preset("lpo-mono") if monotone_position else orders.preset("lpo-af")
    if name == "KBO":
        return orders.preset("kbo") if monotone_position else orders.preset("kbo-af")
    if name == "TKBO":
        return orders.preset("tkbo")
    if name == "MAXPOLO":
        return orders.preset("maxpolo")
    if name == "WPO":
        return orders.preset("wpo-ms")
    if name == "MATRIX":
        return orders.preset("matrix")
    raise ArgError(f"unknown order {name}")


def _apply_suboption(params: OrderParams, key: str, value: str) -> OrderParams:
    from dataclasses import replace

    if key == "coeff":
        if value not in _COEFF:
            raise ArgError(f"bad coeff range {value!r}")
        kind = _COEFF[value]
        if params.coeff.kind == "matrix":
            return replace(params, coeff=CoeffRange("matrix", params.coeff.dim, kind))
        return replace(params, coeff=CoeffRange(kind))
    if key == "const":
        if value not in _CONST:
            raise ArgError(f"bad const range {value!r}")
        if params.const.kind == "vec":
            return replace(params, const=ConstRange("vec", params.const.dim))
        return replace(params, const=ConstRange(_CONST[value]))
    if key == "prec":
        if value not in ("none", "quasi", "strict"):
            raise ArgError(f"bad precedence class {value!r}")
        return replace(params, precedence=value)
    if key == "status":
        if value not in ("empty", "total", "partial"):
            raise ArgError(f"bad status class {value!r}")
        return replace(params, status=value)
    if key == "filter":
        if value not in ("on", "off"):
            raise ArgError(f"bad filter switch {value!r}")
        return replace(params, collapsing_filter=value == "on")
    if key == "dim":
        d = int(value)
        return replace(
            params,
            coeff=CoeffRange("matrix", d, params.coeff.entry if params.coeff.kind == "matrix" else "nat"),
            const=ConstRange("vec", d),
            name=f"Matrix{d}",
        )
    raise ArgError(f"unknown order option {key!r}")


def parse_args(argv: list[str]):
    """Returns (input path or None, SolverConfig fields, processor specs)."""
    path = None
    options = {
        "smt": None,
        "timeout": 10.0,
        "depth": 3,
        "transcript": None,
        "fresh": False,
        "nonlinear": False,
        "help": False,
    }
    specs: list[ProcessorSpec] = []
    seen_edg = False
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok == "--help":
            options["help"] = True
            i += 1
        elif tok in ("--smt", "--timeout", "--depth", "--transcript"):
            if i + 1 >= len(argv):
                raise ArgError(f"{tok} needs a value")
            value = argv[i + 1]
            if tok == "--smt":
                options["smt"] = value
            elif tok == "--timeout":
                options["timeout"] = float(value)
            elif tok == "--depth":
                options["depth"] = int(value)
            else:
                options["transcript"] = value
            i += 2
        elif tok == "--fresh-solver":
            options["fresh"] = True
            i += 1
        elif tok == "--nonlinear":
            options["nonlinear"] = True
            i += 1
        elif tok.startswith("--"):
            raise ArgError(f"unknown option {tok}")
        elif tok.upper() in PROCESSOR_NAMES or tok.upper().startswith("MATRIX"):
            name = tok.upper()
            if name == "UNCURRY":
                specs.append(ProcessorSpec("uncurry"))
                i += 1
            elif name == "EDG":
                specs.append(ProcessorSpec("edg"))
                seen_edg = True
                i += 1
            elif name == "LOOP":
                specs.append(ProcessorSpec("loop"))
                i += 1
            else:
                params = _base_order(name, monotone_position=not seen_edg)
                i += 1
                while i < len(argv) and "=" in argv[i] and not argv[i].startswith("--"):
                    key, _, value = argv[i].partition("=")
                    params = _apply_suboption(params, key, value)
                    i += 1
                specs.append(ProcessorSpec("order", params))
        elif path is None:
            path = tok
            i += 1
        else:
            raise ArgError(f"unexpected argument {tok!r} (input file already given: {path})")
    return path, options, specs


def resolve_solver_command(requested, timeout: float = 10.0) -> str:
    if requested:
        return requested
    if shutil.which("z3"):
        return "z3 -in -smt2"
    print("note: z3 not found on PATH; using the bundled solver", file=sys.stderr)
    # let the bundled solver give up gracefully before the watchdog fires
    return default_solver_command(check_seconds=max(timeout * 0.8, 0.1))


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        path, options, specs = parse_args(argv)
    except ArgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(USAGE, file=sys.stderr)
        return 2
    if options["help"]:
        print(USAGE)
        return 0
    if not specs:
        specs = default_strategy()
    try:
        config = SolverConfig(
            command=resolve_solver_command(options["smt"], options["timeout"]),
            timeout=options["timeout"],
            transcript=options["transcript"],
            fresh_per_check=options["fresh"],
            nonlinear=options["nonlinear"],
            loop_depth=options["depth"],
        )
        pipeline = Pipeline(specs, config)
    except (StrategyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        text = sys.stdin.read() if path is None else open(path, "r", encoding="utf-8").read()
    except OSError as exc:
        print(f"error: cannot read input: {exc}", file=sys.stderr)
        return 2

    try:
        trs = parse_trs(text)
    except UnsupportedFeatureError as exc:
        print("MAYBE")
        print(f"# unsupported input feature: {exc}")
        return 0
    except TrsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    verdict = pipeline.run(trs)
    print(verdict.render())
    return 0


if __name__ == "__main__":
    sys.exit(main())

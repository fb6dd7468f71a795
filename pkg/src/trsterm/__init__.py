"""Termination analysis for first-order term rewrite systems.

Dependency-pair pipeline with a unified weighted-path-order reduction-pair
search over an external SMT-LIB 2.0 solver.
"""

from .terms import (
    App,
    Rule,
    Symbol,
    Term,
    Trs,
    TrsError,
    UnsupportedFeatureError,
    Var,
    apply_substitution,
    defined_symbols,
    match,
    parse_trs,
    print_trs,
    rewrite_step,
    unify,
)
from .dp import (
    DpProblem,
    Pipeline,
    ProcessorSpec,
    SolverConfig,
    Verdict,
    dependency_pairs,
    estimated_edg,
    run_pipeline,
    sccs,
    usable_rules,
)
from .orders import OrderParams, preset
from .uncurry import applicative_arity, detect_application_symbol, uncurry
from .loops import LoopWitness, find_loop
from .cli import default_strategy, main

__all__ = [
    "App",
    "DpProblem",
    "LoopWitness",
    "OrderParams",
    "Pipeline",
    "ProcessorSpec",
    "Rule",
    "SolverConfig",
    "Symbol",
    "Term",
    "Trs",
    "TrsError",
    "UnsupportedFeatureError",
    "Var",
    "Verdict",
    "apply_substitution",
    "applicative_arity",
    "default_strategy",
    "defined_symbols",
    "dependency_pairs",
    "detect_application_symbol",
    "estimated_edg",
    "find_loop",
    "main",
    "match",
    "parse_trs",
    "preset",
    "print_trs",
    "rewrite_step",
    "run_pipeline",
    "sccs",
    "unify",
    "uncurry",
    "usable_rules",
]

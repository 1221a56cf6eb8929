"""Model checking of asynchronous probabilistic hyperproperties (AHyperPCTL) on MDPs.

The SMT route (:func:`check_smt`) compiles a model and formula to QF_NRA
and hands it to an external solver; the oracle route
(:func:`check_by_enumeration`) evaluates the same question exactly by
explicit enumeration on small instances.
"""

from .encoder import ConstraintSystem, encode
from .fixtures import CaseStudyFixture, build_acdb, build_ce, build_tl
from .formula import (FormulaError, HyperFormula, UnsupportedFragment, desugar, experiment_map,
                      negate_prefix, parse_formula, to_text)
from .model import (CountingStutterScheduler, Dtmc, Mdp, MemorylessScheduler, ModelError, compose,
                    format_mdp, induce_dtmc, parse_mdp, succ_plus, validate_mdp)
from .oracle import (SchedulerDomain, check_by_enumeration, check_instantiated, eval_body,
                     next_probability, until_probability)
from .solver import CheckOutcome, SolverError, Verdict, Witness, check_smt, run_solver

__version__ = "0.1.0"

__all__ = [
    "CaseStudyFixture", "CheckOutcome", "ConstraintSystem", "CountingStutterScheduler", "Dtmc",
    "FormulaError", "HyperFormula", "Mdp", "MemorylessScheduler", "ModelError", "SchedulerDomain",
    "SolverError", "UnsupportedFragment", "Verdict", "Witness", "build_acdb", "build_ce", "build_tl",
    "check_by_enumeration", "check_instantiated", "check_smt", "compose", "desugar", "encode",
    "eval_body", "experiment_map", "format_mdp", "induce_dtmc", "negate_prefix", "next_probability",
    "parse_formula", "parse_mdp", "run_solver", "succ_plus", "to_text", "until_probability",
    "validate_mdp",
]

"""Datalog evaluation over facts annotated with presence conditions."""

from .datalog import Atom, Const, Fact, LiftedFact, Rule, Var, match_atom, substitute
from .engine import EvalOptions, EvalStats, LiftedEDB, audit_fixpoint, infer, lifted_infer, restrict
from .frontend import LoadError, Program, load_fact_file, parse_program, write_fact_file
from .oracle import GeneratorSpec, enumerate_configs, generate_spl_program, verify_commutation
from .pc import BDD, TextPCs

__all__ = [
    "Atom", "Const", "Fact", "LiftedFact", "Rule", "Var", "match_atom", "substitute",
    "EvalOptions", "EvalStats", "LiftedEDB", "audit_fixpoint", "infer", "lifted_infer", "restrict",
    "LoadError", "Program", "load_fact_file", "parse_program", "write_fact_file",
    "GeneratorSpec", "enumerate_configs", "generate_spl_program", "verify_commutation",
    "BDD", "TextPCs",
]

__version__ = "0.1.0"

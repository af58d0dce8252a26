"""Value-passing CCS with permission-confined systems, a satisfaction checker
for its assertion logic and a rule-by-rule proof checker."""
from .errors import BudgetExhausted, ParseError, PermCCSError
from .logic import PermEnv, Sat, Unsat, satisfies
from .parser import (parse_env, parse_expr, parse_formula, parse_process, parse_sequent,
                     parse_system, parse_system_file)
from .printer import show
from .process import canon, evaluate, explore, is_deterministic, step
from .proofs import check_proof, expand_derived, load_script, load_script_file
from .systems import certify_deterministic, evaluate_safe, explore_sys, sys_step

__all__ = [
    "BudgetExhausted", "ParseError", "PermCCSError", "PermEnv", "Sat", "Unsat", "satisfies",
    "parse_env", "parse_expr", "parse_formula", "parse_process", "parse_sequent",
    "parse_system", "parse_system_file", "show", "canon", "evaluate", "explore",
    "is_deterministic", "step", "check_proof", "expand_derived", "load_script",
    "load_script_file", "certify_deterministic", "evaluate_safe", "explore_sys", "sys_step",
]

"""Validation toolkit for multi-level health-condition models.

Models are written in a small declarative language (``.hcm``), unrolled into
nonlinear real-arithmetic constraint systems and decided by a built-in
branch-and-prune delta-solver. Systems can also be exported as SMT-LIB.
"""

from .analyses import (
    Finding,
    ValidationReport,
    check_exhaustive,
    check_overlap,
    check_reachable,
    check_trace,
    check_unsafe,
    find_spoof,
    run_analyses,
)
from .dsl import load_model, load_scenario, parse_model, parse_scenario, parse_trace, print_model, print_scenario
from .expr import AtomicConstraint, Clause, ConstraintSystem, Constant, Variable, VarDecl, negate, ranged
from .interval import Interval
from .model import HealthModel, Scenario, lower
from .smtlib import emit, parse_external, print_external
from .solver import DeltaSat, SolverConfig, Unknown, Unsat, certify, solve, solve_enumerate

__version__ = "0.1.0"

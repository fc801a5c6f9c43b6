"""Ground logic programs: syntax, parsing, grounding, analysis, solving."""

from .syntax import (
    Atom,
    BinOp,
    CardAtom,
    CardElement,
    Comparison,
    Fn,
    Interval,
    Literal,
    Program,
    Rule,
    Term,
    Var,
    atom_key,
    format_atom,
    format_program,
    format_term,
    rule_key,
    sorted_atoms,
    atom_to_term,
    term_to_atom,
)
from .parse import ParseError, parse_atom, parse_program, parse_term
from .ground import GroundingError, UnsafeRuleError, ground
from .cards import CardinalityError, compile_cardinality
from .analysis import (
    DependencyGraph,
    NotStratifiedError,
    choice_atoms,
    is_gdt,
    is_stratified,
    is_tight,
    stratify,
    to_gdt,
)
from .models import (
    ModelError,
    has_stable_model,
    is_stable_model,
    least_model,
    reduct,
    stable_models,
)
from .solve import Solver

__all__ = [
    "Atom",
    "BinOp",
    "CardAtom",
    "CardElement",
    "CardinalityError",
    "Comparison",
    "DependencyGraph",
    "Fn",
    "GroundingError",
    "Interval",
    "Literal",
    "ModelError",
    "NotStratifiedError",
    "ParseError",
    "Program",
    "Rule",
    "Solver",
    "Term",
    "UnsafeRuleError",
    "Var",
    "atom_key",
    "choice_atoms",
    "compile_cardinality",
    "format_atom",
    "format_program",
    "format_term",
    "ground",
    "has_stable_model",
    "is_gdt",
    "is_stable_model",
    "is_stratified",
    "is_tight",
    "least_model",
    "parse_atom",
    "parse_program",
    "parse_term",
    "reduct",
    "rule_key",
    "sorted_atoms",
    "stable_models",
    "stratify",
    "atom_to_term",
    "term_to_atom",
    "to_gdt",
]

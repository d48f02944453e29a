"""optexplain: interactive explanations for LP/MILP optimization models."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    Instance,
    Modification,
    ModelIR,
    apply_modification,
    instantiate,
    lookup_component,
    validate_model,
)
from .omif import parse_constraint_dsl, parse_model, serialize_model  # noqa: F401
from .solver import SolveResult, check_feasible, solve_lp, solve_milp  # noqa: F401

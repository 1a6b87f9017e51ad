from .base import Preconditioner
from .core import DEFAULT_TOL, SolveReport, SolveRequest, apply_operator, listening, solve
from .factory import PreconditionerFactory

__all__ = [
    "DEFAULT_TOL",
    "Preconditioner",
    "PreconditionerFactory",
    "SolveReport",
    "SolveRequest",
    "apply_operator",
    "listening",
    "solve",
]

"""Factory for creating preconditioners."""
from .base import Preconditioner
from .jacobi import JacobiPreconditioner
from .multigrid import MultigridPreconditioner


class PreconditionerFactory:
    """Factory for creating preconditioners."""

    @staticmethod
    def create(kind: str, **kwargs) -> Preconditioner:
        """Create a preconditioner instance.

        Args:
            kind: Type of preconditioner ('jacobi' or 'multigrid')
            **kwargs: Arguments to pass to the preconditioner constructor

        Returns:
            Preconditioner: An instance of the requested preconditioner
        """
        preconditioners = {
            "jacobi": JacobiPreconditioner,
            "multigrid": MultigridPreconditioner,
        }

        if kind not in preconditioners:
            raise ValueError(f"Unknown preconditioner: {kind}. Available types: {list(preconditioners.keys())}")

        return preconditioners[kind](**kwargs)

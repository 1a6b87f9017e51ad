from .base import Medium, difference_matrices
from .conductance import CoefficientField
from .constant import ConstantMatrixMedium

__all__ = ["Medium", "CoefficientField", "ConstantMatrixMedium", "difference_matrices"]

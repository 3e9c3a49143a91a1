"""l_p-norm support vector machines: primal conic training, the dual program,
kernel tensors and moment relaxations."""

from .core import (
    Dataset,
    DegreeOverflowError,
    Hyperplane,
    NormParam,
    TrainingDataError,
    multi_index_enumerate,
    multinomial_coeff,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DegreeOverflowError",
    "Hyperplane",
    "NormParam",
    "TrainingDataError",
    "multi_index_enumerate",
    "multinomial_coeff",
]

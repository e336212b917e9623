"""Desk-scale numerics for Fourier symbols on the integer lattice.

Submodules:

``lattice``       lattice points in balls, exact sums, growth functions
``measures``      atomic measures and composable symbols
``wiener``        moving-ball averages, direction tests, atom recovery
``riesz``         greedy Riesz-product certificates
``projection``    Decell pseudoinverse and the projection obstruction check
``transference``  bump extension of lattice symbols to R^d
``cli``           the ``wienerlab`` command
"""

__version__ = "0.1.0"

from .errors import (DegenerateFitWarning, DomainError, EmptyDomainError, InvalidArgumentError,  # noqa: E402
                     ResourceLimitError, WienerLabError)
from .lattice import GrowthFunction, ball_average, enumerate_ball  # noqa: E402
from .measures import AtomicMeasure, OrthantIndicator, atomic_fourier  # noqa: E402

__all__ = [
    "__version__", "WienerLabError", "InvalidArgumentError", "ResourceLimitError", "EmptyDomainError",
    "DomainError", "DegenerateFitWarning", "GrowthFunction", "enumerate_ball", "ball_average",
    "AtomicMeasure", "OrthantIndicator", "atomic_fourier",
]

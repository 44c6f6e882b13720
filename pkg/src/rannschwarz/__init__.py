"""Randomized neural network bases on overlapping subdomains, solved by
Schwarz-preconditioned Krylov methods on the least-squares normal equations.
"""

from .geometry import Box, build_decomposition, uniform_grid
from .problems import example1, example2, example3
from .runner import RunConfig, fit, run, evaluate

__all__ = [
    "Box", "build_decomposition", "uniform_grid",
    "example1", "example2", "example3",
    "RunConfig", "fit", "run", "evaluate",
]
__version__ = "0.1.0"

"""Numerical laboratory for quantitative stability of the p-Sobolev inequality.

The package evaluates the Sobolev deficit of perturbed extremal bubbles,
projects fields onto the extremal manifold, certifies the sharp vector
inequalities that drive the stability estimate, computes spectral gaps of the
linearized p-Laplacian, and reproduces the sharpness rates of the two
degenerate perturbation families.

Everything is axisymmetric: fields live on a log-radial x Gauss-Legendre grid
and all quadrature is deterministic (pairwise reductions), so reports are
byte-for-byte reproducible for a fixed seed.
"""

__version__ = "0.1.0"

from .errors import (
    NumericalError,
    TailTooLarge,
    DivergentNearOrigin,
    SingularityUnresolved,
    NotConverged,
    NoNearbyBubble,
    NegativeGap,
    SectorOrderingUnexpected,
    ConditionViolated,
)
from .bubbles import Dimension, Bubble

__all__ = [
    "__version__",
    "Dimension",
    "Bubble",
    "NumericalError",
    "TailTooLarge",
    "DivergentNearOrigin",
    "SingularityUnresolved",
    "NotConverged",
    "NoNearbyBubble",
    "NegativeGap",
    "SectorOrderingUnexpected",
    "ConditionViolated",
]

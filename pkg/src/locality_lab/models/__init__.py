from .base import BlockedDensityModel, as_batch
from .clique import CliquePotentialModel, PolynomialCliquePotential
from .gaussian import GaussianModel, gaussian_from_banded_precision
from .ginzburg_landau import GinzburgLandauChain, gl_chain
from .inspect import convexity_bounds, extract_graph

__all__ = [
    "BlockedDensityModel",
    "CliquePotentialModel",
    "GaussianModel",
    "GinzburgLandauChain",
    "PolynomialCliquePotential",
    "as_batch",
    "convexity_bounds",
    "extract_graph",
    "gaussian_from_banded_precision",
    "gl_chain",
]

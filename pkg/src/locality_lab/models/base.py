"""Abstract block-decomposed differentiable densities.

A model exposes the unnormalized log-density, its gradient (the score) and
its Hessian; everything downstream (Langevin simulation, locality bounds,
transport metrics) works only through these plus the block structure, so the
normalizing constant is never needed.
"""

import numpy as np

from ..blocks import BlockStructure, slice_block
from ..graphs import DependencyGraph


def as_batch(x, d):
    """Return (X, was_single) with X of shape (n, d)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape[0] != d:
            raise ValueError(f"expected vector of length {d}, got {x.shape[0]}")
        return x[None, :], True
    if x.ndim != 2 or x.shape[1] != d:
        raise ValueError(f"expected array of shape (n, {d}), got {x.shape}")
    return x, False


class BlockedDensityModel:
    """Unnormalized log-density over a fixed block decomposition.

    Subclasses implement log_density, score and hessian; all accept a single
    point (d,) or a batch (n, d). hessian returns grad^2 log pi (note the sign:
    strong log-concavity means -hessian >= m I).
    """

    blocks: BlockStructure
    graph: DependencyGraph

    #: True when grad^2 log pi does not depend on x (Gaussian-like models);
    #: enables deterministic Jacobian propagation in the Langevin module.
    constant_hessian = False

    #: (m, M) with m I <= -grad^2 log pi <= M I when known exactly, else None.
    log_concavity_bounds = None

    @property
    def dim(self) -> int:
        return self.blocks.total_dim

    def log_density(self, x):
        raise NotImplementedError

    def score(self, x):
        raise NotImplementedError

    def hessian(self, x):
        """grad^2 log pi at a single point, shape (d, d)."""
        raise NotImplementedError

    def block_score(self, x, j):
        return slice_block(self.score(x), self.blocks, j)

    def hessian_block(self, x, j, k):
        H = self.hessian(x)
        return H[self.blocks.slice_of(j), self.blocks.slice_of(k)]

    def hessian_batch(self, X):
        """grad^2 log pi per row of X, shape (n, d, d)."""
        X, _ = as_batch(X, self.dim)
        return np.stack([self.hessian(x) for x in X])

    def score_jacobian_matmul(self, X, V):
        """Batched product grad^2 log pi(X[c]) @ V[c], shape (n, d, d).

        Subclasses with structured Hessians override this to avoid building
        dense Hessians inside the Langevin Jacobian recursion.
        """
        return np.matmul(self.hessian_batch(X), V)

"""Numerical inspection of models: convexity bounds and graph extraction."""

import numpy as np

from ..graphs import DependencyGraph
from .base import as_batch
from .gaussian import GRAPH_TOL


def convexity_bounds(model, sample_points):
    """(m_hat, M_hat): extreme eigenvalues of -grad^2 log pi over the samples.

    Exact for constant-Hessian models; an empirical estimate otherwise, and
    m_hat may well be <= 0 for non-log-concave models.
    """
    X, _ = as_batch(sample_points, model.dim)
    if X.shape[0] == 0:
        raise ValueError("need at least one sample point")
    if model.constant_hessian:
        X = X[:1]
    m_hat, M_hat = np.inf, -np.inf
    for H in model.hessian_batch(X):
        if not np.all(np.isfinite(H)):
            raise ValueError("non-finite Hessian entries")
        w = np.linalg.eigvalsh(-0.5 * (H + H.T))
        m_hat = min(m_hat, w[0])
        M_hat = max(M_hat, w[-1])
    return float(m_hat), float(M_hat)


def extract_graph(model, tolerance=GRAPH_TOL, probe_points=None) -> DependencyGraph:
    """Dependency graph read off Hessian block norms over probe points.

    Edge (j, k) present iff some probe has ||hessian_block(x, j, k)|| above
    the tolerance; self-loops are always present.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    if probe_points is None:
        probe_points = np.zeros((1, model.dim))
    X, _ = as_batch(probe_points, model.dim)
    if model.constant_hessian:
        X = X[:1]
    blocks = model.blocks
    b = blocks.num_blocks
    maxnorm = np.zeros((b, b))
    for H in model.hessian_batch(X):
        for j in range(b):
            sj = blocks.slice_of(j)
            for k in range(j + 1, b):
                nrm = np.linalg.norm(H[sj, blocks.slice_of(k)], 2)
                maxnorm[j, k] = max(maxnorm[j, k], nrm)
    neighbors = [[] for _ in range(b)]
    for j in range(b):
        for k in range(j + 1, b):
            if maxnorm[j, k] > tolerance:
                neighbors[j].append(k)
                neighbors[k].append(j)
    return DependencyGraph(neighbors)

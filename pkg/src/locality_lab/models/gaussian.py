"""Gaussian models with explicit precision matrices and banded random instances."""

import numpy as np

from ..blocks import make_blocks, unit_blocks
from ..graphs import DependencyGraph
from .base import BlockedDensityModel, as_batch

# absolute tolerance on block norms of the Hessian when reading a dependency
# graph off a matrix
GRAPH_TOL = 1e-10


def _block_sparsity_graph(mat, blocks, tol=GRAPH_TOL):
    b = blocks.num_blocks
    neighbors = [[] for _ in range(b)]
    for j in range(b):
        sj = blocks.slice_of(j)
        for k in range(j + 1, b):
            sk = blocks.slice_of(k)
            if np.linalg.norm(mat[sj, sk], 2) > tol:
                neighbors[j].append(k)
                neighbors[k].append(j)
    return DependencyGraph(neighbors)


class GaussianModel(BlockedDensityModel):
    """N(mean, C) parameterized by its precision Lambda = C^{-1}.

    The covariance, its symmetric square root and the spectral bounds
    (m, M) of the precision are cached from one eigendecomposition.
    """

    constant_hessian = True

    def __init__(self, precision, mean=None, blocks=None, graph=None):
        precision = np.asarray(precision, dtype=float)
        if precision.ndim != 2 or precision.shape[0] != precision.shape[1]:
            raise ValueError("precision must be a square matrix")
        if not np.allclose(precision, precision.T, atol=1e-10):
            raise ValueError("precision must be symmetric")
        d = precision.shape[0]
        self.precision = 0.5 * (precision + precision.T)
        self.mean = np.zeros(d) if mean is None else np.asarray(mean, dtype=float)
        if self.mean.shape != (d,):
            raise ValueError("mean length does not match precision")
        self.blocks = unit_blocks(d) if blocks is None else blocks
        if self.blocks.total_dim != d:
            raise ValueError("block structure does not match precision size")

        w, V = np.linalg.eigh(self.precision)
        if w[0] <= 0:
            raise ValueError(f"precision is not positive definite (min eig {w[0]:.3g})")
        self._eigvals = w
        self._eigvecs = V

        if graph is None:
            graph = _block_sparsity_graph(self.precision, self.blocks)
        else:
            self._check_sparsity(graph)
        self.graph = graph

    def _check_sparsity(self, graph):
        b = self.blocks.num_blocks
        if graph.num_vertices != b:
            raise ValueError("graph size does not match block count")
        for j in range(b):
            sj = self.blocks.slice_of(j)
            for k in range(j + 1, b):
                if graph.has_edge(j, k):
                    continue
                off = self.precision[sj, self.blocks.slice_of(k)]
                if np.linalg.norm(off, 2) > GRAPH_TOL:
                    raise ValueError(
                        f"precision has mass {np.linalg.norm(off, 2):.3g} on the "
                        f"non-edge ({j}, {k})"
                    )

    # -- spectral caches ---------------------------------------------------
    @property
    def spectrum_bounds(self):
        """(m, M) with m I <= Lambda <= M I, exact."""
        return float(self._eigvals[0]), float(self._eigvals[-1])

    @property
    def log_concavity_bounds(self):
        return self.spectrum_bounds

    @property
    def covariance(self):
        V, w = self._eigvecs, self._eigvals
        return (V / w) @ V.T

    @property
    def sqrt_covariance(self):
        """Symmetric principal square root C^{1/2} = V diag(w^{-1/2}) V^T."""
        V, w = self._eigvecs, self._eigvals
        return (V / np.sqrt(w)) @ V.T

    @property
    def inv_sqrt_covariance(self):
        V, w = self._eigvecs, self._eigvals
        return (V * np.sqrt(w)) @ V.T

    # -- density interface -------------------------------------------------
    def log_density(self, x):
        X, single = as_batch(x, self.dim)
        Z = X - self.mean
        vals = -0.5 * np.einsum("ni,ij,nj->n", Z, self.precision, Z)
        return vals[0] if single else vals

    def score(self, x):
        X, single = as_batch(x, self.dim)
        out = -(X - self.mean) @ self.precision
        return out[0] if single else out

    def hessian(self, x):
        return -self.precision

    def hessian_batch(self, X):
        X, _ = as_batch(X, self.dim)
        return np.broadcast_to(-self.precision, (X.shape[0],) + self.precision.shape)

    def score_jacobian_matmul(self, X, V):
        return np.matmul(-self.precision, V)

    def sample(self, n, rng):
        """n exact draws, using the symmetric square root of the covariance."""
        Z = rng.standard_normal((n, self.dim))
        return self.mean + Z @ self.sqrt_covariance


def gaussian_from_banded_precision(b, block_sizes, bandwidth, m, M, seed):
    """Random block-banded precision with spectrum mapped exactly onto [m, M].

    The raw symmetric band is shifted and scaled on its eigenvalues; the
    affine map a*Lambda + c*I preserves bandedness exactly, which is
    re-checked after the fact.
    """
    if m <= 0 or M < m:
        raise ValueError(f"need 0 < m <= M, got m={m}, M={M}")
    if np.isscalar(block_sizes):
        block_sizes = [int(block_sizes)] * b
    blocks = make_blocks(block_sizes)
    if blocks.num_blocks != b:
        raise ValueError("block_sizes length does not match b")

    rng = np.random.default_rng(seed)
    d = blocks.total_dim
    raw = rng.standard_normal((d, d))
    raw = 0.5 * (raw + raw.T)
    mask = np.zeros((d, d), dtype=bool)
    for j in range(b):
        sj = blocks.slice_of(j)
        for k in range(b):
            if abs(j - k) <= bandwidth:
                mask[sj, blocks.slice_of(k)] = True
    raw[~mask] = 0.0

    w = np.linalg.eigvalsh(raw)
    spread = w[-1] - w[0]
    if spread < 1e-12:
        prec = np.eye(d) * (0.5 * (m + M))
    else:
        a = (M - m) / spread
        c = m - a * w[0]
        prec = a * raw + c * np.eye(d)
    if np.any(np.abs(prec[~mask]) > GRAPH_TOL):
        raise RuntimeError("spectral affine map unexpectedly broke the band structure")

    from ..graphs import banded_graph

    return GaussianModel(prec, blocks=blocks, graph=banded_graph(b, bandwidth))

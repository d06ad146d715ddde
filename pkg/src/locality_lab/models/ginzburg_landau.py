"""Chain of real-valued spins with double-well on-site potential and
quadratic nearest-neighbor coupling."""

import numpy as np

from ..blocks import unit_blocks
from ..graphs import banded_graph
from .base import BlockedDensityModel, as_batch


class GinzburgLandauChain(BlockedDensityModel):
    """Gibbs model log pi(x) = -sum_j V(x_j) - sum_j W(x_j, x_{j+1}) + const,
    with V(x) = (lam/4) (x^2 - m_param^2)^2 and W(x, y) = (beta/2) (x - y)^2.

    The exponent carries the e^{-energy} sign so the coupling is attractive
    and the density normalizable. The Hessian is tridiagonal, so the
    dependency graph is the self-looped chain.
    """

    def __init__(self, n, lam, m_param, beta):
        if n < 2:
            raise ValueError("need at least 2 sites")
        if lam <= 0:
            raise ValueError("lambda must be > 0")
        if beta <= 0:
            raise ValueError("beta must be > 0")
        self.n = int(n)
        self.lam = float(lam)
        self.m_param = float(m_param)
        self.beta = float(beta)
        self.blocks = unit_blocks(self.n)
        self.graph = banded_graph(self.n, 1)
        # bond degree of each site: 1 at the ends, 2 in the interior
        self._deg = np.full(self.n, 2.0)
        self._deg[0] = self._deg[-1] = 1.0

    def log_density(self, x):
        X, single = as_batch(x, self.n)
        onsite = (self.lam / 4.0) * (X**2 - self.m_param**2) ** 2
        bonds = (self.beta / 2.0) * (X[:, :-1] - X[:, 1:]) ** 2
        vals = -(onsite.sum(axis=1) + bonds.sum(axis=1))
        return vals[0] if single else vals

    def score(self, x):
        X, single = as_batch(x, self.n)
        s = -self.lam * X * (X * X - self.m_param**2)
        s[:, :-1] -= self.beta * (X[:, :-1] - X[:, 1:])
        s[:, 1:] -= self.beta * (X[:, 1:] - X[:, :-1])
        return s[0] if single else s

    def _hessian_diag(self, X):
        """Diagonal of grad^2 log pi along a batch: -(V''(x_j) + beta*deg_j)."""
        return -(self.lam * (3.0 * X * X - self.m_param**2)) - self.beta * self._deg

    def hessian(self, x):
        X, _ = as_batch(x, self.n)
        H = np.zeros((self.n, self.n))
        H[np.diag_indices(self.n)] = self._hessian_diag(X)[0]
        off = np.arange(self.n - 1)
        H[off, off + 1] = self.beta
        H[off + 1, off] = self.beta
        return H

    def hessian_batch(self, X):
        X, _ = as_batch(X, self.n)
        n = X.shape[0]
        H = np.zeros((n, self.n, self.n))
        idx = np.arange(self.n)
        H[:, idx, idx] = self._hessian_diag(X)
        off = np.arange(self.n - 1)
        H[:, off, off + 1] = self.beta
        H[:, off + 1, off] = self.beta
        return H

    def score_jacobian_matmul(self, X, V):
        X, _ = as_batch(X, self.n)
        diag = self._hessian_diag(X)
        out = diag[:, :, None] * V
        out[:, 1:, :] += self.beta * V[:, :-1, :]
        out[:, :-1, :] += self.beta * V[:, 1:, :]
        return out


def gl_chain(n, lam, m_param, beta) -> GinzburgLandauChain:
    """Chain model factory; tridiagonal Hessian blocks by construction."""
    return GinzburgLandauChain(n, lam, m_param, beta)

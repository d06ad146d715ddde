"""Models assembled from per-vertex clique potentials log pi = sum_j u_j(x_{N_j})."""

import numpy as np

from ..blocks import BlockStructure
from ..graphs import DependencyGraph
from .base import BlockedDensityModel, as_batch


class PolynomialCliquePotential:
    """Linear combination of monomials on the clique variables.

    exponents is an (F, k) integer array, coeffs an (F,) vector; the potential
    is sum_f coeffs[f] * prod_a x_a ** exponents[f, a].
    """

    def __init__(self, exponents, coeffs):
        self.exponents = np.asarray(exponents, dtype=int)
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.exponents.ndim != 2:
            raise ValueError("exponents must be (F, k)")
        if self.coeffs.shape != (self.exponents.shape[0],):
            raise ValueError("coeffs length does not match exponents")
        if np.any(self.exponents < 0):
            raise ValueError("exponents must be nonnegative")

    @property
    def num_vars(self) -> int:
        return self.exponents.shape[1]

    @property
    def max_degree(self) -> int:
        if self.exponents.size == 0:
            return 0
        return int(self.exponents.sum(axis=1).max())

    def _monomials(self, Xc, exponents):
        # product over variables of x_a^e_a, shape (n, F)
        return np.prod(Xc[:, None, :] ** exponents[None, :, :], axis=2)

    def value(self, Xc):
        Xc = np.asarray(Xc, dtype=float)
        return self._monomials(Xc, self.exponents) @ self.coeffs

    def grad(self, Xc):
        Xc = np.asarray(Xc, dtype=float)
        n, k = Xc.shape
        out = np.zeros((n, k))
        for a in range(k):
            e = self.exponents[:, a]
            active = e > 0
            if not np.any(active):
                continue
            exps = self.exponents[active].copy()
            exps[:, a] -= 1
            mono = self._monomials(Xc, exps)
            out[:, a] = mono @ (self.coeffs[active] * e[active])
        return out

    def hess(self, Xc):
        Xc = np.asarray(Xc, dtype=float)
        n, k = Xc.shape
        out = np.zeros((n, k, k))
        for a in range(k):
            for c in range(a, k):
                e = self.exponents.copy()
                fac = e[:, a].astype(float)
                e[:, a] -= 1
                if a == c:
                    fac *= e[:, a]
                    e[:, a] -= 1
                else:
                    fac *= e[:, c]
                    e[:, c] -= 1
                active = fac > 0
                if not np.any(active):
                    continue
                mono = self._monomials(Xc, np.maximum(e[active], 0))
                vals = mono @ (self.coeffs[active] * fac[active])
                out[:, a, c] = vals
                if a != c:
                    out[:, c, a] = vals
        return out


class CliquePotentialModel(BlockedDensityModel):
    """log pi(x) = sum over vertices j of u_j(x_{N_j}).

    Potential j sees exactly the coordinates of the blocks in N_j (ascending
    block order), so perturbing any coordinate outside N_j cannot change the
    terms attached to j.
    """

    def __init__(self, graph: DependencyGraph, blocks: BlockStructure, potentials):
        if graph.num_vertices != blocks.num_blocks:
            raise ValueError("graph and block structure disagree on b")
        if len(potentials) != graph.num_vertices:
            raise ValueError("need one potential per vertex")
        self.graph = graph
        self.blocks = blocks
        self.potentials = list(potentials)
        self._affine = None  # (H, s0) cache for quadratic models
        self.constant_hessian = all(p.max_degree <= 2 for p in potentials)
        self._clique_coords = []
        for j in range(graph.num_vertices):
            coords = np.concatenate([blocks.coords(k) for k in graph.neighbors(j)])
            self._clique_coords.append(coords)
            if self.potentials[j].num_vars != coords.size:
                raise ValueError(
                    f"potential {j} has {self.potentials[j].num_vars} variables, "
                    f"clique has {coords.size}"
                )

    def clique_coords(self, j):
        return self._clique_coords[j]

    def log_density(self, x):
        X, single = as_batch(x, self.dim)
        vals = np.zeros(X.shape[0])
        for j, pot in enumerate(self.potentials):
            vals += pot.value(X[:, self._clique_coords[j]])
        return vals[0] if single else vals

    def _score_by_potentials(self, X):
        out = np.zeros_like(X)
        for j, pot in enumerate(self.potentials):
            coords = self._clique_coords[j]
            out[:, coords] += pot.grad(X[:, coords])
        return out

    def _affine_score(self):
        """For quadratic potentials the score is exactly affine; cache its
        assembled form so sampling loops avoid the per-potential pass."""
        if self._affine is None:
            zero = np.zeros((1, self.dim))
            H = self._hessian_by_potentials(zero)[0]
            s0 = self._score_by_potentials(zero)[0]
            self._affine = (H, s0)
        return self._affine

    def score(self, x):
        X, single = as_batch(x, self.dim)
        if self.constant_hessian:
            H, s0 = self._affine_score()
            out = s0 + X @ H  # H symmetric
        else:
            out = self._score_by_potentials(X)
        return out[0] if single else out

    def hessian(self, x):
        return self.hessian_batch(x)[0]

    def _hessian_by_potentials(self, X):
        H = np.zeros((X.shape[0], self.dim, self.dim))
        for j, pot in enumerate(self.potentials):
            coords = self._clique_coords[j]
            H[np.ix_(np.arange(X.shape[0]), coords, coords)] += pot.hess(X[:, coords])
        return H

    def hessian_batch(self, X):
        X, _ = as_batch(X, self.dim)
        if self.constant_hessian:
            H, _ = self._affine_score()
            return np.broadcast_to(H, (X.shape[0],) + H.shape)
        return self._hessian_by_potentials(X)

    def score_jacobian_matmul(self, X, V):
        if self.constant_hessian:
            H, _ = self._affine_score()
            return np.matmul(H, V)
        return np.matmul(self.hessian_batch(X), V)

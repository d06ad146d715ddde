"""Localized likelihood-informed subspaces: whitening, diagnostic matrices,
per-block eigen-truncation, ridge likelihood averaging, and the a-posteriori
marginal error certificate."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, qmc

from .blocks import BlockStructure
from .graphs import certify_locality, diameter
from .models import BlockedDensityModel, GaussianModel, as_batch
from .models.gaussian import _block_sparsity_graph


class LinearGaussianLikelihood:
    """log l(x) = -0.5 ||A x - y||^2, the workhorse quadratic likelihood."""

    def __init__(self, A, y):
        self.A = np.asarray(A, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if self.A.ndim != 2 or self.y.shape != (self.A.shape[0],):
            raise ValueError("A must be (k, d) and y length k")
        self._K = self.A.T @ self.A
        self._c = self.A.T @ self.y

    @property
    def dim(self):
        return self.A.shape[1]

    def as_quadratic(self):
        """(K, c) with log l = -0.5 x^T K x + c^T x + const."""
        return self._K, self._c

    def log_l(self, X):
        X, single = as_batch(X, self.dim)
        r = X @ self.A.T - self.y
        vals = -0.5 * np.sum(r * r, axis=1)
        return vals[0] if single else vals

    def grad(self, X):
        X, single = as_batch(X, self.dim)
        out = -(X @ self.A.T - self.y) @ self.A
        return out[0] if single else out

    def hess_batch(self, X):
        X, _ = as_batch(X, self.dim)
        return np.broadcast_to(-self._K, (X.shape[0],) + self._K.shape)


class CallableLikelihood:
    """Generic likelihood from batched callables (no quadratic structure)."""

    def __init__(self, dim, log_l, grad, hess_batch):
        self.dim = dim
        self.log_l = log_l
        self.grad = grad
        self.hess_batch = hess_batch

    def as_quadratic(self):
        return None


class _CompositeModel(BlockedDensityModel):
    """prior x likelihood as a BlockedDensityModel (generic likelihoods)."""

    def __init__(self, prior, likelihood, graph):
        self.prior = prior
        self.likelihood = likelihood
        self.blocks = prior.blocks
        self.graph = graph

    def log_density(self, x):
        return self.prior.log_density(x) + self.likelihood.log_l(x)

    def score(self, x):
        return self.prior.score(x) + self.likelihood.grad(x)

    def hessian(self, x):
        return self.hessian_batch(x)[0]

    def hessian_batch(self, X):
        X, _ = as_batch(X, self.dim)
        return self.prior.hessian_batch(X) + self.likelihood.hess_batch(X)


class PosteriorProblem:
    """Gaussian prior N(0, C) tilted by a likelihood, sharing one dependency
    graph, with the spectral and neighborhood-growth constants recorded.

    hessian_bounds (m, M) must satisfy m I <= C^{-1} <= M I and
    m I <= -grad^2 log posterior <= M I; for quadratic likelihoods they are
    computed exactly from the two precision spectra.
    """

    def __init__(self, prior: GaussianModel, likelihood, S, nu, graph=None,
                 hessian_bounds=None):
        if np.any(prior.mean != 0.0):
            raise ValueError("the whitened construction assumes a centered prior")
        self.prior = prior
        self.likelihood = likelihood
        self.S = float(S)
        self.nu = int(nu)
        quad = likelihood.as_quadratic()
        if graph is None:
            if quad is None:
                raise ValueError("generic likelihoods need an explicit graph")
            K, _ = quad
            graph = _block_sparsity_graph(prior.precision + K, prior.blocks)
        self.graph = graph
        cert = certify_locality(graph, S, nu, q_max=max(1, diameter(graph)))
        if not cert.ok:
            raise ValueError(
                f"shared graph is not ({S}, {nu})-local: vertex {cert.vertex} at "
                f"radius {cert.radius} has {cert.size} > {cert.bound:.6g}"
            )

        if quad is not None:
            K, c = quad
            post_prec = prior.precision + K
            w_post = np.linalg.eigvalsh(post_prec)
            w_pri = prior.spectrum_bounds
            self.hessian_bounds = (
                min(w_pri[0], float(w_post[0])),
                max(w_pri[1], float(w_post[-1])),
            )
            self._posterior = GaussianModel(
                post_prec,
                mean=np.linalg.solve(post_prec, c),
                blocks=prior.blocks,
                graph=graph,
            )
        else:
            if hessian_bounds is None:
                raise ValueError("generic likelihoods need explicit hessian_bounds")
            self.hessian_bounds = tuple(hessian_bounds)
            self._posterior = _CompositeModel(prior, likelihood, graph)
        if self.hessian_bounds[0] <= 0:
            raise ValueError("posterior problem needs a positive convexity bound")

    @property
    def blocks(self) -> BlockStructure:
        return self.prior.blocks

    @property
    def posterior_model(self):
        return self._posterior

    @property
    def marginal_error_constant(self) -> float:
        """The proof-level constant m^{-3/2} (S nu! kappa^nu)^2 multiplying the
        residue factor in the certificate."""
        m, M = self.hessian_bounds
        kappa = M / m
        return m ** (-1.5) * (self.S * math.factorial(self.nu) * kappa**self.nu) ** 2


def whiten(prior: GaussianModel, x):
    """x_tilde = C^{-1/2} x."""
    x = np.asarray(x, dtype=float)
    return x @ prior.inv_sqrt_covariance


def unwhiten(prior: GaussianModel, x_tilde):
    x_tilde = np.asarray(x_tilde, dtype=float)
    return x_tilde @ prior.sqrt_covariance


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass
class DiagnosticMatrices:
    """Whitened second-moment diagnostics assembled per block.

    m_blocks[j] combines gradient and curvature information for block j;
    g_blocks[k] holds only the gradient term; h_table[j][k] the (j, k)
    curvature cross term (a d_j x d_j matrix). sampling_measure records which
    distribution the samples were supposed to come from ("target", "ridge" or
    "exact") -- a provenance tag, since the samples themselves cannot be
    checked against it.
    """

    m_blocks: list
    g_blocks: list
    h_table: list
    n_samples: int
    sampling_measure: str
    blocks: BlockStructure

    def consistency_residual(self) -> float:
        """max_j || m_blocks[j] - (g_blocks[j] + sum_k h_table[j][k]) ||;
        zero (to rounding) when everything is estimated from one sample set."""
        worst = 0.0
        for j, Mj in enumerate(self.m_blocks):
            recon = self.g_blocks[j] + sum(self.h_table[j])
            worst = max(worst, float(np.linalg.norm(Mj - recon, 2)))
        return worst


def _symmetrize_psd(mat):
    return 0.5 * (mat + mat.T)


def _assemble_diagnostics(blocks, Egg, EBB, B_blocks_mean, n, tag):
    b = blocks.num_blocks
    m_blocks, g_blocks = [], []
    for j in range(b):
        s = blocks.slice_of(j)
        m_blocks.append(_symmetrize_psd(Egg[s, s] + EBB[s, s]))
        g_blocks.append(_symmetrize_psd(Egg[s, s]))
    h_table = [[_symmetrize_psd(B_blocks_mean[j][k]) for k in range(b)] for j in range(b)]
    return DiagnosticMatrices(m_blocks, g_blocks, h_table, n, tag, blocks)


def estimate_diagnostics(problem: PosteriorProblem, samples, measure_tag) -> DiagnosticMatrices:
    """Monte Carlo diagnostics from samples (original coordinates) of the
    tagged measure: means of g g^T + B B and of the per-pair products
    B_{jk} B_{kj}, everything pulled back through C^{1/2}."""
    X, _ = as_batch(samples, problem.prior.dim)
    n = X.shape[0]
    if n == 0:
        raise ValueError("need at least one sample")
    S = problem.prior.sqrt_covariance
    blocks = problem.blocks
    b = blocks.num_blocks
    g = problem.likelihood.grad(X) @ S
    Egg = (g.T @ g) / n

    quad = problem.likelihood.as_quadratic()
    if quad is not None:
        K, _ = quad
        Bt = -S @ K @ S  # constant whitened curvature of log l
        EBB = Bt @ Bt
        Bmean = [
            [
                Bt[blocks.slice_of(j), blocks.slice_of(k)]
                @ Bt[blocks.slice_of(k), blocks.slice_of(j)]
                for k in range(b)
            ]
            for j in range(b)
        ]
    else:
        d = problem.prior.dim
        EBB = np.zeros((d, d))
        Bmean = [
            [np.zeros((int(blocks.block_sizes[j]),) * 2) for _ in range(b)]
            for j in range(b)
        ]
        for Bi in problem.likelihood.hess_batch(X):
            Bt = S @ Bi @ S
            EBB += Bt @ Bt
            for j in range(b):
                sj = blocks.slice_of(j)
                for k in range(b):
                    sk = blocks.slice_of(k)
                    Bmean[j][k] += Bt[sj, sk] @ Bt[sk, sj]
        EBB /= n
        Bmean = [[Mjk / n for Mjk in row] for row in Bmean]
    return _assemble_diagnostics(blocks, Egg, EBB, Bmean, n, measure_tag)


def exact_gaussian_diagnostics(problem: PosteriorProblem, under: GaussianModel) -> DiagnosticMatrices:
    """Population diagnostics under a Gaussian measure, for quadratic
    likelihoods: E[g g^T] = K Sigma K + (c - K mu)(c - K mu)^T."""
    quad = problem.likelihood.as_quadratic()
    if quad is None:
        raise ValueError("closed-form diagnostics need a quadratic likelihood")
    K, c = quad
    S = problem.prior.sqrt_covariance
    mu, Sigma = under.mean, under.covariance
    r = c - K @ mu
    Egg = S @ (K @ Sigma @ K + np.outer(r, r)) @ S
    Bt = -S @ K @ S
    blocks = problem.blocks
    b = blocks.num_blocks
    Bmean = [
        [
            Bt[blocks.slice_of(j), blocks.slice_of(k)]
            @ Bt[blocks.slice_of(k), blocks.slice_of(j)]
            for k in range(b)
        ]
        for j in range(b)
    ]
    return _assemble_diagnostics(blocks, Egg, Bt @ Bt, Bmean, 0, "exact")


# ---------------------------------------------------------------------------
# Basis
# ---------------------------------------------------------------------------


@dataclass
class LLISBasis:
    """Per-block orthonormal retained directions in whitened coordinates."""

    bases: list  # U_j, shape (d_j, r_j)
    ranks: np.ndarray
    epsilon: float
    eigenvalues: list
    blocks: BlockStructure

    def retained_projector(self, j):
        U = self.bases[j]
        return U @ U.T

    def complement_projector(self, j):
        U = self.bases[j]
        return np.eye(U.shape[0]) - U @ U.T

    def full_projector(self):
        """Block-diagonal projector onto the retained whitened subspace."""
        d = self.blocks.total_dim
        P = np.zeros((d, d))
        for j in range(self.blocks.num_blocks):
            s = self.blocks.slice_of(j)
            P[s, s] = self.retained_projector(j)
        return P

    @property
    def total_rank(self) -> int:
        return int(self.ranks.sum())


def _fix_sign(U):
    for col in range(U.shape[1]):
        idx = int(np.argmax(np.abs(U[:, col])))
        if U[idx, col] < 0:
            U[:, col] = -U[:, col]
    return U


def build_basis(diag: DiagnosticMatrices, epsilon) -> LLISBasis:
    """Minimal per-block ranks capturing a (1 - epsilon) trace fraction of the
    diagnostic blocks; deterministic eigenvector signs.

    Blocks with (numerically) zero trace are fully uninformed and get rank 0.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    blocks = diag.blocks
    scale = max((float(np.trace(Mj)) for Mj in diag.m_blocks), default=0.0)
    tol = 1e-12 * max(1.0, scale)
    bases, ranks, eigs = [], [], []
    for j, Mj in enumerate(diag.m_blocks):
        asym = np.linalg.norm(Mj - Mj.T, 2)
        if asym > 1e-8 * max(1.0, np.linalg.norm(Mj, 2)):
            raise ValueError(f"diagnostic block {j} is not symmetric (defect {asym:.3g})")
        w, V = np.linalg.eigh(_symmetrize_psd(Mj))
        order = np.argsort(w)[::-1]
        w, V = w[order], V[:, order]
        tr = float(np.trace(Mj))
        if tr <= tol:
            r = 0
        else:
            r = int(np.searchsorted(np.cumsum(w), (1.0 - epsilon) * tr) + 1)
            r = min(r, Mj.shape[0])
        bases.append(_fix_sign(V[:, :r].copy()))
        ranks.append(r)
        eigs.append(w)
    return LLISBasis(bases, np.array(ranks, dtype=int), float(epsilon), eigs, blocks)


# ---------------------------------------------------------------------------
# Ridge posterior
# ---------------------------------------------------------------------------


class _MCRidgeModel(BlockedDensityModel):
    """Ridge posterior for non-quadratic likelihoods: the ridge likelihood is
    a shared-node Gaussian quadrature over the uninformed directions."""

    def __init__(self, prior, likelihood, Qr, Xperp_nodes, graph):
        self.prior = prior
        self.likelihood = likelihood
        self.Qr = Qr
        self.Xperp = Xperp_nodes  # (n_mc, d) offsets in original coordinates
        self.blocks = prior.blocks
        self.graph = graph

    def _log_lr(self, X):
        Xr = X @ self.Qr.T
        vals = np.zeros(X.shape[0])
        for off in self.Xperp:
            vals += self.likelihood.log_l(Xr + off)
        return vals / self.Xperp.shape[0]

    def _grad_lr(self, X):
        Xr = X @ self.Qr.T
        out = np.zeros_like(X)
        for off in self.Xperp:
            out += self.likelihood.grad(Xr + off)
        return (out / self.Xperp.shape[0]) @ self.Qr

    def log_density(self, x):
        X, single = as_batch(x, self.dim)
        vals = self.prior.log_density(X) + self._log_lr(X)
        return vals[0] if single else vals

    def score(self, x):
        X, single = as_batch(x, self.dim)
        out = self.prior.score(X) + self._grad_lr(X)
        return out[0] if single else out

    def hessian(self, x):
        return self.hessian_batch(x)[0]

    def hessian_batch(self, X):
        X, _ = as_batch(X, self.dim)
        Xr = X @ self.Qr.T
        acc = np.zeros((X.shape[0], self.dim, self.dim))
        for off in self.Xperp:
            acc += self.likelihood.hess_batch(Xr + off)
        acc /= self.Xperp.shape[0]
        return self.prior.hessian_batch(X) + np.einsum(
            "ij,njk,kl->nil", self.Qr.T, acc, self.Qr
        )


@dataclass
class RidgePosterior:
    """The ridge approximation pi_r ~ l_r(x_r) pi_0(x) and its plumbing.

    log l_r averages the log-likelihood over the uninformed prior directions:
    exactly (a trace shift) for quadratic likelihoods, by shared quasi-random
    Gaussian nodes otherwise. model is a full BlockedDensityModel for pi_r.
    """

    basis: LLISBasis
    prior: GaussianModel
    model: BlockedDensityModel
    projector: np.ndarray  # oblique P_r = C^{1/2} Ptilde_r C^{-1/2}
    log_l_r: object

    def reduced_coordinates(self, x):
        return np.asarray(x) @ self.projector.T


def build_ridge_posterior(problem: PosteriorProblem, basis: LLISBasis, n_mc=256) -> RidgePosterior:
    prior = problem.prior
    Pt = basis.full_projector()
    Sc = prior.sqrt_covariance
    Qr = Sc @ Pt @ prior.inv_sqrt_covariance

    quad = problem.likelihood.as_quadratic()
    if quad is not None:
        K, c = quad
        prec_r = prior.precision + Qr.T @ K @ Qr
        prec_r = 0.5 * (prec_r + prec_r.T)
        model = GaussianModel(prec_r, mean=np.linalg.solve(prec_r, Qr.T @ c),
                              blocks=prior.blocks)
        log_l_r = lambda X: problem.likelihood.log_l(np.asarray(X) @ Qr.T)
        return RidgePosterior(basis, prior, model, Qr, log_l_r)

    # shared quasi-random Gaussian nodes in the complement coordinates
    d = prior.dim
    comp_cols = []
    for j in range(problem.blocks.num_blocks):
        U = basis.bases[j]
        w, V = np.linalg.eigh(np.eye(U.shape[0]) - U @ U.T)
        keep = V[:, w > 0.5]
        col = np.zeros((d, keep.shape[1]))
        col[problem.blocks.slice_of(j), :] = keep
        comp_cols.append(col)
    Vperp = np.concatenate(comp_cols, axis=1) if comp_cols else np.zeros((d, 0))
    d_perp = Vperp.shape[1]
    if d_perp:
        sob = qmc.Sobol(d_perp, scramble=True, seed=1234)
        u = sob.random(n_mc)
        nodes = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
        Xperp = nodes @ Vperp.T @ Sc  # offsets in original coordinates
    else:
        Xperp = np.zeros((1, d))
    model = _MCRidgeModel(prior, problem.likelihood, Qr, Xperp, problem.graph)
    return RidgePosterior(basis, prior, model, Qr, model._log_lr)


# ---------------------------------------------------------------------------
# Certificate
# ---------------------------------------------------------------------------


def eigenvalue_residue(C, U) -> float:
    """tr(P_perp C P_perp) for the orthogonal complement of span(U)."""
    C = np.asarray(C, dtype=float)
    res = float(np.trace(C) - np.trace(U.T @ C @ U))
    return max(res, 0.0)


@dataclass
class CertificateReport:
    value: float
    constant: float
    residue_factor: float
    per_block_terms: np.ndarray
    diagnostics: DiagnosticMatrices


def error_certificate(problem: PosteriorProblem, ridge: RidgePosterior,
                      samples_from_pi_r) -> CertificateReport:
    """A-posteriori bound on the worst marginal W1 error of the ridge
    approximation: the proof constant times the square-rooted worst-block
    diagnostic residue, with diagnostics estimated under pi_r."""
    diag = estimate_diagnostics(problem, samples_from_pi_r, "ridge")
    basis = ridge.basis
    b = problem.blocks.num_blocks
    terms = np.empty(b)
    for k in range(b):
        t = eigenvalue_residue(diag.g_blocks[k], basis.bases[k])
        for j in range(b):
            t += eigenvalue_residue(diag.h_table[j][k], basis.bases[j])
        terms[k] = t
    residue_factor = float(np.sqrt(terms.max()))
    c_pi = problem.marginal_error_constant
    return CertificateReport(c_pi * residue_factor, c_pi, residue_factor, terms, diag)

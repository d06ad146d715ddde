"""Empirical marginal Wasserstein-1 distances, score discrepancies, and the
per-block transport inequality verifiers."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .blocks import slice_block
from .langevin import LangevinConfig, draw_samples
from .models import GaussianModel, as_batch


class UnsupportedMarginalMetric(ValueError):
    pass


# ---------------------------------------------------------------------------
# One-dimensional W1
# ---------------------------------------------------------------------------


def empirical_w1_1d(samples_a, samples_b) -> float:
    """W1 between the empirical measures of two 1-d samples.

    Equal sizes reduce to the mean absolute difference of order statistics;
    otherwise the quantile functions are integrated exactly over the merged
    quantile grid.
    """
    a = np.sort(np.asarray(samples_a, dtype=float).ravel())
    b = np.sort(np.asarray(samples_b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample array")
    n, m = a.size, b.size
    if n == m:
        return float(np.abs(a - b).mean())
    edges = np.unique(np.concatenate([[0.0], np.arange(1, n) / n, np.arange(1, m) / m, [1.0]]))
    mids = 0.5 * (edges[:-1] + edges[1:])
    ia = np.minimum((mids * n).astype(int), n - 1)
    ib = np.minimum((mids * m).astype(int), m - 1)
    return float(np.sum(np.diff(edges) * np.abs(a[ia] - b[ib])))


def gaussian_w1_1d(mu1, sigma1, mu2, sigma2) -> float:
    """Exact W1 between two 1-d Gaussians via the comonotone coupling:
    E |(mu1 - mu2) + (sigma1 - sigma2) Z|."""
    a = mu1 - mu2
    s = sigma1 - sigma2
    if abs(s) < 1e-300:
        return abs(a)
    c = a / abs(s)
    phi = math.exp(-0.5 * c * c) / math.sqrt(2.0 * math.pi)
    Phi = 0.5 * (1.0 + math.erf(c / math.sqrt(2.0)))
    return abs(s) * (2.0 * phi + c * (2.0 * Phi - 1.0))


def _psd_sqrt(S):
    w, V = np.linalg.eigh(S)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def gaussian_w2_block(mu1, S1, mu2, S2) -> float:
    """Bures 2-Wasserstein distance between Gaussian blocks; an upper bound
    on their W1 distance."""
    R = _psd_sqrt(S1)
    cross = _psd_sqrt(R @ S2 @ R)
    val = float(np.sum((mu1 - mu2) ** 2) + np.trace(S1) + np.trace(S2) - 2.0 * np.trace(cross))
    return math.sqrt(max(val, 0.0))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class MarginalW1Report:
    per_block_w1: np.ndarray
    max_w1: float
    method: str  # "empirical_1d", "gaussian_exact" or "gaussian_w2_upper"
    sample_sizes: tuple


@dataclass
class ScoreDiscrepancy:
    """E_pi || grad_j log pi' - grad_j log pi || per block, with MC errors."""

    per_block_l1: np.ndarray
    max_l1: float
    mc_standard_errors: np.ndarray


@dataclass
class InequalityReport:
    lhs: float
    rhs: float
    slack: float
    tolerance: float
    passed: bool
    lhs_method: str
    per_block_w1: np.ndarray | None
    discrepancy: ScoreDiscrepancy
    delta_value: float


# ---------------------------------------------------------------------------
# Score discrepancy
# ---------------------------------------------------------------------------


def score_discrepancy(pi, pi_prime, samples_from_pi) -> ScoreDiscrepancy:
    """Monte Carlo average of per-block score differences, integrated under
    pi (the measure the samples were drawn from)."""
    if pi.blocks != pi_prime.blocks:
        raise ValueError("models do not share a block structure")
    X, _ = as_batch(samples_from_pi, pi.dim)
    n = X.shape[0]
    diff = pi_prime.score(X) - pi.score(X)
    b = pi.blocks.num_blocks
    per_block = np.empty(b)
    ses = np.empty(b)
    for j in range(b):
        norms = np.linalg.norm(slice_block(diff, pi.blocks, j), axis=1)
        per_block[j] = norms.mean()
        ses[j] = norms.std(ddof=1) / math.sqrt(n) if n > 1 else 0.0
    return ScoreDiscrepancy(per_block, float(per_block.max()), ses)


# ---------------------------------------------------------------------------
# Sampling helper
# ---------------------------------------------------------------------------


def model_samples(model, n, seed, langevin_cfg: LangevinConfig | None = None, thin=5):
    """Draw n samples: exact for Gaussians, Langevin otherwise."""
    if isinstance(model, GaussianModel):
        return model.sample(n, np.random.default_rng(seed))
    if langevin_cfg is None:
        raise ValueError("non-Gaussian models need an explicit LangevinConfig")
    cfg = LangevinConfig(
        step_size=langevin_cfg.step_size,
        num_steps=langevin_cfg.num_steps,
        burn_in=langevin_cfg.burn_in,
        num_chains=langevin_cfg.num_chains,
        seed=seed,
        propagate_jacobian=False,
    )
    return draw_samples(model, n, cfg, thin=thin)


def _gaussian_marginal_moments(model: GaussianModel, j):
    s = model.blocks.slice_of(j)
    C = model.covariance
    return model.mean[s], C[s, s]


def marginal_w1_report(pi, pi_prime, n_samples=0, seed=0, langevin_cfg=None,
                       thin=5) -> MarginalW1Report:
    """Per-block W1 between two models' marginals.

    Gaussian pairs use the exact 1-d formula on scalar blocks and the Bures
    upper bound otherwise (flagged in method); anything else is estimated
    from samples on scalar blocks.
    """
    if pi.blocks != pi_prime.blocks:
        raise ValueError("models do not share a block structure")
    blocks = pi.blocks
    b = blocks.num_blocks
    per_block = np.empty(b)
    both_gauss = isinstance(pi, GaussianModel) and isinstance(pi_prime, GaussianModel)
    if both_gauss:
        for j in range(b):
            mu1, S1 = _gaussian_marginal_moments(pi, j)
            mu2, S2 = _gaussian_marginal_moments(pi_prime, j)
            if S1.shape == (1, 1):
                per_block[j] = gaussian_w1_1d(
                    mu1[0], math.sqrt(S1[0, 0]), mu2[0], math.sqrt(S2[0, 0])
                )
            else:
                per_block[j] = gaussian_w2_block(mu1, S1, mu2, S2)
        method = "gaussian_exact" if blocks.scalar_blocks() else "gaussian_w2_upper"
        return MarginalW1Report(per_block, float(per_block.max()), method, (0, 0))
    if not blocks.scalar_blocks():
        raise UnsupportedMarginalMetric(
            "marginal W1 for non-scalar blocks is only available for Gaussian pairs"
        )
    Xa = model_samples(pi, n_samples, seed, langevin_cfg, thin=thin)
    Xb = model_samples(pi_prime, n_samples, seed + 1, langevin_cfg, thin=thin)
    for j in range(b):
        per_block[j] = empirical_w1_1d(Xa[:, j], Xb[:, j])
    return MarginalW1Report(
        per_block, float(per_block.max()), "empirical_1d", (n_samples, n_samples)
    )


def _empirical_floor(model, n, seed, langevin_cfg, thin=5):
    """Resolution of the empirical per-block W1 estimator: distance between
    two independent sample sets of the same model (true value 0)."""
    Xa = model_samples(model, n, seed + 101, langevin_cfg, thin=thin)
    Xb = model_samples(model, n, seed + 202, langevin_cfg, thin=thin)
    return max(
        empirical_w1_1d(Xa[:, j], Xb[:, j]) for j in range(model.blocks.num_blocks)
    )


# ---------------------------------------------------------------------------
# Inequality verifiers
# ---------------------------------------------------------------------------


def verify_marginal_inequality(
    pi, pi_prime, delta, n_samples, seed, langevin_cfg=None, thin=5
) -> InequalityReport:
    """Check max_i W1(pi_i, pi'_i) <= delta * max_j E_pi ||grad_j log pi' -
    grad_j log pi|| with a purely statistical pass tolerance.

    delta must certify pi_prime (the localized side); the score discrepancy
    integrates under pi.
    """
    X = model_samples(pi, n_samples, seed, langevin_cfg, thin=thin)
    disc = score_discrepancy(pi, pi_prime, X)
    rhs = delta.value * disc.max_l1
    j_star = int(disc.per_block_l1.argmax())
    tolerance = 3.0 * delta.value * disc.mc_standard_errors[j_star]

    both_gauss = isinstance(pi, GaussianModel) and isinstance(pi_prime, GaussianModel)
    if both_gauss:
        rep = marginal_w1_report(pi, pi_prime)
    else:
        rep = marginal_w1_report(pi, pi_prime, n_samples, seed + 1, langevin_cfg, thin=thin)
        tolerance += _empirical_floor(pi, n_samples, seed, langevin_cfg, thin=thin)
    lhs = rep.max_w1
    return InequalityReport(
        lhs=lhs,
        rhs=rhs,
        slack=rhs - lhs,
        tolerance=tolerance,
        passed=lhs <= rhs + tolerance,
        lhs_method=rep.method,
        per_block_w1=rep.per_block_w1,
        discrepancy=disc,
        delta_value=delta.value,
    )


def assignment_w1(points_a, points_b) -> float:
    """Exact W1 between two equal-size empirical point clouds by solving the
    linear assignment problem on Euclidean costs."""
    A = np.atleast_2d(np.asarray(points_a, dtype=float))
    B = np.atleast_2d(np.asarray(points_b, dtype=float))
    if A.shape != B.shape:
        raise ValueError("point clouds must have equal size and dimension")
    cost = cdist(A, B)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


def verify_multiblock_inequality(
    pi,
    pi_prime,
    delta,
    index_set,
    n_samples,
    seed,
    langevin_cfg=None,
    max_pairs=2000,
) -> InequalityReport:
    """Check W1(pi_I, pi'_I) <= delta |I| * max_j E_pi ||grad_j log pi' -
    grad_j log pi|| using an exact assignment solver on subsampled clouds.

    Supported for scalar blocks and |I| <= 3 (the assignment estimator's bias
    enters the tolerance through a same-distribution floor).
    """
    I = sorted(int(i) for i in index_set)
    if len(I) == 0 or len(I) > 3:
        raise UnsupportedMarginalMetric("index sets with 1 <= |I| <= 3 are supported")
    blocks = pi.blocks
    for i in I:
        blocks._check_index(i)
        if blocks.block_sizes[i] != 1:
            raise UnsupportedMarginalMetric("multiblock W1 needs scalar blocks")
    coords = np.array([blocks.slice_of(i).start for i in I])

    X = model_samples(pi, n_samples, seed, langevin_cfg)
    Y = model_samples(pi_prime, n_samples, seed + 1, langevin_cfg)
    Xf = model_samples(pi, n_samples, seed + 7, langevin_cfg)
    Xf2 = model_samples(pi, n_samples, seed + 8, langevin_cfg)
    disc = score_discrepancy(pi, pi_prime, X)
    rhs = delta.value * len(I) * disc.max_l1
    j_star = int(disc.per_block_l1.argmax())

    rng = np.random.default_rng(seed + 3)
    k = min(max_pairs, n_samples)
    sub = lambda Z: Z[rng.choice(Z.shape[0], size=k, replace=False)]
    lhs = assignment_w1(sub(X)[:, coords], sub(Y)[:, coords])
    # null envelope: the assignment estimator's value on same-distribution
    # clouds (true W1 = 0), averaged over two replicates with headroom for
    # its own fluctuation
    floor = 1.5 * 0.5 * (
        assignment_w1(sub(X)[:, coords], sub(Xf)[:, coords])
        + assignment_w1(sub(Xf2)[:, coords], sub(Xf)[:, coords])
    )
    tolerance = floor + 3.0 * delta.value * len(I) * disc.mc_standard_errors[j_star]
    return InequalityReport(
        lhs=lhs,
        rhs=rhs,
        slack=rhs - lhs,
        tolerance=tolerance,
        passed=lhs <= rhs + tolerance,
        lhs_method="assignment",
        per_block_w1=None,
        discrepancy=disc,
        delta_value=delta.value,
    )

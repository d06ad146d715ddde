"""Closed-form locality constants and numerical verifiers for the matrix-ODE
decay, series, infinity-norm and covariance-square-root row-decay lemmas."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc, gammaln

from .blocks import BlockStructure, unit_blocks
from .graphs import DependencyGraph, all_pairs_distances, certify_locality, diameter


class NotLogConcaveError(ValueError):
    pass


class DominanceViolation(ValueError):
    def __init__(self, c, worst_row, row_margin):
        super().__init__(
            f"diagonal block dominance violated: c = {c:.6g} <= 0 "
            f"(worst row {worst_row}, margin {row_margin:.6g})"
        )
        self.c = c
        self.worst_row = worst_row
        self.row_margin = row_margin


@dataclass(frozen=True)
class DeltaBound:
    """A certified locality constant together with its provenance."""

    value: float
    source: str  # "graphical" or "diagonal_dominant"
    inputs: dict = field(default_factory=dict)


def delta_graphical(S, nu, m, M) -> DeltaBound:
    """delta = S * nu! * kappa^nu / m with kappa = M/m, for log-concave models
    on a graph whose q-neighborhoods grow like 1 + S q^nu."""
    if m <= 0:
        raise NotLogConcaveError(f"need a positive convexity lower bound, got m={m}")
    if M < m:
        raise ValueError(f"need M >= m, got m={m}, M={M}")
    if S < 1:
        raise ValueError("S must be >= 1")
    if nu < 1 or int(nu) != nu:
        raise ValueError("nu must be a positive integer")
    kappa = M / m
    value = S * math.factorial(int(nu)) * kappa ** int(nu) / m
    return DeltaBound(value, "graphical", {"S": S, "nu": int(nu), "m": m, "M": M, "kappa": kappa})


def delta_diag_dominant(M_matrix) -> DeltaBound:
    """delta = 1/c with c = min_i (M_ii - sum_{j != i} M_ij) for a nonnegative
    dominance matrix of block Hessian bounds.

    c is simultaneously the strong log-concavity constant: it is the Gersgorin
    lower bound on the eigenvalues of M'_ij = 2 M_ii 1_{i=j} - M_ij.
    Raises DominanceViolation (reporting the worst row) when c <= 0.
    """
    Mm = np.asarray(M_matrix, dtype=float)
    if Mm.ndim != 2 or Mm.shape[0] != Mm.shape[1]:
        raise ValueError("dominance matrix must be square")
    if np.any(Mm < 0):
        raise ValueError("dominance matrix entries must be >= 0")
    margins = np.diag(Mm) - (Mm.sum(axis=1) - np.diag(Mm))
    worst = int(margins.argmin())
    c = float(margins[worst])
    if c <= 0:
        raise DominanceViolation(c, worst, c)
    return DeltaBound(
        1.0 / c,
        "diagonal_dominant",
        {"c": c, "log_concavity": c, "worst_row": worst, "dominance_matrix": Mm},
    )


def gersgorin_lower_bound(M_matrix) -> float:
    """Smallest Gersgorin disc edge of M'_ij = 2 M_ii 1_{i=j} - M_ij."""
    Mm = np.asarray(M_matrix, dtype=float)
    Mp = 2.0 * np.diag(np.diag(Mm)) - Mm
    return float(np.min(np.diag(Mp) - (np.abs(Mp).sum(axis=1) - np.abs(np.diag(Mp)))))


def dominance_matrix_from_model(model, probe_points) -> np.ndarray:
    """Block bounds of H = -grad^2 log pi over probes: worst-case smallest
    eigenvalue on the diagonal, largest spectral norm off it."""
    from .models import as_batch

    X, _ = as_batch(probe_points, model.dim)
    if X.shape[0] == 0:
        raise ValueError("need at least one probe point")
    if model.constant_hessian:
        X = X[:1]
    blocks = model.blocks
    b = blocks.num_blocks
    out = np.zeros((b, b))
    out[np.diag_indices(b)] = np.inf
    for H in model.hessian_batch(X):
        if not np.all(np.isfinite(H)):
            raise ValueError("non-finite Hessian entries")
        Hm = -0.5 * (H + H.T)
        for i in range(b):
            si = blocks.slice_of(i)
            lam_min = np.linalg.eigvalsh(Hm[si, si])[0]
            out[i, i] = min(out[i, i], lam_min)
            for j in range(i + 1, b):
                nrm = np.linalg.norm(Hm[si, blocks.slice_of(j)], 2)
                out[i, j] = max(out[i, j], nrm)
                out[j, i] = max(out[j, i], nrm)
    return out


# ---------------------------------------------------------------------------
# Matrix-ODE decay bound and verifier
# ---------------------------------------------------------------------------


def diffusion_decay_bound(d_graph, t, M) -> float:
    """exp(-tM) * sum_{k >= d_graph} (tM)^k / k!: the upper tail of a
    Poisson(tM) variable, evaluated through the regularized incomplete gamma
    function (stable far beyond tM ~ 700)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if M <= 0:
        raise ValueError("M must be > 0")
    if math.isinf(d_graph):
        return 0.0
    n = int(d_graph)
    if n <= 0:
        return 1.0
    return float(gammainc(n, t * M))


@dataclass
class OdeVerifierReport:
    ok: bool
    worst_margin: float
    worst_at: tuple  # (i, j, t) or (t,) depending on the verifier
    checks: int


def _rk4_matrix_ode(rhs, G0, t_max, dt):
    """Generator of (t, G_t) for dG/dt = rhs(t, G), including t=0."""
    G = G0.copy()
    t = 0.0
    yield t, G
    steps = int(round(t_max / dt))
    for _ in range(steps):
        k1 = rhs(t, G)
        k2 = rhs(t + dt / 2, G + dt / 2 * k1)
        k3 = rhs(t + dt / 2, G + dt / 2 * k2)
        k4 = rhs(t + dt, G + dt * k3)
        G = G + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
        yield t, G


def verify_diffusion_lemma(
    H_path,
    graph: DependencyGraph,
    t_max,
    dt,
    M,
    blocks: BlockStructure | None = None,
    check_every: int = 10,
) -> OdeVerifierReport:
    """Integrate dG/dt = -H_t G from G_0 = I (RK4) and check each block norm
    against the Poisson-tail bound at its graph distance, plus an explicit
    discretization slack.

    H_path is a callable t -> (d, d); it must respect 0 <= H_t <= M I and the
    graph adjacency (checked at the sampled times).
    """
    if blocks is None:
        blocks = unit_blocks(graph.num_vertices)
    d = blocks.total_dim
    dists = all_pairs_distances(graph)
    b = blocks.num_blocks

    def check_hypotheses(t, H):
        w = np.linalg.eigvalsh(0.5 * (H + H.T))
        if w[0] < -1e-9 or w[-1] > M + 1e-9:
            raise ValueError(
                f"H(t={t:.4g}) violates 0 <= H <= {M} I (eigs [{w[0]:.4g}, {w[-1]:.4g}])"
            )
        for i in range(b):
            si = blocks.slice_of(i)
            for j in range(b):
                if dists[i, j] > 1 and np.linalg.norm(H[si, blocks.slice_of(j)], 2) > 1e-12:
                    raise ValueError(
                        f"H(t={t:.4g}) has mass on blocks ({i}, {j}) at graph distance "
                        f"{dists[i, j]:.0f} > 1"
                    )

    def rhs(t, G):
        H = np.asarray(H_path(t), dtype=float)
        return -H @ G

    worst = np.inf
    worst_at = None
    checks = 0
    for step, (t, G) in enumerate(_rk4_matrix_ode(rhs, np.eye(d), t_max, dt)):
        if step % check_every:
            continue
        check_hypotheses(t, np.asarray(H_path(t), dtype=float))
        slack = 10.0 * dt * M * t * max(1.0, np.linalg.norm(G, 2))
        for i in range(b):
            si = blocks.slice_of(i)
            for j in range(b):
                bound = diffusion_decay_bound(dists[i, j], t, M)
                actual = np.linalg.norm(G[si, blocks.slice_of(j)], 2)
                margin = bound + slack - actual
                checks += 1
                if margin < worst:
                    worst = margin
                    worst_at = (i, j, t)
    return OdeVerifierReport(worst >= 0.0, float(worst), worst_at, checks)


def verify_inf_norm_decay(M_matrix, G0, t_max, dt, check_every: int = 10) -> OdeVerifierReport:
    """Integrate dG/dt = -M G (RK4) and check ||G_t||_inf <= e^{-ct} ||G_0||_inf
    for the dominance constant c of M.

    Hypotheses (nonpositive off-diagonal M, c > 0, entrywise nonnegative G0)
    are verified before integrating.
    """
    Mm = np.asarray(M_matrix, dtype=float)
    G0 = np.asarray(G0, dtype=float)
    off = Mm - np.diag(np.diag(Mm))
    if np.any(off > 1e-12):
        raise ValueError("M must have nonpositive off-diagonal entries")
    c = float(np.min(np.diag(Mm) - np.abs(off).sum(axis=1)))
    if c <= 0:
        raise DominanceViolation(c, int(np.argmin(np.diag(Mm) - np.abs(off).sum(axis=1))), c)
    if np.any(G0 < 0):
        raise ValueError("G0 must be entrywise nonnegative")

    g0_inf = np.abs(G0).sum(axis=1).max()
    worst = np.inf
    worst_at = None
    checks = 0
    for step, (t, G) in enumerate(_rk4_matrix_ode(lambda t, G: -Mm @ G, G0, t_max, dt)):
        if step % check_every:
            continue
        slack = 10.0 * dt * np.linalg.norm(Mm, np.inf) * t * max(1.0, g0_inf)
        actual = np.abs(G).sum(axis=1).max()
        margin = math.exp(-c * t) * g0_inf + slack - actual
        checks += 1
        if margin < worst:
            worst = margin
            worst_at = (t,)
    return OdeVerifierReport(worst >= 0.0, float(worst), worst_at, checks)


# ---------------------------------------------------------------------------
# Series bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesBoundCheck:
    lhs: float
    rhs: float
    ok: bool


def li_series_bound_check(t, x, rtol=1e-12) -> SeriesBoundCheck:
    """Compare sum_{k>=1} k^t (1-x)^k against Gamma(t+1) x^{-t-1} (1-x),
    doubled for non-integer t. The series is summed until the remaining tail
    is provably below rtol of the partial sum."""
    if not 0.0 < x < 1.0:
        raise ValueError("x must lie in (0, 1)")
    if t < 0:
        raise ValueError("t must be >= 0")
    q = 1.0 - x
    total = 0.0
    k = 0
    while True:
        k += 1
        term = math.exp(t * math.log(k) + k * math.log(q)) if k > 1 else q
        total += term
        # for k >= t/-log(q) the terms decay faster than geometrically with
        # ratio r_k = ((k+1)/k)^t * q; bound the tail by a geometric series
        ratio = ((k + 1) / k) ** t * q
        if ratio < 1.0:
            tail = term * ratio / (1.0 - ratio)
            if tail <= rtol * total:
                total += tail
                break
        if k > 10_000_000:
            raise RuntimeError("series did not reach its tail tolerance")
    is_integer = abs(t - round(t)) < 1e-12
    factor = 1.0 if is_integer else 2.0
    rhs = factor * math.exp(gammaln(t + 1.0)) * x ** (-t - 1.0) * (1.0 - x)
    ok = total <= rhs * (1.0 + 1e-11)
    return SeriesBoundCheck(total, rhs, ok)


# ---------------------------------------------------------------------------
# Covariance square-root row decay
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SqrtRowDecayCheck:
    max_row_sum: float
    bound: float
    ok: bool


def sqrt_row_decay_check(gauss, S, nu) -> SqrtRowDecayCheck:
    """max_j sum_k ||C^{1/2}(j, k)|| against m^{-1/2} S nu! kappa^nu for a
    Gaussian whose precision plays C^{-1}.

    The graph must actually satisfy the (S, nu) growth condition; the
    spectral bounds (m, M) are taken from the exact precision spectrum.
    """
    cert = certify_locality(gauss.graph, S, nu, q_max=max(1, diameter(gauss.graph)))
    if not cert.ok:
        raise ValueError(
            f"dependency graph is not ({S}, {nu})-local: vertex {cert.vertex} "
            f"has |N^({cert.radius})| = {cert.size} > {cert.bound:.6g}"
        )
    m, M = gauss.spectrum_bounds
    kappa = M / m
    blocks = gauss.blocks
    b = blocks.num_blocks
    Csqrt = gauss.sqrt_covariance
    row_sums = np.zeros(b)
    for j in range(b):
        sj = blocks.slice_of(j)
        row_sums[j] = sum(
            np.linalg.norm(Csqrt[sj, blocks.slice_of(k)], 2) for k in range(b)
        )
    bound = S * math.factorial(int(nu)) * kappa ** int(nu) / math.sqrt(m)
    max_row = float(row_sums.max())
    return SqrtRowDecayCheck(max_row, bound, max_row <= bound * (1.0 + 1e-12))

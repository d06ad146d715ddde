import math

import numpy as np
import pytest
from scipy.stats import wasserstein_distance

from locality_lab import bounds
from locality_lab.blocks import make_blocks
from locality_lab.metrics import (
    InequalityReport,
    UnsupportedMarginalMetric,
    assignment_w1,
    empirical_w1_1d,
    gaussian_w1_1d,
    gaussian_w2_block,
    marginal_w1_report,
    score_discrepancy,
    verify_marginal_inequality,
    verify_multiblock_inequality,
)
from locality_lab.models import GaussianModel, gaussian_from_banded_precision


def test_w1_identical_and_point_masses():
    a = np.random.default_rng(0).standard_normal(500)
    assert empirical_w1_1d(a, a) == 0.0
    assert empirical_w1_1d(np.zeros(40), np.full(17, 2.5)) == pytest.approx(2.5)
    with pytest.raises(ValueError):
        empirical_w1_1d(a, np.array([]))


def test_w1_shift_exact():
    rng = np.random.default_rng(1)
    a = rng.standard_normal(333)
    for c in (-1.7, 0.4):
        assert empirical_w1_1d(a, a + c) == pytest.approx(abs(c), rel=1e-12)


def test_w1_gaussian_shift_converges():
    rng = np.random.default_rng(2)
    n = 100_000
    a = rng.standard_normal(n)
    b = rng.standard_normal(n) + 0.25
    assert abs(empirical_w1_1d(a, b) - 0.25) < 3.0 / math.sqrt(n) * 2


def test_w1_matches_scipy_oracle():
    rng = np.random.default_rng(3)
    for na, nb in ((100, 100), (100, 73), (7, 312)):
        a = rng.standard_normal(na) * rng.uniform(0.5, 2)
        b = rng.standard_normal(nb) + rng.uniform(-1, 1)
        assert empirical_w1_1d(a, b) == pytest.approx(
            wasserstein_distance(a, b), rel=1e-10
        )


def test_w1_metric_properties():
    rng = np.random.default_rng(4)
    for _ in range(10):
        a, b, c = (rng.standard_normal(50) * rng.uniform(0.5, 2) for _ in range(3))
        dab = empirical_w1_1d(a, b)
        assert dab == pytest.approx(empirical_w1_1d(b, a), rel=1e-12)
        assert dab <= empirical_w1_1d(a, c) + empirical_w1_1d(c, b) + 1e-12


def test_gaussian_w1_closed_form():
    assert gaussian_w1_1d(0, 1, 0.3, 1) == pytest.approx(0.3)
    assert gaussian_w1_1d(0, 1, 0, 2) == pytest.approx(math.sqrt(2 / math.pi))
    # numeric quantile-integral oracle
    from scipy.stats import norm

    rng = np.random.default_rng(5)
    us = (np.arange(200_000) + 0.5) / 200_000
    for _ in range(5):
        mu1, mu2 = rng.uniform(-1, 1, 2)
        s1, s2 = rng.uniform(0.3, 2.0, 2)
        quad = np.mean(np.abs(norm.ppf(us, mu1, s1) - norm.ppf(us, mu2, s2)))
        assert gaussian_w1_1d(mu1, s1, mu2, s2) == pytest.approx(quad, rel=1e-3)


def test_gaussian_w2_upper_bounds_w1_in_1d():
    rng = np.random.default_rng(6)
    for _ in range(10):
        mu1, mu2 = rng.uniform(-1, 1, 2)
        s1, s2 = rng.uniform(0.3, 2.0, 2)
        w1 = gaussian_w1_1d(mu1, s1, mu2, s2)
        w2 = gaussian_w2_block(np.array([mu1]), np.array([[s1**2]]),
                               np.array([mu2]), np.array([[s2**2]]))
        assert w1 <= w2 + 1e-12


def test_score_discrepancy_zero_and_halfnormal():
    gm = gaussian_from_banded_precision(6, 1, 1, 0.5, 2.0, seed=1)
    X = gm.sample(2000, np.random.default_rng(0))
    disc = score_discrepancy(gm, gm, X)
    assert disc.max_l1 == 0.0

    # precision 1 vs 1 + eps in 1d: discrepancy = eps E|X| = eps sqrt(2/pi)
    eps = 0.3
    p1 = GaussianModel(np.eye(1))
    p2 = GaussianModel(np.eye(1) * (1 + eps))
    X = p1.sample(200_000, np.random.default_rng(1))
    disc = score_discrepancy(p1, p2, X)
    expected = eps * math.sqrt(2 / math.pi)
    assert abs(disc.per_block_l1[0] - expected) < 3 * disc.mc_standard_errors[0]


def test_score_discrepancy_locality_and_measure_asymmetry():
    lam = np.diag([1.0, 1.0, 1.0])
    lam2 = lam.copy()
    lam2[2, 2] = 2.0
    p1, p2 = GaussianModel(lam), GaussianModel(lam2)
    X = p1.sample(5000, np.random.default_rng(2))
    disc = score_discrepancy(p1, p2, X)
    assert disc.per_block_l1[0] == 0.0 and disc.per_block_l1[1] == 0.0
    assert disc.per_block_l1[2] > 0.1

    # swapping the integration measure changes the value
    Y = p2.sample(5000, np.random.default_rng(3))
    swapped = score_discrepancy(p2, p1, Y)
    assert abs(swapped.per_block_l1[2] - disc.per_block_l1[2]) > 3 * (
        disc.mc_standard_errors[2] + swapped.mc_standard_errors[2]
    )

    with pytest.raises(ValueError):
        score_discrepancy(p1, GaussianModel(np.eye(2)), X[:, :2])


def _pair(seed=0, b=12):
    base = gaussian_from_banded_precision(b, 1, 1, 0.8, 2.0, seed=seed)
    lam2 = base.precision.copy()
    lam2[3, 3] += 0.25
    return base, GaussianModel(lam2, blocks=base.blocks)


def test_verify_marginal_inequality_gaussian():
    pi, pip = _pair()
    m, M = pip.spectrum_bounds
    db = bounds.delta_graphical(2, 1, m, M)
    rep = verify_marginal_inequality(pi, pip, db, 3000, seed=0)
    assert isinstance(rep, InequalityReport)
    assert rep.lhs_method == "gaussian_exact"
    assert rep.passed and rep.slack > 0

    same = verify_marginal_inequality(pi, pi, db, 1000, seed=1)
    assert same.lhs == pytest.approx(0.0, abs=1e-12)
    assert same.rhs == 0.0 and same.passed


def test_marginal_report_block_gaussian_uses_w2_flag():
    blocks = make_blocks([2, 2])
    prec = np.diag([1.0, 2.0, 1.5, 1.0])
    g1 = GaussianModel(prec, blocks=blocks)
    g2 = GaussianModel(prec * 1.3, blocks=blocks)
    rep = marginal_w1_report(g1, g2)
    assert rep.method == "gaussian_w2_upper"
    assert rep.max_w1 > 0


def test_marginal_unsupported_cases():
    blocks = make_blocks([2, 1])
    g1 = GaussianModel(np.eye(3), blocks=blocks)
    from locality_lab.models import gl_chain

    gl = gl_chain(3, 1.0, 0.0, 1.0)
    with pytest.raises(UnsupportedMarginalMetric):
        marginal_w1_report(
            GaussianModel(np.eye(3), blocks=blocks),
            _NonGaussianStub(blocks),
            100, 0,
        )


class _NonGaussianStub:
    def __init__(self, blocks):
        self.blocks = blocks


def test_assignment_w1_matches_sorted_pairing_in_1d():
    rng = np.random.default_rng(7)
    a = rng.standard_normal(64)
    b = rng.standard_normal(64) + 0.4
    assert assignment_w1(a[:, None], b[:, None]) == pytest.approx(
        empirical_w1_1d(a, b), rel=1e-10
    )


def test_assignment_w1_matches_brute_force():
    from itertools import permutations

    rng = np.random.default_rng(8)
    A = rng.standard_normal((6, 2))
    B = rng.standard_normal((6, 2))
    brute = min(
        np.mean([np.linalg.norm(A[i] - B[p[i]]) for i in range(6)])
        for p in permutations(range(6))
    )
    assert assignment_w1(A, B) == pytest.approx(brute, rel=1e-12)


def test_verify_multiblock():
    pi, pip = _pair(seed=5)
    m, M = pip.spectrum_bounds
    db = bounds.delta_graphical(2, 1, m, M)
    rep = verify_multiblock_inequality(pi, pip, db, [2, 3], 2000, seed=0,
                                       max_pairs=400)
    assert rep.passed

    same = verify_multiblock_inequality(pi, pi, db, [1, 4], 1500, seed=1,
                                        max_pairs=400)
    assert same.rhs == 0.0
    assert same.lhs <= same.tolerance  # floor absorbs the sampling bias

    with pytest.raises(UnsupportedMarginalMetric):
        verify_multiblock_inequality(pi, pip, db, [0, 1, 2, 3], 100, 0)
    blocks = make_blocks([2, 1])
    g1 = GaussianModel(np.eye(3), blocks=blocks)
    g2 = GaussianModel(np.eye(3) * 1.2, blocks=blocks)
    with pytest.raises(UnsupportedMarginalMetric):
        verify_multiblock_inequality(g1, g2, db, [0], 100, 0)

import numpy as np
import pytest

from locality_lab.blocks import make_blocks
from locality_lab.graphs import banded_graph
from locality_lab.models import (
    CliquePotentialModel,
    GaussianModel,
    PolynomialCliquePotential,
    convexity_bounds,
    extract_graph,
    gaussian_from_banded_precision,
    gl_chain,
)


def fd_score(model, x, eps=1e-6):
    d = model.dim
    out = np.empty(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = eps
        out[i] = (model.log_density(x + e) - model.log_density(x - e)) / (2 * eps)
    return out


def fd_hessian(model, x, eps=1e-5):
    d = model.dim
    out = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = eps
        out[:, j] = (model.score(x + e) - model.score(x - e)) / (2 * eps)
    return out


def example_models():
    rng = np.random.default_rng(1)
    gauss = gaussian_from_banded_precision(5, [1, 2, 1, 1, 2], 1, 0.5, 2.0, seed=4)
    gl = gl_chain(6, 1.3, 0.8, 0.7)
    # quartic clique chain
    graph = banded_graph(4, 1)
    blocks = make_blocks([1, 1, 1, 1])
    pots = []
    for j in range(4):
        coords = graph.neighbors(j)
        k = len(coords)
        expo = np.vstack([2 * np.eye(k, dtype=int), 4 * np.eye(k, dtype=int)])
        coeffs = -np.abs(rng.standard_normal(2 * k)) * 0.3
        pots.append(PolynomialCliquePotential(expo, coeffs))
    clique = CliquePotentialModel(graph, blocks, pots)
    return [gauss, gl, clique]


def test_score_and_hessian_match_finite_differences():
    rng = np.random.default_rng(7)
    for model in example_models():
        for _ in range(20):
            x = rng.standard_normal(model.dim)
            s = model.score(x)
            scale = max(1.0, np.abs(s).max())
            assert np.abs(fd_score(model, x) - s).max() / scale < 1e-4
            H = model.hessian(x)
            hscale = max(1.0, np.abs(H).max())
            assert np.abs(fd_hessian(model, x) - H).max() / hscale < 1e-4


def test_hessian_blocks_transpose_symmetry_and_graph_sparsity():
    rng = np.random.default_rng(8)
    for model in example_models():
        x = rng.standard_normal(model.dim)
        b = model.blocks.num_blocks
        for j in range(b):
            for k in range(b):
                Hjk = model.hessian_block(x, j, k)
                Hkj = model.hessian_block(x, k, j)
                assert np.allclose(Hjk, Hkj.T, atol=1e-10)
                if not model.graph.has_edge(j, k):
                    assert np.abs(Hjk).max() < 1e-12


def test_batched_and_single_evaluations_agree():
    rng = np.random.default_rng(9)
    for model in example_models():
        X = rng.standard_normal((5, model.dim))
        batch = model.score(X)
        for i in range(5):
            assert np.allclose(batch[i], model.score(X[i]), atol=1e-12)
        assert np.allclose(model.log_density(X)[2], model.log_density(X[2]))


# -- Gaussian ---------------------------------------------------------------


def test_gaussian_sqrt_covariance():
    gm = gaussian_from_banded_precision(6, 1, 1, 0.5, 2.0, seed=0)
    S = gm.sqrt_covariance
    assert np.allclose(S, S.T)
    assert np.allclose(S @ S, gm.covariance, atol=1e-12)
    assert np.allclose(gm.inv_sqrt_covariance @ S, np.eye(6), atol=1e-12)
    ident = GaussianModel(np.eye(3))
    assert np.allclose(ident.covariance, np.eye(3))
    assert np.allclose(ident.sqrt_covariance, np.eye(3))


def test_banded_generator_spectrum_and_graph():
    gm = gaussian_from_banded_precision(12, 1, 1, 0.7, 2.5, seed=3)
    w = np.linalg.eigvalsh(gm.precision)
    assert w[0] >= 0.7 - 1e-9 and w[-1] <= 2.5 + 1e-9
    assert abs(w[0] - 0.7) < 1e-9 and abs(w[-1] - 2.5) < 1e-9
    assert gm.graph == banded_graph(12, 1)

    diag = gaussian_from_banded_precision(5, 1, 0, 1.0, 2.0, seed=1)
    assert all(diag.graph.neighbors(j).tolist() == [j] for j in range(5))

    with pytest.raises(ValueError):
        gaussian_from_banded_precision(4, 1, 1, -0.1, 1.0, seed=0)
    with pytest.raises(ValueError):
        gaussian_from_banded_precision(4, 1, 1, 2.0, 1.0, seed=0)


def test_gaussian_sampling_moments():
    gm = gaussian_from_banded_precision(4, 1, 1, 0.8, 1.6, seed=5)
    X = gm.sample(40_000, np.random.default_rng(0))
    assert np.abs(X.mean(axis=0)).max() < 0.05
    emp_cov = np.cov(X.T)
    assert np.abs(emp_cov - gm.covariance).max() < 0.05


def test_gaussian_rejects_mass_outside_declared_graph():
    prec = np.array([[2.0, 0.5], [0.5, 2.0]])
    with pytest.raises(ValueError):
        GaussianModel(prec, graph=banded_graph(2, 0))


# -- Ginzburg-Landau chain ---------------------------------------------------


def test_gl_chain_bandwidth_and_symmetry():
    m = gl_chain(3, 1.0, 0.5, 1.0)
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.standard_normal(3)
        assert m.hessian_block(x, 0, 2) == pytest.approx(0.0)
    # score at the origin vanishes by odd symmetry
    assert np.allclose(gl_chain(5, 1.0, 0.7, 0.9).score(np.zeros(5)), 0.0)


def test_gl_small_lambda_limit_is_linear_coupling():
    # lam -> 0: score approaches -beta L x (graph Laplacian of the path)
    beta = 0.8
    m = gl_chain(5, 1e-12, 0.0, beta)
    L = np.diag([1.0, 2.0, 2.0, 2.0, 1.0])
    off = np.arange(4)
    L[off, off + 1] = L[off + 1, off] = -1.0
    x = np.random.default_rng(2).standard_normal(5)
    assert np.allclose(m.score(x), -beta * (L @ x), atol=1e-9)


def test_gl_parameter_validation():
    with pytest.raises(ValueError):
        gl_chain(1, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        gl_chain(4, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        gl_chain(4, 1.0, 0.0, -1.0)


# -- inspection ---------------------------------------------------------------


def test_convexity_bounds():
    gm = GaussianModel(np.diag([1.0, 2.0]))
    m, M = convexity_bounds(gm, np.zeros((1, 2)))
    assert m == pytest.approx(1.0) and M == pytest.approx(2.0)
    # the double-well chain is not log-concave near the origin
    gl = gl_chain(6, 1.0, 1.0, 1.0)
    m_hat, _ = convexity_bounds(gl, np.zeros((1, 6)))
    assert m_hat <= 0.0


def test_extract_graph():
    gl = gl_chain(8, 1.0, 0.5, 1.0)
    probes = np.random.default_rng(1).standard_normal((3, 8))
    assert extract_graph(gl, probe_points=probes) == banded_graph(8, 1)
    assert extract_graph(GaussianModel(np.diag([1.0, 2.0, 3.0]))) == banded_graph(3, 0)
    gm = gaussian_from_banded_precision(9, 1, 2, 0.5, 2.0, seed=6)
    assert extract_graph(gm) == banded_graph(9, 2)


# -- clique potentials ---------------------------------------------------------


def test_clique_score_identity_and_locality():
    rng = np.random.default_rng(12)
    graph = banded_graph(5, 1)
    blocks = make_blocks([1, 1, 1, 1, 1])
    pots = []
    for j in range(5):
        k = len(graph.neighbors(j))
        expo = np.vstack([np.eye(k, dtype=int) * 2, np.eye(k, dtype=int) * 4])
        pots.append(PolynomialCliquePotential(expo, -np.abs(rng.standard_normal(2 * k)) * 0.2))
    model = CliquePotentialModel(graph, blocks, pots)

    x = rng.standard_normal(5)
    # term-by-term score identity
    for j in range(5):
        total = 0.0
        for k in graph.neighbors(j):
            coords = model.clique_coords(k)
            grads = pots[k].grad(x[None, coords])[0]
            pos = list(coords).index(j)
            total += grads[pos]
        assert model.block_score(x, j)[0] == pytest.approx(total, rel=1e-10)

    # perturbing a coordinate outside N_j cannot move block j's score
    before = model.block_score(x, 0).copy()
    x2 = x.copy()
    x2[3] += 2.5  # block 3 is not adjacent to block 0
    assert np.array_equal(model.block_score(x2, 0), before)


def test_clique_affine_fast_path_matches_potentials():
    rng = np.random.default_rng(13)
    graph = banded_graph(4, 1)
    blocks = make_blocks([1] * 4)
    pots = []
    for j in range(4):
        k = len(graph.neighbors(j))
        expo = np.vstack([np.eye(k, dtype=int), 2 * np.eye(k, dtype=int)])
        pots.append(PolynomialCliquePotential(expo, rng.standard_normal(2 * k) * -0.2))
    model = CliquePotentialModel(graph, blocks, pots)
    assert model.constant_hessian
    X = rng.standard_normal((6, 4))
    assert np.allclose(model.score(X), model._score_by_potentials(X), atol=1e-12)


def test_polynomial_potential_derivatives():
    expo = np.array([[2, 1], [0, 4]])
    coeffs = np.array([3.0, -1.0])
    pot = PolynomialCliquePotential(expo, coeffs)
    Xc = np.array([[1.5, -0.5]])
    x, y = Xc[0]
    assert pot.value(Xc)[0] == pytest.approx(3 * x**2 * y - y**4)
    g = pot.grad(Xc)[0]
    assert g[0] == pytest.approx(6 * x * y)
    assert g[1] == pytest.approx(3 * x**2 - 4 * y**3)
    H = pot.hess(Xc)[0]
    assert H[0, 0] == pytest.approx(6 * y)
    assert H[0, 1] == pytest.approx(6 * x)
    assert H[1, 1] == pytest.approx(-12 * y**2)
    assert pot.max_degree == 4

import math

import numpy as np
import pytest
from scipy.linalg import expm

from locality_lab import bounds
from locality_lab.blocks import make_blocks
from locality_lab.graphs import all_pairs_distances, banded_graph
from locality_lab.langevin import (
    LangevinConfig,
    SimulationDiverged,
    auto_config,
    chain_rng,
    draw_samples,
    empirical_delta,
    jacobian_block_norm_integrals,
    lipschitz_test_family,
    simulate,
    stein_gradient_estimate,
)
from locality_lab.models import (
    CliquePotentialModel,
    GaussianModel,
    PolynomialCliquePotential,
    gaussian_from_banded_precision,
    gl_chain,
)
from locality_lab.suite import quartic_chain_model


def test_config_validation():
    with pytest.raises(ValueError):
        LangevinConfig(step_size=0.0, num_steps=10)
    with pytest.raises(ValueError):
        LangevinConfig(step_size=0.1, num_steps=10, burn_in=10)
    with pytest.raises(ValueError):
        LangevinConfig(step_size=0.1, num_steps=0)


def test_reproducibility_bitwise():
    model = gl_chain(6, 1.0, 0.0, 1.0)
    cfg = LangevinConfig(step_size=0.005, num_steps=300, seed=42,
                         propagate_jacobian=True)
    p1 = simulate(model, np.zeros(6), cfg)
    p2 = simulate(model, np.zeros(6), cfg)
    assert np.array_equal(p1.states, p2.states)
    assert np.array_equal(p1.jacobian, p2.jacobian)

    cfg2 = LangevinConfig(step_size=0.005, num_steps=200, burn_in=50,
                          num_chains=3, seed=9)
    assert np.array_equal(draw_samples(model, 20, cfg2), draw_samples(model, 20, cfg2))


def test_chain_streams_are_split_by_chain_index():
    # chain c of an ensemble consumes exactly the stream keyed (seed, c)
    g0 = chain_rng(7, 0).standard_normal((4, 3))
    g0b = chain_rng(7, 0).standard_normal((4, 3))
    g1 = chain_rng(7, 1).standard_normal((4, 3))
    assert np.array_equal(g0, g0b)
    assert not np.allclose(g0, g1)


def test_jacobian_initialized_at_identity():
    model = GaussianModel(np.eye(3))
    cfg = LangevinConfig(step_size=0.01, num_steps=5, propagate_jacobian=True)
    path = simulate(model, np.zeros(3), cfg)
    assert np.array_equal(path.jacobian[0], np.eye(3))


def test_ou_stationary_variance():
    # pi = N(0, 1): EM stationary variance is 1/(1 - h/2) -> 1 as h -> 0
    model = GaussianModel(np.eye(1))
    h = 0.005
    cfg = LangevinConfig(step_size=h, num_steps=10_000, burn_in=2000,
                         num_chains=64, seed=3)
    X = draw_samples(model, 20_000, cfg, thin=40)
    var = X.var()
    se = math.sqrt(2.0 / X.size) * 3  # conservative: treats draws as iid
    assert abs(var - 1.0) < 3 * se + (1.0 / (1 - h / 2) - 1.0) + 0.01


def test_gaussian_jacobian_matches_matrix_exponential():
    gm = gaussian_from_banded_precision(5, 1, 1, 0.5, 2.0, seed=2)
    h = 0.002
    steps = 500  # t = 1.0
    cfg = LangevinConfig(step_size=h, num_steps=steps, propagate_jacobian=True, seed=0)
    path = simulate(gm, np.zeros(5), cfg)
    target = expm(-gm.precision * steps * h)
    err = np.linalg.norm(path.jacobian[-1] - target, 2)
    assert err < 5 * h  # first-order discretization


def test_jacobian_norm_decay_bound():
    # ||J_t|| <= e^{-m t} (1 + C h) along the path for strongly log-concave
    # models; exact for Gaussians, 10% slack for the state-dependent chain
    gm = gaussian_from_banded_precision(6, 1, 1, 0.8, 2.0, seed=3)
    cfg = LangevinConfig(step_size=0.005, num_steps=400, propagate_jacobian=True, seed=1)
    path = simulate(gm, np.zeros(6), cfg)
    m = gm.spectrum_bounds[0]
    for t_idx in range(0, 401, 50):
        t = t_idx * cfg.step_size
        assert np.linalg.norm(path.jacobian[t_idx], 2) <= math.exp(-m * t) + 1e-9

    chain = quartic_chain_model(5, 1.0, np.full(4, 0.8), alpha=0.6)
    cfg2 = LangevinConfig(step_size=0.003, num_steps=600, propagate_jacobian=True, seed=2)
    path2 = simulate(chain, 0.3 * np.ones(5), cfg2)
    for t_idx in range(0, 601, 100):
        t = t_idx * cfg2.step_size
        assert np.linalg.norm(path2.jacobian[t_idx], 2) <= 1.1 * math.exp(-0.6 * t)


def test_jacobian_blocks_obey_diffusion_decay_bound():
    """Cross-check with the matrix-ODE tail bound: for a constant Hessian,
    e^{mt} ||J_t(i,j)|| is controlled by the Poisson tail at the graph
    distance with envelope M - m."""
    gm = gaussian_from_banded_precision(8, 1, 1, 0.6, 1.8, seed=5)
    m, M = gm.spectrum_bounds
    h = 0.002
    cfg = LangevinConfig(step_size=h, num_steps=800, propagate_jacobian=True, seed=0)
    path = simulate(gm, np.zeros(8), cfg)
    dists = all_pairs_distances(gm.graph)
    for t_idx in (100, 400, 800):
        t = t_idx * h
        J = path.jacobian[t_idx]
        for i in range(8):
            for j in range(8):
                envelope = math.exp(-m * t) * bounds.diffusion_decay_bound(
                    dists[i, j], t, M - m
                )
                assert abs(J[i, j]) <= envelope + 20 * h * t


def test_divergence_reports_step():
    # log-density +x^2/2 pushes mass outward and must blow up
    pot = PolynomialCliquePotential(np.array([[2]]), np.array([0.5]))
    bad = CliquePotentialModel(banded_graph(1, 0), make_blocks([1]), [pot])
    cfg = LangevinConfig(step_size=0.5, num_steps=500, seed=0)
    with pytest.raises(SimulationDiverged) as err:
        simulate(bad, np.array([5.0]), cfg)
    assert err.value.step > 0


def test_stein_estimate_standard_gaussian():
    d = 6
    model = GaussianModel(np.eye(d))
    cfg = LangevinConfig(step_size=0.005, num_steps=4000, num_chains=4, seed=0)
    est = stein_gradient_estimate(model, 2, lambda xi: xi[..., 0],
                                  np.zeros((1, d)), cfg)
    assert est.sum == pytest.approx(1.0, abs=0.05)
    # independent blocks contribute nothing
    off = np.delete(est.per_block_sup, 2)
    assert np.abs(off).max() == 0.0
    assert est.reliable

    # the bound is uniform over 1-Lipschitz functions: changing or shifting
    # phi cannot change the estimate
    est2 = stein_gradient_estimate(model, 2, lambda xi: xi[..., 0] + 13.0,
                                   np.zeros((1, d)), cfg)
    assert est2.sum == est.sum


def test_empirical_delta_diagonal_gaussian():
    lam = np.array([0.5, 1.0, 2.0])
    model = GaussianModel(np.diag(lam))
    cfg = LangevinConfig(step_size=0.005, num_steps=20_000, seed=0)
    val = empirical_delta(model, np.zeros((2, 3)), None, cfg)
    assert val == pytest.approx(1.0 / lam.min(), rel=0.02)


def test_empirical_delta_with_test_family():
    model = GaussianModel(np.eye(3))
    fns = lipschitz_test_family(model.blocks, 0, np.random.default_rng(0))
    cfg = LangevinConfig(step_size=0.005, num_steps=4000, seed=0)
    val = empirical_delta(model, np.zeros((1, 3)), fns, cfg)
    assert val == pytest.approx(1.0, abs=0.05)
    with pytest.raises(TypeError):
        empirical_delta(model, np.zeros((1, 3)), ["not callable"], cfg)


def test_truncation_warning_and_tail_bound():
    model = GaussianModel(np.eye(2) * 0.2)  # slow decay: 1/m = 5
    cfg = LangevinConfig(step_size=0.01, num_steps=50, seed=0)
    with pytest.warns(RuntimeWarning):
        _, _, info = jacobian_block_norm_integrals(model, np.zeros(2), cfg)
    assert info.truncated
    assert info.tail_bound == pytest.approx(math.exp(-0.2 * 0.5) / 0.2, rel=1e-6)


def test_unreliable_flag_for_nonconcave_model():
    gl = gl_chain(4, 1.0, 1.0, 1.0)  # double well: not log-concave at 0
    cfg = LangevinConfig(step_size=0.002, num_steps=200, num_chains=2, seed=0)
    with pytest.warns(RuntimeWarning):
        est = stein_gradient_estimate(gl, 0, None, np.zeros((1, 4)), cfg)
    assert not est.reliable


def test_auto_config():
    gm = GaussianModel(np.diag([1.0, 4.0]))
    cfg = auto_config(gm, seed=3)
    assert cfg.step_size == pytest.approx(0.01 / 4.0)
    assert cfg.num_steps == math.ceil(20.0 / (1.0 * cfg.step_size))
    gl = gl_chain(4, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        auto_config(gl)


def test_draw_samples_validation():
    model = GaussianModel(np.eye(2))
    cfg = LangevinConfig(step_size=0.01, num_steps=10, num_chains=2, seed=0)
    with pytest.raises(ValueError):
        draw_samples(model, 4, cfg, thin=0)
    with pytest.raises(ValueError):
        simulate(model, np.zeros(3), cfg)

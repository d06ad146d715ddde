"""Overdamped Langevin simulation with pathwise Jacobian propagation, and the
Monte Carlo estimator of the summed Stein-solution gradient bound.

The dynamics are discretized by plain Euler-Maruyama,

    X_{t+1} = X_t + h * score(X_t) + sqrt(2 h) * xi_t,

and the state Jacobian J_t = d X_t / d x0 follows the forward-Euler recursion
J_{t+1} = J_t + h * grad^2 log pi(X_t) @ J_t (the Brownian term carries no
x-dependence). Time-integrated block norms of J_t estimate how strongly a
perturbation of one block's initial condition moves another block later on;
their row sums upper-bound the gradient of any marginal Stein-equation
solution with a 1-Lipschitz right-hand side.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import backends
from .blocks import BlockStructure
from .models import GinzburgLandauChain, as_batch, convexity_bounds

#: trajectories wandering beyond this radius abort with SimulationDiverged
DIVERGENCE_RADIUS = 1e8

#: stop the Jacobian time integral once the integrand falls below this
#: fraction of its initial value
INTEGRAND_RTOL = 1e-4

_CHUNK_STEPS = 64
_MASK64 = (1 << 64) - 1


class SimulationDiverged(RuntimeError):
    def __init__(self, step, radius):
        super().__init__(
            f"trajectory diverged by step {step} (|X| > {radius:.1e}); "
            "reduce the step size or check the model"
        )
        self.step = step


@dataclass(frozen=True)
class LangevinConfig:
    """Discretization and ensemble parameters for one simulation."""

    step_size: float
    num_steps: int
    burn_in: int = 0
    num_chains: int = 1
    seed: int = 0
    propagate_jacobian: bool = False

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be > 0")
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if not 0 <= self.burn_in < self.num_steps:
            raise ValueError("need 0 <= burn_in < num_steps")
        if self.num_chains < 1:
            raise ValueError("num_chains must be >= 1")


@dataclass
class LangevinPath:
    """One trajectory; jacobian[t] = dX_t/dx0 when it was propagated."""

    states: np.ndarray
    jacobian: np.ndarray | None = None


def chain_rng(seed, chain):
    """Counter-based stream for one chain: key (seed, chain), so the chain
    count never perturbs the randomness of an individual chain."""
    key = np.array([int(seed) & _MASK64, int(chain) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def auto_config(model, seed=0, **overrides) -> LangevinConfig:
    """Config with h = 0.01 / M and a horizon of 20 / m.

    Requires the model to carry positive log-concavity bounds; pass explicit
    num_steps (and step_size) for models without them.
    """
    bounds = model.log_concavity_bounds
    if bounds is None or bounds[0] <= 0:
        raise ValueError("model has no positive log-concavity bounds; "
                         "build a LangevinConfig explicitly")
    m, M = bounds
    h = overrides.pop("step_size", 0.01 / M)
    num_steps = overrides.pop("num_steps", int(math.ceil(20.0 / (m * h))))
    return LangevinConfig(step_size=h, num_steps=num_steps, seed=seed, **overrides)


def _check_finite_start(model, x0):
    s = model.score(x0)
    if not np.all(np.isfinite(s)):
        raise ValueError("model score is not finite at the initial condition")


def simulate(model, x0, cfg: LangevinConfig, chain=0) -> LangevinPath:
    """Single-chain Euler-Maruyama path (stream (seed, chain)), storing every
    state and, optionally, every Jacobian matrix."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.dim,):
        raise ValueError(f"x0 must have shape ({model.dim},)")
    _check_finite_start(model, x0)
    rng = chain_rng(cfg.seed, chain)
    h = cfg.step_size
    scale = math.sqrt(2.0 * h)
    d = model.dim

    states = np.empty((cfg.num_steps + 1, d))
    states[0] = x0
    jac = None
    if cfg.propagate_jacobian:
        jac = np.empty((cfg.num_steps + 1, d, d))
        jac[0] = np.eye(d)

    X = x0[None, :].copy()
    J = np.eye(d)[None, :, :].copy() if cfg.propagate_jacobian else None
    for t in range(cfg.num_steps):
        if cfg.propagate_jacobian:
            J = J + h * model.score_jacobian_matmul(X, J)
            jac[t + 1] = J[0]
        s = model.score(X)
        noise = rng.standard_normal(d)
        X = X + (h * s + scale * noise)
        if not np.all(np.isfinite(X)) or np.linalg.norm(X) > DIVERGENCE_RADIUS:
            raise SimulationDiverged(t + 1, DIVERGENCE_RADIUS)
        states[t + 1] = X[0]
    return LangevinPath(states, jac)


def _noise_chunk(rngs, steps, d):
    return np.stack([r.standard_normal((steps, d)) for r in rngs], axis=1)


def _gl_params(model):
    if isinstance(model, GinzburgLandauChain):
        return model.lam, model.m_param**2, model.beta
    return None


def _advance_states(model, X, noise, h, scale, backend):
    """One chunk of state updates; dispatches chain models to the kernels."""
    gl = _gl_params(model) if backend != "generic" else None
    if gl is not None:
        backends.gl_sample_chunk(X, noise, h, *gl, scale)
        return X
    for t in range(noise.shape[0]):
        s = model.score(X)
        X += h * s + scale * noise[t]
    return X


def draw_samples(model, n, cfg: LangevinConfig, x0=None, thin=1, backend="auto"):
    """(n, d) array of post-burn-in states collected across chains.

    Chains start from x0 (default 0), run cfg.burn_in steps, then contribute
    one state every `thin` steps in round-robin order until n are collected.
    """
    if thin < 1:
        raise ValueError("thin must be >= 1")
    d = model.dim
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
    _check_finite_start(model, x0)
    nc = cfg.num_chains
    rngs = [chain_rng(cfg.seed, c) for c in range(nc)]
    h = cfg.step_size
    scale = math.sqrt(2.0 * h)
    X = np.tile(x0, (nc, 1))

    step = 0

    def run(steps):
        nonlocal step, X
        while steps > 0:
            s = min(steps, _CHUNK_STEPS)
            noise = _noise_chunk(rngs, s, d)
            X = _advance_states(model, X, noise, h, scale, backend)
            step += s
            steps -= s
            if not np.all(np.isfinite(X)) or np.abs(X).max() > DIVERGENCE_RADIUS:
                raise SimulationDiverged(step, DIVERGENCE_RADIUS)

    run(cfg.burn_in)
    rounds = -(-n // nc)
    out = np.empty((rounds * nc, d))
    for r in range(rounds):
        run(thin)
        out[r * nc : (r + 1) * nc] = X
    return out[:n]


# ---------------------------------------------------------------------------
# Jacobian block-norm time integrals
# ---------------------------------------------------------------------------


def _block_norms(J, blocks: BlockStructure):
    """(b, b) matrix of spectral norms of the blocks of one matrix J."""
    if blocks.scalar_blocks():
        return np.abs(J)
    b = blocks.num_blocks
    out = np.empty((b, b))
    for i in range(b):
        si = blocks.slice_of(i)
        for j in range(b):
            out[i, j] = np.linalg.norm(J[si, blocks.slice_of(j)], 2)
    return out


def _block_norms_batch(J, blocks: BlockStructure):
    """(nc, b, b) block spectral norms for a batch of matrices."""
    if blocks.scalar_blocks():
        return np.abs(J)
    nc = J.shape[0]
    b = blocks.num_blocks
    out = np.empty((nc, b, b))
    for i in range(b):
        si = blocks.slice_of(i)
        for j in range(b):
            sub = J[:, si, blocks.slice_of(j)]
            out[:, i, j] = np.linalg.svd(sub, compute_uv=False)[:, 0]
    return out


@dataclass
class JacobianIntegralInfo:
    t_end: float
    steps: int
    truncated: bool
    tail_bound: float | None
    num_chains: int


def _curvature_upper(model, x0):
    bounds = model.log_concavity_bounds
    if bounds is not None:
        return bounds
    return convexity_bounds(model, x0[None, :])


def jacobian_block_norm_integrals(model, x0, cfg: LangevinConfig, backend="auto"):
    """Time integrals of E || J_t block (i, j) || for all block pairs.

    Returns (integrals, std_errs, info) with (b, b) arrays; entry (i, j)
    estimates how much block j's initial condition moves block i over the
    whole trajectory. Integration stops when the integrand drops below
    INTEGRAND_RTOL of its initial value, or at cfg.num_steps, whichever is
    first; hitting the cap sets info.truncated and an analytic tail bound
    exp(-m t)/m when a positive convexity bound m is available.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.dim,):
        raise ValueError(f"x0 must have shape ({model.dim},)")
    if model.constant_hessian and backend != "generic":
        return _integrals_constant_hessian(model, x0, cfg)
    return _integrals_sampled(model, x0, cfg, backend)


def _tail_info(model, x0, t_end, steps, truncated, nc):
    tail = None
    if truncated:
        m_hat = _curvature_upper(model, x0)[0]
        tail = math.exp(-m_hat * t_end) / m_hat if m_hat > 0 else math.inf
        warnings.warn(
            f"Jacobian integrand had not decayed by t={t_end:.3g}; "
            f"analytic tail bound {tail:.3g}",
            RuntimeWarning,
        )
    return JacobianIntegralInfo(t_end, steps, truncated, tail, nc)


def _integrals_constant_hessian(model, x0, cfg):
    """Deterministic path: with a constant Hessian the Jacobian recursion
    does not depend on the trajectory, so no chains are needed and the
    estimator is exact up to discretization."""
    d = model.dim
    h = cfg.step_size
    Hc = model.hessian(x0)
    M_hat = float(np.linalg.eigvalsh(-0.5 * (Hc + Hc.T))[-1])
    stride = max(1, int(0.05 / (h * M_hat))) if M_hat > 0 else 1
    blocks = model.blocks

    J = np.eye(d)
    f0 = _block_norms(J, blocks)
    level0 = f0.sum(axis=1).max()
    acc = np.zeros_like(f0)
    f_cur = f0
    steps = 0
    truncated = True
    max_records = max(1, cfg.num_steps // stride)
    for _ in range(max_records):
        for _ in range(stride):
            J = J + h * (Hc @ J)
        steps += stride
        f_cur = _block_norms(J, blocks)
        acc += f_cur
        if f_cur.sum(axis=1).max() <= INTEGRAND_RTOL * level0:
            truncated = False
            break
    integrals = (stride * h) * (acc + 0.5 * (f0 - f_cur))
    info = _tail_info(model, x0, steps * h, steps, truncated, 0)
    return integrals, np.zeros_like(integrals), info


def _integrals_sampled(model, x0, cfg, backend):
    """Chain-averaged path for state-dependent Hessians."""
    d = model.dim
    h = cfg.step_size
    scale = math.sqrt(2.0 * h)
    nc = cfg.num_chains
    blocks = model.blocks
    b = blocks.num_blocks
    rngs = [chain_rng(cfg.seed, c) for c in range(nc)]

    X = np.tile(x0, (nc, 1))
    J = np.broadcast_to(np.eye(d), (nc, d, d)).copy()
    f0 = _block_norms_batch(J, blocks)
    level0 = f0.mean(axis=0).sum(axis=1).max()
    acc = np.zeros((nc, b, b))
    gl = _gl_params(model) if backend != "generic" else None

    steps = 0
    truncated = True
    f_cur = f0
    while steps < cfg.num_steps:
        s = min(_CHUNK_STEPS, cfg.num_steps - steps)
        noise = _noise_chunk(rngs, s, d)
        if gl is not None:
            # scalar blocks: |J| itself is the block-norm table
            backends.gl_jacobian_chunk(X, J, noise, h, *gl, scale, acc)
        else:
            for t in range(s):
                J += h * model.score_jacobian_matmul(X, J)
                acc += _block_norms_batch(J, blocks)
                sc = model.score(X)
                X += h * sc + scale * noise[t]
        steps += s
        if not np.all(np.isfinite(X)) or np.abs(X).max() > DIVERGENCE_RADIUS:
            raise SimulationDiverged(steps, DIVERGENCE_RADIUS)
        f_cur = _block_norms_batch(J, blocks)
        if f_cur.mean(axis=0).sum(axis=1).max() <= INTEGRAND_RTOL * level0:
            truncated = False
            break

    per_chain = h * (acc + 0.5 * (f0 - f_cur))
    integrals = per_chain.mean(axis=0)
    std_errs = per_chain.std(axis=0, ddof=1) / math.sqrt(nc) if nc > 1 else np.zeros_like(integrals)
    info = _tail_info(model, x0, steps * h, steps, truncated, nc)
    return integrals, std_errs, info


# ---------------------------------------------------------------------------
# Stein-solution gradient estimates
# ---------------------------------------------------------------------------


@dataclass
class SteinGradientEstimate:
    """Estimated per-block sups of || grad_j u || and their total.

    The estimator integrates chain-averaged Jacobian block norms, which
    bounds the gradient uniformly over all 1-Lipschitz test functions on the
    target block, so the numbers do not depend on the particular phi.
    """

    per_block_sup: np.ndarray
    sum: float
    standard_errors: np.ndarray
    probe_points: np.ndarray
    reliable: bool = True
    truncated: bool = False
    tail_bound: float | None = None


def _check_reliability(model, probes):
    if model.log_concavity_bounds is not None:
        m_hat = model.log_concavity_bounds[0]
    else:
        m_hat = convexity_bounds(model, probes)[0]
    if m_hat <= 0:
        warnings.warn(
            "model is not strongly log-concave on the probed region; "
            "Stein gradient estimates are flagged unreliable",
            RuntimeWarning,
        )
        return False
    return True


def _integrals_over_probes(model, probes, cfg, backend):
    results = []
    infos = []
    for p, x0 in enumerate(probes):
        probe_cfg = LangevinConfig(
            step_size=cfg.step_size,
            num_steps=cfg.num_steps,
            burn_in=cfg.burn_in,
            num_chains=cfg.num_chains,
            seed=cfg.seed + p,
            propagate_jacobian=True,
        )
        ints, errs, info = jacobian_block_norm_integrals(model, x0, probe_cfg, backend)
        results.append((ints, errs))
        infos.append(info)
    return results, infos


def stein_gradient_estimate(model, i, phi, probe_points, cfg, backend="auto"):
    """Per-block estimate of the Stein-solution gradient sums for block i.

    phi is accepted for interface completeness and validated; the bound is
    uniform over 1-Lipschitz functions of block i, hence invariant under any
    shift (or choice) of phi.
    """
    if phi is not None and not callable(phi):
        raise TypeError("phi must be callable (a 1-Lipschitz test function) or None")
    probes, _ = as_batch(probe_points, model.dim)
    model.blocks._check_index(i)
    reliable = _check_reliability(model, probes)
    results, infos = _integrals_over_probes(model, probes, cfg, backend)

    rows = np.stack([ints[i] for ints, _ in results])  # (P, b)
    errs = np.stack([e[i] for _, e in results])
    best = rows.argmax(axis=0)
    per_block = rows.max(axis=0)
    ses = errs[best, np.arange(rows.shape[1])]
    return SteinGradientEstimate(
        per_block_sup=per_block,
        sum=float(per_block.sum()),
        standard_errors=ses,
        probe_points=probes,
        reliable=reliable,
        truncated=any(info.truncated for info in infos),
        tail_bound=max((info.tail_bound or 0.0) for info in infos) or None,
    )


def empirical_delta(model, probe_points, test_functions=None, cfg=None, backend="auto"):
    """Empirical lower estimate of the locality constant: the largest, over
    target blocks, of the summed per-block Jacobian-integral sups.

    test_functions is validated but does not alter the value: the estimator
    bounds the Stein-solution gradient uniformly over the whole 1-Lipschitz
    class, of which any supplied family is a subset.
    """
    if cfg is None:
        raise ValueError("cfg is required")
    if test_functions is not None:
        for fn in test_functions:
            if not callable(fn):
                raise TypeError("test functions must be callable")
    probes, _ = as_batch(probe_points, model.dim)
    _check_reliability(model, probes)
    results, _ = _integrals_over_probes(model, probes, cfg, backend)
    sup = np.maximum.reduce([ints for ints, _ in results])  # (b, b) entrywise sup
    return float(sup.sum(axis=1).max())


def lipschitz_test_family(blocks: BlockStructure, i, rng, num_random=3):
    """Finite family of 1-Lipschitz functions on block i: coordinate
    projections, a soft-plus ramp, and random piecewise-linear functions."""
    d_i = int(blocks.block_sizes[i])
    fns = [(lambda a: (lambda xi: np.asarray(xi)[..., a]))(a) for a in range(d_i)]
    fns.append(lambda xi: np.logaddexp(0.0, np.asarray(xi)[..., 0]))
    for _ in range(num_random):
        w = rng.standard_normal(d_i)
        w /= max(np.linalg.norm(w), 1e-12)
        knots = np.sort(rng.standard_normal(3))
        slopes = rng.uniform(-1.0, 1.0, size=4)

        def pw(xi, w=w, knots=knots, slopes=slopes):
            t = np.asarray(xi)[..., :] @ w
            out = slopes[0] * np.minimum(t, knots[0])
            for k in range(len(knots)):
                hi = knots[k + 1] if k + 1 < len(knots) else np.inf
                seg = np.clip(t, knots[k], hi) - knots[k]
                out = out + slopes[k + 1] * seg
            return out

        fns.append(pw)
    return fns

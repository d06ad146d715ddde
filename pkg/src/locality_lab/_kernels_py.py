"""Pure-numpy reference kernels for the hot Langevin loops on chain models.

The compiled twin in _kernels.pyx implements the same updates with the same
arithmetic order; locality_lab.backends picks one at import time. Both advance
a batch of chains through a chunk of Euler-Maruyama steps:

    X_{t+1} = X_t + h * score(X_t) + noise_scale * xi_t
    J_{t+1} = J_t + h * grad^2 log pi(X_t) @ J_t          (optional)

for the spin-chain model with on-site potential (lam/4)(x^2 - m2)^2 and bond
coupling (beta/2)(x - y)^2. acc accumulates sum_t |J_t| entrywise for the
time integration of Jacobian block norms.
"""

import numpy as np

BACKEND = "python"


def _gl_score(X, lam, m2, beta):
    s = -lam * X * (X * X - m2)
    s[:, :-1] -= beta * (X[:, :-1] - X[:, 1:])
    s[:, 1:] -= beta * (X[:, 1:] - X[:, :-1])
    return s


def gl_sample_chunk(X, noise, h, lam, m2, beta, noise_scale):
    """Advance states in place through noise.shape[0] steps."""
    for t in range(noise.shape[0]):
        s = _gl_score(X, lam, m2, beta)
        X += h * s + noise_scale * noise[t]
    return X


def gl_jacobian_chunk(X, J, noise, h, lam, m2, beta, noise_scale, acc):
    """Advance states and pathwise Jacobians in place, accumulating |J|."""
    d = X.shape[1]
    deg = np.full(d, 2.0)
    deg[0] = deg[-1] = 1.0
    for t in range(noise.shape[0]):
        diag = -(lam * (3.0 * X * X - m2)) - beta * deg
        HJ = diag[:, :, None] * J
        HJ[:, 1:, :] += beta * J[:, :-1, :]
        HJ[:, :-1, :] += beta * J[:, 1:, :]
        J += h * HJ
        np.add(acc, np.abs(J), out=acc)
        s = _gl_score(X, lam, m2, beta)
        X += h * s + noise_scale * noise[t]
    return X

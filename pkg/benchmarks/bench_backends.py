"""Benchmark the compiled Langevin kernels against the pure-numpy reference.

Times the two hot loops (state-only sampling and Jacobian propagation) on a
spin-chain workload at several sizes, verifies both backends produce the same
trajectories, and reports an end-to-end timing of the locality-constant
estimator under each backend.

Run:  python benchmarks/bench_backends.py
"""

import time

import numpy as np

from locality_lab import backends
from locality_lab.langevin import LangevinConfig, jacobian_block_norm_integrals
from locality_lab.models import gl_chain


def _state(nc, d, steps, seed=0):
    rng = np.random.default_rng(seed)
    X = np.ascontiguousarray(rng.standard_normal((nc, d)) * 0.3)
    J = np.ascontiguousarray(np.broadcast_to(np.eye(d), (nc, d, d)).copy())
    noise = np.ascontiguousarray(rng.standard_normal((steps, nc, d)))
    return X, J, noise


def time_kernel(kern, which, nc, d, steps, repeats=3):
    best = np.inf
    out = None
    for _ in range(repeats):
        X, J, noise = _state(nc, d, steps)
        acc = np.zeros_like(J)
        t0 = time.perf_counter()
        if which == "sample":
            kern.gl_sample_chunk(X, noise, 0.004, 1.0, 0.0, 1.0, 0.0894)
        else:
            kern.gl_jacobian_chunk(X, J, noise, 0.004, 1.0, 0.0, 1.0, 0.0894, acc)
        best = min(best, time.perf_counter() - t0)
        out = (X.copy(), J.copy(), acc.copy())
    return best, out


def main():
    kernels = {"python": backends.get_kernels("python")}
    try:
        kernels["compiled"] = backends.get_kernels("compiled")
    except ImportError:
        print("compiled kernels not built; benchmarking the fallback only")

    print(f"active backend at import: {backends.BACKEND}\n")
    print(f"{'loop':<10} {'chains':>6} {'d':>4} {'steps':>6} "
          + "".join(f"{name:>12}" for name in kernels)
          + ("   speedup   max|diff|" if len(kernels) == 2 else ""))
    for which, cases in (
        ("sample", [(64, 32, 2000), (256, 64, 1000), (64, 128, 1000)]),
        ("jacobian", [(32, 16, 1000), (64, 32, 500), (32, 64, 250)]),
    ):
        for nc, d, steps in cases:
            times, outs = {}, {}
            for name, kern in kernels.items():
                times[name], outs[name] = time_kernel(kern, which, nc, d, steps)
            line = f"{which:<10} {nc:>6} {d:>4} {steps:>6}"
            for name in kernels:
                line += f"{times[name] * 1e3:>10.1f}ms"
            if len(kernels) == 2:
                speed = times["python"] / times["compiled"]
                diff = max(
                    np.abs(a - b).max()
                    for a, b in zip(outs["python"], outs["compiled"])
                )
                line += f"{speed:>9.2f}x   {diff:.1e}"
            print(line)

    # end-to-end: locality-constant estimator on a chain model
    print("\nend-to-end jacobian-integral estimator (chain, d=24, 64 chains):")
    model = gl_chain(24, 1.0, 0.0, 1.0)
    cfg = LangevinConfig(step_size=0.002, num_steps=4000, num_chains=64, seed=1)
    x0 = 0.4 * np.ones(24)
    for name, kern in kernels.items():
        saved = backends.gl_jacobian_chunk
        backends.gl_jacobian_chunk = kern.gl_jacobian_chunk
        try:
            t0 = time.perf_counter()
            ints, _, _ = jacobian_block_norm_integrals(model, x0, cfg)
            dt = time.perf_counter() - t0
        finally:
            backends.gl_jacobian_chunk = saved
        print(f"  {name:<9} {dt * 1e3:8.1f}ms   delta estimate "
              f"{ints.sum(axis=1).max():.6f}")


if __name__ == "__main__":
    main()

"""Command-line harness: every experiment and verifier as a subcommand with
reproducible seeds, a manifest beside each output, and structured CSV/JSON
results.

Exit codes: 0 success (all asserted inequalities passed), 1 verification
failure, 2 usage error.
"""

import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

VERIFY_FAILED = 1


def _set_threads(n):
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


@click.group()
@click.option("--threads", type=int, default=None,
              help="Cap BLAS/OpenMP parallelism (default: hardware count).")
def main(threads):
    """locality-lab: locality certificates, transport bounds, localized
    subspaces and localized score matching."""
    _set_threads(threads)


def _finish(out, command, config, t0, payload=None):
    from . import fileio

    if payload is not None:
        Path(out).write_text(json.dumps(payload, indent=2, default=str) + "\n")
    fileio.write_manifest(out, command, config, time.time() - t0)


# ---------------------------------------------------------------------------
# graph
# ---------------------------------------------------------------------------


@main.group()
def graph():
    """Dependency-graph tools."""


@graph.command("certify")
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True))
@click.option("--S", "S", required=True, type=float)
@click.option("--nu", required=True, type=int)
@click.option("--qmax", type=int, default=None)
@click.option("--out", required=True, type=click.Path())
def graph_certify(graph_path, S, nu, qmax, out):
    """Check the neighborhood-growth bound on a serialized graph."""
    from . import fileio
    from .graphs import certify_locality

    t0 = time.time()
    g = fileio.load_graph(graph_path)
    res = certify_locality(g, S, nu, q_max=qmax)
    if res.ok:
        payload = {
            "certified": True, "S": S, "nu": nu,
            "valid_up_to_radius": res.valid_up_to_radius,
            "num_tight_witnesses": len(res.witnesses),
        }
    else:
        payload = {
            "certified": False, "S": S, "nu": nu,
            "vertex": res.vertex + 1,  # reports are 1-based
            "radius": res.radius, "size": res.size, "bound": res.bound,
        }
    cfg = {"graph": graph_path, "S": S, "nu": nu, "qmax": qmax}
    _finish(out, "graph certify", cfg, t0, payload)
    click.echo("certified" if res.ok else f"violation at vertex {res.vertex + 1}, radius {res.radius}")
    if not res.ok:
        sys.exit(VERIFY_FAILED)


# ---------------------------------------------------------------------------
# langevin
# ---------------------------------------------------------------------------


@main.group()
def langevin():
    """Euler-Maruyama simulation."""


@langevin.command("run")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--steps", required=True, type=int)
@click.option("--h", "step_size", required=True, type=float)
@click.option("--chains", type=int, default=1)
@click.option("--seed", type=int, default=0)
@click.option("--x0", type=str, default=None, help="CSV file with the initial point.")
@click.option("--jacobian/--no-jacobian", default=False)
@click.option("--out", required=True, type=click.Path())
def langevin_run(model_path, steps, step_size, chains, seed, x0, jacobian, out):
    """Simulate trajectories; chain c > 0 goes to <out>.c<c>.csv."""
    from . import fileio
    from .langevin import LangevinConfig, simulate

    t0 = time.time()
    model = fileio.load_model(model_path)
    start = np.zeros(model.dim) if x0 is None else fileio.load_matrix(x0).ravel()
    cfg = LangevinConfig(step_size=step_size, num_steps=steps, num_chains=chains,
                         seed=seed, propagate_jacobian=jacobian)
    for c in range(chains):
        path = simulate(model, start, cfg, chain=c)
        target = Path(out) if c == 0 else Path(out).with_suffix(f".c{c}.csv")
        fileio.write_path_csv(target, path.states)
    cfg_echo = {"model": model_path, "steps": steps, "h": step_size,
                "chains": chains, "seed": seed, "jacobian": jacobian}
    _finish(out, "langevin run", cfg_echo, t0)


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


@main.group(name="bounds")
def bounds_group():
    """Locality constants and lemma verifiers."""


@bounds_group.command("delta")
@click.option("--model", "model_path", type=click.Path(exists=True), default=None)
@click.option("--source", type=click.Choice(["graphical", "diag"]), default="graphical")
@click.option("--S", "S", type=float, default=None)
@click.option("--nu", type=int, default=None)
@click.option("--m", "m_val", type=float, default=None)
@click.option("--M", "M_val", type=float, default=None)
@click.option("--probes", type=int, default=16)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(), default=None)
def bounds_delta(model_path, source, S, nu, m_val, M_val, probes, seed, out):
    """Locality constant from (S, nu, m, M) or from a model config."""
    from . import bounds as bnd, fileio

    t0 = time.time()
    if model_path is None:
        if None in (S, nu, m_val, M_val):
            raise click.UsageError("without --model, all of --S --nu --m --M are required")
        db = bnd.delta_graphical(S, nu, m_val, M_val)
    else:
        model = fileio.load_model(model_path)
        rng = np.random.default_rng(seed)
        if hasattr(model, "sample"):
            pts = model.sample(probes, rng)
        else:
            pts = rng.standard_normal((probes, model.dim))
        if source == "graphical":
            if None in (S, nu):
                raise click.UsageError("--source graphical needs --S and --nu")
            from .models import convexity_bounds

            m_hat, M_hat = convexity_bounds(model, pts)
            db = bnd.delta_graphical(S, nu, m_hat, M_hat)
        else:
            dom = bnd.dominance_matrix_from_model(model, pts)
            db = bnd.delta_diag_dominant(dom)
    click.echo(fileio.fmt(db.value))
    if out:
        payload = {"value": db.value, "source": db.source,
                   "inputs": {k: v for k, v in db.inputs.items() if np.isscalar(v)}}
        _finish(out, "bounds delta", {"model": model_path, "source": source}, t0, payload)


@bounds_group.command("verify-lemma")
@click.option("--which", required=True, type=click.Choice(["A1", "A3", "A4", "C1"]))
@click.option("--trials", type=int, default=20)
@click.option("--seed", type=int, default=0)
@click.option("--out", required=True, type=click.Path())
def bounds_verify_lemma(which, trials, seed, out):
    """Randomized lemma verification; rows are appended to the report CSV."""
    from . import bounds as bnd, fileio
    from .graphs import banded_graph
    from .models import gaussian_from_banded_precision
    from .suite import _random_decay_instance

    t0 = time.time()
    rng = np.random.default_rng(seed)
    rows = []
    ok = True
    for trial in range(trials):
        if which == "A1":
            b = int(rng.integers(6, 17))
            H_path, M = _random_decay_instance(rng, b)
            rep = bnd.verify_diffusion_lemma(H_path, banded_graph(b, 1),
                                             t_max=3.0, dt=0.01 / M, M=M)
            rows.append((which, trial, rep.worst_margin, rep.ok))
            ok &= rep.ok
        elif which == "A3":
            t = float(rng.uniform(0.0, 5.0))
            x = float(rng.uniform(0.05, 0.95))
            chk = bnd.li_series_bound_check(t, x)
            rows.append((which, trial, chk.rhs - chk.lhs, chk.ok))
            ok &= chk.ok
        elif which == "A4":
            b = int(rng.integers(4, 13))
            off = -np.abs(rng.standard_normal((b, b))) * (rng.random((b, b)) < 0.5)
            np.fill_diagonal(off, 0.0)
            Mm = off.copy()
            c = float(rng.uniform(0.2, 1.0))
            np.fill_diagonal(Mm, np.abs(off).sum(axis=1) + c + rng.uniform(0, 0.5, b))
            rep = bnd.verify_inf_norm_decay(Mm, np.abs(rng.standard_normal((b, b))),
                                            t_max=2.0 / c,
                                            dt=0.01 / np.linalg.norm(Mm, np.inf))
            rows.append((which, trial, rep.worst_margin, rep.ok))
            ok &= rep.ok
        else:
            b = int(rng.integers(8, 33))
            bw = int(rng.integers(1, 3))
            m = float(rng.uniform(0.5, 1.0))
            gm = gaussian_from_banded_precision(
                b, 1, bw, m, m * float(rng.uniform(1.2, 4.0)), seed=int(rng.integers(2**31))
            )
            chk = bnd.sqrt_row_decay_check(gm, 2 * bw, 1)
            rows.append((which, trial, chk.bound - chk.max_row_sum, chk.ok))
            ok &= chk.ok
    cfg = {"which": which, "trials": trials, "seed": seed}
    chash = fileio.config_hash(cfg)
    new_file = not Path(out).exists()
    with open(out, "a") as fh:
        if new_file:
            fh.write("lemma,trial,margin,passed,config_hash,seed\n")
        for row in rows:
            fh.write(",".join(fileio.fmt(v) for v in row)
                     + f",{chash},{seed}\n")
    fileio.write_manifest(out, "bounds verify-lemma", cfg, time.time() - t0)
    click.echo(f"{which}: {'ok' if ok else 'FAILED'} ({trials} trials)")
    if not ok:
        sys.exit(VERIFY_FAILED)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _delta_for_cli(model, delta_from, S, nu, probes, seed):
    from . import bounds as bnd
    from .models import convexity_bounds

    rng = np.random.default_rng(seed)
    pts = model.sample(probes, rng) if hasattr(model, "sample") else rng.standard_normal((probes, model.dim))
    if delta_from == "graphical":
        if None in (S, nu):
            raise click.UsageError("--delta-from graphical needs --S and --nu")
        m_hat, M_hat = convexity_bounds(model, pts)
        return bnd.delta_graphical(S, nu, m_hat, M_hat)
    return bnd.delta_diag_dominant(bnd.dominance_matrix_from_model(model, pts))


@main.group()
def verify():
    """Transport inequality verifiers."""


def _report_payload(rep):
    return {
        "lhs": float(rep.lhs), "rhs": float(rep.rhs), "slack": float(rep.slack),
        "tolerance": float(rep.tolerance), "pass": bool(rep.passed),
        "lhs_method": rep.lhs_method, "delta": float(rep.delta_value),
    }


def _langevin_opts(fn):
    fn = click.option("--h", "step_size", type=float, default=None,
                      help="Step size for sampling non-Gaussian models.")(fn)
    fn = click.option("--burn", type=int, default=2000)(fn)
    fn = click.option("--chains", type=int, default=64)(fn)
    return fn


def _sampler_cfg(step_size, burn, chains):
    from .langevin import LangevinConfig

    if step_size is None:
        return None
    return LangevinConfig(step_size=step_size, num_steps=burn + 10_000_000,
                          burn_in=burn, num_chains=chains)


@verify.command("marginal")
@click.option("--pi", "pi_path", required=True, type=click.Path(exists=True))
@click.option("--pi-prime", "pip_path", required=True, type=click.Path(exists=True))
@click.option("--delta-from", type=click.Choice(["graphical", "diag"]), default="graphical")
@click.option("--S", "S", type=float, default=None)
@click.option("--nu", type=int, default=None)
@click.option("--n", "n_samples", type=int, default=4000)
@click.option("--seed", type=int, default=0)
@_langevin_opts
@click.option("--out", required=True, type=click.Path())
def verify_marginal(pi_path, pip_path, delta_from, S, nu, n_samples, seed,
                    step_size, burn, chains, out):
    """Per-block transport inequality; JSON report plus per-block CSV."""
    from . import fileio, metrics

    t0 = time.time()
    pi = fileio.load_model(pi_path)
    pip = fileio.load_model(pip_path)
    db = _delta_for_cli(pip, delta_from, S, nu, 16, seed)
    rep = metrics.verify_marginal_inequality(
        pi, pip, db, n_samples, seed,
        langevin_cfg=_sampler_cfg(step_size, burn, chains),
    )
    cfg = {"pi": pi_path, "pi_prime": pip_path, "delta_from": delta_from,
           "n": n_samples, "seed": seed}
    fileio.write_csv(
        Path(out).with_suffix(".blocks.csv"),
        ["block", "w1", "discrepancy", "discrepancy_se"],
        [
            (j + 1, rep.per_block_w1[j], rep.discrepancy.per_block_l1[j],
             rep.discrepancy.mc_standard_errors[j])
            for j in range(len(rep.per_block_w1))
        ],
        provenance={"config_hash": fileio.config_hash(cfg), "seed": seed,
                    "n_samples": n_samples},
    )
    _finish(out, "verify marginal", cfg, t0, _report_payload(rep))
    click.echo(f"lhs={rep.lhs:.6g} rhs={rep.rhs:.6g} pass={rep.passed}")
    if not rep.passed:
        sys.exit(VERIFY_FAILED)


@verify.command("multiblock")
@click.option("--pi", "pi_path", required=True, type=click.Path(exists=True))
@click.option("--pi-prime", "pip_path", required=True, type=click.Path(exists=True))
@click.option("--delta-from", type=click.Choice(["graphical", "diag"]), default="graphical")
@click.option("--S", "S", type=float, default=None)
@click.option("--nu", type=int, default=None)
@click.option("--index-set", required=True, type=str, help="comma-separated 1-based blocks")
@click.option("--n", "n_samples", type=int, default=4000)
@click.option("--seed", type=int, default=0)
@_langevin_opts
@click.option("--out", required=True, type=click.Path())
def verify_multiblock(pi_path, pip_path, delta_from, S, nu, index_set, n_samples,
                      seed, step_size, burn, chains, out):
    """Joint-marginal inequality via the exact assignment solver."""
    from . import fileio, metrics

    t0 = time.time()
    pi = fileio.load_model(pi_path)
    pip = fileio.load_model(pip_path)
    db = _delta_for_cli(pip, delta_from, S, nu, 16, seed)
    I = [int(tok) - 1 for tok in index_set.split(",") if tok]
    rep = metrics.verify_multiblock_inequality(
        pi, pip, db, I, n_samples, seed,
        langevin_cfg=_sampler_cfg(step_size, burn, chains),
    )
    cfg = {"pi": pi_path, "pi_prime": pip_path, "index_set": index_set,
           "n": n_samples, "seed": seed}
    _finish(out, "verify multiblock", cfg, t0, _report_payload(rep))
    click.echo(f"lhs={rep.lhs:.6g} rhs={rep.rhs:.6g} pass={rep.passed}")
    if not rep.passed:
        sys.exit(VERIFY_FAILED)


# ---------------------------------------------------------------------------
# llis
# ---------------------------------------------------------------------------


@main.group(name="llis")
def llis_group():
    """Localized informed-subspace pipeline."""


@llis_group.command("build")
@click.option("--problem", "problem_path", required=True, type=click.Path(exists=True))
@click.option("--eps", required=True, type=float)
@click.option("--n", "n_samples", type=int, default=4000)
@click.option("--seed", type=int, default=0)
@click.option("--out", required=True, type=click.Path())
def llis_build(problem_path, eps, n_samples, seed, out):
    """Estimate diagnostics under the posterior and write the basis JSON."""
    from . import fileio, llis as L

    t0 = time.time()
    prob = fileio.load_problem(problem_path)
    samples = prob.posterior_model.sample(n_samples, np.random.default_rng(seed))
    diag = L.estimate_diagnostics(prob, samples, "target")
    basis = L.build_basis(diag, eps)
    fileio.save_basis(out, basis)
    cfg = {"problem": problem_path, "eps": eps, "n": n_samples, "seed": seed}
    fileio.write_manifest(out, "llis build", cfg, time.time() - t0)
    click.echo(f"ranks: {basis.ranks.tolist()}")


@llis_group.command("certify")
@click.option("--problem", "problem_path", required=True, type=click.Path(exists=True))
@click.option("--basis", "basis_path", required=True, type=click.Path(exists=True))
@click.option("--n", "n_samples", type=int, default=4000)
@click.option("--seed", type=int, default=0)
@click.option("--out", required=True, type=click.Path())
def llis_certify(problem_path, basis_path, n_samples, seed, out):
    """A-posteriori marginal error certificate for a stored basis."""
    from . import fileio, llis as L

    t0 = time.time()
    prob = fileio.load_problem(problem_path)
    basis = fileio.load_basis(basis_path)
    ridge = L.build_ridge_posterior(prob, basis)
    samples = ridge.model.sample(n_samples, np.random.default_rng(seed))
    cert = L.error_certificate(prob, ridge, samples)
    payload = {
        "certificate": cert.value, "constant": cert.constant,
        "residue_factor": cert.residue_factor,
        "per_block_terms": cert.per_block_terms.tolist(),
    }
    cfg = {"problem": problem_path, "basis": basis_path, "n": n_samples, "seed": seed}
    _finish(out, "llis certify", cfg, t0, payload)
    click.echo(f"certificate = {cert.value:.6g}")


# ---------------------------------------------------------------------------
# lsm
# ---------------------------------------------------------------------------


@main.group()
def lsm():
    """Localized score matching."""


@lsm.command("fit")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True))
@click.option("--dict", "dictionary", type=click.Choice(["quad", "quartic"]), default="quad")
@click.option("--R", "radius", type=float, default=100.0)
@click.option("--N", "n_train", type=int, default=None, help="Use the first N rows.")
@click.option("--seed", type=int, default=0)
@click.option("--out", required=True, type=click.Path())
def lsm_fit(data_path, graph_path, dictionary, radius, n_train, seed, out):
    """Fit clique potentials to samples by the saddle score-matching loss."""
    from . import fileio
    from . import score_matching as sm
    from .blocks import make_blocks

    t0 = time.time()
    X = fileio.load_samples_csv(data_path)
    if n_train is not None:
        X = X[:n_train]
    g = fileio.load_graph(graph_path)
    if g.num_vertices != X.shape[1]:
        raise click.UsageError(
            "graph size must match sample dimension (scalar blocks)")
    blocks = make_blocks(np.ones(X.shape[1], dtype=int))
    hyp = sm.ScoreHypothesis(g, blocks, dictionary, radius)
    report = sm.fit(hyp, X)
    payload = {
        "theta": report.theta_hat.tolist(),
        "per_block_losses": report.per_block_losses.tolist(),
        "lambda_bounds": report.lambda_bounds.tolist(),
        "saddle_value": report.saddle_value,
        "converged": report.converged,
        "n_samples": report.n_samples,
        "provenance": report.provenance,
        "dictionary": dictionary,
    }
    cfg = {"data": data_path, "graph": graph_path, "dict": dictionary,
           "R": radius, "N": n_train, "seed": seed}
    _finish(out, "lsm fit", cfg, t0, payload)
    click.echo(f"saddle value {report.saddle_value:.6g}, converged={report.converged}")


@lsm.command("ladder")
@click.option("--b", "b_list", type=str, default="8,32,128")
@click.option("--N", "n_train", type=int, default=10_000)
@click.option("--trials", type=int, default=1)
@click.option("--seed", type=int, default=0)
@click.option("--out", required=True, type=click.Path())
def lsm_ladder(b_list, n_train, trials, seed, out):
    """Dimension ladder on the homogeneous Gaussian chain family."""
    from . import fileio
    from . import score_matching as sm
    from .suite import chain_gaussian

    t0 = time.time()
    b_values = tuple(int(tok) for tok in b_list.split(",") if tok)
    cells = sm.dimension_ladder_experiment(
        lambda b: chain_gaussian(b, 2.0, -0.5), n_train, trials, seed,
        b_values=b_values,
    )
    cfg = {"b": b_list, "N": n_train, "trials": trials, "seed": seed}
    fileio.write_csv(
        out,
        ["b", "N", "trial", "max_w1_sampled", "max_w1_exact", "fit_converged"],
        [(c.b, c.n_train, c.trial, c.max_w1_sampled,
          "" if c.max_w1_exact is None else c.max_w1_exact, c.fit_converged)
         for c in cells],
        provenance={"config_hash": fileio.config_hash(cfg), "seed": seed,
                    "n_samples": n_train},
    )
    fileio.write_manifest(out, "lsm ladder", cfg, time.time() - t0)
    click.echo(f"{len(cells)} cells written")


# ---------------------------------------------------------------------------
# suite
# ---------------------------------------------------------------------------


@main.command("suite")
@click.option("--quick", is_flag=True, help="Reduced-size battery.")
@click.option("--seed", type=int, default=7)
@click.option("--out", "out_dir", type=click.Path(), default=None)
def suite_cmd(quick, seed, out_dir):
    """Run the acceptance battery; exit 1 if any criterion fails."""
    from . import fileio
    from .suite import run_battery

    t0 = time.time()
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    results = run_battery(seed=seed, quick=quick, out_dir=out_dir, echo=click.echo)
    if out_dir is not None:
        fileio.write_manifest(
            Path(out_dir) / "summary.csv", "suite",
            {"quick": quick, "seed": seed}, time.time() - t0,
        )
    if not all(r.passed for r in results):
        sys.exit(VERIFY_FAILED)


if __name__ == "__main__":
    main()

"""File formats: CSV and raw binary matrices, model/problem configs, graph
and basis JSON, run manifests. All floats are written with 17 significant
digits so round-trips are exact."""

import json
import struct
import time
from pathlib import Path

import numpy as np

from .blocks import make_blocks
from .graphs import DependencyGraph, graph_from_json, graph_to_json
from .llis import LinearGaussianLikelihood, LLISBasis, PosteriorProblem
from .models import GaussianModel, GinzburgLandauChain, gaussian_from_banded_precision, gl_chain

FLOAT_FMT = "%.17g"
_MAGIC = b"LLABMAT1"  # 8-byte magic; header is magic + uint32 rows + uint32 cols


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (float, np.floating)):
        return FLOAT_FMT % x
    return str(x)


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------


def save_matrix(path, arr):
    """Write a matrix as CSV (*.csv) or as the 16-byte-header little-endian
    float64 binary format (anything else)."""
    path = Path(path)
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    if path.suffix == ".csv":
        np.savetxt(path, arr, fmt=FLOAT_FMT, delimiter=",")
    else:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
            fh.write(arr.astype("<f8").tobytes(order="C"))


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".csv":
        return np.atleast_2d(np.loadtxt(path, delimiter=",", ndmin=2))
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        rows, cols = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
        if data.size != rows * cols:
            raise ValueError(f"{path}: truncated payload")
        return data.reshape(rows, cols).copy()


def save_samples_csv(path, X, prefix="x"):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    header = ",".join(f"{prefix}_{i}" for i in range(X.shape[1]))
    np.savetxt(path, X, fmt=FLOAT_FMT, delimiter=",", header=header, comments="")


def load_samples_csv(path) -> np.ndarray:
    with open(path) as fh:
        first = fh.readline()
    skip = 0
    try:
        [float(tok) for tok in first.strip().split(",")]
    except ValueError:
        skip = 1
    return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2))


def write_path_csv(path, states):
    """Langevin trajectory: header step,x_0,...,x_{d-1}."""
    states = np.asarray(states, dtype=float)
    d = states.shape[1]
    header = "step," + ",".join(f"x_{i}" for i in range(d))
    rows = np.column_stack([np.arange(states.shape[0]), states])
    fmts = ["%d"] + [FLOAT_FMT] * d
    np.savetxt(path, rows, fmt=fmts, delimiter=",", header=header, comments="")


def write_csv(path, header, rows, provenance=None):
    """Generic result CSV; every float rendered with FLOAT_FMT.

    provenance, when given, is a mapping appended to every row (e.g. config
    hash, seed, sample size) so each numeric row is self-describing.
    """
    prov_cols = list(provenance) if provenance else []
    prov_vals = [provenance[k] for k in prov_cols] if provenance else []
    with open(path, "w") as fh:
        fh.write(",".join(list(header) + prov_cols) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in list(row) + prov_vals) + "\n")


def config_hash(config) -> str:
    """Short stable digest of a config mapping, for row provenance."""
    import hashlib

    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Graphs
# ---------------------------------------------------------------------------


def save_graph(path, g: DependencyGraph):
    Path(path).write_text(graph_to_json(g) + "\n")


def load_graph(path) -> DependencyGraph:
    return graph_from_json(Path(path).read_text())


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


def _resolve(entry, base_dir):
    """Inline list-of-lists or a path (relative to the config file)."""
    if isinstance(entry, str):
        p = Path(entry)
        if not p.is_absolute() and base_dir is not None:
            p = Path(base_dir) / p
        return load_matrix(p)
    return np.asarray(entry, dtype=float)


def model_from_config(cfg, base_dir=None):
    """Build a model from a config mapping; see model_to_config for keys."""
    kind = cfg.get("type")
    if kind == "gl_chain":
        return gl_chain(cfg["n"], cfg["lambda"], cfg["m"], cfg["beta"])
    if kind == "gaussian_banded":
        return gaussian_from_banded_precision(
            cfg["b"], cfg.get("block_sizes", 1), cfg["bandwidth"],
            cfg["m"], cfg["M"], cfg["seed"],
        )
    if kind == "gaussian":
        precision = _resolve(cfg["precision"], base_dir)
        mean = None
        if "mean" in cfg:
            mean = _resolve(cfg["mean"], base_dir).ravel()
        blocks = make_blocks(cfg["block_sizes"]) if "block_sizes" in cfg else None
        return GaussianModel(precision, mean=mean, blocks=blocks)
    if kind == "clique":
        from .graphs import DependencyGraph
        from .models import CliquePotentialModel, PolynomialCliquePotential

        graph = DependencyGraph(cfg["graph"])
        blocks = make_blocks(cfg["block_sizes"])
        potentials = [
            PolynomialCliquePotential(np.asarray(p["exponents"], dtype=int),
                                      np.asarray(p["coeffs"], dtype=float))
            for p in cfg["potentials"]
        ]
        return CliquePotentialModel(graph, blocks, potentials)
    raise ValueError(f"unknown model type {kind!r}")


def model_to_config(model) -> dict:
    if isinstance(model, GinzburgLandauChain):
        return {
            "type": "gl_chain", "n": model.n, "lambda": model.lam,
            "m": model.m_param, "beta": model.beta,
        }
    if isinstance(model, GaussianModel):
        return {
            "type": "gaussian",
            "precision": model.precision.tolist(),
            "mean": model.mean.tolist(),
            "block_sizes": model.blocks.block_sizes.tolist(),
        }
    from .models import CliquePotentialModel

    if isinstance(model, CliquePotentialModel):
        return {
            "type": "clique",
            "graph": model.graph.adjacency_lists(),
            "block_sizes": model.blocks.block_sizes.tolist(),
            "potentials": [
                {"exponents": p.exponents.tolist(), "coeffs": p.coeffs.tolist()}
                for p in model.potentials
            ],
        }
    raise ValueError(f"cannot serialize model of type {type(model).__name__}")


def load_model(path) -> "object":
    path = Path(path)
    return model_from_config(json.loads(path.read_text()), base_dir=path.parent)


def save_model(path, model):
    Path(path).write_text(json.dumps(model_to_config(model)) + "\n")


# ---------------------------------------------------------------------------
# Posterior problems
# ---------------------------------------------------------------------------


def problem_from_config(cfg, base_dir=None) -> PosteriorProblem:
    prior = model_from_config(cfg["prior"], base_dir)
    lik_cfg = cfg["likelihood"]
    if lik_cfg.get("type") != "linear_gaussian":
        raise ValueError("only linear_gaussian likelihood configs are supported")
    A = _resolve(lik_cfg["A"], base_dir)
    y = _resolve(lik_cfg["y"], base_dir).ravel()
    return PosteriorProblem(prior, LinearGaussianLikelihood(A, y),
                            S=cfg["S"], nu=cfg["nu"])


def load_problem(path) -> PosteriorProblem:
    path = Path(path)
    return problem_from_config(json.loads(path.read_text()), base_dir=path.parent)


# ---------------------------------------------------------------------------
# LLIS bases
# ---------------------------------------------------------------------------


def basis_to_json(basis: LLISBasis) -> str:
    payload = {
        "epsilon": basis.epsilon,
        "block_sizes": basis.blocks.block_sizes.tolist(),
        "ranks": basis.ranks.tolist(),
        # per-block column-major coefficient arrays
        "bases": [U.flatten(order="F").tolist() for U in basis.bases],
        "eigenvalues": [np.asarray(w).tolist() for w in basis.eigenvalues],
    }
    return json.dumps(payload)


def basis_from_json(text: str) -> LLISBasis:
    payload = json.loads(text)
    blocks = make_blocks(payload["block_sizes"])
    ranks = np.array(payload["ranks"], dtype=int)
    bases = []
    for j, flat in enumerate(payload["bases"]):
        d_j = int(blocks.block_sizes[j])
        bases.append(np.array(flat, dtype=float).reshape((d_j, ranks[j]), order="F"))
    eigs = [np.array(w, dtype=float) for w in payload["eigenvalues"]]
    return LLISBasis(bases, ranks, float(payload["epsilon"]), eigs, blocks)


def save_basis(path, basis: LLISBasis):
    Path(path).write_text(basis_to_json(basis) + "\n")


def load_basis(path) -> LLISBasis:
    return basis_from_json(Path(path).read_text())


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------


def write_manifest(out_path, command, config, wall_time_s):
    """Config echo + version + wall time beside a run's primary output."""
    from . import __version__

    manifest = {
        "command": command,
        "config": config,
        "version": __version__,
        "wall_time_s": wall_time_s,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    path = Path(str(out_path) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return path

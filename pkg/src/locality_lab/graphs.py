"""Dependency graphs over blocks, path distances, q-neighborhoods and
certification of the polynomial neighborhood-growth condition."""

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np


class DependencyGraph:
    """Undirected graph on block indices with mandatory self-loops.

    Edges encode conditional dependence between blocks; equivalently the
    block sparsity pattern of the log-density Hessian. Immutable after
    construction.
    """

    def __init__(self, neighbors):
        adj = []
        for j, nbrs in enumerate(neighbors):
            s = set(int(k) for k in nbrs)
            s.add(j)  # self-loops are always present
            arr = np.array(sorted(s), dtype=int)
            arr.setflags(write=False)
            adj.append(arr)
        self._adj = tuple(adj)
        b = len(self._adj)
        for j, nbrs in enumerate(self._adj):
            if len(nbrs) and (nbrs[0] < 0 or nbrs[-1] >= b):
                raise ValueError(f"vertex {j} has a neighbor outside [0, {b})")
        for j, nbrs in enumerate(self._adj):
            for k in nbrs:
                if j not in self._adj[k]:
                    raise ValueError(f"adjacency is not symmetric at edge ({j}, {k})")

    @property
    def num_vertices(self) -> int:
        return len(self._adj)

    def neighbors(self, j: int) -> np.ndarray:
        self._check_vertex(j)
        return self._adj[j]

    def has_edge(self, j: int, k: int) -> bool:
        self._check_vertex(j)
        self._check_vertex(k)
        return k in self._adj[j]

    def adjacency_lists(self):
        return [nbrs.tolist() for nbrs in self._adj]

    def _check_vertex(self, j: int) -> None:
        if not 0 <= j < self.num_vertices:
            raise IndexError(f"vertex {j} out of range [0, {self.num_vertices})")

    def __eq__(self, other) -> bool:
        # graph equality is decided on adjacency lists, never on numerics
        if not isinstance(other, DependencyGraph):
            return NotImplemented
        return self.num_vertices == other.num_vertices and all(
            np.array_equal(a, b) for a, b in zip(self._adj, other._adj)
        )

    def __repr__(self) -> str:
        edges = sum(len(n) for n in self._adj)
        return f"DependencyGraph(b={self.num_vertices}, adj entries={edges})"


def distances_from(g: DependencyGraph, j: int) -> np.ndarray:
    """BFS distances from vertex j; disconnected vertices get +inf."""
    g._check_vertex(j)
    dist = np.full(g.num_vertices, np.inf)
    dist[j] = 0
    queue = deque([j])
    while queue:
        v = queue.popleft()
        dv = dist[v]
        for w in g.neighbors(v):
            if not np.isfinite(dist[w]):
                dist[w] = dv + 1
                queue.append(w)
    return dist


def graph_distance(g: DependencyGraph, j: int, k: int):
    """Shortest path length between j and k; 0 on the diagonal, math.inf when
    disconnected (a dedicated sentinel, never a large integer)."""
    g._check_vertex(k)
    d = distances_from(g, j)[k]
    return math.inf if not np.isfinite(d) else int(d)


def all_pairs_distances(g: DependencyGraph) -> np.ndarray:
    return np.stack([distances_from(g, j) for j in range(g.num_vertices)])


def q_neighborhood(g: DependencyGraph, j: int, q: int) -> np.ndarray:
    """Sorted vertices within graph distance q of j; q=0 gives {j}."""
    if q < 0:
        raise ValueError("q must be >= 0")
    dist = distances_from(g, j)
    return np.flatnonzero(dist <= q)


def diameter(g: DependencyGraph) -> int:
    """Largest finite pairwise distance (per connected component)."""
    dists = all_pairs_distances(g)
    finite = dists[np.isfinite(dists)]
    return int(finite.max()) if finite.size else 0


@dataclass(frozen=True)
class LocalityCertificate:
    """Witness that |N_j^q| <= 1 + S q^nu holds for all vertices up to q_max."""

    S: float
    nu: int
    valid_up_to_radius: int
    witnesses: list = field(default_factory=list)  # (vertex, radius, size) where tight

    @property
    def ok(self) -> bool:
        return True


@dataclass(frozen=True)
class LocalityViolation:
    """First (vertex, radius) pair where the neighborhood bound fails."""

    S: float
    nu: int
    vertex: int
    radius: int
    size: int
    bound: float

    @property
    def ok(self) -> bool:
        return False


def certify_locality(g: DependencyGraph, S: float, nu: int, q_max: int | None = None):
    """Check |N_j^q| <= 1 + S q^nu for every vertex and 1 <= q <= q_max.

    q_max defaults to the graph diameter: once a neighborhood saturates its
    connected component the bound cannot fail at larger radii.
    Returns a LocalityCertificate or the first LocalityViolation.
    """
    if S < 0:
        raise ValueError("S must be >= 0")
    if nu < 1 or int(nu) != nu:
        raise ValueError("nu must be a positive integer")
    if q_max is None:
        q_max = max(1, diameter(g))
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    witnesses = []
    for j in range(g.num_vertices):
        dist = distances_from(g, j)
        for q in range(1, q_max + 1):
            size = int(np.sum(dist <= q))
            bound = 1.0 + S * q**nu
            if size > bound:
                return LocalityViolation(S, int(nu), j, q, size, bound)
            if abs(size - bound) < 1e-9:
                witnesses.append((j, q, size))
    return LocalityCertificate(S, int(nu), int(q_max), witnesses)


def banded_graph(b: int, bandwidth: int) -> DependencyGraph:
    """Vertices j, k adjacent iff |j - k| <= bandwidth; (2*bandwidth, 1)-local."""
    if b < 1:
        raise ValueError("b must be >= 1")
    if bandwidth < 0:
        raise ValueError("bandwidth must be >= 0")
    return DependencyGraph(
        [range(max(0, j - bandwidth), min(b, j + bandwidth + 1)) for j in range(b)]
    )


def lattice_graph(side: int, num_axes: int) -> DependencyGraph:
    """Finite von Neumann lattice with side^num_axes vertices."""
    if side < 1 or num_axes < 1:
        raise ValueError("side and num_axes must be >= 1")
    shape = (side,) * num_axes
    b = side**num_axes
    idx = np.arange(b).reshape(shape)
    neighbors = [[] for _ in range(b)]
    for axis in range(num_axes):
        lo = np.moveaxis(idx, axis, 0)
        for i in range(side - 1):
            for a, c in zip(lo[i].ravel(), lo[i + 1].ravel()):
                neighbors[a].append(int(c))
                neighbors[c].append(int(a))
    return DependencyGraph(neighbors)


def graph_to_json(g: DependencyGraph) -> str:
    """Adjacency lists (self-loops included) as a JSON array of arrays."""
    return json.dumps(g.adjacency_lists())


def graph_from_json(text: str) -> DependencyGraph:
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValueError("graph JSON must be an array of neighbor arrays")
    return DependencyGraph(data)

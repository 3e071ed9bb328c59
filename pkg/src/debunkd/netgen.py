"""Social network construction.

Graphs are stored as follower adjacency: an edge ``u -> v`` means *v follows u*,
so everything ``u`` posts is delivered to ``v``.  Under this convention the
follower count of a user is its out-degree.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Preferential-attachment offsets of the growth process (networkx defaults).
DELTA_IN = 0.2
DELTA_OUT = 0.0


class GraphFormatError(ValueError):
    """Raised for unreadable edge-list files."""


@dataclass(frozen=True, eq=False)
class SocialGraph:
    n: int
    out_edges: tuple[np.ndarray, ...]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        e = np.array([len(f) for f in self.out_edges], dtype=np.int64)
        c, x = costs_and_midpoints(e)
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "x", x)
        # plain-list copies for the propagation inner loop
        object.__setattr__(self, "followers", [f.tolist() for f in self.out_edges])
        object.__setattr__(self, "x_list", x.tolist())

    @property
    def n_edges(self) -> int:
        return int(self.e.sum())

    def edges(self) -> list[tuple[int, int]]:
        return [(u, int(v)) for u in range(self.n) for v in self.out_edges[u]]

    def undirected_neighbors(self) -> list[set[int]]:
        nbrs: list[set[int]] = [set() for _ in range(self.n)]
        for u, v in self.edges():
            nbrs[u].add(v)
            nbrs[v].add(u)
        return nbrs


def costs_and_midpoints(e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Selection cost in [1, 10] and logistic midpoint in [1, 3] per user."""
    e = np.asarray(e, dtype=float)
    top = e.max() if e.size else 0.0
    if top <= 0:
        return np.ones_like(e), np.ones_like(e)
    frac = e / top
    return frac * 9 + 1, frac * 2 + 1


def from_edges(n: int, edges, meta: dict | None = None) -> SocialGraph:
    """Build a graph from ``(u, v)`` pairs, dropping self-loops and duplicates."""
    followers: list[list[int]] = [[] for _ in range(n)]
    seen = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v or (u, v) in seen:
            continue
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u}, {v}) outside 0..{n - 1}")
        seen.add((u, v))
        followers[u].append(v)
    out = tuple(np.array(sorted(f), dtype=np.int64) for f in followers)
    return SocialGraph(n, out, dict(meta or {}))


def bollobas_exponents(alpha: float, beta: float, gamma: float,
                       delta_in: float = DELTA_IN, delta_out: float = DELTA_OUT) -> tuple[float, float]:
    """Asymptotic (in-degree, out-degree) power-law exponents of the growth process."""
    x_in = 1 + (1 + delta_in * (alpha + gamma)) / (alpha + beta)
    x_out = 1 + (1 + delta_out * (alpha + gamma)) / (beta + gamma)
    return x_in, x_out


def bollobas_process(n: int, alpha: float, beta: float, gamma: float, seed: int,
                     delta_in: float = DELTA_IN, delta_out: float = DELTA_OUT) -> list[tuple[int, int]]:
    """Raw edge sequence of the Bollobas-Borgs-Chayes-Riordan growth process.

    Starts from the 3-cycle and grows until ``n`` nodes exist.  Each emitted
    edge ``v -> w`` has ``w`` drawn by in-degree (plus ``delta_in``) and ``v``
    by out-degree (plus ``delta_out``).  The result may contain self-loops and
    repeated edges.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if abs(alpha + beta + gamma - 1.0) > 1e-9:
        raise ValueError(f"alpha + beta + gamma must be 1, got {alpha + beta + gamma}")
    if min(alpha, beta, gamma) < 0:
        raise ValueError("alpha, beta, gamma must be nonnegative")

    seed_cycle = [(0, 1), (1, 2), (2, 0)]
    if n < 3:
        return [(v, w) for v, w in seed_cycle if v < n and w < n]

    rng = random.Random(seed)
    raw = list(seed_cycle)
    vs = [0, 1, 2]  # one entry per unit of out-degree
    ws = [1, 2, 0]  # one entry per unit of in-degree
    n_nodes = 3

    def choose(candidates, delta):
        if delta > 0:
            bias = n_nodes * delta
            if rng.random() < bias / (bias + len(candidates)):
                return rng.randrange(n_nodes)
        return candidates[rng.randrange(len(candidates))]

    while n_nodes < n:
        r = rng.random()
        if r < alpha:
            v = n_nodes
            n_nodes += 1
            w = choose(ws, delta_in)
        elif r < alpha + beta:
            v = choose(vs, delta_out)
            w = choose(ws, delta_in)
        else:
            v = choose(vs, delta_out)
            w = n_nodes
            n_nodes += 1
        raw.append((v, w))
        vs.append(v)
        ws.append(w)
    return raw


def generate_scale_free(n: int, alpha: float = 0.05, beta: float = 0.8, gamma: float = 0.15,
                        seed: int = 1) -> SocialGraph:
    """Directed scale-free follower network.

    A process edge ``v -> w`` (``w`` picked by popularity) is read as "v follows
    w", so popular nodes end up with many followers.  Self-loops and repeated
    edges are dropped.
    """
    raw = bollobas_process(n, alpha, beta, gamma, seed)
    meta = {"n": n, "seed": seed, "alpha": alpha, "beta": beta, "gamma": gamma}
    return from_edges(n, ((w, v) for v, w in raw), meta)


def load_edge_list(path, undirected: bool = True) -> SocialGraph:
    """Read a whitespace-separated ``src dst`` edge list, '#' lines skipped.

    Node ids are compacted to ``0..n-1`` in ascending order of the original id.
    """
    path = Path(path)
    pairs = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphFormatError(f"{path}:{lineno}: expected 'src dst', got {line!r}")
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: non-integer id in {line!r}") from None
    if not pairs:
        raise GraphFormatError(f"{path}: no edges")

    ids = sorted({i for p in pairs for i in p})
    index = {old: new for new, old in enumerate(ids)}
    edges = [(index[u], index[v]) for u, v in pairs]
    if undirected:
        edges += [(v, u) for u, v in edges]
    return from_edges(len(ids), edges, {"source": str(path), "undirected": undirected})


def ego_subgraph(graph: SocialGraph, center: int, radius: int) -> SocialGraph:
    """Induced subgraph on nodes within ``radius`` undirected hops of ``center``."""
    if not 0 <= center < graph.n:
        raise IndexError(f"center {center} outside 0..{graph.n - 1}")
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    nbrs = graph.undirected_neighbors()
    dist = {center: 0}
    queue = deque([center])
    while queue:
        u = queue.popleft()
        if dist[u] == radius:
            continue
        for v in nbrs[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    keep = sorted(dist)
    index = {old: new for new, old in enumerate(keep)}
    edges = [(index[u], index[v]) for u, v in graph.edges() if u in index and v in index]
    meta = dict(graph.meta, center=center, radius=radius)
    return from_edges(len(keep), edges, meta)


def write_graph(graph: SocialGraph, path) -> None:
    """Dump edges plus a ``<path>.meta`` key=value sidecar."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"# n={graph.n} edges={graph.n_edges}\n")
        for u, v in graph.edges():
            fh.write(f"{u} {v}\n")
    meta = {"n": graph.n, **{k: v for k, v in graph.meta.items() if k != "n"}}
    with Path(str(path) + ".meta").open("w", encoding="utf-8") as fh:
        for key, value in meta.items():
            fh.write(f"{key}={value}\n")


def read_graph(path) -> SocialGraph:
    """Inverse of :func:`write_graph` (directed, keeps isolated nodes via sidecar n)."""
    path = Path(path)
    meta_path = Path(str(path) + ".meta")
    meta = {}
    if meta_path.exists():
        for line in meta_path.read_text(encoding="utf-8").splitlines():
            if "=" in line:
                k, v = line.split("=", 1)
                meta[k.strip()] = v.strip()
    pairs = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            u, v = line.split()
            pairs.append((int(u), int(v)))
    n = int(meta.get("n", 1 + max((max(p) for p in pairs), default=-1)))
    return from_edges(n, pairs, meta)

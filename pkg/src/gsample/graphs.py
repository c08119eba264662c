"""Undirected weighted graphs and their combinatorial Laplacians.

A graph is a node count plus a list of weighted edges. The Laplacian puts
node degrees on the diagonal and negated weights off-diagonal, so its rows
sum to zero and the all-ones vector spans its kernel on connected graphs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


@dataclass(frozen=True)
class WeightedGraph:
    """Node set {0, ..., n_nodes-1} with undirected positively weighted edges.

    Edges are canonicalized to (k, l, w) with k < l. Self-loops, repeated
    pairs, and non-positive weights are rejected; absence of an edge encodes
    weight zero.
    """

    n_nodes: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("graph needs at least one node")
        canonical = []
        seen = set()
        for k, l, w in self.edges:
            k, l, w = int(k), int(l), float(w)
            if not (0 <= k < self.n_nodes and 0 <= l < self.n_nodes):
                raise ValueError(f"edge ({k},{l}) has a node index outside [0,{self.n_nodes})")
            if k == l:
                raise ValueError(f"self-loop at node {k} is not allowed")
            if w <= 0.0:
                raise ValueError(f"edge ({k},{l}) has non-positive weight {w}; drop the edge instead")
            key = (min(k, l), max(k, l))
            if key in seen:
                raise ValueError(f"duplicate edge for pair {key}")
            seen.add(key)
            canonical.append((key[0], key[1], w))
        canonical.sort()
        object.__setattr__(self, "edges", tuple(canonical))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        """Dense symmetric weighted adjacency matrix."""
        W = np.zeros((self.n_nodes, self.n_nodes))
        for k, l, w in self.edges:
            W[k, l] = w
            W[l, k] = w
        return W

    def edge_set(self) -> set[tuple[int, int]]:
        return {(k, l) for k, l, _ in self.edges}


def build_laplacian(graph: WeightedGraph) -> np.ndarray:
    """Combinatorial Laplacian: degree on the diagonal, -weight elsewhere."""
    W = graph.adjacency()
    return np.diag(W.sum(axis=1)) - W


def is_connected(graph: WeightedGraph) -> bool:
    if graph.n_nodes == 1:
        return True
    rows = [k for k, _, _ in graph.edges]
    cols = [l for _, l, _ in graph.edges]
    data = np.ones(len(rows))
    adj = coo_matrix((data, (rows, cols)), shape=(graph.n_nodes, graph.n_nodes))
    n_comp, _ = connected_components(adj, directed=False)
    return n_comp == 1


def delete_node(graph: WeightedGraph, node: int) -> WeightedGraph:
    """Remove one node (e.g. a pinned reference node) and reindex the rest."""
    if not 0 <= node < graph.n_nodes:
        raise ValueError(f"node {node} outside [0,{graph.n_nodes})")
    remap = {}
    for old in range(graph.n_nodes):
        if old != node:
            remap[old] = len(remap)
    edges = [
        (remap[k], remap[l], w)
        for k, l, w in graph.edges
        if k != node and l != node
    ]
    return WeightedGraph(graph.n_nodes - 1, tuple(edges))


def read_edge_list(path, n_nodes: int | None = None) -> WeightedGraph:
    """Read a CSV edge list: one `k,l,weight` line per edge, 0-based indices.

    Lines starting with `#` are ignored; an optional `src,dst,weight` header
    is skipped. Node count defaults to the largest index seen plus one.
    """
    edges = []
    max_idx = -1
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if parts[:3] == ["src", "dst", "weight"]:
                continue
            if len(parts) != 3:
                raise ValueError(f"malformed edge line: {raw!r}")
            k, l, w = int(parts[0]), int(parts[1]), float(parts[2])
            max_idx = max(max_idx, k, l)
            edges.append((k, l, w))
    if n_nodes is None:
        n_nodes = max_idx + 1
    return WeightedGraph(n_nodes, tuple(edges))


def write_edge_list(graph: WeightedGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("src,dst,weight\n")
        for k, l, w in graph.edges:
            fh.write(f"{k},{l},{w!r}\n")

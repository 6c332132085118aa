"""Immutable multi-relation graph storage.

A graph holds node features, binary labels, and R undirected relation
structures over the same node set. Each relation is kept in CSR form with
sorted, deduplicated neighbor lists. Degree-normalized adjacency matrices
(with self-loops) are built lazily and cached per relation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetric normalization D^-1/2 (A + I) D^-1/2 for one relation.

    Entry (i, j) is 1/sqrt(d_i * d_j) where d counts the self-loop-augmented
    degree. For an isolated node the row is [1] at the diagonal.
    """

    relation: int
    matrix: sp.csr_matrix

    @property
    def num_nodes(self) -> int:
        return self.matrix.shape[0]

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class NodeSplit:
    """Disjoint train/validation/test node-id arrays."""

    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray


class MultiRelationGraph:
    """Node features, labels, and R sparse symmetric adjacency structures.

    Immutable after construction; all reads are safe under concurrent access.
    Use :func:`build_graph` rather than calling the constructor with raw CSR
    arrays.
    """

    def __init__(
        self,
        features: np.ndarray,
        labels: np.ndarray,
        indptr_per_relation: list[np.ndarray],
        indices_per_relation: list[np.ndarray],
    ):
        self.features = features
        self.labels = labels
        self._indptr = indptr_per_relation
        self._indices = indices_per_relation
        self._norm_cache: dict[int, NormalizedAdjacency] = {}
        for arr in (features, labels, *indptr_per_relation, *indices_per_relation):
            arr.flags.writeable = False

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def num_relations(self) -> int:
        return len(self._indptr)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def neighbors(self, node: int, relation: int) -> np.ndarray:
        """Sorted neighbor ids of ``node`` under ``relation``."""
        indptr = self._indptr[relation]
        return self._indices[relation][indptr[node] : indptr[node + 1]]

    def degree(self, node: int, relation: int) -> int:
        indptr = self._indptr[relation]
        return int(indptr[node + 1] - indptr[node])

    def num_edges(self, relation: int) -> int:
        """Undirected edge count (each edge stored twice in CSR)."""
        return len(self._indices[relation]) // 2

    def edge_array(self, relation: int) -> np.ndarray:
        """Undirected edges as an (m, 2) array with src < dst."""
        indptr = self._indptr[relation]
        indices = self._indices[relation]
        src = np.repeat(np.arange(self.num_nodes, dtype=np.int64), np.diff(indptr))
        keep = src < indices
        return np.stack([src[keep], indices[keep]], axis=1)

    def csr_arrays(self, relation: int) -> tuple[np.ndarray, np.ndarray]:
        return self._indptr[relation], self._indices[relation]

    def adjacency_matrix(self, relation: int) -> sp.csr_matrix:
        """Boolean adjacency (no self-loops) as a scipy CSR matrix."""
        n = self.num_nodes
        data = np.ones(len(self._indices[relation]), dtype=np.float64)
        return sp.csr_matrix(
            (data, self._indices[relation], self._indptr[relation]), shape=(n, n)
        )


def build_graph(
    edges_per_relation: list[np.ndarray | list],
    features: np.ndarray,
    labels: np.ndarray,
) -> MultiRelationGraph:
    """Build an immutable graph from per-relation edge lists.

    Input edges are symmetrized and deduplicated; self-edges are dropped
    (self-loops are added only during normalization). Neighbor lists come out
    sorted ascending.
    """
    if len(edges_per_relation) == 0:
        raise ValueError("empty relation list: need at least one relation")
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError("features must be a 2-d matrix")
    labels = np.asarray(labels)
    n = features.shape[0]
    if labels.shape != (n,):
        raise ValueError(
            f"label count mismatch: {labels.shape[0]} labels for {n} feature rows"
        )
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    labels = labels.astype(np.int64)

    indptr_per_relation = []
    indices_per_relation = []
    for r, edges in enumerate(edges_per_relation):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError(f"relation {r}: edge endpoint out of range [0, {n})")
        edges = edges[edges[:, 0] != edges[:, 1]]
        both = np.concatenate([edges, edges[:, ::-1]], axis=0)
        # dedup via scalar encoding; n*n fits in int64 for any realistic n
        keys = np.unique(both[:, 0] * n + both[:, 1])
        src = keys // n
        dst = keys % n
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        indptr_per_relation.append(indptr)
        indices_per_relation.append(dst)

    return MultiRelationGraph(features, labels, indptr_per_relation, indices_per_relation)


def normalized_adjacency(graph: MultiRelationGraph, relation: int) -> NormalizedAdjacency:
    """Return (cached) D^-1/2 (A + I) D^-1/2 for one relation."""
    if not 0 <= relation < graph.num_relations:
        raise ValueError(f"relation index {relation} out of range")
    cached = graph._norm_cache.get(relation)
    if cached is not None:
        return cached
    n = graph.num_nodes
    indptr, indices = graph.csr_arrays(relation)
    deg = np.diff(indptr).astype(np.float64) + 1.0  # self-loop augmented
    inv_sqrt = 1.0 / np.sqrt(deg)
    src = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    rows = np.concatenate([src, np.arange(n, dtype=np.int64)])
    cols = np.concatenate([indices, np.arange(n, dtype=np.int64)])
    vals = inv_sqrt[rows] * inv_sqrt[cols]
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mat.sort_indices()
    result = NormalizedAdjacency(relation=relation, matrix=mat)
    graph._norm_cache[relation] = result
    return result


def khop_neighbors(
    graph: MultiRelationGraph, node: int, relation: int, max_hop: int
) -> list[np.ndarray]:
    """Nodes at shortest-path distance 1..max_hop from ``node`` under one relation.

    Returns one sorted id array per hop; hops are disjoint and the target
    itself is excluded.
    """
    if not 0 <= node < graph.num_nodes:
        raise ValueError(f"node {node} out of range")
    if max_hop < 1:
        raise ValueError("max_hop must be >= 1")
    indptr, indices = graph.csr_arrays(relation)
    seen = np.zeros(graph.num_nodes, dtype=bool)
    seen[node] = True
    frontier = np.array([node], dtype=np.int64)
    hops = []
    for _ in range(max_hop):
        if frontier.size:
            starts = indptr[frontier]
            ends = indptr[frontier + 1]
            chunks = [indices[s:e] for s, e in zip(starts, ends)]
            cand = np.unique(np.concatenate(chunks)) if chunks else frontier[:0]
            frontier = cand[~seen[cand]]
            seen[frontier] = True
        hops.append(frontier)
    return hops


def stratified_split(
    labels: np.ndarray, train_ratio: float, val_ratio: float, seed: int
) -> NodeSplit:
    """Per-class proportional split with a deterministic seeded shuffle.

    Each class contributes round(count * ratio) nodes to train and validation;
    the remainder is test.
    """
    if not 0.0 < train_ratio < 1.0 or not 0.0 < val_ratio < 1.0:
        raise ValueError("ratios must lie in (0, 1)")
    if train_ratio + val_ratio >= 1.0:
        raise ValueError("train_ratio + val_ratio must be < 1")
    labels = np.asarray(labels)
    rng = np.random.Generator(np.random.PCG64(seed))
    train_parts, val_parts, test_parts = [], [], []
    for cls in (0, 1):
        ids = np.flatnonzero(labels == cls)
        if ids.size == 0:
            raise ValueError(f"class {cls} has zero members; cannot stratify")
        perm = ids[rng.permutation(ids.size)]
        n_train = int(round(ids.size * train_ratio))
        n_val = int(round(ids.size * val_ratio))
        n_val = min(n_val, ids.size - n_train)
        train_parts.append(perm[:n_train])
        val_parts.append(perm[n_train : n_train + n_val])
        test_parts.append(perm[n_train + n_val :])
    return NodeSplit(
        train=np.sort(np.concatenate(train_parts)),
        validation=np.sort(np.concatenate(val_parts)),
        test=np.sort(np.concatenate(test_parts)),
    )

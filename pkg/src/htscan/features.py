"""Per-node structural features, whole-graph embeddings, and PCA.

The graph embedding is Weisfeiler-Lehman subtree feature hashing: node
labels start from gate kinds and are refined by hashing each node's label
together with its sorted in/out neighbour labels. Every (round, label)
occurrence is hashed into a fixed-size accumulator which is then
l2-normalized. The construction is deterministic, training-free and
invariant under graph isomorphism.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, DimensionMismatchError, KTooLargeError
from .graph import CircuitGraph
from .netlist import GateKind

KIND_ORDER = tuple(GateKind)
_KIND_INDEX = {k: i for i, k in enumerate(KIND_ORDER)}

#: columns: one-hot(14) | fan_in | fan_out | dist_to_input | dist_to_output
#: | mean neighbour fan_in | mean neighbour fan_out
NODE_FEATURE_DIM = len(KIND_ORDER) + 6


def _both_adj(graph: CircuitGraph):
    return [sorted(set(graph.in_adj[i]) | set(graph.out_adj[i])) for i in range(graph.n)]


def _multi_source_bfs(adj, sources, n) -> np.ndarray:
    """Undirected hop distance to the nearest source; -1 if unreachable."""
    dist = np.full(n, -1.0)
    dq = deque()
    for s in sources:
        dist[s] = 0.0
        dq.append(s)
    while dq:
        u = dq.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1.0
                dq.append(v)
    return dist


def node_features(graph: CircuitGraph) -> np.ndarray:
    """N x 20 feature matrix; layout documented on NODE_FEATURE_DIM."""
    n = graph.n
    feats = np.zeros((n, NODE_FEATURE_DIM))
    adj = _both_adj(graph)
    fan_in = np.array([len(graph.in_adj[i]) for i in range(n)], dtype=float)
    fan_out = np.array([len(graph.out_adj[i]) for i in range(n)], dtype=float)

    inputs = [i for i in range(n) if graph.kinds[i] is GateKind.INPUT_PORT]
    outputs = [i for i in range(n) if graph.kinds[i] is GateKind.OUTPUT_PORT]
    dist_in = _multi_source_bfs(adj, inputs, n)
    dist_out = _multi_source_bfs(adj, outputs, n)

    base = len(KIND_ORDER)
    for i in range(n):
        feats[i, _KIND_INDEX[graph.kinds[i]]] = 1.0
        feats[i, base] = fan_in[i]
        feats[i, base + 1] = fan_out[i]
        feats[i, base + 2] = dist_in[i]
        feats[i, base + 3] = dist_out[i]
        if adj[i]:
            feats[i, base + 4] = fan_in[adj[i]].mean()
            feats[i, base + 5] = fan_out[adj[i]].mean()
    return feats


# ---------------------------------------------------------------------------
# Weisfeiler-Lehman feature hashing
# ---------------------------------------------------------------------------

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(text: str) -> int:
    """64-bit FNV-1a of the UTF-8 bytes; bit-exact across platforms."""
    h = _FNV_OFFSET
    for b in text.encode("utf-8"):
        h ^= b
        h = (h * _FNV_PRIME) & _U64
    return h


def wl_label_rounds(kinds, in_nbrs, out_nbrs, iterations: int) -> list[list[str]]:
    """WL label refinement. Round 0 labels are the kind names; round r+1
    compresses `cur(in1,..|out1,..)` (neighbour labels sorted) through
    fnv1a64 rendered as 16 hex digits."""
    labels = [k.value if isinstance(k, GateKind) else str(k) for k in kinds]
    rounds = [labels]
    for _ in range(iterations):
        prev = rounds[-1]
        nxt = []
        for i in range(len(prev)):
            ins = ",".join(sorted(prev[j] for j in in_nbrs[i]))
            outs = ",".join(sorted(prev[j] for j in out_nbrs[i]))
            nxt.append(format(fnv1a64(f"{prev[i]}({ins}|{outs})"), "016x"))
        rounds.append(nxt)
    return rounds


def wl_embed(graph: CircuitGraph, iterations: int = 3, dim: int = 256) -> np.ndarray:
    """Hash the (round, label) multiset into `dim` buckets; l2-normalized.
    The empty graph embeds to the zero vector."""
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    vec = np.zeros(dim)
    if graph.n == 0:
        return vec
    rounds = wl_label_rounds(graph.kinds, graph.in_adj, graph.out_adj, iterations)
    for r, labels in enumerate(rounds):
        for lab in labels:
            vec[fnv1a64(f"{r}:{lab}") % dim] += 1.0
    return vec / np.linalg.norm(vec)


def wl_node_signature(graph: CircuitGraph, node: int, radius: int = 2, iterations: int = 2) -> Counter:
    """Multiset of final-round WL labels over the induced subgraph of the
    radius-hop undirected neighbourhood of `node`."""
    ball = {node}
    frontier = {node}
    for _ in range(radius):
        nxt = set()
        for u in frontier:
            nxt.update(graph.in_adj[u])
            nxt.update(graph.out_adj[u])
        frontier = nxt - ball
        ball |= frontier
    order = sorted(ball)
    local = {g: l for l, g in enumerate(order)}
    in_nbrs = [[local[j] for j in graph.in_adj[g] if j in local] for g in order]
    out_nbrs = [[local[j] for j in graph.out_adj[g] if j in local] for g in order]
    kinds = [graph.kinds[g] for g in order]
    rounds = wl_label_rounds(kinds, in_nbrs, out_nbrs, iterations)
    return Counter(rounds[-1])


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray  # (k,), non-increasing

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def input_dim(self) -> int:
        return self.components.shape[1]

    def to_json(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "PcaModel":
        return cls(
            mean=np.asarray(data["mean"], dtype=float),
            components=np.asarray(data["components"], dtype=float),
            explained_variance=np.asarray(data["explained_variance"], dtype=float),
        )


def fit_pca(data, k: int) -> PcaModel:
    """Top-k principal components of the sample covariance, eigenvalues
    descending; each component's largest-magnitude entry is made positive."""
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DegenerateDataError("PCA needs at least 2 rows")
    n, d = X.shape
    if not 1 <= k <= min(n - 1, d):
        raise KTooLargeError(f"k={k} exceeds min(rows-1={n - 1}, dim={d})")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:k]
    comps = eigvecs[:, order].T.copy()
    for row in comps:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    var = np.clip(eigvals[order], 0.0, None)
    return PcaModel(mean=mean, components=comps, explained_variance=var)


def pca_transform(model: PcaModel, data) -> np.ndarray:
    """Project rows onto the model's components after centering."""
    X = np.atleast_2d(np.asarray(data, dtype=float))
    if X.shape[1] != model.input_dim:
        raise DimensionMismatchError(
            f"data has {X.shape[1]} columns, model expects {model.input_dim}"
        )
    return (X - model.mean) @ model.components.T

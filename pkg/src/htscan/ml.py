"""Numerical core: CART decision tree and a dense two-class GCN with
softmax/cross-entropy, Adam/AdamW training and a finite-difference
gradient checker. Everything runs in float64 and is deterministic for a
given seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyDatasetError,
    LabelOutOfRangeError,
    NonFiniteInputError,
    ShapeMismatchError,
)
from .graph import CircuitGraph

NON_TROJAN = 0
TROJAN = 1


@dataclass(frozen=True)
class Prediction:
    y: int
    probabilities: np.ndarray  # (2,), sums to 1


# ---------------------------------------------------------------------------
# decision tree (CART, Gini impurity)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TreeNode:
    """Split node when feature >= 0 (x[feature] <= threshold goes left),
    leaf otherwise."""

    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    probs: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class DecisionTreeModel:
    nodes: tuple[TreeNode, ...]
    n_features: int
    max_depth: int | None = None
    min_samples_leaf: int = 1

    def to_json(self) -> dict:
        return {
            "n_features": self.n_features,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "nodes": [
                {
                    "feature": n.feature,
                    "threshold": n.threshold,
                    "left": n.left,
                    "right": n.right,
                    "probs": list(n.probs),
                }
                for n in self.nodes
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "DecisionTreeModel":
        nodes = tuple(
            TreeNode(n["feature"], n["threshold"], n["left"], n["right"], tuple(n["probs"]))
            for n in data["nodes"]
        )
        return cls(nodes, data["n_features"], data["max_depth"], data["min_samples_leaf"])


def _gini(counts) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return 1.0 - float(np.sum(p * p))


def _best_split(X, y, min_leaf):
    """Lowest weighted child Gini over midpoint thresholds; ties keep the
    first (feature asc, threshold asc). Returns (feature, threshold) or None."""
    n = len(y)
    best = None
    best_score = np.inf
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        vals = X[order, f]
        labels = y[order]
        ones = np.cumsum(labels)
        total_ones = ones[-1]
        for i in range(n - 1):
            if vals[i] == vals[i + 1]:
                continue
            n_left = i + 1
            n_right = n - n_left
            if n_left < min_leaf or n_right < min_leaf:
                continue
            l1 = ones[i]
            left = np.array([n_left - l1, l1], dtype=float)
            right = np.array([n_right - (total_ones - l1), total_ones - l1], dtype=float)
            score = (n_left * _gini(left) + n_right * _gini(right)) / n
            if score < best_score - 1e-15:
                best_score = score
                best = (f, (vals[i] + vals[i + 1]) / 2.0)
    return best


def fit_tree(X, y, max_depth: int | None = None, min_samples_leaf: int = 1, seed: int = 0) -> DecisionTreeModel:
    """Greedy CART with Gini impurity; deterministic. With unlimited depth
    the tree fits any label assignment that is consistent on feature rows."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[0] == 0:
        raise EmptyDatasetError("no training samples")
    if X.shape[0] != y.shape[0]:
        raise ShapeMismatchError(f"{X.shape[0]} rows vs {y.shape[0]} labels")
    if np.any((y < 0) | (y > 1)):
        raise LabelOutOfRangeError("labels must be 0 or 1")

    nodes: list[TreeNode] = []

    def build(idx, depth):
        counts = np.array([np.sum(y[idx] == 0), np.sum(y[idx] == 1)], dtype=float)
        pos = len(nodes)
        nodes.append(TreeNode())  # placeholder
        pure = counts[0] == 0 or counts[1] == 0
        at_depth = max_depth is not None and depth >= max_depth
        split = None if (pure or at_depth) else _best_split(X[idx], y[idx], min_samples_leaf)
        if split is None:
            nodes[pos] = TreeNode(probs=tuple(counts / counts.sum()))
            return pos
        f, thr = split
        mask = X[idx, f] <= thr
        left = build(idx[mask], depth + 1)
        right = build(idx[~mask], depth + 1)
        nodes[pos] = TreeNode(feature=f, threshold=thr, left=left, right=right)
        return pos

    build(np.arange(X.shape[0]), 0)
    return DecisionTreeModel(tuple(nodes), X.shape[1], max_depth, min_samples_leaf)


def tree_predict(model: DecisionTreeModel, x) -> Prediction:
    """Descend splits (<= goes left); argmax ties resolve to class 0."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != model.n_features:
        raise DimensionMismatchError(f"expected {model.n_features} features, got {x.shape[0]}")
    node = model.nodes[0]
    while node.feature >= 0:
        node = model.nodes[node.left if x[node.feature] <= node.threshold else node.right]
    probs = np.asarray(node.probs, dtype=float)
    return Prediction(int(np.argmax(probs)), probs)


# ---------------------------------------------------------------------------
# GCN
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    hidden: int = 16
    conv_layers: int = 2
    learning_rate: float = 0.001
    epochs: int = 200
    optimizer: str = "adam"  # adam | adamw
    weight_decay: float = 0.01  # adamw only
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    loss: str = "cross_entropy"
    classification: str = "softmax"
    class_weights: tuple[float, float] | None = None  # None = inverse frequency
    seed: int = 0
    train_fraction: float = 0.8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")

    def echo(self) -> dict:
        return {
            "hidden": self.hidden,
            "conv_layers": self.conv_layers,
            "classification": self.classification,
            "optimizer": self.optimizer,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "loss": self.loss,
        }


@dataclass
class GcnModel:
    weights: list[np.ndarray]  # conv layer weights, chained dims
    biases: list[np.ndarray]
    head_w: np.ndarray  # (hidden, 2)
    head_b: np.ndarray  # (2,)
    readout: str  # "mean" (graph mode) | "none" (node mode)
    config: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases, self.head_w, self.head_b]

    def copy(self) -> "GcnModel":
        return GcnModel(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.head_w.copy(),
            self.head_b.copy(),
            self.readout,
            dict(self.config),
            self.seed,
        )

    def to_json(self) -> dict:
        layers = []
        for w, b in zip(self.weights, self.biases):
            layers.append({"rows": w.shape[0], "cols": w.shape[1], "weights": w.tolist(), "bias": b.tolist()})
        layers.append(
            {
                "rows": self.head_w.shape[0],
                "cols": self.head_w.shape[1],
                "weights": self.head_w.tolist(),
                "bias": self.head_b.tolist(),
            }
        )
        return {
            "mode": "graph" if self.readout == "mean" else "node",
            "layers": layers,
            "readout": self.readout,
            "config": self.config,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "GcnModel":
        layers = data["layers"]
        weights = [np.asarray(l["weights"], dtype=float) for l in layers[:-1]]
        biases = [np.asarray(l["bias"], dtype=float) for l in layers[:-1]]
        head = layers[-1]
        return cls(
            weights,
            biases,
            np.asarray(head["weights"], dtype=float),
            np.asarray(head["bias"], dtype=float),
            data["readout"],
            data.get("config", {}),
            data.get("seed", 0),
        )


def normalized_adjacency(graph: CircuitGraph) -> np.ndarray:
    """Symmetric degree-normalized adjacency with self loops:
    D^-1/2 (A + I) D^-1/2 over the 0/1 undirected adjacency."""
    n = graph.n
    a = np.eye(n)
    if graph.und_src.size:
        a[graph.und_src, graph.und_dst] = 1.0
    deg = a.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def init_gcn(input_dim: int, config: TrainConfig, readout: str) -> GcnModel:
    """Glorot-uniform weights from the config seed; zero biases."""
    rng = np.random.default_rng(config.seed)
    dims = [input_dim] + [config.hidden] * config.conv_layers
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        s = np.sqrt(6.0 / (d_in + d_out))
        weights.append(rng.uniform(-s, s, size=(d_in, d_out)))
        biases.append(np.zeros(d_out))
    s = np.sqrt(6.0 / (dims[-1] + 2))
    head_w = rng.uniform(-s, s, size=(dims[-1], 2))
    head_b = np.zeros(2)
    return GcnModel(weights, biases, head_w, head_b, readout, config.echo(), config.seed)


def _as_propagation(graph) -> np.ndarray:
    if isinstance(graph, CircuitGraph):
        return normalized_adjacency(graph)
    return np.asarray(graph, dtype=float)


def _forward_full(model: GcnModel, s: np.ndarray, x: np.ndarray):
    """Forward pass keeping intermediates for backprop."""
    hs = [x]
    zs = []
    h = x
    for w, b in zip(model.weights, model.biases):
        z = s @ h @ w + b
        h = np.maximum(z, 0.0)
        zs.append(z)
        hs.append(h)
    if model.readout == "mean":
        pooled = h.mean(axis=0, keepdims=True)
    else:
        pooled = h
    logits = pooled @ model.head_w + model.head_b
    return hs, zs, pooled, logits


def gcn_forward(model: GcnModel, graph, x):
    """Node logits, plus graph logits when the model uses mean readout.

    `graph` may be a CircuitGraph or a precomputed propagation matrix.
    Returns (node_logits, graph_logits | None)."""
    s = _as_propagation(graph)
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != s.shape[0]:
        raise DimensionMismatchError(f"features {x.shape} vs graph with {s.shape[0]} nodes")
    if x.shape[1] != model.input_dim:
        raise DimensionMismatchError(f"features have {x.shape[1]} columns, model expects {model.input_dim}")
    hs, _, pooled, logits = _forward_full(model, s, x)
    if model.readout == "mean":
        node_logits = hs[-1] @ model.head_w + model.head_b
        return node_logits, logits[0]
    return logits, None


def softmax(logits) -> np.ndarray:
    """Row-wise stable softmax; rows sum to 1."""
    z = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(z)):
        raise NonFiniteInputError("softmax input must be finite")
    one_d = z.ndim == 1
    z = np.atleast_2d(z)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    return p[0] if one_d else p


def cross_entropy(probs, labels, class_weights=None) -> float:
    """Weighted mean negative log-likelihood; probabilities clamped at
    1e-12. Weights (1, 1) recover the plain mean."""
    p = np.atleast_2d(np.asarray(probs, dtype=float))
    y = np.asarray(labels, dtype=np.int64).ravel()
    if p.shape[0] != y.shape[0]:
        raise DimensionMismatchError(f"{p.shape[0]} prediction rows vs {y.shape[0]} labels")
    if np.any((y < 0) | (y >= p.shape[1])):
        raise LabelOutOfRangeError("label outside class range")
    w = np.ones(p.shape[1]) if class_weights is None else np.asarray(class_weights, dtype=float)
    if w.shape[0] != p.shape[1]:
        raise DimensionMismatchError("one class weight per class required")
    picked = np.clip(p[np.arange(len(y)), y], 1e-12, None)
    wy = w[y]
    return float(-(wy * np.log(picked)).sum() / wy.sum())


class Adam:
    """Adam / AdamW on a list of parameter arrays, updated in place."""

    def __init__(self, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0, decoupled=False):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.decoupled = decoupled
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1**self.t)
            v_hat = self.v[i] / (1 - b2**self.t)
            update = m_hat / (np.sqrt(v_hat) + self.eps)
            if self.decoupled and self.weight_decay:
                update = update + self.weight_decay * p
            p -= self.lr * update


@dataclass(frozen=True)
class GraphSample:
    """One training unit: propagation source, node features, label(s).

    `y` is an int for graph classification or an int array (one label per
    node) for node classification."""

    graph: object  # CircuitGraph | ndarray propagation matrix
    x: np.ndarray
    y: object


def _inverse_frequency_weights(labels: np.ndarray) -> np.ndarray:
    counts = np.bincount(labels, minlength=2).astype(float)
    counts[counts == 0] = 1.0
    return labels.shape[0] / (2.0 * counts)


def _backward(model, s, x, g_logits, hs, zs, pooled):
    """Gradients of the summed (pre-normalized) loss contribution."""
    gw_head = pooled.T @ g_logits
    gb_head = g_logits.sum(axis=0)
    g_pooled = g_logits @ model.head_w.T
    if model.readout == "mean":
        g_h = np.repeat(g_pooled, x.shape[0], axis=0) / x.shape[0]
    else:
        g_h = g_pooled
    gws = [None] * len(model.weights)
    gbs = [None] * len(model.biases)
    for l in range(len(model.weights) - 1, -1, -1):
        g_z = g_h * (zs[l] > 0)
        sh = s @ hs[l]
        gws[l] = sh.T @ g_z
        gbs[l] = g_z.sum(axis=0)
        g_h = s @ (g_z @ model.weights[l].T)
    return [*gws, *gbs, gw_head, gb_head]


def _epoch_pass(model, samples, props, class_w, mode):
    """One full-batch pass: (weighted-mean loss, gradient list)."""
    total_w = 0.0
    for smp in samples:
        ys = np.atleast_1d(np.asarray(smp.y, dtype=np.int64))
        total_w += float(class_w[ys].sum())

    loss = 0.0
    grads = [np.zeros_like(p) for p in model.params()]
    for s, smp in zip(props, samples):
        hs, zs, pooled, logits = _forward_full(model, s, smp.x)
        p = softmax(logits)
        ys = np.atleast_1d(np.asarray(smp.y, dtype=np.int64))
        wy = class_w[ys]
        picked = np.clip(p[np.arange(len(ys)), ys], 1e-12, None)
        loss += float(-(wy * np.log(picked)).sum())
        g_logits = p.copy()
        g_logits[np.arange(len(ys)), ys] -= 1.0
        g_logits *= (wy / total_w)[:, None]
        for acc, g in zip(grads, _backward(model, s, smp.x, g_logits, hs, zs, pooled)):
            acc += g
    return loss / total_w, grads


def train_gcn(dataset, mode: str, config: TrainConfig):
    """Full-batch deterministic training. Returns (model, loss_trace);
    epochs=0 returns the seeded initialization untouched."""
    if mode not in ("graph", "node"):
        raise ValueError(f"mode must be 'graph' or 'node', got {mode!r}")
    samples = [s if isinstance(s, GraphSample) else GraphSample(*s) for s in dataset]
    if not samples:
        raise EmptyDatasetError("no training graphs")

    input_dim = samples[0].x.shape[1]
    all_labels = []
    for smp in samples:
        if smp.x.ndim != 2 or smp.x.shape[1] != input_dim:
            raise ShapeMismatchError("inconsistent feature dimensions across graphs")
        ys = np.atleast_1d(np.asarray(smp.y, dtype=np.int64))
        if mode == "node" and ys.shape[0] != smp.x.shape[0]:
            raise ShapeMismatchError("node mode needs one label per node")
        if mode == "graph" and ys.shape[0] != 1:
            raise ShapeMismatchError("graph mode needs one label per graph")
        if np.any((ys < 0) | (ys > 1)):
            raise LabelOutOfRangeError("labels must be 0 or 1")
        all_labels.append(ys)

    readout = "mean" if mode == "graph" else "none"
    model = init_gcn(input_dim, config, readout)
    if config.epochs == 0:
        return model, []

    if config.class_weights is not None:
        class_w = np.asarray(config.class_weights, dtype=float)
    else:
        class_w = _inverse_frequency_weights(np.concatenate(all_labels))

    props = [_as_propagation(smp.graph) for smp in samples]
    opt = Adam(
        lr=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps,
        weight_decay=config.weight_decay if config.optimizer == "adamw" else 0.0,
        decoupled=config.optimizer == "adamw",
    )
    params = model.params()
    losses = []
    for _ in range(config.epochs):
        loss, grads = _epoch_pass(model, samples, props, class_w, mode)
        losses.append(loss)
        opt.step(params, grads)
    return model, losses


def grad_check(model: GcnModel, graph, x, labels, class_weights=None) -> float:
    """Max relative error between backprop and central finite differences
    (h = 1e-5) over every parameter."""
    s = _as_propagation(graph)
    x = np.asarray(x, dtype=float)
    ys = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    class_w = np.ones(2) if class_weights is None else np.asarray(class_weights, dtype=float)

    work = model.copy()
    params = work.params()
    if sum(p.size for p in params) > 10_000:
        raise ShapeMismatchError("model too large for finite differences")

    def loss_value():
        _, _, _, logits = _forward_full(work, s, x)
        return cross_entropy(softmax(logits), ys, class_w)

    total_w = float(class_w[ys].sum())
    hs, zs, pooled, logits = _forward_full(work, s, x)
    p = softmax(np.atleast_2d(logits))
    g_logits = p.copy()
    g_logits[np.arange(len(ys)), ys] -= 1.0
    g_logits *= (class_w[ys] / total_w)[:, None]
    analytic = _backward(work, s, x, g_logits, hs, zs, pooled)

    h = 1e-5
    worst = 0.0
    for p_arr, g_arr in zip(params, analytic):
        flat = p_arr.ravel()
        g_flat = g_arr.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_value()
            flat[i] = orig - h
            down = loss_value()
            flat[i] = orig
            numeric = (up - down) / (2 * h)
            ga = g_flat[i]
            err = abs(ga - numeric) / max(1e-8, abs(ga) + abs(numeric))
            worst = max(worst, err)
    return worst

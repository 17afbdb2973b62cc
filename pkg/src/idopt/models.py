"""Black-box functions: test functions, an MLP, a tree ensemble and a Gaussian KDE.

Every model exposes ``evaluate(X)`` on a ``(K, D)`` batch and ``__call__(x)``
on a single point. Both are pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit, logsumexp
from scipy.stats import rankdata


class TrainingError(ValueError):
    pass


class BlackBox:
    dim = None

    def evaluate(self, X) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> float:
        return float(self.evaluate(np.asarray(x, dtype=float).reshape(1, -1))[0])


def _batch(X) -> np.ndarray:
    return np.atleast_2d(np.asarray(X, dtype=float))


# Test functions ------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticBowl(BlackBox):
    """``scale - |x - center|^2``; its box mean is known in closed form."""

    center: tuple
    scale: float = 0.0

    def evaluate(self, X):
        X = _batch(X)
        return self.scale - np.sum((X - np.asarray(self.center)) ** 2, axis=1)

    def box_mean(self, centers, half_lengths) -> float:
        c = np.asarray(centers) - np.asarray(self.center)
        s = np.asarray(half_lengths)
        return float(self.scale - np.sum(c * c + s * s / 3.0))


def quadratic_bowl(center, scale: float = 0.0) -> QuadraticBowl:
    return QuadraticBowl(tuple(float(v) for v in np.atleast_1d(center)), float(scale))


@dataclass(frozen=True)
class Constant(BlackBox):
    value: float

    def evaluate(self, X):
        return np.full(_batch(X).shape[0], float(self.value))


@dataclass(frozen=True)
class Linear(BlackBox):
    weights: tuple
    offset: float = 0.0

    def evaluate(self, X):
        return _batch(X) @ np.asarray(self.weights) + self.offset


@dataclass(frozen=True)
class GaussianBump(BlackBox):
    """``height * exp(-|x - center|^2 / (2 width^2))``."""

    center: tuple
    width: float = 1.0
    height: float = 1.0

    def evaluate(self, X):
        d2 = np.sum((_batch(X) - np.asarray(self.center)) ** 2, axis=1)
        return self.height * np.exp(-d2 / (2.0 * self.width ** 2))


def builtin(name: str, dim: int) -> BlackBox:
    """Test function by name: ``bowl``, ``neg_sphere``, ``constant``, ``linear``, ``bump``."""
    zeros = (0.0,) * dim
    table = {
        "bowl": lambda: QuadraticBowl((1.0,) * dim, 5.0),
        "neg_sphere": lambda: QuadraticBowl(zeros, 0.0),
        "constant": lambda: Constant(1.0),
        "linear": lambda: Linear((1.0,) * dim),
        "bump": lambda: GaussianBump(zeros),
    }
    if name not in table:
        raise KeyError(f"unknown built-in function {name!r}; choose from {sorted(table)}")
    return table[name]()


# Metrics -------------------------------------------------------------------


def roc_auc(labels, scores) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties averaged)."""
    labels = np.asarray(labels).astype(bool)
    n_pos, n_neg = labels.sum(), (~labels).sum()
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def accuracy(labels, scores, threshold: float = 0.5) -> float:
    return float(np.mean((np.asarray(scores) >= threshold) == np.asarray(labels).astype(bool)))


def _check_training_data(X, y):
    X = _batch(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.size:
        raise TrainingError(f"{X.shape[0]} rows but {y.size} labels")
    if X.shape[0] < 2:
        raise TrainingError("need at least 2 training rows")
    if not np.all((y == 0) | (y == 1)):
        raise TrainingError("labels must be 0/1")
    if y.min() == y.max():
        raise TrainingError("labels contain a single class")
    return X, y


# MLP -----------------------------------------------------------------------

_P_EPS = 1e-15


@dataclass(frozen=True)
class MlpModel(BlackBox):
    """ReLU hidden layers, logistic output. ``weights[l]`` maps layer l to l+1."""

    weights: tuple
    biases: tuple

    @property
    def dim(self):
        return self.weights[0].shape[0]

    @property
    def layer_sizes(self) -> list:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def logits(self, X) -> np.ndarray:
        h = _batch(X)
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ W + b, 0.0)
        return (h @ self.weights[-1] + self.biases[-1])[:, 0]

    def evaluate(self, X):
        return np.clip(expit(self.logits(X)), _P_EPS, 1.0 - _P_EPS)

    def to_json(self) -> dict:
        return {"kind": "mlp", "weights": [w.tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases]}

    @classmethod
    def from_json(cls, doc) -> "MlpModel":
        return cls(tuple(np.array(w, dtype=float) for w in doc["weights"]),
                   tuple(np.array(b, dtype=float) for b in doc["biases"]))


def mlp_train(X, y, hidden=(16,), epochs: int = 200, lr: float = 0.01,
              batch_size: int = 32, seed: int = 0) -> MlpModel:
    """Mini-batch SGD on binary cross-entropy, He-initialized."""
    X, y = _check_training_data(X, y)
    rng = np.random.default_rng(seed)
    sizes = [X.shape[1], *hidden, 1]
    Ws = [rng.normal(0.0, math.sqrt(2.0 / a), size=(a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
    bs = [np.zeros(b) for b in sizes[1:]]
    n = X.shape[0]
    L = len(Ws)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            acts = [X[idx]]
            for l in range(L - 1):
                acts.append(np.maximum(acts[-1] @ Ws[l] + bs[l], 0.0))
            p = expit(acts[-1] @ Ws[-1] + bs[-1])[:, 0]
            delta = ((p - y[idx]) / len(idx))[:, None]
            for l in range(L - 1, -1, -1):
                gW = acts[l].T @ delta
                gb = delta.sum(axis=0)
                if l:
                    delta = (delta @ Ws[l].T) * (acts[l] > 0)
                Ws[l] -= lr * gW
                bs[l] -= lr * gb
    return MlpModel(tuple(Ws), tuple(bs))


# Tree ensemble -------------------------------------------------------------


@dataclass(frozen=True)
class Tree:
    """Array-encoded binary tree; ``feature[i] == -1`` marks a leaf.

    Internal nodes send ``x[feature] <= threshold`` to ``left``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X) -> np.ndarray:
        X = _batch(X)
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                return node
            go_left = X[rows[inner], feat[inner]] <= self.threshold[node[inner]]
            node[inner] = np.where(go_left, self.left[node[inner]], self.right[node[inner]])

    def evaluate(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    @property
    def depth(self) -> int:
        def walk(i):
            return 0 if self.feature[i] < 0 else 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def to_json(self) -> dict:
        """Nested node records."""
        def node(i):
            if self.feature[i] < 0:
                return {"value": float(self.value[i])}
            return {"feature": int(self.feature[i]), "threshold": float(self.threshold[i]),
                    "value": float(self.value[i]),
                    "left": node(self.left[i]), "right": node(self.right[i])}
        return node(0)

    @classmethod
    def from_json(cls, doc) -> "Tree":
        feature, threshold, left, right, value = [], [], [], [], []

        def add(rec):
            i = len(feature)
            feature.append(int(rec.get("feature", -1)))
            threshold.append(float(rec.get("threshold", 0.0)))
            value.append(float(rec["value"]))
            left.append(-1)
            right.append(-1)
            if feature[i] >= 0:
                left[i] = add(rec["left"])
                right[i] = add(rec["right"])
            return i

        add(doc)
        return cls(np.array(feature), np.array(threshold), np.array(left),
                   np.array(right), np.array(value))


def _best_split(X, y, features):
    """Gini-optimal ``(feature, threshold, gain)`` over candidate features, or None."""
    n = y.size
    pos = y.sum()
    parent = 1.0 - (pos / n) ** 2 - (1 - pos / n) ** 2
    best = None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], y[order]
        cut = np.flatnonzero(xs[1:] > xs[:-1])  # split after position cut
        if cut.size == 0:
            continue
        nl = cut + 1.0
        nr = n - nl
        pl = np.cumsum(ys)[cut]
        pr = pos - pl
        gl = 1.0 - (pl / nl) ** 2 - ((nl - pl) / nl) ** 2
        gr = 1.0 - (pr / nr) ** 2 - ((nr - pr) / nr) ** 2
        gain = parent - (nl * gl + nr * gr) / n
        j = int(np.argmax(gain))
        if gain[j] > 1e-12 and (best is None or gain[j] > best[2]):
            best = (int(f), 0.5 * (xs[cut[j]] + xs[cut[j] + 1]), float(gain[j]))
    return best


def build_tree(X, y, max_depth: int, max_features: int, rng: np.random.Generator,
               min_samples_split: int = 2) -> Tree:
    """CART classification tree; leaves hold the positive fraction."""
    feature, threshold, left, right, value = [], [], [], [], []

    def grow(idx, depth):
        i = len(feature)
        yi = y[idx]
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(yi.mean()))
        if depth >= max_depth or idx.size < min_samples_split or yi.min() == yi.max():
            return i
        cand = rng.choice(X.shape[1], size=min(max_features, X.shape[1]), replace=False)
        split = _best_split(X[idx], yi, cand)
        if split is None:
            return i
        f, thr, _ = split
        mask = X[idx, f] <= thr
        feature[i] = f
        threshold[i] = thr
        left[i] = grow(idx[mask], depth + 1)
        right[i] = grow(idx[~mask], depth + 1)
        return i

    grow(np.arange(X.shape[0]), 0)
    return Tree(np.array(feature), np.array(threshold), np.array(left),
                np.array(right), np.array(value))


@dataclass(frozen=True)
class TreeEnsemble(BlackBox):
    trees: tuple
    dim: int

    def evaluate(self, X):
        X = _batch(X)
        return np.mean([t.evaluate(X) for t in self.trees], axis=0)

    def to_json(self) -> dict:
        return {"kind": "forest", "dim": self.dim, "trees": [t.to_json() for t in self.trees]}

    @classmethod
    def from_json(cls, doc) -> "TreeEnsemble":
        return cls(tuple(Tree.from_json(t) for t in doc["trees"]), int(doc["dim"]))


def forest_train(X, y, n_trees: int = 100, max_depth: int = 6, seed: int = 0,
                 max_features=None, bootstrap: bool = True) -> TreeEnsemble:
    """Bagged CART trees with ``ceil(sqrt(D))`` candidate features per split."""
    X, y = _check_training_data(X, y)
    rng = np.random.default_rng(seed)
    n, d = X.shape
    if max_features is None:
        max_features = math.ceil(math.sqrt(d))
    trees = []
    for _ in range(n_trees):
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(build_tree(X[rows], y[rows], max_depth, max_features, rng))
    return TreeEnsemble(tuple(trees), d)


# Density -------------------------------------------------------------------


@dataclass(frozen=True)
class KdeModel(BlackBox):
    """Isotropic Gaussian KDE, normalized to integrate to one."""

    support: np.ndarray
    bandwidth: float = 0.2

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")
        object.__setattr__(self, "support", _batch(self.support))

    @property
    def dim(self):
        return self.support.shape[1]

    def log_density(self, X) -> np.ndarray:
        X = _batch(X)
        n, d = self.support.shape
        h = self.bandwidth
        d2 = cdist(X, self.support, "sqeuclidean")
        log_norm = math.log(n) + 0.5 * d * math.log(2 * math.pi) + d * math.log(h)
        return logsumexp(-d2 / (2 * h * h), axis=1) - log_norm

    def evaluate(self, X):
        return np.exp(self.log_density(X))

    def to_json(self) -> dict:
        return {"kind": "kde", "bandwidth": self.bandwidth, "support": self.support.tolist()}

    @classmethod
    def from_json(cls, doc) -> "KdeModel":
        return cls(np.array(doc["support"], dtype=float), float(doc["bandwidth"]))


def kde_eval(model: KdeModel, x) -> float:
    return model(x)


@dataclass(frozen=True)
class DensityWeighted(BlackBox):
    """Pointwise product of a black box and a density."""

    f: BlackBox
    density: KdeModel

    def evaluate(self, X):
        X = _batch(X)
        return self.f.evaluate(X) * self.density.evaluate(X)


def density_weighted(f: BlackBox, density: KdeModel) -> DensityWeighted:
    fd = getattr(f, "dim", None)
    if fd is not None and fd != density.dim:
        raise ValueError(f"model has {fd} dims, density has {density.dim}")
    return DensityWeighted(f, density)


# Serialization -------------------------------------------------------------

_KINDS = {"mlp": MlpModel, "forest": TreeEnsemble, "kde": KdeModel}


def model_from_json(doc: dict) -> BlackBox:
    kind = doc.get("kind")
    if kind not in _KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    return _KINDS[kind].from_json(doc)


def save_model(model, path, **extra):
    doc = model.to_json()
    doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path):
    """Return ``(model, document)``; the document keeps any extra fields."""
    with open(path) as fh:
        doc = json.load(fh)
    return model_from_json(doc), doc

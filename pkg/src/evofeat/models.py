"""From-scratch tree and neural classifiers with a scikit-learn flavored API.

These are the proxy models driving the evolutionary fitness and the testing
models scoring the final transformations. All fits are deterministic given
(data, params, random_state).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .exceptions import (
    EmptyTrainingSetError,
    MulticlassUnsupportedError,
    SingleClassTruthError,
)
from .validation import check_matrix, check_X_y, ensure_rng


def balanced_accuracy(y_true, y_pred) -> float:
    """Mean per-class recall; for binary labels this is (TPR + TNR) / 2."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or y_true.size < 1:
        raise ValueError("y_true and y_pred must be equal-length 1-D vectors")
    classes = np.unique(y_true)
    if classes.size < 2:
        raise SingleClassTruthError(
            "balanced accuracy is undefined when the truth holds one class")
    recalls = [np.mean(y_pred[y_true == c] == c) for c in classes]
    return float(np.mean(recalls))


# --------------------------------------------------------------------------
# CART internals
# --------------------------------------------------------------------------

class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, value=None, feature=None, threshold=None,
                 left=None, right=None):
        self.value = value
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right

    @property
    def is_leaf(self):
        return self.feature is None


def _majority(y, n_classes):
    return int(np.argmax(np.bincount(y, minlength=n_classes)))


def _best_split_gini(X, y, n_classes, feature_indices):
    """Best (feature, threshold, weighted gini); ties go to the lowest
    feature index, then the lowest threshold."""
    n = y.shape[0]
    best = (np.inf, -1, 0.0)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    for f in feature_indices:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        cuts = np.nonzero(sv[:-1] < sv[1:])[0]
        if cuts.size == 0:
            continue
        cum = np.cumsum(onehot[order], axis=0)
        left_counts = cum[cuts]
        total = cum[-1]
        right_counts = total - left_counts
        n_left = (cuts + 1).astype(np.float64)
        n_right = n - n_left
        gini_left = 1.0 - np.sum((left_counts / n_left[:, None]) ** 2, axis=1)
        gini_right = 1.0 - np.sum((right_counts / n_right[:, None]) ** 2, axis=1)
        weighted = (n_left * gini_left + n_right * gini_right) / n
        pos = int(np.argmin(weighted))  # first minimum = lowest threshold
        if weighted[pos] < best[0]:
            best = (float(weighted[pos]), f, (sv[cuts[pos]] + sv[cuts[pos] + 1]) / 2.0)
    if best[1] < 0:
        return None
    return best


def _build_gini_tree(X, y, n_classes, depth, max_depth, min_samples_split,
                     max_features, rng):
    node_gini = 1.0 - np.sum((np.bincount(y, minlength=n_classes) / y.size) ** 2)
    if (node_gini == 0.0
            or y.size < min_samples_split
            or (max_depth is not None and depth >= max_depth)):
        return _Node(value=_majority(y, n_classes))
    d = X.shape[1]
    if max_features is not None and max_features < d:
        feats = np.sort(rng.choice(d, size=max_features, replace=False))
    else:
        feats = np.arange(d)
    found = _best_split_gini(X, y, n_classes, feats)
    if found is None or found[0] >= node_gini - 1e-12:
        return _Node(value=_majority(y, n_classes))
    _, f, thr = found
    mask = X[:, f] <= thr
    left = _build_gini_tree(X[mask], y[mask], n_classes, depth + 1, max_depth,
                            min_samples_split, max_features, rng)
    right = _build_gini_tree(X[~mask], y[~mask], n_classes, depth + 1, max_depth,
                             min_samples_split, max_features, rng)
    return _Node(feature=f, threshold=thr, left=left, right=right)


def _best_split_sse(X, r, feature_indices):
    """Split maximizing sum-of-squares reduction on a regression target."""
    n = r.shape[0]
    total_sum = r.sum()
    best = (-np.inf, -1, 0.0)
    for f in feature_indices:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        cuts = np.nonzero(sv[:-1] < sv[1:])[0]
        if cuts.size == 0:
            continue
        cum = np.cumsum(r[order])
        left_sum = cum[cuts]
        n_left = (cuts + 1).astype(np.float64)
        n_right = n - n_left
        score = left_sum ** 2 / n_left + (total_sum - left_sum) ** 2 / n_right
        pos = int(np.argmax(score))
        if score[pos] > best[0]:
            best = (float(score[pos]), f, (sv[cuts[pos]] + sv[cuts[pos] + 1]) / 2.0)
    if best[1] < 0:
        return None
    return best


def _build_sse_tree(X, r, depth, max_depth, min_samples_split):
    if r.size < min_samples_split or depth >= max_depth or np.ptp(r) == 0.0:
        return _Node(value=float(r.mean()))
    found = _best_split_sse(X, r, np.arange(X.shape[1]))
    base = r.sum() ** 2 / r.size
    if found is None or found[0] <= base + 1e-12:
        return _Node(value=float(r.mean()))
    _, f, thr = found
    mask = X[:, f] <= thr
    return _Node(feature=f, threshold=thr,
                 left=_build_sse_tree(X[mask], r[mask], depth + 1, max_depth,
                                      min_samples_split),
                 right=_build_sse_tree(X[~mask], r[~mask], depth + 1, max_depth,
                                       min_samples_split))


def _predict_node(node, X, out, idx):
    if node.is_leaf:
        out[idx] = node.value
        return
    mask = X[idx, node.feature] <= node.threshold
    _predict_node(node.left, X, out, idx[mask])
    _predict_node(node.right, X, out, idx[~mask])


def _tree_predict(root, X, dtype=np.int64):
    out = np.empty(X.shape[0], dtype=dtype)
    _predict_node(root, X, out, np.arange(X.shape[0]))
    return out


# --------------------------------------------------------------------------
# public estimators
# --------------------------------------------------------------------------

class DecisionTreeClassifier(BaseEstimator, ClassifierMixin):
    """Greedy CART with Gini impurity and midpoint thresholds.

    Parameters
    ----------
    max_depth : int or None
        Depth limit; None grows until pure or unsplittable.
    min_samples_split : int
        Minimum node size eligible for splitting.
    max_features : int, "sqrt" or None
        Features considered per split (random subset when fewer than d).
    random_state : int, Generator or None
        Only consumed when max_features restricts the candidate set.
    """

    def __init__(self, max_depth=None, min_samples_split=2, max_features=None,
                 random_state=None):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.random_state = random_state

    def _resolve_max_features(self, d):
        if self.max_features is None:
            return None
        if self.max_features == "sqrt":
            return max(1, int(np.sqrt(d)))
        return int(self.max_features)

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.n_classes_ = int(y.max()) + 1
        rng = ensure_rng(self.random_state)
        self.tree_ = _build_gini_tree(
            X, y, self.n_classes_, 0, self.max_depth, self.min_samples_split,
            self._resolve_max_features(X.shape[1]), rng)
        return self

    def predict(self, X):
        X = check_matrix(X)
        return _tree_predict(self.tree_, X)


class RandomForestClassifier(BaseEstimator, ClassifierMixin):
    """Bagged CART ensemble with per-split feature subsampling.

    Defaults follow the proxy configuration used throughout this package:
    5 estimators of depth 5, sqrt(d) features per split, majority vote with
    ties resolved toward the lower class id.
    """

    def __init__(self, n_estimators=5, max_depth=5, max_features="sqrt",
                 bootstrap=True, min_samples_split=2, random_state=None):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.min_samples_split = min_samples_split
        self.random_state = random_state

    def fit(self, X, y):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        X, y = check_X_y(X, y)
        self.n_classes_ = int(y.max()) + 1
        rng = ensure_rng(self.random_state)
        n = X.shape[0]
        self.trees_ = []
        for _ in range(self.n_estimators):
            if self.bootstrap:
                idx = rng.integers(0, n, size=n)
                Xb, yb = X[idx], y[idx]
            else:
                Xb, yb = X, y
            tree = DecisionTreeClassifier(
                max_depth=self.max_depth,
                min_samples_split=self.min_samples_split,
                max_features=self.max_features,
                random_state=rng)
            tree.fit(Xb, yb)
            self.trees_.append(tree)
        return self

    def predict(self, X):
        X = check_matrix(X)
        votes = np.zeros((X.shape[0], self.n_classes_), dtype=np.int64)
        for tree in self.trees_:
            pred = tree.predict(X)
            votes[np.arange(X.shape[0]), pred] += 1
        return np.argmax(votes, axis=1)  # first max = lowest class id


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def _logistic_loss(y, score):
    p = np.clip(_sigmoid(score), 1e-12, 1.0 - 1e-12)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


class GradientBoostingClassifier(BaseEstimator, ClassifierMixin):
    """First-order gradient boosting on logistic loss, binary labels only.

    Regression trees are fit to the residuals y - p; each leaf contributes
    its mean residual scaled by the learning rate. ``train_losses_`` records
    the training logistic loss after every round.
    """

    def __init__(self, n_rounds=100, learning_rate=0.3, max_depth=6,
                 min_samples_split=2, random_state=None):
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.random_state = random_state

    def fit(self, X, y):
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        X, y = check_X_y(X, y)
        if y.max() > 1:
            raise MulticlassUnsupportedError(
                "gradient boosting here supports binary labels {0, 1} only")
        pos = float(np.clip(y.mean(), 1e-12, 1.0 - 1e-12))
        self.prior_ = float(np.log(pos / (1.0 - pos)))
        score = np.full(y.shape[0], self.prior_)
        self.trees_ = []
        self.train_losses_ = [_logistic_loss(y, score)]
        for _ in range(self.n_rounds):
            residual = y - _sigmoid(score)
            tree = _build_sse_tree(X, residual, 0, self.max_depth,
                                   self.min_samples_split)
            self.trees_.append(tree)
            score = score + self.learning_rate * _tree_predict(tree, X, np.float64)
            self.train_losses_.append(_logistic_loss(y, score))
        return self

    def decision_function(self, X):
        X = check_matrix(X)
        score = np.full(X.shape[0], self.prior_)
        for tree in self.trees_:
            score = score + self.learning_rate * _tree_predict(tree, X, np.float64)
        return score

    def predict(self, X):
        return (_sigmoid(self.decision_function(X)) > 0.5).astype(np.int64)


class MLPClassifier(BaseEstimator, ClassifierMixin):
    """One-hidden-layer network trained with mini-batch SGD on cross-entropy.

    Inputs are z-scored internally (parameters stored at fit time); runs are
    deterministic for a fixed random_state.
    """

    def __init__(self, hidden_units=100, activation="relu", epochs=200,
                 batch_size=32, learning_rate=0.001, random_state=None):
        self.hidden_units = hidden_units
        self.activation = activation
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state

    def _act(self, z):
        if self.activation == "relu":
            return np.maximum(z, 0.0)
        if self.activation == "tanh":
            return np.tanh(z)
        raise ValueError(f"unknown activation {self.activation!r}")

    def _act_grad(self, z, a):
        if self.activation == "relu":
            return (z > 0.0).astype(np.float64)
        return 1.0 - a ** 2

    def _loss_and_grads(self, params, X, y):
        """Mean cross-entropy and its gradients for a standardized batch."""
        W1, b1, W2, b2 = params
        z1 = X @ W1 + b1
        a1 = self._act(z1)
        logits = a1 @ W2 + b2
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        n = X.shape[0]
        loss = -log_probs[np.arange(n), y].mean()
        probs = np.exp(log_probs)
        delta = probs
        delta[np.arange(n), y] -= 1.0
        delta /= n
        gW2 = a1.T @ delta
        gb2 = delta.sum(axis=0)
        back = (delta @ W2.T) * self._act_grad(z1, a1)
        gW1 = X.T @ back
        gb1 = back.sum(axis=0)
        return loss, (gW1, gb1, gW2, gb2)

    def fit(self, X, y):
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")
        X, y = check_X_y(X, y)
        self.n_classes_ = int(y.max()) + 1
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale_ = np.where(std > 0, std, 1.0)
        Xs = (X - self.mean_) / self.scale_

        rng = ensure_rng(self.random_state)
        d, h, c = X.shape[1], self.hidden_units, max(self.n_classes_, 2)
        W1 = rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, h))
        b1 = np.zeros(h)
        W2 = rng.normal(0.0, 1.0 / np.sqrt(h), size=(h, c))
        b2 = np.zeros(c)
        n = Xs.shape[0]
        for _ in range(self.epochs):
            perm = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                batch = perm[start:start + self.batch_size]
                _, grads = self._loss_and_grads((W1, b1, W2, b2), Xs[batch], y[batch])
                W1 = W1 - self.learning_rate * grads[0]
                b1 = b1 - self.learning_rate * grads[1]
                W2 = W2 - self.learning_rate * grads[2]
                b2 = b2 - self.learning_rate * grads[3]
        self.coefs_ = (W1, b1, W2, b2)
        return self

    def predict(self, X):
        X = check_matrix(X)
        Xs = (X - self.mean_) / self.scale_
        W1, b1, W2, b2 = self.coefs_
        logits = self._act(Xs @ W1 + b1) @ W2 + b2
        return np.argmax(logits, axis=1)


PROXY_KINDS = ("decision_tree", "random_forest", "gradient_boosting")
TESTER_KINDS = PROXY_KINDS + ("mlp",)


def make_model(kind: str, random_state=None, params: dict | None = None):
    """Instantiate a classifier by its short name with package defaults."""
    params = dict(params or {})
    params.setdefault("random_state", random_state)
    if kind == "decision_tree":
        return DecisionTreeClassifier(**params)
    if kind == "random_forest":
        return RandomForestClassifier(**params)
    if kind == "gradient_boosting":
        return GradientBoostingClassifier(**params)
    if kind == "mlp":
        return MLPClassifier(**params)
    raise ValueError(f"unknown model kind {kind!r}")

"""Dimension-matched comparison transforms: PCA, a 1-D SOM, a linear autoencoder.

Each transformer emits exactly ``n_components`` columns so comparisons against
an evolved feature set stay feature-count fair.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import DivergenceDetectedError, KTooLargeError
from .validation import check_matrix, ensure_rng


class LinearPCA(BaseEstimator, TransformerMixin):
    """Column-centered projection onto the top principal components.

    Components are ordered by descending singular value; the sign of each is
    fixed so its largest-magnitude loading is positive.
    """

    def __init__(self, n_components):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_matrix(X)
        k = self.n_components
        if k < 1:
            raise ValueError("n_components must be >= 1")
        if k > X.shape[1]:
            raise KTooLargeError(
                f"cannot extract {k} components from {X.shape[1]} columns")
        self.mean_ = X.mean(axis=0)
        _, s, vt = np.linalg.svd(X - self.mean_, full_matrices=False)
        components = vt[:k]
        for row in components:
            if row[np.argmax(np.abs(row))] < 0:
                row *= -1.0
        self.components_ = components
        self.explained_variance_ = s[:k] ** 2 / max(X.shape[0] - 1, 1)
        return self

    def transform(self, X):
        X = check_matrix(X)
        return (X - self.mean_) @ self.components_.T


class SelfOrganizingMap(BaseEstimator, TransformerMixin):
    """Online-trained k x 1 self-organizing map.

    Uses a Gaussian neighborhood with linearly decaying radius and learning
    rate. ``transform`` emits each sample's Euclidean distance to every unit's
    codebook vector.
    """

    def __init__(self, n_units, epochs=100, initial_rate=0.5,
                 initial_radius=None, random_state=None):
        self.n_units = n_units
        self.epochs = epochs
        self.initial_rate = initial_rate
        self.initial_radius = initial_radius
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_matrix(X)
        k = self.n_units
        if k < 1:
            raise ValueError("n_units must be >= 1")
        rng = ensure_rng(self.random_state)
        n = X.shape[0]
        init_rows = rng.choice(n, size=k, replace=n < k)
        codebook = X[init_rows].astype(np.float64).copy()
        positions = np.arange(k, dtype=np.float64)

        radius0 = self.initial_radius if self.initial_radius is not None else k / 2.0
        total_steps = self.epochs * n
        step = 0
        self.epoch_codebooks_ = []
        for _ in range(self.epochs):
            for i in rng.permutation(n):
                frac = 1.0 - step / total_steps
                rate = self.initial_rate * frac
                radius = max(radius0 * frac, 1e-3)
                x = X[i]
                bmu = int(np.argmin(np.sum((codebook - x) ** 2, axis=1)))
                influence = np.exp(-((positions - bmu) ** 2) / (2.0 * radius ** 2))
                codebook += rate * influence[:, None] * (x - codebook)
                step += 1
            self.epoch_codebooks_.append(codebook.copy())
        self.codebook_ = codebook
        return self

    def transform(self, X):
        X = check_matrix(X)
        diffs = X[:, None, :] - self.codebook_[None, :, :]
        return np.sqrt(np.sum(diffs ** 2, axis=2))


class LinearAutoencoder(BaseEstimator, TransformerMixin):
    """d -> hidden -> code -> hidden -> d network with linear activations.

    Trained with plain SGD on mean squared reconstruction error over z-scored
    inputs; ``transform`` returns the code-layer output.
    """

    def __init__(self, code_size, hidden_units=50, epochs=50, batch_size=32,
                 learning_rate=0.01, random_state=None):
        self.code_size = code_size
        self.hidden_units = hidden_units
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state

    @staticmethod
    def _forward(params, X):
        W1, b1, W2, b2, W3, b3, W4, b4 = params
        h1 = X @ W1 + b1
        code = h1 @ W2 + b2
        h2 = code @ W3 + b3
        recon = h2 @ W4 + b4
        return h1, code, h2, recon

    def _loss_and_grads(self, params, X):
        """MSE over all entries of the reconstruction, and its gradients."""
        W1, b1, W2, b2, W3, b3, W4, b4 = params
        h1, code, h2, recon = self._forward(params, X)
        diff = recon - X
        n_entries = diff.size
        loss = float(np.sum(diff ** 2) / n_entries)
        g = 2.0 * diff / n_entries
        gW4 = h2.T @ g
        gb4 = g.sum(axis=0)
        g = g @ W4.T
        gW3 = code.T @ g
        gb3 = g.sum(axis=0)
        g = g @ W3.T
        gW2 = h1.T @ g
        gb2 = g.sum(axis=0)
        g = g @ W2.T
        gW1 = X.T @ g
        gb1 = g.sum(axis=0)
        return loss, (gW1, gb1, gW2, gb2, gW3, gb3, gW4, gb4)

    def fit(self, X, y=None):
        X = check_matrix(X)
        if self.code_size < 1:
            raise ValueError("code_size must be >= 1")
        rng = ensure_rng(self.random_state)
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale_ = np.where(std > 0, std, 1.0)
        Xs = (X - self.mean_) / self.scale_

        d, h, k = X.shape[1], self.hidden_units, self.code_size
        dims = [(d, h), (h, k), (k, h), (h, d)]
        params = []
        for fan_in, fan_out in dims:
            params.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out)))
            params.append(np.zeros(fan_out))
        n = Xs.shape[0]
        self.epoch_losses_ = []
        for _ in range(self.epochs):
            perm = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                batch = Xs[perm[start:start + self.batch_size]]
                _, grads = self._loss_and_grads(params, batch)
                params = [p - self.learning_rate * gr for p, gr in zip(params, grads)]
            loss, _ = self._loss_and_grads(params, Xs)
            if not np.isfinite(loss):
                raise DivergenceDetectedError(
                    f"training loss became non-finite after "
                    f"{len(self.epoch_losses_) + 1} epochs; lower the learning rate")
            self.epoch_losses_.append(loss)
        self.params_ = tuple(params)
        return self

    def transform(self, X):
        X = check_matrix(X)
        Xs = (X - self.mean_) / self.scale_
        _, code, _, _ = self._forward(self.params_, Xs)
        return code

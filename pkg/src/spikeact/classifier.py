"""One-vs-rest linear SVM trained by stochastic subgradient descent.

Features are standardized with the training-set mean and std (floored at
1e-8) before the hinge loss is minimized, and the stats are kept in the
model. Each binary problem minimizes

    lambda / 2 * |w|^2 + mean(max(0, 1 - y * (w . x + b)))

with ``lambda = 1 / (C * n)`` and step ``1 / (lambda * t)``. The bias is
trained as the weight of a constant unit feature, so it also shrinks each
step. Samples are put in a canonical order before the seeded shuffle, so
the model does not depend on how the training set was listed. Predictions
take the argmax of the per-class scores; ties go to the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .tensor import read_tensor, write_tensor

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class SvmModel:
    weights: np.ndarray  # n_classes x feature_dim
    biases: np.ndarray  # n_classes
    classes: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if self.weights.shape != (len(self.classes), self.mean.size) or self.biases.shape != (len(self.classes),):
            raise ValueError("inconsistent SVM model shapes")

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    def scores(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.feature_dim:
            raise ValueError(f"feature dim {X.shape[1]} != model dim {self.feature_dim}")
        return ((X - self.mean) / self.std) @ self.weights.T + self.biases


def _as_matrix(X: Sequence) -> np.ndarray:
    rows = [np.asarray(x, dtype=np.float64).ravel() for x in X]
    if len({r.size for r in rows}) > 1:
        raise ValueError("feature vectors differ in length")
    return np.stack(rows)


def hinge_objective(model: SvmModel, X, y, C: float = 1.0) -> np.ndarray:
    """Per-class primal objective of the standardized problem."""
    X = _as_matrix(X)
    lam = 1.0 / (C * len(X))
    s = model.scores(X)
    signs = np.where(np.asarray(y)[:, None] == np.array(model.classes)[None, :], 1.0, -1.0)
    hinge = np.maximum(0.0, 1.0 - signs * s).mean(axis=0)
    return 0.5 * lam * (model.weights**2).sum(axis=1) + hinge


def svm_train(X: Sequence, y: Sequence, C: float = 1.0, epochs: int = 50, seed: int = 0) -> SvmModel:
    X = _as_matrix(X)
    y = [str(v) for v in y]
    if len(X) != len(y) or len(X) < 1:
        raise ValueError("X and y must be non-empty and of equal length")
    classes = tuple(sorted(set(y)))
    if len(classes) < 2:
        raise ValueError("svm_train needs at least two classes")
    if C <= 0 or epochs < 1:
        raise ValueError("C must be positive and epochs >= 1")

    # a canonical sample order makes the result independent of the input order
    order = sorted(range(len(X)), key=lambda i: (y[i], X[i].tobytes()))
    X = X[order]
    y = [y[i] for i in order]

    mean = X.mean(axis=0)
    std = np.maximum(X.std(axis=0), STD_FLOOR)
    Z = (X - mean) / std
    n, d = Z.shape
    label_idx = np.array([classes.index(v) for v in y])
    Y = -np.ones((n, len(classes)))
    Y[np.arange(n), label_idx] = 1.0

    lam = 1.0 / (C * n)
    W = np.zeros((len(classes), d))
    b = np.zeros(len(classes))
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            z, yi = Z[i], Y[i]
            active = yi * (W @ z + b) < 1.0
            # the bias acts as a weight on a constant feature and shrinks with the rest
            W *= 1.0 - eta * lam
            b *= 1.0 - eta * lam
            if active.any():
                W[active] += eta * yi[active, None] * z[None, :]
                b[active] += eta * yi[active]
    return SvmModel(W, b, classes, mean, std)


def svm_predict(m: SvmModel, x) -> str:
    s = m.scores(x)[0]
    return m.classes[int(np.argmax(s))]


def svm_predict_many(m: SvmModel, X: Sequence) -> list[str]:
    s = m.scores(_as_matrix(X))
    return [m.classes[i] for i in np.argmax(s, axis=1)]


# --------------------------------------------------------------------------
# persistence


def save_svm(m: SvmModel, path) -> None:
    """``path`` holds the weights; biases, mean, std and classes sit beside it."""
    path = Path(path)
    stem = path.with_suffix("")
    write_tensor(m.weights, path)
    write_tensor(m.biases, stem.with_name(stem.name + ".biases.staf"))
    write_tensor(m.mean, stem.with_name(stem.name + ".mean.staf"))
    write_tensor(m.std, stem.with_name(stem.name + ".std.staf"))
    meta = [f"feature_dim = {m.feature_dim}", "classes = " + ",".join(m.classes)]
    path.with_name(path.name + ".meta").write_text("\n".join(meta) + "\n")


def load_svm(path) -> SvmModel:
    path = Path(path)
    stem = path.with_suffix("")
    meta = {}
    for line in path.with_name(path.name + ".meta").read_text().splitlines():
        k, _, v = line.partition("=")
        meta[k.strip()] = v.strip()
    return SvmModel(
        read_tensor(path).astype(np.float64),
        read_tensor(stem.with_name(stem.name + ".biases.staf")).astype(np.float64),
        tuple(meta["classes"].split(",")),
        read_tensor(stem.with_name(stem.name + ".mean.staf")).astype(np.float64),
        read_tensor(stem.with_name(stem.name + ".std.staf")).astype(np.float64),
    )

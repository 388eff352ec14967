import cvxpy as cp
import numpy as np
import pytest

from spikeact.classifier import (
    SvmModel,
    hinge_objective,
    load_svm,
    save_svm,
    svm_predict,
    svm_predict_many,
    svm_train,
)


def blobs(rng, centers, sd=0.5, n=50):
    X = np.vstack([rng.normal(c, sd, (n, len(c))) for c in centers])
    y = [chr(ord("a") + i) for i in range(len(centers)) for _ in range(n)]
    return X, y


def acc(m, X, y):
    return np.mean(np.array(svm_predict_many(m, X)) == np.array(y))


def test_separable_blobs():
    X, y = blobs(np.random.default_rng(0), [(-3, -3), (3, 3)])
    m = svm_train(X, y)
    assert acc(m, X, y) == 1.0
    assert np.all(hinge_objective(m, X, y) < 0.01)


def test_objective_close_to_convex_optimum():
    X, y = blobs(np.random.default_rng(0), [(-3, -3), (3, 3)])
    m = svm_train(X, y)
    Z = (X - m.mean) / m.std
    s = np.where(np.array(y) == "a", 1.0, -1.0)
    lam = 1.0 / len(X)
    w, b = cp.Variable(2), cp.Variable()
    prob = cp.Problem(cp.Minimize(lam / 2 * cp.sum_squares(w) + cp.sum(cp.pos(1 - cp.multiply(s, Z @ w + b))) / len(X)))
    prob.solve()
    assert hinge_objective(m, X, y)[0] <= prob.value * 1.25 + 1e-4


def test_contradictory_labels_do_not_crash():
    X = np.ones((10, 3))
    y = ["a", "b"] * 5
    m = svm_train(X, y)
    assert acc(m, X, y) <= 0.5


def test_one_hot_recovery():
    X = np.eye(3).repeat(5, axis=0)
    y = [0] * 5 + [1] * 5 + [2] * 5
    m = svm_train(X, y)
    assert svm_predict_many(m, X) == [str(v) for v in y]


def test_three_blobs():
    X, y = blobs(np.random.default_rng(1), [(-3, -3), (3, 3), (3, -3)])
    assert acc(svm_train(X, y), X, y) == 1.0


def test_errors():
    with pytest.raises(ValueError):
        svm_train([[1.0], [2.0]], ["a", "a"])
    with pytest.raises(ValueError):
        svm_train([[1.0], [2.0, 3.0]], ["a", "b"])
    with pytest.raises(ValueError):
        svm_train([[1.0]], ["a", "b"])
    m = svm_train([[0.0], [1.0]], ["a", "b"])
    with pytest.raises(ValueError):
        svm_predict(m, [1.0, 2.0])


def _model(W, b):
    W = np.asarray(W, dtype=np.float64)
    return SvmModel(W, np.asarray(b, dtype=np.float64), tuple("abc"[: len(W)]), np.zeros(W.shape[1]), np.ones(W.shape[1]))


def test_prediction_examples():
    assert svm_predict(_model(np.zeros((3, 2)), np.zeros(3)), [1.0, 2.0]) == "a"
    assert svm_predict(_model(np.zeros((3, 1)), [0.2, 0.9, 0.1]), [0.0]) == "b"


def test_positive_scaling_keeps_argmax():
    rng = np.random.default_rng(2)
    m = _model(rng.normal(size=(3, 5)), np.zeros(3))
    for _ in range(20):
        x = rng.normal(size=5)
        assert svm_predict(m, x) == svm_predict(m, x * float(rng.uniform(0.01, 100)))


def test_seed_determinism_and_order_invariance():
    rng = np.random.default_rng(3)
    X, y = blobs(rng, [(-1, 0, 1), (1, 1, 0), (0, -1, -1)], sd=1.0, n=30)
    a = svm_train(X, y, seed=5)
    perm = rng.permutation(len(X))
    b = svm_train(X[perm], [y[i] for i in perm], seed=5)
    assert np.array_equal(a.weights, b.weights) and np.array_equal(a.biases, b.biases)
    assert svm_predict_many(a, X) == svm_predict_many(b, X)


def test_constant_feature_is_harmless():
    X, y = blobs(np.random.default_rng(4), [(-3, 5), (3, 5)])
    X[:, 1] = 5.0
    m = svm_train(X, y)
    assert np.isfinite(m.weights).all() and acc(m, X, y) == 1.0


def test_persistence(tmp_path):
    X, y = blobs(np.random.default_rng(5), [(-3, -3), (3, 3), (3, -3)])
    m = svm_train(X, y)
    save_svm(m, tmp_path / "svm.staf")
    back = load_svm(tmp_path / "svm.staf")
    assert back.classes == m.classes
    assert np.allclose(back.weights, m.weights, rtol=1e-6)
    assert svm_predict_many(back, X) == svm_predict_many(m, X)

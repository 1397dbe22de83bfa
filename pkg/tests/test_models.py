# tests/test_models.py

import numpy as np
import pytest

from ocs_arc.selection_runtime.models import (
    BoostedTreesParams,
    Dataset,
    fit_boosted_trees,
    fit_logistic,
    fit_multi_output,
    fit_ridge,
    load_model,
    logistic_loss_and_grad,
    save_model,
)
from ocs_arc.selection_runtime.scores import Predictor
from ocs_arc.selection_runtime.utils import EmptyDatasetError, InvalidInputError, NonConvergenceError


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _step_data(n: int = 200, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, 3))
    y = np.where(X[:, 1] > 0.2, 3.0, -1.0)
    return Dataset(X, y)


def _class_data(n: int = 300, seed: int = 1) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    y = (X[:, 0] + 0.3 * rng.normal(size=n) > 0).astype(float)
    return Dataset(X, y)


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------

def test_dataset_rejects_mismatched_rows_and_nan():
    with pytest.raises(InvalidInputError):
        Dataset(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(InvalidInputError):
        Dataset(np.zeros((2, 2)), np.array([0.0, np.nan]))


def test_fit_on_empty_dataset_fails():
    with pytest.raises(EmptyDatasetError):
        fit_boosted_trees(Dataset(np.zeros((0, 2)), np.zeros(0)))


# ---------------------------------------------------------------------------
# Boosted trees
# ---------------------------------------------------------------------------

def test_constant_targets_predict_the_constant():
    data = Dataset(np.random.default_rng(2).normal(size=(40, 3)), np.full(40, 7.5))
    model = fit_boosted_trees(data, BoostedTreesParams(n_trees=10))
    assert np.allclose(model.predict_batch(data.features), 7.5)


def test_split_separable_data_is_learned():
    data = _step_data()
    model = fit_boosted_trees(data, BoostedTreesParams(n_trees=100, max_depth=2, learning_rate=0.3))
    mse = float(np.mean((model.predict_batch(data.features) - data.targets) ** 2))
    assert mse < 0.01


def test_zero_learning_rate_predicts_the_mean():
    data = _step_data(50)
    model = fit_boosted_trees(data, BoostedTreesParams(n_trees=5, learning_rate=0.0))
    assert np.allclose(model.predict_batch(data.features), data.targets.mean())


def test_training_loss_never_increases():
    rng = np.random.default_rng(4)
    X = rng.uniform(-1, 1, size=(150, 4))
    data = Dataset(X, np.sin(3 * X[:, 0]) + 0.2 * rng.normal(size=150))
    model = fit_boosted_trees(data, BoostedTreesParams(n_trees=40))
    path = model.loss_path
    assert len(path) == 41
    assert all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(path, path[1:]))


def test_row_order_does_not_change_predictions():
    data = _step_data(120, seed=6)
    perm = np.random.default_rng(7).permutation(data.n_rows)
    params = BoostedTreesParams(n_trees=20)
    a = fit_boosted_trees(data, params)
    b = fit_boosted_trees(data.take(perm), params)
    assert np.allclose(a.predict_batch(data.features), b.predict_batch(data.features))


def test_logistic_boosting_returns_probabilities():
    data = _class_data()
    model = fit_boosted_trees(data, BoostedTreesParams(n_trees=30, loss="logistic"))
    p = model.predict_batch(data.features)
    assert np.all((p >= 0) & (p <= 1))
    assert float(np.mean((p > 0.5) == (data.targets == 1))) > 0.8


def test_logistic_boosting_needs_binary_targets():
    with pytest.raises(InvalidInputError):
        fit_boosted_trees(_step_data(30), BoostedTreesParams(loss="logistic"))


@pytest.mark.parametrize("field, value", [("n_trees", -1), ("learning_rate", 1.5), ("loss", "huber")])
def test_invalid_params_are_rejected(field, value):
    with pytest.raises(InvalidInputError):
        BoostedTreesParams(**{field: value})


def test_predict_checks_feature_count():
    model = fit_boosted_trees(_step_data(30), BoostedTreesParams(n_trees=2))
    with pytest.raises(InvalidInputError):
        model.predict_batch(np.zeros((2, 5)))


# ---------------------------------------------------------------------------
# Logistic regression
# ---------------------------------------------------------------------------

def test_symmetric_classes_give_zero_intercept_and_half_probability():
    X = np.array([[-1.0], [1.0], [-2.0], [2.0]])
    y = np.array([0.0, 1.0, 0.0, 1.0])
    model = fit_logistic(Dataset(X, y), l2=0.1)
    assert model.intercept == pytest.approx(0.0, abs=1e-6)
    assert model.weights[0] > 0
    assert model.predict([0.0]) == pytest.approx(0.5, abs=1e-6)


def test_heavy_regularisation_returns_the_base_rate():
    data = _class_data(200)
    model = fit_logistic(data, l2=1e6)
    base = (data.targets.sum() + 0.5) / (data.n_rows + 1.0)
    assert np.allclose(model.predict_batch(data.features), base, atol=1e-3)


def test_gradient_matches_finite_differences():
    data = _class_data(60)
    rng = np.random.default_rng(3)
    theta = rng.normal(size=3)
    _, grad = logistic_loss_and_grad(theta, data.features, data.targets, l2=0.5, b0=0.2)
    eps = 1e-6
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += eps
        down[i] -= eps
        numeric = (
            logistic_loss_and_grad(up, data.features, data.targets, 0.5, 0.2)[0]
            - logistic_loss_and_grad(down, data.features, data.targets, 0.5, 0.2)[0]
        ) / (2 * eps)
        assert grad[i] == pytest.approx(numeric, rel=1e-5, abs=1e-7)


def test_single_class_without_regularisation_does_not_converge():
    data = Dataset(np.random.default_rng(0).normal(size=(10, 2)), np.ones(10))
    with pytest.raises(NonConvergenceError):
        fit_logistic(data, l2=0.0)


def test_single_class_with_regularisation_fits():
    data = Dataset(np.random.default_rng(0).normal(size=(10, 2)), np.ones(10))
    model = fit_logistic(data, l2=1.0)
    assert np.all(model.predict_batch(data.features) > 0.5)


# ---------------------------------------------------------------------------
# Ridge, multi-output and persistence
# ---------------------------------------------------------------------------

def test_ridge_recovers_a_linear_function():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(100, 3))
    y = X @ np.array([1.0, -2.0, 0.5]) + 4.0
    model = fit_ridge(Dataset(X, y), l2=0.0)
    assert np.allclose(model.weights, [1.0, -2.0, 0.5])
    assert model.intercept == pytest.approx(4.0)


def test_multi_output_fits_each_column():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(80, 2))
    Y = np.column_stack([X[:, 0] * 2.0, X[:, 1] - 1.0])
    model = fit_multi_output(Dataset(X, Y), lambda d: fit_ridge(d, l2=0.0))
    assert model.n_outputs == 2
    assert np.allclose(model.predict_batch(X), Y)


@pytest.mark.parametrize("kind", ["trees", "logistic", "multi"])
def test_save_and_load_preserve_predictions(tmp_path, kind):
    data = _class_data(80)
    if kind == "trees":
        model = fit_boosted_trees(data, BoostedTreesParams(n_trees=5))
    elif kind == "logistic":
        model = fit_logistic(data)
    else:
        Y = np.column_stack([data.targets, -data.targets])
        model = fit_multi_output(Dataset(data.features, Y), fit_ridge)
    path = save_model(model, tmp_path / "model.json")
    loaded = load_model(path)
    assert np.allclose(loaded.predict_batch(data.features), model.predict_batch(data.features))


def test_load_rejects_foreign_documents(tmp_path):
    path = tmp_path / "other.json"
    path.write_text('{"format": "something-else", "version": 1}', encoding="utf-8")
    with pytest.raises(InvalidInputError):
        load_model(path)


def test_unknown_predictor_cannot_be_saved(tmp_path):
    class Odd(Predictor):
        n_features = 1

        def predict_batch(self, X):
            return np.zeros(len(X))

    with pytest.raises(InvalidInputError):
        save_model(Odd(), tmp_path / "odd.json")

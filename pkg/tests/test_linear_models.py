import numpy as np
import pytest

from pdbench.errors import ClassAbsent, DimensionMismatch, InvalidParameter
from pdbench.linear_models import (
    SOLVERS, LogRegModel, SolverConfig, gradient, hessian, objective, predict_logreg, select_C, train_logreg,
)
from pdbench.metrics import evaluate
from pdbench.preprocess import fit_chain, stratified_kfold, stratified_split


def test_zero_model_predicts_one_half():
    m = LogRegModel(weights=np.zeros(3), intercept=0.0, C=1.0, solver="newton", iterations=0, objective=0.0)
    p, labels = predict_logreg(m, np.random.default_rng(0).normal(size=(5, 3)))
    np.testing.assert_array_equal(p, 0.5)
    np.testing.assert_array_equal(labels, 1)


@pytest.mark.parametrize("solver", ["newton", "lbfgs"])
def test_symmetric_pair_boundary_at_zero(solver):
    X = np.array([[-1.0], [1.0]])
    m = train_logreg(X, [0, 1], C=1e6, cfg=SolverConfig(solver=solver))
    assert abs(m.intercept) < 1e-6
    assert m.weights[0] > 0
    p, labels = predict_logreg(m, np.array([[0.0], [-0.5], [0.5]]))
    assert p[0] == pytest.approx(0.5, abs=1e-6)
    assert list(labels[1:]) == [0, 1]


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(1)
    h = 1e-6
    for _ in range(50):
        n, d = rng.integers(3, 12), rng.integers(1, 5)
        X = rng.normal(size=(n, d))
        z = rng.choice([-1.0, 1.0], size=n)
        C = float(10 ** rng.uniform(-2, 2))
        theta = rng.normal(size=d + 1)
        analytic = gradient(theta, X, z, C)
        numeric = np.empty_like(theta)
        for j in range(d + 1):
            step = np.zeros_like(theta)
            step[j] = h
            numeric[j] = (objective(theta + step, X, z, C) - objective(theta - step, X, z, C)) / (2 * h)
        relative = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1.0)
        assert relative.max() <= 1e-5


def test_hessian_matches_gradient_differences():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(10, 3))
    z = rng.choice([-1.0, 1.0], size=10)
    theta = rng.normal(size=4)
    H = hessian(theta, X, z, 2.0)
    h = 1e-6
    for j in range(4):
        step = np.zeros(4)
        step[j] = h
        column = (gradient(theta + step, X, z, 2.0) - gradient(theta - step, X, z, 2.0)) / (2 * h)
        np.testing.assert_allclose(H[:, j], column, atol=1e-6)


def test_solvers_agree(blobs):
    X, y = blobs
    models = {s: train_logreg(X, y, C=1.0, cfg=SolverConfig(solver=s, seed=3)) for s in SOLVERS}
    objectives = [m.objective for m in models.values()]
    assert max(objectives) - min(objectives) <= 1e-4
    labels = [predict_logreg(m, X)[1] for m in models.values()]
    for other in labels[1:]:
        assert np.sum(other != labels[0]) <= 1
    assert all(m.converged for m in models.values())


def test_newton_objective_never_increases(blobs):
    X, y = blobs
    objectives = [train_logreg(X, y, C=10.0, cfg=SolverConfig(max_iter=k)).objective for k in range(1, 7)]
    assert all(b <= a + 1e-12 for a, b in zip(objectives, objectives[1:]))


@pytest.mark.parametrize("solver", ["sag", "saga"])
def test_stochastic_solvers_improve_on_init(blobs, solver):
    X, y = blobs
    m = train_logreg(X, y, C=1.0, cfg=SolverConfig(solver=solver, max_iter=3, seed=0))
    assert m.objective <= len(y) * np.log(2.0)


def test_weight_norm_grows_with_C(blobs):
    X, y = blobs
    norms = [np.linalg.norm(train_logreg(X, y, C=C).weights) for C in (0.1, 1.0, 10.0)]
    assert norms[0] <= norms[1] <= norms[2]


def test_deterministic_stochastic_solver(blobs):
    X, y = blobs
    a = train_logreg(X, y, 1.0, SolverConfig(solver="saga", seed=5, max_iter=20))
    b = train_logreg(X, y, 1.0, SolverConfig(solver="saga", seed=5, max_iter=20))
    np.testing.assert_array_equal(a.weights, b.weights)


def test_solver_alias():
    assert SolverConfig(solver="newton-cg").solver == "newton"
    assert SolverConfig(solver="lbfgs").max_iter == 500


@pytest.mark.parametrize("kwargs", [{"solver": "cg"}, {"tol": 0.0}, {"max_iter": 0}])
def test_invalid_solver_config(kwargs):
    with pytest.raises(InvalidParameter):
        SolverConfig(**kwargs)


def test_invalid_C(blobs):
    X, y = blobs
    with pytest.raises(InvalidParameter):
        train_logreg(X, y, C=0.0)


def test_single_class_rejected():
    with pytest.raises(ClassAbsent):
        train_logreg(np.zeros((4, 2)), [1, 1, 1, 1], C=1.0)


def test_dimension_mismatch(blobs):
    X, y = blobs
    m = train_logreg(X, y, C=1.0)
    with pytest.raises(DimensionMismatch):
        predict_logreg(m, np.zeros((2, 3)))


def test_dict_round_trip(blobs):
    X, y = blobs
    m = train_logreg(X, y, C=1.0)
    again = LogRegModel.from_dict(m.to_dict())
    np.testing.assert_array_equal(predict_logreg(again, X)[0], predict_logreg(m, X)[0])


class TestSelectC:
    def test_single_value_grid(self, blobs):
        X, y = blobs
        best, rows = select_C(X, y, [3.0], folds=stratified_kfold(y, 5, 0))
        assert best == 3.0
        assert len(rows) == 1
        assert len(rows[0]["fold_accuracies"]) == 5

    def test_ties_prefer_larger_C(self):
        X = np.concatenate([np.linspace(-3, -1, 10), np.linspace(1, 3, 10)]).reshape(-1, 1)
        y = np.array([0] * 10 + [1] * 10)
        best, rows = select_C(X, y, [0.1, 1.0, 10.0], folds=stratified_kfold(y, 5, 0))
        assert all(row["mean_accuracy"] == 1.0 for row in rows)
        assert best == 10.0

    def test_empty_grid(self, blobs):
        X, y = blobs
        with pytest.raises(InvalidParameter):
            select_C(X, y, [])


def _voice_split(dataset, use_pca=False):
    plan = stratified_split(dataset, 0.2, 42)
    matrix = dataset.to_matrix()
    train, test = matrix.take(plan.train), matrix.take(plan.test)
    chain = fit_chain(train, use_pca=use_pca)
    return chain.apply(train).values, train.labels, chain.apply(test).values, test.labels


def _assert_solvers_agree(X, y, X_test, C):
    models = [train_logreg(X, y, C=C, cfg=SolverConfig(solver=s, seed=42)) for s in SOLVERS]
    assert all(m.converged for m in models)
    objectives = [m.objective for m in models]
    assert max(objectives) - min(objectives) <= 1e-4
    reference_labels = predict_logreg(models[0], X_test)[1]
    for m in models[1:]:
        assert np.sum(predict_logreg(m, X_test)[1] != reference_labels) <= 1


def test_solvers_agree_on_collinear_voice_features(voice_dataset):
    X, y, X_test, _ = _voice_split(voice_dataset)
    _assert_solvers_agree(X, y, X_test, C=100.0)


@pytest.mark.slow
def test_reference_newton_accuracy(reference_dataset):
    X, y, X_test, y_test = _voice_split(reference_dataset)
    m = train_logreg(X, y, C=100.0)
    report = evaluate(y_test, predict_logreg(m, X_test)[1])
    assert abs(report.accuracy - 0.9231) <= 1 / 39 + 1e-9
    assert abs(report.precision - 0.9143) <= 0.03


@pytest.mark.slow
def test_reference_solvers_reach_same_objective(reference_dataset):
    X, y, X_test, _ = _voice_split(reference_dataset)
    _assert_solvers_agree(X, y, X_test, C=100.0)


@pytest.mark.slow
def test_reference_select_C(reference_dataset):
    X, y, _, _ = _voice_split(reference_dataset)
    best, rows = select_C(X, y, folds=stratified_kfold(y, 5, 42))
    assert best == 100.0
    assert [row["C"] for row in rows] == [0.01, 0.1, 1.0, 10.0, 100.0]


@pytest.mark.slow
def test_reference_select_C_after_pca(reference_dataset):
    X, y, _, _ = _voice_split(reference_dataset, use_pca=True)
    best, _ = select_C(X, y, folds=stratified_kfold(y, 5, 42))
    assert best == 10.0

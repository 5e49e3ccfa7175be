import time
from fractions import Fraction

import numpy as np
import pytest

from pdbench.errors import EmptyInput, LengthMismatch
from pdbench.metrics import EvalReport, cross_val_accuracy, evaluate, render_ratio, time_training
from pdbench.preprocess import stratified_kfold


def test_perfect_predictions():
    y = [1, 0, 1, 1, 0]
    report = evaluate(y, y)
    assert report.accuracy == 1.0
    assert report.precision == 1.0
    assert (report.tp, report.fp, report.tn, report.fn) == (3, 0, 2, 0)


def test_two_errors_out_of_39():
    y_true = np.array([1] * 29 + [0] * 10)
    y_pred = y_true.copy()
    y_pred[0] = 0
    y_pred[-1] = 1
    report = evaluate(y_true, y_pred)
    assert report.accuracy_exact == Fraction(37, 39)
    assert render_ratio(report.accuracy_exact) == "0.9487"
    assert report.total == 39


def test_all_negative_predictions_leave_precision_undefined(caplog):
    y_true = [1, 0, 0, 1]
    report = evaluate(y_true, [0, 0, 0, 0], label="constant")
    assert report.precision is None
    assert not report.precision_defined
    assert report.accuracy == 0.5
    assert report.row()[2] == "NA"
    assert "precision undefined" in caplog.text


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        evaluate([1, 0], [1])


def test_empty_input():
    with pytest.raises(EmptyInput):
        evaluate([], [])


def test_permutation_invariance():
    rng = np.random.default_rng(0)
    y_true = rng.integers(0, 2, 50)
    y_pred = rng.integers(0, 2, 50)
    order = rng.permutation(50)
    assert evaluate(y_true, y_pred) == evaluate(y_true[order], y_pred[order])


@pytest.mark.parametrize("value, expected", [
    (Fraction(1, 8), "0.1250"),
    (Fraction(1, 3), "0.3333"),
    (Fraction(2, 3), "0.6667"),
    (Fraction(12345, 100000), "0.1234"),  # half-even
    (Fraction(12355, 100000), "0.1236"),
    (None, "NA"),
])
def test_render_ratio(value, expected):
    assert render_ratio(value) == expected


def test_row_with_and_without_timing():
    report = evaluate([1, 0, 1], [1, 0, 0], label="cell").with_timing(0.123456)
    assert report.row() == ["cell", "0.6667", "1.0000", "0.1235"]
    assert report.row(timing=False)[3] == "NA"


def test_failure_row():
    report = EvalReport.failure("broken", RuntimeError("boom"))
    assert report.failed
    assert report.row() == ["broken", "failed", "failed", "NA"]


def test_time_training_returns_result():
    result, seconds = time_training(lambda: 42)
    assert result == 42
    assert 0 <= seconds < 0.01


def test_time_training_measures_the_job():
    _, seconds = time_training(lambda: time.sleep(0.02))
    assert seconds >= 0.02


def test_time_training_propagates_errors():
    def job():
        raise ValueError("bad fit")

    with pytest.raises(ValueError):
        time_training(job)


def test_cross_val_accuracy_records_failed_folds():
    y = np.array([0, 1] * 10)
    X = np.arange(20, dtype=float).reshape(-1, 1)
    folds = stratified_kfold(y, 5, 0)
    calls = []

    def fit_predict(X_train, y_train, X_test):
        calls.append(len(X_test))
        if len(calls) == 2:
            raise RuntimeError("fold broke")
        return np.ones(len(X_test), dtype=int)

    mean, scores, failures = cross_val_accuracy(fit_predict, X, y, folds)
    assert failures == [1]
    assert len(scores) == 4
    assert mean == pytest.approx(0.5)

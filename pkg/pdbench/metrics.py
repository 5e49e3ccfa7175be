"""
Classification metrics, confusion counts and wall-clock training time.
Positive class is status = 1 (PD).
"""

import logging
import time
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction

import numpy as np

from .errors import EmptyInput, LengthMismatch

logger = logging.getLogger(__name__)


def render_ratio(value, decimals=4):
    """Exact rational -> fixed decimals, round-half-even. None renders as NA."""
    if value is None:
        return "NA"
    value = Fraction(value)
    quantum = Decimal(1).scaleb(-decimals)
    exact = Decimal(value.numerator) / Decimal(value.denominator)
    return str(exact.quantize(quantum, rounding=ROUND_HALF_EVEN))


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int
    label: str = ""
    train_time_seconds: float = None
    error: str = None

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy_exact(self):
        return Fraction(self.tp + self.tn, self.total) if self.total else None

    @property
    def precision_exact(self):
        """None when nothing was predicted positive (undefined, not zero)."""
        predicted_positive = self.tp + self.fp
        return Fraction(self.tp, predicted_positive) if predicted_positive else None

    @property
    def accuracy(self):
        exact = self.accuracy_exact
        return None if exact is None else float(exact)

    @property
    def precision(self):
        exact = self.precision_exact
        return None if exact is None else float(exact)

    @property
    def precision_defined(self):
        return self.tp + self.fp > 0

    @property
    def failed(self):
        return self.error is not None

    def with_timing(self, seconds, label=None):
        return replace(self, train_time_seconds=seconds, label=self.label if label is None else label)

    def row(self, timing=True):
        """CSV row: config,accuracy,precision,train_time_s"""
        if self.failed:
            return [self.label, "failed", "failed", "NA"]
        seconds = "NA"
        if timing and self.train_time_seconds is not None:
            seconds = f"{self.train_time_seconds:.4f}"
        return [self.label, render_ratio(self.accuracy_exact), render_ratio(self.precision_exact), seconds]

    @classmethod
    def failure(cls, label, error):
        return cls(tp=0, fp=0, tn=0, fn=0, label=label, error=str(error))


def evaluate(y_true, y_pred, label=""):
    y_true = np.asarray(y_true, dtype=int).ravel()
    y_pred = np.asarray(y_pred, dtype=int).ravel()
    if len(y_true) != len(y_pred):
        raise LengthMismatch(len(y_true), len(y_pred))
    if len(y_true) == 0:
        raise EmptyInput("label vector")

    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    report = EvalReport(tp=tp, fp=fp, tn=tn, fn=fn, label=label)
    if not report.precision_defined:
        logger.warning("%s: no positive predictions, precision undefined", label or "model")
    return report


def time_training(job):
    """Run a zero-argument fit closure; return (result, wall seconds) on a monotonic clock."""
    start = time.perf_counter()
    result = job()
    return result, time.perf_counter() - start


def cross_val_accuracy(fit_predict, X, y, folds):
    """
    Mean test accuracy of fit_predict(X_train, y_train, X_test) -> labels over the folds.
    Folds that raise are recorded as failed and excluded from the mean.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    scores = []
    failures = []
    for fold_index, plan in enumerate(folds):
        train = np.asarray(plan.train, dtype=int)
        test = np.asarray(plan.test, dtype=int)
        try:
            predicted = fit_predict(X[train], y[train], X[test])
        except Exception as e:
            logger.warning("Fold %d failed: %s", fold_index, e)
            failures.append(fold_index)
            continue
        scores.append(float(np.mean(np.asarray(predicted) == y[test])))
    mean = float(np.mean(scores)) if scores else float("nan")
    return mean, scores, failures

"""
Standardization, PCA at a target explained-variance fraction, and
stratified train/test and k-fold splitting.

Fitting functions only ever receive the training matrix; the fitted
transformers are immutable and are applied to test rows without refitting.
"""

import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    ClassAbsent, ClassTooSmall, ColumnMismatch, DegenerateRank, DimensionMismatch,
    EmptyInput, InvalidParameter, ZeroVariance,
)
from .ingest import Dataset, FeatureMatrix, as_array

logger = logging.getLogger(__name__)

CLASSES = (0, 1)


def _columns_of(X):
    if isinstance(X, FeatureMatrix):
        return tuple(X.columns)
    return tuple(f"x{j}" for j in range(as_array(X).shape[1]))


def _as_matrix(X):
    if isinstance(X, FeatureMatrix):
        return X
    values = as_array(X)
    return FeatureMatrix(values=values, columns=_columns_of(values))


# Scaler

@dataclass(frozen=True)
class Scaler:
    columns: tuple
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self):
        return {"columns": list(self.columns), "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(columns=tuple(d["columns"]), mean=np.array(d["mean"], dtype=float),
                   std=np.array(d["std"], dtype=float))


def fit_scaler(X):
    X = _as_matrix(X)
    values = X.values
    if values.shape[0] < 2:
        raise EmptyInput("training matrix (need at least 2 rows)")
    mean = values.mean(axis=0)
    std = values.std(axis=0, ddof=1)
    for j, column in enumerate(X.columns):
        if values[:, j].min() == values[:, j].max() or std[j] <= 1e-12 * max(1.0, abs(mean[j])):
            raise ZeroVariance(column)
    return Scaler(columns=tuple(X.columns), mean=mean, std=std)


def _check_columns(expected, X):
    if isinstance(X, FeatureMatrix):
        if tuple(X.columns) != tuple(expected):
            raise ColumnMismatch(expected, X.columns)
        return X
    # bare arrays carry no names: width check only
    values = as_array(X)
    if values.shape[1] != len(expected):
        raise ColumnMismatch(expected, _columns_of(values))
    return FeatureMatrix(values=values, columns=tuple(expected))


def apply_scaler(s, X):
    X = _check_columns(s.columns, X)
    return X.with_values((X.values - s.mean) / s.std, s.columns)


def invert_scaler(s, X):
    X = _check_columns(s.columns, X)
    return X.with_values(X.values * s.std + s.mean, s.columns)


# PCA

@dataclass(frozen=True)
class PcaModel:
    columns: tuple
    mean: np.ndarray
    basis: np.ndarray  # all d eigenvectors as rows, by descending eigenvalue
    eigenvalues: np.ndarray
    explained_variance_ratio: np.ndarray
    k: int

    @property
    def components(self):
        return self.basis[:self.k]

    @property
    def output_columns(self):
        return tuple(f"PC{i + 1}" for i in range(self.k))

    def to_dict(self):
        return {
            "columns": list(self.columns),
            "mean": self.mean.tolist(),
            "basis": self.basis.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
            "k": self.k,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            columns=tuple(d["columns"]),
            mean=np.array(d["mean"], dtype=float),
            basis=np.array(d["basis"], dtype=float),
            eigenvalues=np.array(d["eigenvalues"], dtype=float),
            explained_variance_ratio=np.array(d["explained_variance_ratio"], dtype=float),
            k=int(d["k"]),
        )


def fit_pca(X, variance_target=0.95):
    if not 0 < variance_target <= 1:
        raise InvalidParameter("variance_target", variance_target, "0 < target <= 1")
    X = _as_matrix(X)
    values = X.values
    n, d = values.shape
    if n < 2:
        raise EmptyInput("training matrix (need at least 2 rows)")

    mean = values.mean(axis=0)
    centered = values - mean
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0

    eigenvalues, vectors = np.linalg.eigh(cov)
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    basis = vectors[:, order].T.copy()

    # sign convention: largest-magnitude entry of each component is positive
    for i in range(d):
        pivot = int(np.argmax(np.abs(basis[i])))
        if basis[i, pivot] < 0:
            basis[i] = -basis[i]

    if eigenvalues[0] <= 0:
        raise DegenerateRank(1, 0)
    eigenvalues[eigenvalues < 1e-12 * eigenvalues[0]] = 0.0
    ratios = eigenvalues / eigenvalues.sum()

    cumulative = np.cumsum(ratios)
    k = min(int(np.searchsorted(cumulative, variance_target - 1e-12, side="left")) + 1, d)
    positive = int(np.count_nonzero(eigenvalues))
    if k > positive:
        raise DegenerateRank(k, positive)

    logger.debug("PCA keeps %d of %d components (%.4f of variance)", k, d, cumulative[k - 1])
    return PcaModel(columns=tuple(X.columns), mean=mean, basis=basis, eigenvalues=eigenvalues,
                    explained_variance_ratio=ratios, k=k)


def apply_pca(m, X):
    X = _as_matrix(X)
    if X.n_cols != len(m.mean):
        raise DimensionMismatch(len(m.mean), X.n_cols)
    scores = (X.values - m.mean) @ m.components.T
    return X.with_values(scores, m.output_columns)


def reconstruct(m, scores):
    scores = as_array(scores)
    if scores.shape[1] != m.k:
        raise DimensionMismatch(m.k, scores.shape[1])
    return scores @ m.components + m.mean


# Preprocessing chain stored with every model

@dataclass(frozen=True)
class PreprocessChain:
    scaler: Scaler = None
    pca: PcaModel = None

    def apply(self, X):
        X = _as_matrix(X)
        if self.scaler is not None:
            X = apply_scaler(self.scaler, X)
        if self.pca is not None:
            X = apply_pca(self.pca, X)
        return X

    def to_dict(self):
        return {
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
            "pca": None if self.pca is None else self.pca.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            scaler=None if d.get("scaler") is None else Scaler.from_dict(d["scaler"]),
            pca=None if d.get("pca") is None else PcaModel.from_dict(d["pca"]),
        )


def fit_chain(X_train, use_pca=False, variance_target=0.95):
    scaler = fit_scaler(X_train)
    pca = fit_pca(apply_scaler(scaler, X_train), variance_target) if use_pca else None
    return PreprocessChain(scaler=scaler, pca=pca)


# Splitting

@dataclass(frozen=True)
class SplitPlan:
    train: tuple
    test: tuple
    seed: int
    test_fraction: float

    def to_dict(self):
        return {"seed": self.seed, "test_fraction": self.test_fraction,
                "train": list(self.train), "test": list(self.test)}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        return cls(train=tuple(int(i) for i in d["train"]), test=tuple(int(i) for i in d["test"]),
                   seed=int(d["seed"]), test_fraction=float(d["test_fraction"]))

    def digest(self):
        """SHA256 of the index lists (provenance of the exact split)."""
        payload = json.dumps({"train": list(self.train), "test": list(self.test)}, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _labels_of(data):
    if isinstance(data, (Dataset, FeatureMatrix)):
        return np.asarray(data.labels, dtype=int)
    return np.asarray(data, dtype=int)


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def _check_fraction(test_fraction):
    if not 0 < test_fraction < 1:
        raise InvalidParameter("test_fraction", test_fraction, "0 < fraction < 1")


def stratified_split(data, test_fraction=0.2, seed=42):
    """Per-class shuffled split; per-class test counts are rounded, then nudged to hit round(n * fraction)."""
    _check_fraction(test_fraction)
    y = _labels_of(data)
    n = len(y)
    counts = {c: int(np.sum(y == c)) for c in CLASSES}
    for c in CLASSES:
        if counts[c] == 0:
            raise ClassAbsent(c)

    target = _round_half_up(n * test_fraction)
    exact = {c: counts[c] * test_fraction for c in CLASSES}
    quota = {c: min(counts[c], _round_half_up(exact[c])) for c in CLASSES}

    diff = target - sum(quota.values())
    if diff > 0:
        order = sorted(CLASSES, key=lambda c: -(exact[c] - quota[c]))
    else:
        order = sorted(CLASSES, key=lambda c: exact[c] - quota[c])
    for c in order:
        if diff > 0 and quota[c] < counts[c]:
            quota[c] += 1
            diff -= 1
        elif diff < 0 and quota[c] > 0:
            quota[c] -= 1
            diff += 1

    rng = np.random.default_rng(seed)
    test = []
    for c in CLASSES:
        members = rng.permutation(np.flatnonzero(y == c))
        test.extend(int(i) for i in members[:quota[c]])
    test = sorted(test)
    test_set = set(test)
    train = [i for i in range(n) if i not in test_set]
    return SplitPlan(train=tuple(train), test=tuple(test), seed=seed, test_fraction=test_fraction)


def stratified_kfold(data, k=5, seed=42):
    """k disjoint stratified folds; each row lands in exactly one test fold."""
    if k < 2:
        raise InvalidParameter("k", k, "k >= 2")
    y = _labels_of(data)
    n = len(y)
    for c in CLASSES:
        count = int(np.sum(y == c))
        if count < k:
            raise ClassTooSmall(c, count, k)

    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in CLASSES])
    folds = [[] for _ in range(k)]
    for position, index in enumerate(order):
        folds[position % k].append(int(index))

    plans = []
    for fold in folds:
        test = sorted(fold)
        test_set = set(test)
        train = [i for i in range(n) if i not in test_set]
        plans.append(SplitPlan(train=tuple(train), test=tuple(test), seed=seed, test_fraction=len(test) / n))
    return plans


_SUBJECT = re.compile(r"_(S\d+)_")


def subject_of(name):
    """Subject key of a recording identifier (phon_R01_S01_1 -> S01)."""
    match = _SUBJECT.search(name)
    return match.group(1) if match else name


def grouped_split(ds, test_fraction=0.2, seed=42):
    """Subject-level split: all recordings of one subject land on the same side. Not stratified."""
    _check_fraction(test_fraction)
    groups = {}
    for i, name in enumerate(ds.names):
        groups.setdefault(subject_of(name), []).append(i)

    keys = sorted(groups)
    rng = np.random.default_rng(seed)
    target = _round_half_up(len(ds) * test_fraction)
    test = []
    for key_index in rng.permutation(len(keys)):
        if len(test) >= target:
            break
        test.extend(groups[keys[key_index]])
    test = sorted(test)
    test_set = set(test)
    train = [i for i in range(len(ds)) if i not in test_set]
    return SplitPlan(train=tuple(train), test=tuple(test), seed=seed, test_fraction=test_fraction)

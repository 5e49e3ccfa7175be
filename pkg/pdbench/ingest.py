"""
Loads and validates the UCI Parkinson's voice file and computes the
summary-statistics table and the pairwise Pearson correlation matrix.
"""

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import config
from .errors import (
    DataError, DuplicateName, EmptyFile, EmptyInput, MissingColumn,
    NonFiniteValue, ParseError, SchemaMismatch, UnknownColumn, ZeroVariance,
)
from .tables import csv_text, fmt, markdown_text

logger = logging.getLogger(__name__)

NAME_COLUMN = "name"
STATUS_COLUMN = "status"

FEATURE_NAMES = (
    "MDVP:Fo(Hz)", "MDVP:Fhi(Hz)", "MDVP:Flo(Hz)",
    "MDVP:Jitter(%)", "MDVP:Jitter(Abs)", "MDVP:RAP", "MDVP:PPQ", "Jitter:DDP",
    "MDVP:Shimmer", "MDVP:Shimmer(dB)", "Shimmer:APQ3", "Shimmer:APQ5", "MDVP:APQ", "Shimmer:DDA",
    "NHR", "HNR",
    "RPDE", "DFA", "spread1", "spread2", "D2", "PPE",
)
FREQUENCY_FEATURES = ("MDVP:Fo(Hz)", "MDVP:Fhi(Hz)", "MDVP:Flo(Hz)")

# Column order of the published file (status sits between HNR and RPDE).
FILE_COLUMNS = (NAME_COLUMN,) + FEATURE_NAMES[:16] + (STATUS_COLUMN,) + FEATURE_NAMES[16:]

STAT_NAMES = ("count", "mean", "std", "min", "25%", "50%", "75%", "max")

# pandas: "Expected 24 fields in line 4, saw 25"
_FIELD_COUNT = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")


@dataclass(frozen=True)
class FeatureMatrix:
    """Column-named dense matrix with an optional aligned label vector."""
    values: np.ndarray
    columns: tuple
    labels: np.ndarray = None
    names: tuple = ()

    @property
    def n_rows(self):
        return self.values.shape[0]

    @property
    def n_cols(self):
        return self.values.shape[1]

    def take(self, indices):
        indices = np.asarray(indices, dtype=int)
        return FeatureMatrix(
            values=self.values[indices],
            columns=self.columns,
            labels=None if self.labels is None else self.labels[indices],
            names=tuple(self.names[i] for i in indices) if self.names else (),
        )

    def with_values(self, values, columns):
        return FeatureMatrix(values=values, columns=tuple(columns), labels=self.labels, names=self.names)


def as_array(X):
    """Accept a FeatureMatrix or anything array-like and return a 2-D float array."""
    values = X.values if isinstance(X, FeatureMatrix) else X
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values.reshape(1, -1)
    return values


@dataclass(frozen=True)
class VoiceRecord:
    name: str
    features: dict
    status: int

    def vector(self, feature_names=FEATURE_NAMES):
        return [self.features[f] for f in feature_names]


@dataclass(frozen=True)
class Dataset:
    records: tuple
    feature_names: tuple = FEATURE_NAMES

    def __len__(self):
        return len(self.records)

    @property
    def names(self):
        return tuple(r.name for r in self.records)

    @property
    def labels(self):
        return np.array([r.status for r in self.records], dtype=int)

    def feature_array(self):
        return np.array([r.vector(self.feature_names) for r in self.records], dtype=float).reshape(
            len(self.records), len(self.feature_names)
        )

    def to_matrix(self):
        return FeatureMatrix(
            values=self.feature_array(),
            columns=tuple(self.feature_names),
            labels=self.labels,
            names=self.names,
        )

    def subset(self, indices):
        return Dataset(records=tuple(self.records[i] for i in indices), feature_names=self.feature_names)


def _parse_real(text, line, column):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(line, column, f"not a number: {text!r}")
    if not math.isfinite(value):
        raise NonFiniteValue(line, column)
    return value


def _read_frame(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"Data file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise EmptyFile(path)
    except pd.errors.ParserError as e:
        match = _FIELD_COUNT.search(str(e))
        if match is None:
            raise DataError(f"Cannot parse {path}: {e}")
        expected, line, saw = (int(g) for g in match.groups())
        raise ParseError(line, f"field {expected + 1}", f"expected {expected} fields, saw {saw}")
    frame.columns = [str(c).strip() for c in frame.columns]
    return frame


def load_dataset(path):
    """Load the voice file. Columns are located by header name; unknown columns are rejected."""
    frame = _read_frame(path)

    for column in FILE_COLUMNS:
        if column not in frame.columns:
            raise MissingColumn(column)
    for column in frame.columns:
        if column not in FILE_COLUMNS:
            raise UnknownColumn(column)
    if frame.empty:
        raise EmptyFile(path)

    records = []
    seen = set()
    for row_index, row in enumerate(frame.itertuples(index=False)):
        line = row_index + 2  # header is line 1
        cells = dict(zip(frame.columns, row))

        name = cells[NAME_COLUMN].strip()
        if not name:
            raise ParseError(line, NAME_COLUMN, "empty identifier")
        if name in seen:
            raise DuplicateName(name)
        seen.add(name)

        features = {}
        for feature in FEATURE_NAMES:
            value = _parse_real(cells[feature].strip(), line, feature)
            if feature in FREQUENCY_FEATURES and value <= 0:
                raise ParseError(line, feature, "frequency must be positive")
            features[feature] = value

        status = _parse_real(cells[STATUS_COLUMN].strip(), line, STATUS_COLUMN)
        if status not in (0.0, 1.0):
            raise ParseError(line, STATUS_COLUMN, f"status must be 0 or 1, got {status}")

        records.append(VoiceRecord(name=name, features=features, status=int(status)))

    dataset = Dataset(records=tuple(records))
    _report_class_counts(dataset)
    return dataset


def class_counts(ds):
    labels = ds.labels
    return {0: int(np.sum(labels == 0)), 1: int(np.sum(labels == 1))}


def _report_class_counts(ds):
    counts = class_counts(ds)
    logger.info("Loaded %d records: %d healthy (status 0), %d PD (status 1)",
                len(ds), counts[0], counts[1])
    stated = config.STATED_CLASS_COUNTS
    if len(ds) == sum(stated.values()) and counts != stated:
        logger.warning(
            "Class counts differ from the published description (%d PD / %d healthy); "
            "using the file: %d PD / %d healthy",
            stated[1], stated[0], counts[1], counts[0],
        )


def write_dataset(ds, path):
    """Write a Dataset back in the published column layout."""
    rows = []
    for record in ds.records:
        row = {NAME_COLUMN: record.name, STATUS_COLUMN: record.status}
        row.update(record.features)
        rows.append(row)
    frame = pd.DataFrame(rows, columns=list(FILE_COLUMNS))
    frame.to_csv(path, index=False, lineterminator="\n")


def load_features(path, feature_names=FEATURE_NAMES):
    """Read a scoring input: feature columns are required, name is optional, anything else is ignored."""
    frame = _read_frame(path)
    missing = [f for f in feature_names if f not in frame.columns]
    if missing:
        raise SchemaMismatch(missing)
    if frame.empty:
        raise EmptyFile(path)

    values = np.empty((len(frame), len(feature_names)))
    for j, feature in enumerate(feature_names):
        for i, text in enumerate(frame[feature]):
            values[i, j] = _parse_real(text.strip(), i + 2, feature)
    if NAME_COLUMN in frame.columns:
        names = tuple(n.strip() for n in frame[NAME_COLUMN])
    else:
        names = tuple(f"row{i + 1}" for i in range(len(frame)))
    return FeatureMatrix(values=values, columns=tuple(feature_names), names=names)


# Summary statistics

@dataclass(frozen=True)
class SummaryTable:
    features: tuple
    stats: np.ndarray  # rows follow STAT_NAMES
    outliers: dict = field(default_factory=dict)

    def value(self, stat, feature):
        return float(self.stats[STAT_NAMES.index(stat), self.features.index(feature)])

    def rows(self, decimals=6):
        rows = []
        for i, stat in enumerate(STAT_NAMES):
            rows.append([stat] + [fmt(float(v), decimals) for v in self.stats[i]])
        if self.outliers:
            rows.append(["outliers"] + [str(self.outliers[f]) for f in self.features])
        return rows

    def to_csv(self, comments=()):
        return csv_text([""] + list(self.features), self.rows(), comments=comments)

    def to_markdown(self, notes=()):
        return markdown_text(["stat"] + list(self.features), self.rows(), title="Summary Statistics", notes=notes)


def summarize(ds):
    if len(ds) == 0:
        raise EmptyInput("dataset")
    X = ds.feature_array()
    n = X.shape[0]

    lo = X.min(axis=0)
    hi = X.max(axis=0)
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1) if n > 1 else np.zeros(X.shape[1])
    constant = lo == hi
    mean[constant] = lo[constant]
    std[constant] = 0.0
    q25, q50, q75 = np.percentile(X, [25, 50, 75], axis=0, method="linear")

    stats = np.vstack([np.full(X.shape[1], float(n)), mean, std, lo, q25, q50, q75, hi])
    return SummaryTable(features=tuple(ds.feature_names), stats=stats, outliers=iqr_outliers(ds))


def iqr_outliers(ds, k=1.5):
    """Count values outside the Tukey fences [q25 - k*IQR, q75 + k*IQR] per feature."""
    X = ds.feature_array()
    q25, q75 = np.percentile(X, [25, 75], axis=0, method="linear")
    spread = q75 - q25
    outside = (X < q25 - k * spread) | (X > q75 + k * spread)
    return {f: int(outside[:, j].sum()) for j, f in enumerate(ds.feature_names)}


# Correlation

@dataclass(frozen=True)
class CorrMatrix:
    labels: tuple
    values: np.ndarray

    def get(self, a, b):
        return float(self.values[self.labels.index(a), self.labels.index(b)])

    def rows(self, decimals):
        return [[label] + [fmt(float(v), decimals) for v in self.values[i]]
                for i, label in enumerate(self.labels)]

    def to_csv(self, comments=()):
        return csv_text([""] + list(self.labels), self.rows(6), comments=comments)

    def to_markdown(self, notes=()):
        return markdown_text([""] + list(self.labels), self.rows(2), title="Pairwise Pearson correlation",
                             notes=notes)


def correlation_matrix(ds, include_status=True):
    if len(ds) < 2:
        raise EmptyInput("dataset (need at least 2 records)")
    X = ds.feature_array()
    labels = list(ds.feature_names)
    if include_status:
        X = np.column_stack([X, ds.labels.astype(float)])
        labels.append(STATUS_COLUMN)

    centered = X - X.mean(axis=0)
    norms = np.sqrt(np.sum(centered ** 2, axis=0))
    for j, norm in enumerate(norms):
        if norm == 0.0 or X[:, j].min() == X[:, j].max():
            raise ZeroVariance(labels[j])

    values = (centered.T @ centered) / np.outer(norms, norms)
    values = np.clip((values + values.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(values, 1.0)
    return CorrMatrix(labels=tuple(labels), values=values)


def top_correlations(c, target=STATUS_COLUMN, k=5):
    """Features most correlated (by absolute value) with the target, strongest first."""
    t = c.labels.index(target)
    pairs = [(label, float(c.values[i, t])) for i, label in enumerate(c.labels) if i != t]
    pairs.sort(key=lambda p: (-abs(p[1]), c.labels.index(p[0])))
    return pairs[:k]


def strong_pairs(c, threshold=0.9, exclude=(STATUS_COLUMN,)):
    """Feature pairs with |r| >= threshold (redundant measurements)."""
    pairs = []
    for i, a in enumerate(c.labels):
        for j in range(i + 1, len(c.labels)):
            b = c.labels[j]
            if a in exclude or b in exclude:
                continue
            r = float(c.values[i, j])
            if abs(r) >= threshold:
                pairs.append((a, b, r))
    pairs.sort(key=lambda p: -abs(p[2]))
    return pairs

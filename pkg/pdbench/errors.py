"""
Exception hierarchy for pdbench.
Every error family maps to a stable process exit code used by the CLI.
"""


class PdBenchError(Exception):
    """Base class for every error raised by pdbench."""

    exit_code = 1


class UsageError(PdBenchError):
    exit_code = 2


class DataError(PdBenchError):
    exit_code = 3


class ModelError(PdBenchError):
    exit_code = 4


# Usage

class InvalidParameter(UsageError):
    def __init__(self, name, value, expected):
        self.name = name
        self.value = value
        super().__init__(f"Invalid value for {name}: {value!r} (expected {expected})")


# Data loading and validation

class EmptyFile(DataError):
    def __init__(self, path):
        self.path = path
        super().__init__(f"No data rows in {path}")


class MissingColumn(DataError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"Missing column: {name}")


class UnknownColumn(DataError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"Unexpected column: {name}")


class ParseError(DataError):
    def __init__(self, line, column, detail=""):
        self.line = line
        self.column = column
        message = f"Cannot parse line {line}, column {column}"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class NonFiniteValue(DataError):
    def __init__(self, line, column):
        self.line = line
        self.column = column
        super().__init__(f"Non-finite value at line {line}, column {column}")


class DuplicateName(DataError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"Duplicate record identifier: {name}")


class SchemaMismatch(DataError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__("Input is missing columns: " + ", ".join(self.missing))


# Numerical preconditions

class EmptyInput(DataError):
    def __init__(self, what="input"):
        super().__init__(f"Empty {what}")


class LengthMismatch(DataError):
    def __init__(self, left, right):
        super().__init__(f"Length mismatch: {left} != {right}")


class DimensionMismatch(DataError):
    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"Dimension mismatch: expected {expected} columns, got {got}")


class ColumnMismatch(DataError):
    def __init__(self, expected, got):
        super().__init__(f"Column mismatch: fitted on {list(expected)}, got {list(got)}")


class ZeroVariance(DataError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"Zero-variance column: {column}")


class DegenerateRank(DataError):
    def __init__(self, needed, available):
        super().__init__(
            f"Covariance has {available} positive eigenvalues, {needed} components requested"
        )


class ClassAbsent(DataError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"Class {label} has no records")


class ClassTooSmall(DataError):
    def __init__(self, label, count, k):
        super().__init__(f"Class {label} has {count} records, fewer than {k} folds")


# Models

class SchemaVersionMismatch(ModelError):
    def __init__(self, expected, got):
        super().__init__(f"Model schema version {got!r} is not supported (expected {expected})")


class CorruptModel(ModelError):
    def __init__(self, path, detail):
        super().__init__(f"Corrupt model file {path}: {detail}")


class DivergenceDetected(ModelError):
    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"Training diverged at epoch {epoch}: loss = {loss}")

"""Parkinson's voice classification: from-scratch models and the benchmark runner."""

__version__ = "1.0.0"

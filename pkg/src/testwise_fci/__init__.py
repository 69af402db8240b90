"""Constraint-based causal discovery with test-wise deletion of missing values."""

__version__ = "0.1.0"

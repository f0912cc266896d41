"""Dendritic cell anomaly detection with a Duration Calculus trace checker."""

__version__ = "0.1.0"

"""Nonparametric estimation of additive factor models."""

__version__ = "1.0.0"

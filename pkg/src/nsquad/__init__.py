"""Nested sampling as probabilistic quadrature: plateau-aware contraction,
level-set surrogate reweighting, rare events, moments and survival functions."""

__version__ = "0.1.0"

"""Stress-strength reliability under Clayton-coupled modified Weibull margins."""

__version__ = "0.1.0"

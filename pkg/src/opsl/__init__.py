"""Exact model checking of opacity probabilistic strategy logic over
partially observable stochastic multi-agent systems."""

__version__ = "0.1.0"

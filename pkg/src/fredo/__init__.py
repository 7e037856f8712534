"""Periodicity baselines and frequency-domain Mixer models for long-horizon forecasting."""

__version__ = "0.1.0"

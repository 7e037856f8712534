"""Seeded multi-sinusoid + AR(1) noise series for offline experiments."""

from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np

from .dataio import TimeSeriesMatrix


def generate_synthetic(
    n_series: int = 24,
    length: int = 2400,
    period: int = 24,
    seed: int = 0,
    n_harmonics: int = 3,
    noise_std: float = 0.5,
    slow_cycles: int = 7,
) -> TimeSeriesMatrix:
    """Each series mixes harmonics of ``period``, one slower cycle and AR(1) noise.

    The layout imitates hourly load data: a daily cycle (harmonic amplitudes
    decaying like 1/h, random phases), a weekly-style sinusoid of period
    ``slow_cycles * period`` (pass 0 to drop it), and noise with a random AR
    coefficient in [0.5, 0.9] scaled to marginal standard deviation ``noise_std``.
    """
    if n_series < 1 or length < 2 or period < 1:
        raise ValueError("n_series, length and period must be positive (length >= 2)")
    rng = np.random.default_rng(seed)
    t = np.arange(length)
    out = np.empty((length, n_series))
    for n in range(n_series):
        level = rng.normal(0.0, 1.0)
        signal = np.full(length, level)
        for h in range(1, n_harmonics + 1):
            amp = rng.uniform(0.5, 2.0) / h
            phase = rng.uniform(0.0, 2 * np.pi)
            signal += amp * np.sin(2 * np.pi * h * t / period + phase)
        if slow_cycles:
            amp = rng.uniform(0.5, 1.5)
            phase = rng.uniform(0.0, 2 * np.pi)
            signal += amp * np.sin(2 * np.pi * t / (slow_cycles * period) + phase)
        phi = rng.uniform(0.5, 0.9)
        innov = rng.normal(0.0, noise_std * np.sqrt(1 - phi**2), size=length)
        noise = np.empty(length)
        noise[0] = rng.normal(0.0, noise_std)
        for k in range(1, length):
            noise[k] = phi * noise[k - 1] + innov[k]
        out[:, n] = signal + noise
    return TimeSeriesMatrix(out, tuple(f"series_{n}" for n in range(n_series)))


def hourly_timestamps(length: int, start: datetime = datetime(2016, 7, 1)) -> list[str]:
    return [(start + timedelta(hours=k)).strftime("%Y-%m-%d %H:%M:%S") for k in range(length)]

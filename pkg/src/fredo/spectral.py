"""Real-valued spectral packing of a real signal.

A real signal of length L has a conjugate-symmetric DFT, so only L real
numbers in it are free.  ``dft_extract`` collects exactly those numbers into
a real vector of the same length::

    even L: [Re z_0, ..., Re z_{L/2}, Im z_1, ..., Im z_{L/2-1}]
    odd  L: [Re z_0, ..., Re z_{(L-1)/2}, Im z_1, ..., Im z_{(L-1)/2}]

and ``insert_idft`` scatters them back into the full spectrum and inverts.
Both maps are linear, so they are also exposed as dense matrices for batched
work and for backpropagating through them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import EmptyInput, ShapeMismatch, TooShort

# Per-bin false alarm budget for declaring a white-noise series periodic.
NOISE_FALSE_ALARM = 0.01
MIN_PEAK_RATIO = 3.0


@dataclass(frozen=True)
class SpectralVector:
    packed: np.ndarray

    def __post_init__(self):
        packed = np.asarray(self.packed, dtype=np.float64)
        if packed.ndim != 1 or packed.size < 2:
            raise TooShort(f"packed spectrum needs length >= 2, got shape {packed.shape}")
        object.__setattr__(self, "packed", packed)

    @property
    def length(self) -> int:
        return self.packed.size

    @property
    def parity(self) -> str:
        return "even" if self.length % 2 == 0 else "odd"

    @property
    def n_real(self) -> int:
        return self.length // 2 + 1

    @property
    def n_imag(self) -> int:
        return self.length - self.n_real


def dft(x) -> np.ndarray:
    """Unnormalized forward DFT, ``z_k = sum_j x_j exp(-2 pi i j k / L)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeMismatch(f"dft expects a vector, got shape {x.shape}")
    if x.size == 0:
        raise EmptyInput("dft of an empty vector")
    return np.fft.fft(x)


def _pack(spectrum: np.ndarray, length: int) -> np.ndarray:
    half = length // 2
    n_imag = length - half - 1
    return np.concatenate([spectrum[..., : half + 1].real, spectrum[..., 1 : n_imag + 1].imag], axis=-1)


def dft_extract(x) -> SpectralVector:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeMismatch(f"dft_extract expects a vector, got shape {x.shape}")
    if x.size == 0:
        raise EmptyInput("dft_extract of an empty vector")
    if x.size < 2:
        raise TooShort("dft_extract needs at least 2 samples")
    return SpectralVector(_pack(np.fft.rfft(x), x.size))


def insert_idft(s: SpectralVector) -> np.ndarray:
    packed, length = s.packed, s.length
    n_real, n_imag = s.n_real, s.n_imag
    full = np.zeros(length, dtype=np.complex128)
    full[:n_real] = packed[:n_real]
    full[1 : n_imag + 1] += 1j * packed[n_real:]
    # mirror onto the negative frequencies
    full[length - n_imag :] = np.conj(full[1 : n_imag + 1][::-1])
    out = np.fft.ifft(full)
    return out.real.copy()


@lru_cache(maxsize=64)
def extract_matrix(length: int) -> np.ndarray:
    """E with ``E @ x == dft_extract(x).packed`` for every x of this length."""
    if length < 2:
        raise TooShort("packing needs length >= 2")
    mat = _pack(np.fft.rfft(np.eye(length), axis=0).T, length).T
    mat = np.ascontiguousarray(mat)
    mat.setflags(write=False)
    return mat


@lru_cache(maxsize=64)
def insert_matrix(length: int) -> np.ndarray:
    """D with ``D @ s == insert_idft(SpectralVector(s))``; D is the inverse of E."""
    cols = [insert_idft(SpectralVector(e)) for e in np.eye(length)]
    mat = np.ascontiguousarray(np.stack(cols, axis=1))
    mat.setflags(write=False)
    return mat


def peak_ratio_threshold(n_bins: int) -> float:
    # For white noise |z_k| is Rayleigh, so P(|z_k| > c * median) = 2 ** (-c**2);
    # c is chosen so the expected number of false peaks over n_bins is NOISE_FALSE_ALARM.
    return max(MIN_PEAK_RATIO, math.sqrt(math.log2(max(n_bins, 1) / NOISE_FALSE_ALARM)))


def estimate_period(x, max_period: int) -> int:
    """Dominant cycle length of ``x`` in samples, or 1 if nothing stands out.

    The peak of the amplitude spectrum (excluding DC) must exceed a multiple
    of the median amplitude; see :func:`peak_ratio_threshold`.
    """
    x = np.asarray(x, dtype=np.float64)
    if max_period < 1:
        raise ValueError("max_period must be positive")
    if x.size < 2 * max_period or x.size < 2:
        raise TooShort(f"need at least 2*max_period={2 * max_period} samples, got {x.size}")
    length = x.size
    amp = np.abs(dft(x))[1 : length // 2 + 1]
    peak = amp.max()
    scale = length * float(np.max(np.abs(x)))
    if peak <= 1e-9 * scale or peak < peak_ratio_threshold(amp.size) * np.median(amp):
        return 1
    k_star = int(np.argmax(amp)) + 1  # argmax keeps the first (smallest k) on ties
    period = round(length / k_star)
    return int(min(max(period, 2), max_period))

"""Orthonormal Daubechies-4 (8-tap) discrete wavelet transform.

The signal is extended by half-sample symmetric reflection, so one level on
``n`` samples yields ``floor((n + 7) / 2)`` approximation and as many detail
coefficients. Reconstruction is exact because every coefficient is taken
from the infinite symmetric extension and the filter bank is orthonormal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# db4 scaling filter (synthesis low-pass)
_SCALING = np.array([
    0.2303778133088965,
    0.7148465705529157,
    0.6308807679298589,
    -0.027983769416859854,
    -0.18703481171909309,
    0.030841381835560764,
    0.0328830116668852,
    -0.010597401785069032,
])
DEC_LO = _SCALING[::-1].copy()
FILTER_LENGTH = 8


def _make_dec_hi() -> np.ndarray:
    F = FILTER_LENGTH
    return np.array([(-1) ** (j + 1) * DEC_LO[F - 1 - j] for j in range(F)])


DEC_HI = _make_dec_hi()


@dataclass
class WaveletCoeffs:
    approx: np.ndarray
    details: list[np.ndarray]  # finest level first
    lengths: list[int]  # input length at each level, finest first

    @property
    def levels(self) -> int:
        return len(self.details)

    def flat(self) -> np.ndarray:
        """Approximation, then details from coarsest to finest."""
        return np.concatenate([self.approx] + self.details[::-1])


def coeff_count(n: int) -> int:
    return (n + FILTER_LENGTH - 1) // 2


def max_level(n: int) -> int:
    return int(math.floor(math.log2(n))) if n >= 1 else 0


def cascade_counts(n: int, levels: int) -> list[int]:
    """Per-level coefficient counts for an input of length ``n``."""
    out = []
    for _ in range(levels):
        n = coeff_count(n)
        out.append(n)
    return out


def _analysis_index(n: int) -> np.ndarray:
    k = np.arange(coeff_count(n))[:, None]
    j = np.arange(FILTER_LENGTH)[None, :]
    return 2 * k + 1 - j + (FILTER_LENGTH - 1)


def _dwt_step(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ext = np.pad(x, FILTER_LENGTH - 1, mode="symmetric")
    taps = ext[_analysis_index(len(x))]
    return taps @ DEC_LO, taps @ DEC_HI


def _idwt_step(a: np.ndarray, d: np.ndarray, n: int) -> np.ndarray:
    m = np.arange(n)
    out = np.zeros(n)
    for k in range(len(a)):
        j = 2 * k + 1 - m
        ok = (j >= 0) & (j < FILTER_LENGTH)
        out[ok] += a[k] * DEC_LO[j[ok]] + d[k] * DEC_HI[j[ok]]
    return out


def dwt_db4(series, levels: int = 1) -> WaveletCoeffs:
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or len(x) == 0:
        raise ValueError("dwt needs a non-empty 1-D series")
    if levels < 1 or levels > max_level(len(x)):
        raise ValueError(f"{levels} levels too deep for length {len(x)} (max {max_level(len(x))})")
    details, lengths = [], []
    a = x
    for _ in range(levels):
        lengths.append(len(a))
        a, d = _dwt_step(a)
        details.append(d)
    return WaveletCoeffs(approx=a, details=details, lengths=lengths)


def idwt_db4(coeffs: WaveletCoeffs) -> np.ndarray:
    a = coeffs.approx
    for d, n in zip(reversed(coeffs.details), reversed(coeffs.lengths)):
        a = _idwt_step(a, d, n)
    return a

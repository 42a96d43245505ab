"""DCT and DFT coefficient features."""

import numpy as np
from scipy import fft

from skillseries.core.errors import BadParam
from skillseries.core.trial import KinematicSeries
from skillseries.features.base import FeatureFamily, FeatureVector, params_hash


def dct_matrix(n_frames: int, q: int) -> np.ndarray:
    """First ``q`` rows of the orthonormal DCT-II matrix (q x L)."""
    k = np.arange(q)[:, None]
    n = np.arange(n_frames)[None, :]
    matrix = np.sqrt(2.0 / n_frames) * np.cos(np.pi * (2 * n + 1) * k / (2 * n_frames))
    matrix[0, :] /= np.sqrt(2.0)
    return matrix


def dct_coefficients(values: np.ndarray, q: int) -> np.ndarray:
    """Lowest ``q`` orthonormal DCT-II coefficients of each row (D x q)."""
    return fft.dct(values, type=2, norm="ortho", axis=-1)[..., :q]


def dct_features(series: KinematicSeries, q: int, trial_id: str = "") -> FeatureVector:
    """Concatenated per-channel blocks of the q lowest DCT coefficients."""
    if not 1 <= q <= series.n_frames:
        raise BadParam(f"DCT q must lie in [1, {series.n_frames}]", q=q)
    coefficients = dct_coefficients(series.values, q)
    provenance = (trial_id, params_hash({"q": q}))
    return FeatureVector(FeatureFamily.DCT, coefficients.ravel(), provenance)


def dft_features(series: KinematicSeries, q: int, trial_id: str = "") -> FeatureVector:
    """Concatenated per-channel magnitudes of the q lowest non-negative DFT bins."""
    max_q = series.n_frames // 2 + 1
    if not 1 <= q <= max_q:
        raise BadParam(f"DFT q must lie in [1, {max_q}]", q=q)
    magnitudes = np.abs(fft.rfft(series.values, axis=-1))[:, :q]
    provenance = (trial_id, params_hash({"q": q}))
    return FeatureVector(FeatureFamily.DFT, magnitudes.ravel(), provenance)

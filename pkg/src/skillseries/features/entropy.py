"""Approximate entropy (ApEn) features."""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from skillseries.core.errors import BadParam, SignalTooShort
from skillseries.core.trial import KinematicSeries
from skillseries.features.base import FeatureFamily, FeatureVector, params_hash

logger = logging.getLogger(__name__)

# Rows of the pairwise distance matrix handled at once
_CHUNK_ROWS = 256


class RadiusMode(Enum):
    """How ApEn radii are interpreted."""

    STD_SCALED = "StdScaled"  # r_eff = r * population std of the signal
    ABSOLUTE = "Absolute"


@dataclass(frozen=True)
class ApEnParams:
    """Embedding dimension, lag and radius grid."""

    m: int = 1
    tau: int = 1
    radii: tuple[float, ...] = (0.1, 0.13, 0.16, 0.19, 0.22, 0.25)
    radius_mode: RadiusMode = RadiusMode.STD_SCALED

    def __post_init__(self) -> None:
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        object.__setattr__(self, "radius_mode", RadiusMode(self.radius_mode))
        if self.m < 1 or self.tau < 1:
            raise BadParam("ApEn needs m >= 1 and tau >= 1", m=self.m, tau=self.tau)
        if not self.radii or any(r <= 0 for r in self.radii):
            raise BadParam("ApEn radii must be strictly positive", radii=self.radii)
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise BadParam("ApEn radii must be strictly increasing", radii=self.radii)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "tau": self.tau,
            "radii": list(self.radii),
            "radius_mode": self.radius_mode.value,
        }


def embed(signal: np.ndarray, m: int, tau: int) -> np.ndarray:
    """Delay embedding: row i is (s[i], s[i + tau], ..., s[i + (m - 1) tau])."""
    n_vectors = signal.size - (m - 1) * tau
    return np.stack([signal[j * tau : j * tau + n_vectors] for j in range(m)], axis=1)


def match_counts(signal: np.ndarray, m: int, tau: int, radii: np.ndarray) -> np.ndarray:
    """For every radius and template i, the number of templates j within max-norm radius.

    Self-matches are included. Returns an (R, M) integer array, M = N - (m - 1) tau.
    """
    vectors = embed(np.asarray(signal, dtype=np.float64), m, tau)
    radii = np.asarray(radii, dtype=np.float64)
    n_vectors = vectors.shape[0]
    counts = np.empty((radii.size, n_vectors), dtype=np.int64)
    for start in range(0, n_vectors, _CHUNK_ROWS):
        block = vectors[start : start + _CHUNK_ROWS]
        dist = np.abs(block[:, None, :] - vectors[None, :, :]).max(axis=2)
        counts[:, start : start + block.shape[0]] = (
            dist[None, :, :] <= radii[:, None, None]
        ).sum(axis=2)
    return counts


def _phi(signal: np.ndarray, m: int, tau: int, radii: np.ndarray) -> np.ndarray:
    counts = match_counts(signal, m, tau, radii)
    return np.mean(np.log(counts / counts.shape[1]), axis=1)


def _effective_radii(signal: np.ndarray, params: ApEnParams) -> np.ndarray:
    radii = np.asarray(params.radii, dtype=np.float64)
    if params.radius_mode is RadiusMode.STD_SCALED:
        return radii * np.std(signal)
    return radii


def apen_all_radii(signal: np.ndarray, params: ApEnParams) -> np.ndarray:
    """ApEn for every radius of the grid (length R)."""
    signal = np.asarray(signal, dtype=np.float64)
    needed = params.m * params.tau + 2
    if signal.size < needed:
        raise SignalTooShort(
            f"ApEn needs at least {needed} samples, got {signal.size}", length=signal.size
        )
    if params.radius_mode is RadiusMode.STD_SCALED and np.std(signal) == 0.0:
        return np.zeros(len(params.radii))

    radii = _effective_radii(signal, params)
    values = _phi(signal, params.m, params.tau, radii) - _phi(
        signal, params.m + 1, params.tau, radii
    )
    return values


def apen(signal: np.ndarray, params: ApEnParams, radius_index: int) -> float:
    """Approximate entropy Phi^m(r) - Phi^(m+1)(r) for one radius of the grid."""
    if not 0 <= radius_index < len(params.radii):
        raise BadParam("radius_index outside the radius grid", radius_index=radius_index)
    return float(apen_all_radii(signal, params)[radius_index])


def apen_features(
    series: KinematicSeries, params: ApEnParams, trial_id: str = ""
) -> FeatureVector:
    """Channel-major ApEn values: D blocks of R radii."""
    blocks = []
    for channel, signal in enumerate(series.values):
        try:
            blocks.append(apen_all_radii(signal, params))
        except SignalTooShort as e:
            raise SignalTooShort(e.message, channel=channel, trial=trial_id) from e
    provenance = (trial_id, params_hash(params.to_dict()))
    return FeatureVector(FeatureFamily.APEN, np.concatenate(blocks), provenance)

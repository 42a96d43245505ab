"""Sequential motion texture (SMT): GLCM statistics of windowed frame kernels."""

import logging
from dataclasses import dataclass

import numpy as np
from skimage.feature import graycomatrix

from skillseries.core.errors import BadParam, TooFewFrames
from skillseries.core.trial import KinematicSeries
from skillseries.features.base import FeatureFamily, FeatureVector, params_hash

logger = logging.getLogger(__name__)

GLCM_STATS: tuple[str, ...] = ("contrast", "correlation", "energy", "homogeneity", "entropy")
GLCM_OFFSETS: tuple[tuple[int, int], ...] = ((0, 1), (1, 1), (1, 0), (1, -1))


@dataclass(frozen=True)
class SmtParams:
    """Windowing and gray-level settings."""

    n_windows: int = 10
    gray_levels: int = 8
    offsets: tuple[tuple[int, int], ...] = GLCM_OFFSETS
    stats: tuple[str, ...] = GLCM_STATS

    def __post_init__(self) -> None:
        if self.n_windows < 1:
            raise BadParam("SMT needs n_windows >= 1", n_windows=self.n_windows)
        if not 2 <= self.gray_levels <= 256:
            raise BadParam("SMT gray_levels must lie in [2, 256]", gray_levels=self.gray_levels)
        unknown = set(self.stats) - set(GLCM_STATS)
        if unknown:
            raise BadParam(f"Unknown GLCM statistics {sorted(unknown)}")

    @property
    def features_per_window(self) -> int:
        return len(self.offsets) * len(self.stats)

    def to_dict(self) -> dict:
        return {
            "n_windows": self.n_windows,
            "gray_levels": self.gray_levels,
            "offsets": [list(o) for o in self.offsets],
            "stats": list(self.stats),
        }


def window_bounds(n_frames: int, n_windows: int) -> list[tuple[int, int]]:
    """Contiguous [start, end) windows of equal length; the last takes the remainder."""
    width = n_frames // n_windows
    bounds = [(i * width, (i + 1) * width) for i in range(n_windows)]
    bounds[-1] = (bounds[-1][0], n_frames)
    return bounds


def frame_kernel(window: np.ndarray) -> np.ndarray:
    """Linear kernel Z^T Z / D over frames of a channel-standardized D x w window."""
    mean = window.mean(axis=1, keepdims=True)
    std = window.std(axis=1, keepdims=True)
    safe_std = np.where(std > 0, std, 1.0)
    z = np.where(std > 0, (window - mean) / safe_std, 0.0)
    return z.T @ z / window.shape[0]


def quantize(matrix: np.ndarray, levels: int) -> np.ndarray:
    """Uniform bins over [min, max] mapped to gray levels 1..levels."""
    low, high = float(matrix.min()), float(matrix.max())
    if high == low:
        return np.ones(matrix.shape, dtype=np.int64)
    scaled = np.floor((matrix - low) / (high - low) * levels).astype(np.int64) + 1
    return np.clip(scaled, 1, levels)


def glcm(image: np.ndarray, levels: int, offset: tuple[int, int]) -> np.ndarray:
    """Symmetric, normalized co-occurrence matrix of a 1-based gray image."""
    d_row, d_col = offset
    angle = np.arctan2(d_row, d_col)
    distance = max(abs(d_row), abs(d_col))
    counts = graycomatrix(
        (image - 1).astype(np.uint8),
        distances=[distance],
        angles=[angle],
        levels=levels,
        symmetric=True,
        normed=True,
    )
    return counts[:, :, 0, 0].astype(np.float64)


def haralick_stats(P: np.ndarray, stats: tuple[str, ...] = GLCM_STATS) -> np.ndarray:
    """Selected Haralick statistics of a normalized GLCM."""
    levels = P.shape[0]
    i, j = np.meshgrid(np.arange(1, levels + 1), np.arange(1, levels + 1), indexing="ij")
    px = P.sum(axis=1)
    py = P.sum(axis=0)
    r = np.arange(1, levels + 1)
    mux = np.sum(r * px)
    muy = np.sum(r * py)
    sigmax = np.sqrt(np.sum((r - mux) ** 2 * px))
    sigmay = np.sqrt(np.sum((r - muy) ** 2 * py))

    values = {}
    values["contrast"] = np.sum((i - j) ** 2 * P)
    if sigmax > 0 and sigmay > 0:
        values["correlation"] = np.sum((i - mux) * (j - muy) * P) / (sigmax * sigmay)
    else:
        values["correlation"] = 0.0
    values["energy"] = np.sum(P**2)
    values["homogeneity"] = np.sum(P / (1.0 + (i - j) ** 2))
    nonzero = P[P > 0]
    values["entropy"] = -np.sum(nonzero * np.log(nonzero))
    return np.array([values[name] for name in stats], dtype=np.float64)


def window_texture(window: np.ndarray, params: SmtParams) -> np.ndarray:
    """Statistics for every offset of one window, offset-major."""
    image = quantize(frame_kernel(window), params.gray_levels)
    return np.concatenate(
        [haralick_stats(glcm(image, params.gray_levels, o), params.stats) for o in params.offsets]
    )


def smt_features(series: KinematicSeries, params: SmtParams, trial_id: str = "") -> FeatureVector:
    """Per-window texture statistics concatenated in window order."""
    if series.n_frames < 2 * params.n_windows:
        raise TooFewFrames(
            f"SMT with {params.n_windows} windows needs at least {2 * params.n_windows} frames",
            frames=series.n_frames,
            trial=trial_id,
        )
    blocks = [
        window_texture(series.values[:, start:end], params)
        for start, end in window_bounds(series.n_frames, params.n_windows)
    ]
    provenance = (trial_id, params_hash(params.to_dict()))
    return FeatureVector(FeatureFamily.SMT, np.concatenate(blocks), provenance)

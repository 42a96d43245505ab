"""Principal component analysis fitted on training features only."""

import logging
from dataclasses import dataclass

import numpy as np

from skillseries.core.errors import DegenerateInput, DimMismatch, MalformedRow

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Mean, k orthonormal component rows and their explained variances."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    requested_k: int = 0
    note: str = ""

    @property
    def k(self) -> int:
        return int(self.components.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.mean.size)


def pca_fit(X: np.ndarray, k: int) -> PcaModel:
    """Fit PCA on the n x p training matrix, clamping k to min(k, n - 1, p)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        rows = X.shape[0] if X.ndim else 0
        raise DegenerateInput("PCA needs at least 2 training rows", rows=rows)
    n, p = X.shape
    effective_k = max(1, min(k, n - 1, p))
    note = ""
    if effective_k != k:
        note = f"k clamped from {k} to {effective_k} (n={n}, p={p})"
        logger.warning(f"PCA {note}")

    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    components = vt[:effective_k].copy()

    # Largest-magnitude entry of every component is non-negative
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(effective_k), pivots])
    signs[signs == 0] = 1.0
    components *= signs[:, None]

    explained_variance = s[:effective_k] ** 2 / (n - 1)
    return PcaModel(mean, components, explained_variance, k, note)


def _check_dims(model: PcaModel, x: np.ndarray) -> None:
    if x.shape[-1] != model.n_features:
        raise DimMismatch(
            f"Expected {model.n_features} features, got {x.shape[-1]}",
            expected=model.n_features,
            got=x.shape[-1],
        )


def pca_transform(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """Project one vector (or rows of a matrix) onto the components."""
    x = np.asarray(x, dtype=np.float64)
    _check_dims(model, x)
    return (x - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, z: np.ndarray) -> np.ndarray:
    """Map reduced coordinates back into feature space."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != model.k:
        raise DimMismatch(f"Expected {model.k} coordinates, got {z.shape[-1]}")
    return z @ model.components + model.mean


def pca_to_text(model: PcaModel) -> str:
    """Flat text: header ``p k``, mean, components row-major, explained variance."""
    lines = [f"{model.n_features} {model.k}"]
    lines.append(" ".join(format(v, ".17g") for v in model.mean))
    lines.extend(" ".join(format(v, ".17g") for v in row) for row in model.components)
    lines.append(" ".join(format(v, ".17g") for v in model.explained_variance))
    return "\n".join(lines) + "\n"


def pca_from_text(text: str, requested_k: int = 0, note: str = "") -> PcaModel:
    lines = text.strip().splitlines()
    try:
        p, k = (int(v) for v in lines[0].split())
        mean = np.array(lines[1].split(), dtype=np.float64)
        components = np.array([row.split() for row in lines[2 : 2 + k]], dtype=np.float64)
        explained = np.array(lines[2 + k].split(), dtype=np.float64)
    except (IndexError, ValueError) as e:
        raise MalformedRow(f"Bad PCA model text: {e}", line=0) from e
    if mean.size != p or components.shape != (k, p) or explained.size != k:
        raise MalformedRow("PCA model text has inconsistent shapes", line=0)
    return PcaModel(mean, components, explained, requested_k or k, note)

"""1-nearest-neighbor skill classification."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from skillseries.core.errors import DimMismatch, EmptyModel
from skillseries.core.trial import SkillLevel


@dataclass(frozen=True, eq=False)
class KnnModel:
    train_points: np.ndarray
    train_labels: tuple[SkillLevel, ...]


def knn_fit(points: np.ndarray, labels: Sequence[SkillLevel]) -> KnnModel:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if len(labels) == 0 or points.shape[0] == 0:
        raise EmptyModel("1-NN needs at least one training point")
    if points.shape[0] != len(labels):
        raise DimMismatch(
            "Point and label counts differ", points=points.shape[0], labels=len(labels)
        )
    return KnnModel(points, tuple(labels))


def knn_classify(model: KnnModel, x: np.ndarray) -> SkillLevel:
    """Label of the closest training point; ties go to the lowest training index."""
    if model.train_points.shape[0] == 0:
        raise EmptyModel("1-NN model has no training points")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.train_points.shape[1],):
        raise DimMismatch(
            f"Expected a vector of length {model.train_points.shape[1]}", got=x.shape
        )
    distances = np.sum((model.train_points - x) ** 2, axis=1)
    return model.train_labels[int(np.argmin(distances))]

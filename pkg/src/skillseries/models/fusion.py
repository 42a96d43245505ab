"""Least-squares weighted fusion of per-family score predictions."""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from skillseries.core.config import FamilySettings
from skillseries.core.errors import DimMismatch, OrderMismatch, TooFewSurgeons
from skillseries.core.events import EventBus, ScopedBus, emit_fit
from skillseries.core.trial import ALL_TARGETS, Criterion, TrialRecord
from skillseries.features.base import FeatureFamily
from skillseries.features.extract import ExtractionParams, FeatureTable
from skillseries.models.pipeline import fit_regression_pipeline, predict_targets

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FusionModel:
    """Fusion weights w* for an ordered list of families."""

    families: tuple[FeatureFamily, ...]
    weights: np.ndarray
    training_residual: float


def fit_fusion(
    Y: np.ndarray, G: np.ndarray, families: Sequence[FeatureFamily]
) -> FusionModel:
    """Minimum-norm least-squares weights for min |Y w - G|^2 (no intercept)."""
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    G = np.asarray(G, dtype=np.float64).ravel()
    if Y.shape[0] != G.size:
        raise DimMismatch("Y and G row counts differ", rows=Y.shape[0], targets=G.size)
    if Y.shape[1] != len(families) or not families:
        raise DimMismatch(
            "Y needs one column per family", columns=Y.shape[1], families=len(families)
        )

    weights, _, _, _ = linalg.lstsq(Y, G)
    residual = float(np.sum((Y @ weights - G) ** 2))
    return FusionModel(tuple(families), weights, residual)


def fused_predict(
    model: FusionModel,
    Y_row: np.ndarray,
    families: Optional[Sequence[FeatureFamily]] = None,
) -> float:
    """Dot product of per-family predictions with w*."""
    if families is not None and tuple(families) != model.families:
        raise OrderMismatch(
            "Family order differs from the fitted fusion model",
            expected=[f.value for f in model.families],
            got=[f.value for f in families],
        )
    Y_row = np.asarray(Y_row, dtype=np.float64).ravel()
    if Y_row.size != model.weights.size:
        raise DimMismatch(f"Expected {model.weights.size} predictions, got {Y_row.size}")
    return float(Y_row @ model.weights)


def inner_louo_predictions(
    train_trials: Sequence[TrialRecord],
    table: FeatureTable,
    extraction: ExtractionParams,
    settings: FamilySettings,
    events: Optional[EventBus | ScopedBus] = None,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> np.ndarray:
    """n x 7 predictions for each training trial from pipelines that never saw its surgeon."""
    surgeons = sorted({t.surgeon_id for t in train_trials})
    if len(surgeons) < 2:
        raise TooFewSurgeons(
            "Inner leave-one-user-out needs at least 2 surgeons", surgeons=len(surgeons)
        )

    ids = [t.trial_id for t in train_trials]
    X = table.rows(ids)
    targets = np.vstack([t.labels.targets() for t in train_trials])
    owners = np.array([t.surgeon_id for t in train_trials])
    predictions = np.empty((len(train_trials), len(ALL_TARGETS)))

    for surgeon in surgeons:
        held = owners == surgeon
        inner_ids = [i for i, keep in zip(ids, ~held) if keep]
        scoped = events.scoped(inner_surgeon=surgeon) if events is not None else None
        pipeline = fit_regression_pipeline(
            X[~held],
            targets[~held],
            table.family,
            extraction,
            settings,
            inner_ids,
            events=scoped,
            tol=tol,
            max_iter=max_iter,
        )
        predictions[held] = predict_targets(pipeline, X[held])
    return predictions


def build_fusion_training_matrix(
    train_trials: Sequence[TrialRecord],
    families: Sequence[FeatureFamily],
    tables: Mapping[FeatureFamily, FeatureTable],
    extraction: ExtractionParams,
    settings: Mapping[FeatureFamily, FamilySettings],
    inner_split_seed: int,
    criterion: Criterion = Criterion.GRS,
    events: Optional[EventBus | ScopedBus] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(Y, G) for one criterion: out-of-surgeon inner predictions and ground truth.

    Inner leave-one-user-out is deterministic; ``inner_split_seed`` is only
    recorded in the log for run metadata.
    """
    logger.debug(f"Building fusion matrix (inner seed {inner_split_seed})")
    column = ALL_TARGETS.index(criterion)
    Y = np.column_stack(
        [
            inner_louo_predictions(
                train_trials, tables[family], extraction, settings[family], events
            )[:, column]
            for family in families
        ]
    )
    G = np.array([t.labels.target(criterion) for t in train_trials])
    return Y, G


def fit_fusion_models(
    inner: Mapping[FeatureFamily, np.ndarray],
    targets: np.ndarray,
    families: Sequence[FeatureFamily],
    train_ids: Sequence[str],
    events: Optional[EventBus | ScopedBus] = None,
) -> dict[Criterion, FusionModel]:
    """One fusion model per criterion from precomputed inner predictions (n x 7 each)."""
    models = {}
    for column, criterion in enumerate(ALL_TARGETS):
        Y = np.column_stack([inner[family][:, column] for family in families])
        models[criterion] = fit_fusion(Y, targets[:, column], families)
        emit_fit(
            events,
            "fusion",
            train_ids,
            families=[f.value for f in families],
            criterion=criterion.value,
        )
    return models

"""Per-family trained pipelines (PCA + SVR regressors or 1-NN) and their bundle format."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ImportError:
    import tomli as tomllib

import numpy as np
import tomli_w

from skillseries.core.config import FamilySettings
from skillseries.core.errors import DataError, MalformedRow, NoConvergence
from skillseries.core.events import EventBus, ScopedBus, emit_fit
from skillseries.core.trial import ALL_TARGETS, Criterion, SkillLevel
from skillseries.features.base import FeatureFamily, params_hash
from skillseries.features.extract import ExtractionParams
from skillseries.models.knn import KnnModel, knn_classify, knn_fit
from skillseries.models.pca import PcaModel, pca_fit, pca_from_text, pca_to_text, pca_transform
from skillseries.models.svr import LinearSvrModel, svr_fit, svr_predict
from skillseries.utils.files import atomic_write_text

logger = logging.getLogger(__name__)

BUNDLE_FORMAT = "skillseries-pipeline-1"


@dataclass(frozen=True, eq=False)
class TrainedPipeline:
    """PCA plus either per-criterion SVR regressors or a 1-NN classifier."""

    family: FeatureFamily
    extraction: ExtractionParams
    settings: FamilySettings
    pca: PcaModel
    train_ids: tuple[str, ...]
    regressors: dict[Criterion, LinearSvrModel] = field(default_factory=dict)
    classifier: Optional[KnnModel] = None

    @property
    def criteria(self) -> tuple[Criterion, ...]:
        return tuple(c for c in ALL_TARGETS if c in self.regressors)

    def params_hash(self) -> str:
        return params_hash(
            {
                "family": self.family.value,
                "extraction": self.extraction.family_params(self.family),
                "settings": self.settings.to_dict(),
            }
        )


def fit_regression_pipeline(
    X: np.ndarray,
    targets: np.ndarray,
    family: FeatureFamily,
    extraction: ExtractionParams,
    settings: FamilySettings,
    train_ids: Sequence[str],
    criteria: Sequence[Criterion] = ALL_TARGETS,
    events: Optional[EventBus | ScopedBus] = None,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> TrainedPipeline:
    """Fit PCA (k_predict) and one SVR per criterion; ``targets`` columns follow ALL_TARGETS."""
    pca = pca_fit(X, settings.k_predict)
    emit_fit(events, "pca", train_ids, family=family.value)
    Z = pca_transform(pca, X)

    regressors = {}
    for criterion in criteria:
        y = targets[:, ALL_TARGETS.index(criterion)]
        try:
            regressors[criterion] = svr_fit(Z, y, settings.C, settings.epsilon, tol, max_iter)
        except NoConvergence as e:
            raise NoConvergence(
                e.message,
                iterations=e.iterations,
                gap=e.gap,
                family=family.value,
                criterion=criterion.value,
            ) from e
        emit_fit(events, "svr", train_ids, family=family.value, criterion=criterion.value)

    return TrainedPipeline(family, extraction, settings, pca, tuple(train_ids), regressors)


def fit_classification_pipeline(
    X: np.ndarray,
    levels: Sequence[SkillLevel],
    family: FeatureFamily,
    extraction: ExtractionParams,
    settings: FamilySettings,
    train_ids: Sequence[str],
    events: Optional[EventBus | ScopedBus] = None,
) -> TrainedPipeline:
    """Fit PCA (k_classify) and a 1-NN classifier on the reduced points."""
    pca = pca_fit(X, settings.k_classify)
    emit_fit(events, "pca", train_ids, family=family.value)
    classifier = knn_fit(pca_transform(pca, X), levels)
    emit_fit(events, "knn", train_ids, family=family.value)
    return TrainedPipeline(
        family, extraction, settings, pca, tuple(train_ids), classifier=classifier
    )


def predict_targets(pipeline: TrainedPipeline, X: np.ndarray) -> np.ndarray:
    """n x len(criteria) predicted scores, columns in ``pipeline.criteria`` order."""
    Z = np.atleast_2d(pca_transform(pipeline.pca, X))
    return np.column_stack([svr_predict(pipeline.regressors[c], Z) for c in pipeline.criteria])


def predict_score(pipeline: TrainedPipeline, x: np.ndarray, criterion: Criterion) -> float:
    if criterion not in pipeline.regressors:
        raise DataError(f"Pipeline has no regressor for {criterion.value}")
    return float(svr_predict(pipeline.regressors[criterion], pca_transform(pipeline.pca, x)))


def classify_levels(pipeline: TrainedPipeline, X: np.ndarray) -> list[SkillLevel]:
    if pipeline.classifier is None:
        raise DataError(f"{pipeline.family.value} pipeline has no classifier")
    Z = np.atleast_2d(pca_transform(pipeline.pca, X))
    return [knn_classify(pipeline.classifier, z) for z in Z]


# Bundle format


def _pipeline_to_dict(pipeline: TrainedPipeline) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "format": BUNDLE_FORMAT,
        "family": pipeline.family.value,
        "params_hash": pipeline.params_hash(),
        "train_ids": list(pipeline.train_ids),
        "extraction": pipeline.extraction.to_dict(),
        "settings": pipeline.settings.to_dict(),
        "pca": {
            "requested_k": pipeline.pca.requested_k,
            "note": pipeline.pca.note,
            "text": pca_to_text(pipeline.pca),
        },
        "regressors": {
            c.value: {
                "weights": [float(w) for w in model.weights],
                "bias": model.bias,
                "C": model.C,
                "epsilon": model.epsilon,
                "iterations": model.iterations,
                "gap": model.gap,
            }
            for c, model in pipeline.regressors.items()
        },
    }
    if pipeline.classifier is not None:
        doc["classifier"] = {
            "points": [[float(v) for v in row] for row in pipeline.classifier.train_points],
            "labels": [level.value for level in pipeline.classifier.train_labels],
        }
    return doc


def save_pipeline(pipeline: TrainedPipeline, path: Path) -> None:
    """Write a pipeline bundle as TOML text."""
    atomic_write_text(path, tomli_w.dumps(_pipeline_to_dict(pipeline)))


def load_pipeline(path: Path) -> TrainedPipeline:
    """Read a bundle written by ``save_pipeline``, checking its params hash."""
    try:
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    except FileNotFoundError as e:
        raise DataError(f"Pipeline bundle not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise MalformedRow(f"Pipeline bundle is not valid TOML: {e}", line=0) from e

    if doc.get("format") != BUNDLE_FORMAT:
        raise DataError(f"Unsupported pipeline bundle format {doc.get('format')!r}")

    try:
        pca_doc = doc["pca"]
        pca = pca_from_text(
            pca_doc["text"], pca_doc.get("requested_k", 0), pca_doc.get("note", "")
        )
        regressors = {
            Criterion.parse(name): LinearSvrModel(
                np.asarray(r["weights"], dtype=np.float64),
                float(r["bias"]),
                float(r["C"]),
                float(r["epsilon"]),
                int(r.get("iterations", 0)),
                float(r.get("gap", 0.0)),
            )
            for name, r in doc.get("regressors", {}).items()
        }
        classifier = None
        if "classifier" in doc:
            classifier = KnnModel(
                np.asarray(doc["classifier"]["points"], dtype=np.float64),
                tuple(SkillLevel.parse(v) for v in doc["classifier"]["labels"]),
            )
        pipeline = TrainedPipeline(
            family=FeatureFamily.parse(doc["family"]),
            extraction=ExtractionParams.from_dict(doc["extraction"]),
            settings=FamilySettings(**doc["settings"]),
            pca=pca,
            train_ids=tuple(doc["train_ids"]),
            regressors=regressors,
            classifier=classifier,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"Incomplete pipeline bundle {path}: {e}") from e

    if pipeline.params_hash() != doc.get("params_hash"):
        raise DataError("Pipeline bundle params hash does not match its contents", path=str(path))
    return pipeline

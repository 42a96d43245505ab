"""Experiment runner: cross-validated classification, prediction and fusion."""

import logging
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from skillseries.analysis.splits import Fold, Scheme, make_splits
from skillseries.analysis.stats import SpearmanResult, spearman
from skillseries.core.config import RunConfig
from skillseries.core.errors import SkillSeriesError
from skillseries.core.events import Event, EventBus, EventType
from skillseries.core.trial import ALL_TARGETS, OSATS_CRITERIA, Criterion, Dataset, SkillLevel
from skillseries.features.base import FeatureFamily
from skillseries.features.extract import ExtractionParams, FeatureTable, build_feature_table
from skillseries.models.fusion import fit_fusion_models, inner_louo_predictions
from skillseries.models.pipeline import (
    classify_levels,
    fit_classification_pipeline,
    fit_regression_pipeline,
    predict_targets,
)
from skillseries.utils.cache import Cache

logger = logging.getLogger(__name__)


def feature_set_label(families: Sequence[FeatureFamily]) -> str:
    return "+".join(f.value for f in families)


@dataclass(frozen=True)
class PredictionCell:
    """Spearman results of one feature set for every criterion."""

    task: str
    scheme: str
    feature_set: str
    results: dict[Criterion, SpearmanResult]

    @property
    def osats_rho(self) -> float:
        """Mean rho over the six OSATS criteria, skipping degenerate ones."""
        values = [self.results[c].rho for c in OSATS_CRITERIA if not self.results[c].degenerate]
        return float(np.mean(values)) if values else float("nan")

    @property
    def osats_significant(self) -> bool:
        usable = [self.results[c] for c in OSATS_CRITERIA if not self.results[c].degenerate]
        return bool(usable) and all(r.significant for r in usable)

    @property
    def grs(self) -> SpearmanResult:
        return self.results[Criterion.GRS]


@dataclass(frozen=True)
class AccuracyCell:
    task: str
    scheme: str
    family: str
    accuracy: float
    n: int


@dataclass
class ExperimentReport:
    prediction: list[PredictionCell] = field(default_factory=list)
    classification: list[AccuracyCell] = field(default_factory=list)
    heatmaps: dict[str, np.ndarray] = field(default_factory=dict)
    # feature set -> trial id -> raw predictions in ALL_TARGETS order
    predictions: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    def cell(self, feature_set: str) -> PredictionCell:
        for cell in self.prediction:
            if cell.feature_set == feature_set:
                return cell
        raise KeyError(feature_set)

    def accuracy(self, family: str) -> float:
        for cell in self.classification:
            if cell.family == family:
                return cell.accuracy
        raise KeyError(family)


@dataclass
class FoldResult:
    fold: Fold
    levels: dict[FeatureFamily, list[SkillLevel]] = field(default_factory=dict)
    predictions: dict[str, np.ndarray] = field(default_factory=dict)
    fusion_weights: dict[str, np.ndarray] = field(default_factory=dict)
    notes: set[str] = field(default_factory=set)


class ExperimentRunner:
    """Runs every fold of a split plan and pools the test predictions."""

    def __init__(
        self,
        dataset: Dataset,
        config: RunConfig,
        events: Optional[EventBus] = None,
        cache: Optional[Cache] = None,
        tables: Optional[Mapping[FeatureFamily, FeatureTable]] = None,
    ) -> None:
        config.validate()
        self.dataset = dataset
        self.config = config
        self.events = events
        self.cache = cache if cache is not None else Cache()
        self.extraction = ExtractionParams.from_config(config)
        self.scheme = Scheme.parse(config.scheme)
        self.classify_families = [FeatureFamily.parse(f) for f in config.families]
        self.combinations = [
            tuple(FeatureFamily.parse(f) for f in combo) for combo in config.combinations
        ]
        self.tables: dict[FeatureFamily, FeatureTable] = dict(tables or {})

    @property
    def predict_families(self) -> list[FeatureFamily]:
        needed = {f for combo in self.combinations for f in combo}
        return [f for f in FeatureFamily if f in needed]

    def _settings(self, family: FeatureFamily):  # noqa: ANN202
        return self.config.family(family.value)

    def prepare_tables(self) -> None:
        """Extract every family the run needs that was not supplied."""
        threads = self.config.effective_threads()
        for family in FeatureFamily:
            if family in self.tables:
                continue
            if family in self.classify_families or family in self.predict_families:
                logger.info(f"Extracting {family.value} features for {len(self.dataset)} trials")
                self.tables[family] = build_feature_table(
                    self.dataset.trials, family, self.extraction, self.cache, threads
                )

    def run(self) -> ExperimentReport:
        self.prepare_tables()
        plan = make_splits(self.dataset, self.scheme, self.config.repeats, self.config.seed)
        logger.info(f"Running {len(plan)} {self.scheme.value} folds")

        threads = self.config.effective_threads()
        if threads > 1 and len(plan) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(self._run_fold, plan.folds))
        else:
            results = [self._run_fold(fold) for fold in plan.folds]

        report = self._summarize(results)
        if self.events is not None:
            self.events.emit(
                Event(type=EventType.EXPERIMENT_FINISHED, data={"folds": len(results)})
            )
        return report

    def _run_fold(self, fold: Fold) -> FoldResult:
        try:
            return self._fit_fold(fold)
        except SkillSeriesError as e:
            e.context.setdefault("fold", fold.index)
            raise

    def _fit_fold(self, fold: Fold) -> FoldResult:
        scoped = self.events.scoped(fold=fold.index) if self.events is not None else None
        if scoped is not None:
            scoped.emit(
                Event(
                    type=EventType.FOLD_STARTED,
                    data={"train_ids": fold.train_ids, "test_ids": fold.test_ids},
                )
            )

        train_trials = self.dataset.subset(fold.train_ids)
        targets = np.vstack([t.labels.targets() for t in train_trials])
        levels = [t.labels.self_proclaimed for t in train_trials]
        result = FoldResult(fold)

        for family in self.classify_families:
            table = self.tables[family]
            pipeline = fit_classification_pipeline(
                table.rows(fold.train_ids),
                levels,
                family,
                self.extraction,
                self._settings(family),
                fold.train_ids,
                events=scoped,
            )
            if pipeline.pca.note:
                result.notes.add(f"{family.value} classify: {pipeline.pca.note}")
            result.levels[family] = classify_levels(pipeline, table.rows(fold.test_ids))

        single: dict[FeatureFamily, np.ndarray] = {}
        for family in self.predict_families:
            table = self.tables[family]
            pipeline = fit_regression_pipeline(
                table.rows(fold.train_ids),
                targets,
                family,
                self.extraction,
                self._settings(family),
                fold.train_ids,
                events=scoped,
                tol=self.config.svr_tol,
                max_iter=self.config.svr_max_iter,
            )
            if pipeline.pca.note:
                result.notes.add(f"{family.value} predict: {pipeline.pca.note}")
            single[family] = predict_targets(pipeline, table.rows(fold.test_ids))

        inner: dict[FeatureFamily, np.ndarray] = {}
        for combo in self.combinations:
            label = feature_set_label(combo)
            if len(combo) == 1:
                result.predictions[label] = single[combo[0]]
                continue
            for family in combo:
                if family not in inner:
                    inner[family] = inner_louo_predictions(
                        train_trials,
                        self.tables[family],
                        self.extraction,
                        self._settings(family),
                        events=scoped,
                        tol=self.config.svr_tol,
                        max_iter=self.config.svr_max_iter,
                    )
            models = fit_fusion_models(inner, targets, combo, fold.train_ids, events=scoped)
            weights = np.column_stack([models[c].weights for c in ALL_TARGETS])
            fused = np.column_stack(
                [
                    np.column_stack([single[f][:, col] for f in combo]) @ weights[:, col]
                    for col in range(len(ALL_TARGETS))
                ]
            )
            result.predictions[label] = fused
            result.fusion_weights[label] = weights

        if scoped is not None:
            scoped.emit(Event(type=EventType.FOLD_FINISHED, data={"test_ids": fold.test_ids}))
        logger.info(f"Fold {fold.index} done ({len(fold.test_ids)} test trials)")
        return result

    def _summarize(self, results: list[FoldResult]) -> ExperimentReport:
        task = self.dataset.task.value if self.dataset.task else self.config.task
        scheme = self.scheme.value
        report = ExperimentReport()
        test_ids = [t for r in results for t in r.fold.test_ids]
        truth = np.vstack([self.dataset.get(t).labels.targets() for t in test_ids])
        degenerate = 0

        for combo in self.combinations:
            label = feature_set_label(combo)
            pooled = np.vstack([r.predictions[label] for r in results])
            report.predictions[label] = mean_per_trial(test_ids, pooled)
            cell_results = {}
            for col, criterion in enumerate(ALL_TARGETS):
                pooled_result = spearman(
                    pooled[:, col], truth[:, col], self.config.p_mode, seed=self.config.seed
                )
                if self.config.rho_mode == "per_fold":
                    per_fold, flagged = self._per_fold_rho(results, label, col)
                    degenerate += flagged
                    pooled_result = SpearmanResult(
                        per_fold,
                        pooled_result.p_value,
                        pooled_result.n,
                        degenerate=bool(np.isnan(per_fold)),
                    )
                elif pooled_result.degenerate:
                    degenerate += 1
                    logger.warning(f"{label} {criterion.value}: constant input, rho undefined")
                cell_results[criterion] = pooled_result
            report.prediction.append(PredictionCell(task, scheme, label, cell_results))

            if len(combo) > 1:
                report.heatmaps[label] = scale_heatmap(
                    np.mean([r.fusion_weights[label] for r in results], axis=0)
                )

        for family in self.classify_families:
            predicted = [level for r in results for level in r.levels[family]]
            actual = [self.dataset.get(t).labels.self_proclaimed for t in test_ids]
            correct = sum(p is a for p, a in zip(predicted, actual))
            report.classification.append(
                AccuracyCell(task, scheme, family.value, 100.0 * correct / len(actual), len(actual))
            )

        report.metadata = {
            "task": task,
            "scheme": scheme,
            "seed": self.config.seed,
            "repeats": self.config.repeats if self.scheme is Scheme.LOSO else 1,
            "folds": len(results),
            "rho_mode": self.config.rho_mode,
            "p_mode": self.config.p_mode,
            "degenerate_rho": degenerate,
            "n_trials": len(self.dataset),
            "params_hashes": {f.value: t.params_hash for f, t in self.tables.items()},
            "inner_split": "leave-one-user-out",
            "pca_notes": sorted({n for r in results for n in r.notes}),
        }
        return report

    def _per_fold_rho(
        self, results: list[FoldResult], label: str, col: int
    ) -> tuple[float, int]:
        """Mean of per-fold rho values, and how many folds were degenerate."""
        values = []
        flagged = 0
        for r in results:
            truth = np.array([self.dataset.get(t).labels.targets()[col] for t in r.fold.test_ids])
            fold_result = spearman(r.predictions[label][:, col], truth)
            if fold_result.degenerate:
                flagged += 1
                logger.warning(f"Fold {r.fold.index}: degenerate rho for {label}, excluded")
            else:
                values.append(fold_result.rho)
        return (float(np.mean(values)) if values else float("nan")), flagged


def mean_per_trial(trial_ids: Sequence[str], rows: np.ndarray) -> dict[str, np.ndarray]:
    """Average the rows predicted for each trial over its test appearances."""
    grouped: dict[str, list[np.ndarray]] = {}
    for trial_id, row in zip(trial_ids, rows):
        grouped.setdefault(trial_id, []).append(row)
    return {t: np.mean(values, axis=0) for t, values in grouped.items()}


def scale_heatmap(weights: np.ndarray) -> np.ndarray:
    """Min-max scale each criterion column to [0, 1]; a constant column maps to 1."""
    weights = np.asarray(weights, dtype=np.float64)
    low = weights.min(axis=0)
    span = weights.max(axis=0) - low
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (weights - low) / safe, 1.0)


def run_experiment(
    dataset: Dataset,
    config: RunConfig,
    events: Optional[EventBus] = None,
    cache: Optional[Cache] = None,
    tables: Optional[Mapping[FeatureFamily, FeatureTable]] = None,
) -> ExperimentReport:
    """Cross-validate every configured family and combination on one task's dataset."""
    return ExperimentRunner(dataset, config, events, cache, tables).run()

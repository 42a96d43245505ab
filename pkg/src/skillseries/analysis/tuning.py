"""Grid search for PCA component counts and SVR C on training data only."""

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from skillseries.analysis.stats import spearman
from skillseries.core.config import FamilySettings, RunConfig
from skillseries.core.errors import NoConvergence, TooFewSurgeons
from skillseries.core.events import EventBus, ScopedBus
from skillseries.core.trial import ALL_TARGETS, OSATS_CRITERIA, Dataset, TrialRecord
from skillseries.features.base import FeatureFamily
from skillseries.features.extract import ExtractionParams, FeatureTable, build_feature_table
from skillseries.models.fusion import inner_louo_predictions
from skillseries.models.pipeline import classify_levels, fit_classification_pipeline
from skillseries.utils.cache import Cache

logger = logging.getLogger(__name__)

DEFAULT_K_GRID = (10, 20, 40, 50, 100, 150, 250, 1000, 3000)
DEFAULT_C_GRID = tuple(10.0**e for e in range(-7, 8))


@dataclass(frozen=True, eq=False)
class TuningResult:
    """Best settings for one family plus every score that was computed.

    ``regression_scores`` is indexed [k, C] over ``k_grid`` x ``C_grid``;
    NaN marks a cell where the solver failed or every criterion was degenerate.
    """

    family: FeatureFamily
    k_grid: tuple[int, ...]
    C_grid: tuple[float, ...]
    regression_scores: np.ndarray
    classification_scores: dict[int, float]
    best_k_predict: int
    best_C: float
    best_k_classify: int

    def apply(self, settings: FamilySettings) -> FamilySettings:
        return replace(
            settings,
            k_predict=self.best_k_predict,
            C=self.best_C,
            k_classify=self.best_k_classify,
        )


def clamp_k_grid(k_grid: Sequence[int], max_k: int) -> tuple[int, ...]:
    """Clamp every k to [1, max_k] and drop duplicates, keeping ascending order."""
    return tuple(sorted({max(1, min(int(k), max_k)) for k in k_grid}))


def _inner_train_size(trials: Sequence[TrialRecord]) -> int:
    counts: dict[str, int] = {}
    for trial in trials:
        counts[trial.surgeon_id] = counts.get(trial.surgeon_id, 0) + 1
    return len(trials) - max(counts.values())


def osats_score(predictions: np.ndarray, targets: np.ndarray) -> float:
    """Mean Spearman rho over the OSATS columns, ignoring degenerate ones."""
    values = []
    for criterion in OSATS_CRITERIA:
        col = ALL_TARGETS.index(criterion)
        result = spearman(predictions[:, col], targets[:, col])
        if not result.degenerate:
            values.append(result.rho)
    return float(np.mean(values)) if values else math.nan


def inner_louo_accuracy(
    trials: Sequence[TrialRecord],
    table: FeatureTable,
    extraction: ExtractionParams,
    settings: FamilySettings,
    events: Optional[EventBus | ScopedBus] = None,
) -> float:
    """Percent of training trials whose level 1-NN recovers without seeing their surgeon."""
    surgeons = sorted({t.surgeon_id for t in trials})
    if len(surgeons) < 2:
        raise TooFewSurgeons("Inner accuracy needs at least 2 surgeons", surgeons=len(surgeons))

    correct = 0
    for surgeon in surgeons:
        train = [t for t in trials if t.surgeon_id != surgeon]
        held = [t for t in trials if t.surgeon_id == surgeon]
        train_ids = [t.trial_id for t in train]
        pipeline = fit_classification_pipeline(
            table.rows(train_ids),
            [t.labels.self_proclaimed for t in train],
            table.family,
            extraction,
            settings,
            train_ids,
            events=events,
        )
        predicted = classify_levels(pipeline, table.rows([t.trial_id for t in held]))
        correct += sum(p is t.labels.self_proclaimed for p, t in zip(predicted, held))
    return 100.0 * correct / len(trials)


def _best_cell(scores: np.ndarray) -> Optional[tuple[int, int]]:
    if np.all(np.isnan(scores)):
        return None
    flat = int(np.nanargmax(scores))
    return divmod(flat, scores.shape[1])


def tune_family(
    trials: Sequence[TrialRecord],
    table: FeatureTable,
    extraction: ExtractionParams,
    settings: FamilySettings,
    k_grid: Sequence[int] = DEFAULT_K_GRID,
    C_grid: Sequence[float] = DEFAULT_C_GRID,
    tol: float = 1e-8,
    max_iter: int = 500,
    threads: int = 1,
    events: Optional[EventBus | ScopedBus] = None,
) -> TuningResult:
    """Score every (k, C) pair and every classification k by inner leave-one-user-out.

    Ties go to the first grid entry, i.e. the smaller k and then the smaller C.
    """
    targets = np.vstack([t.labels.targets() for t in trials])
    max_k = max(1, min(table.n_features, _inner_train_size(trials) - 1))
    ks = clamp_k_grid(k_grid, max_k)
    Cs = tuple(sorted({float(c) for c in C_grid}))
    logger.info(
        f"Tuning {table.family.value}: {len(ks)} k values x {len(Cs)} C values "
        f"on {len(trials)} trials"
    )

    def score(cell: tuple[int, float]) -> float:
        k, C = cell
        candidate = replace(settings, k_predict=k, C=C)
        try:
            predictions = inner_louo_predictions(
                trials, table, extraction, candidate, events, tol, max_iter
            )
        except NoConvergence as e:
            logger.warning(f"{table.family.value} k={k} C={C:g}: {e}; scored as NaN")
            return math.nan
        return osats_score(predictions, targets)

    cells = [(k, C) for k in ks for C in Cs]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            flat = list(pool.map(score, cells))
    else:
        flat = [score(cell) for cell in cells]
    regression = np.array(flat, dtype=np.float64).reshape(len(ks), len(Cs))

    classification = {
        k: inner_louo_accuracy(
            trials, table, extraction, replace(settings, k_classify=k), events
        )
        for k in ks
    }

    best = _best_cell(regression)
    if best is None:
        logger.warning(f"{table.family.value}: no grid cell scored; keeping configured k and C")
        best_k, best_C = settings.k_predict, settings.C
    else:
        best_k, best_C = ks[best[0]], Cs[best[1]]
    best_k_classify = max(ks, key=lambda k: (classification[k], -k))

    logger.info(
        f"{table.family.value}: k_predict={best_k} C={best_C:g} k_classify={best_k_classify}"
    )
    return TuningResult(
        family=table.family,
        k_grid=ks,
        C_grid=Cs,
        regression_scores=regression,
        classification_scores=classification,
        best_k_predict=best_k,
        best_C=best_C,
        best_k_classify=best_k_classify,
    )


def tune(
    dataset: Dataset,
    config: RunConfig,
    k_grid: Sequence[int] = DEFAULT_K_GRID,
    C_grid: Sequence[float] = DEFAULT_C_GRID,
    cache: Optional[Cache] = None,
    events: Optional[EventBus] = None,
) -> dict[FeatureFamily, TuningResult]:
    """Tune every configured family on the whole dataset, which acts as the training set."""
    config.validate()
    extraction = ExtractionParams.from_config(config)
    threads = config.effective_threads()
    results = {}
    for name in config.families:
        family = FeatureFamily.parse(name)
        table = build_feature_table(dataset.trials, family, extraction, cache, threads)
        results[family] = tune_family(
            dataset.trials,
            table,
            extraction,
            config.family(family.value),
            k_grid,
            C_grid,
            tol=config.svr_tol,
            max_iter=config.svr_max_iter,
            threads=threads,
            events=events,
        )
    return results

"""Validation splits, rank statistics, experiments, tuning and task highlights."""

from skillseries.analysis.experiment import (
    AccuracyCell,
    ExperimentReport,
    ExperimentRunner,
    PredictionCell,
    feature_set_label,
    run_experiment,
    scale_heatmap,
)
from skillseries.analysis.highlights import (
    DctBasis,
    GestureImpact,
    ImpactCurve,
    attach_gesture_overlay,
    gesture_impact_stats,
    impact_curve,
    infer_features_without_segment,
    most_variable_gesture,
)
from skillseries.analysis.splits import Fold, Scheme, SplitPlan, make_splits
from skillseries.analysis.stats import SpearmanResult, spearman
from skillseries.analysis.tuning import TuningResult, tune, tune_family

__all__ = [
    "AccuracyCell",
    "DctBasis",
    "ExperimentReport",
    "ExperimentRunner",
    "Fold",
    "GestureImpact",
    "ImpactCurve",
    "PredictionCell",
    "Scheme",
    "SpearmanResult",
    "SplitPlan",
    "TuningResult",
    "attach_gesture_overlay",
    "feature_set_label",
    "gesture_impact_stats",
    "impact_curve",
    "infer_features_without_segment",
    "make_splits",
    "most_variable_gesture",
    "run_experiment",
    "scale_heatmap",
    "spearman",
    "tune",
    "tune_family",
]

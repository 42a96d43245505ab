"""Task highlights: impact of deleting a running window on the predicted score.

For every window position the DCT features of each channel are re-inferred by
least squares from the frames outside the window, and the pipeline's score on
those features is compared with its score on the full trial.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import linalg

from skillseries.core.errors import BadParam, BadRange, PipelineFamilyMismatch, WindowTooLarge
from skillseries.core.trial import Criterion, GestureSegment, TrialRecord, gesture_number
from skillseries.features.base import FeatureFamily
from skillseries.features.frequency import dct_features, dct_matrix
from skillseries.models.pipeline import TrainedPipeline, predict_score

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DctBasis:
    """Truncated orthonormal DCT-II: forward is q x L, inverse is its L x q transpose."""

    n_frames: int
    q: int
    forward: np.ndarray

    @classmethod
    def build(cls, n_frames: int, q: int) -> "DctBasis":
        if not 1 <= q <= n_frames:
            raise BadParam(f"q must lie in [1, {n_frames}]", q=q)
        return cls(n_frames, q, dct_matrix(n_frames, q))

    @property
    def inverse(self) -> np.ndarray:
        return self.forward.T


def _check_window(basis: DctBasis, n1: int, n2: int) -> None:
    if not 0 <= n1 <= n2 <= basis.n_frames:
        raise BadRange(
            f"Window [{n1}, {n2}) outside [0, {basis.n_frames})", n1=n1, n2=n2
        )
    if basis.n_frames - (n2 - n1) < basis.q:
        raise WindowTooLarge(
            f"Removing {n2 - n1} frames leaves fewer than q={basis.q} rows",
            max_window=basis.n_frames - basis.q,
        )


def infer_block_without_segment(
    values: np.ndarray, basis: DctBasis, n1: int, n2: int
) -> np.ndarray:
    """D x q least-squares DCT coefficients of every channel using frames outside [n1, n2)."""
    _check_window(basis, n1, n2)
    keep = np.ones(basis.n_frames, dtype=bool)
    keep[n1:n2] = False
    coefficients, _, _, _ = linalg.lstsq(basis.inverse[keep], np.atleast_2d(values)[:, keep].T)
    return coefficients.T


def infer_features_without_segment(
    channel: np.ndarray, basis: DctBasis, n1: int, n2: int
) -> np.ndarray:
    """q coefficients F = (B without rows n1..n2-1)^+ (channel without entries n1..n2-1)."""
    channel = np.asarray(channel, dtype=np.float64)
    if channel.shape != (basis.n_frames,):
        raise BadParam(f"Channel must have {basis.n_frames} frames", got=channel.shape)
    return infer_block_without_segment(channel[None, :], basis, n1, n2)[0]


@dataclass(frozen=True, eq=False)
class ImpactCurve:
    """Per-window impact (baseline minus windowless prediction)."""

    trial_id: str
    criterion: Criterion
    window_length: int
    stride: int
    positions: tuple[int, ...]
    impacts: np.ndarray
    baseline_score: float
    ground_truth: Optional[float] = None
    gesture_overlay: Optional[tuple[Optional[str], ...]] = None

    @property
    def clipped_baseline(self) -> float:
        """Baseline prediction clipped to the criterion's score range."""
        return self.criterion.clip(self.baseline_score)

    def argmax_position(self) -> int:
        """Start frame of the window with the largest |impact|."""
        return self.positions[int(np.argmax(np.abs(self.impacts)))]


def impact_curve(
    trial: TrialRecord,
    pipeline: TrainedPipeline,
    criterion: Criterion,
    window_length: int = 100,
    stride: int = 25,
) -> ImpactCurve:
    """Slide a window over the trial and record psi - psi_hat at each position."""
    if pipeline.family is not FeatureFamily.DCT:
        raise PipelineFamilyMismatch(
            f"Highlights need a DCT pipeline, got {pipeline.family.value}",
            family=pipeline.family.value,
        )
    if window_length < 1 or stride < 1:
        raise BadParam(
            "window_length and stride must be >= 1", window=window_length, stride=stride
        )

    series = trial.series
    q = pipeline.extraction.dct_q
    basis = DctBasis.build(series.n_frames, q)
    if window_length > series.n_frames - q:
        raise WindowTooLarge(
            f"Window of {window_length} frames leaves fewer than q={q} frames",
            max_window=series.n_frames - q,
        )

    phi = dct_features(series, q, trial.trial_id).values
    baseline = predict_score(pipeline, phi, criterion)

    positions = tuple(range(0, series.n_frames - window_length + 1, stride))
    impacts = np.empty(len(positions))
    for i, start in enumerate(positions):
        block = infer_block_without_segment(series.values, basis, start, start + window_length)
        impacts[i] = baseline - predict_score(pipeline, block.ravel(), criterion)

    logger.debug(f"Impact curve for {trial.trial_id}: {len(positions)} windows")
    return ImpactCurve(
        trial_id=trial.trial_id,
        criterion=criterion,
        window_length=window_length,
        stride=stride,
        positions=positions,
        impacts=impacts,
        baseline_score=baseline,
        ground_truth=trial.labels.target(criterion),
    )


def dominant_gesture(
    transcript: Sequence[GestureSegment], start: int, end: int
) -> Optional[str]:
    """Gesture covering most frames of [start, end); None when uncovered frames win.

    Ties between gestures go to the lower gesture number; a gesture tied with
    the uncovered frames wins.
    """
    counts: dict[str, int] = {}
    for segment in transcript:
        overlap = min(end, segment.end_frame) - max(start, segment.start_frame)
        if overlap > 0:
            counts[segment.gesture_id] = counts.get(segment.gesture_id, 0) + overlap
    if not counts:
        return None
    best = min(counts, key=lambda g: (-counts[g], gesture_number(g)))
    uncovered = (end - start) - sum(counts.values())
    return best if counts[best] >= uncovered else None


def attach_gesture_overlay(
    curve: ImpactCurve, transcript: Sequence[GestureSegment]
) -> ImpactCurve:
    """Label every window position with its dominant gesture."""
    overlay = tuple(
        dominant_gesture(transcript, p, p + curve.window_length) for p in curve.positions
    )
    return replace(curve, gesture_overlay=overlay)


@dataclass(frozen=True)
class GestureImpact:
    gesture_id: str
    windows: int
    mean: float
    variance: float
    extreme: float  # impact with the largest magnitude


def gesture_impact_stats(curve: ImpactCurve) -> dict[str, GestureImpact]:
    """Impact summary per overlaid gesture, ordered by gesture number."""
    if curve.gesture_overlay is None:
        return {}
    grouped: dict[str, list[float]] = {}
    for gesture, impact in zip(curve.gesture_overlay, curve.impacts):
        if gesture is not None:
            grouped.setdefault(gesture, []).append(float(impact))

    result = {}
    for gesture in sorted(grouped, key=gesture_number):
        values = np.array(grouped[gesture])
        result[gesture] = GestureImpact(
            gesture_id=gesture,
            windows=values.size,
            mean=float(values.mean()),
            variance=float(values.var()),
            extreme=float(values[np.argmax(np.abs(values))]),
        )
    return result


def most_variable_gesture(summary: dict[str, GestureImpact]) -> Optional[str]:
    if not summary:
        return None
    return max(summary.values(), key=lambda s: s.variance).gesture_id

"""Rich tables for experiment reports and the files written next to them."""

import io
import json
import math
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Optional

import numpy as np
from rich.console import Console
from rich.table import Table

from skillseries.analysis.experiment import ExperimentReport, PredictionCell
from skillseries.analysis.highlights import (
    ImpactCurve,
    gesture_impact_stats,
    most_variable_gesture,
)
from skillseries.core.trial import ALL_TARGETS, GESTURE_VOCABULARY, Criterion, clip_targets
from skillseries.utils.files import atomic_write_text


def format_rho(rho: float, significant: bool) -> str:
    if math.isnan(rho):
        return "n/a"
    return f"{rho:.2f}{'*' if significant else ''}"


def format_cell(cell: PredictionCell) -> str:
    """``rho_OSATS | rho_GRS`` with a star where p < 0.05."""
    osats = format_rho(cell.osats_rho, cell.osats_significant)
    return f"{osats} | {format_rho(cell.grs.rho, cell.grs.significant)}"


def _column(report: ExperimentReport) -> str:
    return f"{report.metadata.get('task', '?')} {report.metadata.get('scheme', '?')}"


def _ordered(values: Sequence[str]) -> list[str]:
    seen: list[str] = []
    for value in values:
        if value not in seen:
            seen.append(value)
    return seen


def classification_table(reports: Sequence[ExperimentReport]) -> Table:
    """Accuracy (%) per family, one column per task and scheme."""
    table = Table(title="Self-proclaimed skill classification (%)", show_lines=False)
    table.add_column("Features", style="cyan")
    for report in reports:
        table.add_column(_column(report), justify="right")

    families = _ordered([c.family for r in reports for c in r.classification])
    for family in families:
        row = [family]
        for report in reports:
            try:
                row.append(f"{report.accuracy(family):.1f}")
            except KeyError:
                row.append("-")
        table.add_row(*row)
    return table


def prediction_table(reports: Sequence[ExperimentReport]) -> Table:
    table = Table(title="Score prediction: rho OSATS | rho GRS (* p < 0.05)")
    table.add_column("Features", style="cyan")
    for report in reports:
        table.add_column(_column(report), justify="center")

    labels = _ordered([c.feature_set for r in reports for c in r.prediction])
    for label in labels:
        row = [label]
        for report in reports:
            try:
                row.append(format_cell(report.cell(label)))
            except KeyError:
                row.append("-")
        table.add_row(*row)
    return table


def predictions_table(report: ExperimentReport) -> Table:
    """Mean GRS prediction per trial, clipped to the GRS range."""
    low, high = Criterion.GRS.score_range
    grs = ALL_TARGETS.index(Criterion.GRS)
    table = Table(title=f"{_column(report)}: predicted GRS, clipped to {low}-{high}")
    table.add_column("Trial", style="cyan")
    labels = list(report.predictions)
    for label in labels:
        table.add_column(label, justify="right")

    trial_ids = sorted({t for by_trial in report.predictions.values() for t in by_trial})
    for trial_id in trial_ids:
        row = [trial_id]
        for label in labels:
            values = report.predictions[label].get(trial_id)
            row.append("-" if values is None else f"{Criterion.GRS.clip(values[grs]):.1f}")
        table.add_row(*row)
    return table


def _nanmean(values: Sequence[float]) -> float:
    finite = [v for v in values if not math.isnan(v)]
    return float(np.mean(finite)) if finite else math.nan


def task_average(reports: Sequence[ExperimentReport]) -> dict[str, dict[str, tuple[float, float]]]:
    """scheme -> feature set -> (mean OSATS rho, mean GRS rho) over tasks."""
    grouped: dict[str, dict[str, list[tuple[float, float]]]] = {}
    for report in reports:
        scheme = report.metadata.get("scheme", "?")
        for cell in report.prediction:
            grouped.setdefault(scheme, {}).setdefault(cell.feature_set, []).append(
                (cell.osats_rho, cell.grs.rho)
            )
    return {
        scheme: {
            label: (_nanmean([v[0] for v in values]), _nanmean([v[1] for v in values]))
            for label, values in by_label.items()
        }
        for scheme, by_label in grouped.items()
    }


def averaged_table(reports: Sequence[ExperimentReport]) -> Table:
    averages = task_average(reports)
    table = Table(title="Averaged over tasks: rho OSATS | rho GRS")
    table.add_column("Features", style="cyan")
    for scheme in averages:
        table.add_column(scheme, justify="center")

    labels = _ordered([label for by_label in averages.values() for label in by_label])
    for label in labels:
        row = [label]
        for by_label in averages.values():
            if label in by_label:
                osats, grs = by_label[label]
                row.append(f"{format_rho(osats, False)} | {format_rho(grs, False)}")
            else:
                row.append("-")
        table.add_row(*row)
    return table


def render_reports(console: Console, reports: Sequence[ExperimentReport]) -> None:
    if any(r.classification for r in reports):
        console.print(classification_table(reports))
    if any(r.prediction for r in reports):
        console.print(prediction_table(reports))
    for report in reports:
        if report.predictions:
            console.print(predictions_table(report))
    if len({r.metadata.get("task") for r in reports}) > 1:
        console.print(averaged_table(reports))


# Files


def _finite_or_none(value: float) -> Optional[float]:
    return None if math.isnan(value) else float(value)


def report_to_dict(report: ExperimentReport) -> dict[str, Any]:
    """JSON-ready document; undefined rho and p values become null."""
    target_names = [c.value for c in ALL_TARGETS]
    return {
        "metadata": report.metadata,
        "classification": [
            {
                "task": c.task,
                "scheme": c.scheme,
                "family": c.family,
                "accuracy": c.accuracy,
                "n": c.n,
            }
            for c in report.classification
        ],
        "prediction": [
            {
                "task": cell.task,
                "scheme": cell.scheme,
                "feature_set": cell.feature_set,
                "osats_rho": _finite_or_none(cell.osats_rho),
                "osats_significant": cell.osats_significant,
                "criteria": {
                    criterion.value: {
                        "rho": _finite_or_none(result.rho),
                        "p_value": _finite_or_none(result.p_value),
                        "n": result.n,
                        "degenerate": result.degenerate,
                    }
                    for criterion, result in cell.results.items()
                },
            }
            for cell in report.prediction
        ],
        "heatmaps": {label: matrix.tolist() for label, matrix in report.heatmaps.items()},
        "predictions": {
            label: {
                trial_id: {
                    "raw": dict(zip(target_names, map(float, values))),
                    "clipped": dict(zip(target_names, clip_targets(values).tolist())),
                }
                for trial_id, values in by_trial.items()
            }
            for label, by_trial in report.predictions.items()
        },
    }


def heatmap_csv(label: str, matrix: np.ndarray) -> str:
    """Rows are the families of ``label``, columns the seven criteria."""
    buffer = io.StringIO()
    buffer.write("family," + ",".join(c.value for c in ALL_TARGETS) + "\n")
    for family, row in zip(label.split("+"), np.atleast_2d(matrix)):
        buffer.write(family + "," + ",".join(f"{v:.6f}" for v in row) + "\n")
    return buffer.getvalue()


TEXT_WIDTH = 160


def report_text(report: ExperimentReport) -> str:
    """The console tables of one report as plain text."""
    buffer = io.StringIO()
    render_reports(Console(file=buffer, width=TEXT_WIDTH, no_color=True, highlight=False), [report])
    return buffer.getvalue()


def write_report(out_dir: Path, report: ExperimentReport) -> list[Path]:
    """Write the JSON report, its tables as text and one heatmap CSV per fused feature set."""
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{report.metadata.get('task', 'task')}_{report.metadata.get('scheme', 'scheme')}"
    written = []

    path = out_dir / f"report_{stem}.json"
    atomic_write_text(path, json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")
    written.append(path)

    path = out_dir / f"report_{stem}.txt"
    atomic_write_text(path, report_text(report))
    written.append(path)

    for label, matrix in report.heatmaps.items():
        path = out_dir / f"heatmap_{stem}_{label.replace('+', '-')}.csv"
        atomic_write_text(path, heatmap_csv(label, matrix))
        written.append(path)
    return written


def write_averaged(out_dir: Path, reports: Sequence[ExperimentReport]) -> Path:
    averages = task_average(reports)
    document = {
        scheme: {
            label: {"osats_rho": _finite_or_none(o), "grs_rho": _finite_or_none(g)}
            for label, (o, g) in by_label.items()
        }
        for scheme, by_label in averages.items()
    }
    path = out_dir / "report_average.json"
    atomic_write_text(path, json.dumps(document, indent=2, sort_keys=True) + "\n")
    return path


# Highlights


def curve_csv(curve: ImpactCurve) -> str:
    """``position,impact,gesture``; the gesture column is empty without a transcript."""
    buffer = io.StringIO()
    buffer.write("position,impact,gesture\n")
    overlay = curve.gesture_overlay or (None,) * len(curve.positions)
    for position, impact, gesture in zip(curve.positions, curve.impacts, overlay):
        buffer.write(f"{position},{impact:.12g},{gesture or ''}\n")
    return buffer.getvalue()


def curve_to_dict(curve: ImpactCurve) -> dict[str, Any]:
    summary = gesture_impact_stats(curve)
    return {
        "trial_id": curve.trial_id,
        "criterion": curve.criterion.value,
        "baseline_score": curve.baseline_score,
        "clipped_baseline_score": curve.clipped_baseline,
        "ground_truth": curve.ground_truth,
        "window_length": curve.window_length,
        "stride": curve.stride,
        "windows": len(curve.positions),
        "argmax_position": curve.argmax_position() if curve.positions else None,
        "gestures": {
            g: {
                "description": GESTURE_VOCABULARY.get(g, ""),
                "windows": s.windows,
                "mean": s.mean,
                "variance": s.variance,
                "extreme": s.extreme,
            }
            for g, s in summary.items()
        },
        "most_variable_gesture": most_variable_gesture(summary),
    }


def write_curve(out_dir: Path, curve: ImpactCurve) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"highlights_{curve.trial_id}_{curve.criterion.value}"
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}.json"
    atomic_write_text(csv_path, curve_csv(curve))
    atomic_write_text(json_path, json.dumps(curve_to_dict(curve), indent=2) + "\n")
    return csv_path, json_path


def render_curve(console: Console, curve: ImpactCurve) -> None:
    """Baseline score, strongest window and the per-gesture impact summary."""
    console.print(
        f"[bold]{curve.trial_id}[/bold] {curve.criterion.value}: "
        f"predicted {curve.baseline_score:.2f} (clipped {curve.clipped_baseline:.2f})"
        + (f", annotated {curve.ground_truth:.2f}" if curve.ground_truth is not None else "")
    )
    if curve.positions:
        start = curve.argmax_position()
        console.print(f"Largest impact at frames {start}-{start + curve.window_length - 1}")

    summary = gesture_impact_stats(curve)
    if not summary:
        return
    table = Table(title="Impact by gesture")
    table.add_column("Gesture", style="cyan")
    table.add_column("Description")
    table.add_column("Windows", justify="right")
    table.add_column("Mean", justify="right")
    table.add_column("Variance", justify="right")
    for gesture, stats in summary.items():
        table.add_row(
            gesture,
            GESTURE_VOCABULARY.get(gesture, ""),
            str(stats.windows),
            f"{stats.mean:.4f}",
            f"{stats.variance:.4f}",
        )
    console.print(table)

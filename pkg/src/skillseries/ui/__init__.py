"""Console tables and report files."""

from skillseries.ui.report import (
    classification_table,
    prediction_table,
    render_curve,
    render_reports,
    write_curve,
    write_report,
)

__all__ = [
    "classification_table",
    "prediction_table",
    "render_curve",
    "render_reports",
    "write_curve",
    "write_report",
]

"""Readers and writers for the JIGSAWS-style on-disk layout.

Layout per task::

    <root>/<Task_Dir>/meta.csv
    <root>/<Task_Dir>/kinematics/AllGestures/<trial_id>.txt   (or kinematics/<trial_id>.txt)
    <root>/<Task_Dir>/transcriptions/<trial_id>.txt           (optional)
"""

import csv
import io
import logging
import math
from collections.abc import Iterable
from pathlib import Path
from typing import Optional, TextIO

import numpy as np

from skillseries.core.errors import (
    BadParam,
    EmptyFile,
    LabelInconsistency,
    MalformedRow,
    MissingMeta,
    UnknownGesture,
)
from skillseries.core.trial import (
    OSATS_CRITERIA,
    Criterion,
    Dataset,
    GestureSegment,
    KinematicSeries,
    SkillLabels,
    SkillLevel,
    Task,
    TrialRecord,
    validate_transcript,
)
from skillseries.utils.files import atomic_write_text

logger = logging.getLogger(__name__)

META_FILE = "meta.csv"
META_HEADER = ["surgeon", "task", "trial", "level", "RT", "TM", "FO", "OP", "QP", "SH", "GRS"]


def load_kinematics(
    reader: TextIO,
    expected_dims: int,
    frame_rate: float = 30.0,
    channel_names: Optional[tuple[str, ...]] = None,
) -> KinematicSeries:
    """Parse one frame per line into a D x L series (rows are channels)."""
    frames: list[list[float]] = []
    for line_no, line in enumerate(reader, start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != expected_dims:
            raise MalformedRow(
                f"Expected {expected_dims} columns, found {len(tokens)}", line=line_no
            )
        try:
            row = [float(token) for token in tokens]
        except ValueError as e:
            raise MalformedRow(f"Non-numeric token: {e}", line=line_no) from e
        if not all(math.isfinite(value) for value in row):
            raise MalformedRow("Non-finite value", line=line_no)
        frames.append(row)

    if len(frames) < 2:
        raise EmptyFile(f"Kinematics need at least 2 frames, found {len(frames)}")

    values = np.asarray(frames, dtype=np.float64).T
    return KinematicSeries(values, frame_rate, channel_names or ())


def dump_kinematics(series: KinematicSeries) -> str:
    """Serialize a series in the kinematics text format (12 significant digits)."""
    buffer = io.StringIO()
    np.savetxt(buffer, series.values.T, fmt="%.12g", delimiter="    ")
    return buffer.getvalue()


def load_transcript(reader: TextIO) -> tuple[GestureSegment, ...]:
    """Parse ``<start> <end> <Gk>`` lines (1-based, inclusive) into sorted segments."""
    segments = []
    for line_no, line in enumerate(reader, start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 3:
            raise MalformedRow(
                f"Expected '<start> <end> <gesture>', got {line.strip()!r}", line=line_no
            )
        try:
            start, end = int(tokens[0]), int(tokens[1])
        except ValueError as e:
            raise MalformedRow(f"Non-integer frame index: {e}", line=line_no) from e
        if start < 1 or end < start:
            raise MalformedRow(f"Bad frame range {start}..{end}", line=line_no)
        try:
            segments.append(GestureSegment(tokens[2], start - 1, end))
        except UnknownGesture as e:
            raise UnknownGesture(e.message, line=line_no) from e
    return validate_transcript(segments)


def dump_transcript(segments: Iterable[GestureSegment]) -> str:
    return "".join(f"{s.start_frame + 1} {s.end_frame} {s.gesture_id}\n" for s in segments)


def _kinematics_path(task_dir: Path, trial_id: str) -> Optional[Path]:
    for candidate in (
        task_dir / "kinematics" / "AllGestures" / f"{trial_id}.txt",
        task_dir / "kinematics" / f"{trial_id}.txt",
    ):
        if candidate.is_file():
            return candidate
    return None


def _infer_dims(path: Path) -> int:
    with open(path, encoding="utf-8") as f:
        for line in f:
            tokens = line.split()
            if tokens:
                return len(tokens)
    raise EmptyFile(f"Kinematics file is empty: {path}")


def _parse_meta_row(row: dict[str, str], line_no: int) -> tuple[str, Task, int, SkillLabels]:
    try:
        surgeon = row["surgeon"].strip()
        task = Task.parse(row["task"])
        trial_index = int(row["trial"])
        level = SkillLevel.parse(row["level"])
        osats = {c: int(row[c.value]) for c in OSATS_CRITERIA}
        grs = int(row[Criterion.GRS.value])
    except (KeyError, ValueError, TypeError, BadParam) as e:
        raise MalformedRow(f"Bad meta row: {e}", line=line_no) from e
    try:
        labels = SkillLabels(level, osats, grs)
    except LabelInconsistency as e:
        raise LabelInconsistency(e.message, line=line_no, surgeon=surgeon, trial=trial_index) from e
    return surgeon, task, trial_index, labels


def load_dataset(root: Path, task: Task, expected_dims: Optional[int] = None) -> Dataset:
    """Load every trial listed in a task's meta file."""
    root = Path(root)
    task_dir = root / task.dir_name
    meta_path = task_dir / META_FILE
    if not meta_path.is_file():
        raise MissingMeta(f"Meta file not found: {meta_path}")

    with open(meta_path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))

    trials = []
    for line_no, row in enumerate(rows, start=2):
        surgeon, row_task, trial_index, labels = _parse_meta_row(row, line_no)
        if row_task is not task:
            logger.debug(f"Skipping meta line {line_no}: task {row_task.value}")
            continue

        trial_id = f"{task.dir_name}_{surgeon}{trial_index:03d}"
        kin_path = _kinematics_path(task_dir, trial_id)
        if kin_path is None:
            raise MissingMeta(f"No kinematics file for trial {trial_id}", trial=trial_id)

        dims = expected_dims or _infer_dims(kin_path)
        with open(kin_path, encoding="utf-8") as f:
            try:
                series = load_kinematics(f, dims)
            except (MalformedRow, EmptyFile) as e:
                raise type(e)(e.message, **{**e.context, "trial": trial_id}) from e

        transcript = None
        transcript_path = task_dir / "transcriptions" / f"{trial_id}.txt"
        if transcript_path.is_file():
            with open(transcript_path, encoding="utf-8") as f:
                transcript = load_transcript(f)

        trials.append(TrialRecord(surgeon, task, trial_index, series, labels, transcript))

    logger.info(f"Loaded {len(trials)} {task.value} trials from {task_dir}")
    return Dataset(tuple(trials), task)


def write_dataset(root: Path, dataset: Dataset) -> Path:
    """Write trials in the on-disk layout understood by ``load_dataset``."""
    root = Path(root)
    by_task: dict[Task, list[TrialRecord]] = {}
    for trial in dataset:
        by_task.setdefault(trial.task, []).append(trial)

    for task, trials in by_task.items():
        task_dir = root / task.dir_name
        meta = io.StringIO()
        writer = csv.writer(meta, lineterminator="\n")
        writer.writerow(META_HEADER)
        for trial in trials:
            labels = trial.labels
            writer.writerow(
                [trial.surgeon_id, task.value, trial.trial_index, labels.self_proclaimed.value]
                + [labels.osats[c] for c in OSATS_CRITERIA]
                + [labels.grs]
            )
            atomic_write_text(
                task_dir / "kinematics" / "AllGestures" / f"{trial.trial_id}.txt",
                dump_kinematics(trial.series),
            )
            if trial.transcript is not None:
                atomic_write_text(
                    task_dir / "transcriptions" / f"{trial.trial_id}.txt",
                    dump_transcript(trial.transcript),
                )
        atomic_write_text(task_dir / META_FILE, meta.getvalue())

    return root

"""Trial data model: kinematic series, skill labels, gesture transcripts."""

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from skillseries.core.errors import (
    BadParam,
    DuplicateTrial,
    LabelInconsistency,
    OverlapError,
    TranscriptOutOfRange,
    UnknownGesture,
)


class Task(Enum):
    """Robotic surgical tasks."""

    SUTURING = "Suturing"
    KNOT_TYING = "KnotTying"
    NEEDLE_PASSING = "NeedlePassing"

    @property
    def dir_name(self) -> str:
        """Directory (and file prefix) used by the dataset layout."""
        return {
            Task.SUTURING: "Suturing",
            Task.KNOT_TYING: "Knot_Tying",
            Task.NEEDLE_PASSING: "Needle_Passing",
        }[self]

    @classmethod
    def parse(cls, text: str) -> "Task":
        """Parse a task name, accepting the enum value or the directory name."""
        key = text.strip().replace("_", "").replace(" ", "").lower()
        for task in cls:
            if task.value.lower() == key:
                return task
        raise BadParam(f"Unknown task: {text!r}")


class SkillLevel(Enum):
    """Self-proclaimed skill level (hours on the robot)."""

    NOVICE = "Novice"  # < 10 h
    INTERMEDIATE = "Intermediate"  # 10-100 h
    EXPERT = "Expert"  # > 100 h

    @classmethod
    def parse(cls, text: str) -> "SkillLevel":
        """Parse a level from its name or single-letter code (N/I/E)."""
        key = text.strip().lower()
        for level in cls:
            if key in (level.value.lower(), level.value[0].lower()):
                return level
        raise LabelInconsistency(f"Unknown skill level: {text!r}")


class Criterion(Enum):
    """Modified-OSATS criteria plus the global rating score."""

    RT = "RT"  # respect for tissue
    TM = "TM"  # suture/needle handling
    FO = "FO"  # time and motion
    OP = "OP"  # flow of operation
    QP = "QP"  # overall performance
    SH = "SH"  # quality of final product
    GRS = "GRS"

    @classmethod
    def parse(cls, text: str) -> "Criterion":
        try:
            return cls(text.strip().upper())
        except ValueError as e:
            raise BadParam(f"Unknown criterion: {text!r}") from e

    @property
    def score_range(self) -> tuple[int, int]:
        """Annotated scores lie in 1..5 per OSATS criterion and 6..30 for the GRS."""
        return (6, 30) if self is Criterion.GRS else (1, 5)

    def clip(self, value: float) -> float:
        low, high = self.score_range
        return float(min(max(value, low), high))


OSATS_CRITERIA: tuple[Criterion, ...] = (
    Criterion.RT,
    Criterion.TM,
    Criterion.FO,
    Criterion.OP,
    Criterion.QP,
    Criterion.SH,
)
ALL_TARGETS: tuple[Criterion, ...] = OSATS_CRITERIA + (Criterion.GRS,)


def clip_targets(row: Sequence[float]) -> np.ndarray:
    """Clip a row of predictions in ALL_TARGETS order to each score range."""
    return np.array([c.clip(v) for c, v in zip(ALL_TARGETS, row)], dtype=np.float64)

GESTURE_VOCABULARY: dict[str, str] = {
    "G1": "Reaching for needle with right hand",
    "G2": "Positioning needle",
    "G3": "Pushing needle through tissue",
    "G4": "Transferring needle from left to right",
    "G5": "Moving to center with needle in grip",
    "G6": "Pulling suture with left hand",
    "G7": "Pulling suture with right hand",
    "G8": "Orienting needle",
    "G9": "Using right hand to help tighten suture",
    "G10": "Loosening more suture",
    "G11": "Dropping suture at end and moving to end points",
    "G12": "Reaching for needle with left hand",
    "G13": "Making C loop around right hand",
    "G14": "Reaching for suture with right hand",
    "G15": "Pulling suture with both hands",
}


def gesture_number(gesture_id: str) -> int:
    """Numeric part of a gesture id (G3 -> 3), used for ordering."""
    return int(gesture_id[1:])


def _jigsaws_channel_names() -> list[str]:
    names = []
    for arm in ("MTML", "MTMR", "PSM1", "PSM2"):
        names += [f"{arm}_pos_{axis}" for axis in "xyz"]
        names += [f"{arm}_rot_{i}{j}" for i in range(3) for j in range(3)]
        names += [f"{arm}_vel_{axis}" for axis in "xyz"]
        names += [f"{arm}_angvel_{axis}" for axis in "xyz"]
        names.append(f"{arm}_gripper")
    return names


JIGSAWS_CHANNELS: tuple[str, ...] = tuple(_jigsaws_channel_names())


def default_channel_names(n_channels: int) -> tuple[str, ...]:
    """JIGSAWS names for the 76-column layout, generic names otherwise."""
    if n_channels == len(JIGSAWS_CHANNELS):
        return JIGSAWS_CHANNELS
    return tuple(f"ch{i}" for i in range(n_channels))


@dataclass(frozen=True, eq=False)
class KinematicSeries:
    """A D x L recording: rows are channels, columns are frames."""

    values: np.ndarray
    frame_rate: float = 30.0
    channel_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise BadParam("Kinematic series must be a 2-D matrix", ndim=values.ndim)
        n_channels, n_frames = values.shape
        if n_channels < 1 or n_frames < 2:
            raise BadParam("Kinematic series needs D >= 1 and L >= 2", shape=values.shape)
        if not np.all(np.isfinite(values)):
            raise BadParam("Kinematic series contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

        names = tuple(self.channel_names) or default_channel_names(n_channels)
        if len(names) != n_channels:
            raise BadParam(
                "channel_names length does not match D", names=len(names), channels=n_channels
            )
        object.__setattr__(self, "channel_names", names)

    @property
    def n_channels(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_frames(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True)
class SkillLabels:
    """Ground-truth skill annotations for one trial."""

    self_proclaimed: SkillLevel
    osats: Mapping[Criterion, int]
    grs: int

    def __post_init__(self) -> None:
        osats = {Criterion(c) if not isinstance(c, Criterion) else c: int(v)
                 for c, v in self.osats.items()}
        if set(osats) != set(OSATS_CRITERIA):
            raise LabelInconsistency(
                "OSATS scores must cover exactly RT, TM, FO, OP, QP, SH",
                got=sorted(c.value for c in osats),
            )
        for criterion, value in osats.items():
            low, high = criterion.score_range
            if not low <= value <= high:
                raise LabelInconsistency(
                    f"OSATS {criterion.value} score {value} outside [1, 5]"
                )
        total = sum(osats.values())
        if int(self.grs) != total:
            raise LabelInconsistency(
                f"GRS {self.grs} does not equal the OSATS sum {total}"
            )
        object.__setattr__(self, "osats", {c: osats[c] for c in OSATS_CRITERIA})
        object.__setattr__(self, "grs", int(self.grs))

    def __hash__(self) -> int:
        return hash((self.self_proclaimed, tuple(self.osats.values()), self.grs))

    def target(self, criterion: Criterion) -> float:
        """Score for one OSATS criterion or the GRS."""
        if criterion is Criterion.GRS:
            return float(self.grs)
        return float(self.osats[criterion])

    def targets(self) -> np.ndarray:
        """All seven targets in ALL_TARGETS order."""
        return np.array([self.target(c) for c in ALL_TARGETS], dtype=np.float64)


@dataclass(frozen=True)
class GestureSegment:
    """A labelled gesture occupying frames [start_frame, end_frame)."""

    gesture_id: str
    start_frame: int
    end_frame: int

    def __post_init__(self) -> None:
        if self.gesture_id not in GESTURE_VOCABULARY:
            raise UnknownGesture(f"Unknown gesture id {self.gesture_id!r}")
        if not 0 <= self.start_frame < self.end_frame:
            raise BadParam(
                "Gesture segment needs 0 <= start < end",
                start=self.start_frame,
                end=self.end_frame,
            )


def validate_transcript(segments: Iterable[GestureSegment]) -> tuple[GestureSegment, ...]:
    """Sort segments by start frame and reject overlaps."""
    ordered = tuple(sorted(segments, key=lambda s: (s.start_frame, s.end_frame)))
    for previous, current in zip(ordered, ordered[1:]):
        if current.start_frame < previous.end_frame:
            raise OverlapError(
                f"Gesture {current.gesture_id} at frame {current.start_frame + 1} overlaps "
                f"{previous.gesture_id} ending at frame {previous.end_frame}"
            )
    return ordered


@dataclass(frozen=True)
class TrialRecord:
    """One recorded trial with its identity, labels and optional transcript."""

    surgeon_id: str
    task: Task
    trial_index: int
    series: KinematicSeries
    labels: SkillLabels
    transcript: Optional[tuple[GestureSegment, ...]] = None

    def __post_init__(self) -> None:
        if self.transcript is not None:
            object.__setattr__(self, "transcript", validate_transcript(self.transcript))
            last = self.transcript[-1] if self.transcript else None
            if last is not None and last.end_frame > self.series.n_frames:
                raise TranscriptOutOfRange(
                    f"Transcript of {self.trial_id} runs past frame {self.series.n_frames}",
                    trial=self.trial_id,
                    end=last.end_frame,
                    n_frames=self.series.n_frames,
                )

    @property
    def trial_id(self) -> str:
        return f"{self.task.dir_name}_{self.surgeon_id}{self.trial_index:03d}"

    @property
    def key(self) -> tuple[str, Task, int]:
        return (self.surgeon_id, self.task, self.trial_index)


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of trials with unique identities."""

    trials: tuple[TrialRecord, ...]
    task: Optional[Task] = None
    _index: dict[str, int] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        trials = tuple(self.trials)
        object.__setattr__(self, "trials", trials)
        seen: set[tuple[str, Task, int]] = set()
        for position, trial in enumerate(trials):
            if trial.key in seen:
                raise DuplicateTrial(f"Duplicate trial {trial.trial_id}")
            seen.add(trial.key)
            self._index[trial.trial_id] = position

    def __len__(self) -> int:
        return len(self.trials)

    def __iter__(self):  # noqa: ANN204
        return iter(self.trials)

    @property
    def trial_ids(self) -> tuple[str, ...]:
        return tuple(t.trial_id for t in self.trials)

    def surgeons(self) -> list[str]:
        """Surgeon ids in sorted order."""
        return sorted({t.surgeon_id for t in self.trials})

    def by_surgeon(self) -> dict[str, list[TrialRecord]]:
        groups: dict[str, list[TrialRecord]] = {s: [] for s in self.surgeons()}
        for trial in self.trials:
            groups[trial.surgeon_id].append(trial)
        return groups

    def get(self, trial_id: str) -> TrialRecord:
        try:
            return self.trials[self._index[trial_id]]
        except KeyError as e:
            raise BadParam(f"Unknown trial id {trial_id!r}") from e

    def subset(self, trial_ids: Sequence[str]) -> list[TrialRecord]:
        """Trials for the given ids, in the given order."""
        return [self.get(trial_id) for trial_id in trial_ids]

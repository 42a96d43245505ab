"""Shared fixtures."""

from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np
import pytest

from skillseries.core.config import RunConfig, default_family_settings
from skillseries.core.events import Event, EventBus, EventType
from skillseries.core.trial import (
    Criterion,
    Dataset,
    KinematicSeries,
    SkillLabels,
    SkillLevel,
    Task,
    TrialRecord,
)
from skillseries.data.loaders import write_dataset
from skillseries.data.synth import synth_dataset


def make_labels(score: int = 3, level: SkillLevel = SkillLevel.INTERMEDIATE) -> SkillLabels:
    osats = {c: score for c in Criterion if c is not Criterion.GRS}
    return SkillLabels(level, osats, 6 * score)


def make_trial(
    values: np.ndarray,
    surgeon_id: str = "B",
    trial_index: int = 1,
    score: int = 3,
    task: Task = Task.SUTURING,
    transcript: Optional[tuple] = None,
) -> TrialRecord:
    return TrialRecord(
        surgeon_id, task, trial_index, KinematicSeries(values), make_labels(score), transcript
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset() -> Dataset:
    """Four surgeons, three short trials each."""
    return synth_dataset(
        n_surgeons=4,
        trials_per_surgeon=3,
        skills=[0.0, 0.35, 0.7, 1.0],
        n_channels=3,
        n_frames=200,
        seed=7,
    )


@pytest.fixture
def dataset_root(tmp_path: Path, small_dataset: Dataset) -> Path:
    """``small_dataset`` written to disk."""
    write_dataset(tmp_path / "data", small_dataset)
    return tmp_path / "data"


@pytest.fixture
def fast_config() -> RunConfig:
    """Small models so cross-validation on ``small_dataset`` runs quickly."""
    settings = {
        name: replace(s, k_classify=3, k_predict=3, C=1.0, q=10)
        for name, s in default_family_settings().items()
    }
    settings["SMT"] = replace(settings["SMT"], n_windows=4)
    return RunConfig(
        repeats=2,
        threads=1,
        family_settings=settings,
        window_length=40,
        stride=20,
    )


@pytest.fixture
def event_log() -> tuple[EventBus, list[Event]]:
    """A bus and the list of FIT events it received."""
    bus = EventBus()
    received: list[Event] = []
    bus.subscribe(EventType.FIT, received.append)
    return bus, received

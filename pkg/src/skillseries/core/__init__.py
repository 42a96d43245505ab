"""Core components: trial model, errors, configuration and event hooks."""

from skillseries.core.config import ConfigManager, FamilySettings, RunConfig
from skillseries.core.errors import DataError, NumericError, SkillSeriesError
from skillseries.core.events import Event, EventBus, EventType
from skillseries.core.trial import (
    ALL_TARGETS,
    OSATS_CRITERIA,
    Criterion,
    Dataset,
    GestureSegment,
    KinematicSeries,
    SkillLabels,
    SkillLevel,
    Task,
    TrialRecord,
)

__all__ = [
    "ALL_TARGETS",
    "OSATS_CRITERIA",
    "ConfigManager",
    "Criterion",
    "DataError",
    "Dataset",
    "Event",
    "EventBus",
    "EventType",
    "FamilySettings",
    "GestureSegment",
    "KinematicSeries",
    "NumericError",
    "RunConfig",
    "SkillLabels",
    "SkillLevel",
    "SkillSeriesError",
    "Task",
    "TrialRecord",
]

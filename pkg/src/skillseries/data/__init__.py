"""Dataset loading and synthetic trial generation."""

from skillseries.data.loaders import (
    dump_kinematics,
    load_dataset,
    load_kinematics,
    load_transcript,
    write_dataset,
)
from skillseries.data.synth import synth_dataset, synth_trial

__all__ = [
    "dump_kinematics",
    "load_dataset",
    "load_kinematics",
    "load_transcript",
    "synth_dataset",
    "synth_trial",
    "write_dataset",
]

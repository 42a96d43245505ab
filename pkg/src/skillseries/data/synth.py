"""Skill-graded synthetic trials.

Each channel is a sum of three low-frequency sinusoids whose amplitude grows
with skill, plus white noise scaled by ``1 - skill``. Frequencies, phases and
base amplitudes are fixed per task template, so trials of one task differ only
in skill and noise.
"""

import logging
from typing import Optional

import numpy as np

from skillseries.core.errors import BadParam
from skillseries.core.trial import (
    OSATS_CRITERIA,
    Dataset,
    GestureSegment,
    KinematicSeries,
    SkillLabels,
    SkillLevel,
    Task,
    TrialRecord,
)

logger = logging.getLogger(__name__)

N_SINUSOIDS = 3
MIN_FRAMES = 200
NOISE_SIGMA = 1.0

# Per-criterion offsets keep the six OSATS scores from moving in lockstep
CRITERION_OFFSETS = (0.0, 0.2, -0.2, 0.1, -0.1, 0.3)

_TASK_SEEDS = {Task.SUTURING: 101, Task.KNOT_TYING: 202, Task.NEEDLE_PASSING: 303}

# Typical gesture orders, cycled to fill a synthetic transcript
_GESTURE_CYCLES = {
    Task.SUTURING: ("G1", "G5", "G8", "G2", "G3", "G6", "G4", "G2", "G3", "G6", "G11"),
    Task.KNOT_TYING: ("G1", "G12", "G13", "G14", "G15", "G11"),
    Task.NEEDLE_PASSING: ("G1", "G2", "G3", "G6", "G4", "G8", "G11"),
}


def template_for(task: Task, n_channels: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(cycles, phases, amplitudes), each n_channels x 3, fixed for a task."""
    rng = np.random.default_rng(_TASK_SEEDS[task])
    cycles = rng.integers(1, 13, size=(n_channels, N_SINUSOIDS))
    phases = rng.uniform(0.0, 2 * np.pi, size=(n_channels, N_SINUSOIDS))
    amplitudes = rng.uniform(1.0, 2.0, size=(n_channels, N_SINUSOIDS))
    return cycles, phases, amplitudes


def skill_level(skill: float) -> SkillLevel:
    """Three-way quantization of a skill value in [0, 1]."""
    if skill < 1 / 3:
        return SkillLevel.NOVICE
    if skill < 2 / 3:
        return SkillLevel.INTERMEDIATE
    return SkillLevel.EXPERT


def skill_labels(skill: float, level: Optional[SkillLevel] = None) -> SkillLabels:
    """Monotone quantization of skill into OSATS scores; GRS is their sum."""
    osats = {
        criterion: int(np.clip(1 + np.floor(skill * 4 + 0.5 + offset), 1, 5))
        for criterion, offset in zip(OSATS_CRITERIA, CRITERION_OFFSETS)
    }
    return SkillLabels(level or skill_level(skill), osats, sum(osats.values()))


def clean_signal(task: Task, n_channels: int, n_frames: int, skill: float) -> np.ndarray:
    """Noise-free part of a trial: D x L sum of sinusoids."""
    cycles, phases, amplitudes = template_for(task, n_channels)
    n = np.arange(n_frames)
    scale = 0.5 + 0.5 * skill
    angles = 2 * np.pi * cycles[:, :, None] * n[None, None, :] / n_frames + phases[:, :, None]
    return scale * np.sum(amplitudes[:, :, None] * np.sin(angles), axis=1)


def synth_transcript(task: Task, n_frames: int, seed: int) -> tuple[GestureSegment, ...]:
    """Contiguous gesture segments covering the whole trial."""
    rng = np.random.default_rng([seed, 1])
    cycle = _GESTURE_CYCLES[task]
    segments = []
    start = 0
    i = 0
    while start < n_frames:
        length = int(rng.integers(40, 160))
        end = min(start + length, n_frames)
        segments.append(GestureSegment(cycle[i % len(cycle)], start, end))
        start = end
        i += 1
    return tuple(segments)


def synth_trial(
    skill: float,
    task_template: Task,
    n_channels: int,
    n_frames: int,
    seed: int,
    surgeon_id: str = "B",
    trial_index: int = 1,
    noise_sigma: float = NOISE_SIGMA,
    level: Optional[SkillLevel] = None,
) -> TrialRecord:
    """Generate one deterministic trial for the given skill."""
    if not 0.0 <= skill <= 1.0:
        raise BadParam("skill must lie in [0, 1]", skill=skill)
    if n_frames < MIN_FRAMES:
        raise BadParam(f"n_frames must be >= {MIN_FRAMES}", n_frames=n_frames)
    if n_channels < 1:
        raise BadParam("n_channels must be >= 1", n_channels=n_channels)
    if noise_sigma < 0:
        raise BadParam("noise_sigma must be >= 0", noise_sigma=noise_sigma)

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((n_channels, n_frames))
    values = clean_signal(task_template, n_channels, n_frames, skill)
    values = values + noise_sigma * (1.0 - skill) * noise

    return TrialRecord(
        surgeon_id=surgeon_id,
        task=task_template,
        trial_index=trial_index,
        series=KinematicSeries(values),
        labels=skill_labels(skill, level),
        transcript=synth_transcript(task_template, n_frames, seed),
    )


def surgeon_ids(n_surgeons: int) -> list[str]:
    """B, C, D, ... as in the JIGSAWS naming; S<n> beyond the alphabet."""
    return [chr(ord("B") + i) if i < 25 else f"S{i}" for i in range(n_surgeons)]


def synth_dataset(
    n_surgeons: int = 8,
    trials_per_surgeon: int = 5,
    skills: Optional[list[float]] = None,
    task: Task = Task.SUTURING,
    n_channels: int = 6,
    n_frames: int = 1000,
    seed: int = 0,
    jitter: float = 0.02,
    noise_sigma: float = NOISE_SIGMA,
) -> Dataset:
    """A dataset of surgeons with fixed base skills and small per-trial jitter."""
    if skills is None:
        skills = list(np.linspace(0.0, 1.0, n_surgeons))
    if len(skills) != n_surgeons:
        raise BadParam("skills must list one value per surgeon", skills=len(skills))

    rng = np.random.default_rng(seed)
    trials = []
    for s, (surgeon, base_skill) in enumerate(zip(surgeon_ids(n_surgeons), skills)):
        level = skill_level(base_skill)
        for t in range(trials_per_surgeon):
            skill = float(np.clip(base_skill + rng.uniform(-jitter, jitter), 0.0, 1.0))
            trials.append(
                synth_trial(
                    skill,
                    task,
                    n_channels,
                    n_frames,
                    seed=seed * 10_000 + s * 100 + t,
                    surgeon_id=surgeon,
                    trial_index=t + 1,
                    noise_sigma=noise_sigma,
                    level=level,
                )
            )

    logger.debug(f"Generated {len(trials)} synthetic {task.value} trials")
    return Dataset(tuple(trials), task)

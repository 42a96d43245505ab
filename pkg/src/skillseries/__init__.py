"""SkillSeries - surgical skill assessment from robot kinematic time series."""

__version__ = "0.1.0"
__author__ = "SkillSeries Contributors"

from skillseries.analysis.experiment import ExperimentReport, run_experiment
from skillseries.core.config import RunConfig
from skillseries.data.loaders import load_dataset

__all__ = ["ExperimentReport", "RunConfig", "load_dataset", "run_experiment"]

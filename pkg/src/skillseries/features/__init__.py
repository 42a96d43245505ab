"""Holistic feature extraction: SMT, DCT, DFT and ApEn."""

from skillseries.features.base import FeatureFamily, FeatureVector
from skillseries.features.entropy import ApEnParams, RadiusMode, apen, apen_features
from skillseries.features.extract import (
    ExtractionParams,
    FeatureTable,
    build_feature_table,
    extract_features,
    read_feature_csv,
    write_feature_csv,
)
from skillseries.features.frequency import dct_features, dft_features
from skillseries.features.texture import SmtParams, smt_features

__all__ = [
    "ApEnParams",
    "ExtractionParams",
    "FeatureFamily",
    "FeatureTable",
    "FeatureVector",
    "RadiusMode",
    "SmtParams",
    "apen",
    "apen_features",
    "build_feature_table",
    "dct_features",
    "dft_features",
    "extract_features",
    "read_feature_csv",
    "smt_features",
    "write_feature_csv",
]

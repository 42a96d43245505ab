"""Family dispatch, feature tables and the feature CSV format."""

import csv
import hashlib
import io
import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from skillseries.core.config import RunConfig
from skillseries.core.errors import BadParam, DataError, MalformedRow
from skillseries.core.trial import KinematicSeries, TrialRecord
from skillseries.features.base import FeatureFamily, FeatureVector, params_hash
from skillseries.features.entropy import ApEnParams, RadiusMode, apen_features
from skillseries.features.frequency import dct_features, dft_features
from skillseries.features.texture import SmtParams, smt_features
from skillseries.utils.cache import Cache, make_key
from skillseries.utils.files import atomic_write_text

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractionParams:
    """Extraction settings for all four families."""

    dct_q: int = 50
    dft_q: int = 50
    apen: ApEnParams = field(default_factory=ApEnParams)
    smt: SmtParams = field(default_factory=SmtParams)

    @classmethod
    def from_config(cls, config: RunConfig) -> "ExtractionParams":
        apen_settings = config.family("ApEn")
        smt_settings = config.family("SMT")
        return cls(
            dct_q=config.family("DCT").q,
            dft_q=config.family("DFT").q,
            apen=ApEnParams(
                m=apen_settings.m,
                tau=apen_settings.tau,
                radii=tuple(apen_settings.radii),
                radius_mode=RadiusMode(apen_settings.radius_mode),
            ),
            smt=SmtParams(n_windows=smt_settings.n_windows, gray_levels=smt_settings.gray_levels),
        )

    def family_params(self, family: FeatureFamily) -> dict[str, Any]:
        """The settings that affect one family's output."""
        if family is FeatureFamily.DCT:
            return {"q": self.dct_q}
        if family is FeatureFamily.DFT:
            return {"q": self.dft_q}
        if family is FeatureFamily.APEN:
            return self.apen.to_dict()
        return self.smt.to_dict()

    def hash_for(self, family: FeatureFamily) -> str:
        return params_hash(self.family_params(family))

    def to_dict(self) -> dict[str, Any]:
        return {
            "dct_q": self.dct_q,
            "dft_q": self.dft_q,
            "apen": self.apen.to_dict(),
            "smt": self.smt.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExtractionParams":
        apen = data.get("apen", {})
        smt = data.get("smt", {})
        return cls(
            dct_q=int(data.get("dct_q", 50)),
            dft_q=int(data.get("dft_q", 50)),
            apen=ApEnParams(
                m=int(apen.get("m", 1)),
                tau=int(apen.get("tau", 1)),
                radii=tuple(apen.get("radii", ApEnParams().radii)),
                radius_mode=RadiusMode(apen.get("radius_mode", "StdScaled")),
            ),
            smt=SmtParams(
                n_windows=int(smt.get("n_windows", 10)),
                gray_levels=int(smt.get("gray_levels", 8)),
                offsets=tuple(tuple(o) for o in smt.get("offsets", SmtParams().offsets)),
                stats=tuple(smt.get("stats", SmtParams().stats)),
            ),
        )


def extract_features(
    series: KinematicSeries,
    family: FeatureFamily,
    params: ExtractionParams,
    trial_id: str = "",
) -> FeatureVector:
    """Extract one family's feature vector."""
    if family is FeatureFamily.DCT:
        return dct_features(series, params.dct_q, trial_id)
    if family is FeatureFamily.DFT:
        return dft_features(series, params.dft_q, trial_id)
    if family is FeatureFamily.APEN:
        return apen_features(series, params.apen, trial_id)
    return smt_features(series, params.smt, trial_id)


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Feature vectors of one family for many trials (one row per trial)."""

    family: FeatureFamily
    trial_ids: tuple[str, ...]
    matrix: np.ndarray
    params_hash: str = ""

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(self.trial_ids):
            raise BadParam(
                "Feature matrix must have one row per trial",
                rows=matrix.shape[0] if matrix.ndim else 0,
                trials=len(self.trial_ids),
            )
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.trial_ids)})

    @property
    def n_features(self) -> int:
        return int(self.matrix.shape[1])

    def row(self, trial_id: str) -> np.ndarray:
        return self.matrix[self._position(trial_id)]

    def rows(self, trial_ids: Sequence[str]) -> np.ndarray:
        """Rows for the given ids, in the given order."""
        return self.matrix[[self._position(t) for t in trial_ids]]

    def _position(self, trial_id: str) -> int:
        try:
            return self._index[trial_id]  # type: ignore[attr-defined]
        except KeyError as e:
            raise DataError(
                f"No {self.family.value} features for trial {trial_id!r}", trial=trial_id
            ) from e


def build_feature_table(
    trials: Sequence[TrialRecord],
    family: FeatureFamily,
    params: ExtractionParams,
    cache: Optional[Cache] = None,
    threads: int = 1,
) -> FeatureTable:
    """Extract ``family`` for every trial, reusing cached vectors."""
    family_hash = params.hash_for(family)

    def compute(trial: TrialRecord) -> np.ndarray:
        def run() -> np.ndarray:
            return extract_features(trial.series, family, params, trial.trial_id).values

        if cache is None:
            return run()
        digest = hashlib.md5(trial.series.values.tobytes()).hexdigest()
        key = make_key(trial.trial_id, family.value, family_hash, digest)
        return cache.get_or_compute(key, run)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(compute, trials))
    else:
        rows = [compute(trial) for trial in trials]

    logger.debug(f"Extracted {family.value} for {len(rows)} trials")
    return FeatureTable(
        family,
        tuple(t.trial_id for t in trials),
        np.vstack(rows) if rows else np.empty((0, 0)),
        family_hash,
    )


def write_feature_csv(path: Path, table: FeatureTable) -> None:
    """One trial per row; header ``trial_id,<family>_0,<family>_1,...``."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    prefix = table.family.value
    writer.writerow(["trial_id"] + [f"{prefix}_{i}" for i in range(table.n_features)])
    for trial_id, row in zip(table.trial_ids, table.matrix):
        writer.writerow([trial_id] + [format(float(v), ".17g") for v in row])
    atomic_write_text(path, buffer.getvalue())


def read_feature_csv(path: Path) -> FeatureTable:
    """Load a table written by ``write_feature_csv``."""
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or not rows[0] or rows[0][0] != "trial_id":
        raise MalformedRow("Feature CSV needs a 'trial_id,...' header", line=1)

    header = rows[0]
    family = FeatureFamily.parse(header[1].rsplit("_", 1)[0]) if len(header) > 1 else None
    if family is None:
        raise MalformedRow("Feature CSV header names no feature columns", line=1)

    ids = []
    values = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise MalformedRow(
                f"Expected {len(header)} fields, found {len(row)}", line=line_no
            )
        try:
            values.append([float(v) for v in row[1:]])
        except ValueError as e:
            raise MalformedRow(f"Non-numeric feature: {e}", line=line_no) from e
        ids.append(row[0])

    matrix = np.asarray(values, dtype=np.float64).reshape(len(ids), len(header) - 1)
    return FeatureTable(family, tuple(ids), matrix)

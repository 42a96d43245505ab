"""Feature family tags and the extracted feature container."""

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

from skillseries.core.errors import BadParam


class FeatureFamily(Enum):
    """Holistic feature families."""

    SMT = "SMT"
    DCT = "DCT"
    DFT = "DFT"
    APEN = "ApEn"

    @classmethod
    def parse(cls, text: str) -> "FeatureFamily":
        key = text.strip().lower()
        for family in cls:
            if family.value.lower() == key:
                return family
        raise BadParam(f"Unknown feature family: {text!r}")


def params_hash(params: dict[str, Any]) -> str:
    """Short stable hash of a parameter document."""
    text = json.dumps(params, sort_keys=True, default=str)
    return hashlib.md5(text.encode()).hexdigest()[:12]


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """One extracted feature vector with its provenance (trial id, params hash)."""

    family: FeatureFamily
    values: np.ndarray
    provenance: tuple[str, str] = ("", "")

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(values)):
            raise BadParam(
                f"{self.family.value} features contain non-finite values",
                trial=self.provenance[0],
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)

"""Spearman rank correlation with t-approximation or permutation p-values."""

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from skillseries.core.errors import BadParam, DegenerateInput, DimMismatch

logger = logging.getLogger(__name__)

EXHAUSTIVE_MAX_N = 8
N_RESAMPLES = 9999


@dataclass(frozen=True)
class SpearmanResult:
    """rho and p; a constant input yields NaN for both with ``degenerate`` set."""

    rho: float
    p_value: float
    n: int
    degenerate: bool = False

    @property
    def significant(self) -> bool:
        return not self.degenerate and self.p_value < 0.05


def _centered_ranks(values: np.ndarray) -> np.ndarray:
    ranks = stats.rankdata(values, method="average")
    return ranks - ranks.mean()


def _t_p_value(rho: float, n: int) -> float:
    if n < 3:
        return math.nan
    if abs(rho) >= 1.0:
        return 0.0
    t = rho * math.sqrt((n - 2) / (1 - rho**2))
    return float(stats.t.sf(abs(t), n - 2) * 2)


def _permutation_p_value(ra: np.ndarray, rb: np.ndarray, rho: float, seed: int) -> float:
    n = ra.size
    norm = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if n <= EXHAUSTIVE_MAX_N:
        permuted = np.array(list(itertools.permutations(rb)))
        null = permuted @ ra / norm
        return float(np.mean(np.abs(null) >= abs(rho) - 1e-12))

    rng = np.random.default_rng(seed)
    permuted = np.array([rng.permutation(rb) for _ in range(N_RESAMPLES)])
    null = permuted @ ra / norm
    hits = int(np.sum(np.abs(null) >= abs(rho) - 1e-12))
    return (hits + 1) / (N_RESAMPLES + 1)


def spearman(
    a: np.ndarray,
    b: np.ndarray,
    p_mode: str = "t",
    strict: bool = False,
    seed: int = 0,
) -> SpearmanResult:
    """Pearson correlation of average ranks, with a two-sided p-value."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise DimMismatch("Spearman inputs differ in length", a=a.size, b=b.size)
    if p_mode not in ("t", "permutation"):
        raise BadParam(f"Unknown p_mode {p_mode!r}")
    n = a.size
    if n < 2:
        raise DegenerateInput("Spearman needs at least 2 pairs", n=n)

    ra = _centered_ranks(a)
    rb = _centered_ranks(b)
    denominator = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denominator == 0.0:
        if strict:
            raise DegenerateInput("Spearman rho is undefined for a constant input", n=n)
        return SpearmanResult(math.nan, math.nan, n, degenerate=True)

    rho = float(np.clip(ra @ rb / denominator, -1.0, 1.0))
    if p_mode == "permutation":
        p_value = _permutation_p_value(ra, rb, rho, seed)
    else:
        p_value = _t_p_value(rho, n)
    return SpearmanResult(rho, p_value, n)

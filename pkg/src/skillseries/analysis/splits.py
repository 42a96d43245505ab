"""Leave-one-supertrial-out and leave-one-user-out validation splits."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from skillseries.core.errors import BadParam, InsufficientTrials
from skillseries.core.trial import Dataset


class Scheme(Enum):
    LOSO = "LOSO"  # one random trial per surgeon held out, repeated
    LOUO = "LOUO"  # all trials of one surgeon held out

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        try:
            return cls(text.strip().upper())
        except ValueError as e:
            raise BadParam(f"Unknown validation scheme: {text!r}") from e


@dataclass(frozen=True)
class Fold:
    index: int
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]


@dataclass(frozen=True)
class SplitPlan:
    scheme: Scheme
    folds: tuple[Fold, ...]
    repeats: int
    seed: int

    def __len__(self) -> int:
        return len(self.folds)


def make_splits(dataset: Dataset, scheme: Scheme, repeats: int = 20, seed: int = 0) -> SplitPlan:
    """Deterministic folds; LOSO fold r draws from default_rng(seed + r)."""
    groups = dataset.by_surgeon()
    if not groups:
        raise InsufficientTrials("Dataset has no trials")

    folds = []
    if scheme is Scheme.LOUO:
        if len(groups) < 2:
            raise InsufficientTrials(
                "LOUO needs at least 2 surgeons", surgeons=len(groups)
            )
        for index, (surgeon, trials) in enumerate(groups.items()):
            test = tuple(t.trial_id for t in trials)
            train = tuple(t.trial_id for t in dataset if t.surgeon_id != surgeon)
            folds.append(Fold(index, train, test))
        return SplitPlan(scheme, tuple(folds), 1, seed)

    if repeats < 1:
        raise BadParam("repeats must be >= 1", repeats=repeats)
    short = [s for s, trials in groups.items() if len(trials) < 2]
    if short:
        raise InsufficientTrials(
            "LOSO needs at least 2 trials per surgeon", surgeons=",".join(short)
        )
    for index in range(repeats):
        rng = np.random.default_rng(seed + index)
        test_set = {
            trials[int(rng.integers(len(trials)))].trial_id for trials in groups.values()
        }
        test = tuple(t for t in dataset.trial_ids if t in test_set)
        train = tuple(t for t in dataset.trial_ids if t not in test_set)
        folds.append(Fold(index, train, test))
    return SplitPlan(scheme, tuple(folds), repeats, seed)

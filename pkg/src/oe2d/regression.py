"""Square-loss regression oracles over finite contextual classes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ContextualFunctionClass
from .errors import DomainError, StructuralError


@dataclass
class Dataset:
    """Logged (context, action, reward) triples as three aligned arrays."""

    contexts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    actions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    rewards: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.contexts = np.asarray(self.contexts, dtype=np.int64).reshape(-1)
        self.actions = np.asarray(self.actions, dtype=np.int64).reshape(-1)
        self.rewards = np.asarray(self.rewards, dtype=float).reshape(-1)
        if not (self.contexts.size == self.actions.size == self.rewards.size):
            raise StructuralError("dataset columns have different lengths")
        if np.any(self.rewards < 0) or np.any(self.rewards > 1):
            raise StructuralError("rewards must lie in [0, 1]")

    @classmethod
    def from_records(cls, records) -> "Dataset":
        records = list(records)
        if not records:
            return cls()
        x, a, r = zip(*records)
        return cls(np.array(x), np.array(a), np.array(r, dtype=float))

    def __len__(self) -> int:
        return self.rewards.size

    def window(self, start: int, stop: int) -> "Dataset":
        return Dataset(self.contexts[start:stop], self.actions[start:stop], self.rewards[start:stop])

    def validate(self, F: ContextualFunctionClass) -> None:
        if len(self) and (self.contexts.max() >= F.n_contexts or self.actions.max() >= F.n_actions):
            raise StructuralError("dataset indices fall outside the function class")
        if len(self) and (self.contexts.min() < 0 or self.actions.min() < 0):
            raise StructuralError("negative dataset index")


def square_losses(F: ContextualFunctionClass, data: Dataset) -> np.ndarray:
    """Summed square loss of every function on the dataset."""
    if len(data) == 0:
        return np.zeros(F.n_functions)
    data.validate(F)
    pred = F.values[:, data.contexts, data.actions]  # (nf, n)
    return ((pred - data.rewards[None, :]) ** 2).sum(axis=1)


def erm_offline(F: ContextualFunctionClass, data: Dataset) -> int:
    """Smallest function id with minimal empirical square loss."""
    return int(np.argmin(square_losses(F, data)))


def online_ftl(F: ContextualFunctionClass, data_prefix: Dataset) -> int:
    """Follow-the-leader: ERM on the whole prefix (id 0 when it is empty)."""
    return erm_offline(F, data_prefix)


class RunningLoss:
    """Incremental per-function losses so FTL costs O(|F|) per round."""

    def __init__(self, F: ContextualFunctionClass):
        self.F = F
        self.loss = np.zeros(F.n_functions)

    def leader(self) -> int:
        return int(np.argmin(self.loss))

    def update(self, x: int, a: int, r: float) -> None:
        self.loss += (self.F.values[:, x, a] - r) ** 2


def regoff_bound(class_size: int, n: int, delta: float, horizon: int = 1) -> float:
    """ln(|F| * horizon / delta) / n."""
    if n < 1:
        raise DomainError(f"sample count must be at least 1, got {n}")
    if class_size < 1 or horizon < 1:
        raise DomainError("class size and horizon must be positive")
    if not 0 < delta <= 1:
        raise DomainError(f"delta must lie in (0, 1], got {delta}")
    return math.log(class_size * horizon / delta) / n

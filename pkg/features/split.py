"""
Deterministic train / validation / test partitioning.
"""
import math
from dataclasses import dataclass
from typing import Any, Dict, Sequence

import numpy as np

from core.constants import DEFAULT_SPLIT_RATIOS


@dataclass(frozen=True, eq=False)
class SplitIndices:
    """
    Disjoint row-index sets covering all rows.

    Attributes:
        train: Training row indices
        validation: Validation row indices
        test: Test row indices
        seed: Seed the permutation was drawn with
    """
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    seed: int

    @property
    def sizes(self):
        return len(self.train), len(self.validation), len(self.test)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SplitIndices):
            return NotImplemented
        return (self.seed == other.seed
                and np.array_equal(self.train, other.train)
                and np.array_equal(self.validation, other.validation)
                and np.array_equal(self.test, other.test))

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "train": [int(i) for i in self.train],
            "validation": [int(i) for i in self.validation],
            "test": [int(i) for i in self.test],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SplitIndices":
        """Create SplitIndices from dictionary."""
        return cls(
            train=np.asarray(data["train"], dtype=np.int64),
            validation=np.asarray(data["validation"], dtype=np.int64),
            test=np.asarray(data["test"], dtype=np.int64),
            seed=int(data["seed"]),
        )


def split(n: int, ratios: Sequence[float] = DEFAULT_SPLIT_RATIOS, seed: int = 0) -> SplitIndices:
    """
    Randomly partition n rows.

    Training gets floor(r_train * n) rows; the rest is divided between
    validation and test in proportion to their ratios, validation rounded
    down. With the default ratios and n = 93,028 this gives
    74,422 / 9,303 / 9,303.

    Args:
        n: Row count, at least 10
        ratios: (train, validation, test) fractions summing to 1
        seed: Permutation seed

    Returns:
        SplitIndices with each index list sorted ascending

    Raises:
        ValueError: If n < 10 or ratios are invalid
    """
    if n < 10:
        raise ValueError(f"split needs at least 10 rows, got {n}")
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError(f"ratios must be three non-negative fractions, got {tuple(ratios)}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")

    r_train, r_val, r_test = ratios
    n_train = math.floor(r_train * n + 1e-9)
    rest = n - n_train
    n_val = math.floor(rest * r_val / (r_val + r_test) + 1e-9) if r_val + r_test > 0 else 0

    order = np.random.default_rng(seed).permutation(n)
    return SplitIndices(
        train=np.sort(order[:n_train]),
        validation=np.sort(order[n_train:n_train + n_val]),
        test=np.sort(order[n_train + n_val:]),
        seed=int(seed),
    )

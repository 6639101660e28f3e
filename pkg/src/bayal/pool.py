from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .inference import LabeledSet


class AlreadyLabeledError(ValueError):
    pass


@dataclass
class Pool:
    """Feature matrix, oracle labels, and which points have been queried.

    ``true_labels`` is only read through :meth:`query` by the learners; the
    metrics read it directly.
    """

    features: np.ndarray
    true_labels: np.ndarray
    labeled_idx: list = field(default_factory=list)
    initial_idx: list = field(default_factory=list)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.true_labels = np.asarray(self.true_labels, dtype=int).ravel()
        if self.features.shape[0] != self.true_labels.size:
            raise ValueError("features and labels disagree on the number of points")
        self.labeled_idx = [int(i) for i in self.labeled_idx]
        self.initial_idx = [int(i) for i in self.initial_idx]
        if len(set(self.labeled_idx)) != len(self.labeled_idx):
            raise ValueError("labeled_idx contains duplicates")
        if not set(self.initial_idx) <= set(self.labeled_idx):
            raise ValueError("initial_idx must be a subset of labeled_idx")
        if any(not 0 <= i < self.N for i in self.labeled_idx):
            raise ValueError("labeled index out of range")

    @property
    def N(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def labeled_mask(self) -> np.ndarray:
        mask = np.zeros(self.N, dtype=bool)
        mask[self.labeled_idx] = True
        return mask

    def unlabeled_idx(self) -> np.ndarray:
        return np.flatnonzero(~self.labeled_mask())

    def labeled_set(self) -> LabeledSet:
        idx = np.asarray(self.labeled_idx, dtype=int)
        return LabeledSet(self.features[idx].reshape(-1, self.p), self.true_labels[idx])

    def query(self, i: int) -> int:
        """Reveal the label of point ``i`` and mark it labeled."""
        i = int(i)
        if i in self.labeled_idx:
            raise AlreadyLabeledError(f"point {i} was already queried")
        if not 0 <= i < self.N:
            raise IndexError(i)
        self.labeled_idx.append(i)
        return int(self.true_labels[i])

    def fresh(self) -> "Pool":
        """Copy with no labeled points."""
        return Pool(self.features, self.true_labels)

    def warm_start(self, indices) -> "Pool":
        """Copy whose labeled and initial sets are exactly ``indices``."""
        idx = [int(i) for i in indices]
        return Pool(self.features, self.true_labels, list(idx), list(idx))

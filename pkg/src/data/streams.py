from __future__ import annotations

from typing import List, Tuple

import numpy as np

from .synthetic import Dataset


class TaskStream:
    """
    Endless minibatches from one task's training split.

    Each stream owns its RNG: the order is reshuffled every time the split is exhausted, and a batch
    that straddles the wrap continues into the next epoch's order.
    """

    def __init__(self, dataset: Dataset, batch_size: int, seed: int, *, dtype: np.dtype = np.float32) -> None:
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        if len(dataset) < 1:
            raise ValueError("cannot stream an empty dataset")
        self.dataset = dataset
        self.batch_size = batch_size
        self.epoch = 0
        self._rng = np.random.default_rng(seed)
        self._targets = dataset.targets(dtype)
        self._inputs = dataset.inputs.astype(dtype, copy=False)
        self._order = self._rng.permutation(len(dataset))
        self._pos = 0

    def next_batch(self) -> Tuple[np.ndarray, np.ndarray]:
        picked: List[np.ndarray] = []
        need = self.batch_size
        while need > 0:
            if self._pos == len(self._order):
                self._order = self._rng.permutation(len(self.dataset))
                self._pos = 0
                self.epoch += 1
            take = min(need, len(self._order) - self._pos)
            picked.append(self._order[self._pos : self._pos + take])
            self._pos += take
            need -= take
        idx = np.concatenate(picked)
        return self._inputs[idx], self._targets[idx]

"""Ring-tagged sample sets shared by both samplers and the estimators."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass
class SampleSet:
    """Samples tagged with the chain (temperature index), step and energy ring.

    For the multicanonical sampler ``chain`` is the temperature component of
    the joint state; for the equi-energy sampler it is the ladder chain.
    Either way samples with ``chain == i`` are draws associated with
    temperature ``T_i``.
    """

    chain: np.ndarray
    step: np.ndarray
    ring: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        self.chain = np.asarray(self.chain, dtype=np.int64)
        self.step = np.asarray(self.step, dtype=np.int64)
        self.ring = np.asarray(self.ring, dtype=np.int64)
        self.x = np.asarray(self.x, dtype=float).reshape(len(self.chain), -1)

    def __len__(self):
        return len(self.chain)

    @property
    def dimension(self) -> int:
        return self.x.shape[1]

    def subset(self, mask) -> "SampleSet":
        return SampleSet(self.chain[mask], self.step[mask], self.ring[mask], self.x[mask])

    def header(self) -> list[str]:
        return ["chain", "step", "ring"] + [f"x{k}" for k in range(self.dimension)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for c, s, r, row in zip(self.chain.tolist(), self.step.tolist(),
                                    self.ring.tolist(), self.x.tolist()):
                w.writerow([c, s, r] + [repr(v) for v in row])

    @classmethod
    def from_csv(cls, path) -> "SampleSet":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3:])

    @classmethod
    def concatenate(cls, parts) -> "SampleSet":
        parts = list(parts)
        return cls(np.concatenate([p.chain for p in parts]),
                   np.concatenate([p.step for p in parts]),
                   np.concatenate([p.ring for p in parts]),
                   np.concatenate([p.x for p in parts]))

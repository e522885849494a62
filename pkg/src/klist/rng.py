"""Hierarchical, order-independent random streams.

A :class:`Seed` is a root integer plus a path of integer indices
(experiment -> cell -> trial block -> ...). Each distinct path maps to its own
Philox counter-based stream via :class:`numpy.random.SeedSequence`, so the
numbers a computation sees depend only on where it sits in the hierarchy and
never on which worker ran it or when.
"""
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Seed:
    root: int
    stream_path: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.root) <= _MASK64:
            raise ValueError(f"seed root must fit in 64 unsigned bits, got {self.root}")
        path = tuple(int(p) for p in self.stream_path)
        for p in path:
            if not 0 <= p <= _MASK64:
                raise ValueError(f"stream index out of 64-bit range: {p}")
        object.__setattr__(self, "root", int(self.root))
        object.__setattr__(self, "stream_path", path)

    def child(self, *indices):
        """Seed for a sub-stream one or more levels below this one."""
        return Seed(self.root, self.stream_path + tuple(indices))

    def generator(self):
        ss = np.random.SeedSequence(self.root, spawn_key=self.stream_path)
        return np.random.Generator(np.random.Philox(ss))


def as_seed(seed):
    """Accept a :class:`Seed` or a bare integer root."""
    if isinstance(seed, Seed):
        return seed
    return Seed(int(seed))

"""Seeded random streams.

All sampling goes through numpy's Philox-4x64 generator, a counter-based
bit generator: a (seed, counter) pair fully determines the stream, and
independent child streams come from ``SeedSequence.spawn``. Re-running with
the same seed reproduces draws bit for bit within this implementation; other
implementations can match the statistics but not the exact draws.
"""
from __future__ import annotations

import numpy as np

ALGORITHM = "philox4x64-10 (numpy.random.Philox), normals via Generator.normal"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def spawn(seed: int, n: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]

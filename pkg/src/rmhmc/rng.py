"""Deterministic, splittable random streams.

Every experiment takes a stream rather than an implicit global generator so
that threshold sweeps can be driven by identical randomness and any run can
be replayed from its seed alone.
"""

import numpy as np


class RandomStream:
    """Counter-based pseudo-randomness with explicit seed ancestry.

    Identical seeds produce identical draw sequences, and ``split`` derives
    child streams deterministically from the parent's seed material, so
    parallel chains stay independent and reproducible. Streams are not
    shared across threads; each chain owns one.
    """

    def __init__(self, seed: int, _sequence: np.random.SeedSequence | None = None):
        self.seed = seed
        self._sequence = np.random.SeedSequence(seed) if _sequence is None else _sequence
        self._generator = np.random.Generator(np.random.Philox(self._sequence))

    def split(self, n: int) -> list["RandomStream"]:
        """Spawns n independent child streams, deterministically."""
        return [RandomStream(self.seed, _sequence=child) for child in self._sequence.spawn(n)]

    def normal(self, size=None):
        return self._generator.standard_normal(size=size)

    def uniform(self, size=None):
        return self._generator.uniform(size=size)

    def gamma(self, shape: float, scale: float = 1.0, size=None):
        return self._generator.standard_gamma(shape, size=size) * scale

    def chisquare(self, df: float, size=None):
        return self._generator.chisquare(df, size=size)

    def choice(self, n: int, size: int, replace: bool = False):
        return self._generator.choice(n, size=size, replace=replace)

    def __repr__(self):
        return f"RandomStream(seed={self.seed!r})"

"""Counter-based random streams.

Every path is driven by its own Philox stream. Replication ``r`` of an
experiment with master seed ``s`` uses the seed ``derive_seed(s, r)``, so a
replication's draws never depend on how replications are scheduled.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(master_seed: int, index: int) -> int:
    """Mix a master seed and a replication index into a 64-bit seed."""
    seq = np.random.SeedSequence(int(master_seed) & _MASK64, spawn_key=(int(index),))
    hi, lo = (int(w) for w in seq.generate_state(2, np.uint32))
    return (hi << 32) | lo


def uniform_stream(seed: int) -> np.random.Generator:
    """Return a Philox-backed generator for ``seed`` (reduced modulo 2**64)."""
    return np.random.Generator(np.random.Philox(int(seed) & _MASK64))

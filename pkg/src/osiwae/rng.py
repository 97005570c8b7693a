"""Counter-based random streams for reproducible runs.

Every random draw in a run is made from a Philox generator keyed by the run
seed with the (step, role, index) triple placed in the counter block.  A
stream is therefore a pure function of (seed, step, role, index): serial and
parallel execution orders produce identical results, and resuming a run at
step t reconstructs the exact streams of every later step without carrying
generator state.
"""

from __future__ import annotations

import numpy as np

# Role codes. Each logical consumer of randomness inside one step owns a role
# so that adding draws to one consumer never shifts another's stream.
SIMULATE = 1
INIT = 2
SMOOTH = 3
GRAD_PROPOSAL = 4
GRAD_MODEL = 5
ORACLE = 6


def stream(seed: int, step: int = 0, role: int = 0, index: int = 0) -> np.random.Generator:
    """Return the generator for (seed, step, role, index).

    The low counter word is left free-running, so a single stream may draw
    up to 2**64 blocks before colliding with a sibling.
    """
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    counter = [0, np.uint64(index), np.uint64(step), np.uint64(role)]
    return np.random.Generator(np.random.Philox(key=np.uint64(seed), counter=counter))


class RunRng:
    """Factory bound to one run seed; hands out per-(step, role) streams."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def stream(self, step: int, role: int, index: int = 0) -> np.random.Generator:
        return stream(self.seed, step, role, index)

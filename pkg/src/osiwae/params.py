"""Flat parameter vectors split into a model block and a proposal block.

The convention throughout the package: theta = concat(theta1, theta2), where
theta1 holds parameters the state-space densities depend on (possibly empty)
and theta2 holds proposal-only parameters (possibly empty).  Positive scale
parameters are stored as unconstrained logs inside the vector; models apply
the chain rule through exp when computing scores.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MODEL_BLOCK = "model"
PROPOSAL_BLOCK = "proposal"
ALL_BLOCKS = (MODEL_BLOCK, PROPOSAL_BLOCK)


@dataclass
class ParamVector:
    """Flat real parameter vector with a contiguous two-block partition.

    values[:n_model] is the model block, values[n_model:] the proposal block.
    The two ranges are disjoint and cover every index exactly once.
    """

    values: np.ndarray
    n_model: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("parameter vector must be a nonempty 1-d array")
        if not 0 <= self.n_model <= self.values.size:
            raise ValueError("model block size out of range")

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def n_proposal(self) -> int:
        return self.values.size - self.n_model

    @property
    def model(self) -> np.ndarray:
        return self.values[: self.n_model]

    @property
    def proposal(self) -> np.ndarray:
        return self.values[self.n_model:]

    def block_slice(self, block: str) -> slice:
        if block == MODEL_BLOCK:
            return slice(0, self.n_model)
        if block == PROPOSAL_BLOCK:
            return slice(self.n_model, self.size)
        raise ValueError(f"unknown block {block!r}")

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.n_model)


@dataclass
class GradientEstimate:
    """A theta-shaped vector covering one or both parameter blocks.

    Entries outside blocks_covered are identically zero; learners must never
    write outside the blocks a gradient declares.
    """

    values: np.ndarray
    blocks_covered: frozenset = field(default_factory=lambda: frozenset(ALL_BLOCKS))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.blocks_covered = frozenset(self.blocks_covered)
        unknown = self.blocks_covered - set(ALL_BLOCKS)
        if unknown:
            raise ValueError(f"unknown blocks {sorted(unknown)}")

    def check_discipline(self, theta: ParamVector) -> None:
        """Raise if any entry outside blocks_covered is nonzero."""
        for block in ALL_BLOCKS:
            if block not in self.blocks_covered:
                if np.any(self.values[theta.block_slice(block)] != 0.0):
                    raise ValueError(f"gradient leaks into uncovered block {block!r}")


def restrict_to_blocks(values: np.ndarray, theta: ParamVector, blocks) -> np.ndarray:
    """Zero out every entry outside the given blocks."""
    out = np.zeros_like(values)
    for block in blocks:
        sl = theta.block_slice(block)
        out[sl] = values[sl]
    return out

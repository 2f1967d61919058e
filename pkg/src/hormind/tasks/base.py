"""Shared adapter contract for benchmark tasks.

An adapter binds one problem instance and supplies everything the engine
needs: state encoding/decoding, per-agent refinement deltas, an output
distribution for the entropy monitor, a domain axiom base for the symbolic
verifier, an independent correctness oracle, and canonical numeric output
encodings for Hamming distances and memory. Adapters hold no mutable state
after construction and may be shared read-only across episodes.
"""

from __future__ import annotations

import numpy as np


class TaskAdapter:
    """Base adapter; concrete tasks override everything marked abstract."""

    name = "abstract"

    #: number of named axioms in the task's consistency base
    axiom_count = 0

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def encode(self) -> np.ndarray:
        """Initial cognitive state for this instance, in [0,1]^d."""
        raise NotImplementedError

    def decode(self, s: np.ndarray):
        """Map a state to the task's provisional output object."""
        raise NotImplementedError

    def deltas(self, s: np.ndarray, y, agent_id: str) -> np.ndarray:
        """State-update contribution of one emission agent (zero default)."""
        return np.zeros(self.dim)

    def distribution(self, s: np.ndarray) -> np.ndarray:
        """Probability vector over the task's candidate-output alphabet."""
        raise NotImplementedError

    def axioms(self, y) -> list[str]:
        """Names of violated domain axioms for an output (empty if clean)."""
        raise NotImplementedError

    def oracle(self):
        """Ground-truth answer computed by an independent method."""
        raise NotImplementedError

    def is_correct(self, y, truth) -> bool:
        raise NotImplementedError

    def canonical_encoding(self, y) -> np.ndarray:
        """Fixed-length numeric encoding of an output."""
        raise NotImplementedError

    def sample_outputs(self, s: np.ndarray, y) -> list[tuple]:
        """Candidate outputs for the hypothesis pool: (output, encoding, weight)."""
        return [(y, self.canonical_encoding(y), 1.0)]

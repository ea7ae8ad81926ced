"""Sparse operator container shared by the graph solver and the cone model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class DiscreteOperator:
    matrix: sp.csr_matrix
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, x):
        return self.matrix @ x

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def asymmetry(self, weights=None) -> float:
        """Relative size of the antisymmetric part, optionally in a weighted inner product."""
        A = self.matrix
        if weights is not None:
            w = sp.diags(np.asarray(weights, float))
            A = w @ A
        num = abs(A - A.T).max()
        den = abs(A).max()
        return float(num / den) if den else 0.0

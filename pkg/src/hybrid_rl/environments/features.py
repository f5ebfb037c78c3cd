from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


class RankDeficiencyError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureMap:
    """phi(state, action) -> R^d with ||phi||_2 <= 1."""

    dimension: int
    embed: Callable[[object, int], np.ndarray]
    embed_all: Callable[[object], np.ndarray] | None = None  # optional (A, d) fast path

    def __call__(self, state, action: int) -> np.ndarray:
        return self.embed(state, action)

    def all_actions(self, state, num_actions: int) -> np.ndarray:
        if self.embed_all is not None:
            return self.embed_all(state)
        return np.stack([self.embed(state, a) for a in range(num_actions)])


def tabular_one_hot(num_states: int, num_actions: int) -> FeatureMap:
    eye = np.eye(num_states * num_actions)
    return FeatureMap(num_states * num_actions, lambda s, a: eye[int(s) * num_actions + int(a)])


@dataclass(frozen=True, eq=False)
class Projector:
    basis: np.ndarray  # (d, k), orthonormal columns

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=float)
        if B.ndim != 2:
            raise ValueError("basis must be a d x k matrix")
        if np.abs(B.T @ B - np.eye(B.shape[1])).max() > 1e-8:
            raise ValueError("basis columns are not orthonormal")
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def project(self, v: np.ndarray) -> np.ndarray:
        return (v @ self.basis) @ self.basis.T

    def coordinates(self, v: np.ndarray) -> np.ndarray:
        return v @ self.basis

    def split(self, k: int) -> tuple["Projector", "Projector"]:
        """(span of the first k basis vectors, span of the rest)."""
        return Projector(self.basis[:, :k]), Projector(self.basis[:, k:])


def svd_projector(features: np.ndarray, k: int) -> Projector:
    """Top-k left singular vectors of the d x n matrix whose columns are ``features`` rows.

    Signs are fixed so each vector's largest-magnitude entry is positive.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be an n x d matrix")
    _, sing, vt = np.linalg.svd(X, full_matrices=False)
    tol = max(X.shape) * np.finfo(float).eps * (sing[0] if len(sing) else 0.0)
    achievable = int((sing > tol).sum())
    if achievable < k:
        raise RankDeficiencyError(f"requested rank {k} but the data only supports rank {achievable}")
    basis = vt[:k].T.copy()
    pivots = np.abs(basis).argmax(axis=0)
    basis *= np.sign(basis[pivots, np.arange(k)])
    return Projector(basis)


def projected_feature_map(base: FeatureMap, projector: Projector) -> FeatureMap:
    """phi -> B^T phi; the norm bound carries over since B has orthonormal columns."""
    return FeatureMap(projector.rank, lambda s, a: base(s, a) @ projector.basis)


def indexed_feature_map(table: np.ndarray, index: Callable[[object, int], int], num_actions: int) -> FeatureMap:
    """Features looked up as rows of ``table`` (e.g. a projected one-hot basis).

    ``index(state, action)`` picks the row. The layout must be action-minor,
    i.e. ``index(s, a) = index(s, 0) + a``, as in both one-hot encodings here.
    """
    table = np.asarray(table, dtype=float)
    if np.linalg.norm(table, axis=1).max() > 1 + 1e-9:
        raise ValueError("feature rows must have norm <= 1")

    def embed_all(state):
        i = index(state, 0)
        return table[i : i + num_actions]

    return FeatureMap(table.shape[1], lambda s, a: table[index(s, a)], embed_all)

"""Deterministic canonical orientation of atom position sets.

Positions are centered on their centroid and rotated so the principal axis
of largest variance lies on the first grid axis, the second-largest on the
second, and the smallest on the third. The rotation is always proper
(determinant +1), so mirror-image inputs stay distinguishable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MOMENT_TOL = 1e-9
# Centroids are snapped to multiples of 2^-20 A so point sets that differ by
# an exactly representable translation orient to bit-identical outputs.
_CENTROID_QUANTUM = 2.0**20


@dataclass(frozen=True)
class CanonicalFrame:
    """Proper rotation plus the centroid that was subtracted."""

    rotation: np.ndarray
    centroid: np.ndarray

    def __post_init__(self) -> None:
        rot = np.asarray(self.rotation, dtype=np.float64)
        if rot.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-10):
            raise ValueError("rotation must be orthogonal")
        if abs(np.linalg.det(rot) - 1.0) > 1e-12:
            raise ValueError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "centroid", np.asarray(self.centroid, dtype=np.float64))

    def apply(self, positions: np.ndarray) -> np.ndarray:
        return (np.asarray(positions, dtype=np.float64) - self.centroid) @ self.rotation.T


def _fix_sign(vec: np.ndarray, centered: np.ndarray) -> np.ndarray:
    """Choose the eigenvector sign by the third central moment of projections,
    falling back to making the largest-magnitude entry positive."""
    proj = centered @ vec
    moment = float(np.sum(proj**3))
    if abs(moment) > _MOMENT_TOL:
        return vec if moment >= 0 else -vec
    pivot = int(np.argmax(np.abs(vec)))
    return vec if vec[pivot] >= 0 else -vec


def canonical_orient(positions: np.ndarray) -> tuple[CanonicalFrame, np.ndarray]:
    """Compute the canonical frame of a position set and the oriented positions."""
    pos = np.asarray(positions, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
        raise ValueError("positions must be a nonempty (n, 3) array")
    centroid = np.round(pos.mean(axis=0) * _CENTROID_QUANTUM) / _CENTROID_QUANTUM
    centered = pos - centroid
    cov = centered.T @ centered / pos.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    # Stable descending sort keeps the solver's order for (near-)degenerate
    # eigenvalues, which makes the degenerate convention deterministic.
    order = np.argsort(-eigvals, kind="stable")
    v1 = _fix_sign(eigvecs[:, order[0]].copy(), centered)
    v2 = _fix_sign(eigvecs[:, order[1]].copy(), centered)
    v3 = np.cross(v1, v2)
    rotation = np.vstack([v1, v2, v3])
    frame = CanonicalFrame(rotation, centroid)
    return frame, centered @ rotation.T

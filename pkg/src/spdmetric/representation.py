"""Vector representations of SPD matrices for metric learning.

``log-euclidean`` is ``vec(log P)``, the tangent-space coordinates at the
identity. ``euclidean-cov`` treats ``P`` as a point of the flat space of
symmetric matrices (``vec(P)``); ``cholesky`` stacks the lower triangle of
``Chol(P)`` row by row, unweighted. All three have dimension n(n+1)/2 and
their plain Euclidean distance equals the log-Frobenius, Frobenius and
Cholesky-Frobenius distance respectively.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .linalg import as_spd, cholesky, spd_log, vec

__all__ = ["REPRESENTATIONS", "BASELINE_DISTANCE", "embed", "represent", "represent_all"]

REPRESENTATIONS = ("euclidean-cov", "cholesky", "log-euclidean")

# Distance kind reproduced by the Euclidean metric in each representation.
BASELINE_DISTANCE = {
    "euclidean-cov": "frobenius",
    "cholesky": "cholesky-frobenius",
    "log-euclidean": "log-frobenius",
}


def embed(P) -> np.ndarray:
    """``vec(log P)``."""
    return vec(spd_log(P))


def represent(P, tag: str) -> np.ndarray:
    if tag == "log-euclidean":
        return embed(P)
    if tag == "euclidean-cov":
        return vec(as_spd(P))
    if tag == "cholesky":
        L = cholesky(P)
        return L[np.tril_indices(L.shape[0])]
    raise ValueError(f"unknown representation {tag!r}; choose from {', '.join(REPRESENTATIONS)}")


def represent_all(items: Sequence, tag: str) -> np.ndarray:
    """Stack the representations of ``items`` into an ``(N, d)`` array."""
    return np.array([represent(P, tag) for P in items])

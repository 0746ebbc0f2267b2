"""Learned log-Euclidean geodesic distances.

Any inner product on the symmetric matrices, carried to the SPD cone by
the group product ``P1 . P2 = exp(log P1 + log P2)``, gives a flat
Riemannian metric whose geodesic distance is the induced norm of
``log P1 - log P2``. In ``vec`` coordinates that norm is a Mahalanobis
distance, so learning one with ITML on ``vec(log P)`` learns a geodesic
distance on the SPD matrices.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from ._errors import FormatError, InsufficientDataError, ShapeError
from .itml import FitReport, ItmlConfig, MahalanobisMetric, itml_fit
from .linalg import VEC_CONVENTION, as_spd, order_from_dim, vec_dim
from .representation import REPRESENTATIONS, embed, represent, represent_all

__all__ = [
    "MODEL_FORMAT",
    "embed",
    "LearnedMetric",
    "learn_geodesic",
    "learn_metric",
    "geodesic_sq",
    "geodesic_dist",
    "save_model",
    "load_model",
    "dump_model",
]

MODEL_FORMAT = "spdmetric-model v1"


@dataclass(frozen=True)
class LearnedMetric:
    """A Mahalanobis metric over the ``representation`` coordinates of n x n SPD matrices."""

    n: int
    inner: MahalanobisMetric
    representation: str = "log-euclidean"
    provenance: dict = field(default_factory=dict)
    report: FitReport | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.inner.d != vec_dim(self.n):
            raise ShapeError(f"metric dimension {self.inner.d} does not match n(n+1)/2 = {vec_dim(self.n)}")
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"unknown representation {self.representation!r}")

    @property
    def M(self) -> np.ndarray:
        return self.inner.M

    @classmethod
    def identity(cls, n: int, representation: str = "log-euclidean") -> "LearnedMetric":
        return cls(n, MahalanobisMetric.identity(vec_dim(n), VEC_CONVENTION), representation)

    def coords(self, P) -> np.ndarray:
        P = as_spd(P)
        if P.shape[0] != self.n:
            raise ShapeError(f"matrix of order {P.shape[0]} given to a metric for order {self.n}")
        return represent(P, self.representation)


def learn_metric(items: Sequence, constraints: Sequence, config: ItmlConfig | None = None,
                 representation: str = "log-euclidean", backend: str | None = None) -> LearnedMetric:
    """Embed ``items`` with ``representation`` and fit ITML on the embedded vectors."""
    config = config or ItmlConfig()
    if len(items) < 2:
        raise InsufficientDataError(f"need at least 2 items to learn a metric, got {len(items)}")
    if len(constraints) == 0:
        raise InsufficientDataError("need at least one constraint to learn a metric")
    orders = {np.shape(P) for P in items}
    if len(orders) != 1:
        raise ShapeError(f"items have mixed shapes: {sorted(orders)}")
    n = np.shape(items[0])[0]
    X = represent_all(items, representation)
    inner, report = itml_fit(X, constraints, config, backend=backend)
    inner = MahalanobisMetric(inner.M, dict(VEC_CONVENTION))
    provenance = {
        "config": config.echo(),
        "n_items": len(items),
        "n_similar": report.n_similar,
        "n_dissimilar": report.n_dissimilar,
        "fit": report.summary(),
    }
    return LearnedMetric(n, inner, representation, provenance, report)


def learn_geodesic(items: Sequence, constraints: Sequence, config: ItmlConfig | None = None,
                   backend: str | None = None) -> LearnedMetric:
    """Learn a log-Euclidean geodesic distance from pairwise constraints.

    Every item is mapped to ``vec(log P)``; ITML then learns a Mahalanobis
    matrix on those vectors, with its percentile thresholds computed in the
    same embedded space.
    """
    return learn_metric(items, constraints, config, "log-euclidean", backend)


def geodesic_sq(metric: LearnedMetric, P1, P2) -> float:
    """Quadratic form of the embedded difference (no square root)."""
    diff = metric.coords(P1) - metric.coords(P2)
    return max(float(diff @ metric.M @ diff), 0.0)


def geodesic_dist(metric: LearnedMetric, P1, P2) -> float:
    """Learned geodesic distance; with ``M = I`` this is the log-Frobenius distance."""
    return math.sqrt(geodesic_sq(metric, P1, P2))


# -- model files ------------------------------------------------------------

def dump_model(metric: LearnedMetric) -> str:
    from . import __version__

    rep = metric.report
    doc = {
        "format": MODEL_FORMAT,
        "representation": metric.representation,
        "n": metric.n,
        "d": metric.inner.d,
        "vec_convention": dict(VEC_CONVENTION),
        "M": metric.M.tolist(),
        "config": metric.provenance.get("config"),
        "l": None if rep is None else rep.l,
        "u": None if rep is None else rep.u,
        "converged": None if rep is None else rep.converged,
        "provenance": metric.provenance,
        "version": __version__,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def save_model(metric: LearnedMetric, fh: TextIO) -> None:
    fh.write(dump_model(metric))


def load_model(fh: TextIO) -> LearnedMetric:
    """Read a model file; a ``vec`` convention other than ours is rejected."""
    try:
        doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"not a model file (expected format {MODEL_FORMAT!r})")
    conv = doc.get("vec_convention")
    if conv != VEC_CONVENTION:
        raise FormatError(f"model vec convention {conv!r} does not match {VEC_CONVENTION!r}")
    try:
        M = np.array(doc["M"], dtype=np.float64)
        d = int(doc["d"])
        n = int(doc.get("n") or order_from_dim(d))
        rep = doc.get("representation", "log-euclidean")
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"model file is missing or has malformed fields: {exc}") from None
    if M.shape != (d, d):
        raise FormatError(f"model matrix has shape {M.shape}, expected ({d}, {d})")
    return LearnedMetric(n, MahalanobisMetric(M, dict(conv)), rep, doc.get("provenance") or {})


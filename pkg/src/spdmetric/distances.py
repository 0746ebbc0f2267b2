"""Baseline distances between SPD matrices.

Each distance is registered under its CLI name together with the geometric
properties it is known to have. Two of them (``j-divergence`` and
``jbld``) are not metrics: they are symmetric but can violate the triangle
inequality.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._errors import NumericalError, ShapeError
from .linalg import as_spd, cholesky, spd_log, spd_power

__all__ = ["Properties", "DistanceKind", "KINDS", "KIND_NAMES", "get_kind", "distance"]

# Interior quantities in [-_CLAMP, 0) are rounding noise and are clamped to 0.
_CLAMP = 1e-12


@dataclass(frozen=True)
class Properties:
    symmetric: bool
    triangle_inequality: bool
    geodesic: bool
    affine_invariant: bool
    scale_invariant: bool
    rotation_invariant: bool
    inversion_invariant: bool


@dataclass(frozen=True)
class DistanceKind:
    tag: str
    properties: Properties
    fn: Callable[[np.ndarray, np.ndarray], float]

    def __call__(self, P1, P2) -> float:
        return distance(self, P1, P2)


def _sqrt_clamped(x: float, what: str) -> float:
    if x < 0.0:
        if x < -_CLAMP:
            raise NumericalError(f"{what}: negative quantity {x:.3e} under the square root")
        return 0.0
    return math.sqrt(x)


def _frobenius(P1, P2):
    return float(np.linalg.norm(P1 - P2))


def _cholesky_frobenius(P1, P2):
    return float(np.linalg.norm(cholesky(P1, "P1") - cholesky(P2, "P2")))


def _relative_eigs(P1, P2, what):
    # eigenvalues of P1^{-1} P2 via the Cholesky factor of P1
    L = np.linalg.cholesky(P1)
    Y = np.linalg.solve(L, P2)
    C = np.linalg.solve(L, Y.T)
    lam = np.linalg.eigvalsh(0.5 * (C + C.T))
    if lam[0] <= 0.0:
        raise NumericalError(f"{what}: whitened matrix lost positive definiteness")
    return lam


def _j_divergence(P1, P2):
    # tr(P2^-1 P1) + tr(P1^-1 P2) - 2n summed per eigenvalue without cancellation
    lam = _relative_eigs(P1, P2, "j-divergence")
    t = float(np.sum((lam - 1.0) ** 2 / lam))
    return 0.5 * _sqrt_clamped(t, "j-divergence")


def _jbld(P1, P2):
    # logdet((P1+P2)/2) - logdet(P1 P2)/2 = sum log((1+l) / (2 sqrt l))
    r = np.sqrt(_relative_eigs(P1, P2, "jbld"))
    t = float(np.sum(np.log1p((r - 1.0) ** 2 / (2.0 * r))))
    return _sqrt_clamped(t, "jbld")


def _affine_invariant(P1, P2):
    W = spd_power(P1, -0.5, "P1")
    C = W @ P2 @ W
    lam = np.linalg.eigvalsh(0.5 * (C + C.T))
    if lam[0] <= 0.0:
        raise NumericalError("affine-invariant: whitened matrix lost positive definiteness")
    return float(np.sqrt(np.sum(np.log(lam) ** 2)))


def _log_frobenius(P1, P2):
    return float(np.linalg.norm(spd_log(P1, "P1") - spd_log(P2, "P2")))


def _p(*flags: str) -> Properties:
    names = Properties.__dataclass_fields__.keys()
    unknown = set(flags) - set(names)
    assert not unknown, unknown
    return Properties(**{k: k in flags for k in names})


KINDS: dict[str, DistanceKind] = {
    k.tag: k
    for k in [
        DistanceKind(
            "frobenius",
            _p("symmetric", "triangle_inequality", "rotation_invariant"),
            _frobenius,
        ),
        DistanceKind(
            "cholesky-frobenius",
            _p("symmetric", "triangle_inequality"),
            _cholesky_frobenius,
        ),
        DistanceKind(
            "j-divergence",
            _p("symmetric", "affine_invariant", "scale_invariant",
               "rotation_invariant", "inversion_invariant"),
            _j_divergence,
        ),
        DistanceKind(
            "jbld",
            _p("symmetric", "affine_invariant", "scale_invariant",
               "rotation_invariant", "inversion_invariant"),
            _jbld,
        ),
        DistanceKind(
            "affine-invariant",
            _p("symmetric", "triangle_inequality", "geodesic", "affine_invariant",
               "scale_invariant", "rotation_invariant", "inversion_invariant"),
            _affine_invariant,
        ),
        DistanceKind(
            "log-frobenius",
            _p("symmetric", "triangle_inequality", "geodesic",
               "scale_invariant", "rotation_invariant", "inversion_invariant"),
            _log_frobenius,
        ),
    ]
}

KIND_NAMES = tuple(KINDS)


def get_kind(kind: str | DistanceKind) -> DistanceKind:
    if isinstance(kind, DistanceKind):
        return kind
    try:
        return KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown distance kind {kind!r}; choose from {', '.join(KIND_NAMES)}") from None


def distance(kind: str | DistanceKind, P1, P2) -> float:
    """Distance of the given kind between two SPD matrices of the same order.

    Parameters
    ----------
    kind : str or DistanceKind
        One of ``frobenius``, ``cholesky-frobenius``, ``j-divergence``,
        ``jbld``, ``affine-invariant``, ``log-frobenius``.
    P1, P2 : array_like, shape (n, n)
        SPD matrices.

    Returns
    -------
    float
        A nonnegative value.
    """
    k = get_kind(kind)
    P1 = as_spd(P1, "P1")
    P2 = as_spd(P2, "P2")
    if P1.shape != P2.shape:
        raise ShapeError(f"order mismatch: {P1.shape[0]} vs {P2.shape[0]}")
    return k.fn(P1, P2)

"""Information-theoretic metric learning with LogDet Bregman projections.

Learns a Mahalanobis matrix ``M`` that stays close to a prior ``M0`` in
LogDet divergence while pushing squared distances of similar pairs below a
threshold ``l`` and dissimilar pairs above ``u``. Each constraint carries its
own slack threshold ``zeta``, penalized by ``gamma`` times the LogDet
divergence to its initial value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence, TextIO

import numpy as np

from . import _backend
from ._errors import ConfigError, FormatError, InsufficientDataError, NumericalError, ShapeError
from .linalg import as_spd, as_sym

__all__ = [
    "PAPER_GAMMA",
    "PairConstraint",
    "MahalanobisMetric",
    "ItmlConfig",
    "FitReport",
    "logdet_div",
    "nearest_rank",
    "percentile_thresholds",
    "itml_fit",
    "itml_objective",
    "mahalanobis_sq",
    "mahalanobis_dist",
    "read_constraints",
    "write_constraints",
]

PAPER_GAMMA = 10 ** 3.5

# Thresholds of exactly zero (duplicate points) would pin zeta at 0.
_MIN_THRESHOLD = 1e-9

_ALL_PAIRS_LIMIT = 1000
_SAMPLED_PAIRS = 100_000


def _admit_metric(M) -> np.ndarray:
    # Learned metrics are routinely conditioned beyond 1e10 at large gamma;
    # they are admitted when a Cholesky factorization exists.
    M = as_sym(M, "Mahalanobis matrix")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise NumericalError("Mahalanobis matrix is not positive definite") from None
    return M


class PairConstraint(NamedTuple):
    i: int
    j: int
    similar: bool

    @property
    def kind(self) -> str:
        return "similar" if self.similar else "dissimilar"


@dataclass(frozen=True)
class MahalanobisMetric:
    """SPD matrix defining ``(x - y)^T M (x - y)``."""

    M: np.ndarray
    vec_convention: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "M", _admit_metric(self.M))

    @property
    def d(self) -> int:
        return self.M.shape[0]

    @classmethod
    def identity(cls, d: int, vec_convention: dict | None = None) -> "MahalanobisMetric":
        return cls(np.eye(d), vec_convention)

    def factor(self) -> np.ndarray:
        """Lower-triangular ``L`` with ``M = L L^T``; ``x @ L`` maps to Euclidean coordinates."""
        return np.linalg.cholesky(self.M)


@dataclass(frozen=True)
class ItmlConfig:
    """Parameters for :func:`itml_fit`.

    ``a`` and ``b`` are the percentiles of the pairwise squared-distance
    distribution (under ``m0``) that become the similar / dissimilar
    thresholds, unless ``thresholds=(l, u)`` is given. ``max_sweeps=None``
    means a budget of about 100 000 constraint visits.
    """

    m0: np.ndarray | None = None
    gamma: float = PAPER_GAMMA
    a: float = 5.0
    b: float = 95.0
    max_sweeps: int | None = None
    conv_tol: float = 1e-3
    thresholds: tuple[float, float] | None = None
    shuffle: bool = False
    seed: int = 0
    debug: bool = False

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not 0 < self.a < self.b < 100:
            raise ConfigError(f"need 0 < a < b < 100, got a={self.a}, b={self.b}")
        if self.max_sweeps is not None and self.max_sweeps < 1:
            raise ConfigError(f"max_sweeps must be positive, got {self.max_sweeps}")
        if not self.conv_tol > 0:
            raise ConfigError(f"conv_tol must be positive, got {self.conv_tol}")
        if self.thresholds is not None:
            l, u = self.thresholds
            if not 0 <= l <= u:
                raise ConfigError(f"explicit thresholds need 0 <= l <= u, got {self.thresholds}")

    def prior(self, d: int) -> np.ndarray:
        if self.m0 is None:
            return np.eye(d)
        m0 = as_spd(self.m0, "prior m0")
        if m0.shape[0] != d:
            raise ShapeError(f"prior m0 has order {m0.shape[0]}, data dimension is {d}")
        return m0

    def echo(self) -> dict:
        """JSON-friendly summary for reports and model files."""
        return {
            "m0": "identity" if self.m0 is None else np.asarray(self.m0).tolist(),
            "gamma": self.gamma,
            "a": self.a,
            "b": self.b,
            "max_sweeps": self.max_sweeps,
            "conv_tol": self.conv_tol,
            "thresholds": None if self.thresholds is None else list(self.thresholds),
            "shuffle": self.shuffle,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class FitReport:
    objective: float
    l: float
    u: float
    zeta: np.ndarray
    zeta0: np.ndarray
    violations: np.ndarray
    sweeps: int
    converged: bool
    skipped: tuple[int, ...] = ()
    n_similar: int = 0
    n_dissimilar: int = 0
    conv_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def max_violation(self) -> float:
        return float(self.violations.max()) if self.violations.size else 0.0

    @property
    def max_rel_violation(self) -> float:
        if not self.violations.size:
            return 0.0
        return float(np.max(self.violations / self.zeta))

    def satisfied(self, rtol: float = 1e-3) -> bool:
        """True when every constraint holds against its slack threshold up to ``rtol``."""
        return self.max_rel_violation <= rtol

    def summary(self) -> dict:
        return {
            "objective": self.objective,
            "l": self.l,
            "u": self.u,
            "sweeps": self.sweeps,
            "converged": self.converged,
            "max_violation": self.max_violation,
            "max_rel_violation": self.max_rel_violation,
            "skipped": list(self.skipped),
            "n_similar": self.n_similar,
            "n_dissimilar": self.n_dissimilar,
        }


def logdet_div(P, Q) -> float:
    """LogDet divergence ``tr(P Q^-1) - ln det(P Q^-1) - n``."""
    P = as_spd(P, "P")
    Q = as_spd(Q, "Q")
    if P.shape != Q.shape:
        raise ShapeError(f"order mismatch: {P.shape[0]} vs {Q.shape[0]}")
    return _logdet_div(P, Q)


def _logdet_div(P, Q) -> float:
    n = P.shape[0]
    Lq = np.linalg.cholesky(Q)
    Lp = np.linalg.cholesky(P)
    # tr(P Q^-1) = tr(Lq^-1 P Lq^-T) with Q = Lq Lq^T
    Y = np.linalg.solve(Lq, P)
    t = np.trace(np.linalg.solve(Lq, Y.T))
    ld = 2.0 * (np.sum(np.log(np.diag(Lp))) - np.sum(np.log(np.diag(Lq))))
    return float(t - ld - n)


def nearest_rank(values: np.ndarray, q: float) -> float:
    """Nearest-rank percentile: the ``ceil(q/100 * N)``-th smallest value."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise InsufficientDataError("percentile of an empty set")
    k = max(1, math.ceil(q / 100.0 * v.size))
    return float(v[min(k, v.size) - 1])


def _as_points(points) -> np.ndarray:
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"points must be an (N, d) array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NumericalError("points contain non-finite values")
    return X


def pair_sq_dists(points, m0=None, seed: int = 0) -> np.ndarray:
    """Squared distances under ``m0`` over all pairs, or a seeded sample for large sets."""
    X = _as_points(points)
    N, d = X.shape
    Y = X if m0 is None else X @ np.linalg.cholesky(as_spd(m0, "m0"))
    if N <= _ALL_PAIRS_LIMIT:
        out = [np.sum((Y[i + 1:] - Y[i]) ** 2, axis=1) for i in range(N - 1)]
        return np.concatenate(out) if out else np.empty(0)
    rng = np.random.default_rng(seed)
    i = rng.integers(0, N, _SAMPLED_PAIRS)
    j = rng.integers(0, N - 1, _SAMPLED_PAIRS)
    j = j + (j >= i)
    return np.sum((Y[i] - Y[j]) ** 2, axis=1)


def percentile_thresholds(points, m0=None, a: float = 5.0, b: float = 95.0,
                          seed: int = 0) -> tuple[float, float]:
    """Similar / dissimilar thresholds from the pairwise distance distribution.

    Squared Mahalanobis distances under ``m0`` (identity if None) are taken
    over all pairs when there are at most 1000 points, otherwise over
    100 000 pairs sampled with ``seed``. Returns the nearest-rank ``a``-th
    and ``b``-th percentiles.
    """
    X = _as_points(points)
    if X.shape[0] < 2:
        raise InsufficientDataError(f"need at least 2 points for thresholds, got {X.shape[0]}")
    dists = pair_sq_dists(X, m0, seed)
    return nearest_rank(dists, a), nearest_rank(dists, b)


def itml_objective(M, zeta, M0, zeta0, gamma: float) -> float:
    """``D_ld(M, M0) + gamma * D_ld(diag(zeta), diag(zeta0))``."""
    out = _logdet_div(_admit_metric(M), _admit_metric(M0))
    if not math.isinf(gamma):
        r = np.asarray(zeta) / np.asarray(zeta0)
        out += gamma * float(np.sum(r - np.log(r) - 1.0))
    return out


def _check_constraints(constraints, N: int) -> list[PairConstraint]:
    out = []
    for c in constraints:
        c = PairConstraint(int(c[0]), int(c[1]), bool(c[2]))
        if c.i == c.j:
            raise ConfigError(f"constraint {tuple(c)} pairs an item with itself")
        if not (0 <= c.i < N and 0 <= c.j < N):
            raise ConfigError(f"constraint {tuple(c)} references an item outside [0, {N})")
        out.append(c)
    return out


def itml_fit(points, constraints: Sequence, config: ItmlConfig | None = None,
             backend: str | None = None) -> tuple[MahalanobisMetric, FitReport]:
    """Learn a Mahalanobis matrix from pairwise constraints.

    Parameters
    ----------
    points : array_like, shape (N, d)
    constraints : sequence of PairConstraint or ``(i, j, similar)`` tuples
    config : ItmlConfig, optional
    backend : {"cython", "python"}, optional
        Kernel implementation; defaults to the one selected at import.

    Returns
    -------
    metric : MahalanobisMetric
    report : FitReport
        Objective value, slack thresholds, per-constraint violations under
        the learned ``(M, zeta)``, sweep count and convergence flag.
        Hitting ``max_sweeps`` is reported, not raised.
    """
    config = config or ItmlConfig()
    kern = _backend.get(backend)
    X = _as_points(points)
    N, d = X.shape
    cons = _check_constraints(constraints, N)
    if not cons:
        raise InsufficientDataError("itml_fit needs at least one constraint")

    M0 = config.prior(d)
    if config.thresholds is not None:
        l, u = config.thresholds
    else:
        l, u = percentile_thresholds(X, M0, config.a, config.b, config.seed)
    l = max(float(l), _MIN_THRESHOLD)
    u = max(float(u), _MIN_THRESHOLD)

    ii = np.array([c.i for c in cons])
    jj = np.array([c.j for c in cons])
    sim = np.array([c.similar for c in cons])
    V = np.ascontiguousarray(X[ii] - X[jj])
    delta = np.where(sim, 1.0, -1.0)
    zeta0 = np.where(sim, l, u)
    zeta = zeta0.copy()
    lam = np.zeros(len(cons))
    skipped = np.zeros(len(cons), dtype=np.uint8)
    M = np.array(M0, dtype=np.float64, order="C")

    max_sweeps = config.max_sweeps or max(1, math.ceil(100_000 / len(cons)))
    rng = np.random.default_rng(config.seed)
    order = np.arange(len(cons), dtype=np.intp)
    gamma = float(config.gamma)

    history = []
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        if config.shuffle:
            order = rng.permutation(len(cons)).astype(np.intp)
        lam_old = lam.copy()
        kern.itml_sweep(M, V, delta, zeta, lam, gamma, order, skipped)
        if not np.all(np.isfinite(M)):
            raise NumericalError(f"ITML diverged: non-finite metric after sweep {sweeps}")
        if config.debug:
            _admit_metric(M)
        norm = np.abs(lam).sum() + np.abs(lam_old).sum()
        change = 0.0 if norm == 0 else float(np.abs(lam - lam_old).sum() / norm)
        history.append(change)
        if change < config.conv_tol:
            converged = True
            break

    M = 0.5 * (M + M.T)
    metric = MahalanobisMetric(M)
    p = np.einsum("ij,jk,ik->i", V, M, V)
    violations = np.where(sim, p - zeta, zeta - p).clip(min=0.0)
    report = FitReport(
        objective=itml_objective(M, zeta, M0, zeta0, gamma),
        l=l,
        u=u,
        zeta=zeta,
        zeta0=zeta0,
        violations=violations,
        sweeps=sweeps,
        converged=converged,
        skipped=tuple(int(c) for c in np.flatnonzero(skipped)),
        n_similar=int(sim.sum()),
        n_dissimilar=int((~sim).sum()),
        conv_history=tuple(history),
    )
    return metric, report


def _metric_matrix(metric) -> np.ndarray:
    return metric.M if isinstance(metric, MahalanobisMetric) else np.asarray(metric, dtype=np.float64)


def mahalanobis_sq(metric, v1, v2) -> float:
    """Quadratic form ``(v1 - v2)^T M (v1 - v2)``."""
    M = _metric_matrix(metric)
    diff = np.asarray(v1, dtype=np.float64) - np.asarray(v2, dtype=np.float64)
    if diff.ndim != 1 or diff.shape[0] != M.shape[0]:
        raise ShapeError(f"vectors of shape {np.shape(v1)}, {np.shape(v2)} vs metric dimension {M.shape[0]}")
    return max(float(diff @ M @ diff), 0.0)


def mahalanobis_dist(metric, v1, v2) -> float:
    return math.sqrt(mahalanobis_sq(metric, v1, v2))


# -- constraint files -------------------------------------------------------

def read_constraints(fh: TextIO | Iterable[str]) -> list[PairConstraint]:
    """Parse ``i j s|d`` lines; ``#`` starts a comment."""
    out = []
    for lineno, raw in enumerate(fh, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if len(toks) != 3 or toks[2] not in ("s", "d"):
            raise FormatError(f"constraint line {lineno}: expected 'i j s|d', got {raw.strip()!r}")
        try:
            i, j = int(toks[0]), int(toks[1])
        except ValueError:
            raise FormatError(f"constraint line {lineno}: indices must be integers") from None
        out.append(PairConstraint(i, j, toks[2] == "s"))
    return out


def write_constraints(constraints, fh: TextIO) -> None:
    for c in constraints:
        fh.write(f"{int(c[0])} {int(c[1])} {'s' if c[2] else 'd'}\n")

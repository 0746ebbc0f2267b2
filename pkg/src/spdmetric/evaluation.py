"""Matching and clustering protocols, plus synthetic SPD data.

Matching: pairs of SPD items labeled similar / dissimilar are split into
folds; per fold a metric is learned on the training pairs, a distance
threshold is chosen for best training accuracy, and held-out accuracy is
reported next to the same protocol with the unlearned (identity) metric.

Clustering: ITML is trained on all pairs of a labeled training subset,
every item is mapped through ``L^T`` (``M = L L^T``), and K-means with
restarts clusters the whole set. Accuracy uses the best one-to-one mapping
of clusters to classes.

Seeds for folds and restarts are split from one master seed with
``numpy.random.SeedSequence.spawn``, so results do not depend on the
number of worker threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np

from . import _backend
from ._errors import ConfigError, FormatError, InsufficientDataError, ShapeError
from .itml import ItmlConfig, PairConstraint, itml_fit
from .linalg import sym_exp, unvec, vec_dim
from .representation import represent_all

__all__ = [
    "PairDataset",
    "ClusterDataset",
    "ClusterResult",
    "FoldResult",
    "MatchResult",
    "best_threshold",
    "assign_folds",
    "kfold_match_eval",
    "lloyd",
    "kmeans",
    "kmeans_cost",
    "cluster_accuracy",
    "cluster_spd",
    "select_gamma_cv",
    "training_constraints",
    "split_train",
    "synth_spd_clusters",
    "synth_pairs",
    "read_pairs",
    "write_pairs",
    "read_labels",
    "write_labels",
]

MAX_ACCURACY_CLASSES = 10


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _child_seeds(seed: int, count: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


# -- datasets ---------------------------------------------------------------

@dataclass
class PairDataset:
    items: list
    pairs: np.ndarray  # (P, 3) ints: i, j, similar (1) / dissimilar (0)
    folds: np.ndarray | None = None

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 3)
        N = len(self.items)
        if self.pairs.size and (self.pairs[:, :2].min() < 0 or self.pairs[:, :2].max() >= N):
            raise ConfigError(f"pair indices must lie in [0, {N})")
        if np.any(self.pairs[:, 0] == self.pairs[:, 1]):
            raise ConfigError("a pair references the same item twice")
        if self.folds is not None:
            self.folds = np.asarray(self.folds, dtype=np.int64)
            if self.folds.shape != (len(self.pairs),):
                raise ConfigError("fold assignment must have one entry per pair")

    @property
    def similar(self) -> np.ndarray:
        return self.pairs[:, 2].astype(bool)


@dataclass
class ClusterDataset:
    items: list
    labels: np.ndarray
    train_mask: np.ndarray | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (len(self.items),):
            raise ConfigError("need exactly one label per item")
        if self.labels.size and self.labels.min() < 0:
            raise ConfigError("labels must be nonnegative")
        if self.train_mask is None:
            self.train_mask = np.zeros(len(self.items), dtype=bool)
        self.train_mask = np.asarray(self.train_mask, dtype=bool)

    @property
    def k(self) -> int:
        return int(np.unique(self.labels).size)


@dataclass(frozen=True)
class ClusterResult:
    assignments: np.ndarray
    cost: float
    restarts_run: int
    seed: int
    restart_costs: tuple[float, ...] = ()
    best_restart: int = 0


@dataclass(frozen=True)
class FoldResult:
    fold: int
    seed: int
    n_train: int
    n_test: int
    learned_acc: float | None
    unlearned_acc: float
    learned_threshold: float | None
    unlearned_threshold: float
    converged: bool | None = None
    sweeps: int | None = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class MatchResult:
    representation: str
    folds: tuple[FoldResult, ...]

    @property
    def mean_learned(self) -> float | None:
        vals = [f.learned_acc for f in self.folds if f.learned_acc is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def mean_unlearned(self) -> float:
        return float(np.mean([f.unlearned_acc for f in self.folds]))


# -- thresholding and matching ----------------------------------------------

def best_threshold(distances, labels) -> tuple[float, float]:
    """Threshold maximizing the accuracy of "similar iff distance <= t".

    Candidates are the midpoints between consecutive distinct distances
    plus ``min - 1`` and ``max + 1``. Ties go to the smallest threshold.

    Returns
    -------
    (threshold, accuracy)
    """
    d = np.asarray(distances, dtype=np.float64)
    s = np.asarray(labels, dtype=bool)
    if d.size == 0:
        raise InsufficientDataError("best_threshold needs at least one distance")
    if d.shape != s.shape:
        raise ShapeError("distances and labels differ in length")
    vals, inv = np.unique(d, return_inverse=True)
    sim_at = np.bincount(inv, weights=s, minlength=vals.size)
    dis_at = np.bincount(inv, weights=~s, minlength=vals.size)
    # candidate m (0..len(vals)) classifies the first m distinct values as similar
    sim_below = np.concatenate([[0.0], np.cumsum(sim_at)])
    dis_below = np.concatenate([[0.0], np.cumsum(dis_at)])
    correct = sim_below + (dis_below[-1] - dis_below)
    m = int(np.argmax(correct))
    if m == 0:
        t = float(vals[0] - 1.0)
    elif m == vals.size:
        t = float(vals[-1] + 1.0)
    else:
        t = float((vals[m - 1] + vals[m]) / 2.0)
    return t, float(correct[m] / d.size)


def assign_folds(similar, folds: int, seed: int = 0) -> np.ndarray:
    """Stratified round-robin fold ids over a seeded permutation of the pairs."""
    s = np.asarray(similar, dtype=bool)
    if folds < 2:
        raise ConfigError(f"need at least 2 folds, got {folds}")
    rng = np.random.default_rng(seed)
    out = np.empty(s.size, dtype=np.int64)
    offset = 0
    for cls in (True, False):
        idx = np.flatnonzero(s == cls)
        idx = idx[rng.permutation(idx.size)]
        out[idx] = (np.arange(idx.size) + offset) % folds
        offset += idx.size
    return out


def _pair_dists(X: np.ndarray, pairs: np.ndarray, M: np.ndarray | None) -> np.ndarray:
    diff = X[pairs[:, 0]] - X[pairs[:, 1]]
    q = np.sum(diff * diff, axis=1) if M is None else np.einsum("ij,jk,ik->i", diff, M, diff)
    return np.sqrt(np.clip(q, 0.0, None))


def _accuracy(dists, similar, t) -> float:
    return float(np.mean((dists <= t) == similar))


def kfold_match_eval(ds: PairDataset, representation: str = "log-euclidean",
                     config: ItmlConfig | None = None, folds: int = 10, seed: int = 0,
                     learned: bool = True, threads: int = 1,
                     backend: str | None = None) -> MatchResult:
    """K-fold pair-matching accuracy with and without a learned metric."""
    config = config or ItmlConfig()
    X = represent_all(ds.items, representation)
    fold_ids = ds.folds if ds.folds is not None else assign_folds(ds.similar, folds, seed)
    fold_list = sorted(set(fold_ids.tolist())) if ds.folds is not None else list(range(folds))
    if len(fold_list) < 2:
        raise ConfigError("need at least 2 folds")
    seeds = _child_seeds(seed, len(fold_list))

    def run(task):
        f, fseed = task
        test = fold_ids == f
        train_pairs, test_pairs = ds.pairs[~test], ds.pairs[test]
        if len(train_pairs) == 0:
            raise ConfigError(f"fold {f} has no training constraints")
        if len(test_pairs) == 0:
            raise ConfigError(f"fold {f} has no test pairs")
        tr_sim, te_sim = train_pairs[:, 2] == 1, test_pairs[:, 2] == 1
        t0, _ = best_threshold(_pair_dists(X, train_pairs, None), tr_sim)
        acc0 = _accuracy(_pair_dists(X, test_pairs, None), te_sim, t0)
        if not learned:
            return FoldResult(f, fseed, len(train_pairs), len(test_pairs), None, acc0, None, t0)
        used = np.unique(train_pairs[:, :2])
        local = {int(g): k for k, g in enumerate(used)}
        cons = [PairConstraint(local[int(i)], local[int(j)], bool(s)) for i, j, s in train_pairs]
        metric, report = itml_fit(X[used], cons, replace(config, seed=fseed), backend=backend)
        t1, _ = best_threshold(_pair_dists(X, train_pairs, metric.M), tr_sim)
        acc1 = _accuracy(_pair_dists(X, test_pairs, metric.M), te_sim, t1)
        return FoldResult(f, fseed, len(train_pairs), len(test_pairs), acc1, acc0, t1, t0,
                          report.converged, report.sweeps)

    results = _map(run, list(zip(fold_list, seeds)), threads)
    return MatchResult(representation, tuple(results))


def baseline_match_eval(ds: PairDataset, kind: str, folds: int = 10, seed: int = 0) -> list[float]:
    """Per-fold held-out accuracy of thresholding one fixed distance kind."""
    from .distances import distance

    fold_ids = ds.folds if ds.folds is not None else assign_folds(ds.similar, folds, seed)
    d = np.array([distance(kind, ds.items[i], ds.items[j]) for i, j, _ in ds.pairs])
    sim = ds.similar
    out = []
    for f in sorted(set(fold_ids.tolist())):
        test = fold_ids == f
        t, _ = best_threshold(d[~test], sim[~test])
        out.append(_accuracy(d[test], sim[test], t))
    return out


# -- K-means ----------------------------------------------------------------

def kmeans_cost(X, assignments, centers=None) -> float:
    """Sum of squared distances to cluster centers (means of the assigned points by default)."""
    X = np.asarray(X, dtype=np.float64)
    a = np.asarray(assignments)
    if centers is None:
        k = int(a.max()) + 1
        centers = np.array([X[a == c].mean(axis=0) if np.any(a == c) else np.zeros(X.shape[1])
                            for c in range(k)])
    diff = X - np.asarray(centers)[a]
    return float(np.sum(diff * diff))


def _sq_dists(X, C):
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def lloyd(X, k: int, rng: np.random.Generator, max_iter: int = 300,
          debug: bool = False) -> tuple[np.ndarray, float, list[float]]:
    """One Lloyd run from a Forgy initialization.

    Returns the final assignments, their cost, and the cost after every
    iteration (non-increasing).
    """
    X = np.asarray(X, dtype=np.float64)
    N = X.shape[0]
    centers = X[rng.choice(N, size=k, replace=False)].copy()
    assign = None
    history: list[float] = []
    for _ in range(max_iter):
        D = _sq_dists(X, centers)
        new = np.argmin(D, axis=1)
        counts = np.bincount(new, minlength=k)
        for e in np.flatnonzero(counts == 0):
            own = D[np.arange(N), new]
            movable = counts[new] > 1
            # farthest point from its centroid; argmax picks the lowest index on ties
            p = int(np.argmax(np.where(movable, own, -np.inf)))
            counts[new[p]] -= 1
            new[p] = e
            counts[e] += 1
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        centers = np.array([X[assign == c].mean(axis=0) for c in range(k)])
        cost = kmeans_cost(X, assign, centers)
        if debug and history and cost > history[-1] * (1 + 1e-12) + 1e-12:
            raise AssertionError(f"K-means cost increased: {history[-1]} -> {cost}")
        history.append(cost)
    return assign, history[-1], history


def kmeans(vectors, k: int, restarts: int = 20, seed: int = 0, max_iter: int = 300,
           threads: int = 1, debug: bool = False) -> ClusterResult:
    """Best-of-``restarts`` Lloyd K-means (minimum cost wins, earliest restart on ties)."""
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if not 1 <= k <= X.shape[0]:
        raise ConfigError(f"k={k} must lie in [1, {X.shape[0]}]")
    if restarts < 1:
        raise ConfigError("restarts must be >= 1")
    seeds = _child_seeds(seed, restarts)
    runs = _map(lambda s: lloyd(X, k, np.random.default_rng(s), max_iter, debug), seeds, threads)
    costs = [r[1] for r in runs]
    best = int(np.argmin(costs))
    return ClusterResult(runs[best][0], costs[best], restarts, seed, tuple(costs), best)


def cluster_accuracy(assignments, labels, backend: str | None = None) -> float:
    """Fraction of items correct under the best one-to-one cluster-to-class mapping."""
    a = np.asarray(assignments, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)
    if a.shape != y.shape:
        raise ShapeError("assignments and labels differ in length")
    if a.size == 0:
        raise InsufficientDataError("no items")
    k = int(max(a.max(), y.max())) + 1
    if k > MAX_ACCURACY_CLASSES:
        raise ConfigError(
            f"{k} clusters/classes exceed the brute-force limit of {MAX_ACCURACY_CLASSES}; "
            "use an assignment-problem solver instead")
    C = np.zeros((k, k), dtype=np.int64)
    np.add.at(C, (a, y), 1)
    return _backend.get(backend).best_permutation_score(C) / a.size


# -- clustering protocol ----------------------------------------------------

def training_constraints(labels) -> list[PairConstraint]:
    """All unordered pairs, similar when the labels agree."""
    y = np.asarray(labels)
    return [PairConstraint(i, j, bool(y[i] == y[j]))
            for i in range(len(y)) for j in range(i + 1, len(y))]


def split_train(labels, fraction: float, seed: int = 0, min_per_class: int = 2) -> np.ndarray:
    """Stratified random training mask with ``round(fraction * count)`` items per class."""
    if not 0 < fraction <= 1:
        raise ConfigError(f"train fraction must lie in (0, 1], got {fraction}")
    y = np.asarray(labels)
    rng = np.random.default_rng(seed)
    mask = np.zeros(y.size, dtype=bool)
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        m = min(idx.size, max(min_per_class, int(round(fraction * idx.size))))
        mask[rng.choice(idx, size=m, replace=False)] = True
    return mask


def _fit_transform(X, labels, mask, config, backend):
    cons = training_constraints(labels[mask])
    metric, report = itml_fit(X[mask], cons, config, backend=backend)
    return X @ metric.factor(), report


def cluster_spd(ds: ClusterDataset, representation: str = "log-euclidean",
                config: ItmlConfig | None = None, k: int | None = None, restarts: int = 20,
                seed: int = 0, learned: bool = True, threads: int = 1,
                backend: str | None = None) -> tuple[ClusterResult, float]:
    """Cluster every item, optionally after learning a metric on the training subset.

    Returns the K-means result and the clustering accuracy over all items.
    """
    config = config or ItmlConfig()
    k = ds.k if k is None else k
    X = represent_all(ds.items, representation)
    if learned:
        if ds.train_mask.sum() < 2:
            raise InsufficientDataError("learned clustering needs at least 2 training items")
        X, _ = _fit_transform(X, ds.labels, ds.train_mask, config, backend)
    res = kmeans(X, k, restarts, seed, threads=threads)
    return res, cluster_accuracy(res.assignments, ds.labels, backend)


def select_gamma_cv(ds: ClusterDataset, representation: str, grid: Sequence[float],
                    config: ItmlConfig | None = None, k: int | None = None,
                    restarts: int = 20, seed: int = 0,
                    backend: str | None = None) -> tuple[float, dict[float, float]]:
    """Pick ``gamma`` by two-fold cross-validation on the training items.

    The training items are split into two stratified halves; for each gamma
    a metric is learned on one half and the other half is clustered, in both
    directions. Returns the gamma with the best mean accuracy (first in
    ``grid`` on ties) and all scores.
    """
    config = config or ItmlConfig()
    grid = list(grid)
    if len(grid) == 1:
        return float(grid[0]), {}
    k = ds.k if k is None else k
    tr = np.flatnonzero(ds.train_mask)
    y = ds.labels[tr]
    X = represent_all([ds.items[i] for i in tr], representation)
    half = split_train(y, 0.5, seed, min_per_class=1)
    scores = {}
    for g in grid:
        cfg = replace(config, gamma=float(g))
        accs = []
        for fit_mask in (half, ~half):
            if fit_mask.sum() < 2 or (~fit_mask).sum() < k:
                continue
            Z, _ = _fit_transform(X, y, fit_mask, cfg, backend)
            res = kmeans(Z[~fit_mask], k, restarts, seed)
            accs.append(cluster_accuracy(res.assignments, y[~fit_mask], backend))
        scores[float(g)] = float(np.mean(accs)) if accs else 0.0
    best = max(scores, key=lambda g: (scores[g], -grid.index(g)))
    return best, scores


# -- synthetic data ---------------------------------------------------------

def _spaced_points(rng: np.random.Generator, k: int, s: int, gap: float) -> np.ndarray:
    """``k`` points in R^s, pairwise at least ``gap`` apart, centered at the origin.

    Dart throwing in a cube that grows whenever a point cannot be placed.
    """
    if k == 1 or gap == 0:
        return np.zeros((k, s))
    side = gap * max(2.0, 1.5 * k ** (1.0 / s))
    pts: list[np.ndarray] = []
    tries = 0
    while len(pts) < k:
        cand = rng.uniform(-side / 2, side / 2, size=s)
        if all(np.linalg.norm(cand - p) >= gap for p in pts):
            pts.append(cand)
            tries = 0
            continue
        tries += 1
        if tries > 200:
            side *= 1.25
            tries = 0
    P = np.array(pts)
    return P - P.mean(axis=0)


def synth_spd_clusters(n: int, k: int, per_class: int, spread: float = 0.25,
                       nuisance: float = 1.5, seed: int = 0, signal_dims: int | None = None,
                       separation: float = 1.5) -> ClusterDataset:
    """Labeled SPD matrices whose class structure lives in a few tangent coordinates.

    Items are ``exp(unvec(v))`` with ``v = base + center[class] + noise``.
    ``base`` is a random symmetric matrix shared by all classes. Class
    centers differ only on ``signal_dims`` coordinates (default
    ``max(1, d // 3)``), rescaled so the closest two centers are
    ``separation`` apart. Noise has standard deviation ``spread`` on the
    signal coordinates and ``nuisance`` on the rest.
    """
    if min(n, k, per_class) < 1 or spread < 0 or nuisance < 0:
        raise ConfigError("n, k, per_class must be positive and spread, nuisance nonnegative")
    d = vec_dim(n)
    s = max(1, d // 3) if signal_dims is None else signal_dims
    if not 1 <= s <= d:
        raise ConfigError(f"signal_dims must lie in [1, {d}]")
    rng = np.random.default_rng(seed)
    signal = np.sort(rng.choice(d, size=s, replace=False))
    nuis = np.setdiff1d(np.arange(d), signal)
    base = rng.normal(scale=0.3, size=d)
    centers = np.zeros((k, d))
    centers[:, signal] = _spaced_points(rng, k, s, separation)
    scale = np.empty(d)
    scale[signal] = spread
    scale[nuis] = nuisance
    labels = np.repeat(np.arange(k), per_class)
    items = []
    for c in labels:
        v = base + centers[c] + rng.normal(size=d) * scale
        items.append(sym_exp(unvec(v, n)))
    return ClusterDataset(items, labels)


def synth_pairs(ds: ClusterDataset, n_similar: int, n_dissimilar: int, folds: int = 10,
                seed: int = 0) -> PairDataset:
    """Balanced labeled pairs drawn from a labeled item set, with stratified folds."""
    y = ds.labels
    N = len(y)
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(N, 1)
    same = y[iu] == y[ju]
    sim_pool = np.flatnonzero(same)
    dis_pool = np.flatnonzero(~same)
    if n_similar > sim_pool.size or n_dissimilar > dis_pool.size:
        raise ConfigError(
            f"requested {n_similar} similar / {n_dissimilar} dissimilar pairs, "
            f"available {sim_pool.size} / {dis_pool.size}")
    pick_s = rng.choice(sim_pool, size=n_similar, replace=False)
    pick_d = rng.choice(dis_pool, size=n_dissimilar, replace=False)
    rows = [(iu[p], ju[p], 1) for p in pick_s] + [(iu[p], ju[p], 0) for p in pick_d]
    pairs = np.array(rows, dtype=np.int64).reshape(-1, 3)
    fold_ids = assign_folds(pairs[:, 2] == 1, folds, seed) if folds >= 2 else None
    return PairDataset(ds.items, pairs, fold_ids)


# -- text files -------------------------------------------------------------

def read_pairs(fh: TextIO | Iterable[str]) -> tuple[np.ndarray, np.ndarray | None]:
    """``i j s|d [fold]`` lines; folds must be given for all pairs or none."""
    rows, folds = [], []
    for lineno, raw in enumerate(fh, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        t = line.split()
        if len(t) not in (3, 4) or t[2] not in ("s", "d"):
            raise FormatError(f"pairs line {lineno}: expected 'i j s|d [fold]', got {raw.strip()!r}")
        try:
            rows.append((int(t[0]), int(t[1]), 1 if t[2] == "s" else 0))
            folds.append(int(t[3]) if len(t) == 4 else None)
        except ValueError:
            raise FormatError(f"pairs line {lineno}: non-integer index or fold") from None
    have = [f is not None for f in folds]
    if any(have) and not all(have):
        raise FormatError("fold column present on some pair lines but not others")
    pairs = np.array(rows, dtype=np.int64).reshape(-1, 3)
    return pairs, (np.array(folds, dtype=np.int64) if folds and all(have) else None)


def write_pairs(pairs, fh: TextIO, folds=None) -> None:
    for r, (i, j, s) in enumerate(np.asarray(pairs)):
        tail = "" if folds is None else f" {int(folds[r])}"
        fh.write(f"{int(i)} {int(j)} {'s' if s else 'd'}{tail}\n")


def read_labels(fh: TextIO | Iterable[str], n_items: int | None = None) -> np.ndarray:
    """``item_index label`` lines; labels may be any token and are mapped to 0..k-1 in sorted order."""
    entries = {}
    for lineno, raw in enumerate(fh, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        t = line.split()
        if len(t) != 2:
            raise FormatError(f"labels line {lineno}: expected 'item_index label'")
        try:
            idx = int(t[0])
        except ValueError:
            raise FormatError(f"labels line {lineno}: non-integer item index") from None
        entries[idx] = t[1]
    N = n_items if n_items is not None else (max(entries) + 1 if entries else 0)
    missing = [i for i in range(N) if i not in entries]
    if missing or any(i >= N or i < 0 for i in entries):
        raise FormatError(f"labels do not cover items 0..{N - 1} exactly (missing {missing[:5]})")
    raw_labels = [entries[i] for i in range(N)]
    try:
        keys = sorted(set(raw_labels), key=int)
    except ValueError:
        keys = sorted(set(raw_labels))
    code = {lab: c for c, lab in enumerate(keys)}
    return np.array([code[lab] for lab in raw_labels], dtype=np.int64)


def write_labels(labels, fh: TextIO) -> None:
    for i, lab in enumerate(np.asarray(labels)):
        fh.write(f"{i} {int(lab)}\n")

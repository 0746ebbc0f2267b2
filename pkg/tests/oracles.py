"""Independent oracles used by the test suite.

Nothing here imports the code paths it checks, except for plain data
containers.
"""
import itertools
import math

import numpy as np


def itml_objective(M, zeta, M0, zeta0, gamma):
    """LogDet objective of the slack ITML problem, computed from scratch."""
    d = M.shape[0]
    A = np.linalg.solve(M0, M)
    sign, ld = np.linalg.slogdet(A)
    assert sign > 0
    term_m = np.trace(A) - ld - d
    r = np.asarray(zeta) / np.asarray(zeta0)
    term_z = np.sum(r - np.log(r) - 1.0)
    return float(term_m + gamma * term_z)


def itml_cvx(points, constraints, M0, zeta0, gamma):
    """Solve the ITML program with a general-purpose conic solver.

    ``constraints`` is a list of ``(i, j, similar: bool)``.
    Returns ``(objective, M, zeta)``.
    """
    import cvxpy as cp

    X = np.asarray(points, dtype=float)
    d = X.shape[1]
    M = cp.Variable((d, d), PSD=True)
    z = cp.Variable(len(constraints))
    M0inv = np.linalg.inv(M0)
    _, ld0 = np.linalg.slogdet(M0)
    z0 = np.asarray(zeta0, dtype=float)
    obj = (cp.trace(M0inv @ M) - cp.log_det(M) + ld0 - d
           + gamma * cp.sum(cp.multiply(z, 1.0 / z0) - cp.log(z) + np.log(z0) - 1.0))
    cons = []
    for c, (i, j, sim) in enumerate(constraints):
        v = X[i] - X[j]
        q = cp.sum(cp.multiply(np.outer(v, v), M))
        cons.append(q <= z[c] if sim else q >= z[c])
    prob = cp.Problem(cp.Minimize(obj), cons)
    try:
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    except Exception:
        prob.solve(solver=cp.SCS, eps=1e-10, max_iters=200000)
    Mv = 0.5 * (M.value + M.value.T)
    zv = np.asarray(z.value).ravel()
    return itml_objective(Mv, zv, M0, z0, gamma), Mv, zv


def all_pairs_sq_dists(points, M0):
    X = np.asarray(points, dtype=float)
    out = []
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            v = X[i] - X[j]
            out.append(float(v @ M0 @ v))
    return sorted(out)


def nearest_rank(sorted_values, q):
    k = max(1, math.ceil(q / 100.0 * len(sorted_values)))
    return sorted_values[k - 1]


def accuracy_by_permutation(assignments, labels):
    """Best one-to-one relabeling accuracy, enumerating label permutations."""
    a = list(assignments)
    b = list(labels)
    k = max(max(a), max(b)) + 1
    best = 0
    for perm in itertools.permutations(range(k)):
        hits = sum(1 for x, y in zip(a, b) if perm[x] == y)
        best = max(best, hits)
    return best / len(a)


def threshold_scan(distances, labels):
    """Exhaustive accuracy over the candidate threshold set, smallest t on ties."""
    ds = sorted(set(distances))
    cands = [ds[0] - 1.0] + [(x + y) / 2 for x, y in zip(ds, ds[1:])] + [ds[-1] + 1.0]
    best_t, best_acc = None, -1.0
    for t in cands:
        acc = sum((d <= t) == s for d, s in zip(distances, labels)) / len(distances)
        if acc > best_acc:
            best_t, best_acc = t, acc
    return best_t, best_acc


def region_covariance_loops(F, unbiased=True):
    """Two-pass covariance with explicit loops."""
    N = len(F)
    f = len(F[0])
    mean = [0.0] * f
    for row in F:
        for a in range(f):
            mean[a] += row[a]
    mean = [m / N for m in mean]
    C = [[0.0] * f for _ in range(f)]
    for row in F:
        for a in range(f):
            da = row[a] - mean[a]
            for b in range(f):
                C[a][b] += da * (row[b] - mean[b])
    div = N - 1 if unbiased else N
    return np.array(C) / div


def pixel_features_loops(rgb):
    """Per-pixel feature vectors with explicit neighbor lookups."""
    h, w, _ = rgb.shape
    W = [[0.299 * rgb[y, x, 0] + 0.587 * rgb[y, x, 1] + 0.114 * rgb[y, x, 2]
          for x in range(w)] for y in range(h)]

    def at(y, x):
        return W[min(max(y, 0), h - 1)][min(max(x, 0), w - 1)]

    out = []
    for y in range(h):
        for x in range(w):
            dx = (at(y, x + 1) - at(y, x - 1)) / 2.0
            dy = (at(y + 1, x) - at(y - 1, x)) / 2.0
            dxx = at(y, x + 1) - 2.0 * at(y, x) + at(y, x - 1)
            dyy = at(y + 1, x) - 2.0 * at(y, x) + at(y - 1, x)
            out.append([x, y, rgb[y, x, 0], rgb[y, x, 1], rgb[y, x, 2],
                        abs(dx), abs(dy), abs(dxx), abs(dyy)])
    return np.array(out)

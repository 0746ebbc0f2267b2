"""Pure-Python/NumPy reference versions of the compiled kernels.

Signatures and in-place semantics match ``_ckernels.pyx`` exactly; the test
suite runs both and compares.
"""
import itertools
import math

import numpy as np


def itml_sweep(M, V, delta, zeta, lam, gamma, order, skipped):
    """One cyclic pass of slack Bregman projections, updating arrays in place.

    For each constraint ``c`` in ``order`` with difference vector ``V[c]``
    and sign ``delta[c]`` (+1 similar, -1 dissimilar), project the current
    ``(M, zeta)`` onto ``V[c]^T M V[c] = zeta[c]``, truncated so the dual
    variable ``lam[c]`` stays nonnegative. Constraints with a zero
    quadratic form are skipped and flagged in ``skipped``.
    """
    hard = math.isinf(gamma)
    gp = 1.0 if hard else gamma / (gamma + 1.0)
    for c in order:
        v = V[c]
        Mv = M @ v
        p = float(v @ Mv)
        if p <= 0.0:
            skipped[c] = 1
            continue
        dl = delta[c]
        z = zeta[c]
        alpha = min(lam[c], dl * gp * (1.0 / p - 1.0 / z))
        beta = dl * alpha / (1.0 - dl * alpha * p)
        if not hard:
            zeta[c] = gamma * z / (gamma + dl * alpha * z)
        lam[c] -= alpha
        M += beta * np.outer(Mv, Mv)


def best_permutation_score(C):
    """Max over permutations ``pi`` of ``sum_i C[i, pi[i]]`` by enumeration."""
    C = np.asarray(C)
    k = C.shape[0]
    rows = range(k)
    best = None
    for perm in itertools.permutations(range(k)):
        s = 0
        for i in rows:
            s += C[i, perm[i]]
        if best is None or s > best:
            best = s
    return int(best) if best is not None else 0

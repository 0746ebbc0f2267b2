import math

import numpy as np
import pytest

from conftest import rand_invertible, rand_rotation, rand_spd
from spdmetric._errors import NumericalError, ShapeError
from spdmetric.distances import KIND_NAMES, KINDS, distance, get_kind

SQRT2LN2 = math.sqrt(2) * math.log(2)

# (symmetric, triangle, geodesic, affine, scale, rotation, inversion)
EXPECTED_PROPERTIES = {
    "frobenius": (1, 1, 0, 0, 0, 1, 0),
    "cholesky-frobenius": (1, 1, 0, 0, 0, 0, 0),
    "j-divergence": (1, 0, 0, 1, 1, 1, 1),
    "jbld": (1, 0, 0, 1, 1, 1, 1),
    "affine-invariant": (1, 1, 1, 1, 1, 1, 1),
    "log-frobenius": (1, 1, 1, 0, 1, 1, 1),
}

TRANSFORMS = {
    "affine_invariant": lambda rng, n: (lambda P, A=rand_invertible(rng, n): A @ P @ A.T),
    "scale_invariant": lambda rng, n: (lambda P, s=rng.uniform(0.1, 10): s * P),
    "rotation_invariant": lambda rng, n: (lambda P, R=rand_rotation(rng, n): R @ P @ R.T),
    "inversion_invariant": lambda rng, n: (lambda P: np.linalg.inv(P)),
}


def test_kind_registry():
    assert KIND_NAMES == tuple(EXPECTED_PROPERTIES)
    for name, flags in EXPECTED_PROPERTIES.items():
        p = KINDS[name].properties
        got = (p.symmetric, p.triangle_inequality, p.geodesic, p.affine_invariant,
               p.scale_invariant, p.rotation_invariant, p.inversion_invariant)
        assert got == tuple(bool(f) for f in flags), name
    with pytest.raises(ValueError):
        get_kind("euclid")


@pytest.mark.parametrize("kind, P1, P2, expected", [
    ("frobenius", 2 * np.eye(2), np.eye(2), math.sqrt(2)),
    ("cholesky-frobenius", 4 * np.eye(2), np.eye(2), math.sqrt(2)),
    ("j-divergence", 2 * np.eye(2), np.eye(2), 0.5),
    ("jbld", 2 * np.eye(2), np.eye(2), math.sqrt(2 * math.log(1.5) - math.log(2))),
    ("affine-invariant", 2 * np.eye(2), np.eye(2), SQRT2LN2),
    ("log-frobenius", 2 * np.eye(2), np.eye(2), SQRT2LN2),
])
def test_diagonal_examples(kind, P1, P2, expected):
    assert distance(kind, P1, P2) == pytest.approx(expected, rel=1e-12)


def test_jbld_diagonal_value():
    # 12 significant digits, matching the CLI output format
    assert f"{distance('jbld', 2 * np.eye(2), np.eye(2)):.12g}" == "0.343195331635"


def test_commuting_pair_affine_equals_log():
    a, b, c, d = 3.0, 0.5, 1.2, 7.0
    expected = math.sqrt(math.log(a / c) ** 2 + math.log(b / d) ** 2)
    P1, P2 = np.diag([a, b]), np.diag([c, d])
    assert distance("affine-invariant", P1, P2) == pytest.approx(expected, rel=1e-12)
    assert distance("log-frobenius", P1, P2) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("kind", KIND_NAMES)
def test_self_distance_zero(kind, rng):
    for n in (3, 5, 9):
        P = rand_spd(rng, n)
        scale = max(1.0, np.linalg.norm(P))
        assert distance(kind, P, P) / scale <= 1e-10


@pytest.mark.parametrize("kind", KIND_NAMES)
def test_symmetry_and_nonnegativity(kind, rng):
    for _ in range(20):
        P1, P2 = rand_spd(rng, 4), rand_spd(rng, 4)
        d12, d21 = distance(kind, P1, P2), distance(kind, P2, P1)
        assert d12 >= 0
        assert abs(d12 - d21) <= 1e-10 * max(1.0, d12)


def test_errors():
    with pytest.raises(ShapeError):
        distance("frobenius", np.eye(2), np.eye(3))
    with pytest.raises(NumericalError):
        distance("log-frobenius", np.diag([1.0, -1.0]), np.eye(2))


@pytest.mark.parametrize("prop", list(TRANSFORMS))
def test_non_invariance_witnesses(prop, rng):
    """Each kind without a property has an instance breaking it by > 1e-3 relative."""
    idx = {"affine_invariant": 3, "scale_invariant": 4, "rotation_invariant": 5, "inversion_invariant": 6}[prop]
    for kind, flags in EXPECTED_PROPERTIES.items():
        if flags[idx]:
            continue
        witnessed = False
        for _ in range(50):
            P1, P2 = rand_spd(rng, 3), rand_spd(rng, 3)
            T = TRANSFORMS[prop](rng, 3)
            d0, d1 = distance(kind, P1, P2), distance(kind, T(P1), T(P2))
            if abs(d1 - d0) > 1e-3 * d0:
                witnessed = True
                break
        assert witnessed, (kind, prop)


def test_triangle_violations_recorded_for_divergences(rng):
    """j-divergence and jbld carry no triangle guarantee; count witnesses for information."""
    counts = {}
    for kind in ("j-divergence", "jbld"):
        hits = 0
        for _ in range(300):
            A, B, C = (rand_spd(rng, 3, spread=2.0) for _ in range(3))
            if distance(kind, A, C) > distance(kind, A, B) + distance(kind, B, C) + 1e-10:
                hits += 1
        counts[kind] = hits
    print("triangle violations in 300 triples:", counts)
    assert all(v >= 0 for v in counts.values())

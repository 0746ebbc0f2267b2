import io
import json
import math

import numpy as np
import pytest

from conftest import rand_spd
from spdmetric._errors import FormatError, InsufficientDataError, ShapeError
from spdmetric.distances import distance
from spdmetric.evaluation import synth_spd_clusters, training_constraints
from spdmetric.geodesic import (
    LearnedMetric,
    dump_model,
    embed,
    geodesic_dist,
    geodesic_sq,
    learn_geodesic,
    learn_metric,
    load_model,
    save_model,
)
from spdmetric.itml import ItmlConfig, MahalanobisMetric
from spdmetric.linalg import VEC_CONVENTION, lie_product, spd_log, unvec
from spdmetric.representation import BASELINE_DISTANCE, REPRESENTATIONS, represent


def random_metric(rng, n):
    d = n * (n + 1) // 2
    B = rng.normal(size=(d, d))
    return LearnedMetric(n, MahalanobisMetric(B @ B.T + 0.1 * np.eye(d)))


def test_embed_examples(rng):
    np.testing.assert_array_equal(embed(np.eye(3)), np.zeros(6))
    np.testing.assert_allclose(embed(np.diag([math.e, 1.0])), [1.0, 0.0, 0.0], atol=1e-15)
    for _ in range(20):
        P = rand_spd(rng, 4)
        np.testing.assert_allclose(unvec(embed(P)), spd_log(P), atol=1e-12)


def test_representations(rng):
    np.testing.assert_array_equal(represent(4 * np.eye(2), "cholesky"), [2.0, 0.0, 2.0])
    for tag in REPRESENTATIONS:
        P1, P2 = rand_spd(rng, 3), rand_spd(rng, 3)
        d = np.linalg.norm(represent(P1, tag) - represent(P2, tag))
        assert d == pytest.approx(distance(BASELINE_DISTANCE[tag], P1, P2), rel=1e-10)
    with pytest.raises(ValueError):
        represent(np.eye(2), "raw")


def test_identity_examples():
    m = LearnedMetric.identity(2)
    r = math.sqrt(2) * math.log(2)
    assert geodesic_sq(m, 2 * np.eye(2), np.eye(2)) == pytest.approx(r * r, rel=1e-14)
    assert geodesic_dist(m, 2 * np.eye(2), np.eye(2)) == pytest.approx(r, rel=1e-14)
    assert geodesic_dist(m, 2 * np.eye(2), np.eye(2)) == distance("log-frobenius", 2 * np.eye(2), np.eye(2))


def test_identity_reduction(rng):
    for n in (2, 3, 5):
        m = LearnedMetric.identity(n)
        for _ in range(30):
            P1, P2 = rand_spd(rng, n), rand_spd(rng, n)
            ref = distance("log-frobenius", P1, P2)
            assert abs(geodesic_dist(m, P1, P2) - ref) <= 1e-10 * ref


def test_factor_oracle(rng):
    m = random_metric(rng, 3)
    L = np.linalg.cholesky(m.M)
    for _ in range(30):
        P1, P2 = rand_spd(rng, 3), rand_spd(rng, 3)
        ref = float(np.sum((L.T @ (embed(P1) - embed(P2))) ** 2))
        assert geodesic_sq(m, P1, P2) == pytest.approx(ref, rel=1e-10)


def test_metric_axioms(rng):
    m = random_metric(rng, 3)
    P = rand_spd(rng, 3)
    assert geodesic_sq(m, P, P) == 0.0
    for _ in range(1000):
        A, B, C = (rand_spd(rng, 3) for _ in range(3))
        assert geodesic_dist(m, A, B) == geodesic_dist(m, B, A)
        assert geodesic_dist(m, A, C) <= geodesic_dist(m, A, B) + geodesic_dist(m, B, C) + 1e-12


def test_bi_and_scale_invariance(rng):
    m = random_metric(rng, 3)
    for _ in range(50):
        P1, P2, Q = (rand_spd(rng, 3) for _ in range(3))
        s = rng.uniform(0.1, 10.0)
        d = geodesic_dist(m, P1, P2)
        assert geodesic_dist(m, lie_product(Q, P1), lie_product(Q, P2)) == pytest.approx(d, rel=1e-8)
        assert geodesic_dist(m, s * P1, s * P2) == pytest.approx(d, rel=1e-8)


def test_shape_errors(rng):
    m = LearnedMetric.identity(3)
    with pytest.raises(ShapeError):
        geodesic_dist(m, np.eye(2), np.eye(2))
    with pytest.raises(ShapeError):
        LearnedMetric(3, MahalanobisMetric.identity(5))
    with pytest.raises(ShapeError):
        learn_metric([np.eye(2), np.eye(3)], [(0, 1, True)])


def test_insufficient_data():
    with pytest.raises(InsufficientDataError):
        learn_geodesic([np.eye(2)], [])
    with pytest.raises(InsufficientDataError):
        learn_geodesic([np.eye(2), 2 * np.eye(2)], [])


def test_feasible_prior_gives_identity(backend):
    items = [np.eye(2), np.diag([1.01, 1.0]), np.diag([20.0, 1.0]), np.diag([20.0, 1.01])]
    cons = [(0, 1, True), (2, 3, True), (0, 2, False), (1, 3, False)]
    m = learn_geodesic(items, cons, ItmlConfig(thresholds=(0.1, 5.0)), backend=backend)
    np.testing.assert_allclose(m.M, np.eye(3), atol=1e-6)


def test_separated_clusters_all_satisfied(backend):
    # classes differ on a few tangent coordinates with almost no noise there, so a
    # metric suppressing the noisy coordinates meets every threshold
    ds = synth_spd_clusters(3, 2, 15, spread=0.01, nuisance=0.5, seed=1, separation=4.0)
    cons = training_constraints(ds.labels)
    m = learn_geodesic(ds.items, cons, backend=backend)
    assert m.report.satisfied()
    assert m.provenance["n_similar"] + m.provenance["n_dissimilar"] == len(cons)


def test_model_round_trip(rng):
    ds = synth_spd_clusters(3, 2, 10, seed=2)
    m = learn_geodesic(ds.items, training_constraints(ds.labels)[:40])
    buf = io.StringIO()
    save_model(m, buf)
    doc = json.loads(buf.getvalue())
    assert doc["vec_convention"] == VEC_CONVENTION
    assert doc["d"] == 6 and doc["n"] == 3
    back = load_model(io.StringIO(buf.getvalue()))
    np.testing.assert_array_equal(back.M, m.M)
    P1, P2 = rand_spd(rng, 3), rand_spd(rng, 3)
    assert geodesic_dist(back, P1, P2) == geodesic_dist(m, P1, P2)
    assert dump_model(m) == buf.getvalue()


def test_model_convention_mismatch():
    doc = json.loads(dump_model(LearnedMetric.identity(2)))
    doc["vec_convention"]["offdiag_weight"] = "1"
    with pytest.raises(FormatError):
        load_model(io.StringIO(json.dumps(doc)))
    with pytest.raises(FormatError):
        load_model(io.StringIO("{not json"))
    with pytest.raises(FormatError):
        load_model(io.StringIO('{"format": "other"}'))

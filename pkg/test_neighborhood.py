"""
Testes de distâncias, similaridade e seleção dos k vizinhos
"""
import math

import numpy as np
import pytest

from src.core.neighborhood import (
    SimilarityModel,
    build_indicator,
    feature_distances,
    geo_distances,
    init_weight,
    similarity,
)
from src.core.types import AreaCatalog, ViewSet
from src.errors import InvalidInputError


def _haversine_oracle(lat1, lon1, lat2, lon2):
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * 6371.0 * math.asin(math.sqrt(a))


def _pair(lat1, lon1, lat2, lon2):
    return AreaCatalog(ids=["a", "b"], coords=[(lat1, lon1), (lat2, lon2)], known=[True, True])


def test_geo_distance_identical_points():
    geo = geo_distances(_pair(-33.8688, 151.2093, -33.8688, 151.2093))
    assert np.all(geo == 0.0)


def test_geo_distance_one_degree_east_of_sydney():
    geo = geo_distances(_pair(-33.8688, 151.2093, -33.8688, 152.2093))
    d = float(geo[0, 1])
    assert d == pytest.approx(_haversine_oracle(-33.8688, 151.2093, -33.8688, 152.2093), rel=1e-12)
    assert d == pytest.approx(92.5, abs=0.5)
    assert geo[1, 0] == d


def test_collinear_points_along_meridian():
    catalog = AreaCatalog(
        ids=["1", "2", "3"],
        coords=[(-33.80, 151.0), (-33.90, 151.0), (-34.00, 151.0)],
        known=[True, True, True],
    )
    geo = geo_distances(catalog)
    assert np.allclose(geo, geo.T)
    assert np.all(np.diagonal(geo) == 0)
    assert geo[0, 2] == pytest.approx(2 * geo[0, 1], rel=1e-3)


def test_feature_distance_pythagorean():
    views = ViewSet(views=(np.array([[0.0, 0.0], [3.0, 4.0]]),))
    assert feature_distances(views, standardize=False)[0, 1] == pytest.approx(5.0)


def test_feature_distance_identical_rows():
    views = ViewSet(views=(np.array([[1.0, 2.0], [1.0, 2.0], [5.0, 0.0]]),))
    assert feature_distances(views)[0, 1] == 0.0


def test_feature_distances_match_brute_force(rng):
    X1 = rng.normal(size=(6, 3))
    X2 = rng.normal(scale=10.0, size=(6, 1))
    dist = feature_distances(ViewSet(views=(X1, X2)))

    raw = np.hstack([X1, X2])
    z = (raw - raw.mean(axis=0)) / raw.std(axis=0)
    for i in range(6):
        for j in range(6):
            expected = math.sqrt(sum((z[i, c] - z[j, c]) ** 2 for c in range(z.shape[1])))
            assert dist[i, j] == pytest.approx(expected, abs=1e-12)


def test_feature_distances_need_a_view():
    with pytest.raises(InvalidInputError):
        feature_distances(ViewSet.empty())


def test_similarity_hand_example():
    geo = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])
    feat = np.array([[0.0, 4.0, 2.0], [4.0, 0.0, 3.0], [2.0, 3.0, 0.0]])
    S = similarity(geo, feat).S
    assert S[0, 1] == pytest.approx(0.5)
    assert S[0, 0] == 2.0
    assert S[0, 2] == pytest.approx(0.5)
    assert np.all((S >= 0) & (S <= 2))


def test_similarity_farthest_in_both_metrics_is_zero():
    geo = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])
    assert similarity(geo, geo).S[0, 2] == 0.0


def test_similarity_is_not_symmetric_in_general():
    geo = np.array([[0.0, 1.0, 4.0], [1.0, 0.0, 1.0], [4.0, 1.0, 0.0]])
    S = similarity(geo).S
    assert S[0, 1] != S[1, 0]


def test_similarity_zero_row_is_rejected():
    with pytest.raises(InvalidInputError):
        similarity(np.zeros((3, 3)))


def test_geo_only_similarity_range(catalog5):
    S = similarity(geo_distances(catalog5)).S
    assert np.all((S >= 0) & (S <= 1))
    assert np.all(np.diagonal(S) == 1.0)


def test_build_indicator_forced_selection():
    catalog = AreaCatalog(ids=list("wxyz"), coords=[(0, 0), (0, 1), (1, 0), (1, 1)], known=[True] * 4)
    nbr = build_indicator(similarity(geo_distances(catalog)), catalog, 3)
    assert np.array_equal(nbr.H, 1.0 - np.eye(4))


def test_build_indicator_matches_sort_oracle(rng):
    for _ in range(100):
        n = int(rng.integers(4, 11))
        known = rng.random(n) < 0.7
        known[rng.choice(n, size=2, replace=False)] = True
        n_known = int(known.sum())
        k = int(rng.integers(1, n_known))
        catalog = AreaCatalog(ids=[str(i) for i in range(n)], coords=rng.random((n, 2)), known=known)
        # pontuações arredondadas forçam empates
        scores = np.round(rng.random((n, n)) * 4) / 2
        sim = similarity(np.ones((n, n)) - np.eye(n))
        sim = type(sim)(geo_dist=sim.geo_dist, feat_dist=None, S=scores)

        nbr = build_indicator(sim, catalog, k)

        for i in range(n):
            candidates = [j for j in range(n) if known[j] and j != i]
            expected = sorted(candidates, key=lambda j: (-scores[i, j], j))[:k]
            assert list(nbr.neighbors[i]) == expected
            row = np.zeros(n)
            row[expected] = 1.0
            assert np.array_equal(nbr.H[i], row)
        assert np.all(nbr.H.sum(axis=1) == k)
        assert np.all(np.diagonal(nbr.H) == 0)
        assert not nbr.H[:, ~known].any()


def test_build_indicator_is_deterministic(catalog5):
    sim = similarity(geo_distances(catalog5))
    assert np.array_equal(build_indicator(sim, catalog5, 2).H, build_indicator(sim, catalog5, 2).H)


def test_build_indicator_rejects_large_k(catalog5):
    sim = similarity(geo_distances(catalog5))
    with pytest.raises(InvalidInputError):
        build_indicator(sim, catalog5, 5)
    with pytest.raises(InvalidInputError):
        build_indicator(sim, catalog5.with_targets([0, 1]), 3)


def test_init_weight_is_similarity():
    geo = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])
    feat = np.array([[0.0, 4.0, 2.0], [4.0, 0.0, 3.0], [2.0, 3.0, 0.0]])
    sim = similarity(geo, feat)
    catalog = AreaCatalog(ids=["1", "2", "3"], coords=np.zeros((3, 2)), known=[True] * 3)
    nbr = build_indicator(sim, catalog, 1)
    W0 = init_weight(sim, nbr)

    assert np.array_equal(W0, sim.S)
    localized = nbr.H * W0
    assert np.all(localized[nbr.H == 0] == 0)
    # linha 0: s_01 = s_02 = 0.5, empate vence o menor índice
    assert np.array_equal(localized[0], [0.0, 0.5, 0.0])


def test_init_weight_normalized_rows_sum_to_one(catalog5):
    sim = similarity(geo_distances(catalog5))
    nbr = build_indicator(sim, catalog5, 2)
    W0 = init_weight(sim, nbr, normalize=True)

    assert np.allclose((nbr.H * W0).sum(axis=1), 1.0)
    off = nbr.H == 0
    assert np.array_equal(W0[off], np.asarray(sim.S)[off])
    # proporções dentro da vizinhança são as da similaridade
    raw = nbr.H * np.asarray(sim.S)
    i = int(np.argmax(raw.sum(axis=1)))
    assert np.allclose((nbr.H * W0)[i] * raw[i].sum(), raw[i])


def test_init_weight_zero_similarity_row_is_uniform():
    geo = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])
    sim = similarity(geo)
    catalog = AreaCatalog(ids=["1", "2", "3"], coords=np.zeros((3, 2)), known=[True] * 3)
    nbr = build_indicator(sim, catalog, 2)
    blank = SimilarityModel(geo_dist=geo, feat_dist=None, S=np.zeros((3, 3)))
    W0 = init_weight(blank, nbr, normalize=True)

    assert np.allclose(W0[nbr.H == 1], 0.5)
    assert np.all(W0[nbr.H == 0] == 0)

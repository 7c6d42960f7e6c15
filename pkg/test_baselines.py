"""
Testes dos métodos de referência LS-KNN e NMF
"""
import numpy as np
import pytest

from src.core.neighborhood import SimilarityModel, build_similarity, rank_candidates
from src.core.types import AreaCatalog, ViewSet, build_mask
from src.errors import InvalidInputError
from src.services.baselines import ls_knn_predict, masked_nmf, nmf_predict, shift_nonnegative


def _catalog(n, known, rng):
    return AreaCatalog(ids=[str(i) for i in range(n)], coords=rng.random((n, 2)), known=known)


def _sim(S):
    n = S.shape[0]
    return SimilarityModel(geo_dist=np.ones((n, n)) - np.eye(n), feat_dist=None, S=S)


def test_lsknn_identical_neighbor_rows(rng):
    known = np.array([True, True, True, False, True])
    catalog = _catalog(5, known, rng)
    row = rng.random(5)
    F = np.tile(row, (5, 1))
    mask = build_mask(catalog)
    pred = ls_knn_predict(F, build_similarity(catalog, ViewSet.empty()), mask, k=2).matrix
    assert np.allclose(pred[3, known], row[known])


def test_lsknn_single_neighbor_copies_its_row(rng):
    known = np.array([True, False, True, True])
    catalog = _catalog(4, known, rng)
    S = np.array([
        [2.0, 0.1, 0.2, 0.3],
        [0.9, 2.0, 0.4, 0.2],
        [0.1, 0.2, 2.0, 0.3],
        [0.3, 0.1, 0.2, 2.0],
    ])
    F = rng.random((4, 4))
    pred = ls_knn_predict(F, _sim(S), build_mask(catalog), k=1).matrix
    assert np.array_equal(pred[1, known], F[0, known])
    # coluna alvo 1: vizinho mais similar da área 1 é a área 0
    assert np.array_equal(pred[known, 1], F[known, 0])


def test_lsknn_matches_brute_force(rng):
    n, k = 6, 2
    known = np.array([True, True, False, True, True, False])
    catalog = _catalog(n, known, rng)
    S = rng.random((n, n))
    F = rng.random((n, n)) * 100
    pred = ls_knn_predict(F, _sim(S), build_mask(catalog), k=k).matrix

    known_idx = [j for j in range(n) if known[j]]
    neighbors = {i: sorted(known_idx, key=lambda j: (-S[i, j], j))[:k] for i in range(n) if not known[i]}
    for i in range(n):
        for j in range(n):
            if known[i] and known[j]:
                expected = 0.0
            elif not known[i] and known[j]:
                expected = sum(F[a, j] for a in neighbors[i]) / k
            elif known[i] and not known[j]:
                expected = sum(F[i, b] for b in neighbors[j]) / k
            else:
                expected = sum(F[a, b] for a in neighbors[i] for b in neighbors[j]) / k ** 2
            assert pred[i, j] == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_lsknn_needs_enough_known_areas(rng):
    catalog = _catalog(4, np.array([True, True, False, False]), rng)
    with pytest.raises(InvalidInputError):
        ls_knn_predict(np.ones((4, 4)), _sim(rng.random((4, 4))), build_mask(catalog), k=3)


def test_rank_candidates_tie_break():
    scores = np.array([0.5, 0.9, 0.5, 0.9])
    assert list(rank_candidates(scores, np.array([0, 1, 2, 3]))) == [1, 3, 0, 2]


def test_nmf_rank_one_is_exact(rng):
    a = rng.random(6) + 0.1
    b = rng.random(10) + 0.1
    M = np.outer(a, b)
    U, Vt, objective = masked_nmf(M, np.ones_like(M), rank=1, iters=500, rng=rng)
    assert objective[-1] <= 1e-10 * np.sum(M ** 2)
    assert np.allclose(U @ Vt, M, rtol=1e-6)


def test_nmf_factors_stay_non_negative(rng):
    M = rng.random((6, 10))
    weights = (rng.random((6, 10)) < 0.7).astype(float)
    U, Vt, _ = masked_nmf(M, weights, rank=3, iters=100, rng=rng)
    assert np.all(U >= 0)
    assert np.all(Vt >= 0)


def test_nmf_objective_is_non_increasing(rng):
    M = rng.random((6, 10)) * 20
    weights = (rng.random((6, 10)) < 0.7).astype(float)
    _, _, objective = masked_nmf(M, weights, rank=3, iters=200, rng=rng)
    for before, after in zip(objective, objective[1:]):
        assert after <= before * (1 + 1e-9) + 1e-12


def test_shift_nonnegative_records_offsets():
    X = np.array([[-2.0, 1.0], [3.0, 4.0]])
    shifted, offsets = shift_nonnegative(X)
    assert np.array_equal(shifted, [[0.0, 1.0], [5.0, 4.0]])
    assert np.array_equal(offsets, [2.0, 0.0])


def test_baselines_are_zero_on_observed_and_non_negative(small_city, rng):
    catalog = small_city.catalog.with_targets([0, 5, 9])
    mask = build_mask(catalog)
    F = small_city.flows[next(iter(small_city.flows))].last
    sim = build_similarity(catalog, small_city.views)

    for prediction in (
        ls_knn_predict(F, sim, mask, k=4),
        nmf_predict(F, small_city.views, mask, rank=3, iters=50, seed=1),
    ):
        assert np.all(prediction.matrix[mask.Y] == 0)
        assert np.all(prediction.matrix >= 0)
        assert prediction.matrix[~mask.Y].any()

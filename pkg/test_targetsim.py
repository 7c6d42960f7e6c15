"""
Testes da reatribuição de fluxos das áreas alvo
"""
import numpy as np

from src.core.neighborhood import geo_distances
from src.core.targetsim import closest_known, reassign
from src.core.types import AreaCatalog, FlowTensor


def _line_catalog(n, known):
    coords = [(-33.9, 151.0 + 0.01 * i) for i in range(n)]
    return AreaCatalog(ids=[f"a{i}" for i in range(n)], coords=coords, known=known)


def test_no_targets_is_identity(rng):
    catalog = _line_catalog(4, [True] * 4)
    flows = FlowTensor("morning", rng.random((2, 4, 4)))
    out, plan = reassign(flows, catalog, geo_distances(catalog))
    assert np.array_equal(out.matrices, flows.matrices)
    assert plan.targets == ()


def test_departures_move_to_closest_area():
    # a0 é alvo; a1 é a área conhecida mais próxima
    catalog = _line_catalog(3, [False, True, True])
    F = np.arange(9, dtype=float).reshape(3, 3) + 1
    out, plan = reassign(FlowTensor("morning", F), catalog, geo_distances(catalog))
    G = out.last

    assert plan.closest == {0: 1}
    assert G[1, 2] == F[0, 2] + F[1, 2]
    assert np.all(G[0] == 0)
    assert np.all(G[:, 0] == 0)


def test_mass_conservation_matches_brute_force(rng):
    n = 6
    catalog = _line_catalog(n, [True, False, True, True, False, True])
    F = rng.integers(0, 100, size=(2, n, n)).astype(float)
    geo = geo_distances(catalog)
    out, plan = reassign(FlowTensor("nonrush", F), catalog, geo)

    for d in range(2):
        expected = [[F[d, i, j] for j in range(n)] for i in range(n)]
        for t, c in plan.closest.items():
            for j in range(n):
                expected[c][j] += expected[t][j]
                expected[t][j] = 0.0
        for t, c in plan.closest.items():
            for i in range(n):
                expected[i][c] += expected[i][t]
                expected[i][t] = 0.0
        assert np.array_equal(out.matrices[d], np.array(expected))
        assert out.matrices[d].sum() == F[d].sum()
        assert np.array_equal(out.matrices[d].sum(axis=1), np.array(expected).sum(axis=1))


def test_known_block_outside_receivers_is_unchanged(rng):
    n = 6
    catalog = _line_catalog(n, [True, False, True, True, True, True])
    F = rng.random((1, n, n))
    out, plan = reassign(FlowTensor("morning", F), catalog, geo_distances(catalog))
    receivers = set(plan.closest.values())
    untouched = [i for i in catalog.known_indices if i not in receivers]
    for i in untouched:
        for j in untouched:
            assert out.matrices[0, i, j] == F[0, i, j]


def test_closest_tie_goes_to_lower_index():
    catalog = AreaCatalog(
        ids=["t", "leste", "oeste"],
        coords=[(0.0, 0.0), (0.0, 1.0), (0.0, -1.0)],
        known=[False, True, True],
    )
    assert closest_known(catalog, geo_distances(catalog)) == {0: 1}


def test_plan_to_dict_uses_area_ids():
    catalog = _line_catalog(4, [False, True, True, False])
    _, plan = reassign(FlowTensor("morning", np.ones((4, 4))), catalog, geo_distances(catalog))
    payload = plan.to_dict(catalog.ids)
    assert payload["targets"] == ["a0", "a3"]
    assert payload["closest"] == {"a0": "a1", "a3": "a2"}
    assert payload["provenance"] == {"a1": ["a0"], "a2": ["a3"]}

"""
Testes do gerador de cidade sintética e da instância plantada
"""
import numpy as np
import pytest
from pydantic import ValidationError

from src.core.types import Period, build_mask
from src.errors import InvalidInputError
from src.services.datagen import SyntheticSpec, expected_flows, generate, planted_instance
from src.solver.mlc import ModelState, init_C, loss


def test_noiseless_days_are_identical():
    city = generate(SyntheticSpec(n=12, days=2, noise=0.0, view_dims=(2,), view_names=("economy",)))
    for tensor in city.flows.values():
        assert np.array_equal(tensor.matrices[0], tensor.matrices[1])


def test_generation_is_deterministic(small_spec):
    first, second = generate(small_spec), generate(small_spec)
    assert first.catalog.ids == second.catalog.ids
    assert np.array_equal(first.catalog.coords, second.catalog.coords)
    for period in first.flows:
        assert np.array_equal(first.flows[period].matrices, second.flows[period].matrices)
    for a, b in zip(first.views.views, second.views.views):
        assert np.array_equal(a, b)


def test_generated_city_shape():
    city = generate(SyntheticSpec(n=20, days=3, seed=9))
    assert city.catalog.n == 20
    assert city.catalog.known.all()
    assert set(city.flows) == set(Period)
    assert [v.shape for v in city.views.views] == [(20, 43), (20, 44), (20, 50), (20, 97)]
    assert city.views.names == ("economy", "family", "income", "population")
    for tensor in city.flows.values():
        assert tensor.matrices.shape == (3, 20, 20)
        assert np.all(tensor.matrices >= 0)
    assert all(np.isfinite(v).all() for v in city.views.views)


def test_morning_residential_origins_feed_business_areas():
    spec = SyntheticSpec(n=5, gamma=0.0)
    regions = np.array([0, 0, 1, 1, 2])  # residencial, residencial, comercial, comercial, misto
    lam = expected_flows(np.zeros((5, 5)), regions, np.ones(5), Period.MORNING_RUSH, spec)
    into_business = lam[:, regions == 1]
    from_residential = into_business[regions == 0].sum(axis=1)
    from_business = into_business[regions == 1].sum(axis=1)
    assert np.all(from_residential.min() > from_business.max())


def test_gravity_decay_within_region_pair():
    spec = SyntheticSpec(n=4, gamma=2.0, intra_factor=1.0)
    geo = np.array([
        [0.0, 1.0, 3.0, 8.0],
        [1.0, 0.0, 2.0, 7.0],
        [3.0, 2.0, 0.0, 5.0],
        [8.0, 7.0, 5.0, 0.0],
    ])
    lam = expected_flows(geo, np.zeros(4, dtype=int), np.ones(4), Period.NON_RUSH, spec)
    row = lam[0, 1:]
    assert np.all(np.diff(row) < 0)


def test_synthetic_spec_validation():
    with pytest.raises(ValidationError):
        SyntheticSpec(n=3)
    with pytest.raises(ValidationError):
        SyntheticSpec(view_dims=(2, 3), view_names=("economy",))
    with pytest.raises(ValidationError):
        SyntheticSpec(noise=-0.1)


def test_planted_instance_has_zero_residual():
    inst = planted_instance(n=10, k=2, seed=42)
    F = inst.flows.matrices
    A = inst.nbr.H * inst.W_star
    known = inst.catalog.known
    assert np.allclose(A @ F @ inst.C_star, F, rtol=0, atol=1e-8 * np.max(np.abs(F)))
    assert np.all(F >= 0)
    assert not F[:, :, ~known].any()
    assert np.all(F[:, :, known] > 0)
    assert inst.catalog.ids[0] == "P01"
    assert (~known).sum() == 2

    state = ModelState(C=inst.C_star, W=inst.W_star, F_work=F)
    assert loss(state, inst.nbr.H) == pytest.approx(0.0, abs=1e-12 * np.sum(F ** 2))


def test_planted_weights_are_row_stochastic():
    inst = planted_instance(n=10, k=2, seed=42)
    assert np.allclose((inst.nbr.H * inst.W_star).sum(axis=1), 1.0)


def test_planted_correlation_is_recovered_by_init_C():
    inst = planted_instance(n=10, k=2, seed=42)
    Y = build_mask(inst.catalog).Y
    F0 = np.where(Y, inst.flows.matrices, 0.0)
    C = init_C(F0, inst.nbr.H, inst.W_star, Y)
    assert np.allclose(C, inst.C_star, rtol=0, atol=1e-8 * np.max(np.abs(inst.C_star)))


def test_planted_instance_neighbors_are_known():
    inst = planted_instance(n=9, k=3, seed=7)
    Y = build_mask(inst.catalog).Y
    assert not inst.nbr.H[:, ~np.diagonal(Y)].any()
    assert np.all(inst.nbr.H.sum(axis=1) == 3)


def test_planted_instance_rejects_bad_sizes():
    with pytest.raises(InvalidInputError):
        planted_instance(n=13, k=2, seed=0)
    with pytest.raises(InvalidInputError):
        planted_instance(n=6, k=5, seed=0)

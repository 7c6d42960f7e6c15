"""
Fixtures compartilhadas dos testes
"""
import numpy as np
import pytest

from src.config import SolverConfig
from src.core.types import AreaCatalog, FlowTensor, Period, ViewSet
from src.services.datagen import SyntheticSpec, generate


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def catalog5():
    """Cinco áreas próximas ao centro de Sydney, todas conhecidas"""
    coords = [
        (-33.87, 151.21),
        (-33.88, 151.20),
        (-33.86, 151.23),
        (-33.90, 151.18),
        (-33.85, 151.25),
    ]
    return AreaCatalog(ids=["a", "b", "c", "d", "e"], coords=coords, known=np.ones(5, dtype=bool))


@pytest.fixture
def flows5(rng):
    return FlowTensor(Period.MORNING_RUSH, rng.integers(0, 50, size=(2, 5, 5)).astype(float))


@pytest.fixture
def small_spec():
    return SyntheticSpec(
        n=15,
        days=2,
        view_dims=(3, 4),
        view_names=("economy", "income"),
        periods=(Period.MORNING_RUSH,),
        seed=3,
    )


@pytest.fixture
def small_city(small_spec):
    return generate(small_spec)


@pytest.fixture
def fast_cfg():
    return SolverConfig(k=2, lam=0.1, alpha=0.01, max_iter=30, epsilon=1e-12, seed=0)


@pytest.fixture
def fast_settings():
    return {"lsknn_k": 4, "nmf_rank": 3, "nmf_iters": 50}


@pytest.fixture
def empty_views():
    return ViewSet.empty()

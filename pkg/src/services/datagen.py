"""
Gerador de cidade sintética com fluxos OD do tipo gravitacional

Substitui os dados transacionais e estatísticos reais (não redistribuíveis).
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.neighborhood import (
    NeighborModel,
    SimilarityModel,
    build_indicator,
    geo_distances,
    init_weight,
    similarity,
)
from src.core.types import AreaCatalog, Dataset, FlowTensor, Period, ViewSet
from src.errors import InvalidInputError

logger = logging.getLogger(__name__)

REGION_NAMES = ("residencial", "comercial", "misto")

# Massa de origem / destino por tipo de região em cada período
ORIGIN_PROFILE = {
    Period.MORNING_RUSH: (1.0, 0.2, 0.5),
    Period.AFTERNOON_RUSH: (0.2, 1.0, 0.5),
    Period.NON_RUSH: (0.5, 0.6, 0.5),
}
DESTINATION_PROFILE = {
    Period.MORNING_RUSH: (0.2, 1.0, 0.5),
    Period.AFTERNOON_RUSH: (1.0, 0.2, 0.5),
    Period.NON_RUSH: (0.5, 0.6, 0.5),
}


class SyntheticSpec(BaseModel):
    """Parâmetros da cidade sintética"""
    model_config = ConfigDict(frozen=True)

    n: int = Field(default=117, ge=4)
    regions: int = Field(default=3, ge=2)
    bbox: Tuple[float, float, float, float] = (-34.05, -33.70, 150.95, 151.30)  # lat_min, lat_max, lon_min, lon_max
    days: int = Field(default=14, ge=1)
    noise: float = Field(default=0.1, ge=0.0)
    view_noise: float = Field(default=0.1, ge=0.0)
    view_dims: Tuple[int, ...] = (43, 44, 50, 97)
    view_names: Tuple[str, ...] = ("economy", "family", "income", "population")
    gamma: float = Field(default=2.0, ge=0.0)
    scale: float = Field(default=2000.0, gt=0.0)
    intra_factor: float = Field(default=0.1, ge=0.0)
    periods: Tuple[Period, ...] = tuple(Period)
    seed: int = 0

    @model_validator(mode="after")
    def _check(self):
        if len(self.view_dims) != len(self.view_names):
            raise ValueError("view_dims e view_names com tamanhos diferentes")
        lat_min, lat_max, lon_min, lon_max = self.bbox
        if not (lat_min < lat_max and lon_min < lon_max):
            raise ValueError("bbox invalida")
        return self


@dataclass(frozen=True)
class SyntheticCity:
    catalog: AreaCatalog
    flows: Dict[Period, FlowTensor]
    views: ViewSet
    regions: np.ndarray  # tipo de região de cada área

    def as_dataset(self) -> Dataset:
        return Dataset(catalog=self.catalog, flows=self.flows, views=self.views)


def _profile(table, period: Period, region: int) -> float:
    base = table[period]
    if region < len(base):
        return base[region]
    return 0.3 + 0.4 * ((region * 0.618) % 1.0)


def region_name(region: int) -> str:
    return REGION_NAMES[region] if region < len(REGION_NAMES) else f"tipo{region}"


def expected_flows(
    geo: np.ndarray,
    regions: np.ndarray,
    size: np.ndarray,
    period: Period,
    spec: SyntheticSpec
) -> np.ndarray:
    """f_ij ∝ massa_origem(i) * massa_destino(j) / (1 + dist_ij)^gamma"""
    origin = size * np.array([_profile(ORIGIN_PROFILE, period, r) for r in regions])
    destination = size * np.array([_profile(DESTINATION_PROFILE, period, r) for r in regions])
    lam = spec.scale * np.outer(origin, destination) / (1.0 + geo) ** spec.gamma
    np.fill_diagonal(lam, np.diagonal(lam) * spec.intra_factor)
    return lam


def generate(spec: SyntheticSpec) -> SyntheticCity:
    """
    Gera catálogo, fluxos por período e visões de uma cidade sintética

    Regiões funcionais são espacialmente coerentes (cada área herda o tipo do
    centro mais próximo), então áreas vizinhas do mesmo tipo têm linhas de
    fluxo correlacionadas.

    Args:
        spec: Parâmetros da cidade

    Returns:
        SyntheticCity
    """
    rng = np.random.default_rng(spec.seed)
    lat_min, lat_max, lon_min, lon_max = spec.bbox

    coords = np.column_stack([
        rng.uniform(lat_min, lat_max, spec.n),
        rng.uniform(lon_min, lon_max, spec.n),
    ])
    centres = np.column_stack([
        rng.uniform(lat_min, lat_max, 2 * spec.regions),
        rng.uniform(lon_min, lon_max, 2 * spec.regions),
    ])
    centre_types = np.arange(2 * spec.regions) % spec.regions
    nearest = np.argmin(((coords[:, None, :] - centres[None, :, :]) ** 2).sum(axis=2), axis=1)
    regions = centre_types[nearest]

    size = rng.lognormal(mean=0.0, sigma=0.3, size=spec.n)
    catalog = AreaCatalog(
        ids=[f"A{i + 1:03d}" for i in range(spec.n)],
        coords=coords,
        known=np.ones(spec.n, dtype=bool),
    )
    geo = geo_distances(catalog)

    flows = {}
    for period in spec.periods:
        lam = expected_flows(geo, regions, size, period, spec)
        days = []
        for _ in range(spec.days):
            if spec.noise == 0:
                days.append(lam.copy())
                continue
            jitter = np.exp(spec.noise * rng.normal(size=spec.n) - 0.5 * spec.noise ** 2)
            days.append(rng.poisson(lam * jitter[:, None]).astype(np.float64))
        flows[period] = FlowTensor(period, np.stack(days))

    views = []
    for dim in spec.view_dims:
        prototypes = rng.normal(size=(spec.regions, dim))
        views.append(prototypes[regions] + spec.view_noise * rng.normal(size=(spec.n, dim)))

    logger.info(f"Cidade sintetica gerada: n={spec.n}, {spec.days} dias, {len(spec.periods)} periodos")
    return SyntheticCity(
        catalog=catalog,
        flows=flows,
        views=ViewSet(views=tuple(views), names=spec.view_names),
        regions=regions,
    )


@dataclass(frozen=True)
class PlantedInstance:
    """Instância com solução exata: F_d = (H⊙W*) F_d C* em todas as entradas"""
    catalog: AreaCatalog
    flows: FlowTensor
    views: ViewSet
    sim: SimilarityModel
    nbr: NeighborModel
    C_star: np.ndarray
    W_star: np.ndarray


def _second_eigenpair(B: np.ndarray) -> Optional[Tuple[float, np.ndarray]]:
    """Maior autovalor real de B com 0.2 < |mu| < 0.999 e seu autovetor (max |a| = 1)"""
    values, vectors = np.linalg.eig(B)
    usable = [
        i for i in range(len(values))
        if abs(values[i].imag) < 1e-12 and 0.2 < abs(values[i].real) < 0.999
    ]
    if not usable:
        return None
    best = max(usable, key=lambda i: (abs(values[i].real), -i))
    mu = float(values[best].real)
    a = vectors[:, best].real
    a = a / np.max(np.abs(a))
    if not np.allclose(B @ a, mu * a, atol=1e-10):
        return None
    return mu, a


def planted_instance(
    n: int,
    k: int,
    seed: int,
    n_targets: Optional[int] = None,
    days: int = 2,
    max_attempts: int = 50
) -> PlantedInstance:
    """
    Constrói uma instância de resíduo zero para testes de recuperação

    W* é a inicialização normalizada do solver (H⊙W* estocástica por linhas),
    então o bloco conhecido B de H⊙W* tem autovalor 1 com o vetor 1 e um
    segundo autovalor real mu com autovetor a. Com q e r ortogonais, ambos
    nulos nas colunas alvo:

        F_d (bloco conhecido) = s_d 1 q' + t_d a r'
        C* = q q'/(q'q) + r r'/(mu r'r)
        F_d (linhas alvo)     = (H⊙W*)_alvo F_d C*

    Vale (H⊙W*) F_d C* = F_d em todas as entradas, as colunas alvo são nulas
    e todos os fluxos são >= 0. As linhas de C* das áreas alvo são nulas, de
    modo que init_C sobre os dias empilhados devolve C* e o primeiro
    preenchimento do ajuste reproduz os fluxos não observados.

    Args:
        n: Número de áreas (<= 12)
        k: Tamanho da vizinhança
        seed: Semente
        n_targets: Áreas alvo (padrão: max(1, n // 5))
        days: Número de dias

    Returns:
        PlantedInstance
    """
    if not 4 <= n <= 12:
        raise InvalidInputError(f"planted_instance exige 4 <= n <= 12 (n={n})")
    n_targets = max(1, n // 5) if n_targets is None else n_targets
    if k >= n - n_targets:
        raise InvalidInputError(f"k={k} grande demais para {n - n_targets} areas conhecidas")

    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        coords = np.column_stack([
            -33.9 + 0.1 * rng.random(n),
            151.1 + 0.1 * rng.random(n),
        ])
        known = np.ones(n, dtype=bool)
        known[rng.choice(n, size=n_targets, replace=False)] = False
        catalog = AreaCatalog(ids=[f"P{i + 1:02d}" for i in range(n)], coords=coords, known=known)

        sim = similarity(geo_distances(catalog))
        nbr = build_indicator(sim, catalog, k)
        W_star = init_weight(sim, nbr, normalize=True)
        A = nbr.H * W_star

        pair = _second_eigenpair(A[np.ix_(known, known)])
        if pair is None:
            continue
        mu, a_known = pair
        a = np.zeros(n)
        a[known] = a_known

        q = np.where(known, rng.uniform(20.0, 60.0, size=n), 0.0)
        r = np.where(known, rng.normal(size=n), 0.0)
        r = r - (r @ q) / (q @ q) * q
        ratio = np.max(np.abs(r[known]) / q[known])
        if ratio < 1e-6:
            continue
        r = r * 0.4 * abs(mu) / ratio

        C_star = np.outer(q, q) / (q @ q) + np.outer(r, r) / (mu * (r @ r))
        s = rng.uniform(0.8, 1.2, size=days)
        t = rng.uniform(0.5, 1.0, size=days)
        F = np.stack([
            s[d] * np.outer(known.astype(float), q) + t[d] * np.outer(a, r)
            for d in range(days)
        ])
        F[:, ~known, :] = (A @ F @ C_star)[:, ~known, :]

        residual = A @ F @ C_star - F
        if np.max(np.abs(residual)) > 1e-10 * np.max(np.abs(F)) or np.any(F < 0):
            continue

        return PlantedInstance(
            catalog=catalog,
            flows=FlowTensor(Period.MORNING_RUSH, F),
            views=ViewSet.empty(),
            sim=sim,
            nbr=nbr,
            C_star=C_star,
            W_star=W_star,
        )

    raise InvalidInputError(f"construcao da instancia plantada inviavel (n={n}, k={k}, seed={seed})")

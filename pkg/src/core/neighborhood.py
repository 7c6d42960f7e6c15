"""
Similaridade entre áreas e seleção dos k vizinhos conhecidos mais próximos

s_ij = 2 - (dist_ij / max(dist_i,:) + dist'_ij / max(dist'_i,:))
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.distance import pdist, squareform
from sklearn.metrics.pairwise import haversine_distances

from src.core.types import AreaCatalog, ViewSet, _frozen
from src.errors import InvalidInputError

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class SimilarityModel:
    """Distâncias geográfica e de atributos e a matriz de similaridade S"""
    geo_dist: np.ndarray
    feat_dist: Optional[np.ndarray]  # None quando não há visões
    S: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "geo_dist", _frozen(self.geo_dist))
        if self.feat_dist is not None:
            object.__setattr__(self, "feat_dist", _frozen(self.feat_dist))
        object.__setattr__(self, "S", _frozen(self.S))


@dataclass(frozen=True)
class NeighborModel:
    """Indicadora H dos k vizinhos conhecidos de cada área"""
    k: int
    H: np.ndarray                       # (n, n) 0/1
    neighbors: Tuple[Tuple[int, ...], ...]
    sim: SimilarityModel                # similaridade usada na seleção

    def __post_init__(self):
        object.__setattr__(self, "H", _frozen(self.H))

    @property
    def S(self) -> np.ndarray:
        return self.sim.S


def geo_distances(catalog: AreaCatalog) -> np.ndarray:
    """Matriz n x n de distâncias haversine (km), simétrica e com diagonal zero"""
    dist = EARTH_RADIUS_KM * haversine_distances(np.radians(catalog.coords))
    np.fill_diagonal(dist, 0.0)
    return dist


def standardize_columns(X: np.ndarray) -> np.ndarray:
    """z-score por coluna; colunas constantes viram zero"""
    X = np.asarray(X, dtype=np.float64)
    std = X.std(axis=0)
    centered = X - X.mean(axis=0)
    safe = np.where(std > 0, std, 1.0)
    return np.where(std > 0, centered / safe, 0.0)


def feature_distances(views: ViewSet, standardize: bool = True) -> np.ndarray:
    """
    Distância euclidiana entre as linhas das visões concatenadas

    Args:
        views: Visões estatísticas (V >= 1)
        standardize: Aplica z-score por coluna antes de concatenar

    Returns:
        Matriz n x n simétrica com diagonal zero
    """
    if views.count == 0:
        raise InvalidInputError("feature_distances exige ao menos uma visao")
    blocks = [standardize_columns(X) if standardize else X for X in views.views]
    features = np.hstack(blocks)
    return squareform(pdist(features, metric="euclidean"))


def similarity(geo: np.ndarray, feat: Optional[np.ndarray] = None) -> SimilarityModel:
    """
    Constrói S com normalização pelo máximo de cada linha

    Sem visões (feat=None) usa apenas a parcela geográfica: s_ij = 1 - geo_ij / max(geo_i,:).
    S não é simétrica em geral.
    """
    geo = np.asarray(geo, dtype=np.float64)
    geo_max = geo.max(axis=1)
    if np.any(geo_max <= 0):
        rows = np.flatnonzero(geo_max <= 0).tolist()
        raise InvalidInputError(f"linhas com distancia geografica toda zero: {rows}")

    if feat is None:
        S = 1.0 - geo / geo_max[:, None]
        return SimilarityModel(geo_dist=geo, feat_dist=None, S=S)

    feat = np.asarray(feat, dtype=np.float64)
    feat_max = feat.max(axis=1)
    if np.any(feat_max <= 0):
        rows = np.flatnonzero(feat_max <= 0).tolist()
        raise InvalidInputError(f"linhas com distancia de atributos toda zero: {rows}")

    S = 2.0 - (geo / geo_max[:, None] + feat / feat_max[:, None])
    return SimilarityModel(geo_dist=geo, feat_dist=feat, S=S)


def build_similarity(catalog: AreaCatalog, views: ViewSet) -> SimilarityModel:
    """Atalho: distâncias do catálogo e das visões + similaridade"""
    geo = geo_distances(catalog)
    feat = feature_distances(views) if views.count else None
    return similarity(geo, feat)


def rank_candidates(scores: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Ordena candidatos por score decrescente; empate vence o menor índice"""
    order = np.lexsort((candidates, -scores[candidates]))
    return candidates[order]


def build_indicator(sim: SimilarityModel, catalog: AreaCatalog, k: int) -> NeighborModel:
    """
    Marca em cada linha de H os k vizinhos conhecidos mais similares

    Toda área (conhecida ou alvo) recebe exatamente k vizinhos; a própria
    área nunca é vizinha de si mesma.

    Args:
        sim: Modelo de similaridade
        catalog: Catálogo de áreas
        k: Tamanho da vizinhança

    Returns:
        NeighborModel com H e as listas ordenadas de vizinhos
    """
    n = catalog.n
    known_idx = catalog.known_indices
    if k < 1:
        raise InvalidInputError(f"k deve ser positivo (k={k})")
    if k >= len(known_idx):
        raise InvalidInputError(
            f"k={k} exige mais que {len(known_idx)} areas conhecidas"
        )

    H = np.zeros((n, n))
    neighbors = []
    for i in range(n):
        candidates = known_idx[known_idx != i]
        if len(candidates) < k:
            raise InvalidInputError(f"area {catalog.ids[i]} tem apenas {len(candidates)} candidatos")
        chosen = rank_candidates(sim.S[i], candidates)[:k]
        H[i, chosen] = 1.0
        neighbors.append(tuple(int(j) for j in chosen))

    return NeighborModel(k=k, H=H, neighbors=tuple(neighbors), sim=sim)


def init_weight(sim: SimilarityModel, nbr: NeighborModel, normalize: bool = False) -> np.ndarray:
    """
    W0 = S (apenas o padrão de H é usado adiante, via H ⊙ W)

    Com normalize=True as entradas do padrão de H são divididas pela soma da
    linha de H⊙S: (H⊙W0) 1 = 1 e (H⊙W0) F_d vira uma média ponderada das
    linhas vizinhas. Linhas cuja soma é zero recebem 1/k. Fora do padrão W0
    continua igual a S.
    """
    W0 = np.array(sim.S, dtype=np.float64, copy=True)
    if not normalize:
        return W0

    pattern = np.asarray(nbr.H) == 1
    sums = np.where(pattern, W0, 0.0).sum(axis=1, keepdims=True)
    scaled = np.where(sums > 0, W0 / np.where(sums > 0, sums, 1.0), 1.0 / nbr.k)
    W0[pattern] = scaled[pattern]
    return W0

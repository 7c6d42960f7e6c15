"""
Métodos de referência: LS-KNN e NMF sobre a concatenação fluxo + visões
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from src.config import Config
from src.core.neighborhood import SimilarityModel, rank_candidates
from src.core.types import ObservationMask, ViewSet
from src.errors import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BaselinePrediction:
    """Previsão de um método de referência no padrão (1 - Y)"""
    method: str
    matrix: np.ndarray
    details: dict = field(default_factory=dict)


def _assemble(Y: np.ndarray, rows: np.ndarray, cols: np.ndarray, both: np.ndarray) -> np.ndarray:
    """Monta a previsão: linhas alvo, colunas alvo e bloco alvo x alvo"""
    known = np.diagonal(Y)
    out = np.zeros(Y.shape)
    out = np.where(~known[:, None] & known[None, :], rows, out)
    out = np.where(known[:, None] & ~known[None, :], cols, out)
    out = np.where(~known[:, None] & ~known[None, :], both, out)
    return out


def ls_knn_predict(
    flows_D: np.ndarray,
    sim: SimilarityModel,
    mask: ObservationMask,
    k: int = Config.LSKNN_K
) -> BaselinePrediction:
    """
    Média dos fluxos das k áreas conhecidas mais similares

    Linha alvo i = média das linhas observadas dos vizinhos de i; coluna alvo
    j = média das colunas dos vizinhos de j; no bloco alvo x alvo usa-se a
    média do bloco vizinhos(i) x vizinhos(j).

    Args:
        flows_D: Matriz observada do dia D
        sim: Similaridades
        mask: Máscara de observação
        k: Número de vizinhos

    Returns:
        BaselinePrediction "lsknn"
    """
    Y = mask.Y
    known = np.diagonal(Y)
    known_idx = np.flatnonzero(known)
    if len(known_idx) < k:
        raise InvalidInputError(f"LS-KNN exige {k} areas conhecidas; ha {len(known_idx)}")

    n = Y.shape[0]
    F = np.where(Y, flows_D, 0.0)
    P = np.zeros((n, n))
    for i in np.flatnonzero(~known):
        chosen = rank_candidates(sim.S[i], known_idx)[:k]
        P[i, chosen] = 1.0 / k

    matrix = _assemble(Y, P @ F, F @ P.T, P @ F @ P.T)
    return BaselinePrediction("lsknn", matrix, {"k": k})


def shift_nonnegative(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Desloca cada coluna com valores negativos para que o mínimo seja zero"""
    offsets = np.minimum(X.min(axis=0), 0.0)
    return X - offsets, -offsets


def masked_nmf(
    M: np.ndarray,
    weights: np.ndarray,
    rank: int,
    iters: int,
    rng: np.random.Generator,
    eps: float = 1e-12
) -> Tuple[np.ndarray, np.ndarray, List[float]]:
    """
    NMF com pesos (0 = ausente) por atualizações multiplicativas

    Returns:
        (U, Vt, objetivo ponderado após cada iteração)
    """
    if rank < 1:
        raise InvalidInputError(f"rank deve ser >= 1 (rank={rank})")
    observed = M[weights > 0]
    scale = np.sqrt(max(observed.mean(), eps) / rank) if observed.size else 1.0
    U = rng.uniform(1e-8, scale, size=(M.shape[0], rank))
    Vt = rng.uniform(1e-8, scale, size=(rank, M.shape[1]))

    WM = weights * M
    objective = []
    for _ in range(iters):
        U *= (WM @ Vt.T) / ((weights * (U @ Vt)) @ Vt.T + eps)
        Vt *= (U.T @ WM) / (U.T @ (weights * (U @ Vt)) + eps)
        residual = M - U @ Vt
        objective.append(float(np.sum(weights * residual * residual)))
    return U, Vt, objective


def nmf_predict(
    flows_D: np.ndarray,
    views: ViewSet,
    mask: ObservationMask,
    rank: int = Config.NMF_RANK,
    iters: int = Config.NMF_ITERS,
    seed: int = 0
) -> BaselinePrediction:
    """
    Fatoração não negativa de [F_D | X_1 | ... | X_V] com as entradas não observadas ausentes

    Args:
        flows_D: Matriz observada do dia D
        views: Visões estatísticas (colunas negativas são deslocadas)
        mask: Máscara de observação
        rank: Posto da fatoração
        iters: Número fixo de iterações
        seed: Semente da inicialização

    Returns:
        BaselinePrediction "nmf"
    """
    Y = mask.Y
    n = Y.shape[0]
    blocks = [np.where(Y, flows_D, 0.0)]
    weights = [Y.astype(np.float64)]
    offsets = []
    for X in views.views:
        shifted, offset = shift_nonnegative(np.asarray(X, dtype=np.float64))
        blocks.append(shifted)
        weights.append(np.ones(shifted.shape))
        offsets.append(offset.tolist())

    M = np.hstack(blocks)
    U, Vt, objective = masked_nmf(M, np.hstack(weights), rank, iters, np.random.default_rng(seed))

    approx = U @ Vt[:, :n]
    matrix = np.where(Y, 0.0, np.maximum(approx, 0.0))
    logger.debug(f"NMF rank={rank}: objetivo final {objective[-1] if objective else float('nan'):.6g}")
    return BaselinePrediction("nmf", matrix, {"rank": rank, "iters": iters, "offsets": offsets, "objective": objective})

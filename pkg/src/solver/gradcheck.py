"""
Verificação dos gradientes analíticos por diferenças finitas centradas
"""
import logging
from dataclasses import replace
from typing import Dict, Tuple

import numpy as np

from src.core.neighborhood import build_indicator, build_similarity
from src.core.types import AreaCatalog, ViewSet
from src.solver.mlc import ModelState, grad_C, grad_W, loss

logger = logging.getLogger(__name__)


def finite_difference_gradients(
    state: ModelState,
    H: np.ndarray,
    views: ViewSet,
    lam: float,
    scale: float = 1e-6
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gradientes numéricos de C e W (W apenas no padrão de H)

    Passo h = scale * (1 + |x|) para cada entrada.
    """
    def evaluate(s: ModelState) -> float:
        return loss(s, H, views=views, lam=lam)

    C = np.array(state.C)
    W = np.array(state.W)
    gC = np.zeros_like(C)
    gW = np.zeros_like(W)

    for i, j in np.ndindex(C.shape):
        h = scale * (1.0 + abs(C[i, j]))
        plus, minus = C.copy(), C.copy()
        plus[i, j] += h
        minus[i, j] -= h
        gC[i, j] = (evaluate(replace(state, C=plus)) - evaluate(replace(state, C=minus))) / (2 * h)

    for i, j in zip(*np.nonzero(H)):
        h = scale * (1.0 + abs(W[i, j]))
        plus, minus = W.copy(), W.copy()
        plus[i, j] += h
        minus[i, j] -= h
        gW[i, j] = (evaluate(replace(state, W=plus)) - evaluate(replace(state, W=minus))) / (2 * h)

    return gC, gW


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Erro máximo relativo à maior magnitude entre os dois gradientes"""
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), 1e-300)
    return float(np.max(np.abs(analytic - numeric))) / scale


def random_instance(n: int, days: int, n_views: int, seed: int):
    """
    Instância aleatória pequena para o gradcheck

    Returns:
        (estado, H, visões)
    """
    rng = np.random.default_rng(seed)
    coords = np.column_stack([
        -33.9 + 0.2 * rng.random(n),
        151.0 + 0.2 * rng.random(n),
    ])
    catalog = AreaCatalog(ids=[f"a{i}" for i in range(n)], coords=coords, known=np.ones(n, dtype=bool))
    views = ViewSet(
        views=tuple(rng.normal(size=(n, int(rng.integers(2, 5)))) for _ in range(n_views)),
    )
    sim = build_similarity(catalog, views)
    nbr = build_indicator(sim, catalog, min(2, n - 1))

    state = ModelState(
        C=0.5 * rng.normal(size=(n, n)),
        W=np.array(sim.S) + 0.1 * rng.normal(size=(n, n)),
        F_work=rng.random((days, n, n)),
    )
    return state, nbr.H, views


def check_gradients(n: int, days: int, n_views: int, lam: float, seed: int) -> Dict[str, float]:
    """Compara gC e gW analíticos com as diferenças finitas numa instância aleatória"""
    state, H, views = random_instance(n, days, n_views, seed)
    num_C, num_W = finite_difference_gradients(state, H, views, lam)
    err_C = relative_error(grad_C(state, H, views=views, lam=lam), num_C)
    err_W = relative_error(grad_W(state, H), num_W)
    logger.debug(f"gradcheck n={n} D={days} V={n_views} lambda={lam}: C={err_C:.2e} W={err_W:.2e}")
    return {"C": err_C, "W": err_W}


def run_gradcheck(
    n: int,
    days: int,
    n_views: int,
    lams=(0.0, 0.1, 10.0),
    seed: int = 0,
    trials: int = 1
) -> Dict[str, object]:
    """
    Executa o gradcheck para cada lambda e para várias sementes

    Returns:
        Dicionário com os erros por caso e o erro máximo
    """
    cases = []
    for trial in range(trials):
        for lam in lams:
            errors = check_gradients(n, days, n_views, lam, seed + trial)
            cases.append({"seed": seed + trial, "lambda": lam, "error_C": errors["C"], "error_W": errors["W"]})
    worst = max(max(c["error_C"], c["error_W"]) for c in cases)
    return {"n": n, "days": days, "views": n_views, "cases": cases, "max_relative_error": worst}

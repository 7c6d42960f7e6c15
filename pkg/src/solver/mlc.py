"""
Aprendizado de correlação localizada com pesos adaptativos e guia multi-visão

Perda otimizada (F_d são as cópias de trabalho, X_v^k = H X_v):

    L = 1/2 sum_d ||F_d - (H⊙W) F_d C||_F^2 + lambda/2 sum_v ||X_v - C X_v^k||_F^2

Os gradientes abaixo são derivados desta perda. Diferem da forma impressa
usual em dois pontos: o termo de guia de gC usa X_v^k (C X_v^k X_v^k' - X_v X_v^k')
e gW leva a projeção H⊙ sobre o termo inteiro. O gradcheck arbitra.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import linalg

from src.config import SolverConfig
from src.core.neighborhood import NeighborModel, init_weight
from src.core.types import FlowTensor, ObservationMask, ViewSet, _frozen
from src.errors import DivergenceError, InvalidInputError

logger = logging.getLogger(__name__)

PINV_RCOND = 1e-10

STOP_CONVERGED = "converged"
STOP_MAX_ITER = "max-iter"
STOP_ZERO_GRADIENT = "zero-gradient"


@dataclass(frozen=True)
class ModelState:
    """Estado do otimizador: C, W e cópias de trabalho dos fluxos"""
    C: np.ndarray
    W: np.ndarray
    F_work: np.ndarray  # (D, n, n)
    iteration: int = 0
    loss_history: Tuple[float, ...] = ()
    zero_gradient: Tuple[bool, bool] = (False, False)  # (C, W) no último passo

    def __post_init__(self):
        object.__setattr__(self, "C", _frozen(self.C))
        object.__setattr__(self, "W", _frozen(self.W))
        object.__setattr__(self, "F_work", _frozen(self.F_work))


@dataclass(frozen=True)
class FitReport:
    """Trajetória do ajuste"""
    iterations: int
    final_loss: float
    losses: Tuple[float, ...]
    stop_reason: str
    zero_gradient_steps: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_loss": self.final_loss,
            "losses": list(self.losses),
            "stop_reason": self.stop_reason,
            "zero_gradient_steps": dict(self.zero_gradient_steps),
        }


def localized(H: np.ndarray, W: np.ndarray) -> np.ndarray:
    """H ⊙ W"""
    return H * W


def localized_views(H: np.ndarray, views: ViewSet):
    """Pares (X_v, X_v^k = H X_v)"""
    return [(X, H @ X) for X in views.views]


def _ensure_finite(value, what: str, iteration: Optional[int] = None):
    if not np.all(np.isfinite(value)):
        raise DivergenceError(f"{what} nao finito; reduza alpha", iteration)
    return value


def _residuals(A: np.ndarray, F: np.ndarray, C: np.ndarray) -> np.ndarray:
    """R_d = (H⊙W) F_d C - F_d para todos os dias"""
    return A @ F @ C - F


def _guide_value(C: np.ndarray, guide, lam: float) -> float:
    value = 0.0
    for X, Xk in guide:
        G = X - C @ Xk
        value += 0.5 * lam * float(np.sum(G * G))
    return value


def _grad_C_from(AF: np.ndarray, R: np.ndarray, C: np.ndarray, guide, lam: float) -> np.ndarray:
    g = np.sum(AF.transpose(0, 2, 1) @ R, axis=0)
    for X, Xk in guide:
        g += lam * ((C @ Xk - X) @ Xk.T)
    return g


def _grad_W_from(H: np.ndarray, R: np.ndarray, F: np.ndarray, C: np.ndarray) -> np.ndarray:
    FC = F @ C
    return H * np.sum(R @ FC.transpose(0, 2, 1), axis=0)


def loss(
    state: ModelState,
    H: np.ndarray,
    flows: Optional[np.ndarray] = None,
    views: ViewSet = ViewSet.empty(),
    lam: float = 0.0
) -> float:
    """
    Avalia a perda de traço com o termo de guia multi-visão

    Args:
        state: Estado atual (C, W)
        H: Indicadora de vizinhança
        flows: Matrizes (D, n, n); usa state.F_work se omitido
        views: Visões estatísticas
        lam: Peso do termo de guia

    Returns:
        Valor escalar >= 0
    """
    F = state.F_work if flows is None else np.asarray(flows, dtype=np.float64)
    R = _residuals(localized(H, state.W), F, state.C)
    value = 0.5 * float(np.sum(R * R))
    if lam:
        value += _guide_value(state.C, localized_views(H, views), lam)
    return _ensure_finite(value, "perda", state.iteration)


def grad_C(
    state: ModelState,
    H: np.ndarray,
    flows: Optional[np.ndarray] = None,
    views: ViewSet = ViewSet.empty(),
    lam: float = 0.0
) -> np.ndarray:
    """sum_d ((H⊙W)F_d)'((H⊙W)F_d C - F_d) + lambda sum_v (C X_v^k X_v^k' - X_v X_v^k')"""
    F = state.F_work if flows is None else np.asarray(flows, dtype=np.float64)
    AF = localized(H, state.W) @ F
    guide = localized_views(H, views) if lam else []
    g = _grad_C_from(AF, AF @ state.C - F, state.C, guide, lam)
    return _ensure_finite(g, "gradiente de C", state.iteration)


def grad_W(
    state: ModelState,
    H: np.ndarray,
    flows: Optional[np.ndarray] = None
) -> np.ndarray:
    """sum_d H ⊙ (((H⊙W)F_d C - F_d) C' F_d')"""
    F = state.F_work if flows is None else np.asarray(flows, dtype=np.float64)
    R = _residuals(localized(H, state.W), F, state.C)
    g = _grad_W_from(H, R, F, state.C)
    return _ensure_finite(g, "gradiente de W", state.iteration)


def _descend(X: np.ndarray, g: np.ndarray, alpha: float, grad_tol: float) -> Tuple[np.ndarray, bool]:
    norm = float(np.linalg.norm(g))
    if norm <= grad_tol:
        return X, True
    return X - alpha * g / norm, False


def step(
    state: ModelState,
    gC: np.ndarray,
    gW: np.ndarray,
    alpha: float,
    grad_tol: float = 0.0
) -> ModelState:
    """
    Passo de gradiente normalizado em C e W

    Uma variável cujo gradiente tem norma <= grad_tol não é alterada; o fato
    fica registrado em state.zero_gradient.
    """
    C, zero_C = _descend(state.C, gC, alpha, grad_tol)
    W, zero_W = _descend(state.W, gW, alpha, grad_tol)
    return replace(state, C=C, W=W, zero_gradient=(zero_C, zero_W))


def fill_unobserved(state: ModelState, H: np.ndarray, Y: np.ndarray) -> ModelState:
    """F_d <- Y⊙F_d + (1-Y)⊙((H⊙W)F_d C); entradas observadas ficam intactas"""
    Y = np.asarray(Y, dtype=bool)
    A = localized(H, state.W)
    F = state.F_work
    filled = np.where(Y, F, A @ F @ state.C)
    return replace(state, F_work=filled)


def init_C(F_D: np.ndarray, H: np.ndarray, W: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """
    C <- (Y⊙((H⊙W)F_D))^† (Y⊙F_D)

    Pseudo-inversa por SVD com corte relativo de 1e-10 do maior valor singular.
    F_D pode ser um dia (n, n) ou vários (D, n, n); com vários dias os sistemas
    são empilhados e resolvidos juntos.
    """
    Y = np.asarray(Y, dtype=np.float64)
    F = np.asarray(F_D, dtype=np.float64)
    M = Y * (localized(H, W) @ F)
    N = Y * F
    if F.ndim == 3:
        M = M.reshape(-1, M.shape[-1])
        N = N.reshape(-1, N.shape[-1])
    try:
        M_pinv = linalg.pinv(M, atol=0.0, rtol=PINV_RCOND)
    except (linalg.LinAlgError, ValueError) as e:
        raise InvalidInputError(f"Falha na pseudo-inversa: {e}") from e
    return M_pinv @ N


@dataclass(frozen=True)
class _Point:
    """Parâmetros, cópias de trabalho e produtos já calculados sobre elas"""
    C: np.ndarray
    W: np.ndarray
    F: np.ndarray
    AF: np.ndarray   # (H⊙W) F_d
    P: np.ndarray    # (H⊙W) F_d C
    R: np.ndarray    # P - F
    loss: float


def _evaluate(C, W, F, H, guide, lam: float, iteration: int) -> _Point:
    AF = localized(H, W) @ F
    P = AF @ C
    R = P - F
    value = 0.5 * float(np.sum(R * R)) + _guide_value(C, guide, lam)
    _ensure_finite(value, "perda", iteration)
    return _Point(C=C, W=W, F=F, AF=AF, P=P, R=R, loss=value)


def fit(
    flows: FlowTensor,
    nbr: NeighborModel,
    views: ViewSet,
    mask: ObservationMask,
    cfg: SolverConfig,
    C0: Optional[np.ndarray] = None,
    W0: Optional[np.ndarray] = None
) -> Tuple[ModelState, FitReport]:
    """
    Ajusta C e W por descida de gradiente normalizada alternada com o
    preenchimento das entradas não observadas

    Cada iteração preenche as entradas não observadas com os parâmetros
    correntes, avalia a perda (o resíduo é calculado uma vez e serve à perda e
    aos dois gradientes) e dá um passo normalizado em C e W. Uma iteração
    cuja perda supera a da anterior é descartada e o ajuste para; o histórico
    de perdas é não crescente. Também para quando a queda relativa fica
    abaixo de epsilon ou quando os dois gradientes são nulos.

    Args:
        flows: Fluxos de treino de um período (entradas não observadas são ignoradas)
        nbr: Modelo de vizinhança (H e S)
        views: Visões estatísticas (vazio desliga o termo de guia)
        mask: Máscara de observação
        cfg: Hiperparâmetros
        C0: Ponto de partida de C (padrão: init_C sobre todos os dias)
        W0: Ponto de partida de W (padrão: init_weight)

    Returns:
        (estado final, relatório do ajuste)
    """
    H = np.asarray(nbr.H)
    Y = np.asarray(mask.Y, dtype=bool)
    guide = localized_views(H, views) if cfg.lam else []

    W = init_weight(nbr.sim, nbr, cfg.normalize_weights) if W0 is None else np.array(W0, dtype=np.float64)
    F = np.where(Y, flows.matrices, 0.0)
    C = init_C(F, H, W, Y) if C0 is None else np.array(C0, dtype=np.float64)

    accepted = _evaluate(C, W, F, H, guide, cfg.lam, 0)
    losses = [accepted.loss]
    iteration = 0
    zero_steps = {"C": 0, "W": 0}
    zero_flags = (False, False)
    reason = STOP_MAX_ITER

    if math.isinf(cfg.epsilon):
        reason = STOP_CONVERGED
    else:
        C, W, P = accepted.C, accepted.W, accepted.P
        for t in range(1, cfg.max_iter + 1):
            # Y⊙F + (1-Y)⊙((H⊙W)F C) com os parâmetros correntes
            filled = np.where(Y, accepted.F, P)
            point = _evaluate(C, W, filled, H, guide, cfg.lam, t)
            if point.loss > accepted.loss:
                logger.debug(f"iteracao {t}: perda {point.loss:.6g} > {accepted.loss:.6g}, passo descartado")
                reason = STOP_CONVERGED
                break

            decrease = (accepted.loss - point.loss) / accepted.loss if accepted.loss > 0 else 0.0
            accepted = point
            iteration = t
            losses.append(point.loss)
            if t % cfg.log_every == 0:
                logger.debug(f"iteracao {t}: perda={point.loss:.6g}")

            R = point.R
            gC = _ensure_finite(_grad_C_from(point.AF, R, point.C, guide, cfg.lam), "gradiente de C", t)
            gW = _ensure_finite(_grad_W_from(H, R, point.F, point.C), "gradiente de W", t)
            C, zero_C = _descend(point.C, gC, cfg.alpha, cfg.grad_tol)
            W, zero_W = _descend(point.W, gW, cfg.alpha, cfg.grad_tol)
            zero_flags = (zero_C, zero_W)
            zero_steps["C"] += int(zero_C)
            zero_steps["W"] += int(zero_W)
            if zero_C and zero_W:
                reason = STOP_ZERO_GRADIENT
                break
            if decrease < cfg.epsilon:
                reason = STOP_CONVERGED
                break

            P = localized(H, W) @ point.F @ C

    state = ModelState(
        C=accepted.C,
        W=accepted.W,
        F_work=accepted.F,
        iteration=iteration,
        loss_history=tuple(losses),
        zero_gradient=zero_flags,
    )
    report = FitReport(
        iterations=iteration,
        final_loss=losses[-1],
        losses=tuple(losses),
        stop_reason=reason,
        zero_gradient_steps=zero_steps,
    )
    logger.info(
        f"Ajuste {flows.period.value}: {report.iterations} iteracoes, "
        f"perda final {report.final_loss:.6g} ({reason})"
    )
    return state, report


def fit_arrivals(
    flows: FlowTensor,
    nbr: NeighborModel,
    views: ViewSet,
    mask: ObservationMask,
    cfg: SolverConfig,
    C0: Optional[np.ndarray] = None,
    W0: Optional[np.ndarray] = None
) -> Tuple[ModelState, FitReport]:
    """Mesmo ajuste sobre F_d transpostas: aprende o lado das chegadas"""
    return fit(flows.transpose(), nbr, views, mask.transpose(), cfg, C0=C0, W0=W0)


def complete_day(state: ModelState, H: np.ndarray, Y: np.ndarray, flows_D: np.ndarray) -> np.ndarray:
    """Um passo de preenchimento sobre a matriz de um dia (não observadas partem de zero)"""
    Y = np.asarray(Y, dtype=bool)
    observed = np.where(Y, np.asarray(flows_D, dtype=np.float64), 0.0)
    return np.where(Y, observed, localized(H, state.W) @ observed @ state.C)


def predict(
    state: ModelState,
    H: np.ndarray,
    Y: np.ndarray,
    flows_D: np.ndarray
) -> np.ndarray:
    """
    F^_D = (1-Y)⊙((H⊙W) F_D C), com valores negativos truncados em zero

    Posições observadas retornam zero.
    """
    Y = np.asarray(Y, dtype=bool)
    raw = localized(H, state.W) @ np.asarray(flows_D, dtype=np.float64) @ state.C
    return np.where(Y, 0.0, np.maximum(raw, 0.0))


def merge_directions(
    observed_D: np.ndarray,
    departures: np.ndarray,
    arrivals: np.ndarray,
    Y: np.ndarray
) -> np.ndarray:
    """
    Junta as previsões dos dois lados numa matriz completa

    Linhas alvo vêm do lado das partidas, colunas alvo do lado das chegadas
    (já na orientação original) e o bloco alvo x alvo é a média dos dois.
    Entradas observadas são copiadas de observed_D.
    """
    Y = np.asarray(Y, dtype=bool)
    known = np.diagonal(Y)
    row_target = ~known[:, None] & known[None, :]
    col_target = known[:, None] & ~known[None, :]
    both = ~known[:, None] & ~known[None, :]

    out = np.where(Y, observed_D, 0.0)
    out = np.where(row_target, departures, out)
    out = np.where(col_target, arrivals, out)
    out = np.where(both, 0.5 * (departures + arrivals), out)
    return out


def predict_day(
    departures: ModelState,
    arrivals: ModelState,
    H: np.ndarray,
    Y: np.ndarray,
    flows_D: np.ndarray
) -> np.ndarray:
    """
    Matriz completa de um dia a partir dos estados ajustados dos dois lados

    As entradas não observadas do dia recebem um passo de preenchimento com o
    modelo de cada lado antes da previsão, como as cópias de trabalho do ajuste.
    """
    Y = np.asarray(Y, dtype=bool)
    observed = np.where(Y, np.asarray(flows_D, dtype=np.float64), 0.0)
    dep_input = complete_day(departures, H, Y, observed)
    arr_input = complete_day(arrivals, H, Y.T, observed.T)
    return predict_both(departures, arrivals, H, Y, observed, dep_input, arr_input)


def predict_both(
    departures: ModelState,
    arrivals: ModelState,
    H: np.ndarray,
    Y: np.ndarray,
    observed_D: np.ndarray,
    dep_input: np.ndarray,
    arr_input: np.ndarray
) -> np.ndarray:
    """
    Previsões dos dois lados juntadas por merge_directions

    As colunas alvo de C são nulas (nada observado nelas), então no bloco
    alvo x alvo cada lado usa a média localizada das previsões do outro lado:
    (H⊙W_partidas) aplicada às colunas alvo previstas pelas chegadas e
    (H⊙W_chegadas) aplicada às linhas alvo previstas pelas partidas.

    Args:
        departures: Estado ajustado do lado das partidas
        arrivals: Estado ajustado do lado das chegadas (orientação transposta)
        H: Indicadora de vizinhança
        Y: Máscara de observação
        observed_D: Matriz do dia (entradas observadas são copiadas dela)
        dep_input: Matriz do dia usada pelas partidas
        arr_input: Matriz do dia transposta usada pelas chegadas

    Returns:
        Matriz n x n completa
    """
    Y = np.asarray(Y, dtype=bool)
    dep = predict(departures, H, Y, dep_input)
    arr = predict(arrivals, H, Y.T, arr_input).T

    known = np.diagonal(Y)
    block = ~known[:, None] & ~known[None, :]
    if block.any():
        dep = np.where(block, localized(H, departures.W) @ arr, dep)
        arr = np.where(block, dep @ localized(H, arrivals.W).T, arr)
    return merge_directions(observed_D, np.maximum(dep, 0.0), np.maximum(arr, 0.0), Y)

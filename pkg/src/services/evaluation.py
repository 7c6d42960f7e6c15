"""
Serviço de avaliação: métricas MAE/NRMSE e protocolos de experimento

Protocolo: sorteia áreas alvo com a semente de cada repetição, reatribui os
fluxos dos alvos à área conhecida mais próxima, ajusta o método e compara a
previsão do dia D com a verdade de campo nas linhas e colunas alvo.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from src.config import Config, SolverConfig
from src.core.neighborhood import SimilarityModel, feature_distances, geo_distances, similarity
from src.core.targetsim import reassign
from src.core.types import AreaCatalog, Dataset, FlowTensor, Period, ViewSet, build_mask
from src.errors import InvalidInputError, PPFError
from src.services.baselines import ls_knn_predict, nmf_predict
from src.solver.predictor import MLCPredictor

logger = logging.getLogger(__name__)

METHODS = ("mlc", "lc", "lsknn", "nmf")


@dataclass(frozen=True)
class EvalResult:
    """Resultado agregado de um método num período e razão de alvos"""
    method: str
    period: str
    ratio: float
    seeds: Tuple[int, ...]
    mae_values: Tuple[float, ...]
    nrmse_values: Tuple[float, ...]

    @property
    def mae(self) -> float:
        return float(np.mean(self.mae_values))

    @property
    def nrmse(self) -> float:
        return float(np.mean(self.nrmse_values))

    def rows(self) -> List[dict]:
        return [
            {"method": self.method, "period": self.period, "ratio": self.ratio,
             "seed": seed, "mae": m, "nrmse": r}
            for seed, m, r in zip(self.seeds, self.mae_values, self.nrmse_values)
        ]


@dataclass(frozen=True)
class SweepCell:
    k: int
    lam: float
    result: EvalResult


def _selected(eval_mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(eval_mask, dtype=bool)
    if not mask.any():
        raise InvalidInputError("nenhuma entrada selecionada para avaliacao (M = 0)")
    return mask


def mae(pred: np.ndarray, truth: np.ndarray, eval_mask: np.ndarray) -> float:
    """Erro absoluto médio sobre as entradas selecionadas"""
    mask = _selected(eval_mask)
    return float(np.mean(np.abs(np.asarray(truth)[mask] - np.asarray(pred)[mask])))


def nrmse(pred: np.ndarray, truth: np.ndarray, eval_mask: np.ndarray) -> float:
    """RMSE normalizado pela amplitude (max - min) da verdade selecionada, em %"""
    mask = _selected(eval_mask)
    t = np.asarray(truth, dtype=np.float64)[mask]
    p = np.asarray(pred, dtype=np.float64)[mask]
    nval = float(t.max() - t.min())
    if nval == 0:
        raise InvalidInputError("amplitude da verdade de campo e zero; NRMSE indefinido")
    return 100.0 * float(np.sqrt(np.mean((t - p) ** 2))) / nval


def evaluation_mask(catalog: AreaCatalog, include_target_block: bool = True) -> np.ndarray:
    """Linhas e colunas das áreas alvo (opcionalmente sem o bloco alvo x alvo)"""
    target = ~catalog.known
    mask = target[:, None] | target[None, :]
    if not include_target_block:
        mask &= ~(target[:, None] & target[None, :])
    return mask


def sample_targets(n: int, ratio: float, seed: int) -> np.ndarray:
    """Sorteio uniforme de round(ratio * n) áreas alvo (ao menos uma)"""
    if not 0.0 < ratio < 1.0:
        raise InvalidInputError(f"razao de alvos deve estar em (0, 1): {ratio}")
    count = max(1, int(round(ratio * n)))
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=count, replace=False))


def predict_with(
    method: str,
    train: FlowTensor,
    catalog: AreaCatalog,
    views: ViewSet,
    sim: SimilarityModel,
    cfg: SolverConfig,
    settings: dict
) -> np.ndarray:
    """Matriz prevista pelo método (entradas alvo preenchidas)"""
    if method == "mlc":
        return MLCPredictor(cfg).fit(train, catalog, views, sim).predict()
    if method == "lc":
        return MLCPredictor(cfg, use_views=False).fit(train, catalog, views, sim).predict()
    mask = build_mask(catalog)
    if method == "lsknn":
        return ls_knn_predict(train.last, sim, mask, settings.get("lsknn_k", Config.LSKNN_K)).matrix
    if method == "nmf":
        return nmf_predict(
            train.last, views, mask,
            rank=settings.get("nmf_rank", Config.NMF_RANK),
            iters=settings.get("nmf_iters", Config.NMF_ITERS),
            seed=cfg.seed,
        ).matrix
    raise InvalidInputError(f"metodo desconhecido: {method}")


def run_repetition(
    dataset: Dataset,
    sim: SimilarityModel,
    period: Period,
    ratio: float,
    seed: int,
    methods: Sequence[str],
    cfg: SolverConfig,
    settings: dict,
    include_target_block: bool = True
) -> List[dict]:
    """Uma repetição: sorteio de alvos, reatribuição, ajuste e métricas de cada método"""
    truth_flows = dataset.period(period)
    catalog = dataset.catalog.with_targets(sample_targets(dataset.catalog.n, ratio, seed))
    train, _ = reassign(truth_flows, catalog, sim.geo_dist)
    eval_mask = evaluation_mask(catalog, include_target_block)
    truth = truth_flows.last
    run_cfg = cfg.model_copy(update={"seed": seed})

    rows = []
    for method in methods:
        try:
            pred = predict_with(method, train, catalog, dataset.views, sim, run_cfg, settings)
        except PPFError as e:
            raise type(e)(f"[{method}, seed={seed}] {e}") from e
        rows.append({
            "method": method,
            "period": period.value,
            "ratio": ratio,
            "seed": seed,
            "mae": mae(pred, truth, eval_mask),
            "nrmse": nrmse(pred, truth, eval_mask),
        })
    return rows


def dataset_similarity(dataset: Dataset) -> SimilarityModel:
    """Similaridade de todas as áreas (não depende de quais são conhecidas)"""
    geo = geo_distances(dataset.catalog)
    feat = feature_distances(dataset.views) if dataset.views.count else None
    return similarity(geo, feat)


class ExperimentService:
    """Executa os protocolos de comparação e de sensibilidade de parâmetros"""

    def __init__(self, settings: Optional[dict] = None, n_jobs: int = Config.N_JOBS):
        self.settings = dict(settings or {})
        self.n_jobs = n_jobs

    def run_experiment(
        self,
        dataset: Dataset,
        methods: Sequence[str],
        ratios: Sequence[float],
        repetitions: int,
        cfg: SolverConfig,
        periods: Optional[Sequence[Period]] = None,
        include_target_block: bool = True
    ) -> List[EvalResult]:
        """
        Compara os métodos em cada período e razão de alvos

        Args:
            dataset: Cidade com fluxos completos
            methods: Subconjunto de METHODS
            ratios: Razões de áreas alvo em (0, 1)
            repetitions: Número de repetições (sementes cfg.seed, cfg.seed + 1, ...)
            cfg: Hiperparâmetros do solver
            periods: Períodos avaliados (padrão: todos do dataset)
            include_target_block: Inclui o bloco alvo x alvo na avaliação

        Returns:
            Lista de EvalResult ordenada por (período, razão, método)
        """
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise InvalidInputError(f"metodos desconhecidos: {unknown}")
        if repetitions < 1:
            raise InvalidInputError("repeticoes deve ser >= 1")
        for ratio in ratios:
            if not 0.0 < ratio < 1.0:
                raise InvalidInputError(f"razao de alvos deve estar em (0, 1): {ratio}")

        periods = [Period.parse(p) for p in (periods or list(dataset.flows))]
        sim = dataset_similarity(dataset)
        seeds = [cfg.seed + r for r in range(repetitions)]
        jobs = [(period, ratio, seed) for period in periods for ratio in ratios for seed in seeds]

        logger.info(f"Iniciando experimento: {len(jobs)} repeticoes x {len(methods)} metodos")
        outputs = Parallel(n_jobs=self.n_jobs)(
            delayed(run_repetition)(
                dataset, sim, period, ratio, seed, methods, cfg, self.settings, include_target_block
            )
            for period, ratio, seed in tqdm(jobs, desc="repeticoes", disable=len(jobs) < 2)
        )

        grouped: Dict[Tuple[str, float, str], List[dict]] = {}
        for rows in outputs:
            for row in rows:
                grouped.setdefault((row["period"], row["ratio"], row["method"]), []).append(row)

        results = []
        for period in periods:
            for ratio in ratios:
                for method in methods:
                    rows = sorted(grouped[(period.value, ratio, method)], key=lambda r: r["seed"])
                    results.append(EvalResult(
                        method=method,
                        period=period.value,
                        ratio=ratio,
                        seeds=tuple(r["seed"] for r in rows),
                        mae_values=tuple(r["mae"] for r in rows),
                        nrmse_values=tuple(r["nrmse"] for r in rows),
                    ))
        return results

    def sweep_parameters(
        self,
        dataset: Dataset,
        k_grid: Sequence[int],
        lambda_grid: Sequence[float],
        cfg: SolverConfig,
        ratio: float = 0.2,
        repetitions: int = 1,
        period: Optional[Period] = None
    ) -> List[SweepCell]:
        """Avalia o MLC-PPF em todo o produto cartesiano k x lambda"""
        if not k_grid or not lambda_grid:
            raise InvalidInputError("grades de k e lambda nao podem ser vazias")
        chosen = Period.parse(period) if period is not None else next(iter(dataset.flows))

        cells = []
        for k in tqdm(k_grid, desc="k", disable=len(k_grid) < 2):
            for lam in lambda_grid:
                cell_cfg = cfg.model_copy(update={"k": int(k), "lam": float(lam)})
                (result,) = self.run_experiment(
                    dataset, ["mlc"], [ratio], repetitions, cell_cfg, periods=[chosen]
                )
                cells.append(SweepCell(k=int(k), lam=float(lam), result=result))
        return cells


def summarize(results: Sequence[EvalResult]) -> dict:
    """
    Médias por método, período e razão, mais a média simples entre períodos

    Returns:
        {"metodo": {"periodo" | "average": {"razao": {"mae", "nrmse"}}}}
    """
    summary: Dict[str, dict] = {}
    for res in results:
        by_period = summary.setdefault(res.method, {})
        by_period.setdefault(res.period, {})[str(res.ratio)] = {"mae": res.mae, "nrmse": res.nrmse}

    for method, by_period in summary.items():
        ratios = sorted({r for period, values in by_period.items() for r in values}, key=float)
        average = {}
        for ratio in ratios:
            values = [v[ratio] for p, v in by_period.items() if ratio in v]
            average[ratio] = {
                "mae": float(np.mean([v["mae"] for v in values])),
                "nrmse": float(np.mean([v["nrmse"] for v in values])),
            }
        by_period["average"] = average
    return summary


# Instância global do serviço
experiment_service = ExperimentService()


def get_experiment_service(settings: Optional[dict] = None, n_jobs: Optional[int] = None) -> ExperimentService:
    """Retorna o serviço global, reconfigurado quando há novas configurações"""
    if settings is not None:
        experiment_service.settings = dict(settings)
    if n_jobs is not None:
        experiment_service.n_jobs = n_jobs
    return experiment_service

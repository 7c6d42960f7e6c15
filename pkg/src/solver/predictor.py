"""
Preditor MLC-PPF: ajuste dos lados de partida e chegada e previsão combinada
"""
import logging
from typing import Optional

import numpy as np

from src.config import SolverConfig
from src.core.neighborhood import NeighborModel, SimilarityModel, build_indicator, build_similarity, init_weight
from src.core.types import AreaCatalog, FlowTensor, ObservationMask, ViewSet, build_mask
from src.solver.mlc import FitReport, ModelState, fit, fit_arrivals, predict_both, predict_day

logger = logging.getLogger(__name__)


class MLCPredictor:
    """Preditor de fluxo potencial de passageiros para as áreas alvo"""

    def __init__(self, cfg: SolverConfig, use_views: bool = True):
        """
        Inicializa o preditor

        Args:
            cfg: Hiperparâmetros do solver
            use_views: Se False, ignora o termo de guia (lambda = 0)
        """
        self.cfg = cfg if use_views else cfg.model_copy(update={"lam": 0.0})
        self.use_views = use_views
        self.nbr: Optional[NeighborModel] = None
        self.mask: Optional[ObservationMask] = None
        self.departures: Optional[ModelState] = None
        self.arrivals: Optional[ModelState] = None
        self.departures_report: Optional[FitReport] = None
        self.arrivals_report: Optional[FitReport] = None

    def fit(
        self,
        flows: FlowTensor,
        catalog: AreaCatalog,
        views: ViewSet,
        sim: Optional[SimilarityModel] = None
    ) -> "MLCPredictor":
        """Ajusta os dois lados sobre os fluxos de treino de um período"""
        sim = sim or build_similarity(catalog, views)
        self.nbr = build_indicator(sim, catalog, self.cfg.k)
        self.mask = build_mask(catalog)
        guide = views if self.use_views else ViewSet.empty()
        W0 = init_weight(sim, self.nbr, self.cfg.normalize_weights)

        self.departures, self.departures_report = fit(flows, self.nbr, guide, self.mask, self.cfg, W0=W0)
        self.arrivals, self.arrivals_report = fit_arrivals(flows, self.nbr, guide, self.mask, self.cfg, W0=W0)
        return self

    def predict(self, flows_day: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Matriz completa do dia: observados + previsões das linhas e colunas alvo

        Args:
            flows_day: Matriz observada de outro dia do mesmo período; se omitida,
                usa as cópias de trabalho do dia D

        Returns:
            Matriz n x n completa
        """
        if self.departures is None:
            raise RuntimeError("Preditor ainda nao ajustado")
        Y = self.mask.Y
        H = self.nbr.H

        if flows_day is not None:
            return predict_day(self.departures, self.arrivals, H, Y, flows_day)

        return predict_both(
            self.departures, self.arrivals, H, Y,
            self.departures.F_work[-1], self.departures.F_work[-1], self.arrivals.F_work[-1],
        )

"""
Módulo de dados das áreas, vizinhança e simulação de alvos
"""
from src.core.types import (
    AreaCatalog,
    Dataset,
    FlowTensor,
    ObservationMask,
    Period,
    ValidationReport,
    ViewSet,
    build_mask,
    validate,
)
from src.core.neighborhood import (
    NeighborModel,
    SimilarityModel,
    build_indicator,
    build_similarity,
    feature_distances,
    geo_distances,
    init_weight,
    similarity,
)
from src.core.targetsim import ReassignmentPlan, reassign

__all__ = [
    "AreaCatalog",
    "Dataset",
    "FlowTensor",
    "ObservationMask",
    "Period",
    "ValidationReport",
    "ViewSet",
    "build_mask",
    "validate",
    "NeighborModel",
    "SimilarityModel",
    "build_indicator",
    "build_similarity",
    "feature_distances",
    "geo_distances",
    "init_weight",
    "similarity",
    "ReassignmentPlan",
    "reassign",
]

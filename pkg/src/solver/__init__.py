"""
Módulo do solver MLC-PPF
"""
from src.solver.mlc import (
    FitReport,
    ModelState,
    complete_day,
    fill_unobserved,
    fit,
    fit_arrivals,
    grad_C,
    grad_W,
    init_C,
    loss,
    merge_directions,
    predict,
    predict_both,
    predict_day,
    step,
)
from src.solver.predictor import MLCPredictor
from src.solver.gradcheck import run_gradcheck

__all__ = [
    "FitReport",
    "ModelState",
    "complete_day",
    "fill_unobserved",
    "fit",
    "fit_arrivals",
    "grad_C",
    "grad_W",
    "init_C",
    "loss",
    "merge_directions",
    "predict",
    "predict_both",
    "predict_day",
    "step",
    "MLCPredictor",
    "run_gradcheck",
]

"""
Configurações do sistema - Previsão de fluxo potencial de passageiros (PPF)
"""
import math
import os
from typing import Any, Dict, Optional

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator

load_dotenv()


class Config:
    # Execução
    SEED = int(os.getenv("PPF_SEED", "0"))
    OUT_DIR = os.getenv("PPF_OUT_DIR", "saida")
    N_JOBS = int(os.getenv("PPF_N_JOBS", "1"))
    LOG_LEVEL = os.getenv("PPF_LOG_LEVEL", "INFO")

    # Solver (valores padrão da análise de parâmetros: k = 2, lambda = 1e-1)
    K = int(os.getenv("PPF_K", "2"))
    LAMBDA = float(os.getenv("PPF_LAMBDA", "0.1"))
    ALPHA = float(os.getenv("PPF_ALPHA", "0.01"))
    MAX_ITER = int(os.getenv("PPF_MAX_ITER", "5000"))
    EPSILON = float(os.getenv("PPF_EPSILON", "1e-4"))
    GRAD_TOL = float(os.getenv("PPF_GRAD_TOL", "0.0"))
    NORMALIZE_WEIGHTS = os.getenv("PPF_NORMALIZE_WEIGHTS", "1").lower() in ("1", "true", "sim")

    # Baselines
    LSKNN_K = int(os.getenv("PPF_LSKNN_K", "4"))
    NMF_RANK = int(os.getenv("PPF_NMF_RANK", "20"))
    NMF_ITERS = int(os.getenv("PPF_NMF_ITERS", "500"))

    # Experimentos
    REPETITIONS = int(os.getenv("PPF_REPETITIONS", "20"))
    TARGET_RATIO = float(os.getenv("PPF_TARGET_RATIO", "0.2"))


def _flag(raw: str) -> bool:
    return raw.strip().lower() in ("1", "true", "sim")


# Chaves aceitas no arquivo de configuração (formato chave=valor do dotenv)
CONFIG_KEYS = {
    "PPF_SEED": ("seed", int),
    "PPF_N_JOBS": ("n_jobs", int),
    "PPF_K": ("k", int),
    "PPF_LAMBDA": ("lam", float),
    "PPF_ALPHA": ("alpha", float),
    "PPF_MAX_ITER": ("max_iter", int),
    "PPF_EPSILON": ("epsilon", float),
    "PPF_GRAD_TOL": ("grad_tol", float),
    "PPF_NORMALIZE_WEIGHTS": ("normalize_weights", _flag),
    "PPF_LSKNN_K": ("lsknn_k", int),
    "PPF_NMF_RANK": ("nmf_rank", int),
    "PPF_NMF_ITERS": ("nmf_iters", int),
    "PPF_REPETITIONS": ("repetitions", int),
    "PPF_TARGET_RATIO": ("ratio", float),
}


class SolverConfig(BaseModel):
    """Hiperparâmetros do aprendizado de correlação localizada"""
    model_config = ConfigDict(frozen=True)

    k: int = Field(default=Config.K, ge=1)
    lam: float = Field(default=Config.LAMBDA, ge=0.0)
    alpha: float = Field(default=Config.ALPHA, gt=0.0)
    max_iter: int = Field(default=Config.MAX_ITER, ge=1)
    epsilon: float = Field(default=Config.EPSILON, gt=0.0)
    grad_tol: float = Field(default=Config.GRAD_TOL, ge=0.0)
    normalize_weights: bool = Config.NORMALIZE_WEIGHTS  # linhas de H⊙W0 somam 1
    seed: int = Config.SEED
    log_every: int = Field(default=100, ge=1)

    @field_validator("lam", "alpha", "grad_tol")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("valor deve ser finito")
        return value

    @field_validator("epsilon")
    @classmethod
    def _epsilon(cls, value: float) -> float:
        # epsilon = inf e aceito: encerra antes da primeira atualizacao
        if math.isnan(value):
            raise ValueError("epsilon nao pode ser NaN")
        return value


def resolve_settings(
    config_file: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    """
    Resolve as configurações de uma execução

    Precedência: variáveis de ambiente (Config) < arquivo de configuração < flags.

    Args:
        config_file: Caminho de um arquivo chave=valor (formato .env)
        overrides: Valores vindos da linha de comando (None = não informado)

    Returns:
        Dicionário com todas as configurações resolvidas
    """
    settings: Dict[str, Any] = {
        "seed": Config.SEED,
        "n_jobs": Config.N_JOBS,
        "k": Config.K,
        "lam": Config.LAMBDA,
        "alpha": Config.ALPHA,
        "max_iter": Config.MAX_ITER,
        "epsilon": Config.EPSILON,
        "grad_tol": Config.GRAD_TOL,
        "normalize_weights": Config.NORMALIZE_WEIGHTS,
        "lsknn_k": Config.LSKNN_K,
        "nmf_rank": Config.NMF_RANK,
        "nmf_iters": Config.NMF_ITERS,
        "repetitions": Config.REPETITIONS,
        "ratio": Config.TARGET_RATIO,
    }

    if config_file:
        for key, raw in dotenv_values(config_file).items():
            if key not in CONFIG_KEYS or raw is None:
                continue
            name, cast = CONFIG_KEYS[key]
            settings[name] = cast(raw)

    for name, value in (overrides or {}).items():
        if value is not None:
            settings[name] = value

    return settings


def solver_config_from(settings: Dict[str, Any]) -> SolverConfig:
    """Monta o SolverConfig a partir das configurações resolvidas"""
    return SolverConfig(
        k=settings["k"],
        lam=settings["lam"],
        alpha=settings["alpha"],
        max_iter=settings["max_iter"],
        epsilon=settings["epsilon"],
        grad_tol=settings["grad_tol"],
        normalize_weights=settings.get("normalize_weights", Config.NORMALIZE_WEIGHTS),
        seed=settings["seed"],
    )

"""
Módulo de serviços
"""
from src.services.storage import storage_service, get_storage_service, StorageService, RunManifest
from src.services.evaluation import experiment_service, get_experiment_service, ExperimentService
from src.services.report import get_report_service, ReportService

__all__ = [
    "storage_service",
    "get_storage_service",
    "StorageService",
    "RunManifest",
    "experiment_service",
    "get_experiment_service",
    "ExperimentService",
    "get_report_service",
    "ReportService"
]

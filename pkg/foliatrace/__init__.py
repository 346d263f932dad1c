"""
foliatrace: Laboratório numérico de traços de onda básicos em folheações de suspensão.

Este arquivo é o ponto de entrada do pacote `foliatrace`. Ele define a
interface pública da biblioteca: os modelos de suspensão, o espectro básico,
a busca de tempos de permanência, o traço de onda e o orquestrador dos
experimentos.

O `__all__` define explicitamente quais nomes são exportados quando um cliente
usa `from foliatrace import *`.
"""

__version__ = "0.1.0"  # A ser gerenciado pelo setuptools-scm

import logging
import uuid
from typing import Any, Dict, Optional, Sequence

from foliatrace.config import Config
from foliatrace.core.model import SuspensionModel, build_model
from foliatrace.core.sojourn import SojournCatalog, enumerate_sojourn_times, sojourn_cutoff
from foliatrace.core.spectral import SpectralData, analytic_spectrum, numeric_spectrum, spectrum_compare
from foliatrace.core.wavetrace import detect_singularities, evaluate_trace, verify_poisson
from foliatrace.exceptions import (
    ConfigurationError,
    FoliaTraceError,
    IntegrationError,
    ModelError,
    NumericalError,
    ResolutionError,
    SolverError,
    exit_code_for,
)
from foliatrace.pipeline import ExperimentPipeline

__all__ = [
    "Config",
    "SuspensionModel",
    "build_model",
    "SpectralData",
    "analytic_spectrum",
    "numeric_spectrum",
    "spectrum_compare",
    "SojournCatalog",
    "enumerate_sojourn_times",
    "sojourn_cutoff",
    "evaluate_trace",
    "detect_singularities",
    "verify_poisson",
    "ExperimentPipeline",
    "FoliaTraceError",
    "ConfigurationError",
    "ModelError",
    "NumericalError",
    "SolverError",
    "IntegrationError",
    "ResolutionError",
    "run_experiment",
]

logger = logging.getLogger(__name__)


def run_experiment(
    config_dict: Dict[str, Any],
    stages: Optional[Sequence[str]] = None,
    log_level: str = "INFO",
) -> Dict[str, Any]:
    """
    Executa um experimento a partir de um documento de configuração.

    Nunca levanta exceções: erros de configuração e falhas inesperadas viram
    um dicionário com status `ERRO`, como o devolvido por `ExperimentPipeline.run`.
    """
    run_id = str(uuid.uuid4())[:8]
    if log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        return {
            "status": "ERRO",
            "message": f"Erro de validação: log_level inválido: {log_level}.",
            "stages_completed": [],
            "artifacts": [],
            "exit_code": 2,
        }
    try:
        config = Config.from_dict(config_dict)
        pipeline = ExperimentPipeline(run_id=run_id, config=config, debug_mode=log_level.upper() == "DEBUG")
        return pipeline.run(stages)
    except Exception as e:
        logger.error(f"Erro ao executar o experimento: {e}", exc_info=True)
        return {
            "status": "ERRO",
            "message": f"Erro antes ou durante a inicialização do experimento: {e}",
            "stages_completed": [],
            "artifacts": [],
            "exit_code": exit_code_for(e),
        }

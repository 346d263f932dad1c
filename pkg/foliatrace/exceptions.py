"""
Módulo de exceções customizadas do foliatrace.

Este arquivo define a hierarquia de exceções do laboratório numérico. Cada
etapa do experimento (configuração, construção do modelo, discretização,
autovalores, integração do fluxo, traço de onda e gravação de artefatos)
tem a sua própria classe, o que permite ao orquestrador e à linha de comando
mapear cada falha para o código de saída correto.

A exceção base `FoliaTraceError` permite capturar de forma unificada qualquer
erro levantado pela biblioteca. Falhas puramente numéricas herdam de
`NumericalError`.
"""


class FoliaTraceError(Exception):
    """Exceção base para todos os erros do foliatrace."""

    pass


class ConfigurationError(FoliaTraceError):
    """Erro relacionado a configurações ou argumentos inválidos."""

    pass


class ModelError(FoliaTraceError):
    """Erro na construção do modelo ou em pontos fora do domínio."""

    pass


class BoundaryError(ModelError):
    """Avaliação de uma expressão fechada em uma fronteira singular."""

    pass


class DiscretizationError(FoliaTraceError):
    """Malha grosseira demais ou desalinhada com as coordenadas varridas."""

    pass


class NumericalError(FoliaTraceError):
    """Base para falhas numéricas (autovalores, integração, resolução)."""

    pass


class SolverError(NumericalError):
    """Falha do resolvedor de autovalores ou discretização indefinida."""

    pass


class IntegrationError(NumericalError):
    """Falha na integração do fluxo hamiltoniano."""

    pass


class ResolutionError(NumericalError):
    """Espectro insuficiente para a janela de frequência solicitada."""

    pass


class StorageError(FoliaTraceError):
    """Erro ao gravar artefatos de resultado."""

    pass


# Códigos de saída da linha de comando.
EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIGURATION = 2
EXIT_NUMERICAL = 3


def exit_code_for(error: BaseException) -> int:
    """Mapeia uma exceção para o código de saída correspondente."""
    if isinstance(error, (ConfigurationError, ModelError)):
        return EXIT_CONFIGURATION
    return EXIT_NUMERICAL

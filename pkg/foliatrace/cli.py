# foliatrace/cli.py

"""
cli.py: Interface de Linha de Comando do foliatrace.

Uso:
    foliatrace run --model sphere --out resultados/
    foliatrace spectrum --model torus --k-max 40
    foliatrace sojourn --config tools/configs/product.json
    foliatrace trace --model sphere --lambda-ladder 50,100,200 --window cosine
    foliatrace verify --config tools/configs/sphere.json --threads 4
    foliatrace projector-check --model sphere

As flags têm precedência sobre os valores do arquivo de configuração.

**Códigos de saída:**
    0 = todas as verificações PASS; 1 = verificação FAIL;
    2 = erro de configuração; 3 = falha numérica.
"""

import argparse
import logging
import sys
import uuid
from typing import List, Optional, Sequence, Tuple

from foliatrace.config import Config
from foliatrace.exceptions import EXIT_CONFIGURATION, ConfigurationError, FoliaTraceError, exit_code_for
from foliatrace.pipeline import (
    STAGE_PROJECTOR,
    STAGE_SOJOURN,
    STAGE_SPECTRUM,
    STAGE_TRACE,
    STAGE_VERIFY,
    ALL_STAGES,
    ExperimentPipeline,
)

logger = logging.getLogger("foliatrace.cli")

COMMAND_STAGES = {
    "spectrum": (STAGE_SPECTRUM,),
    "sojourn": (STAGE_SOJOURN,),
    "trace": (STAGE_SPECTRUM, STAGE_TRACE),
    "verify": (STAGE_SPECTRUM, STAGE_SOJOURN, STAGE_TRACE, STAGE_VERIFY),
    "projector-check": (STAGE_PROJECTOR,),
    "run": ALL_STAGES,
}

COMMAND_HELP = {
    "spectrum": "Calcula o espectro básico analítico e numérico e os compara.",
    "sojourn": "Enumera os tempos de permanência (arcos relativamente fechados).",
    "trace": "Avalia o traço de onda básico e detecta singularidades.",
    "verify": "Verifica a relação de Poisson entre traço e catálogo.",
    "projector-check": "Executa a suíte de invariantes do projetor básico.",
    "run": "Executa o experimento completo.",
}


def _float_list(text: str) -> List[float]:
    try:
        values = [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"Lista de números inválida: '{text}'") from e
    if not values:
        raise argparse.ArgumentTypeError("A lista não pode ser vazia.")
    return values


def _add_common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="Arquivo JSON de configuração do experimento.")
    parser.add_argument("--model", choices=["sphere", "torus", "product"], help="Modelo de suspensão.")
    parser.add_argument("--factor-lengths", type=_float_list, help="Comprimentos dos fatores circulares (produto).")
    parser.add_argument("--k-max", type=int, help="Maior k do espectro analítico.")
    parser.add_argument("--grid", type=int, help="Tamanho da malha do resolvedor numérico.")
    parser.add_argument("--t-max", type=float, help="Horizonte da busca e da varredura do traço.")
    parser.add_argument("--tol", type=float, help="Tolerância do resíduo de fechamento relativo.")
    parser.add_argument("--lambda-ladder", type=_float_list, help="Escada de cortes Λ, ex.: 50,100,200.")
    parser.add_argument("--window", choices=["gaussian", "cosine"], help="Forma da janela de frequência.")
    parser.add_argument("--t-min", type=float, help="Início da varredura do traço.")
    parser.add_argument("--t-step", type=float, help="Passo da malha em t.")
    parser.add_argument("--out", help="Diretório de saída dos artefatos.")
    parser.add_argument("--convention", choices=["basic", "ambient"], help="Convenção de multiplicidade.")
    parser.add_argument("--threads", type=int, help="Número máximo de threads por etapa.")
    parser.add_argument("--debug", action="store_true", help="Ativa o log em nível DEBUG.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foliatrace",
        description="Laboratório numérico de traços de onda básicos em folheações de suspensão.",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="comando")
    subparsers.required = True
    for command, help_text in COMMAND_HELP.items():
        sub = subparsers.add_parser(command, help=help_text, description=help_text)
        _add_common_arguments(sub)
    return parser


def resolve_config(args: argparse.Namespace) -> Config:
    """Carrega o arquivo (ou os padrões do modelo) e aplica as flags."""
    if args.config:
        base = Config.from_file(args.config)
    else:
        base = Config.default(args.model or "sphere", args.factor_lengths)
    return base.with_overrides(
        model=args.model if args.config else None,
        factor_lengths=args.factor_lengths if args.config else None,
        k_max=args.k_max,
        grid=args.grid,
        t_max=args.t_max,
        tol=args.tol,
        lambda_ladder=args.lambda_ladder,
        window=args.window,
        t_min=args.t_min,
        t_step=args.t_step,
        out_dir=args.out,
        convention=args.convention,
        threads=args.threads,
    )


def stages_for(command: str, config: Config) -> Tuple[str, ...]:
    stages = COMMAND_STAGES[command]
    # O corte χ é construído do catálogo.
    if STAGE_TRACE in stages and config.CUTOFF and STAGE_SOJOURN not in stages:
        stages = (STAGE_SPECTRUM, STAGE_SOJOURN, STAGE_TRACE)
    return stages


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    run_id = str(uuid.uuid4())[:8]

    try:
        config = resolve_config(args)
        pipeline = ExperimentPipeline(run_id=run_id, config=config, debug_mode=args.debug)
    except ConfigurationError as e:
        print(f"Erro de configuração: {e}", file=sys.stderr)
        return EXIT_CONFIGURATION
    except FoliaTraceError as e:
        print(f"Erro: {e}", file=sys.stderr)
        return exit_code_for(e)

    result = pipeline.run(stages_for(args.command, config))
    print(f"{result['status']}: {result['message']}")
    return int(result["exit_code"])


if __name__ == "__main__":
    sys.exit(main())

# foliatrace/pipeline.py

"""
pipeline.py: Orquestrador dos Experimentos do foliatrace.

Este módulo contém a classe `ExperimentPipeline`, ponto de entrada que
executa, em sequência, as etapas de um experimento sobre um modelo de
suspensão e grava os artefatos no diretório de saída.

**Fases:**

0.  **[FASE 0] Projetor:** executa a suíte de invariantes do cálculo básico
    (idempotência, autoadjunção, imagem básica, positividade e ordem de
    convergência do resíduo de comutação). Só no comando `run` e em
    `projector-check`.
1.  **[FASE 1] Espectro:** espectro analítico nas duas convenções de
    multiplicidade, espectro numérico, a comparação entre eles e o
    histograma de √λ na convenção configurada.
2.  **[FASE 2] Tempos de permanência:** catálogo de arcos relativamente
    fechados até `sojourn.t_max`.
3.  **[FASE 3] Traço:** avaliação de W_Λ(t) e detecção de singularidades nas
    duas convenções (a configurada conduz a verificação). Com
    `trace.cutoff`, aplica a função de corte χ construída do catálogo. Na
    esfera, a razão de crescimento separa tempos singulares de pontos suaves
    e falha a etapa quando não separa.
4.  **[FASE 4] Verificação:** relação de Poisson entre singularidades e
    catálogo. Com corte, compara só com os tempos regulares e exige que todos
    os do intervalo sejam detectados. Convenções que divergem nas
    localizações também reprovam a etapa.

**Retorno:**
- `run()` devolve um dicionário com o status final (`PASS`, `FAIL` ou `ERRO`),
  uma mensagem, as etapas concluídas, os artefatos e o código de saída.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from foliatrace.config import Config
from foliatrace.core.calculus import projector_check
from foliatrace.core.model import ModelKind
from foliatrace.core.sojourn import SojournCatalog, SojournClass, SojournSearch, sojourn_cutoff
from foliatrace.core.spectral import SpectralData, analytic_spectrum, numeric_spectrum, spectrum_compare
from foliatrace.core.store import ResultStore
from foliatrace.core.wavetrace import (
    FrequencyWindow,
    SingularityReport,
    cutoff_partial_trace,
    detect_singularities,
    evaluate_trace,
    growth_ratio,
    spectral_distribution,
    verify_poisson,
)
from foliatrace.exceptions import (
    EXIT_FAIL,
    EXIT_PASS,
    ConfigurationError,
    FoliaTraceError,
    exit_code_for,
)

logger = logging.getLogger("foliatrace")

STAGE_PROJECTOR = "projector"
STAGE_SPECTRUM = "spectrum"
STAGE_SOJOURN = "sojourn"
STAGE_TRACE = "trace"
STAGE_VERIFY = "verify"
ALL_STAGES = (STAGE_PROJECTOR, STAGE_SPECTRUM, STAGE_SOJOURN, STAGE_TRACE, STAGE_VERIFY)


class RunIdFilter(logging.Filter):
    def __init__(self, run_id):
        super().__init__()
        self.run_id = run_id

    def filter(self, record):
        record.run_id = self.run_id
        return True


def setup_logging(run_id: str, debug_mode: bool = False, log_dir=None, log_filename: str = "foliatrace.log"):
    level = logging.DEBUG if debug_mode else logging.INFO
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)
        handler.close()
    run_id_filter = RunIdFilter(run_id)
    full_formatter = logging.Formatter("%(asctime)s [%(levelname)s] [%(run_id)s] %(name)s: %(message)s")
    short_formatter = logging.Formatter("[%(levelname)s] [%(run_id)s] %(message)s")

    if log_dir is not None:
        log_file_path = Path(log_dir) / log_filename
        log_file_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file_path, mode="a", encoding="utf-8")
        file_handler.setFormatter(full_formatter)
        file_handler.setLevel(level)
        file_handler.addFilter(run_id_filter)
        logger.addHandler(file_handler)

    stream_handler = logging.StreamHandler()
    stream_handler.setFormatter(full_formatter if debug_mode else short_formatter)
    stream_handler.setLevel(level)
    stream_handler.addFilter(run_id_filter)
    logger.addHandler(stream_handler)
    logger.setLevel(level)
    logger.propagate = False


class ExperimentPipeline:
    def __init__(
        self,
        run_id: str,
        config: Optional[Config] = None,
        config_path: Optional[str] = None,
        debug_mode: bool = False,
    ):
        self.run_id = run_id
        self.logger = logging.getLogger("foliatrace.pipeline")
        try:
            self.config = config if config is not None else self._load_config(config_path)
        except ConfigurationError as e:
            setup_logging(run_id=self.run_id, debug_mode=debug_mode)
            self.logger.critical(f"Erro fatal de configuração: {e}", exc_info=True)
            raise
        out_dir = Path(self.config.OUT_DIR)
        setup_logging(
            run_id=self.run_id,
            debug_mode=debug_mode,
            log_dir=out_dir / self.config.LOG_SUBDIR,
            log_filename=self.config.LOG_FILENAME,
        )
        self.logger.info(f"Iniciando nova execução do experimento. Run ID: {self.run_id}")
        self.logger.info(f"Modelo: {self.config.model.kind.value}; saída em: {out_dir}")
        self.store: Optional[ResultStore] = None
        self.spectra: Dict[str, SpectralData] = {}
        self.catalog: Optional[SojournCatalog] = None
        self.reports: Dict[str, SingularityReport] = {}
        self._current_stage: Optional[str] = None

    def _load_config(self, config_path: Optional[str]) -> Config:
        if config_path:
            self.logger.info(f"Carregando configuração do arquivo: {config_path}")
            return Config.from_file(config_path)
        self.logger.info("Nenhum arquivo de configuração informado; usando o modelo esférico padrão.")
        return Config.default()

    # --- Fases ---

    def _execute_phase_0_projector(self) -> bool:
        self.logger.info("[FASE 0] Verificando as identidades do projetor básico.")
        report = projector_check(self.config.model, self.config)
        self.store.save_json(report, self.config.PROJECTOR_JSON)
        self.logger.info(
            f"[FASE 0] Projetor: idempotência {report['idempotency_defect']:.2e}, "
            f"autoadjunção {report['self_adjoint_defect']:.2e}, ordem {report['commutation_order']:.3f}."
        )
        return bool(report["passed"])

    def _execute_phase_1_spectrum(self) -> bool:
        cfg = self.config
        self.logger.info(f"[FASE 1] Calculando o espectro básico (k_max = {cfg.K_MAX}).")
        for convention in cfg.VALID_CONVENTIONS:
            self.spectra[convention] = analytic_spectrum(cfg.model, cfg.K_MAX, convention)
        numeric = numeric_spectrum(cfg.model, cfg.N_MODES, cfg.GRID, cfg.CLUSTER_REL_TOL)
        comparison = spectrum_compare(numeric, self.spectra["basic"], cfg.SPECTRAL_REL_TOL)
        frame = pd.concat(
            [self.spectra["basic"].to_frame(), self.spectra["ambient"].to_frame(), numeric.to_frame()],
            ignore_index=True,
        )
        self.store.save_frame(frame, cfg.SPECTRUM_CSV)
        self.store.save_json(comparison.to_dict(), cfg.SPECTRUM_COMPARE_JSON)
        histogram = spectral_distribution(self.spectra[cfg.CONVENTION], cfg.HISTOGRAM_BIN_WIDTH)
        self.store.save_frame(histogram.to_frame(), cfg.SPECTRAL_HISTOGRAM_CSV)
        self.logger.info(
            f"[FASE 1] Espectro numérico x analítico: {comparison.n_compared} modos, "
            f"erro relativo máximo {comparison.max_error:.3e}."
        )
        return comparison.passed

    def _execute_phase_2_sojourn(self) -> bool:
        cfg = self.config
        self.logger.info(f"[FASE 2] Enumerando tempos de permanência até t_max = {cfg.SOJOURN_T_MAX}.")
        search = SojournSearch.from_config(cfg.model, cfg)
        self.catalog = search.catalog(cfg.SOJOURN_T_MAX, cfg.SEED_BUDGET)
        self.store.save_frame(self.catalog.to_frame(), cfg.SOJOURN_CSV)
        self.store.save_json(self.catalog.to_dict(), cfg.SOJOURN_JSON)
        self.logger.info(f"[FASE 2] Tempos catalogados: {[round(t, 6) for t in self.catalog.times]}")
        return True

    def _cutoff(self):
        if not self.config.CUTOFF:
            return None
        if self.catalog is None:
            raise ConfigurationError("O traço com corte exige o catálogo de tempos de permanência.")
        return sojourn_cutoff(
            self.catalog,
            (self.config.T_MIN, self.config.T_MAX),
            self.config.CUTOFF_HALFWIDTH,
            self.config.CUTOFF_RAMP,
        )

    def _execute_phase_3_trace(self) -> bool:
        cfg = self.config
        self.logger.info(f"[FASE 3] Avaliando o traço de onda (janela {cfg.WINDOW}, Λ = {cfg.LAMBDA_LADDER}).")
        chi = self._cutoff()
        t_range = (cfg.T_MIN, cfg.T_MAX)
        for convention, spectrum in self.spectra.items():
            self.reports[convention] = detect_singularities(
                spectrum,
                cfg.WINDOW,
                cfg.LAMBDA_LADDER,
                t_range,
                t_step=cfg.T_STEP,
                peak_factor=cfg.PEAK_FACTOR,
                peak_floor_rel=cfg.PEAK_FLOOR_REL,
                resolve_factor=cfg.RESOLVE_FACTOR,
                min_growth_exponent=cfg.MIN_GROWTH_EXPONENT,
                confidence=cfg.EXPONENT_CONFIDENCE,
                drift_resolution=cfg.DRIFT_RESOLUTION,
                cutoff=chi,
                chunk=cfg.TRACE_CHUNK,
                threads=cfg.THREADS,
            )
            if self.catalog is not None:
                self.reports[convention] = self.reports[convention].with_matches(self.catalog, cfg.TOL_T)

        driving = self.spectra[cfg.CONVENTION]
        t_grid = _grid(self.reports[cfg.CONVENTION])
        frames = []
        for lam in cfg.LAMBDA_LADDER:
            series = evaluate_trace(driving, FrequencyWindow(cfg.WINDOW, lam), t_grid, cfg.TRACE_CHUNK, cfg.THREADS)
            if chi is not None:
                series = cutoff_partial_trace(series, chi)
            frames.append(series.to_frame())
        self.store.save_frame(pd.concat(frames, ignore_index=True), cfg.TRACE_CSV)
        growth = self._growth_check(driving, self.reports[cfg.CONVENTION])
        self.store.save_json(
            {
                "driving_convention": cfg.CONVENTION,
                "conventions": {name: report.to_dict() for name, report in self.reports.items()},
                "growth_ratios": growth["singular"],
                "growth_check": growth,
            },
            cfg.SINGULARITY_JSON,
        )
        for name, report in self.reports.items():
            self.logger.info(f"[FASE 3] Singularidades ({name}): {[round(t, 4) for t in report.times]}")
        return growth["passed"]

    def _growth_check(self, spectrum: SpectralData, report: SingularityReport) -> Dict[str, object]:
        """
        |W_{2Λ}| / |W_Λ| no menor Λ da escada, nas singularidades detectadas e nos
        pontos suaves de controle.

        Na esfera sem corte o discriminador entra no veredito: acima de
        GROWTH_RATIO_THRESHOLD nos tempos singulares, abaixo dele nos pontos
        suaves. Nos demais cenários as razões são apenas registradas.
        """
        cfg = self.config
        lam = cfg.LAMBDA_LADDER[0]
        threshold = cfg.GROWTH_RATIO_THRESHOLD
        singular = [
            {"T": T, "lambda_cutoff": lam, "ratio": growth_ratio(spectrum, cfg.WINDOW, T, lam)} for T in report.times
        ]
        smooth_times = [t for t in cfg.GROWTH_SMOOTH_TIMES if cfg.T_MIN <= t <= cfg.T_MAX]
        smooth = [
            {"T": t, "lambda_cutoff": lam, "ratio": growth_ratio(spectrum, cfg.WINDOW, t, lam)} for t in smooth_times
        ]
        enforced = cfg.model.kind is ModelKind.SPHERE and not cfg.CUTOFF
        for entry in singular:
            if entry["ratio"] < threshold:
                self.logger.warning(
                    f"[FASE 3] Razão de crescimento {entry['ratio']:.3f} < {threshold} em T = {entry['T']:.4f}."
                )
        for entry in smooth:
            if entry["ratio"] >= threshold:
                self.logger.warning(
                    f"[FASE 3] Ponto suave t = {entry['T']:.4f} cresce com Λ (razão {entry['ratio']:.3f} ≥ {threshold})."
                )
        passed = all(e["ratio"] > threshold for e in singular) and all(e["ratio"] < threshold for e in smooth)
        if enforced:
            self.logger.info(f"[FASE 3] Discriminador de crescimento: {'PASS' if passed else 'FAIL'}.")
        return {
            "threshold": threshold,
            "enforced": enforced,
            "passed": bool(passed) if enforced else True,
            "singular": singular,
            "smooth": smooth,
        }

    def _execute_phase_4_verification(self) -> bool:
        cfg = self.config
        self.logger.info("[FASE 4] Verificando a relação de Poisson.")
        catalog = self.catalog
        if cfg.CUTOFF:
            catalog = catalog.restricted([SojournClass.REGULAR])
            self.logger.info("[FASE 4] Traço parcial com corte: comparando apenas com tempos regulares.")
        report = self.reports[cfg.CONVENTION]
        # Com corte, os picos sobreviventes precisam ser exatamente os tempos regulares.
        verdict = verify_poisson(catalog, report, cfg.TOL_T, require_complete=bool(cfg.CUTOFF))

        locations = {name: r.times for name, r in self.reports.items()}
        agree = _locations_agree(locations.get("basic", []), locations.get("ambient", []), cfg.TOL_T)
        document = verdict.to_dict()
        document.update(
            {
                "convention": cfg.CONVENTION,
                "cutoff_applied": bool(cfg.CUTOFF),
                "convention_locations": locations,
                "conventions_agree": agree,
                "checks": {"poisson": verdict.passed, "conventions_agree": agree},
            }
        )
        passed = verdict.passed and agree
        document["status"] = cfg.STATUS_PASS if passed else cfg.STATUS_FAIL
        document["passed"] = passed
        self.store.save_json(document, cfg.VERIFICATION_JSON)
        if not agree:
            self.logger.error(
                f"[FASE 4] Localizações das singularidades divergem entre as convenções: {locations}"
            )
        return passed

    # --- Orquestração ---

    def _summary_lines(self, status: str, message: str, checks: Dict[str, bool]) -> List[str]:
        lines = [
            f"Status: {status}",
            f"Modelo: {self.config.model.kind.value}",
            f"Mensagem: {message}",
        ]
        for name, passed in checks.items():
            lines.append(f"{name}: {self.config.STATUS_PASS if passed else self.config.STATUS_FAIL}")
        if self.catalog is not None:
            lines.append(f"Tempos de permanência: {[round(t, 6) for t in self.catalog.times]}")
        if self.config.CONVENTION in self.reports:
            lines.append(f"Singularidades detectadas: {[round(t, 4) for t in self.reports[self.config.CONVENTION].times]}")
        return lines

    def run(self, stages: Optional[Sequence[str]] = None) -> Dict[str, object]:
        """
        Executa as fases pedidas (todas, por padrão) e grava manifesto e sumário.
        """
        stages = tuple(stages) if stages else ALL_STAGES
        unknown = set(stages) - set(ALL_STAGES)
        if unknown:
            raise ConfigurationError(f"Etapas desconhecidas: {sorted(unknown)}")
        cfg = self.config
        status = cfg.STATUS_ERROR
        message = "Ocorreu um erro inesperado."
        exit_code = None
        checks: Dict[str, bool] = {}
        phases = (
            (STAGE_PROJECTOR, self._execute_phase_0_projector),
            (STAGE_SPECTRUM, self._execute_phase_1_spectrum),
            (STAGE_SOJOURN, self._execute_phase_2_sojourn),
            (STAGE_TRACE, self._execute_phase_3_trace),
            (STAGE_VERIFY, self._execute_phase_4_verification),
        )

        try:
            self.store = ResultStore(cfg.OUT_DIR, manifest_name=cfg.MANIFEST_JSON)
            self.store.metadata = {"config": cfg.to_dict(), "stages_requested": list(stages)}
            for name, phase in phases:
                if name not in stages:
                    continue
                self._current_stage = name
                checks[name] = phase()
                self.store.mark_stage(name)
            self._current_stage = None
            passed = all(checks.values())
            status = cfg.STATUS_PASS if passed else cfg.STATUS_FAIL
            exit_code = EXIT_PASS if passed else EXIT_FAIL
            failed = [name for name, ok in checks.items() if not ok]
            message = "Todas as verificações passaram." if passed else f"Verificações com falha: {failed}"
        except FoliaTraceError as e:
            self.logger.error(f"Erro no experimento (etapa {self._current_stage}): {e}", exc_info=True)
            message = f"Erro na etapa '{self._current_stage}': {e}"
            exit_code = exit_code_for(e)
            if self.store is not None:
                self.store.mark_failure(self._current_stage, e)
        except Exception as e:
            self.logger.critical(f"Ocorreu um erro inesperado e fatal no experimento: {e}", exc_info=True)
            message = f"Erro inesperado: {e}"
            exit_code = exit_code_for(e)
            if self.store is not None:
                self.store.mark_failure(self._current_stage, e)
        finally:
            if self.store is not None:
                try:
                    self.store.save_text(self._summary_lines(status, message, checks), cfg.SUMMARY_TXT)
                    self.store.write_manifest(status)
                except FoliaTraceError as e:
                    self.logger.error(f"Falha ao gravar manifesto/sumário: {e}", exc_info=True)
            self.logger.info("=" * 50)
            self.logger.info(f"=========   EXPERIMENTO FINALIZADO (Run ID: {self.run_id})   =========")
            self.logger.info(f"Status Final: {status}")
            self.logger.info(f"Etapas Concluídas: {self.store.stages_completed if self.store else []}")
            self.logger.info("=" * 50)

        return {
            "status": status,
            "message": message,
            "stages_completed": list(self.store.stages_completed) if self.store else [],
            "artifacts": sorted(self.store.artifacts) if self.store else [],
            "checks": checks,
            "exit_code": exit_code,
        }


def _grid(report: SingularityReport) -> np.ndarray:
    t_min, t_max = report.t_range
    return t_min + report.t_step * np.arange(int(np.floor((t_max - t_min) / report.t_step + 1e-9)) + 1)


def _locations_agree(a: Sequence[float], b: Sequence[float], tol: float) -> bool:
    if len(a) != len(b):
        return False
    return all(abs(x - y) <= tol + 1e-12 for x, y in zip(sorted(a), sorted(b)))

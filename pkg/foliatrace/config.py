"""
Módulo de configuração do foliatrace.

Este módulo define a classe `Config`, responsável por centralizar, validar e
gerenciar todas as configurações de um experimento: o descritor do modelo,
os parâmetros de espectro, de tempos de permanência, do traço de onda, da
verificação do projetor e o diretório de saída.
"""

import copy
import json
import math
from typing import Any, Dict, List, Optional

from .core.model import SuspensionModel, build_model
from .exceptions import ConfigurationError, ModelError


class Config:
    """Gerenciador de configurações do foliatrace."""

    # --- Seção de Constantes Padrão ---
    # Usado como fallback se não for fornecida uma configuração customizada.
    DEFAULT_CONSTANTS = {
        # --- Constantes do Cálculo Básico ---
        "MIN_GRID_NODES": 4,
        "BASIC_TOL": 1e-10,
        "IDEMPOTENCY_TOL": 1e-12,
        "SELF_ADJOINT_TOL": 1e-10,
        "MIN_CONVERGENCE_ORDER": 1.8,
        "PROJECTOR_SEED": 20240601,

        # --- Constantes do Espectro ---
        "CLUSTER_REL_TOL": 1e-6,

        # --- Constantes do Fluxo Hamiltoniano ---
        "FLOW_RTOL": 1e-12,
        "FLOW_ATOL": 1e-13,
        "ENERGY_TOL": 1e-8,
        "POLE_ENTER_EPS": 1e-3,
        "POLE_EXIT_EPS": 2e-3,
        "MAX_CHART_SWITCHES": 10000,

        # --- Constantes da Busca de Tempos de Permanência ---
        "SCAN_STEP": 0.01,
        "SCAN_MIN_TIME": 0.05,
        "CANDIDATE_RESIDUAL": 0.1,
        "TOUCH_TOL": 1e-6,
        "MERGE_FACTOR": 10.0,
        "RANK_STEP": 1e-5,
        "RANK_RATIO": 1e-2,
        "DIRECTION_LATTICE": 2,
        "BASE_LATTICE": 3,

        # --- Constantes do Traço de Onda ---
        "PEAK_FACTOR": 5.0,
        "PEAK_FLOOR_REL": 1e-3,
        "RESOLVE_FACTOR": 2.0,
        "MIN_GROWTH_EXPONENT": 0.3,
        "DRIFT_RESOLUTION": 0.5,
        "GROWTH_RATIO_THRESHOLD": 1.5,
        "GROWTH_SMOOTH_TIMES": [math.pi, 3.0],
        "EXPONENT_CONFIDENCE": 0.95,
        "TRACE_CHUNK": 512,
        "CUTOFF_HALFWIDTH": 0.1,
        "CUTOFF_RAMP": 0.05,
        "HISTOGRAM_BIN_WIDTH": 1.0,

        # --- Constantes do Pipeline ---
        "STATUS_PASS": "PASS",
        "STATUS_FAIL": "FAIL",
        "STATUS_ERROR": "ERRO",
        "LOG_SUBDIR": "logs",
        "LOG_FILENAME": "foliatrace.log",
        "SHOW_PROGRESS": False,

        # --- Nomes de Artefatos ---
        "SPECTRUM_CSV": "spectrum.csv",
        "SPECTRUM_COMPARE_JSON": "spectrum_compare.json",
        "SPECTRAL_HISTOGRAM_CSV": "spectral_distribution.csv",
        "SOJOURN_CSV": "sojourn.csv",
        "SOJOURN_JSON": "sojourn.json",
        "TRACE_CSV": "trace.csv",
        "SINGULARITY_JSON": "singularities.json",
        "VERIFICATION_JSON": "verification.json",
        "PROJECTOR_JSON": "projector_check.json",
        "MANIFEST_JSON": "manifest.json",
        "SUMMARY_TXT": "summary.txt",
    }

    # Valores padrão do documento de experimento.
    DEFAULT_EXPERIMENT = {
        "spectral": {"k_max": 400, "n_modes": 21, "grid": 128, "convention": "basic", "rel_tol": 1e-6},
        "sojourn": {"t_max": 20.0, "tol": 1e-6, "seed_budget": 256},
        "trace": {
            "lambda_ladder": [50.0, 100.0, 200.0],
            "window": "gaussian",
            "t_min": 1.0,
            "t_max": 20.0,
            "t_step": 0.01,
            "tol_t": 0.05,
            "cutoff": False,
            "allow_small_t_min": False,
        },
        "projector": {"shape": [64, 64, 64], "samples": 100, "z_ladder": [64, 128, 256]},
        "out_dir": "results",
        "threads": 1,
    }

    REQUIRED_MODEL_KEYS = {"kind"}
    VALID_WINDOWS = ("gaussian", "cosine")
    VALID_CONVENTIONS = ("basic", "ambient")

    def __init__(
        self,
        model_config: Dict[str, Any],
        experiment_config: Optional[Dict[str, Any]] = None,
        custom_constants: Optional[Dict[str, Any]] = None,
    ):
        """
        Inicializa e valida todas as configurações do experimento.

        Args:
            model_config: Descritor do modelo ({"kind": ..., "factor_lengths": [...]}).
            experiment_config: Seções 'spectral', 'sojourn', 'trace', 'projector',
                além de 'out_dir' e 'threads'. Chaves ausentes usam os padrões.
            custom_constants: Dicionário opcional para sobrescrever as constantes padrão.
        """
        self._validate_model_config(model_config)
        self.model_config = {
            "kind": model_config["kind"],
            "factor_lengths": list(model_config.get("factor_lengths") or []),
        }
        try:
            self.model: SuspensionModel = build_model(
                self.model_config["kind"], self.model_config["factor_lengths"] or None
            )
        except ModelError as e:
            raise ConfigurationError(f"Descritor de modelo inválido: {e}") from e
        self.model_config["kind"] = self.model.kind.value

        self.experiment_config = self._merge_experiment(experiment_config or {})
        if "shape" not in (experiment_config or {}).get("projector", {}):
            # Malha padrão do projetor com uma entrada por coordenada do modelo.
            self.experiment_config["projector"]["shape"] = [32] * self.model.x_dim + (
                [32, 32, 16] if self.model.x_dim else [64, 64, 64]
            )

        # --- Expõe as configurações como atributos de alto nível ---
        spectral = self.experiment_config["spectral"]
        sojourn = self.experiment_config["sojourn"]
        trace = self.experiment_config["trace"]
        projector = self.experiment_config["projector"]
        self.K_MAX = spectral["k_max"]
        self.N_MODES = spectral["n_modes"]
        self.GRID = spectral["grid"]
        self.CONVENTION = spectral["convention"]
        self.SPECTRAL_REL_TOL = spectral["rel_tol"]
        self.SOJOURN_T_MAX = sojourn["t_max"]
        self.TOL = sojourn["tol"]
        self.SEED_BUDGET = sojourn["seed_budget"]
        self.LAMBDA_LADDER = list(trace["lambda_ladder"])
        self.WINDOW = trace["window"]
        self.T_MIN = trace["t_min"]
        self.T_MAX = trace["t_max"]
        self.T_STEP = trace["t_step"]
        self.TOL_T = trace["tol_t"]
        self.CUTOFF = trace["cutoff"]
        self.PROJECTOR_SHAPE = list(projector["shape"])
        self.PROJECTOR_SAMPLES = projector["samples"]
        self.PROJECTOR_Z_LADDER = list(projector["z_ladder"])
        self.OUT_DIR = self.experiment_config["out_dir"]
        self.THREADS = self.experiment_config["threads"]

        self._validate_experiment()

        # --- Carrega as constantes (customizadas ou padrão) ---
        constants = self.DEFAULT_CONSTANTS.copy()
        if custom_constants:
            unknown = set(custom_constants) - set(constants)
            if unknown:
                raise ConfigurationError(f"Constantes desconhecidas: {sorted(unknown)}")
            constants.update(custom_constants)
        self.custom_constants = dict(custom_constants or {})
        for key, value in constants.items():
            setattr(self, key, value)

    # --- Construtores alternativos ---
    @classmethod
    def default(cls, kind: str = "sphere", factor_lengths: Optional[List[float]] = None) -> "Config":
        if factor_lengths is None and kind in ("product", "product-suspension"):
            factor_lengths = [1.0]
        return cls({"kind": kind, "factor_lengths": factor_lengths or []})

    @classmethod
    def from_dict(cls, document: Dict[str, Any], custom_constants: Optional[Dict[str, Any]] = None) -> "Config":
        if not isinstance(document, dict) or "model" not in document:
            raise ConfigurationError("Documento de configuração sem a seção 'model'.")
        experiment = {key: value for key, value in document.items() if key != "model"}
        return cls(document["model"], experiment, custom_constants)

    @classmethod
    def from_file(cls, config_path: str, custom_constants: Optional[Dict[str, Any]] = None) -> "Config":
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                document = json.load(f)
        except FileNotFoundError as e:
            raise ConfigurationError(f"Arquivo de configuração não encontrado: {config_path}") from e
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Erro ao decodificar o arquivo JSON de configuração: {config_path}") from e
        return cls.from_dict(document, custom_constants)

    def to_dict(self) -> Dict[str, Any]:
        document = {"model": copy.deepcopy(self.model_config)}
        document.update(copy.deepcopy(self.experiment_config))
        return document

    def with_overrides(self, **overrides: Any) -> "Config":
        """
        Aplica sobrescritas vindas da linha de comando. Valores None são ignorados;
        as chaves aceitas são 'model', 'factor_lengths', 'k_max', 'grid', 't_max',
        'tol', 'lambda_ladder', 'window', 't_min', 't_step', 'out_dir',
        'convention' e 'threads'.
        """
        document = self.to_dict()
        targets = {
            "k_max": ("spectral", "k_max"),
            "grid": ("spectral", "grid"),
            "convention": ("spectral", "convention"),
            "tol": ("sojourn", "tol"),
            "lambda_ladder": ("trace", "lambda_ladder"),
            "window": ("trace", "window"),
            "t_min": ("trace", "t_min"),
            "t_step": ("trace", "t_step"),
        }
        for key, value in overrides.items():
            if value is None:
                continue
            if key == "model":
                document["model"]["kind"] = value
                document["projector"].pop("shape", None)
                if value in ("product", "product-suspension") and not document["model"]["factor_lengths"]:
                    document["model"]["factor_lengths"] = [1.0]
                elif value not in ("product", "product-suspension"):
                    document["model"]["factor_lengths"] = []
            elif key == "factor_lengths":
                document["model"]["factor_lengths"] = list(value)
                document["projector"].pop("shape", None)
            elif key == "t_max":
                # O mesmo horizonte vale para a busca e para a varredura do traço.
                document["sojourn"]["t_max"] = value
                document["trace"]["t_max"] = value
            elif key in ("out_dir", "threads"):
                document[key] = value
            elif key in targets:
                section, name = targets[key]
                document[section][name] = value
            else:
                raise ConfigurationError(f"Sobrescrita desconhecida: {key}")
        return Config.from_dict(document, self.custom_constants or None)

    # --- Validações ---
    def _validate_model_config(self, config: Dict[str, Any]) -> Dict[str, Any]:
        if not isinstance(config, dict):
            raise ConfigurationError("O descritor do modelo deve ser um objeto JSON.")
        missing = self.REQUIRED_MODEL_KEYS - set(config.keys())
        if missing:
            raise ConfigurationError(f"Configurações do modelo ausentes: {missing}")
        return config

    def _merge_experiment(self, config: Dict[str, Any]) -> Dict[str, Any]:
        merged = copy.deepcopy(self.DEFAULT_EXPERIMENT)
        for key, value in config.items():
            if key not in merged:
                raise ConfigurationError(f"Seção de configuração desconhecida: '{key}'")
            if isinstance(merged[key], dict):
                if not isinstance(value, dict):
                    raise ConfigurationError(f"A seção '{key}' deve ser um objeto JSON.")
                unknown = set(value) - set(merged[key])
                if unknown:
                    raise ConfigurationError(f"Chaves desconhecidas na seção '{key}': {sorted(unknown)}")
                merged[key].update(copy.deepcopy(value))
            else:
                merged[key] = value
        return merged

    def _validate_experiment(self):
        positives = {
            "spectral.rel_tol": self.SPECTRAL_REL_TOL,
            "sojourn.t_max": self.SOJOURN_T_MAX,
            "sojourn.tol": self.TOL,
            "trace.t_step": self.T_STEP,
            "trace.tol_t": self.TOL_T,
        }
        for name, value in positives.items():
            if not isinstance(value, (int, float)) or value <= 0:
                raise ConfigurationError(f"O parâmetro '{name}' deve ser positivo: {value}")
        for name, value in (("spectral.k_max", self.K_MAX), ("spectral.n_modes", self.N_MODES),
                            ("spectral.grid", self.GRID), ("sojourn.seed_budget", self.SEED_BUDGET),
                            ("projector.samples", self.PROJECTOR_SAMPLES), ("threads", self.THREADS)):
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigurationError(f"O parâmetro '{name}' deve ser um inteiro >= 1: {value}")
        if self.CONVENTION not in self.VALID_CONVENTIONS:
            raise ConfigurationError(f"Convenção inválida: {self.CONVENTION}. Use 'basic' ou 'ambient'")
        if self.WINDOW not in self.VALID_WINDOWS:
            raise ConfigurationError(f"Janela inválida: {self.WINDOW}. Use 'gaussian' ou 'cosine'")
        ladder = self.LAMBDA_LADDER
        if len(ladder) < 3 or any(v <= 0 for v in ladder) or any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigurationError(
                f"A escada de Λ deve ser estritamente crescente, positiva e ter ao menos 3 valores: {ladder}"
            )
        if self.T_MIN <= 0:
            raise ConfigurationError(f"t_min deve ser positivo: {self.T_MIN}")
        if self.T_MIN < 0.5 and not self.experiment_config["trace"]["allow_small_t_min"]:
            raise ConfigurationError(
                f"t_min = {self.T_MIN} < 0.5 exige 'allow_small_t_min' (a singularidade em t = 0 domina a varredura)."
            )
        if self.T_MAX <= self.T_MIN + self.T_STEP:
            raise ConfigurationError(f"Intervalo de t inconsistente: [{self.T_MIN}, {self.T_MAX}]")
        if len(self.PROJECTOR_SHAPE) != len(self.model.coord_names):
            raise ConfigurationError(
                f"'projector.shape' deve ter {len(self.model.coord_names)} entradas para {self.model.kind.value}."
            )
        if len(self.PROJECTOR_Z_LADDER) < 2 or any(b <= a for a, b in zip(self.PROJECTOR_Z_LADDER, self.PROJECTOR_Z_LADDER[1:])):
            raise ConfigurationError("'projector.z_ladder' deve ser crescente com ao menos 2 valores.")

    @property
    def is_product(self) -> bool:
        return self.model.x_dim > 0

# foliatrace/core/store.py

"""
store.py: Persistência dos Artefatos de um Experimento.

A classe `ResultStore` grava, num diretório de saída, os artefatos de cada
etapa e mantém o `manifest.json` com as etapas concluídas.

**Formatos:**
    - CSV via pandas: cabeçalho, separador decimal '.', `index=False`,
      terminador de linha '\\n' e `float_format="%.12g"`.
    - JSON com chaves ordenadas e indentação fixa.
    - Nenhum artefato contém data, hora ou run id: configurações idênticas
      produzem arquivos idênticos byte a byte.

**Falhas:**
    - Erros de escrita viram `StorageError`. Em caso de falha de uma etapa,
      o manifesto registra a etapa e a mensagem, e os artefatos parciais
      permanecem no diretório.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

from foliatrace.exceptions import StorageError


def _to_builtin(value: Any):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset, tuple)):
        return list(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    raise TypeError(f"Objeto não serializável em JSON: {type(value).__name__}")


class ResultStore:
    def __init__(self, out_dir, manifest_name: str = "manifest.json", float_format: str = "%.12g"):
        self.logger = logging.getLogger("foliatrace.store")
        self.out_dir = Path(out_dir)
        self.manifest_name = manifest_name
        self.float_format = float_format
        self.stages_completed: List[str] = []
        self.artifacts: List[str] = []
        self.failed_stage: Optional[str] = None
        self.error: Optional[str] = None
        self.status: Optional[str] = None
        self.metadata: Dict[str, Any] = {}
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            self.logger.error(f"Falha ao criar o diretório de saída {self.out_dir}: {e}", exc_info=True)
            raise StorageError(f"Não foi possível criar o diretório de saída '{self.out_dir}': {e}") from e
        self.logger.debug(f"ResultStore inicializado em {self.out_dir}.")

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def _register(self, name: str):
        if name not in self.artifacts:
            self.artifacts.append(name)

    def save_frame(self, frame: pd.DataFrame, name: str) -> Path:
        target = self.path(name)
        try:
            frame.to_csv(target, index=False, lineterminator="\n", float_format=self.float_format)
        except OSError as e:
            self.logger.error(f"Falha ao gravar {target}: {e}", exc_info=True)
            raise StorageError(f"Erro ao gravar o CSV '{name}': {e}") from e
        self._register(name)
        self.logger.info(f"Artefato gravado: {name} ({len(frame)} linhas).")
        return target

    def save_json(self, document: Any, name: str) -> Path:
        target = self.path(name)
        try:
            text = json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False, default=_to_builtin)
            target.write_text(text + "\n", encoding="utf-8")
        except (OSError, TypeError, ValueError) as e:
            self.logger.error(f"Falha ao gravar {target}: {e}", exc_info=True)
            raise StorageError(f"Erro ao gravar o JSON '{name}': {e}") from e
        self._register(name)
        self.logger.info(f"Artefato gravado: {name}.")
        return target

    def save_text(self, lines: Iterable[str], name: str) -> Path:
        target = self.path(name)
        try:
            target.write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError as e:
            self.logger.error(f"Falha ao gravar {target}: {e}", exc_info=True)
            raise StorageError(f"Erro ao gravar o texto '{name}': {e}") from e
        self._register(name)
        return target

    def mark_stage(self, stage: str):
        if stage not in self.stages_completed:
            self.stages_completed.append(stage)

    def mark_failure(self, stage: Optional[str], error: BaseException):
        self.failed_stage = stage
        self.error = f"{type(error).__name__}: {error}"

    def manifest(self) -> Dict[str, Any]:
        return {
            "status": self.status,
            "stages_completed": list(self.stages_completed),
            "artifacts": sorted(a for a in self.artifacts if a != self.manifest_name),
            "failed_stage": self.failed_stage,
            "error": self.error,
            **self.metadata,
        }

    def write_manifest(self, status: str) -> Path:
        self.status = status
        return self.save_json(self.manifest(), self.manifest_name)

"""
Testes unitários para a persistência de artefatos.
"""

import json

import numpy as np
import pandas as pd
import pytest

from foliatrace.core.spectral import MultiplicityConvention
from foliatrace.core.store import ResultStore
from foliatrace.exceptions import StorageError


# Fixtures
@pytest.fixture
def store(tmp_path):
    return ResultStore(tmp_path / "saida")


# Testes
def test_creates_output_directory(tmp_path):
    ResultStore(tmp_path / "a" / "b")
    assert (tmp_path / "a" / "b").is_dir()


def test_output_directory_error(tmp_path):
    blocker = tmp_path / "arquivo"
    blocker.write_text("x", encoding="utf-8")
    with pytest.raises(StorageError) as exc_info:
        ResultStore(blocker / "saida")
    assert "Não foi possível criar" in str(exc_info.value)


def test_save_frame_format(store):
    frame = pd.DataFrame({"t": [0.1, 0.2], "abs": [1.0 / 3.0, 2.0]})
    path = store.save_frame(frame, "trace.csv")
    assert path.read_text(encoding="utf-8") == "t,abs\n0.1,0.333333333333\n0.2,2\n"
    assert store.artifacts == ["trace.csv"]


def test_save_json_is_canonical(store):
    document = {"b": np.float64(1.5), "a": np.arange(3), "c": MultiplicityConvention.AMBIENT, "d": (1, 2)}
    path = store.save_json(document, "dados.json")
    text = path.read_text(encoding="utf-8")
    assert text.endswith("}\n")
    assert list(json.loads(text)) == ["a", "b", "c", "d"]
    assert json.loads(text) == {"a": [0, 1, 2], "b": 1.5, "c": "ambient", "d": [1, 2]}


def test_save_json_identical_documents_are_identical_files(tmp_path):
    first = ResultStore(tmp_path / "um").save_json({"x": [1.0, 2.0], "y": "z"}, "doc.json")
    second = ResultStore(tmp_path / "dois").save_json({"y": "z", "x": [1.0, 2.0]}, "doc.json")
    assert first.read_bytes() == second.read_bytes()


def test_save_json_unserializable(store):
    with pytest.raises(StorageError) as exc_info:
        store.save_json({"objeto": object()}, "ruim.json")
    assert "ruim.json" in str(exc_info.value)


def test_save_text(store):
    path = store.save_text(["linha 1", "linha 2"], "summary.txt")
    assert path.read_text(encoding="utf-8") == "linha 1\nlinha 2\n"


def test_manifest_tracks_stages_and_artifacts(store):
    store.metadata = {"config": {"model": "sphere"}}
    store.save_text(["ok"], "summary.txt")
    store.mark_stage("spectrum")
    store.mark_stage("spectrum")
    store.mark_stage("trace")
    path = store.write_manifest("PASS")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    assert manifest["status"] == "PASS"
    assert manifest["stages_completed"] == ["spectrum", "trace"]
    assert manifest["artifacts"] == ["summary.txt"]
    assert manifest["failed_stage"] is None
    assert manifest["config"] == {"model": "sphere"}


def test_manifest_records_failure(store):
    store.mark_stage("spectrum")
    store.mark_failure("trace", RuntimeError("explodiu"))
    manifest = json.loads(store.write_manifest("ERRO").read_text(encoding="utf-8"))
    assert manifest["failed_stage"] == "trace"
    assert manifest["error"] == "RuntimeError: explodiu"
    assert manifest["stages_completed"] == ["spectrum"]

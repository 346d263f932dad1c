# Ajuste de ambiente para execução dos testes pytest
#
# Este arquivo garante que o diretório raiz do projeto esteja no sys.path
# para que o pacote 'foliatrace' seja encontrado corretamente durante os testes,
# e reúne as fixtures de modelos usadas em mais de um módulo de teste.

import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from foliatrace.core.model import build_model  # noqa: E402


@pytest.fixture
def sphere():
    return build_model("sphere")


@pytest.fixture
def torus():
    return build_model("torus")


@pytest.fixture
def product():
    """Produto com um fator circular de comprimento 1."""
    return build_model("product", [1.0])


@pytest.fixture
def make_catalog():
    """Fábrica de catálogos sintéticos a partir de pares (T, classe)."""
    from foliatrace.core.flow import GeodesicArc, unit_conormal_seed
    from foliatrace.core.model import regular_stratum
    from foliatrace.core.sojourn import SojournCatalog, SojournClass, SojournEntry

    def factory(model, items, t_max=20.0, tol=1e-6):
        base = (0.0,) * len(model.coord_names)
        seed = unit_conormal_seed(model, base, [1.0] + [0.0] * (len(model.transverse_coords) - 1))
        entries = []
        for T, label in sorted(items):
            cls = SojournClass(label)
            arc = GeodesicArc(seed, T, seed, frozenset({regular_stratum(model)}), 0.0)
            entries.append(SojournEntry(T, cls, arc, (cls,), 0.0))
        return SojournCatalog(tuple(entries), t_max, tol, model)

    return factory

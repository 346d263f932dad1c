"""
Testes unitários para a busca de tempos de permanência.
"""

import math

import numpy as np
import pytest

from foliatrace.core.flow import NORTH_POLE, unit_conormal_seed
from foliatrace.core.sojourn import (
    SojournClass,
    SojournSearch,
    axis_directions,
    base_points,
    detect_relatively_closed,
    enumerate_sojourn_times,
    lattice_directions,
    resonant_directions,
    sojourn_cutoff,
    sweep_seeds,
)
from foliatrace.exceptions import ConfigurationError

TWO_PI = 2 * math.pi


# Fixtures
@pytest.fixture(scope="module")
def sphere_catalog():
    from foliatrace.core.model import build_model

    return enumerate_sojourn_times(build_model("sphere"), t_max=20.0, tol=1e-6, seed_budget=256)


@pytest.fixture(scope="module")
def torus_catalog():
    from foliatrace.core.model import build_model

    return enumerate_sojourn_times(build_model("torus"), t_max=20.0, tol=1e-6, seed_budget=256)


# Testes
def test_base_points_poles_first(sphere):
    points = base_points(sphere, 3)
    assert [p[0] for p in points] == [1.0, -1.0, 0.0, 0.5, -0.5]


def test_resonant_directions_product(product):
    """Direções (m·L, 2πn)/T ordenadas pelo comprimento T."""
    directions = resonant_directions(product, 8.0)
    assert np.allclose(directions[0], [1.0, 0.0])
    assert np.allclose(directions[1], [0.0, 1.0])
    lengths = [1.0, TWO_PI] + [math.hypot(m, TWO_PI) for m in range(1, 5)]
    assert len(directions) == len(lengths)
    third = np.array([1.0, TWO_PI]) / math.hypot(1.0, TWO_PI)
    assert np.allclose(directions[2], third)


def test_lattice_directions_are_primitive(product):
    directions = lattice_directions(product, 2)
    assert len(directions) == 16
    assert all(np.linalg.norm(v) == pytest.approx(1.0) for v in directions)


def test_sweep_seeds_order_and_budget(sphere):
    seeds = sweep_seeds(sphere, 3, 20.0)
    assert len(seeds) == 3
    assert seeds[0].chart == NORTH_POLE
    with pytest.raises(ConfigurationError) as exc_info:
        sweep_seeds(sphere, 0, 20.0)
    assert "seed_budget" in str(exc_info.value)


def test_sweep_seeds_deduplicates(torus):
    """No toro, eixos, ressonantes e reticulado geram 2 direções por ponto-base."""
    seeds = sweep_seeds(torus, 256, 20.0)
    assert len(seeds) == 2 * len(base_points(torus)) == 6
    assert len(axis_directions(torus)) == 1


def test_sphere_catalog(sphere_catalog):
    """Esfera: {2π, 4π, 6π}, todos mínimos, sem tempos regulares."""
    assert np.allclose(sphere_catalog.times, [TWO_PI, 2 * TWO_PI, 3 * TWO_PI], atol=1e-6)
    assert all(e.classification is SojournClass.MINIMAL for e in sphere_catalog.entries)
    assert sphere_catalog.regular_times == []
    assert sphere_catalog.minimal_times == sphere_catalog.times


def test_torus_catalog(torus_catalog):
    """Toro: {2π, 4π, 6π}, todos regulares."""
    assert np.allclose(torus_catalog.times, [TWO_PI, 2 * TWO_PI, 3 * TWO_PI], atol=1e-6)
    assert torus_catalog.regular_times == torus_catalog.times
    assert torus_catalog.singular_times == []


@pytest.mark.parametrize("catalog_name", ["sphere_catalog", "torus_catalog"])
def test_no_times_off_two_pi_lattice(request, catalog_name):
    """Controle negativo: nenhum tempo fora de 2πℤ."""
    catalog = request.getfixturevalue(catalog_name)
    for T in catalog.times:
        assert abs(T / TWO_PI - round(T / TWO_PI)) * TWO_PI <= 1e-6


def test_witness_arc_quality(sphere_catalog):
    """Testemunhas conservam energia e passam na reversão temporal."""
    search = SojournSearch(sphere_catalog.model)
    for entry in sphere_catalog.entries:
        assert entry.witness.energy_drift <= 1e-8
        assert search.flow.reversal_defect(entry.witness) <= 1e-6
        assert entry.e_T_estimate is not None and entry.e_T_estimate >= 0


def test_catalog_frames(sphere_catalog):
    frame = sphere_catalog.to_frame()
    assert list(frame.columns[:7]) == [
        "T", "classification", "e_T_estimate", "residual", "relies_on_closure", "witness_classes", "start_chart",
    ]
    assert len(frame) == 3
    document = sphere_catalog.to_dict()
    assert document["model"]["kind"] == "sphere-suspension"
    assert document["entries"][0]["classification"] == "Minimal"
    assert "minimal" in document["entries"][0]["touched_strata"]


def test_product_flat_times_are_regular(product):
    """Direções planas: inteiros regulares (a testemunha polar também os encontra)."""
    search = SojournSearch(product)
    catalog = search.catalog(t_max=4.0, seed_budget=10, estimate_rank=False)
    assert np.allclose(catalog.times, [1.0, 2.0, 3.0, 4.0], atol=1e-6)
    assert catalog.regular_times == catalog.times
    assert SojournClass.MINIMAL in catalog.entries[0].witness_classes


def test_detect_relatively_closed_torus(torus):
    seed = unit_conormal_seed(torus, (0.0, 0.0, 0.0), (1.0,))
    arcs = detect_relatively_closed(torus, [seed], 13.0)
    assert np.allclose([a.T for a in arcs], [TWO_PI, 2 * TWO_PI], atol=1e-6)


def test_search_rejects_bad_tolerance(sphere):
    with pytest.raises(ConfigurationError):
        SojournSearch(sphere, tol=0.0)


def test_catalog_views(product, make_catalog):
    catalog = make_catalog(product, [(1.0, "Regular"), (TWO_PI, "Minimal"), (6.36, "Singular")])
    assert catalog.regular_times == [1.0]
    assert catalog.singular_times == [TWO_PI, 6.36]
    assert catalog.minimal_times == [TWO_PI]
    assert catalog.restricted([SojournClass.REGULAR]).times == [1.0]
    assert catalog.without_times([TWO_PI], 0.01).times == [1.0, 6.36]
    assert catalog.nearest(6.3).T == TWO_PI


def test_cutoff_isolates_regular_times(product, make_catalog):
    """χ ≡ 1 perto dos tempos regulares e 0 perto dos singulares."""
    items = [(float(k), "Regular") for k in range(1, 8)]
    items += [(TWO_PI, "Minimal"), (math.hypot(1, TWO_PI), "Singular"), (math.hypot(2, TWO_PI), "Singular")]
    chi = sojourn_cutoff(make_catalog(product, items, t_max=8.0), (0.5, 6.5))
    assert np.allclose(chi(np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])), 1.0)
    assert np.allclose(chi(np.array([TWO_PI, math.hypot(1, TWO_PI)])), 0.0)
    values = chi(np.linspace(0.5, 6.5, 601))
    assert np.all((values >= 0.0) & (values <= 1.0))


def test_cutoff_overlap_is_configuration_error(product, make_catalog):
    catalog = make_catalog(product, [(1.0, "Regular"), (1.2, "Singular")])
    with pytest.raises(ConfigurationError) as exc_info:
        sojourn_cutoff(catalog, (0.5, 2.0))
    assert "Vizinhanças sobrepostas" in str(exc_info.value)


def test_cutoff_requires_positive_widths(product, make_catalog):
    with pytest.raises(ConfigurationError):
        sojourn_cutoff(make_catalog(product, [(1.0, "Regular")]), (0.5, 2.0), halfwidth=0.0)


def test_product_catalog_mixed_times(product):
    """Até t = 8: inteiros regulares, 2π mínimo e os tempos mistos √(m² + 4π²n²) singulares."""
    catalog = SojournSearch(product).catalog(t_max=8.0, seed_budget=40, estimate_rank=False)
    regular = catalog.regular_times
    assert all(abs(T - round(T)) <= 1e-6 for T in regular)
    assert np.allclose(regular[:7], [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0], atol=1e-6)

    two_pi = catalog.nearest(TWO_PI)
    assert two_pi.T == pytest.approx(TWO_PI, abs=1e-6)
    assert two_pi.classification is SojournClass.MINIMAL

    mixed = catalog.nearest(math.hypot(1.0, TWO_PI))
    assert mixed.T == pytest.approx(math.hypot(1.0, TWO_PI), abs=1e-6)
    assert mixed.classification is not SojournClass.REGULAR

    allowed = [math.hypot(m, TWO_PI * n) for m in range(0, 9) for n in range(1, 3)]
    for T in catalog.singular_times:
        assert min(abs(T - a) for a in allowed) <= 1e-6

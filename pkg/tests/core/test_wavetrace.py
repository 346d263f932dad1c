"""
Testes unitários para o traço de onda básico e a detecção de singularidades.
"""

import math

import numpy as np
import pytest

from foliatrace.core.model import build_model
from foliatrace.core.sojourn import SojournClass, sojourn_cutoff
from foliatrace.core.spectral import Provenance, SpectralData, analytic_spectrum
from foliatrace.core.wavetrace import (
    FrequencyWindow,
    WindowShape,
    cutoff_partial_trace,
    detect_singularities,
    evaluate_trace,
    growth_ratio,
    parse_window,
    spectral_distribution,
    trace_at_zero,
    verify_poisson,
)
from foliatrace.exceptions import ConfigurationError, ResolutionError

TWO_PI = 2 * math.pi


# Fixtures
@pytest.fixture(scope="module")
def sphere_spectrum():
    return analytic_spectrum(build_model("sphere"), 400)


@pytest.fixture(scope="module")
def sphere_report(sphere_spectrum):
    return detect_singularities(sphere_spectrum, "gaussian", [50.0, 100.0, 200.0], (1.0, 20.0), t_step=0.01)


@pytest.fixture(scope="module")
def sphere_ambient_report():
    spectrum = analytic_spectrum(build_model("sphere"), 400, "ambient")
    return detect_singularities(spectrum, "gaussian", [50.0, 100.0, 200.0], (1.0, 20.0), t_step=0.01)


@pytest.fixture(scope="module")
def product_cutoff():
    """Corte que anula 2π e os tempos mistos √(m² + 4π²) no produto de fator 1."""
    from foliatrace.core.flow import GeodesicArc, unit_conormal_seed
    from foliatrace.core.model import regular_stratum
    from foliatrace.core.sojourn import SojournCatalog, SojournEntry

    model = build_model("product", [1.0])
    seed = unit_conormal_seed(model, (0.0,) * len(model.coord_names), [1.0, 0.0])
    items = [(float(k), SojournClass.REGULAR) for k in range(1, 9)]
    items += [(TWO_PI, SojournClass.MINIMAL)]
    items += [(math.hypot(m, TWO_PI), SojournClass.SINGULAR) for m in range(1, 5)]
    entries = tuple(
        SojournEntry(T, cls, GeodesicArc(seed, T, seed, frozenset({regular_stratum(model)}), 0.0), (cls,), 0.0)
        for T, cls in sorted(items)
    )
    catalog = SojournCatalog(entries, 8.0, 1e-6, model)
    return model, catalog, sojourn_cutoff(catalog, (0.5, 6.5))


@pytest.fixture(scope="module", params=["basic", "ambient"])
def product_report(request, product_cutoff):
    model, _, chi = product_cutoff
    spectrum = analytic_spectrum(model, 300, request.param)
    return detect_singularities(spectrum, "gaussian", [25.0, 50.0, 100.0], (0.5, 6.5), t_step=0.01, cutoff=chi)


@pytest.fixture
def torus_spectrum(torus):
    return analytic_spectrum(torus, 3)


# Testes
def test_gaussian_window_values():
    window = FrequencyWindow("gaussian", 10.0)
    assert window.shape is WindowShape.GAUSSIAN
    assert window(0.0) == pytest.approx(1.0)
    assert window(10.0) == pytest.approx(math.exp(-1.0))


def test_cosine_window_values():
    """1 até Λ, meia altura em 1.5Λ, zero a partir de 2Λ."""
    window = FrequencyWindow("cosine", 10.0)
    values = window([0.0, 5.0, 10.0, 15.0, 20.0, 30.0])
    assert np.allclose(values, [1.0, 1.0, 1.0, 0.5, 0.0, 0.0], atol=1e-12)


def test_window_rejects_non_positive_cutoff():
    with pytest.raises(ConfigurationError) as exc_info:
        FrequencyWindow("gaussian", 0.0)
    assert "O corte Λ deve ser positivo" in str(exc_info.value)


def test_parse_window_invalid():
    with pytest.raises(ConfigurationError) as exc_info:
        parse_window("hann")
    assert "Janela inválida" in str(exc_info.value)


def test_spectral_distribution_counts_multiplicities(torus_spectrum):
    histogram = spectral_distribution(torus_spectrum, bin_width=1.0, mu_max=4.0)
    assert list(histogram.counts) == [1, 2, 2, 2]
    frame = histogram.to_frame()
    assert list(frame.columns) == ["mu_lo", "mu_hi", "count"]


def test_spectral_distribution_empty(torus):
    empty = SpectralData((), Provenance.ANALYTIC, torus)
    histogram = spectral_distribution(empty, bin_width=0.5)
    assert histogram.counts.sum() == 0


def test_spectral_distribution_bad_width(torus_spectrum):
    with pytest.raises(ConfigurationError):
        spectral_distribution(torus_spectrum, bin_width=0.0)


def test_trace_at_zero_is_weighted_count(torus_spectrum):
    """W_Λ(0) = Σ mⱼ w(μⱼ/Λ)."""
    window = FrequencyWindow("gaussian", 2.0)
    expected = 1.0 + 2.0 * sum(math.exp(-((k / 2.0) ** 2)) for k in (1, 2, 3))
    series = evaluate_trace(torus_spectrum, window, [0.0, 0.1, 0.2])
    assert series.values[0].real == pytest.approx(expected)
    assert series.values[0].imag == pytest.approx(0.0, abs=1e-12)
    assert trace_at_zero(torus_spectrum, window) == pytest.approx(expected)


def test_trace_is_chunk_and_thread_invariant(sphere_spectrum):
    window = FrequencyWindow("gaussian", 50.0)
    t = np.linspace(1.0, 5.0, 401)
    reference = evaluate_trace(sphere_spectrum, window, t)
    blocked = evaluate_trace(sphere_spectrum, window, t, chunk=7, threads=3)
    assert np.allclose(reference.values, blocked.values, rtol=0, atol=1e-12)
    assert reference.t_step == pytest.approx(0.01)


def test_trace_frame_columns(torus_spectrum):
    series = evaluate_trace(torus_spectrum, FrequencyWindow("cosine", 2.0), [0.5, 1.0])
    frame = series.to_frame()
    assert list(frame.columns) == ["t", "re", "im", "abs", "lambda_cutoff"]
    assert (frame["lambda_cutoff"] == 2.0).all()


def test_trace_requires_uniform_grid(torus_spectrum):
    with pytest.raises(ConfigurationError) as exc_info:
        evaluate_trace(torus_spectrum, FrequencyWindow("gaussian", 2.0), [0.0, 0.1, 0.3])
    assert "uniforme" in str(exc_info.value)


def test_trace_rejects_empty_spectrum(torus):
    empty = SpectralData((), Provenance.ANALYTIC, torus)
    with pytest.raises(ConfigurationError):
        evaluate_trace(empty, FrequencyWindow("gaussian", 2.0), [0.0, 0.1])


def test_cutoff_partial_trace(torus_spectrum):
    series = evaluate_trace(torus_spectrum, FrequencyWindow("gaussian", 2.0), [0.5, 1.0, 1.5])
    half = cutoff_partial_trace(series, lambda t: 0.5 * np.ones_like(t))
    assert np.allclose(half.values, 0.5 * series.values)
    with pytest.raises(ConfigurationError) as exc_info:
        cutoff_partial_trace(series, lambda t: 2.0 * np.ones_like(t))
    assert "valores em [0, 1]" in str(exc_info.value)


def test_growth_ratio_separates_singular_times(sphere_spectrum):
    """O traço dobra com Λ no tempo fechado e permanece limitado nos demais."""
    assert growth_ratio(sphere_spectrum, "gaussian", TWO_PI, 50.0) > 1.5
    assert growth_ratio(sphere_spectrum, "gaussian", math.pi, 50.0) < 1.5
    assert growth_ratio(sphere_spectrum, "gaussian", 3.0, 50.0) < 1.5


def test_growth_exponent_stable_across_windows(sphere_spectrum):
    ladder = np.array([25.0, 50.0, 100.0])
    slopes = []
    for shape in ("gaussian", "cosine"):
        amplitudes = [evaluate_trace(sphere_spectrum, FrequencyWindow(shape, lam), [TWO_PI]).abs[0] for lam in ladder]
        slopes.append(np.polyfit(np.log(ladder), np.log(amplitudes), 1)[0])
    assert slopes[0] == pytest.approx(1.0, rel=0.2)
    assert abs(slopes[0] - slopes[1]) <= 0.2 * abs(slopes[0])


def test_sphere_singularities_at_closed_times(sphere_report):
    times = sphere_report.times
    assert len(times) == 3
    assert np.allclose(times, [TWO_PI, 2 * TWO_PI, 3 * TWO_PI], atol=0.05)
    for singularity in sphere_report.detected:
        assert singularity.exponent >= 0.3
        assert singularity.drift <= sphere_report.t_step + 1e-12
        assert singularity.exponent_ci[0] <= singularity.exponent <= singularity.exponent_ci[1]


def test_report_to_dict(sphere_report):
    document = sphere_report.to_dict()
    assert document["window"] == "gaussian"
    assert document["convention"] == "basic"
    assert document["lambda_ladder"] == [50.0, 100.0, 200.0]
    assert set(document["singularities"][0]["amplitudes"]) == {"50", "100", "200"}
    assert document["cutoff_applied"] is False


def test_detection_requires_resolved_spectrum():
    short = analytic_spectrum(build_model("sphere"), 50)
    with pytest.raises(ResolutionError):
        detect_singularities(short, "gaussian", [50.0, 100.0, 200.0], (1.0, 20.0))


@pytest.mark.parametrize(
    "ladder, t_range, message",
    [
        ([50.0, 100.0], (1.0, 20.0), "escada de Λ"),
        ([50.0, 40.0, 200.0], (1.0, 20.0), "escada de Λ"),
        ([50.0, 100.0, 200.0], (0.0, 20.0), "Intervalo de tempos inválido"),
    ],
)
def test_detection_invalid_parameters(sphere_spectrum, ladder, t_range, message):
    with pytest.raises(ConfigurationError) as exc_info:
        detect_singularities(sphere_spectrum, "gaussian", ladder, t_range)
    assert message in str(exc_info.value)


def test_with_matches_attaches_classification(sphere_report, sphere, make_catalog):
    catalog = make_catalog(sphere, [(TWO_PI, "Minimal"), (2 * TWO_PI, "Minimal"), (3 * TWO_PI, "Minimal")])
    matched = sphere_report.with_matches(catalog, tol_t=0.05)
    assert [d.classification for d in matched.detected] == ["Minimal"] * 3
    assert np.allclose([d.matched_T for d in matched.detected], catalog.times)
    assert all(d.expected_exponent is None for d in matched.detected)


def test_verify_poisson_pass(sphere_report, sphere, make_catalog):
    catalog = make_catalog(sphere, [(TWO_PI, "Minimal"), (2 * TWO_PI, "Minimal"), (3 * TWO_PI, "Minimal")])
    verdict = verify_poisson(catalog, sphere_report, tol_T=0.05)
    assert verdict.passed
    assert verdict.status == "PASS"
    assert len(verdict.matched) == 3
    assert verdict.catalog_times_silent == ()
    assert verdict.to_dict()["status"] == "PASS"


def test_verify_poisson_fails_on_unmatched(sphere_report, sphere, make_catalog):
    """Controle negativo: catálogo sem 4π e 6π."""
    catalog = make_catalog(sphere, [(TWO_PI, "Minimal")])
    verdict = verify_poisson(catalog, sphere_report, tol_T=0.05)
    assert not verdict.passed
    assert verdict.status == "FAIL"
    assert np.allclose(verdict.unmatched, [2 * TWO_PI, 3 * TWO_PI], atol=0.05)


def test_verify_poisson_reports_silent_times(sphere_report, sphere, make_catalog):
    items = [(3.0, "Regular"), (TWO_PI, "Minimal"), (2 * TWO_PI, "Minimal"), (3 * TWO_PI, "Minimal")]
    verdict = verify_poisson(make_catalog(sphere, items), sphere_report, tol_T=0.05)
    assert verdict.passed
    assert verdict.catalog_times_silent == (3.0,)


def test_verify_poisson_bad_tolerance(sphere_report, sphere, make_catalog):
    with pytest.raises(ConfigurationError):
        verify_poisson(make_catalog(sphere, [(TWO_PI, "Minimal")]), sphere_report, tol_T=0.0)


def test_cosine_window_ramp_is_flat_at_both_ends():
    """A rampa C^∞ encosta em 1 e em 0 sem quina nas emendas."""
    window = FrequencyWindow("cosine", 1.0)
    assert window(1.01) > 1.0 - 1e-12
    assert window(1.99) < 1e-12
    ramp = window(np.linspace(1.0, 2.0, 101))
    assert np.all(np.diff(ramp) <= 0.0)


def test_trace_is_conjugate_symmetric(sphere_spectrum):
    """W_Λ(-t) = conj W_Λ(t) para espectro real e janela real."""
    t = np.linspace(-2.0, 2.0, 401)
    series = evaluate_trace(sphere_spectrum, FrequencyWindow("gaussian", 50.0), t)
    assert np.allclose(series.values[::-1], np.conj(series.values), rtol=0, atol=1e-9)


def test_trace_is_dominated_by_t_zero(sphere_spectrum):
    window = FrequencyWindow("cosine", 50.0)
    series = evaluate_trace(sphere_spectrum, window, np.linspace(0.0, 20.0, 2001))
    assert np.all(series.abs <= trace_at_zero(sphere_spectrum, window) + 1e-9)


def test_locations_independent_of_window_shape(sphere_spectrum, sphere_report):
    cosine = detect_singularities(sphere_spectrum, "cosine", [50.0, 100.0, 200.0], (1.0, 20.0), t_step=0.01)
    assert len(cosine.times) == len(sphere_report.times) == 3
    assert np.allclose(cosine.times, sphere_report.times, rtol=0, atol=2 * sphere_report.t_step)


def test_locations_independent_of_convention(sphere_report, sphere_ambient_report):
    assert sphere_ambient_report.convention == "ambient"
    assert len(sphere_ambient_report.times) == 3
    assert np.allclose(sphere_ambient_report.times, sphere_report.times, rtol=0, atol=0.05)


def test_product_cutoff_keeps_exactly_regular_times(product_report):
    """Com χ, sobrevivem só os múltiplos do comprimento do fator plano."""
    assert product_report.cutoff_applied is True
    assert len(product_report.times) == 6
    assert np.allclose(product_report.times, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0], rtol=0, atol=0.05)
    for singularity in product_report.detected:
        assert singularity.exponent >= 0.3


def test_product_cutoff_passes_complete_verification(product_report, product_cutoff):
    _, catalog, _ = product_cutoff
    verdict = verify_poisson(catalog.restricted([SojournClass.REGULAR]), product_report, 0.05, require_complete=True)
    assert verdict.passed
    assert verdict.catalog_times_silent == ()
    assert verdict.to_dict()["require_complete"] is True


def test_complete_verification_fails_on_silent_times(sphere_report, sphere, make_catalog):
    """Tempo do catálogo no intervalo sem pico: só reprova quando a completude é exigida."""
    items = [(3.0, "Regular"), (TWO_PI, "Minimal"), (2 * TWO_PI, "Minimal"), (3 * TWO_PI, "Minimal")]
    catalog = make_catalog(sphere, items)
    assert verify_poisson(catalog, sphere_report, tol_T=0.05).passed
    verdict = verify_poisson(catalog, sphere_report, tol_T=0.05, require_complete=True)
    assert not verdict.passed
    assert verdict.unmatched == ()
    assert verdict.catalog_times_silent == (3.0,)

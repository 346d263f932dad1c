"""
Testes unitários para o espectro básico.
"""

import numpy as np
import pytest

from foliatrace.core.spectral import (
    MultiplicityConvention,
    Provenance,
    SpectralData,
    SpectralEntry,
    analytic_spectrum,
    assembled_operator,
    cluster_eigenvalues,
    fourier_symmetric_matrix,
    numeric_spectrum,
    spectrum_compare,
)
from foliatrace.exceptions import ConfigurationError, DiscretizationError, SolverError


# Testes
def test_torus_analytic(torus):
    """Toro: λ = k², multiplicidade 2 para k ≥ 1."""
    spectrum = analytic_spectrum(torus, 5)
    assert list(spectrum.lambdas) == [0.0, 1.0, 4.0, 9.0, 16.0, 25.0]
    assert list(spectrum.multiplicities) == [1, 2, 2, 2, 2, 2]
    assert spectrum.provenance is Provenance.ANALYTIC


def test_torus_conventions_agree(torus):
    basic = analytic_spectrum(torus, 10, "basic")
    ambient = analytic_spectrum(torus, 10, "ambient")
    assert np.array_equal(basic.multiplicities, ambient.multiplicities)


@pytest.mark.parametrize(
    "convention, multiplicities",
    [("basic", [1, 1, 1, 1]), ("ambient", [1, 3, 5, 7])],
)
def test_sphere_analytic(sphere, convention, multiplicities):
    """Esfera: λ = k(k+1), multiplicidade 1 (básica) ou 2k+1 (ambiente)."""
    spectrum = analytic_spectrum(sphere, 3, convention)
    assert list(spectrum.lambdas) == [0.0, 2.0, 6.0, 12.0]
    assert list(spectrum.multiplicities) == multiplicities
    assert spectrum.convention is MultiplicityConvention(convention)


def test_product_analytic(product):
    """Produto: somas k(k+1) + (2πm)², limitadas por k_max(k_max+1)."""
    spectrum = analytic_spectrum(product, 10)
    lam_max = 110.0
    assert spectrum.lambdas[0] == 0.0
    assert spectrum.lambdas[-1] <= lam_max
    expected = sorted(
        {float(k * (k + 1) + (2 * np.pi * m) ** 2) for k in range(11) for m in range(3)
         if k * (k + 1) + (2 * np.pi * m) ** 2 <= lam_max}
    )
    assert np.allclose(spectrum.lambdas, expected)
    entry = spectrum.entries[int(np.argmin(np.abs(spectrum.lambdas - 4 * np.pi**2)))]
    assert entry.multiplicity == 2


def test_product_merges_coincident_eigenvalues():
    """Fatores iguais geram autovalores coincidentes que são agrupados."""
    from foliatrace.core.model import build_model

    model = build_model("product", [1.0, 1.0])
    spectrum = analytic_spectrum(model, 8)
    entry = spectrum.entries[int(np.argmin(np.abs(spectrum.lambdas - 4 * np.pi**2)))]
    assert entry.multiplicity == 4


def test_k_max_zero(sphere):
    spectrum = analytic_spectrum(sphere, 0)
    assert len(spectrum) == 1
    assert spectrum.lambdas[0] == 0.0


def test_invalid_k_max(sphere):
    with pytest.raises(ConfigurationError) as exc_info:
        analytic_spectrum(sphere, -1)
    assert "k_max" in str(exc_info.value)


def test_invalid_convention(sphere):
    with pytest.raises(ConfigurationError) as exc_info:
        analytic_spectrum(sphere, 3, "weird")
    assert "Convenção de multiplicidade inválida" in str(exc_info.value)


def test_sphere_numeric_matches_analytic(sphere):
    """k(k+1) para k ≤ 20 com erro relativo ≤ 1e-6."""
    numeric = numeric_spectrum(sphere, 21, 128)
    comparison = spectrum_compare(numeric, analytic_spectrum(sphere, 20), 1e-6)
    assert comparison.passed
    assert comparison.n_compared == 21
    assert comparison.multiplicity_mismatches == ()


def test_torus_numeric_matches_analytic(torus):
    """k² para k ≤ 20 com erro relativo ≤ 1e-8."""
    numeric = numeric_spectrum(torus, 41, 164)
    analytic = analytic_spectrum(torus, 20)
    comparison = spectrum_compare(numeric, analytic, 1e-8)
    assert comparison.passed
    assert len(numeric) == 21
    assert comparison.multiplicity_mismatches == ()


def test_product_numeric_matches_analytic(product):
    numeric = numeric_spectrum(product, 12, 48)
    comparison = spectrum_compare(numeric, analytic_spectrum(product, 20), 1e-6)
    assert comparison.max_error <= 1e-6


def test_numeric_grid_too_coarse(sphere):
    with pytest.raises(DiscretizationError) as exc_info:
        numeric_spectrum(sphere, 21, 40)
    assert "insuficiente" in str(exc_info.value)


def test_compare_rejects_convention_mismatch(sphere):
    with pytest.raises(ConfigurationError) as exc_info:
        spectrum_compare(analytic_spectrum(sphere, 3, "basic"), analytic_spectrum(sphere, 3, "ambient"), 1e-6)
    assert "Convenções diferentes" in str(exc_info.value)


def test_compare_rejects_model_mismatch(sphere, torus):
    with pytest.raises(ConfigurationError):
        spectrum_compare(analytic_spectrum(sphere, 3), analytic_spectrum(torus, 3), 1e-6)


def test_assembled_operator_symmetric(product):
    matrix = assembled_operator(product, 8)
    assert matrix.shape == (64, 64)
    assert np.allclose(matrix, matrix.T, atol=1e-9)


def test_fourier_matrix_eigenvalues():
    values = np.sort(np.linalg.eigvalsh(fourier_symmetric_matrix(16, 2 * np.pi)))
    assert np.allclose(values[:5], [0, 1, 1, 4, 4], atol=1e-10)


def test_cluster_eigenvalues_sums_multiplicities():
    entries = cluster_eigenvalues([4.0, 1.0, 1.0 + 1e-9, 0.0], [1, 1, 1, 1], ["a", "b", "c", "d"], 1e-6)
    assert [e.multiplicity for e in entries] == [1, 2, 1]
    assert entries[1].label == "b|c"


def test_spectral_data_invariants(sphere):
    with pytest.raises(SolverError):
        SpectralData((SpectralEntry(0.0, 1, "a"), SpectralEntry(-1.0, 1, "b")), Provenance.NUMERIC, sphere)
    with pytest.raises(SolverError):
        SpectralData((SpectralEntry(2.0, 1, "a"),), Provenance.NUMERIC, sphere)
    with pytest.raises(SolverError):
        SpectralData((SpectralEntry(0.0, 0, "a"),), Provenance.NUMERIC, sphere)


def test_spectrum_frame_columns(sphere):
    frame = analytic_spectrum(sphere, 2, "ambient").to_frame()
    assert list(frame.columns) == [
        "index", "label", "lambda", "sqrt_lambda", "multiplicity", "convention", "provenance",
    ]
    assert frame["multiplicity"].tolist() == [1, 3, 5]
    assert set(frame["convention"]) == {"ambient"}

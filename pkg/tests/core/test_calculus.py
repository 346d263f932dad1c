"""
Testes unitários para o cálculo básico discreto (projetor e laplacianos).
"""

import numpy as np
import pytest

from foliatrace.config import Config
from foliatrace.core.calculus import (
    BasicGridFunction,
    GridFunction,
    apply_basic_laplacian,
    build_grid,
    commutation_residual,
    convergence_order,
    grid_delta,
    grid_function_from_frame,
    inner_product,
    is_basic,
    legendre_symmetric_matrix,
    project_basic,
    projector_check,
    sample,
    sample_basic,
)
from foliatrace.core.calculus import Grid
from foliatrace.exceptions import DiscretizationError


# Fixtures
@pytest.fixture
def sphere_grid(sphere):
    return build_grid(sphere, (16, 12, 8))


@pytest.fixture
def rng():
    return np.random.default_rng(7)


# Testes
def test_grid_shape_and_weights(sphere_grid):
    """Pesos de Gauss–Legendre somam 2 em z; os periódicos, o período."""
    assert sphere_grid.shape == (16, 12, 8)
    assert sphere_grid.weights.sum() == pytest.approx(4 * np.pi)
    assert sphere_grid.closure_volume == pytest.approx(2 * np.pi)
    assert sphere_grid.transverse_shape == (16,)


def test_grid_too_coarse(sphere):
    with pytest.raises(DiscretizationError) as exc_info:
        build_grid(sphere, (3, 8, 8))
    assert "grosseira" in str(exc_info.value)


def test_grid_wrong_arity(product):
    with pytest.raises(DiscretizationError) as exc_info:
        build_grid(product, (8, 8, 8))
    assert "incompatível" in str(exc_info.value)


def test_projector_idempotent_and_basic(sphere, sphere_grid, rng):
    """P² = P e a imagem de P é básica."""
    f = GridFunction(sphere_grid, rng.standard_normal(sphere_grid.shape))
    pf = project_basic(sphere, sphere_grid, f)
    ppf = project_basic(sphere, sphere_grid, pf.expand())
    assert np.max(np.abs(ppf.values - pf.values)) <= 1e-12
    assert is_basic(sphere, sphere_grid, pf.expand(), 1e-12)
    assert not is_basic(sphere, sphere_grid, f, 1e-3)


def test_projector_self_adjoint(torus, rng):
    grid = build_grid(torus, (8, 8, 6))
    f = GridFunction(grid, rng.standard_normal(grid.shape))
    g = GridFunction(grid, rng.standard_normal(grid.shape))
    lhs = inner_product(grid, project_basic(torus, grid, f), g)
    rhs = inner_product(grid, f, project_basic(torus, grid, g))
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_projector_preserves_positivity(sphere, sphere_grid, rng):
    f = GridFunction(sphere_grid, np.exp(rng.standard_normal(sphere_grid.shape)))
    assert np.all(project_basic(sphere, sphere_grid, f).values > 0)


def test_delta_duality(sphere, sphere_grid):
    """⟨Pδ, φ⟩ = ⟨δ, Pφ⟩ para a delta discreta."""
    delta = grid_delta(sphere_grid, (3, 4, 5))
    phi = sample(sphere_grid, lambda z, theta, s: np.exp(z) * (1 + np.cos(theta)) + s)
    lhs = inner_product(sphere_grid, project_basic(sphere, sphere_grid, delta), phi)
    rhs = inner_product(sphere_grid, delta, project_basic(sphere, sphere_grid, phi))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_misaligned_grid_rejected(sphere):
    """Nós não uniformes em θ tornam a média sobre os fechos inválida."""
    z, wz = np.polynomial.legendre.leggauss(8)
    theta = np.sort(np.random.default_rng(1).uniform(0, 2 * np.pi, 8))
    s = np.arange(8) / 8
    grid = Grid(sphere, [z, theta, s], [wz, np.full(8, 2 * np.pi / 8), np.full(8, 1 / 8)])
    f = GridFunction(grid, np.ones(grid.shape))
    with pytest.raises(DiscretizationError) as exc_info:
        project_basic(sphere, grid, f)
    assert "desalinhada" in str(exc_info.value)


def test_basic_laplacian_legendre_mode(sphere, sphere_grid):
    """Δᴮ P₂(z) = 6 P₂(z) nos nós de Gauss–Legendre."""
    u = sample_basic(sphere_grid, lambda z: 0.5 * (3 * z**2 - 1))
    lap = apply_basic_laplacian(sphere, sphere_grid, u)
    assert np.allclose(lap.values, 6 * u.values, atol=1e-10)


def test_basic_laplacian_torus_fourier(torus):
    grid = build_grid(torus, (16, 8, 8))
    u = sample_basic(grid, lambda psi: np.cos(3 * psi))
    lap = apply_basic_laplacian(torus, grid, u)
    assert np.allclose(lap.values, 9 * u.values, atol=1e-10)


def test_basic_laplacian_product(product):
    """Em X × S², Δᴮ soma o termo de Fourier em x e o de Legendre em z."""
    grid = build_grid(product, (16, 12, 8, 8))
    u = sample_basic(grid, lambda x1, z: np.cos(2 * np.pi * x1) * z)
    lap = apply_basic_laplacian(product, grid, u)
    expected = (4 * np.pi**2 + 2.0) * u.values
    assert np.allclose(lap.values, expected, atol=1e-9)


def test_legendre_matrix_symmetric_with_known_spectrum():
    matrix = legendre_symmetric_matrix(24)
    assert np.allclose(matrix, matrix.T, atol=1e-10)
    eigenvalues = np.sort(np.linalg.eigvalsh(matrix))[:6]
    assert np.allclose(eigenvalues, [k * (k + 1) for k in range(6)], atol=1e-8)


def test_commutation_residual_decreases(sphere):
    """O resíduo ΔᴮPf − PΔf diminui com o refinamento em z."""
    fn = lambda z, theta, s: np.exp(z) * (1 + 0.5 * np.cos(theta) * np.sin(2 * np.pi * s))
    coarse = build_grid(sphere, (32, 8, 8))
    fine = build_grid(sphere, (64, 8, 8))
    r_coarse = commutation_residual(sphere, coarse, sample(coarse, fn))
    r_fine = commutation_residual(sphere, fine, sample(fine, fn))
    assert r_fine < r_coarse


def test_convergence_order_is_second_order(sphere):
    residuals, order = convergence_order(sphere, [64, 128, 256])
    assert len(residuals) == 3
    assert order >= 1.8


def test_grid_function_frame_round_trip(torus, rng):
    grid = build_grid(torus, (4, 4, 4))
    f = GridFunction(grid, rng.standard_normal(grid.shape))
    frame = f.to_frame()
    assert list(frame.columns) == ["psi", "theta", "s", "value"]
    restored = grid_function_from_frame(grid, frame)
    assert np.array_equal(restored.values, f.values)


def test_grid_function_frame_missing_column(torus):
    grid = build_grid(torus, (4, 4, 4))
    frame = GridFunction(grid, np.zeros(grid.shape)).to_frame().drop(columns=["value"])
    with pytest.raises(DiscretizationError) as exc_info:
        grid_function_from_frame(grid, frame)
    assert "Colunas ausentes" in str(exc_info.value)


def test_basic_function_wrong_size(sphere_grid):
    with pytest.raises(DiscretizationError):
        BasicGridFunction(sphere_grid, np.zeros(5))


def test_projector_check_report(torus):
    """A suíte reduzida do projetor passa no toro."""
    config = Config(
        {"kind": "torus"},
        {"projector": {"shape": [16, 8, 8], "samples": 5, "z_ladder": [16, 32]}},
    )
    report = projector_check(torus, config)
    assert report["passed"] is True
    assert report["idempotency_defect"] <= 1e-12
    assert report["grid_shape"] == [16, 8, 8]
    assert len(report["commutation_residuals"]) == 2


def test_grid_minimum_nodes_from_config(torus):
    """MIN_GRID_NODES da configuração limita a malha do projetor."""
    config = Config(
        {"kind": "torus"},
        {"projector": {"shape": [16, 8, 8], "samples": 1, "z_ladder": [16, 32]}},
        custom_constants={"MIN_GRID_NODES": 12},
    )
    with pytest.raises(DiscretizationError) as exc_info:
        projector_check(torus, config)
    assert "mínimo 12" in str(exc_info.value)
    assert build_grid(torus, (16, 12, 12), min_nodes=12).shape == (16, 12, 12)

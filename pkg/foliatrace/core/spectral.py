# foliatrace/core/spectral.py

"""
spectral.py: Espectro Básico do Laplaciano Básico.

Produz a lista {λⱼᴮ} de autovalores de Δᴮ para cada modelo, de forma
analítica (toro: k², esfera: k(k+1), produto: somas) e numérica (matrizes
simétricas montadas sobre as malhas de `calculus` e resolvidas com
`scipy.linalg.eigh`), e reconcilia as duas.

**Convenções de multiplicidade:**
    - `basic`: dimensão do autoespaço de funções básicas (um modo de
      Legendre por k na esfera; par seno/cosseno no círculo).
    - `ambient`: multiplicidade do autovalor no fator esférico completo
      (2k + 1), a contagem que aparece no espectro do laplaciano de S².

**Saídas:**
    - `SpectralData` imutável, exportável como CSV (index, label, lambda,
      sqrt_lambda, multiplicity, convention, provenance).
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg

from foliatrace.core.calculus import legendre_symmetric_matrix
from foliatrace.core.model import ModelKind, SuspensionModel
from foliatrace.exceptions import ConfigurationError, DiscretizationError, ModelError, SolverError

logger = logging.getLogger(__name__)

DEFAULT_CLUSTER_REL_TOL = 1e-6


class Provenance(str, Enum):
    ANALYTIC = "analytic"
    NUMERIC = "numeric"


class MultiplicityConvention(str, Enum):
    BASIC = "basic"
    AMBIENT = "ambient"


@dataclass(frozen=True)
class SpectralEntry:
    lam: float
    multiplicity: int
    label: str


@dataclass(frozen=True)
class SpectralData:
    entries: Tuple[SpectralEntry, ...]
    provenance: Provenance
    model: SuspensionModel
    convention: MultiplicityConvention = MultiplicityConvention.BASIC

    def __post_init__(self):
        lams = [e.lam for e in self.entries]
        if any(lam < 0 for lam in lams):
            raise SolverError("Autovalores negativos no espectro básico.")
        if any(b < a for a, b in zip(lams, lams[1:])):
            raise SolverError("Autovalores fora de ordem crescente.")
        if any(e.multiplicity < 1 for e in self.entries):
            raise SolverError("Multiplicidades devem ser inteiros positivos.")
        if lams and lams[0] != 0.0:
            raise SolverError(f"O modo constante (λ = 0) está ausente; primeiro autovalor {lams[0]}.")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([e.lam for e in self.entries], dtype=float)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([e.multiplicity for e in self.entries], dtype=float)

    @property
    def mu(self) -> np.ndarray:
        return np.sqrt(self.lambdas)

    @property
    def max_mu(self) -> float:
        return float(self.mu[-1]) if self.entries else 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "index": np.arange(len(self.entries)),
                "label": [e.label for e in self.entries],
                "lambda": self.lambdas,
                "sqrt_lambda": self.mu,
                "multiplicity": [e.multiplicity for e in self.entries],
                "convention": self.convention.value,
                "provenance": self.provenance.value,
            }
        )


@dataclass(frozen=True)
class SpectrumComparison:
    errors: Tuple[float, ...]
    max_error: float
    rel_tol: float
    passed: bool
    n_compared: int
    multiplicity_mismatches: Tuple[int, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "errors": list(self.errors),
            "max_error": self.max_error,
            "rel_tol": self.rel_tol,
            "passed": self.passed,
            "n_compared": self.n_compared,
            "multiplicity_mismatches": list(self.multiplicity_mismatches),
        }


def parse_convention(convention: Union[str, MultiplicityConvention]) -> MultiplicityConvention:
    try:
        return MultiplicityConvention(convention)
    except ValueError as e:
        raise ConfigurationError(f"Convenção de multiplicidade inválida: {convention}") from e


def cluster_eigenvalues(
    values: Sequence[float],
    multiplicities: Sequence[int],
    labels: Sequence[str],
    rel_tol: float,
) -> List[SpectralEntry]:
    """Agrupa autovalores próximos (tolerância relativa) somando multiplicidades."""
    order = np.argsort(values, kind="stable")
    entries: List[SpectralEntry] = []
    group_vals, group_mult, group_labels = [], 0, []
    for i in order:
        value = float(values[i])
        if group_vals and abs(value - group_vals[0]) > rel_tol * max(abs(value), 1.0):
            entries.append(SpectralEntry(float(np.mean(group_vals)), group_mult, "|".join(group_labels)))
            group_vals, group_mult, group_labels = [], 0, []
        group_vals.append(value)
        group_mult += int(multiplicities[i])
        group_labels.append(labels[i])
    if group_vals:
        entries.append(SpectralEntry(float(np.mean(group_vals)), group_mult, "|".join(group_labels)))
    return entries


def _flat_modes(model: SuspensionModel, lam_max: float) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """Modos de Fourier do fator plano X com λ_X ≤ lam_max (|m| agrupado com sinais)."""
    ranges = [
        range(int(np.floor(length * np.sqrt(lam_max) / (2.0 * np.pi))) + 1)
        for length in model.factor_lengths
    ]
    lams, mults, labels = [], [], []
    for combo in itertools.product(*ranges):
        lam = sum((2.0 * np.pi * m / length) ** 2 for m, length in zip(combo, model.factor_lengths))
        if lam <= lam_max * (1.0 + 1e-12):
            lams.append(lam)
            mults.append(2 ** sum(1 for m in combo if m != 0))
            labels.append("m=(" + ",".join(f"±{m}" if m else "0" for m in combo) + ")")
    return np.array(lams), np.array(mults), labels


def analytic_spectrum(
    model: SuspensionModel,
    k_max: int,
    convention: Union[str, MultiplicityConvention] = MultiplicityConvention.BASIC,
    rel_tol: float = 1e-12,
) -> SpectralData:
    """Espectro básico em forma fechada até o grau k_max do fator esférico (ou k_max² no toro)."""
    convention = parse_convention(convention)
    if int(k_max) != k_max or k_max < 0:
        raise ConfigurationError(f"k_max deve ser um inteiro não negativo: {k_max}")
    k = np.arange(int(k_max) + 1)
    if model.kind is ModelKind.TORUS:
        # O par cos/sen em ψ é um autoespaço básico de dimensão 2 nas duas convenções.
        entries = [
            SpectralEntry(float(kk * kk), 1 if kk == 0 else 2, f"k=±{kk}" if kk else "k=0") for kk in k
        ]
        return SpectralData(tuple(entries), Provenance.ANALYTIC, model, convention)

    sphere_lam = (k * (k + 1)).astype(float)
    sphere_mult = 2 * k + 1 if convention is MultiplicityConvention.AMBIENT else np.ones_like(k)
    if model.kind is ModelKind.SPHERE:
        entries = [SpectralEntry(float(l), int(m), f"k={kk}") for kk, l, m in zip(k, sphere_lam, sphere_mult)]
        return SpectralData(tuple(entries), Provenance.ANALYTIC, model, convention)

    if model.kind is ModelKind.PRODUCT:
        lam_max = float(k_max * (k_max + 1))
        x_lams, x_mults, x_labels = _flat_modes(model, lam_max)
        values, mults, labels = [], [], []
        for x_lam, x_mult, x_label in zip(x_lams, x_mults, x_labels):
            keep = sphere_lam + x_lam <= lam_max * (1.0 + 1e-12)
            for kk in k[keep]:
                values.append(x_lam + sphere_lam[kk])
                mults.append(int(x_mult * sphere_mult[kk]))
                labels.append(f"k={kk};{x_label}")
        entries = cluster_eigenvalues(values, mults, labels, rel_tol)
        entries[0] = SpectralEntry(0.0, entries[0].multiplicity, entries[0].label)
        return SpectralData(tuple(entries), Provenance.ANALYTIC, model, convention)

    raise ModelError(f"Tipo de modelo não suportado: {model.kind}")


def fourier_symmetric_matrix(n: int, period: float) -> np.ndarray:
    """Matriz circulante simétrica de −d²/dx² espectral em n nós periódicos."""
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=period / n)
    column = np.fft.ifft(k * k).real
    return linalg.circulant(column)


def assembled_operator(model: SuspensionModel, grid_size: int) -> np.ndarray:
    """Matriz simétrica (ponderada pelo volume) de Δᴮ na malha transversal."""
    factors = [fourier_symmetric_matrix(grid_size, model.period(name)) for name in model.x_names]
    if model.kind is ModelKind.TORUS:
        return fourier_symmetric_matrix(grid_size, model.period("psi"))
    factors.append(legendre_symmetric_matrix(grid_size))
    if len(factors) == 1:
        return factors[0]
    total = np.zeros((grid_size ** len(factors),) * 2)
    for i, factor in enumerate(factors):
        term = np.ones((1, 1))
        for j in range(len(factors)):
            term = np.kron(term, factor if i == j else np.eye(grid_size))
        total += term
    return total


def _smallest_eigenvalues(matrix: np.ndarray, count: int) -> np.ndarray:
    try:
        values = linalg.eigh(matrix, eigvals_only=True, subset_by_index=[0, count - 1])
    except (linalg.LinAlgError, ValueError) as e:
        logger.error(f"Falha no resolvedor de autovalores: {e}", exc_info=True)
        raise SolverError(f"Erro em 'eigh': {e}") from e
    scale = max(float(np.max(np.abs(np.diag(matrix)))), 1.0)
    if np.any(values < -1e-9 * scale):
        raise SolverError(f"Discretização indefinida: menor autovalor {values[0]:.3e}.")
    return np.clip(values, 0.0, None)


def numeric_spectrum(
    model: SuspensionModel,
    n_modes: int,
    grid_size: int,
    rel_tol: float = DEFAULT_CLUSTER_REL_TOL,
) -> SpectralData:
    """Autovalores da discretização simétrica de Δᴮ, com multiplicidades da convenção básica."""
    if n_modes < 1:
        raise ConfigurationError(f"n_modes deve ser positivo: {n_modes}")
    if grid_size < 4 * n_modes:
        raise DiscretizationError(
            f"Malha de {grid_size} nós insuficiente para {n_modes} modos (mínimo {4 * n_modes})."
        )
    logger.info(f"Calculando {n_modes} modos numéricos de Δᴮ ({model.kind.value}, N={grid_size}).")

    factors = []
    for name in model.transverse_coords:
        if name == "z":
            matrix = legendre_symmetric_matrix(grid_size)
        else:
            matrix = fourier_symmetric_matrix(grid_size, model.period(name))
        factors.append(_smallest_eigenvalues(matrix, n_modes))

    # O espectro de uma soma de Kronecker é a soma dos espectros dos fatores.
    sums = factors[0]
    for values in factors[1:]:
        sums = np.add.outer(sums, values).ravel()
    values = np.sort(sums, kind="stable")[:n_modes]
    values[0] = 0.0 if abs(values[0]) <= 1e-9 else values[0]
    labels = [f"j={j}" for j in range(len(values))]
    entries = cluster_eigenvalues(values, np.ones(len(values), dtype=int), labels, rel_tol)
    return SpectralData(tuple(entries), Provenance.NUMERIC, model, MultiplicityConvention.BASIC)


def spectrum_compare(a: SpectralData, b: SpectralData, rel_tol: float) -> SpectrumComparison:
    """Erros relativos modo a modo entre dois espectros do mesmo modelo e convenção."""
    if a.convention is not b.convention:
        raise ConfigurationError(
            f"Convenções diferentes: {a.convention.value} x {b.convention.value}"
        )
    if a.model != b.model:
        raise ConfigurationError("Espectros de modelos diferentes não são comparáveis.")
    n = min(len(a), len(b))
    la, lb = a.lambdas[:n], b.lambdas[:n]
    errors = np.abs(la - lb) / np.maximum(np.abs(lb), 1.0)
    mismatches = tuple(
        i for i in range(n) if a.entries[i].multiplicity != b.entries[i].multiplicity
    )
    max_error = float(errors.max()) if n else 0.0
    comparison = SpectrumComparison(
        errors=tuple(float(e) for e in errors),
        max_error=max_error,
        rel_tol=rel_tol,
        passed=bool(n > 0 and max_error <= rel_tol),
        n_compared=n,
        multiplicity_mismatches=mismatches,
    )
    logger.info(f"Comparação de espectros: {n} modos, erro máximo {max_error:.3e}.")
    if mismatches:
        logger.warning(f"Multiplicidades divergentes nos índices {list(mismatches)}.")
    return comparison

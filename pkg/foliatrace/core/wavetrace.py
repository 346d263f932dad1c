# foliatrace/core/wavetrace.py

"""
wavetrace.py: Traço de Onda Básico e Detecção de Singularidades.

Avalia o traço janelado W_Λ(t) = Σⱼ mⱼ w(μⱼ/Λ) e^{-itμⱼ}, μⱼ = √λⱼᴮ, localiza
os picos que persistem e crescem ao longo de uma escada de cortes Λ, ajusta o
expoente de crescimento |W_Λ(T̂)| ∝ Λᵃ e compara os tempos detectados com o
catálogo de tempos de permanência.

**Janelas:**
    - `gaussian`: w(x) = e^{-x²} (padrão).
    - `cosine`: 1 em [0, 1], rampa C^∞ de 1 a 0 em [1, 2] (meia altura em 1.5), 0 depois.

**Critérios de detecção (todos configuráveis):**
    - Altura mínima: max(PEAK_FACTOR × mediana de |W_Λ|, PEAK_FLOOR_REL × W_Λ(0)).
    - Persistência: em cada Λ da escada, o pico fica a menos de
      max(passo em t, DRIFT_RESOLUTION × π/Λ) da localização no maior Λ.
    - Crescimento: expoente ajustado ≥ MIN_GROWTH_EXPONENT.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import signal, stats

from foliatrace.core.sojourn import SojournCatalog, smooth_step
from foliatrace.core.spectral import SpectralData
from foliatrace.exceptions import ConfigurationError, ResolutionError

logger = logging.getLogger(__name__)

_MAX_BLOCK = 4_000_000


class WindowShape(str, Enum):
    GAUSSIAN = "gaussian"
    COSINE = "cosine"


@dataclass(frozen=True)
class FrequencyWindow:
    shape: WindowShape
    cutoff: float

    def __post_init__(self):
        if not self.cutoff > 0:
            raise ConfigurationError(f"O corte Λ deve ser positivo: {self.cutoff}")
        object.__setattr__(self, "shape", parse_window(self.shape))

    def __call__(self, mu) -> np.ndarray:
        x = np.asarray(mu, dtype=float) / self.cutoff
        if self.shape is WindowShape.GAUSSIAN:
            return np.exp(-x * x)
        taper = 1.0 - smooth_step(x - 1.0)
        return np.where(x <= 1.0, 1.0, np.where(x <= 2.0, taper, 0.0))


def parse_window(shape: Union[str, WindowShape]) -> WindowShape:
    try:
        return WindowShape(shape)
    except ValueError as e:
        raise ConfigurationError(f"Janela inválida: {shape}. Use 'gaussian' ou 'cosine'.") from e


@dataclass(frozen=True)
class SpectralHistogram:
    edges: np.ndarray
    counts: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"mu_lo": self.edges[:-1], "mu_hi": self.edges[1:], "count": self.counts})


def spectral_distribution(spectrum: SpectralData, bin_width: float, mu_max: Optional[float] = None) -> SpectralHistogram:
    """Medida de contagem de {√λⱼᴮ} com multiplicidades, agrupada em caixas."""
    if not bin_width > 0:
        raise ConfigurationError(f"Largura de caixa deve ser positiva: {bin_width}")
    top = mu_max if mu_max is not None else max(spectrum.max_mu, bin_width)
    edges = np.arange(0.0, top + bin_width, bin_width)
    if len(spectrum) == 0:
        return SpectralHistogram(edges, np.zeros(edges.size - 1))
    counts, _ = np.histogram(spectrum.mu, bins=edges, weights=spectrum.multiplicities)
    return SpectralHistogram(edges, counts)


@dataclass(frozen=True, eq=False)
class TraceSeries:
    t: np.ndarray
    values: np.ndarray
    window: FrequencyWindow
    convention: str
    spectrum: Optional[SpectralData] = field(default=None, repr=False)

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def t_step(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": self.t,
                "re": self.values.real,
                "im": self.values.imag,
                "abs": self.abs,
                "lambda_cutoff": self.window.cutoff,
            }
        )


def _check_uniform(t: np.ndarray):
    if t.ndim != 1 or t.size == 0:
        raise ConfigurationError("A malha de tempos deve ser um vetor não vazio.")
    if t.size > 2:
        steps = np.diff(t)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ConfigurationError("A malha de tempos deve ser uniforme.")


def evaluate_trace(
    spectrum: SpectralData,
    window: FrequencyWindow,
    t_grid,
    chunk: int = 512,
    threads: int = 1,
) -> TraceSeries:
    """Soma janelada em todos os tempos; ordem de soma fixa (μ crescente)."""
    if len(spectrum) == 0:
        raise ConfigurationError("Espectro vazio: não há traço a avaliar.")
    t = np.asarray(t_grid, dtype=float)
    _check_uniform(t)
    if window.cutoff > spectrum.max_mu:
        logger.warning(
            f"Corte Λ = {window.cutoff} acima do maior μ = {spectrum.max_mu:.3f}: janela não resolvida."
        )
    mu = spectrum.mu
    amplitude = spectrum.multiplicities * window(mu)
    rows = max(1, min(int(chunk), _MAX_BLOCK // max(mu.size, 1)))
    blocks = [t[i : i + rows] for i in range(0, t.size, rows)]

    def block_sum(tb: np.ndarray) -> np.ndarray:
        return (np.exp(-1j * np.outer(tb, mu)) * amplitude).sum(axis=1)

    with ThreadPoolExecutor(max_workers=max(int(threads), 1)) as executor:
        values = np.concatenate(list(executor.map(block_sum, blocks)))
    return TraceSeries(t=t, values=values, window=window, convention=spectrum.convention.value, spectrum=spectrum)


def trace_at_zero(spectrum: SpectralData, window: FrequencyWindow) -> float:
    """W_Λ(0) = Σ mⱼ w(μⱼ/Λ)."""
    return float(np.sum(spectrum.multiplicities * window(spectrum.mu)))


def cutoff_partial_trace(series: TraceSeries, t_window: Callable[[np.ndarray], np.ndarray]) -> TraceSeries:
    """Produto pontual χ(t)·W_Λ(t)."""
    chi = np.asarray(t_window(series.t), dtype=float)
    if chi.shape != series.t.shape:
        chi = np.broadcast_to(chi, series.t.shape)
    if np.any(chi < -1e-12) or np.any(chi > 1.0 + 1e-12):
        raise ConfigurationError("A função de corte χ deve assumir valores em [0, 1].")
    return replace(series, values=series.values * chi)


def growth_ratio(spectrum: SpectralData, window_shape: Union[str, WindowShape], t: float, cutoff: float) -> float:
    """|W_{2Λ}(t)| / |W_Λ(t)|: discriminador entre pontos singulares e suaves."""
    shape = parse_window(window_shape)
    low = evaluate_trace(spectrum, FrequencyWindow(shape, cutoff), [t]).abs[0]
    high = evaluate_trace(spectrum, FrequencyWindow(shape, 2.0 * cutoff), [t]).abs[0]
    return float(high / low) if low > 0 else float("inf")


def _refine_peak(t: np.ndarray, y: np.ndarray, i: int) -> float:
    """Vértice da parábola pelos três pontos em torno do máximo amostrado."""
    if i <= 0 or i >= y.size - 1:
        return float(t[i])
    denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
    if denom >= 0:
        return float(t[i])
    offset = 0.5 * (y[i - 1] - y[i + 1]) / denom
    return float(t[i] + np.clip(offset, -0.5, 0.5) * (t[1] - t[0]))


@dataclass(frozen=True)
class DetectedSingularity:
    T: float
    amplitudes: Tuple[float, ...]
    locations: Tuple[float, ...]
    exponent: float
    exponent_ci: Tuple[float, float]
    drift: float
    matched_T: Optional[float] = None
    classification: Optional[str] = None
    expected_exponent: Optional[float] = None

    def to_dict(self, ladder: Sequence[float]) -> dict:
        return {
            "T": self.T,
            "amplitudes": {f"{lam:g}": amp for lam, amp in zip(ladder, self.amplitudes)},
            "locations": list(self.locations),
            "exponent": self.exponent,
            "exponent_ci": list(self.exponent_ci),
            "drift": self.drift,
            "matched_T": self.matched_T,
            "classification": self.classification,
            "expected_exponent": self.expected_exponent,
        }


@dataclass(frozen=True)
class SingularityReport:
    detected: Tuple[DetectedSingularity, ...]
    lambda_ladder: Tuple[float, ...]
    window: WindowShape
    convention: str
    t_range: Tuple[float, float]
    t_step: float
    rejected: int = 0
    cutoff_applied: bool = False

    @property
    def times(self) -> List[float]:
        return [d.T for d in self.detected]

    def with_matches(self, catalog: SojournCatalog, tol_t: float) -> "SingularityReport":
        """Associa cada tempo detectado ao tempo de catálogo mais próximo (se a menos de tol_t)."""
        matched = []
        for d in self.detected:
            entry = catalog.nearest(d.T)
            if entry is None or abs(entry.T - d.T) > tol_t:
                matched.append(replace(d, matched_T=None, classification=None, expected_exponent=None))
                continue
            expected = None
            if entry.e_T_estimate is not None:
                leaf = catalog.model.leaf_dim
                closure = min(label.closure_dim for label in entry.witness.touched_strata)
                expected = -(entry.e_T_estimate - 1) / 2.0 + (leaf + (closure - leaf)) / 2.0
                logger.info(
                    f"Diagnóstico de expoente em T = {d.T:.4f}: ajustado {d.exponent:.3f}, "
                    f"fórmula com e_T = {entry.e_T_estimate}: {expected:.3f} (apenas diagnóstico)."
                )
            matched.append(replace(d, matched_T=entry.T, classification=entry.classification.value, expected_exponent=expected))
        return replace(self, detected=tuple(matched))

    def to_dict(self) -> dict:
        return {
            "lambda_ladder": list(self.lambda_ladder),
            "window": self.window.value,
            "convention": self.convention,
            "t_range": list(self.t_range),
            "t_step": self.t_step,
            "rejected": self.rejected,
            "cutoff_applied": self.cutoff_applied,
            "singularities": [d.to_dict(self.lambda_ladder) for d in self.detected],
        }


def _fit_exponent(ladder: Sequence[float], amplitudes: Sequence[float], confidence: float) -> Tuple[float, Tuple[float, float]]:
    """Mínimos quadrados de log|pico| contra log Λ com intervalo t de Student."""
    fit = stats.linregress(np.log(ladder), np.log(amplitudes))
    dof = len(ladder) - 2
    half = float(stats.t.ppf(0.5 + confidence / 2.0, dof) * fit.stderr) if dof > 0 else float("inf")
    return float(fit.slope), (float(fit.slope - half), float(fit.slope + half))


def detect_singularities(
    spectrum: SpectralData,
    window_shape: Union[str, WindowShape],
    lambda_ladder: Sequence[float],
    t_range: Tuple[float, float],
    t_step: float = 0.01,
    peak_factor: float = 5.0,
    peak_floor_rel: float = 1e-3,
    resolve_factor: float = 2.0,
    min_growth_exponent: float = 0.3,
    confidence: float = 0.95,
    drift_resolution: float = 0.5,
    cutoff: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    chunk: int = 512,
    threads: int = 1,
) -> SingularityReport:
    """Picos de |W_Λ| que persistem e crescem ao longo da escada de cortes."""
    shape = parse_window(window_shape)
    ladder = tuple(float(v) for v in lambda_ladder)
    if len(ladder) < 3 or any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigurationError(f"A escada de Λ deve ser estritamente crescente com ≥ 3 valores: {list(ladder)}")
    t_min, t_max = float(t_range[0]), float(t_range[1])
    if not 0 < t_min < t_max:
        raise ConfigurationError(f"Intervalo de tempos inválido (t = 0 deve ser excluído): {t_range}")
    if not t_step > 0:
        raise ConfigurationError(f"Passo em t deve ser positivo: {t_step}")
    if spectrum.max_mu < resolve_factor * ladder[-1]:
        raise ResolutionError(
            f"Espectro até μ = {spectrum.max_mu:.3f} não resolve Λ = {ladder[-1]} "
            f"(exigido μ ≥ {resolve_factor * ladder[-1]:.3f})."
        )

    t = t_min + t_step * np.arange(int(np.floor((t_max - t_min) / t_step + 1e-9)) + 1)
    peaks_per_level: List[Tuple[np.ndarray, np.ndarray, np.ndarray]] = []
    for lam in ladder:
        window = FrequencyWindow(shape, lam)
        series = evaluate_trace(spectrum, window, t, chunk=chunk, threads=threads)
        if cutoff is not None:
            series = cutoff_partial_trace(series, cutoff)
        level = series.abs
        height = max(peak_factor * float(np.median(level)), peak_floor_rel * trace_at_zero(spectrum, window))
        index, _ = signal.find_peaks(level, height=height)
        locations = np.array([_refine_peak(t, level, i) for i in index])
        peaks_per_level.append((index, locations, level))
        logger.debug(f"Λ = {lam:g}: {index.size} picos acima de {height:.4g}.")

    top_index, top_locations, top_level = peaks_per_level[-1]
    detected: List[DetectedSingularity] = []
    rejected = 0
    for i, location in zip(top_index, top_locations):
        amplitudes, locations = [], []
        for lam, (index, locs, level) in zip(ladder, peaks_per_level):
            if locs.size == 0:
                break
            # Uma janela de corte Λ só resolve t até ~π/Λ.
            k = int(np.argmin(np.abs(locs - location)))
            if abs(locs[k] - location) > max(5.0 * t_step, np.pi / lam):
                break
            amplitudes.append(float(level[index[k]]))
            locations.append(float(locs[k]))
        if len(amplitudes) != len(ladder):
            rejected += 1
            logger.debug(f"Pico em t = {location:.4f} rejeitado (não persiste em toda a escada).")
            continue
        offsets = [abs(loc - location) for loc in locations]
        drift = float(max(offsets))
        steady = all(
            offset <= max(t_step, drift_resolution * np.pi / lam) + 1e-12 for offset, lam in zip(offsets, ladder)
        )
        exponent, ci = _fit_exponent(ladder, amplitudes, confidence)
        if not steady or not np.isfinite(exponent) or exponent < min_growth_exponent:
            rejected += 1
            logger.debug(f"Pico em t = {location:.4f} rejeitado (deriva {drift:.4f}, expoente {exponent:.3f}).")
            continue
        detected.append(
            DetectedSingularity(
                T=float(location),
                amplitudes=tuple(amplitudes),
                locations=tuple(locations),
                exponent=exponent,
                exponent_ci=ci,
                drift=drift,
            )
        )
    logger.info(
        f"Singularidades detectadas ({shape.value}, {spectrum.convention.value}): "
        f"{[round(d.T, 4) for d in detected]}; {rejected} pico(s) rejeitado(s)."
    )
    return SingularityReport(
        detected=tuple(detected),
        lambda_ladder=ladder,
        window=shape,
        convention=spectrum.convention.value,
        t_range=(t_min, t_max),
        t_step=float(t_step),
        rejected=rejected,
        cutoff_applied=cutoff is not None,
    )


@dataclass(frozen=True)
class Verdict:
    passed: bool
    matched: Tuple[Tuple[float, float], ...]
    unmatched: Tuple[float, ...]
    catalog_times_detected: Tuple[float, ...]
    catalog_times_silent: Tuple[float, ...]
    tol_T: float
    require_complete: bool = False

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "passed": self.passed,
            "matched": [{"detected_T": a, "catalog_T": b} for a, b in self.matched],
            "unmatched": list(self.unmatched),
            "catalog_times_detected": list(self.catalog_times_detected),
            "catalog_times_silent": list(self.catalog_times_silent),
            "tol_T": self.tol_T,
            "require_complete": self.require_complete,
        }


def verify_poisson(
    catalog: SojournCatalog,
    report: SingularityReport,
    tol_T: float,
    require_complete: bool = False,
) -> Verdict:
    """
    PASS se todo tempo singular detectado está a menos de tol_T de um tempo do catálogo.

    Com `require_complete`, todo tempo do catálogo dentro do intervalo varrido
    também precisa ter sido detectado (traço parcial com corte).
    """
    if not tol_T > 0:
        raise ConfigurationError(f"tol_T deve ser positivo: {tol_T}")
    matched, unmatched = [], []
    for T in report.times:
        entry = catalog.nearest(T)
        if entry is not None and abs(entry.T - T) <= tol_T:
            matched.append((T, entry.T))
        else:
            unmatched.append(T)
    lo, hi = report.t_range
    in_range = [T for T in catalog.times if lo - tol_T <= T <= hi + tol_T]
    detected = tuple(T for T in in_range if any(abs(T - d) <= tol_T for d in report.times))
    silent = tuple(T for T in in_range if T not in detected)
    verdict = Verdict(
        passed=not unmatched and not (require_complete and silent),
        matched=tuple(matched),
        unmatched=tuple(unmatched),
        catalog_times_detected=detected,
        catalog_times_silent=silent,
        tol_T=tol_T,
        require_complete=require_complete,
    )
    if unmatched:
        logger.warning(f"Singularidades sem tempo de permanência correspondente: {unmatched}")
    if require_complete and silent:
        logger.warning(f"Tempos do catálogo sem singularidade detectada: {list(silent)}")
    logger.info(f"Verificação da relação de Poisson: {verdict.status} ({len(matched)} casadas).")
    return verdict

# foliatrace/core/sojourn.py

"""
sojourn.py: Arcos Relativamente Fechados e Tempos de Permanência.

**Entradas:**
    - Um modelo de suspensão, o horizonte t_max, a tolerância de casamento e
      o orçamento de sementes.

**Processos:**
    1. Varredura determinística de sementes: direções dos eixos, direções
       ressonantes (períodos fechados do fator plano combinados com o
       meridiano de comprimento 2π) e um reticulado uniforme de direções
       conormais, sobre pontos-base estratificados (polos primeiro).
    2. Para cada semente, integração do fluxo e varredura do resíduo de
       casamento R(t); mínimos locais candidatos são localizados por
       `brentq` na derivada de R² (ou `minimize_scalar`).
    3. Aceitação: R(T) ≤ tol e extremidade conormal ao fecho.
    4. Catálogo: tempos fundidos dentro de MERGE_FACTOR·tol, classificação
       por prioridade Regular > Minimal > Singular.

**Saídas:**
    - `SojournCatalog` (CSV e JSON) e a função de corte χ de
      `sojourn_cutoff`.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import optimize
from tqdm import tqdm

from foliatrace.core.flow import (
    POLE_RULE,
    REGULAR_RULE,
    ConormalCondition,
    CotangentPoint,
    GeodesicArc,
    HamiltonianFlow,
    cotangent_speed,
    embedded_invariants,
    pole_distance,
    unit_conormal_seed,
)
from foliatrace.core.model import TWO_PI, ModelKind, ModelPoint, SuspensionModel, validate_point
from foliatrace.exceptions import ConfigurationError, IntegrationError, NumericalError

logger = logging.getLogger(__name__)


class SojournClass(str, Enum):
    REGULAR = "Regular"
    MINIMAL = "Minimal"
    SINGULAR = "Singular"


_PRIORITY = (SojournClass.REGULAR, SojournClass.MINIMAL, SojournClass.SINGULAR)


@dataclass(frozen=True)
class SojournEntry:
    T: float
    classification: SojournClass
    witness: GeodesicArc
    witness_classes: Tuple[SojournClass, ...]
    residual: float
    e_T_estimate: Optional[int] = None
    relies_on_closure: bool = False


@dataclass(frozen=True)
class SojournCatalog:
    entries: Tuple[SojournEntry, ...]
    t_max: float
    tol: float
    model: SuspensionModel

    def __post_init__(self):
        times = [e.T for e in self.entries]
        if any(b < a for a, b in zip(times, times[1:])):
            raise NumericalError("Entradas do catálogo fora de ordem.")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def times(self) -> List[float]:
        return [e.T for e in self.entries]

    @property
    def regular_times(self) -> List[float]:
        return [e.T for e in self.entries if e.classification is SojournClass.REGULAR]

    @property
    def singular_times(self) -> List[float]:
        """Tempos cujo arco testemunha toca um estrato singular (inclui os mínimos)."""
        return [e.T for e in self.entries if e.classification is not SojournClass.REGULAR]

    @property
    def minimal_times(self) -> List[float]:
        return [e.T for e in self.entries if e.classification is SojournClass.MINIMAL]

    def restricted(self, classes: Iterable[SojournClass]) -> "SojournCatalog":
        keep = set(SojournClass(c) for c in classes)
        entries = tuple(e for e in self.entries if e.classification in keep)
        return SojournCatalog(entries, self.t_max, self.tol, self.model)

    def without_times(self, times: Sequence[float], tol: float) -> "SojournCatalog":
        entries = tuple(e for e in self.entries if all(abs(e.T - t) > tol for t in times))
        return SojournCatalog(entries, self.t_max, self.tol, self.model)

    def nearest(self, t: float) -> Optional[SojournEntry]:
        if not self.entries:
            return None
        return min(self.entries, key=lambda e: abs(e.T - t))

    def _entry_record(self, entry: SojournEntry) -> dict:
        start = entry.witness.start
        record = {
            "T": entry.T,
            "classification": entry.classification.value,
            "e_T_estimate": entry.e_T_estimate,
            "residual": entry.residual,
            "relies_on_closure": entry.relies_on_closure,
            "witness_classes": "|".join(c.value for c in entry.witness_classes),
            "start_chart": start.chart,
        }
        for name, value in zip(self.model.coord_names, start.base.coords):
            record[f"start_{name}"] = value
        for i, value in enumerate(start.covector):
            record[f"xi_{i}"] = value
        return record

    def to_frame(self) -> pd.DataFrame:
        columns = ["T", "classification", "e_T_estimate", "residual", "relies_on_closure", "witness_classes", "start_chart"]
        columns += [f"start_{name}" for name in self.model.coord_names]
        columns += [f"xi_{i}" for i in range(len(self.model.coord_names))]
        return pd.DataFrame([self._entry_record(e) for e in self.entries], columns=columns)

    def to_dict(self) -> dict:
        entries = []
        for entry in self.entries:
            record = self._entry_record(entry)
            record["witness_classes"] = [c.value for c in entry.witness_classes]
            record["energy_drift"] = entry.witness.energy_drift
            record["touched_strata"] = sorted(label.name for label in entry.witness.touched_strata)
            record["rule"] = entry.witness.rule
            entries.append(record)
        return {
            "model": self.model.to_dict(),
            "t_max": self.t_max,
            "tol": self.tol,
            "entries": entries,
        }


# --- Sementes ---


def base_points(model: SuspensionModel, count: int = 3) -> List[ModelPoint]:
    """Pontos-base estratificados: polos primeiro, depois níveis z (ou ψ) regulares."""
    if model.kind is ModelKind.TORUS:
        return [validate_point(model, (TWO_PI * i / count, 0.0, 0.0)) for i in range(count)]
    x0 = (0.0,) * model.x_dim
    points = [validate_point(model, x0 + (1.0, 0.0, 0.0)), validate_point(model, x0 + (-1.0, 0.0, 0.0))]
    levels = sorted(np.linspace(-0.5, 0.5, count), key=lambda z: (abs(z), -z))
    points += [validate_point(model, x0 + (float(z), 0.0, 0.0)) for z in levels]
    return points


def axis_directions(model: SuspensionModel) -> List[np.ndarray]:
    return [row for row in np.eye(len(model.transverse_coords))]


def _transverse_periods(model: SuspensionModel) -> Tuple[float, ...]:
    """Comprimentos das geodésicas fechadas básicas de cada eixo transversal."""
    if model.kind is ModelKind.TORUS:
        return (TWO_PI,)
    return model.factor_lengths + (TWO_PI,)


def _is_primitive(vector: Sequence[int]) -> bool:
    g = 0
    for v in vector:
        g = math.gcd(g, abs(int(v)))
    return g == 1


def resonant_directions(model: SuspensionModel, t_max: float) -> List[np.ndarray]:
    """Direções (mᵢLᵢ, 2πn)/T das geodésicas fechadas de comprimento T ≤ t_max, por T crescente."""
    periods = _transverse_periods(model)
    ranges = [range(int(math.floor(t_max / p)) + 1) for p in periods]
    found = []
    for combo in itertools.product(*ranges):
        if not any(combo) or not _is_primitive(combo):
            continue
        vector = np.array([m * p for m, p in zip(combo, periods)], dtype=float)
        length = float(np.linalg.norm(vector))
        if length <= t_max:
            found.append((length, combo, vector / length))
    found.sort(key=lambda item: (item[0], item[1]))
    return [v for _, _, v in found]


def lattice_directions(model: SuspensionModel, radius: int = 2) -> List[np.ndarray]:
    """Vetores inteiros primitivos em [-radius, radius]^k, normalizados."""
    k = len(model.transverse_coords)
    found = []
    for combo in itertools.product(range(-radius, radius + 1), repeat=k):
        if any(combo) and _is_primitive(combo):
            v = np.array(combo, dtype=float)
            found.append(v / np.linalg.norm(v))
    return found


def sweep_seeds(
    model: SuspensionModel,
    seed_budget: int,
    t_max: float,
    direction_lattice: int = 2,
    base_lattice: int = 3,
    pole_enter_eps: float = 1e-3,
) -> List[CotangentPoint]:
    """Sementes determinísticas: eixos, depois ressonantes, depois o reticulado, até o orçamento."""
    if seed_budget < 1:
        raise ConfigurationError(f"seed_budget deve ser ≥ 1: {seed_budget}")
    bases = base_points(model, base_lattice)
    phases = (
        axis_directions(model),
        resonant_directions(model, t_max),
        lattice_directions(model, direction_lattice),
    )
    seen = set()
    seeds: List[CotangentPoint] = []
    for directions in phases:
        for base in bases:
            for v in directions:
                key = (base.coords, tuple(np.round(v, 12)))
                if key in seen:
                    continue
                seen.add(key)
                seeds.append(unit_conormal_seed(model, base, v, pole_enter_eps))
                if len(seeds) >= seed_budget:
                    return seeds
    return seeds


# --- Busca ---


def smooth_step(x) -> np.ndarray:
    """Degrau C^∞: 0 para x ≤ 0, 1 para x ≥ 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)

    def bump(u):
        positive = u > 0
        return np.where(positive, np.exp(-1.0 / np.where(positive, u, 1.0)), 0.0)

    a, b = bump(x), bump(1.0 - x)
    return a / (a + b)


class SojournSearch:
    """Busca de arcos relativamente fechados e montagem do catálogo."""

    def __init__(
        self,
        model: SuspensionModel,
        flow: Optional[HamiltonianFlow] = None,
        tol: float = 1e-6,
        scan_step: float = 0.01,
        scan_min_time: float = 0.05,
        candidate_residual: float = 0.1,
        merge_factor: float = 10.0,
        rank_step: float = 1e-5,
        rank_ratio: float = 1e-2,
        direction_lattice: int = 2,
        base_lattice: int = 3,
        threads: int = 1,
        show_progress: bool = False,
    ):
        if tol <= 0:
            raise ConfigurationError(f"Tolerância de casamento deve ser positiva: {tol}")
        self.model = model
        self.flow = flow or HamiltonianFlow(model, sample_step=scan_step)
        self.tol = tol
        self.scan_step = scan_step
        self.scan_min_time = scan_min_time
        self.candidate_residual = candidate_residual
        self.merge_factor = merge_factor
        self.rank_step = rank_step
        self.rank_ratio = rank_ratio
        self.direction_lattice = direction_lattice
        self.base_lattice = base_lattice
        self.threads = max(int(threads), 1)
        self.show_progress = show_progress
        logger.debug("SojournSearch inicializado.")

    @classmethod
    def from_config(cls, model: SuspensionModel, config, tol: Optional[float] = None) -> "SojournSearch":
        return cls(
            model,
            flow=HamiltonianFlow.from_config(model, config),
            tol=tol if tol is not None else config.TOL,
            scan_step=config.SCAN_STEP,
            scan_min_time=config.SCAN_MIN_TIME,
            candidate_residual=config.CANDIDATE_RESIDUAL,
            merge_factor=config.MERGE_FACTOR,
            rank_step=config.RANK_STEP,
            rank_ratio=config.RANK_RATIO,
            direction_lattice=config.DIRECTION_LATTICE,
            base_lattice=config.BASE_LATTICE,
            threads=config.THREADS,
            show_progress=config.SHOW_PROGRESS,
        )

    def rule_for(self, seed: CotangentPoint) -> str:
        if not self.model.has_poles:
            return REGULAR_RULE
        distance = float(pole_distance(self.model, seed.chart, seed.state(self.model)))
        return POLE_RULE if distance <= self.tol else REGULAR_RULE

    def end_condition(self, end: CotangentPoint, rule: str) -> ConormalCondition:
        swept = frozenset({"s"}) if rule == POLE_RULE else frozenset({"theta", "s"})
        return ConormalCondition(self.model, end.base, swept, self.tol)

    def _locate(self, r2: Callable[[float], float], lo: float, hi: float) -> float:
        """Mínimo de R² em [lo, hi]: raiz da derivada centrada, senão minimização limitada."""
        h = min(1e-6, (hi - lo) / 4.0)

        def slope(t):
            return (r2(t + h) - r2(t - h)) / (2.0 * h)

        if slope(lo) < 0.0 < slope(hi):
            try:
                return float(optimize.brentq(slope, lo, hi, xtol=1e-14))
            except ValueError:
                logger.debug(f"brentq sem mudança de sinal em [{lo:.4f}, {hi:.4f}]; usando minimize_scalar.")
        found = optimize.minimize_scalar(r2, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        return float(found.x)

    def closed_arcs(self, seed: CotangentPoint, t_max: float) -> List[GeodesicArc]:
        """Arcos relativamente fechados (T ≤ t_max) a partir de uma semente."""
        if not t_max > 0:
            raise ConfigurationError(f"t_max deve ser positivo: {t_max}")
        rule = self.rule_for(seed)
        horizon = t_max + 2.0 * self.scan_step
        trajectory = self.flow.integrate(seed, horizon)
        reference = embedded_invariants(self.model, seed.chart, seed.state(self.model), rule)

        def r2(t: float) -> float:
            diff = trajectory.invariants([t], rule)[:, 0] - reference
            return float(np.dot(diff, diff))

        ts = np.arange(self.scan_min_time, horizon + 1e-12, self.scan_step)
        values = np.sum((trajectory.invariants(ts, rule) - reference[:, None]) ** 2, axis=0)
        interior = np.arange(1, ts.size - 1)
        candidates = interior[
            (values[interior] <= values[interior - 1])
            & (values[interior] <= values[interior + 1])
            & (values[interior] < self.candidate_residual ** 2)
        ]

        arcs: List[GeodesicArc] = []
        for i in candidates:
            T = self._locate(r2, ts[i - 1], ts[i + 1])
            residual = math.sqrt(max(r2(T), 0.0))
            if T > t_max + self.tol or residual > self.tol:
                continue
            end = trajectory.point_at(T)
            if not self.end_condition(end, rule)(end):
                continue
            if arcs and abs(arcs[-1].T - T) <= self.tol:
                continue
            arcs.append(self.flow.arc(seed, T, trajectory=trajectory, residual=residual, rule=rule))
        return arcs

    def _safe_closed_arcs(self, args) -> List[GeodesicArc]:
        index, seed, t_max = args
        try:
            return self.closed_arcs(seed, t_max)
        except (IntegrationError, NumericalError) as e:
            logger.warning(f"Semente {index} descartada: {e}")
            return []

    def detect(self, seeds: Sequence[CotangentPoint], t_max: float) -> List[GeodesicArc]:
        """Arcos de todas as sementes, na ordem das sementes e, em cada uma, por T."""
        jobs = [(i, seed, t_max) for i, seed in enumerate(seeds)]
        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            results = list(
                tqdm(
                    executor.map(self._safe_closed_arcs, jobs),
                    total=len(jobs),
                    desc="Sementes",
                    disable=not self.show_progress,
                )
            )
        return [arc for arcs in results for arc in arcs]

    def classify(self, arc: GeodesicArc) -> SojournClass:
        if all(label.is_regular for label in arc.touched_strata):
            return SojournClass.REGULAR
        if arc.rule == POLE_RULE and arc.min_pole_distance <= self.tol:
            end_distance = float(pole_distance(self.model, arc.end.chart, arc.end.state(self.model)))
            if end_distance <= max(self.tol, arc.residual * 10.0):
                return SojournClass.MINIMAL
        return SojournClass.SINGULAR

    def estimate_e_T(self, arc: GeodesicArc) -> int:
        """Número de parâmetros da semente cuja perturbação mantém o arco fechado em T."""
        n = len(self.model.coord_names)
        y0 = arc.start.state(self.model)
        delta = self.rank_step
        count = 0
        transverse = [self.model.index(name) for name in self.model.transverse_coords]
        covector_slots = list(transverse)
        if arc.start.chart != "cylindrical":
            covector_slots.append(self.model.index("theta"))
        for j in list(range(n)) + [n + k for k in covector_slots]:
            y = y0.copy()
            step = delta
            if self.model.has_poles and arc.start.chart == "cylindrical" and j == self.model.index("z"):
                step = -delta if y[j] > 0 else delta
            y[j] += step
            try:
                start = CotangentPoint.from_state(self.model, arc.start.chart, y)
                y[n:] = y[n:] / cotangent_speed(self.model, start)
                start = CotangentPoint.from_state(self.model, arc.start.chart, y)
                end = self.flow.integrate(start, arc.T).point_at(arc.T)
            except (IntegrationError, NumericalError, ValueError) as e:
                logger.debug(f"Perturbação {j} descartada na estimativa de e_T: {e}")
                continue
            a = embedded_invariants(self.model, start.chart, start.state(self.model), arc.rule)
            b = embedded_invariants(self.model, end.chart, end.state(self.model), arc.rule)
            if float(np.linalg.norm(b - a)) / delta < self.rank_ratio:
                count += 1
        return count

    def build_catalog(self, arcs: Sequence[GeodesicArc], t_max: float, estimate_rank: bool = True) -> SojournCatalog:
        """Funde tempos próximos e classifica cada grupo pela melhor testemunha."""
        ordered = sorted(enumerate(arcs), key=lambda item: (item[1].T, item[0]))
        groups: List[List[GeodesicArc]] = []
        for _, arc in ordered:
            if groups and arc.T - groups[-1][0].T <= self.merge_factor * self.tol:
                groups[-1].append(arc)
            else:
                groups.append([arc])

        entries = []
        for group in groups:
            classes = [self.classify(arc) for arc in group]
            present = tuple(c for c in _PRIORITY if c in classes)
            best = present[0]
            witness = group[classes.index(best)]
            e_T = self.estimate_e_T(witness) if estimate_rank else None
            entries.append(
                SojournEntry(
                    T=witness.T,
                    classification=best,
                    witness=witness,
                    witness_classes=present,
                    residual=witness.residual,
                    e_T_estimate=e_T,
                    relies_on_closure=any(arc.relies_on_closure for arc in group),
                )
            )
        entries.sort(key=lambda e: e.T)
        return SojournCatalog(tuple(entries), float(t_max), self.tol, self.model)

    def catalog(self, t_max: float, seed_budget: int, estimate_rank: bool = True) -> SojournCatalog:
        seeds = sweep_seeds(
            self.model,
            seed_budget,
            t_max,
            self.direction_lattice,
            self.base_lattice,
            self.flow.pole_enter_eps,
        )
        logger.info(f"Varrendo {len(seeds)} sementes até t_max = {t_max} ({self.threads} thread(s)).")
        arcs = self.detect(seeds, t_max)
        catalog = self.build_catalog(arcs, t_max, estimate_rank)
        logger.info(
            f"Catálogo com {len(catalog)} tempos: {len(catalog.regular_times)} regulares, "
            f"{len(catalog.minimal_times)} mínimos."
        )
        return catalog


def detect_relatively_closed(
    model: SuspensionModel,
    seeds: Sequence[CotangentPoint],
    t_max: float,
    tol: float = 1e-6,
    threads: int = 1,
) -> List[GeodesicArc]:
    """Todos os arcos relativamente fechados das sementes com T ≤ t_max."""
    return SojournSearch(model, tol=tol, threads=threads).detect(seeds, t_max)


def enumerate_sojourn_times(
    model: SuspensionModel,
    t_max: float,
    tol: float = 1e-6,
    seed_budget: int = 256,
    threads: int = 1,
    config=None,
) -> SojournCatalog:
    """Catálogo deduplicado e classificado de tempos de permanência em (0, t_max]."""
    if seed_budget < 1:
        raise ConfigurationError(f"seed_budget deve ser ≥ 1: {seed_budget}")
    if config is not None:
        search = SojournSearch.from_config(model, config, tol=tol)
    else:
        search = SojournSearch(model, tol=tol, threads=threads)
    return search.catalog(t_max, seed_budget)


@dataclass(frozen=True)
class SojournCutoff:
    """χ(t): 0 perto dos tempos só singulares, 1 perto dos regulares, C^∞ entre eles."""

    singular_times: Tuple[float, ...]
    regular_times: Tuple[float, ...]
    halfwidth: float
    ramp: float

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        chi = np.ones_like(t)
        for T in self.singular_times:
            chi = chi * smooth_step((np.abs(t - T) - self.halfwidth) / self.ramp)
        return chi


def sojourn_cutoff(
    catalog: SojournCatalog,
    t_range: Tuple[float, float],
    halfwidth: float = 0.1,
    ramp: float = 0.05,
) -> SojournCutoff:
    """Constrói χ para o traço parcial; vizinhanças sobrepostas no intervalo são erro de configuração."""
    if halfwidth <= 0 or ramp <= 0:
        raise ConfigurationError("halfwidth e ramp devem ser positivos.")
    lo, hi = t_range
    reach = halfwidth + ramp
    inside = [e for e in catalog.entries if lo - reach <= e.T <= hi + reach]
    singular = tuple(e.T for e in inside if e.classification is not SojournClass.REGULAR)
    regular = tuple(e.T for e in inside if e.classification is SojournClass.REGULAR)
    for tr in regular:
        for ts in singular:
            if abs(tr - ts) < 2.0 * halfwidth + ramp:
                raise ConfigurationError(
                    f"Vizinhanças sobrepostas: tempo regular {tr:.6f} e singular {ts:.6f} "
                    f"(distância mínima {2.0 * halfwidth + ramp:.3f})."
                )
    return SojournCutoff(singular, regular, halfwidth, ramp)

# foliatrace/core/flow.py

"""
flow.py: Fluxo Hamiltoniano Transversal.

Integra o fluxo hamiltoniano de H^{1/2} (geodésicas de velocidade unitária)
sobre o fibrado conormal N*𝓕 dos modelos de suspensão.

**Cartas:**
    - `cylindrical`: as próprias coordenadas do modelo (x, z, θ, s). A métrica
      degenera em z = ±1, por isso a carta só é usada longe dos polos.
    - `north-pole` / `south-pole`: projeção ortográfica (a, b) = ρ(cos θ, sen θ)
      com ρ² = 1 - z², em que a métrica inversa é I - u uᵀ e os polos são
      pontos comuns.
    A troca de carta é feita por eventos terminais do `solve_ivp` com histerese
    (entrada em 1 - |z| < POLE_ENTER_EPS, saída em 1 - |z| > POLE_EXIT_EPS).

**Invariantes embutidos:**
    A comparação entre covetores de cartas diferentes usa quantidades
    independentes de carta: posição P ∈ S² ⊂ ℝ³ e velocidade V do fator
    esférico, corda (L/2π)(cos, sen) dos fatores planos, e as velocidades.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

from foliatrace.core.model import (
    TWO_PI,
    ModelKind,
    ModelPoint,
    StratumLabel,
    SuspensionModel,
    minimal_stratum,
    regular_stratum,
    validate_point,
)
from foliatrace.exceptions import BoundaryError, ConfigurationError, IntegrationError, ModelError

logger = logging.getLogger(__name__)

CYLINDRICAL = "cylindrical"
NORTH_POLE = "north-pole"
SOUTH_POLE = "south-pole"

REGULAR_RULE = "regular"
POLE_RULE = "pole"

_POLE_SIGN = {NORTH_POLE: 1.0, SOUTH_POLE: -1.0}


@dataclass(frozen=True)
class CotangentPoint:
    """
    Ponto de N*𝓕 expresso numa carta.

    `covector` segue a ordem das coordenadas do modelo na carta cilíndrica
    (ξ_x..., ξ_z, ξ_θ, ξ_s ou ξ_ψ, ξ_θ, ξ_s). Nas cartas polares os dois
    componentes esféricos são (p_a, p_b) e `pole_position` guarda (a, b).
    """

    base: ModelPoint
    covector: Tuple[float, ...]
    chart: str = CYLINDRICAL
    pole_position: Tuple[float, ...] = ()

    def state(self, model: SuspensionModel) -> np.ndarray:
        q = list(self.base.coords)
        if self.chart != CYLINDRICAL:
            d = model.x_dim
            q[d], q[d + 1] = self.pole_position
        return np.array(q + list(self.covector), dtype=float)

    @classmethod
    def from_state(cls, model: SuspensionModel, chart: str, y: np.ndarray) -> "CotangentPoint":
        n = len(model.coord_names)
        q, p = [float(v) for v in y[:n]], tuple(float(v) for v in y[n:])
        if chart == CYLINDRICAL:
            return cls(validate_point(model, q), p, chart)
        d = model.x_dim
        a, b = q[d], q[d + 1]
        rho2 = min(a * a + b * b, 1.0)
        q[d] = _POLE_SIGN[chart] * math.sqrt(1.0 - rho2)
        q[d + 1] = math.atan2(b, a)
        return cls(validate_point(model, q), p, chart, (a, b))


@dataclass(frozen=True)
class ConormalCondition:
    """Condições lineares exatas de N*L̄ num ponto: ξ anula as direções varridas."""

    model: SuspensionModel
    point: ModelPoint
    swept: FrozenSet[str]
    tol: float = 1e-10

    @property
    def conditions(self) -> Tuple[str, ...]:
        return tuple(f"xi_{name} = 0" for name in sorted(self.swept))

    def defect(self, covector: Union["CotangentPoint", Sequence[float]]) -> float:
        if isinstance(covector, CotangentPoint):
            xi_theta, xi_s = _closure_components(self.model, covector.chart, covector.state(self.model))
            xi_theta, xi_s = float(xi_theta), float(xi_s)
        else:
            xi = [float(v) for v in covector]
            if len(xi) != len(self.model.coord_names):
                raise ModelError(
                    f"Covetor com {len(xi)} componentes; esperado {len(self.model.coord_names)}."
                )
            rho = 1.0
            if self.model.has_poles:
                z = self.point[self.model.index("z")]
                rho = math.sqrt(max(1.0 - z * z, 0.0))
            xi_theta = xi[self.model.index("theta")] / rho if rho > 0 else 0.0
            xi_s = xi[self.model.index("s")]
        total = abs(xi_s)
        if "theta" in self.swept:
            total += abs(xi_theta)
        return total

    def __call__(self, covector) -> bool:
        return self.defect(covector) <= self.tol


def _rates(model: SuspensionModel, chart: str, y: np.ndarray):
    """Lado direito (q̇, ṗ) do fluxo de H^{1/2} e a velocidade r; y pode ter colunas."""
    n = len(model.coord_names)
    q, p = y[:n], y[n:]
    if model.kind is ModelKind.TORUS:
        r = np.sqrt(np.sum(p * p, axis=0))
        return np.concatenate([p / r, np.zeros_like(p)]), r

    d = model.x_dim
    px, ps = p[:d], p[n - 1]
    flat2 = np.sum(px * px, axis=0) + ps * ps
    zeros_x = np.zeros_like(px)
    if chart == CYLINDRICAL:
        z, pz, pth = q[d], p[d], p[d + 1]
        w = 1.0 - z * z
        r = np.sqrt(flat2 + w * pz * pz + pth * pth / w)
        qdot = np.concatenate([px / r, np.stack([w * pz / r, pth / (w * r), ps / r])])
        pdot = np.concatenate([zeros_x, np.stack([(z * pz * pz - z * pth * pth / (w * w)) / r, 0.0 * r, 0.0 * r])])
        return np.concatenate([qdot, pdot]), r

    a, b, pa, pb = q[d], q[d + 1], p[d], p[d + 1]
    up = a * pa + b * pb
    r = np.sqrt(flat2 + pa * pa + pb * pb - up * up)
    qdot = np.concatenate([px / r, np.stack([(pa - a * up) / r, (pb - b * up) / r, ps / r])])
    pdot = np.concatenate([zeros_x, np.stack([up * pa / r, up * pb / r, 0.0 * r])])
    return np.concatenate([qdot, pdot]), r


def cotangent_speed(model: SuspensionModel, point: CotangentPoint) -> float:
    """r = |ξ|, a velocidade do fluxo de H^{1/2} (H = r²/2)."""
    _, r = _rates(model, point.chart, point.state(model))
    return float(r)


def _to_pole(model: SuspensionModel, y: np.ndarray) -> Tuple[str, np.ndarray]:
    d, n = model.x_dim, len(model.coord_names)
    out = y.copy()
    z, th, pz, pth = y[d], y[d + 1], y[n + d], y[n + d + 1]
    rho = math.sqrt(max(1.0 - z * z, 0.0))
    if rho == 0.0:
        raise BoundaryError("Conversão de carta exatamente no polo; use a carta polar.")
    c, s = math.cos(th), math.sin(th)
    p_rad, p_tan = -rho * pz / z, pth / rho
    out[d], out[d + 1] = rho * c, rho * s
    out[n + d], out[n + d + 1] = p_rad * c - p_tan * s, p_rad * s + p_tan * c
    return (NORTH_POLE if z > 0 else SOUTH_POLE), out


def _to_cylindrical(model: SuspensionModel, chart: str, y: np.ndarray) -> np.ndarray:
    d, n = model.x_dim, len(model.coord_names)
    out = y.copy()
    a, b, pa, pb = y[d], y[d + 1], y[n + d], y[n + d + 1]
    rho = math.hypot(a, b)
    th = math.atan2(b, a)
    z = _POLE_SIGN[chart] * math.sqrt(1.0 - rho * rho)
    c, s = math.cos(th), math.sin(th)
    p_rad, p_tan = pa * c + pb * s, -pa * s + pb * c
    out[d], out[d + 1] = z, th
    out[n + d], out[n + d + 1] = -(z / rho) * p_rad, rho * p_tan
    return out


def _sphere_embedding(model: SuspensionModel, chart: str, y: np.ndarray, qdot: np.ndarray):
    """Posição P ∈ S² ⊂ ℝ³ e velocidade V do fator esférico."""
    d = model.x_dim
    if chart == CYLINDRICAL:
        z, th, zd, thd = y[d], y[d + 1], qdot[d], qdot[d + 1]
        rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        rhod = -z * zd / rho
        c, s = np.cos(th), np.sin(th)
        P = np.stack([rho * c, rho * s, z])
        V = np.stack([rhod * c - rho * s * thd, rhod * s + rho * c * thd, zd])
        return P, V
    sign = _POLE_SIGN[chart]
    a, b, ad, bd = y[d], y[d + 1], qdot[d], qdot[d + 1]
    height = np.sqrt(np.clip(1.0 - a * a - b * b, 0.0, None))
    P = np.stack([a, b, sign * height])
    V = np.stack([ad, bd, -sign * (a * ad + b * bd) / height])
    return P, V


def _flat_part(model: SuspensionModel, y: np.ndarray, qdot: np.ndarray) -> List[np.ndarray]:
    parts = []
    for i, length in enumerate(model.factor_lengths):
        angle = TWO_PI * y[i] / length
        radius = length / TWO_PI
        parts += [radius * np.cos(angle), radius * np.sin(angle), qdot[i]]
    return parts


def embedded_invariants(model: SuspensionModel, chart: str, y: np.ndarray, rule: str = REGULAR_RULE) -> np.ndarray:
    """
    Vetor de comparação do transporte de holonomia.

    Regra regular: mesmo fecho (z, x) e mesma velocidade transversal.
    Regra polar: mesmo polo e mesmo |V| esférico, direção livre.
    """
    rates, _ = _rates(model, chart, y)
    n = len(model.coord_names)
    qdot = rates[:n]
    if model.kind is ModelKind.TORUS:
        return np.stack([np.cos(y[0]), np.sin(y[0]), qdot[0], qdot[1], qdot[2]])
    parts = _flat_part(model, y, qdot)
    P, V = _sphere_embedding(model, chart, y, qdot)
    sdot = qdot[n - 1]
    if rule == POLE_RULE:
        parts += [P[0], P[1], P[2], np.sqrt(np.sum(V * V, axis=0)), sdot]
    else:
        parts += [P[2], V[2], P[0] * V[1] - P[1] * V[0], sdot]
    return np.stack(parts)


def embedded_state(model: SuspensionModel, point: CotangentPoint) -> np.ndarray:
    """Posição e velocidade completas em forma independente de carta."""
    y = point.state(model)
    rates, _ = _rates(model, point.chart, y)
    n = len(model.coord_names)
    qdot = rates[:n]
    s_angle = TWO_PI * y[n - 1]
    tail = [np.cos(s_angle), np.sin(s_angle), qdot[n - 1]]
    if model.kind is ModelKind.TORUS:
        return np.array([np.cos(y[0]), np.sin(y[0]), np.cos(y[1]), np.sin(y[1]), qdot[0], qdot[1]] + tail)
    P, V = _sphere_embedding(model, point.chart, y, qdot)
    return np.concatenate([np.array(_flat_part(model, y, qdot)), P, V, np.array(tail)])


def _closure_components(model: SuspensionModel, chart: str, y: np.ndarray):
    """Componentes ortonormais (ξ_θ/ρ, ξ_s) do covetor ao longo do fecho."""
    n = len(model.coord_names)
    p = y[n:]
    if model.kind is ModelKind.TORUS:
        return p[1], p[2]
    d = model.x_dim
    if chart == CYLINDRICAL:
        rho = np.sqrt(np.clip(1.0 - y[d] * y[d], 0.0, None))
        lz = p[d + 1]
    else:
        rho = np.hypot(y[d], y[d + 1])
        lz = y[d] * p[d + 1] - y[d + 1] * p[d]
    safe = np.where(rho > 0, rho, 1.0)
    return np.where(rho > 0, lz / safe, 0.0), p[n - 1]


def orthogonality_defect(model: SuspensionModel, chart: str, y: np.ndarray, touch_tol: float = 1e-6) -> np.ndarray:
    """Produto interno da velocidade com as direções unitárias do fecho."""
    xi_theta, xi_s = _closure_components(model, chart, y)
    _, r = _rates(model, chart, y)
    distance = pole_distance(model, chart, y)
    theta_term = np.where(distance > touch_tol, np.abs(xi_theta), 0.0)
    return (theta_term + np.abs(xi_s)) / r


def pole_distance(model: SuspensionModel, chart: str, y: np.ndarray) -> np.ndarray:
    """Distância (ρ = √(1 - z²)) ao polo mais próximo; infinita no toro."""
    if not model.has_poles:
        return np.full(np.shape(y[0]), np.inf)
    d = model.x_dim
    if chart == CYLINDRICAL:
        return np.sqrt(np.clip(1.0 - y[d] * y[d], 0.0, None))
    return np.hypot(y[d], y[d + 1])


def conormal_to_closure(model: SuspensionModel, point, tol: float = 1e-10, pole_tol: float = 0.0) -> ConormalCondition:
    """Predicado de N*L̄ no ponto: ξ_θ = ξ_s = 0 em pontos regulares, ξ_s = 0 no polo."""
    point = validate_point(model, point)
    swept = {"theta", "s"}
    if model.has_poles and abs(point[model.index("z")]) >= 1.0 - pole_tol:
        swept = {"s"}
    return ConormalCondition(model, point, frozenset(swept), tol)


def cotangent_point(model: SuspensionModel, base, covector: Sequence[float]) -> CotangentPoint:
    """Ponto na carta cilíndrica a partir de coordenadas e covetor do modelo."""
    point = validate_point(model, base)
    covector = tuple(float(v) for v in covector)
    if len(covector) != len(model.coord_names):
        raise ModelError(f"Covetor com {len(covector)} componentes; esperado {len(model.coord_names)}.")
    if model.has_poles and abs(point[model.index("z")]) >= 1.0:
        raise BoundaryError("A carta cilíndrica não cobre os polos; use `pole_point`.")
    return CotangentPoint(point, covector, CYLINDRICAL)


def pole_point(
    model: SuspensionModel,
    north: bool,
    sphere_covector: Sequence[float],
    x: Sequence[float] = (),
    xi_x: Sequence[float] = (),
    s: float = 0.0,
    xi_s: float = 0.0,
) -> CotangentPoint:
    """Ponto exatamente num polo, com covetor esférico (p_a, p_b) na carta ortográfica."""
    if not model.has_poles:
        raise ModelError(f"O modelo {model.kind.value} não tem polos.")
    d = model.x_dim
    x = tuple(x) if x else (0.0,) * d
    xi_x = tuple(xi_x) if xi_x else (0.0,) * d
    if len(x) != d or len(xi_x) != d or len(sphere_covector) != 2:
        raise ModelError("Componentes incompatíveis com a dimensão do fator plano.")
    base = validate_point(model, x + ((1.0 if north else -1.0), 0.0, s))
    covector = tuple(float(v) for v in xi_x) + tuple(float(v) for v in sphere_covector) + (float(xi_s),)
    return CotangentPoint(base, covector, NORTH_POLE if north else SOUTH_POLE, (0.0, 0.0))


def unit_conormal_seed(
    model: SuspensionModel,
    base,
    direction: Sequence[float],
    pole_enter_eps: float = 1e-3,
) -> CotangentPoint:
    """
    Covetor unitário conormal ao fecho em `base`.

    `direction` traz componentes ortonormais sobre `model.transverse_coords`
    (v_x..., v_z) ou (v_ψ,); é normalizado. No polo, v_z é a componente ao
    longo do meridiano de ângulo θ da base.
    """
    point = validate_point(model, base)
    v = np.asarray(direction, dtype=float)
    if v.shape != (len(model.transverse_coords),) or not np.all(np.isfinite(v)):
        raise ModelError(f"Direção inválida para coordenadas {model.transverse_coords}: {direction}")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ModelError("Direção nula: H(ξ) deve ser positivo.")
    v = v / norm
    if model.kind is ModelKind.TORUS:
        return CotangentPoint(point, (float(v[0]), 0.0, 0.0), CYLINDRICAL)

    d = model.x_dim
    z, th = point[d], point[d + 1]
    xi_x = tuple(float(c) for c in v[:d])
    if 1.0 - abs(z) < pole_enter_eps:
        sign = 1.0 if z > 0 else -1.0
        rho = math.sqrt(max(1.0 - z * z, 0.0))
        scale = -sign * v[d] / math.sqrt(1.0 - rho * rho)
        covector = xi_x + (scale * math.cos(th), scale * math.sin(th), 0.0)
        chart = NORTH_POLE if sign > 0 else SOUTH_POLE
        return CotangentPoint(point, covector, chart, (rho * math.cos(th), rho * math.sin(th)))
    covector = xi_x + (float(v[d]) / math.sqrt(1.0 - z * z), 0.0, 0.0)
    return CotangentPoint(point, covector, CYLINDRICAL)


def _is_pole_point(model: SuspensionModel, point: CotangentPoint, tol: float) -> bool:
    if not model.has_poles:
        return False
    return float(pole_distance(model, point.chart, point.state(model))) <= tol


def holonomy_match(
    model: SuspensionModel,
    a: CotangentPoint,
    b: CotangentPoint,
    stratum: Optional[StratumLabel] = None,
    tol: float = 1e-6,
) -> bool:
    """Verdadeiro se `b` está a menos de tol da órbita (fechada) de transporte de `a`."""
    a_pole, b_pole = _is_pole_point(model, a, tol), _is_pole_point(model, b, tol)
    if a_pole != b_pole:
        return False
    own = minimal_stratum(model) if a_pole else regular_stratum(model)
    if stratum is not None and stratum != own:
        return False
    rule = POLE_RULE if a_pole else REGULAR_RULE
    ya, yb = a.state(model), b.state(model)
    ia = embedded_invariants(model, a.chart, ya, rule)
    ib = embedded_invariants(model, b.chart, yb, rule)
    _, ra = _rates(model, a.chart, ya)
    _, rb = _rates(model, b.chart, yb)
    if abs(float(ra) - float(rb)) > tol * max(float(ra), 1.0):
        return False
    return bool(np.max(np.abs(ia - ib)) <= tol)


@dataclass
class _Segment:
    t0: float
    t1: float
    chart: str
    solution: object


class Trajectory:
    """Solução densa por partes (uma por carta) de uma integração."""

    def __init__(self, model: SuspensionModel, segments: List[_Segment]):
        self.model = model
        self.segments = segments
        self._starts = np.array([seg.t0 for seg in segments])

    @property
    def t_end(self) -> float:
        return self.segments[-1].t1

    @property
    def chart_switches(self) -> int:
        return len(self.segments) - 1

    def evaluate(self, ts, fn) -> np.ndarray:
        """Aplica fn(chart, Y) aos estados em ts; devolve matriz (m, len(ts))."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        index = np.clip(np.searchsorted(self._starts, ts, side="right") - 1, 0, len(self.segments) - 1)
        out = None
        for i in np.unique(index):
            mask = index == i
            seg = self.segments[i]
            values = np.atleast_2d(fn(seg.chart, seg.solution(ts[mask])))
            if out is None:
                out = np.empty((values.shape[0], ts.size), dtype=values.dtype)
            out[:, mask] = values
        return out

    def point_at(self, t: float) -> CotangentPoint:
        i = int(np.clip(np.searchsorted(self._starts, t, side="right") - 1, 0, len(self.segments) - 1))
        seg = self.segments[i]
        return CotangentPoint.from_state(self.model, seg.chart, np.asarray(seg.solution(t)))

    def invariants(self, ts, rule: str) -> np.ndarray:
        return self.evaluate(ts, lambda chart, Y: embedded_invariants(self.model, chart, Y, rule))

    def speed(self, ts) -> np.ndarray:
        return self.evaluate(ts, lambda chart, Y: _rates(self.model, chart, Y)[1])[0]

    def pole_distance(self, ts) -> np.ndarray:
        return self.evaluate(ts, lambda chart, Y: pole_distance(self.model, chart, Y))[0]

    def orthogonality(self, ts, touch_tol: float = 1e-6) -> np.ndarray:
        return self.evaluate(ts, lambda chart, Y: orthogonality_defect(self.model, chart, Y, touch_tol))[0]

    def conserved_theta(self, ts) -> np.ndarray:
        """ξ_θ (= a p_b - b p_a nas cartas polares), constante ao longo do fluxo."""
        d, n = self.model.x_dim, len(self.model.coord_names)

        def fn(chart, Y):
            if self.model.kind is ModelKind.TORUS or chart == CYLINDRICAL:
                return Y[n + (1 if self.model.kind is ModelKind.TORUS else d + 1)]
            return Y[d] * Y[n + d + 1] - Y[d + 1] * Y[n + d]

        return self.evaluate(ts, fn)[0]


@dataclass(frozen=True)
class GeodesicArc:
    start: CotangentPoint
    T: float
    end: CotangentPoint
    touched_strata: FrozenSet[StratumLabel]
    energy_drift: float
    residual: float = 0.0
    rule: str = REGULAR_RULE
    min_pole_distance: float = math.inf
    relies_on_closure: bool = False
    trajectory: Optional[Trajectory] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.T > 0:
            raise IntegrationError(f"Comprimento de arco não positivo: {self.T}")

    @property
    def touches_singular(self) -> bool:
        return any(not label.is_regular for label in self.touched_strata)


class HamiltonianFlow:
    """Integrador do fluxo de H^{1/2} com troca automática de cartas."""

    def __init__(
        self,
        model: SuspensionModel,
        rtol: float = 1e-12,
        atol: float = 1e-13,
        energy_tol: float = 1e-8,
        pole_enter_eps: float = 1e-3,
        pole_exit_eps: float = 2e-3,
        max_chart_switches: int = 10000,
        touch_tol: float = 1e-6,
        sample_step: float = 0.01,
    ):
        if not 0 < pole_enter_eps < pole_exit_eps < 1:
            raise ConfigurationError("É preciso 0 < POLE_ENTER_EPS < POLE_EXIT_EPS < 1.")
        self.model = model
        self.rtol, self.atol = rtol, atol
        self.energy_tol = energy_tol
        self.pole_enter_eps = pole_enter_eps
        self._exit_rho2 = 1.0 - (1.0 - pole_exit_eps) ** 2
        self.max_chart_switches = max_chart_switches
        self.touch_tol = touch_tol
        self.sample_step = sample_step
        logger.debug("HamiltonianFlow inicializado.")

    @classmethod
    def from_config(cls, model: SuspensionModel, config) -> "HamiltonianFlow":
        return cls(
            model,
            rtol=config.FLOW_RTOL,
            atol=config.FLOW_ATOL,
            energy_tol=config.ENERGY_TOL,
            pole_enter_eps=config.POLE_ENTER_EPS,
            pole_exit_eps=config.POLE_EXIT_EPS,
            max_chart_switches=config.MAX_CHART_SWITCHES,
            touch_tol=config.TOUCH_TOL,
            sample_step=config.SCAN_STEP,
        )

    def _events(self, chart: str):
        if not self.model.has_poles:
            return None
        d = self.model.x_dim
        if chart == CYLINDRICAL:
            def event(t, y):
                return (1.0 - abs(y[d])) - self.pole_enter_eps

            event.direction = -1
        else:
            def event(t, y):
                return y[d] * y[d] + y[d + 1] * y[d + 1] - self._exit_rho2

            event.direction = 1
        event.terminal = True
        return [event]

    def _switch(self, chart: str, y: np.ndarray) -> Tuple[str, np.ndarray]:
        if chart == CYLINDRICAL:
            return _to_pole(self.model, y)
        return CYLINDRICAL, _to_cylindrical(self.model, chart, y)

    def integrate(self, start: CotangentPoint, t_end: float) -> Trajectory:
        if not t_end > 0:
            raise ConfigurationError(f"Tempo de integração deve ser positivo: {t_end}")
        chart, y = start.chart, start.state(self.model)
        _, r0 = _rates(self.model, chart, y)
        if not float(r0) > 0:
            raise IntegrationError("H(ξ) nulo no ponto inicial.")
        if self.model.has_poles:
            distance2 = float(pole_distance(self.model, chart, y)) ** 2
            if chart == CYLINDRICAL and 1.0 - math.sqrt(1.0 - distance2) < self.pole_enter_eps:
                chart, y = self._switch(chart, y)
            elif chart != CYLINDRICAL and distance2 > self._exit_rho2:
                chart, y = self._switch(chart, y)

        segments: List[_Segment] = []
        t = 0.0
        while t < t_end:
            try:
                sol = solve_ivp(
                    lambda _t, yy, c=chart: _rates(self.model, c, yy)[0],
                    (t, t_end),
                    y,
                    method="DOP853",
                    rtol=self.rtol,
                    atol=self.atol,
                    dense_output=True,
                    events=self._events(chart),
                )
            except (ValueError, ArithmeticError) as e:
                logger.error(f"Falha do integrador na carta {chart} em t = {t:.6f}: {e}", exc_info=True)
                raise IntegrationError(f"Falha do integrador em t = {t:.6f}: {e}") from e
            if sol.status == -1:
                raise IntegrationError(f"Integração interrompida em t = {t:.6f}: {sol.message}")
            segments.append(_Segment(t, float(sol.t[-1]), chart, sol.sol))
            t, y = float(sol.t[-1]), sol.y[:, -1]
            if sol.status == 1:
                if len(segments) > self.max_chart_switches:
                    raise IntegrationError(f"Limite de {self.max_chart_switches} trocas de carta excedido.")
                chart, y = self._switch(chart, y)
        return Trajectory(self.model, segments)

    def _sample_times(self, T: float) -> np.ndarray:
        return np.linspace(0.0, T, max(int(math.ceil(T / self.sample_step)), 1) + 1)

    def min_pole_distance(self, trajectory: Trajectory, T: float) -> float:
        """Menor distância ao polo em [0, T], refinada nos mínimos locais amostrados."""
        if not self.model.has_poles:
            return math.inf
        ts = self._sample_times(T)
        dist = trajectory.pole_distance(ts)
        best = float(dist.min())
        padded = np.concatenate([[np.inf], dist, [np.inf]])
        minima = np.where((padded[1:-1] <= padded[:-2]) & (padded[1:-1] <= padded[2:]) & (dist < 0.05))[0]
        for i in minima:
            lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, ts.size - 1)]
            if hi <= lo:
                continue
            found = optimize.minimize_scalar(
                lambda tt: float(trajectory.pole_distance([tt])[0]) ** 2,
                bounds=(lo, hi),
                method="bounded",
                options={"xatol": 1e-12},
            )
            best = min(best, math.sqrt(max(float(found.fun), 0.0)))
            if best < self.touch_tol:
                break
        return best

    def arc(
        self,
        start: CotangentPoint,
        T: float,
        trajectory: Optional[Trajectory] = None,
        residual: float = 0.0,
        rule: str = REGULAR_RULE,
    ) -> GeodesicArc:
        """Arco de comprimento T com estratos tocados e deriva de energia."""
        if trajectory is None or trajectory.t_end < T:
            trajectory = self.integrate(start, T)
        ts = self._sample_times(T)
        r = trajectory.speed(ts)
        drift = float(np.max(np.abs(r * r - r[0] * r[0])) / (r[0] * r[0]))
        if drift > self.energy_tol:
            raise IntegrationError(f"Deriva de energia {drift:.3e} acima da tolerância {self.energy_tol:.1e}.")
        end = trajectory.point_at(T)

        if not self.model.has_poles:
            touched = frozenset({regular_stratum(self.model)})
            distance = math.inf
        else:
            distance = self.min_pole_distance(trajectory, T)
            dist = trajectory.pole_distance(ts)
            touched = set()
            if distance < self.touch_tol:
                touched.add(minimal_stratum(self.model))
            if np.any(dist >= self.touch_tol):
                touched.add(regular_stratum(self.model))
            touched = frozenset(touched)

        relies = False
        if rule == POLE_RULE:
            v0 = embedded_state(self.model, start)
            v1 = embedded_state(self.model, end)
            relies = bool(np.max(np.abs(v1 - v0)) > max(residual, self.touch_tol) * 10.0)
        return GeodesicArc(
            start=start,
            T=float(T),
            end=end,
            touched_strata=touched,
            energy_drift=drift,
            residual=float(residual),
            rule=rule,
            min_pole_distance=float(distance),
            relies_on_closure=relies,
            trajectory=trajectory,
        )

    def reverse(self, arc: GeodesicArc) -> CotangentPoint:
        """Flui (fim, -ξ) por T e devolve o ponto com o covetor desinvertido."""
        flipped = CotangentPoint(arc.end.base, tuple(-c for c in arc.end.covector), arc.end.chart, arc.end.pole_position)
        back = self.integrate(flipped, arc.T).point_at(arc.T)
        return CotangentPoint(back.base, tuple(-c for c in back.covector), back.chart, back.pole_position)

    def reversal_defect(self, arc: GeodesicArc) -> float:
        back = self.reverse(arc)
        return float(np.max(np.abs(embedded_state(self.model, back) - embedded_state(self.model, arc.start))))


def hamiltonian_flow(
    model: SuspensionModel,
    start: CotangentPoint,
    T: float,
    step_control: Optional[dict] = None,
) -> GeodesicArc:
    """Integra o fluxo de H^{1/2} por tempo T a partir de `start`."""
    flow = HamiltonianFlow(model, **(step_control or {}))
    n = len(model.coord_names)
    if abs(start.state(model)[n:][-1]) > 0.0:
        raise ModelError("O ponto inicial não está em N*𝓕: ξ_s deve ser exatamente 0.")
    return flow.arc(start, T)

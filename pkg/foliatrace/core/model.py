# foliatrace/core/model.py

"""
model.py: Modelos de Folheações por Suspensão.

Este módulo constrói e consulta os três modelos de suspensão do laboratório:
toro, esfera e produto X × S² (X um produto de círculos planos). Todos são
descrições simbólicas e exatamente avaliáveis; nada aqui depende de um valor
de ponto flutuante para o ângulo de rotação.

**Entradas:**
    - Um tipo de modelo (`ModelKind` ou os apelidos "torus", "sphere",
      "product") e, apenas para o produto, os comprimentos dos fatores.
    - Pontos no cubo de coordenadas do modelo.

**Processos:**
    - Validação e normalização de pontos (ângulos reduzidos módulo período).
    - Estratificação pela dimensão do fecho das folhas: os polos do fator
      esférico formam o estrato mínimo, os demais pontos o estrato regular.
    - Fechos de folhas declarados simbolicamente (`swept_coords`), já que a
      rotação é tratada como irracional.
    - Avaliação fechada da métrica diagonal e da densidade de volume.

**Saídas:**
    - `SuspensionModel`, `ModelPoint`, `StratumLabel`,
      `LeafClosureDescriptor` e `MetricData`, todos imutáveis.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, FrozenSet, Optional, Sequence, Tuple, Union

from foliatrace.exceptions import BoundaryError, ModelError

TWO_PI = 2.0 * math.pi


class ModelKind(str, Enum):
    TORUS = "torus-suspension"
    SPHERE = "sphere-suspension"
    PRODUCT = "product-suspension"


class RotationMode(str, Enum):
    IRRATIONAL_SYMBOLIC = "irrational-symbolic"


_KIND_ALIASES = {
    "torus": ModelKind.TORUS,
    "sphere": ModelKind.SPHERE,
    "product": ModelKind.PRODUCT,
}


@dataclass(frozen=True)
class SuspensionModel:
    """Descrição simbólica de uma folheação por suspensão."""

    kind: ModelKind
    factor_lengths: Tuple[float, ...] = ()
    rotation_mode: RotationMode = RotationMode.IRRATIONAL_SYMBOLIC
    leaf_dim: int = 1
    mean_curvature_is_basic: bool = True

    @property
    def x_dim(self) -> int:
        return len(self.factor_lengths)

    @property
    def codim(self) -> int:
        return 2 + self.x_dim

    @property
    def total_dim(self) -> int:
        return self.leaf_dim + self.codim

    @property
    def has_poles(self) -> bool:
        return self.kind is not ModelKind.TORUS

    @property
    def x_names(self) -> Tuple[str, ...]:
        return tuple(f"x{i + 1}" for i in range(self.x_dim))

    @property
    def coord_names(self) -> Tuple[str, ...]:
        if self.kind is ModelKind.TORUS:
            return ("psi", "theta", "s")
        return self.x_names + ("z", "theta", "s")

    @property
    def transverse_coords(self) -> Tuple[str, ...]:
        """Coordenadas que indexam os fechos regulares (as funções básicas)."""
        if self.kind is ModelKind.TORUS:
            return ("psi",)
        return self.x_names + ("z",)

    @property
    def swept_coords(self) -> Tuple[str, ...]:
        return ("theta", "s")

    def period(self, name: str) -> Optional[float]:
        """Período da coordenada, ou None para a coordenada não periódica z."""
        if name in ("psi", "theta"):
            return TWO_PI
        if name == "s":
            return 1.0
        if name == "z":
            return None
        return self.factor_lengths[self.x_names.index(name)]

    def index(self, name: str) -> int:
        return self.coord_names.index(name)

    @property
    def volume(self) -> float:
        """Volume riemanniano em forma fechada (√det g = 1 nas coordenadas do cubo)."""
        if self.kind is ModelKind.TORUS:
            return TWO_PI * TWO_PI
        return 2.0 * TWO_PI * math.prod(self.factor_lengths)

    @property
    def closure_volume(self) -> float:
        """Medida de um fecho regular na direção (θ, s)."""
        return TWO_PI * 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "factor_lengths": list(self.factor_lengths)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SuspensionModel":
        if "kind" not in data:
            raise ModelError("Descritor de modelo sem a chave 'kind'.")
        lengths = data.get("factor_lengths") or None
        return build_model(data["kind"], lengths)


@dataclass(frozen=True)
class ModelPoint:
    coords: Tuple[float, ...]

    def __getitem__(self, i: int) -> float:
        return self.coords[i]


@dataclass(frozen=True)
class StratumLabel:
    closure_dim: int
    is_minimal: bool
    is_regular: bool

    @property
    def name(self) -> str:
        if self.is_regular:
            return "regular"
        return "minimal" if self.is_minimal else "singular"


@dataclass(frozen=True)
class LeafClosureDescriptor:
    base_point: ModelPoint
    swept_coords: FrozenSet[str]
    dim: int


@dataclass(frozen=True)
class MetricData:
    """Componentes diagonais da métrica, da inversa e a densidade de volume."""

    metric: Dict[str, float]
    inverse: Dict[str, float]
    volume_density: float


def parse_kind(kind: Union[str, ModelKind]) -> ModelKind:
    if isinstance(kind, ModelKind):
        return kind
    key = str(kind).strip().lower()
    if key in _KIND_ALIASES:
        return _KIND_ALIASES[key]
    try:
        return ModelKind(key)
    except ValueError as e:
        raise ModelError(f"Tipo de modelo inválido: {kind}") from e


def build_model(
    kind: Union[str, ModelKind],
    factor_lengths: Optional[Sequence[float]] = None,
    rotation_mode: Union[str, RotationMode] = RotationMode.IRRATIONAL_SYMBOLIC,
) -> SuspensionModel:
    """Constrói e valida um modelo de suspensão."""
    model_kind = parse_kind(kind)
    try:
        mode = RotationMode(rotation_mode)
    except ValueError as e:
        raise ModelError(
            f"Modo de rotação não suportado: {rotation_mode}. "
            "Somente rotações irracionais (simbólicas) são aceitas."
        ) from e

    if model_kind is ModelKind.PRODUCT:
        if not factor_lengths:
            raise ModelError("O modelo produto exige 'factor_lengths' não vazio.")
        lengths = tuple(float(v) for v in factor_lengths)
        if any(not math.isfinite(v) or v <= 0 for v in lengths):
            raise ModelError(f"Comprimentos de fator devem ser positivos: {list(lengths)}")
    else:
        if factor_lengths:
            raise ModelError(
                f"'factor_lengths' só é aceito para o modelo produto (recebido para {model_kind.value})."
            )
        lengths = ()

    return SuspensionModel(kind=model_kind, factor_lengths=lengths, rotation_mode=mode)


def validate_point(model: SuspensionModel, coords: Union[ModelPoint, Sequence[float]]) -> ModelPoint:
    """Verifica aridade e faixas e reduz as coordenadas periódicas."""
    values = coords.coords if isinstance(coords, ModelPoint) else tuple(coords)
    names = model.coord_names
    if len(values) != len(names):
        raise ModelError(
            f"Ponto com {len(values)} coordenadas; o modelo {model.kind.value} espera {len(names)} {names}."
        )
    reduced = []
    for name, value in zip(names, values):
        value = float(value)
        if not math.isfinite(value):
            raise ModelError(f"Coordenada '{name}' não finita: {value}")
        period = model.period(name)
        if period is None:
            if value < -1.0 or value > 1.0:
                raise ModelError(f"Coordenada z fora de [-1, 1]: {value}")
        else:
            value = value % period
            if value >= period:
                value = 0.0
        reduced.append(value)
    return ModelPoint(tuple(reduced))


def _is_pole(model: SuspensionModel, point: ModelPoint, pole_tol: float) -> bool:
    if not model.has_poles:
        return False
    return abs(point[model.index("z")]) >= 1.0 - pole_tol


def classify_point(model: SuspensionModel, point, pole_tol: float = 0.0) -> StratumLabel:
    """Rotula o estrato de um ponto pela dimensão do fecho da folha."""
    point = validate_point(model, point)
    if model.kind is ModelKind.TORUS:
        # Um único estrato: regular e mínimo ao mesmo tempo.
        return StratumLabel(closure_dim=2, is_minimal=True, is_regular=True)
    if _is_pole(model, point, pole_tol):
        return StratumLabel(closure_dim=1, is_minimal=True, is_regular=False)
    return StratumLabel(closure_dim=2, is_minimal=False, is_regular=True)


def regular_stratum(model: SuspensionModel) -> StratumLabel:
    if model.kind is ModelKind.TORUS:
        return StratumLabel(2, True, True)
    return StratumLabel(2, False, True)


def minimal_stratum(model: SuspensionModel) -> StratumLabel:
    if model.kind is ModelKind.TORUS:
        return StratumLabel(2, True, True)
    return StratumLabel(1, True, False)


def leaf_closure(model: SuspensionModel, point, pole_tol: float = 0.0) -> LeafClosureDescriptor:
    """Descreve o fecho da folha pelo conjunto de coordenadas varridas."""
    point = validate_point(model, point)
    if _is_pole(model, point, pole_tol):
        swept = frozenset({"s"})
    else:
        swept = frozenset({"theta", "s"})
    return LeafClosureDescriptor(base_point=point, swept_coords=swept, dim=len(swept))


def metric_at(model: SuspensionModel, point) -> MetricData:
    """Avalia a métrica diagonal em forma fechada."""
    point = validate_point(model, point)
    metric = {name: 1.0 for name in model.coord_names}
    if model.has_poles:
        z = point[model.index("z")]
        rho2 = 1.0 - z * z
        if rho2 <= 0.0:
            raise BoundaryError(f"Métrica singular em z = {z}: g_zz = 1/(1 - z²) não está definida.")
        metric["z"] = 1.0 / rho2
        metric["theta"] = rho2
    inverse = {name: 1.0 / value for name, value in metric.items()}
    density = math.sqrt(math.prod(metric.values()))
    return MetricData(metric=metric, inverse=inverse, volume_density=density)

# foliatrace/core/calculus.py

"""
calculus.py: Cálculo Básico Discreto.

Este módulo discretiza o projetor básico P, o laplaciano completo Δ e o
laplaciano básico Δᴮ sobre malhas tensoriais no cubo de coordenadas de um
`SuspensionModel`, e verifica numericamente as identidades algébricas entre
eles (idempotência e auto-adjunção de P, ΔᴮP = PΔ).

**Malhas (`Grid`):**
    - Nós de Gauss–Legendre na coordenada z (sem nós em z = ±1).
    - Nós uniformes e periódicos em ψ, θ, s e nos fatores planos xᵢ.
    - Pesos de quadratura derivados da densidade de volume, que vale 1 nas
      coordenadas do cubo para todos os modelos.

**Operadores:**
    - `project_basic`: média exata sobre as fibras (θ, s) de cada fecho.
    - `apply_full_laplacian`: forma de divergência em volumes finitos na
      direção z e diferenças centradas de segunda ordem, periódicas, nas
      demais direções.
    - `apply_basic_laplacian`: forma fraca de −d/dz[(1−z²)d/dz] nos nós de
      Gauss–Legendre (exata para polinômios de grau < N) e operador espectral
      de Fourier nas direções planas.

A diferença entre os dois laplacianos é proposital: o resíduo de comutação
mede então apenas o erro de discretização de Δ, que decai como O(h²).
"""

import logging
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from foliatrace.core.model import ModelKind, SuspensionModel
from foliatrace.exceptions import DiscretizationError

logger = logging.getLogger(__name__)

MIN_NODES = 4


class Grid:
    """Malha tensorial com pesos de volume e eixos periódicos."""

    def __init__(
        self,
        model: SuspensionModel,
        nodes: Sequence[np.ndarray],
        axis_weights: Sequence[np.ndarray],
        min_nodes: int = MIN_NODES,
    ):
        names = model.coord_names
        if len(nodes) != len(names) or len(axis_weights) != len(names):
            raise DiscretizationError(
                f"A malha precisa de {len(names)} eixos {names}; recebidos {len(nodes)}."
            )
        self.model = model
        self.names: Tuple[str, ...] = names
        self.nodes: Tuple[np.ndarray, ...] = tuple(np.asarray(n, dtype=float) for n in nodes)
        self.axis_weights: Tuple[np.ndarray, ...] = tuple(np.asarray(w, dtype=float) for w in axis_weights)
        self.periodic: Tuple[bool, ...] = tuple(model.period(name) is not None for name in names)
        for name, n, w in zip(names, self.nodes, self.axis_weights):
            if n.ndim != 1 or n.shape != w.shape:
                raise DiscretizationError(f"Eixo '{name}' com nós e pesos incompatíveis.")
            if len(n) < min_nodes:
                raise DiscretizationError(
                    f"Malha grosseira demais no eixo '{name}': {len(n)} nós (mínimo {min_nodes})."
                )
            if np.any(w <= 0):
                raise DiscretizationError(f"Pesos não positivos no eixo '{name}'.")

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(n) for n in self.nodes)

    @property
    def node_count(self) -> int:
        return int(np.prod(self.shape))

    def axis(self, name: str) -> int:
        return self.names.index(name)

    @property
    def transverse_axes(self) -> Tuple[int, ...]:
        return tuple(self.axis(name) for name in self.model.transverse_coords)

    @property
    def swept_axes(self) -> Tuple[int, ...]:
        return tuple(self.axis(name) for name in self.model.swept_coords)

    @property
    def transverse_shape(self) -> Tuple[int, ...]:
        return tuple(self.shape[a] for a in self.transverse_axes)

    @property
    def weights(self) -> np.ndarray:
        """Pesos de volume da malha completa (produto tensorial)."""
        return _outer(self.axis_weights)

    @property
    def transverse_weights(self) -> np.ndarray:
        return _outer([self.axis_weights[a] for a in self.transverse_axes])

    @property
    def closure_volume(self) -> float:
        return float(np.prod([self.axis_weights[a].sum() for a in self.swept_axes]))

    def mesh(self) -> Dict[str, np.ndarray]:
        """Coordenadas nodais como arrays esparsos broadcastáveis, por nome."""
        grids = np.meshgrid(*self.nodes, indexing="ij", sparse=True)
        return dict(zip(self.names, grids))

    def transverse_mesh(self) -> Dict[str, np.ndarray]:
        grids = np.meshgrid(*[self.nodes[a] for a in self.transverse_axes], indexing="ij", sparse=True)
        return dict(zip(self.model.transverse_coords, grids))

    def check_swept_alignment(self, rtol: float = 1e-12):
        """Rejeita malhas não uniformes nas coordenadas varridas pelos fechos."""
        for a in self.swept_axes:
            name = self.names[a]
            period = self.model.period(name)
            n = self.nodes[a]
            step = period / len(n)
            expected = n[0] + step * np.arange(len(n))
            if not np.allclose(n, expected, rtol=0.0, atol=rtol * period):
                raise DiscretizationError(
                    f"Malha desalinhada: os nós de '{name}' não são uniformes no período {period}."
                )
            if not np.allclose(self.axis_weights[a], step, rtol=rtol, atol=0.0):
                raise DiscretizationError(f"Malha desalinhada: pesos não uniformes em '{name}'.")


class GridFunction:
    """Valores reais ou complexos em todos os nós de uma malha."""

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.asarray(values)
        if values.size != grid.node_count:
            raise DiscretizationError(
                f"Função com {values.size} valores em uma malha de {grid.node_count} nós."
            )
        self.grid = grid
        self.values = values.reshape(grid.shape)

    def to_frame(self) -> pd.DataFrame:
        mesh = np.meshgrid(*self.grid.nodes, indexing="ij")
        data = {name: m.ravel() for name, m in zip(self.grid.names, mesh)}
        flat = self.values.ravel()
        if np.iscomplexobj(flat):
            data["value"] = flat.real
            data["value_imag"] = flat.imag
        else:
            data["value"] = flat
        return pd.DataFrame(data)


class BasicGridFunction:
    """Valores indexados apenas pelas coordenadas transversais aos fechos."""

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.asarray(values)
        shape = grid.transverse_shape
        if values.size != int(np.prod(shape)):
            raise DiscretizationError(
                f"Função básica com {values.size} valores; esperado {int(np.prod(shape))}."
            )
        self.grid = grid
        self.values = values.reshape(shape)

    def expand(self) -> GridFunction:
        """Estende a função como constante ao longo de θ e s."""
        expanded = self.values.reshape(self.values.shape + (1,) * len(self.grid.swept_axes))
        return GridFunction(self.grid, np.broadcast_to(expanded, self.grid.shape).copy())


def _outer(factors: Sequence[np.ndarray]) -> np.ndarray:
    result = np.ones(())
    for f in factors:
        result = np.multiply.outer(result, f)
    return result


def build_grid(model: SuspensionModel, shape: Sequence[int], min_nodes: int = MIN_NODES) -> Grid:
    """Constrói a malha padrão: Gauss–Legendre em z, uniforme nas demais coordenadas."""
    shape = [int(n) for n in shape]
    if len(shape) != len(model.coord_names):
        raise DiscretizationError(
            f"Forma {shape} incompatível com as coordenadas {model.coord_names}."
        )
    nodes, weights = [], []
    for name, n in zip(model.coord_names, shape):
        if n < min_nodes:
            raise DiscretizationError(f"Malha grosseira demais no eixo '{name}': {n} nós (mínimo {min_nodes}).")
        period = model.period(name)
        if period is None:
            z, w = np.polynomial.legendre.leggauss(n)
            nodes.append(z)
            weights.append(w)
        else:
            nodes.append(period * np.arange(n) / n)
            weights.append(np.full(n, period / n))
    return Grid(model, nodes, weights, min_nodes)


def sample(grid: Grid, fn: Callable[..., np.ndarray]) -> GridFunction:
    """Amostra `fn(**coords)` nos nós da malha."""
    values = fn(**grid.mesh())
    return GridFunction(grid, np.broadcast_to(values, grid.shape).copy())


def sample_basic(grid: Grid, fn: Callable[..., np.ndarray]) -> BasicGridFunction:
    values = fn(**grid.transverse_mesh())
    return BasicGridFunction(grid, np.broadcast_to(values, grid.transverse_shape).copy())


def grid_delta(grid: Grid, index: Tuple[int, ...]) -> GridFunction:
    """Delta discreta: vetor unitário dividido pelo peso, de modo que ⟨δ, φ⟩ = φ[index]."""
    values = np.zeros(grid.shape)
    values[index] = 1.0 / grid.weights[index]
    return GridFunction(grid, values)


def inner_product(grid: Grid, f: Union[GridFunction, BasicGridFunction], g: Union[GridFunction, BasicGridFunction]):
    """Produto interno L² ponderado pelo volume."""
    f = f.expand() if isinstance(f, BasicGridFunction) else f
    g = g.expand() if isinstance(g, BasicGridFunction) else g
    return np.sum(grid.weights * f.values * np.conj(g.values))


def basic_norm(grid: Grid, u: np.ndarray) -> float:
    """Norma L² de uma função básica (constante nos fechos)."""
    return float(np.sqrt(grid.closure_volume * np.sum(grid.transverse_weights * np.abs(u) ** 2)))


def grid_function_from_frame(grid: Grid, frame: pd.DataFrame) -> GridFunction:
    """Reconstrói uma `GridFunction` exportada por `GridFunction.to_frame`."""
    missing = [name for name in grid.names + ("value",) if name not in frame.columns]
    if missing:
        raise DiscretizationError(f"Colunas ausentes no CSV da função: {missing}")
    reference = GridFunction(grid, np.zeros(grid.shape)).to_frame()
    coords = frame[list(grid.names)].to_numpy()
    if coords.shape != reference[list(grid.names)].shape or not np.allclose(
        coords, reference[list(grid.names)].to_numpy(), rtol=0.0, atol=1e-10
    ):
        raise DiscretizationError("As coordenadas do CSV não correspondem aos nós da malha.")
    values = frame["value"].to_numpy()
    if "value_imag" in frame.columns:
        values = values + 1j * frame["value_imag"].to_numpy()
    return GridFunction(grid, values)


# --- Projetor básico ---

def project_basic(
    model: SuspensionModel, grid: Grid, f: Union[GridFunction, BasicGridFunction]
) -> BasicGridFunction:
    """Média de volume de f sobre cada fecho de folha."""
    if isinstance(f, BasicGridFunction):
        return f
    grid.check_swept_alignment()
    # A densidade de volume não depende de θ nem de s: a média é aritmética.
    averaged = f.values.mean(axis=grid.swept_axes)
    return BasicGridFunction(grid, averaged)


def is_basic(model: SuspensionModel, grid: Grid, f: Union[GridFunction, BasicGridFunction], tol: float) -> bool:
    """Verdadeiro se as diferenças periódicas em θ e s ficam abaixo de tol (norma do sup)."""
    if isinstance(f, BasicGridFunction):
        return True
    for a in grid.swept_axes:
        jump = np.max(np.abs(np.roll(f.values, -1, axis=a) - f.values))
        if jump > tol:
            return False
    return True


# --- Laplaciano completo (segunda ordem) ---

def _periodic_second_difference(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(values, -1, axis=axis) - 2.0 * values + np.roll(values, 1, axis=axis)) / (h * h)


def _divergence_form_z(values: np.ndarray, z: np.ndarray, axis: int) -> np.ndarray:
    """Volumes finitos para −d/dz[(1−z²) du/dz] com fluxo nulo em z = ±1."""
    faces = np.concatenate(([-1.0], 0.5 * (z[1:] + z[:-1]), [1.0]))
    widths = np.diff(faces)
    moved = np.moveaxis(values, axis, -1)
    gradient = np.diff(moved, axis=-1) / np.diff(z)
    flux = (1.0 - faces[1:-1] ** 2) * gradient
    pad = [(0, 0)] * (flux.ndim - 1) + [(1, 1)]
    flux = np.pad(flux, pad)
    result = -np.diff(flux, axis=-1) / widths
    return np.moveaxis(result, -1, axis)


def apply_full_laplacian(model: SuspensionModel, grid: Grid, f: GridFunction) -> GridFunction:
    """Aplica Δ com estêncil de segunda ordem (periódico em θ, s e nos fatores planos)."""
    values = f.values
    result = np.zeros_like(values, dtype=np.result_type(values, float))
    for axis, name in enumerate(grid.names):
        n = grid.nodes[axis]
        if name == "z":
            result += _divergence_form_z(values, n, axis)
            continue
        h = model.period(name) / len(n)
        term = -_periodic_second_difference(values, axis, h)
        if name == "theta" and model.has_poles:
            z = grid.mesh()["z"]
            term = term / (1.0 - z * z)
        result += term
    return GridFunction(grid, result)


# --- Laplaciano básico (espectral) ---

@lru_cache(maxsize=16)
def legendre_operator(n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Nós, pesos e matriz de diferenciação de Lagrange nos nós de Gauss–Legendre.

    A matriz usa pesos baricêntricos calculados em escala logarítmica para
    evitar overflow em malhas grandes. Os arrays retornados são somente leitura.
    """
    if n < MIN_NODES:
        raise DiscretizationError(f"Malha de Legendre grosseira demais: {n} nós.")
    z, w = np.polynomial.legendre.leggauss(n)
    diff = z[:, None] - z[None, :]
    np.fill_diagonal(diff, 1.0)
    log_abs = -np.sum(np.log(np.abs(diff)), axis=1)
    sign = np.where((n - 1 - np.arange(n)) % 2 == 0, 1.0, -1.0)
    bary = sign * np.exp(log_abs - log_abs.max())
    dmat = (bary[None, :] / bary[:, None]) / diff
    np.fill_diagonal(dmat, 0.0)
    np.fill_diagonal(dmat, -dmat.sum(axis=1))
    for arr in (z, w, dmat):
        arr.setflags(write=False)
    logger.debug(f"Operador de Legendre montado para N={n}.")
    return z, w, dmat


def legendre_symmetric_matrix(n: int) -> np.ndarray:
    """Matriz simétrica W^{-1/2} K W^{-1/2} da forma fraca de −d/dz[(1−z²)d/dz]."""
    z, w, dmat = legendre_operator(n)
    b = np.sqrt(w * (1.0 - z * z))[:, None] * dmat / np.sqrt(w)[None, :]
    return b.T @ b


def _apply_legendre(values: np.ndarray, axis: int, n: int) -> np.ndarray:
    z, w, dmat = legendre_operator(n)
    moved = np.moveaxis(values, axis, -1)
    derivative = moved @ dmat.T
    weighted = derivative * (w * (1.0 - z * z))
    result = (weighted @ dmat) / w
    return np.moveaxis(result, -1, axis)


def _apply_fourier(values: np.ndarray, axis: int, period: float) -> np.ndarray:
    n = values.shape[axis]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=period / n)
    shape = [1] * values.ndim
    shape[axis] = n
    transformed = np.fft.fft(values, axis=axis) * (k * k).reshape(shape)
    result = np.fft.ifft(transformed, axis=axis)
    return result if np.iscomplexobj(values) else result.real


def apply_basic_laplacian(model: SuspensionModel, grid: Grid, u: BasicGridFunction) -> BasicGridFunction:
    """Aplica Δᴮ à função básica u (Legendre em z, Fourier nas direções planas)."""
    values = u.values
    result = np.zeros_like(values, dtype=np.result_type(values, float))
    for local_axis, name in enumerate(model.transverse_coords):
        n = values.shape[local_axis]
        if n < MIN_NODES:
            raise DiscretizationError(f"Malha grosseira demais no eixo '{name}': {n} nós.")
        if name == "z":
            result += _apply_legendre(values, local_axis, n)
        else:
            result += _apply_fourier(values, local_axis, model.period(name))
    return BasicGridFunction(grid, result)


def commutation_residual(model: SuspensionModel, grid: Grid, f: GridFunction) -> float:
    """‖ΔᴮPf − PΔf‖ na norma L² discreta ponderada pelo volume."""
    lhs = apply_basic_laplacian(model, grid, project_basic(model, grid, f))
    rhs = project_basic(model, grid, apply_full_laplacian(model, grid, f))
    return basic_norm(grid, lhs.values - rhs.values)


# --- Verificação das identidades do projetor ---

def _smooth_test_function(model: SuspensionModel) -> Callable[..., np.ndarray]:
    def fn(**coords):
        value = 1.0 + 0.5 * np.cos(coords["theta"]) * np.sin(2.0 * np.pi * coords["s"])
        if model.kind is ModelKind.TORUS:
            return value * np.exp(np.cos(coords["psi"]))
        value = value * np.exp(coords["z"])
        for name, length in zip(model.x_names, model.factor_lengths):
            value = value * np.exp(0.5 * np.cos(2.0 * np.pi * coords[name] / length))
        return value
    return fn


def convergence_order(model: SuspensionModel, ladder: Sequence[int], swept_nodes: int = 8) -> Tuple[List[float], float]:
    """
    Mede a ordem do resíduo de comutação refinando as direções transversais.

    Retorna os resíduos por nível da escada e a menor ordem observada entre
    níveis consecutivos.
    """
    fn = _smooth_test_function(model)
    residuals = []
    for n in ladder:
        shape = [n] * len(model.transverse_coords) + [swept_nodes, swept_nodes]
        grid = build_grid(model, shape)
        residuals.append(commutation_residual(model, grid, sample(grid, fn)))
    orders = [
        float(np.log(r0 / r1) / np.log(n1 / n0))
        for (n0, r0), (n1, r1) in zip(zip(ladder, residuals), zip(ladder[1:], residuals[1:]))
    ]
    return residuals, min(orders)


def projector_check(model: SuspensionModel, config) -> Dict[str, object]:
    """
    Executa a bateria de identidades de P em uma malha configurada.

    Verifica idempotência, auto-adjunção, caracterização da imagem,
    positividade do núcleo, dualidade com deltas discretas e a ordem de
    convergência do resíduo de comutação.
    """
    grid = build_grid(model, config.PROJECTOR_SHAPE, config.MIN_GRID_NODES)
    rng = np.random.default_rng(config.PROJECTOR_SEED)
    idempotency = 0.0
    adjoint = 0.0
    range_ok = True
    positive_ok = True
    for _ in tqdm(range(config.PROJECTOR_SAMPLES), desc="Projetor", disable=not config.SHOW_PROGRESS):
        f = GridFunction(grid, rng.standard_normal(grid.shape))
        g = GridFunction(grid, rng.standard_normal(grid.shape))
        pf = project_basic(model, grid, f)
        ppf = project_basic(model, grid, pf.expand())
        idempotency = max(idempotency, float(np.max(np.abs(ppf.values - pf.values))))
        lhs = inner_product(grid, pf, g)
        rhs = inner_product(grid, f, project_basic(model, grid, g))
        scale = np.sqrt(inner_product(grid, f, f).real * inner_product(grid, g, g).real)
        adjoint = max(adjoint, float(abs(lhs - rhs) / scale))
        range_ok = range_ok and is_basic(model, grid, pf.expand(), config.BASIC_TOL)
        positive = GridFunction(grid, np.exp(f.values))
        positive_ok = positive_ok and bool(np.all(project_basic(model, grid, positive).values > 0))

    index = tuple(n // 2 for n in grid.shape)
    delta = grid_delta(grid, index)
    phi = sample(grid, _smooth_test_function(model))
    duality = float(abs(
        inner_product(grid, project_basic(model, grid, delta), phi)
        - inner_product(grid, delta, project_basic(model, grid, phi))
    ))

    residuals, order = convergence_order(model, config.PROJECTOR_Z_LADDER)
    passed = (
        idempotency <= config.IDEMPOTENCY_TOL
        and adjoint <= config.SELF_ADJOINT_TOL
        and range_ok
        and positive_ok
        and duality <= config.SELF_ADJOINT_TOL
        and order >= config.MIN_CONVERGENCE_ORDER
    )
    logger.info(
        f"Verificação do projetor: idempotência={idempotency:.3e}, adjunção={adjoint:.3e}, "
        f"ordem={order:.3f}, resultado={'PASS' if passed else 'FAIL'}"
    )
    return {
        "grid_shape": list(grid.shape),
        "samples": config.PROJECTOR_SAMPLES,
        "idempotency_defect": idempotency,
        "self_adjoint_defect": adjoint,
        "range_is_basic": range_ok,
        "kernel_positive": positive_ok,
        "delta_duality_defect": duality,
        "commutation_ladder": list(config.PROJECTOR_Z_LADDER),
        "commutation_residuals": residuals,
        "commutation_order": order,
        "passed": bool(passed),
    }

"""复值序参量场, GL 能量及其 L² 梯度."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
from typing_extensions import Self

from .domain import Annulus, Chart, ComplexArray, FloatArray, Grid, chart
from .errors import AdmissibilityError, ValidationError

ADMISSIBLE_TOL = 1e-9
ZERO_MODULUS = 1e-12

__all__ = [
    "ADMISSIBLE_TOL",
    "ComplexField",
    "EnergyReport",
    "energy",
    "energy_density",
    "gl_gradient",
    "l2_inner",
    "l2_norm",
    "renormalize_boundary",
]


@dataclass(frozen=True, eq=False)
class ComplexField:
    """网格节点上的复值场 u.

    `values` 在构造后只读; 需要修改时用 `with_values` 得到新场.
    """

    values: ComplexArray
    annulus: Annulus
    grid: Grid

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.complex128)
        if values.shape != self.grid.shape:
            raise ValidationError(
                f"复值场形状 {values.shape} 与网格 {self.grid.shape} 不一致"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError("复值场包含非有限值")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def chart(self) -> Chart:
        return chart(self.annulus, self.grid)

    def with_values(self, values: ComplexArray) -> Self:
        """同一网格上的新场."""
        return type(self)(values, self.annulus, self.grid)

    def modulus(self) -> FloatArray:
        return np.abs(self.values)

    def boundary_modulus_error(self) -> float:
        """两条边界圆上 ``max | |u| - 1 |``."""
        edge = np.abs(self.values[[0, -1]])
        return float(np.max(np.abs(edge - 1.0)))

    def is_admissible(self, tol: float = ADMISSIBLE_TOL) -> bool:
        """是否属于 J: 两条边界上 ``|u| = 1`` (容差 tol)."""
        return self.boundary_modulus_error() <= tol


@dataclass(frozen=True, slots=True)
class EnergyReport:
    """GL 能量及其分解 ``total = dirichlet + potential``."""

    dirichlet: float
    potential: float
    total: float
    epsilon: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _check_epsilon(epsilon: float) -> None:
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise ValidationError(f"ε 必须为正有限数, 实际 {epsilon}")


def _abs2(values: ComplexArray) -> FloatArray:
    return values.real**2 + values.imag**2


def _edge_differences(values: ComplexArray) -> tuple[ComplexArray, ComplexArray]:
    """径向差分 ``u[i+1,j] - u[i,j]`` 与角向差分 ``u[i,j+1] - u[i,j]``."""
    return np.diff(values, axis=0), np.roll(values, -1, axis=1) - values


def energy(u: ComplexField, epsilon: float) -> EnergyReport:
    """计算 GL 能量.

    Dirichlet 项按网格边求和 (s 方向梯形权重), 势能项用节点面积权重;
    两者都在共形坐标下带面积因子 ``e^{2s}``.

    Args:
        u: 复值场.
        epsilon: 相干长度 ε.

    Returns:
        能量报告.

    Raises:
        ValidationError: ε 非正.
    """
    _check_epsilon(epsilon)
    ch = u.chart
    d_s, d_t = _edge_differences(u.values)
    dirichlet = 0.5 * (
        ch.radial_coupling * float(np.sum(_abs2(d_s)))
        + float(np.sum(ch.angular_coupling * _abs2(d_t)))
    )
    potential = float(
        np.sum(ch.mass * (_abs2(u.values) - 1.0) ** 2) / (4.0 * epsilon**2)
    )
    return EnergyReport(dirichlet, potential, dirichlet + potential, epsilon)


def energy_density(u: ComplexField, epsilon: float) -> FloatArray:
    """把能量分配到节点, 各边能量平分给两个端点; 总和等于 `energy` 的 total."""
    _check_epsilon(epsilon)
    ch = u.chart
    d_s, d_t = _edge_differences(u.values)
    radial = 0.5 * ch.radial_coupling * _abs2(d_s)
    angular = 0.5 * ch.angular_coupling * _abs2(d_t)
    density = ch.mass * (_abs2(u.values) - 1.0) ** 2 / (4.0 * epsilon**2)
    density[:-1] += 0.5 * radial
    density[1:] += 0.5 * radial
    density += 0.5 * angular + 0.5 * np.roll(angular, 1, axis=1)
    return density


def _energy_derivative(values: ComplexArray, ch: Chart, epsilon: float) -> ComplexArray:
    coupling = ch.radial_coupling
    grad = ch.angular_coupling * (
        2.0 * values - np.roll(values, -1, axis=1) - np.roll(values, 1, axis=1)
    )
    d_s = np.diff(values, axis=0)
    grad[:-1] -= coupling * d_s
    grad[1:] += coupling * d_s
    grad += ch.mass * (_abs2(values) - 1.0) * values / epsilon**2
    return grad


def _tangential(values: ComplexArray, vectors: ComplexArray) -> ComplexArray:
    return 1j * values * np.imag(np.conj(values) * vectors) / _abs2(values)


def gl_gradient(u: ComplexField, epsilon: float) -> ComplexField:
    """离散 L² 内积下的能量梯度, 边界行投影到切方向 iu.

    满足 ``E(u + t·w) = E(u) + t·⟨g, w⟩ + O(t²)``, 其中 w 在边界上切于 S¹.

    Args:
        u: 允许场.
        epsilon: 相干长度 ε.

    Returns:
        梯度场 g.

    Raises:
        AdmissibilityError: u 的边界模长偏离 1.
        ValidationError: ε 非正.
    """
    _check_epsilon(epsilon)
    if not u.is_admissible():
        raise AdmissibilityError(
            f"梯度只对允许场定义, 边界模长误差 {u.boundary_modulus_error():.3e}"
        )
    ch = u.chart
    grad = _energy_derivative(u.values, ch, epsilon) / ch.mass
    edge = [0, -1]
    grad[edge] = _tangential(u.values[edge], grad[edge])
    return u.with_values(grad)


def renormalize_boundary(u: ComplexField) -> ComplexField:
    """把两条边界圆上的值投影回 S¹, 内部不变.

    Raises:
        AdmissibilityError: 边界上存在 ``u = 0`` 的节点.
    """
    values = np.array(u.values)
    edge = values[[0, -1]]
    modulus = np.abs(edge)
    if float(np.min(modulus)) < ZERO_MODULUS:
        raise AdmissibilityError("边界上存在零点, 无法投影到 S¹")
    values[[0, -1]] = edge / modulus
    return u.with_values(values)


def l2_inner(f: ComplexField, g: ComplexField) -> float:
    """实 L² 内积 ``Σ m·Re(f̄ g)``."""
    return float(np.sum(f.chart.mass * np.real(np.conj(f.values) * g.values)))


def l2_norm(f: ComplexField) -> float:
    return math.sqrt(max(l2_inner(f, f), 0.0))

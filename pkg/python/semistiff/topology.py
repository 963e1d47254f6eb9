"""拓扑不变量: 边界度, 平均边界度 abdeg, 涡旋检测与电流势.

所有离散电流都按边取规范不变形式 ``ρ_a ρ_b · arg(ū_a u_b) / h``,
对 ``e^{idθ}`` 精确.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import ndimage, sparse

from .domain import (
    Annulus,
    Chart,
    Contour,
    FloatArray,
    IntArray,
    ScalarField,
    SolveMethod,
    dirichlet_form,
    solve_spd,
)
from .errors import DegreeUndefinedError, ValidationError
from .field import ComplexField, energy, l2_norm

logger = logging.getLogger(__name__)

DEGREE_MODULUS_FLOOR = 1e-6
DEGREE_DEVIATION_WARN = 0.05
VORTEX_THRESHOLD = 0.5

__all__ = [
    "Contour",
    "CurrentPotential",
    "Vortex",
    "VortexSet",
    "abdeg",
    "abdeg_lipschitz_bound",
    "abdeg_radial",
    "boundary_degree",
    "current_pairing",
    "current_potential",
    "edge_currents",
    "find_vortices",
    "plaquette_windings",
    "winding_number",
]


def winding_number(u: ComplexField, contour: Contour) -> float:
    """沿闭合路径累加主值辐角增量, 除以 2π.

    Raises:
        DegreeUndefinedError: 路径上存在 ``|u| <= 1e-6`` 的节点.
    """
    samples = u.values[contour.rows, contour.cols]
    if float(np.min(np.abs(samples))) <= DEGREE_MODULUS_FLOOR:
        raise DegreeUndefinedError(
            f"路径 {contour.label or '<anonymous>'} 上 |u| 过小, 拓扑度无定义"
        )
    increments = np.angle(np.conj(samples) * np.roll(samples, -1))
    return float(np.sum(increments) / (2.0 * math.pi))


def boundary_degree(u: ComplexField, contour: Contour) -> int:
    """闭合路径上的拓扑度 (最近整数).

    Args:
        u: 复值场.
        contour: 逆时针闭合路径.

    Returns:
        整数拓扑度.

    Raises:
        DegreeUndefinedError: 路径上存在 ``|u| <= 1e-6`` 的节点.
    """
    raw = winding_number(u, contour)
    degree = round(raw)
    deviation = abs(raw - degree)
    if deviation >= DEGREE_DEVIATION_WARN:
        logger.warning(
            "winding on %s deviates from an integer by %.3f; refine the grid",
            contour.label or "<anonymous>",
            deviation,
        )
    return int(degree)


def edge_currents(u: ComplexField) -> tuple[FloatArray, FloatArray]:
    """共形坐标下的边电流.

    Returns:
        ``(J_s, J_θ)``: 径向边 ``(n_r-1, n_θ)`` 上的 ``u×∂_s u``,
        角向边 ``(n_r, n_θ)`` 上的 ``u×∂_θ u`` (第 j 列是 j→j+1 的边).
    """
    ch = u.chart
    v = u.values
    rho = np.abs(v)
    radial = rho[:-1] * rho[1:] * np.angle(np.conj(v[:-1]) * v[1:]) / ch.h_s
    ahead = np.roll(v, -1, axis=1)
    angular = (
        rho * np.roll(rho, -1, axis=1) * np.angle(np.conj(v) * ahead) / ch.h_theta
    )
    return radial, angular


def _node_currents(u: ComplexField) -> tuple[FloatArray, FloatArray]:
    radial, angular = edge_currents(u)
    node_s = np.empty(u.grid.shape)
    node_s[1:-1] = 0.5 * (radial[:-1] + radial[1:])
    node_s[0] = radial[0]
    node_s[-1] = radial[-1]
    node_t = 0.5 * (angular + np.roll(angular, 1, axis=1))
    return node_s, node_t


def _require_same_grid(u: ComplexField, V: ScalarField) -> None:
    if u.grid != V.grid or u.annulus != V.annulus:
        raise ValidationError("场与调和测度必须定义在同一网格上")


def abdeg(u: ComplexField, V: ScalarField) -> float:
    """平均边界度 ``(1/2π)∫ (u×∇u)·∇⊥V``.

    Args:
        u: 复值场 (无需属于 J).
        V: 同一网格上的调和测度.

    Returns:
        abdeg(u).
    """
    _require_same_grid(u, V)
    ch = u.chart
    node_s, node_t = _node_currents(u)
    dV_s = np.gradient(V.values, ch.h_s, axis=0)
    dV_t = (np.roll(V.values, -1, axis=1) - np.roll(V.values, 1, axis=1)) / (
        2.0 * ch.h_theta
    )
    integrand = dV_s * node_t - dV_t * node_s
    weights = ch.trapezoid[:, None] * ch.h_theta
    return float(np.sum(weights * integrand) / (2.0 * math.pi))


def abdeg_radial(u: ComplexField) -> float:
    """abdeg 的径向平均形式: 各圆周上 ``(1/2π)∫ u×∂_θ u`` 对 s 取平均."""
    ch = u.chart
    _, angular = edge_currents(u)
    ring_degree = np.sum(angular, axis=1) * ch.h_theta / (2.0 * math.pi)
    return float(np.dot(ch.trapezoid, ring_degree) / ch.annulus.log_ratio)


def abdeg_lipschitz_bound(
    u: ComplexField, v: ComplexField, epsilon: float, V: ScalarField
) -> float:
    """``|abdeg(u) - abdeg(v)|`` 的上界.

    ``(1/π)·‖V‖_{C¹}·(√E_ε(u) + √E_ε(v))·‖u - v‖_{L²}``, E_ε 为 GL 能量.

    Raises:
        ValidationError: ε 非正或网格不一致.
    """
    _require_same_grid(u, V)
    _require_same_grid(v, V)
    ch = V.chart
    dV_s, dV_t = np.gradient(V.values, ch.h_s, ch.h_theta, axis=(0, 1))
    grad = np.sqrt(dV_s**2 + dV_t**2) / ch.r[:, None]
    c1_norm = float(np.max(np.abs(V.values)) + np.max(grad))
    e_u = energy(u, epsilon).total
    e_v = energy(v, epsilon).total
    difference = l2_norm(u.with_values(u.values - v.values))
    return c1_norm * (math.sqrt(e_u) + math.sqrt(e_v)) * difference / math.pi


# ==========================================
# 涡旋
# ==========================================


@dataclass(frozen=True, slots=True)
class Vortex:
    """一个孤立零点簇.

    Attributes:
        position: 簇中心的复坐标.
        winding: 簇内绕数之和.
        boundary_distance: 到 ∂A 的距离.
        min_modulus: 簇内 |u| 的最小值.
        size: 簇包含的格子数.
    """

    position: complex
    winding: int
    boundary_distance: float
    min_modulus: float
    size: int = 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "x": self.position.real,
            "y": self.position.imag,
            "winding": self.winding,
            "boundary_distance": self.boundary_distance,
        }


@dataclass(frozen=True, slots=True)
class VortexSet:
    vortices: tuple[Vortex, ...] = ()

    def __len__(self) -> int:
        return len(self.vortices)

    def __iter__(self) -> Iterator[Vortex]:
        return iter(self.vortices)

    @property
    def total_winding(self) -> int:
        return sum(v.winding for v in self.vortices)

    @property
    def min_boundary_distance(self) -> float | None:
        if not self.vortices:
            return None
        return min(v.boundary_distance for v in self.vortices)

    def to_list(self) -> list[dict[str, Any]]:
        return [v.to_dict() for v in self.vortices]


def _plaquette_corners(values: np.ndarray) -> tuple[np.ndarray, ...]:
    # 逆时针: (i,j) → (i+1,j) → (i+1,j+1) → (i,j+1)
    a = values[:-1]
    b = values[1:]
    c = np.roll(values[1:], -1, axis=1)
    d = np.roll(values[:-1], -1, axis=1)
    return a, b, c, d


def plaquette_windings(u: ComplexField) -> IntArray:
    """每个网格格子上的离散绕数, 形状 ``(n_r-1, n_θ)``."""
    a, b, c, d = _plaquette_corners(u.values)
    total = sum(
        np.angle(np.conj(p) * q) for p, q in ((a, b), (b, c), (c, d), (d, a))
    )
    return np.rint(total / (2.0 * math.pi)).astype(np.int64)


def _merge_periodic(labels: np.ndarray) -> np.ndarray:
    """合并跨越 θ = 0 接缝的连通分量."""
    parent: dict[int, int] = {}

    def find(x: int) -> int:
        while parent.get(x, x) != x:
            x = parent[x]
        return x

    first = labels[:, 0]
    last = labels[:, -1]
    n = labels.shape[0]
    for i in range(n):
        if first[i] == 0:
            continue
        for k in (i - 1, i, i + 1):
            if 0 <= k < n and last[k] != 0:
                ra, rb = find(int(first[i])), find(int(last[k]))
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    if not parent:
        return labels
    lookup = np.arange(int(labels.max()) + 1)
    for label in range(1, lookup.size):
        lookup[label] = find(label)
    return lookup[labels]


def find_vortices(
    u: ComplexField, modulus_threshold: float = VORTEX_THRESHOLD
) -> VortexSet:
    """定位场的零点.

    先计算每个格子的绕数, 再按 8 邻接 (角向周期) 聚类; 保留总绕数非零
    且簇内最小模长低于 modulus_threshold 的簇.

    Args:
        u: 复值场.
        modulus_threshold: 模长阈值, 取值在 (0, 1) 内.

    Raises:
        ValidationError: 阈值不在 (0, 1) 内.

    Returns:
        涡旋集合, 按到边界距离排序.
    """
    if not 0.0 < modulus_threshold < 1.0:
        raise ValidationError(f"modulus_threshold 必须在 (0, 1) 内, 实际 {modulus_threshold}")
    windings = plaquette_windings(u)
    flags = windings != 0
    if not np.any(flags):
        return VortexSet()
    labels, count = ndimage.label(flags, structure=np.ones((3, 3), dtype=bool))
    labels = _merge_periodic(labels)

    z = u.chart.z
    zc = 0.25 * sum(_plaquette_corners(z))
    modulus = np.minimum.reduce([np.abs(p) for p in _plaquette_corners(u.values)])
    annulus: Annulus = u.annulus
    found: list[Vortex] = []
    for label in np.unique(labels[labels > 0]):
        mask = labels == label
        winding = int(windings[mask].sum())
        min_modulus = float(modulus[mask].min())
        if winding == 0 or min_modulus >= modulus_threshold:
            continue
        center = complex(zc[mask].mean())
        found.append(
            Vortex(
                position=center,
                winding=winding,
                boundary_distance=float(annulus.boundary_distance(abs(center))),
                min_modulus=min_modulus,
                size=int(mask.sum()),
            )
        )
    logger.debug("found %d vortices among %d clusters", len(found), count)
    found.sort(key=lambda v: (v.boundary_distance, v.position.real))
    return VortexSet(tuple(found))


# ==========================================
# 电流势
# ==========================================


@dataclass(frozen=True, eq=False)
class CurrentPotential:
    """电流势 h 及其内边界迹.

    Attributes:
        field: h 在网格上的值.
        inner_trace: 内圆上的 h.
        trace_deviation: 内圆迹的振幅 ``max - min``.
    """

    field: ScalarField
    inner_trace: FloatArray
    trace_deviation: float


def _path_laplacian(n: int) -> sparse.csr_matrix:
    diag = np.full(n, 2.0)
    diag[[0, -1]] = 1.0
    off = -np.ones(n - 1)
    return sparse.csr_matrix(sparse.diags([off, diag, off], [-1, 0, 1]))


def _periodic_laplacian(n: int) -> sparse.csr_matrix:
    op = sparse.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n)).tolil()
    op[0, n - 1] = -1.0
    op[n - 1, 0] = -1.0
    return sparse.csr_matrix(op)


def _potential_targets(u: ComplexField) -> tuple[FloatArray, FloatArray]:
    """h 的梯度目标: 径向边上 u×∂_θ u, 角向边上 -u×∂_s u."""
    node_s, node_t = _node_currents(u)
    target_s = 0.5 * (node_t[:-1] + node_t[1:])
    target_t = -0.5 * (node_s + np.roll(node_s, -1, axis=1))
    return target_s, target_t


def _stiffness(ch: Chart) -> sparse.csr_matrix:
    n_r, n_t = ch.grid.shape
    radial = sparse.kron(_path_laplacian(n_r), sparse.identity(n_t)) * ch.radial_coupling
    angular = sparse.kron(
        sparse.diags(ch.trapezoid / ch.h_theta), _periodic_laplacian(n_t)
    )
    return sparse.csr_matrix(radial + angular)


def current_potential(
    u: ComplexField,
    *,
    method: SolveMethod = "auto",
    max_iter: int | None = None,
) -> CurrentPotential:
    """最小二乘求解 ``∇h ≈ u×∇⊥u``, 外圆 h = 1, 内圆取自然边界.

    Args:
        u: 复值场.
        method: 线性求解方式.
        max_iter: 共轭梯度迭代上限.

    Returns:
        电流势及内圆迹.

    Raises:
        SolverError: 线性求解失败.
    """
    ch = u.chart
    n_r, n_t = ch.grid.shape
    target_s, target_t = _potential_targets(u)

    rhs = np.zeros(ch.grid.shape)
    flux_s = ch.h_theta * target_s
    rhs[1:] += flux_s
    rhs[:-1] -= flux_s
    flux_t = ch.trapezoid[:, None] * target_t
    rhs += np.roll(flux_t, 1, axis=1) - flux_t

    stiffness = _stiffness(ch)
    n_free = (n_r - 1) * n_t
    free = stiffness[:n_free, :n_free]
    coupled = stiffness[:n_free, n_free:] @ np.ones(n_t)
    solution = solve_spd(
        free, rhs.ravel()[:n_free] - coupled, method=method, max_iter=max_iter
    )

    values = np.ones(ch.grid.shape)
    values[:-1] = solution.reshape(n_r - 1, n_t)
    trace = values[0].copy()
    deviation = float(np.ptp(trace))
    logger.debug("current potential: inner trace spread %.3e", deviation)
    return CurrentPotential(ScalarField(values, u.annulus, u.grid), trace, deviation)


def current_pairing(h: ScalarField, V: ScalarField) -> float:
    """``(1/2π)∫∇h·∇V``; 对 `current_potential` 的解等于 abdeg_radial(u)."""
    if h.grid != V.grid or h.annulus != V.annulus:
        raise ValidationError("h 与 V 必须定义在同一网格上")
    return dirichlet_form(h.values, V.values, V.chart) / (2.0 * math.pi)

"""极小元的数值诊断量.

每个函数把一条渐近估计变成可以在有限 ε 上检查的数.
"""

from __future__ import annotations

import numpy as np

from .domain import ScalarField, half_level_contour, inner_contour, outer_contour
from .errors import DegreeUndefinedError
from .field import ComplexField, energy_density
from .harmonic import h0_field
from .topology import (
    VORTEX_THRESHOLD,
    Vortex,
    abdeg,
    boundary_degree,
    current_potential,
    find_vortices,
)

__all__ = [
    "abdeg_integer_gap",
    "boundary_modulus_dip",
    "current_potential_gap",
    "index_defect",
    "interior_bound_constant",
    "window_degree_consistent",
    "vortex_energy",
]


def interior_bound_constant(u: ComplexField, epsilon: float, margin: float = 0.0) -> float:
    """内部模长估计的常数 ``max (1 - |u|²)·dist²/ε²``.

    只统计到边界距离大于 margin (且严格为正) 的节点.
    """
    ch = u.chart
    dist = u.annulus.boundary_distance(ch.r)[:, None] * np.ones((1, u.grid.n_angular))
    mask = dist > max(margin, 0.0)
    if not np.any(mask):
        return 0.0
    deficit = 1.0 - np.abs(u.values) ** 2
    return float(np.max(deficit[mask] * dist[mask] ** 2) / epsilon**2)


def boundary_modulus_dip(u: ComplexField, epsilon: float) -> float:
    """到边界距离不超过 ε 的节点上 |u| 的最小值."""
    dist = u.annulus.boundary_distance(u.chart.r)
    rows = dist <= epsilon
    return float(np.min(np.abs(u.values[rows])))


def current_potential_gap(u: ComplexField, d: int) -> float:
    """``max |h(u) - h₀(d)|``."""
    h = current_potential(u).field
    return float(np.max(np.abs(h.values - h0_field(d, u.annulus, u.grid).values)))


def abdeg_integer_gap(u: ComplexField, V: ScalarField) -> float:
    """abdeg 到最近整数的距离."""
    value = abdeg(u, V)
    return abs(value - round(value))


def window_degree_consistent(u: ComplexField, V: ScalarField, d: int) -> bool:
    """abdeg 落在 ``[d-1/2, d+1/2]`` 当且仅当 u/|u| 在半水平线上的度为 d.

    半水平线上度无定义时按 "度不等于 d" 处理.
    """
    value = abdeg(u, V)
    in_window = d - 0.5 <= value <= d + 0.5
    try:
        degree_matches = boundary_degree(u, half_level_contour(V)) == d
    except DegreeUndefinedError:
        degree_matches = False
    return in_window == degree_matches


def index_defect(u: ComplexField, modulus_threshold: float = VORTEX_THRESHOLD) -> int:
    """``(deg ∂Ω - deg ∂ω) - Σ 绕数``, 在离散意义下应为 0."""
    grid = u.grid
    outer = boundary_degree(u, outer_contour(grid))
    inner = boundary_degree(u, inner_contour(grid))
    return (outer - inner) - find_vortices(u, modulus_threshold).total_winding


def vortex_energy(u: ComplexField, epsilon: float, vortex: Vortex, radius: float) -> float:
    """以涡旋为中心, 半径 radius 的圆盘内的 GL 能量."""
    density = energy_density(u, epsilon)
    inside = np.abs(u.chart.z - vortex.position) <= radius
    return float(np.sum(density[inside]))

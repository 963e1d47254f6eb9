"""无涡基准 ``(d, d)``: 调和极小元 e^{idθ}, 能量 I₀ 与电流势 h₀."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Annulus, Grid, ScalarField, capacity, chart
from .field import ComplexField

__all__ = [
    "HarmonicBaseline",
    "discrete_harmonic_energy",
    "h0_field",
    "harmonic_baseline",
    "harmonic_minimizer",
    "i0",
]


def i0(d: int, annulus: Annulus) -> float:
    """S¹ 值调和映射的最小 Dirichlet 能量 ``2(πd)²/cap(A) = πd²·log(R2/R1)``."""
    return 2.0 * (math.pi * d) ** 2 / capacity(annulus)


def harmonic_minimizer(d: int, annulus: Annulus, grid: Grid) -> ComplexField:
    """``e^{idθ}``, 相位在 θ = 0 处取 1."""
    ch = chart(annulus, grid)
    ring = np.exp(1j * d * ch.theta)
    return ComplexField(np.broadcast_to(ring, grid.shape).copy(), annulus, grid)


def h0_field(d: int, annulus: Annulus, grid: Grid) -> ScalarField:
    """``h₀ = 1 + d·log(r/R2)``: 外圆为 1, 内圆为 ``1 - d·log(R2/R1)``."""
    ch = chart(annulus, grid)
    profile = 1.0 + d * (ch.s - math.log(annulus.r_outer))
    values = np.broadcast_to(profile[:, None], grid.shape).copy()
    return ScalarField(values, annulus, grid)


def discrete_harmonic_energy(d: int, annulus: Annulus, grid: Grid) -> float:
    """e^{idθ} 的离散 Dirichlet 能量 (闭式), 角向截断误差 ``O(d²h_θ²)``."""
    h = chart(annulus, grid).h_theta
    return math.pi * annulus.log_ratio * (2.0 - 2.0 * math.cos(d * h)) / h**2


@dataclass(frozen=True, eq=False)
class HarmonicBaseline:
    d: int
    energy: float
    minimizer: ComplexField
    h0: ScalarField


def harmonic_baseline(d: int, annulus: Annulus, grid: Grid) -> HarmonicBaseline:
    """打包 ``(d, d)`` 扇区的全部基准量."""
    return HarmonicBaseline(
        d=d,
        energy=i0(d, annulus),
        minimizer=harmonic_minimizer(d, annulus, grid),
        h0=h0_field(d, annulus, grid),
    )

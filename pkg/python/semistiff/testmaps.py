"""显式构造的试验映射: Möbius 边界层, 涡旋-鬼反涡对与 Blaschke 插入.

这些映射既用来给 `minimize` 提供初值, 也用来数值检验能量上界.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import integrate
from typing_extensions import Self

from .domain import Annulus, ComplexArray, FloatArray, Grid, chart, inner_contour, outer_contour
from .errors import SectorError, TruncationError, ValidationError
from .field import ComplexField, EnergyReport, energy, renormalize_boundary
from .harmonic import harmonic_minimizer
from .topology import abdeg_radial, boundary_degree

logger = logging.getLogger(__name__)

TAIL_TOLERANCE = 1e-3
MIN_TRUNCATION = 50
ANGULAR_CELLS_PER_OFFSET = 2.0
MIN_LAYER_ROWS = 8
RENORMALIZE_WARN = 1e-3

Boundary = Literal["inner", "outer"]

__all__ = [
    "AntivortexPair",
    "MoebiusParams",
    "ProfileTable",
    "admissible_map",
    "blaschke",
    "build_wt",
    "check_offset",
    "compose_with_modulus",
    "factorize_pair",
    "far_field_ratio",
    "insert_factor",
    "m_lambda",
    "m_lambda_series",
    "moebius_datum",
    "pair_energy",
    "pair_field",
    "phi_k",
    "phi_k_exact",
    "profile_derivative",
    "profile_fk",
    "profile_table",
    "rigid_vortex_energy",
]


@dataclass(frozen=True, slots=True)
class MoebiusParams:
    """边界层试验映射的参数.

    Attributes:
        t: Möbius 参数, ``0 < t < 1``.
        delta: 边界层在 h 方向的宽度, ``0 < δ < 1/2``.
        lam: 二次罚项系数 λ, 使用时要求 ``λ >= 2d²``.
        K: 级数截断阶数, 至少为 50.
    """

    t: float = 0.05
    delta: float = 0.45
    lam: float = 2.0
    K: int = 400

    def __post_init__(self) -> None:
        if not 0.0 < self.t < 1.0:
            raise ValidationError(f"t 必须位于 (0, 1), 实际 {self.t}")
        if not 0.0 < self.delta < 0.5:
            raise ValidationError(f"delta 必须位于 (0, 1/2), 实际 {self.delta}")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ValidationError(f"lam 必须为正有限数, 实际 {self.lam}")
        if self.K < MIN_TRUNCATION:
            raise ValidationError(f"K 至少为 {MIN_TRUNCATION}, 实际 {self.K}")

    @classmethod
    def for_epsilon(
        cls,
        epsilon: float,
        d: int,
        annulus: Annulus,
        *,
        t: float = 0.05,
        delta: float = 0.45,
        K: int = 400,
    ) -> Self:
        """按 ``λ = max{9/(2ε²·inf|∇θ|²), 2d²}`` 选取 λ, 其中 ``|∇θ| = 1/r``."""
        lam = max(9.0 * annulus.r_outer**2 / (2.0 * epsilon**2), 2.0 * d**2)
        return cls(t=t, delta=delta, lam=lam, K=K)

    @property
    def tail_bound(self) -> float:
        """截断尾项上界 ``(2-t)(1-t)^{K+1}``."""
        return (2.0 - self.t) * (1.0 - self.t) ** (self.K + 1)

    def check_degree(self, d: int) -> None:
        if d < 1:
            raise ValidationError(f"边界层构造要求 d >= 1, 实际 {d}")
        if self.lam < 2.0 * d**2:
            raise ValidationError(f"需要 λ >= 2d² = {2 * d**2}, 实际 {self.lam}")


def blaschke(z: ComplexArray | complex, t: float) -> ComplexArray:
    """``C_t(z) = (z - (1-t)) / (z(1-t) - 1)``, 单位圆盘到自身的 Möbius 变换."""
    a = 1.0 - t
    z = np.asarray(z, dtype=np.complex128)
    return (z - a) / (z * a - 1.0)


def moebius_datum(z: ComplexArray | complex, t: float) -> ComplexArray:
    """``F_t(z) = C_t(z̄)``, 在单位圆上的拓扑度为 -1."""
    return blaschke(np.conj(z), t)


# ==========================================
# 一维剖面
# ==========================================


def _rate(k: int | np.ndarray, d: int, lam: float) -> np.ndarray:
    return np.sqrt((np.asarray(k) - d + 1.0) ** 2 + lam - d**2) / d


def profile_fk(k: int, d: int, delta: float, lam: float, h: FloatArray | float) -> FloatArray:
    """剖面 ``f_k(h) = sinh(a(h-1+δ)) / sinh(aδ)``, ``a = k₊``.

    满足 ``f_k(1-δ) = 0``, ``f_k(1) = 1``; 以指数差形式计算, 对大 a 不溢出.
    """
    a = float(_rate(k, d, lam))
    x = np.asarray(h, dtype=np.float64) - (1.0 - delta)
    return np.exp(a * (x - delta)) * -np.expm1(-2.0 * a * x) / -np.expm1(-2.0 * a * delta)


def profile_derivative(
    k: int, d: int, delta: float, lam: float, h: FloatArray | float
) -> FloatArray:
    """``f_k'(h) = a·cosh(a(h-1+δ)) / sinh(aδ)``."""
    a = float(_rate(k, d, lam))
    x = np.asarray(h, dtype=np.float64) - (1.0 - delta)
    return a * np.exp(a * (x - delta)) * (1.0 + np.exp(-2.0 * a * x)) / -np.expm1(
        -2.0 * a * delta
    )


@dataclass(frozen=True, eq=False)
class ProfileTable:
    """剖面取值表: ``values[i, n]`` 是 ``f_{ks[n]}(h[i])``."""

    h: FloatArray
    ks: np.ndarray
    values: FloatArray
    slopes: FloatArray


def profile_table(
    d: int, params: MoebiusParams, h: FloatArray, ks: np.ndarray | None = None
) -> ProfileTable:
    """在给定 h 上批量计算剖面 (默认 ``k = -K…K``)."""
    if ks is None:
        ks = np.arange(-params.K, params.K + 1)
    ks = np.asarray(ks)
    a = _rate(ks, d, params.lam)[None, :]
    x = (np.asarray(h, dtype=np.float64) - (1.0 - params.delta))[:, None]
    if np.any(x < -1e-12) or np.any(x > params.delta + 1e-12):
        raise ValidationError("h 超出边界层 [1-δ, 1]")
    x = np.clip(x, 0.0, params.delta)
    decay = np.exp(a * (x - params.delta))
    denom = -np.expm1(-2.0 * a * params.delta)
    values = decay * -np.expm1(-2.0 * a * x) / denom
    slopes = a * decay * (1.0 + np.exp(-2.0 * a * x)) / denom
    return ProfileTable(np.asarray(h, dtype=np.float64), ks, values, slopes)


def phi_k_exact(k: int, d: int, delta: float, lam: float) -> float:
    """一维泛函在最优剖面上的闭式值 ``d²·a·coth(aδ)``."""
    a = float(_rate(k, d, lam))
    return d**2 * a / math.tanh(a * delta)


def phi_k(k: int, d: int, delta: float, lam: float) -> float:
    """数值积分 ``∫ d²f_k'² + ((k-d+1)² + λ - d²) f_k² dh``."""
    a = float(_rate(k, d, lam))
    coeff = (k - d + 1.0) ** 2 + lam - d**2

    def integrand(h: float) -> float:
        f = float(profile_fk(k, d, delta, lam, h))
        df = float(profile_derivative(k, d, delta, lam, h))
        return d**2 * df**2 + coeff * f**2

    lo = 1.0 - delta
    breaks = [p for p in (1.0 - 5.0 / a, 1.0 - 1.0 / a) if lo < p < 1.0]
    value, _ = integrate.quad(
        integrand, lo, 1.0, points=breaks or None, epsabs=0.0, epsrel=1e-10, limit=200
    )
    return float(value)


# ==========================================
# 边界层映射 w_t
# ==========================================


def _series_modes(d: int, params: MoebiusParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """返回 (k, 傅里叶模, 系数), 第 0 项是 ``-t·f_{-1}·e^{idθ}``."""
    t = params.t
    ks = np.arange(-1, params.K + 1)
    modes = np.empty(ks.size, dtype=np.int64)
    coef = np.empty(ks.size)
    modes[0] = d
    coef[0] = -t
    k = ks[1:]
    modes[1:] = d - 1 - k
    coef[1:] = t * (t - 2.0) * (1.0 - t) ** k
    return ks, modes, coef


def _check_tail(params: MoebiusParams) -> None:
    if params.tail_bound > TAIL_TOLERANCE:
        raise TruncationError(
            f"截断尾项 {params.tail_bound:.3e} 超过 {TAIL_TOLERANCE:g}, 请增大 K"
        )


def build_wt(d: int, params: MoebiusParams, annulus: Annulus, grid: Grid) -> ComplexField:
    """外圆附近的 Möbius 边界层映射.

    在 ``h = 1 + d·(log r - log R2) ∈ (1-δ, 1]`` 的层内按级数求和, 层外为
    ``e^{idθ}``; 外圆上等于 ``e^{idθ}·F_t(e^{iθ})`` (截断意义下).

    Args:
        d: 内边界度, 外边界度为 ``d - 1``.
        params: 构造参数.
        annulus: 环域.
        grid: 网格.

    Returns:
        边界已投影回 S¹ 的场.

    Raises:
        ValidationError: 参数非法或层内网格行数不足.
        TruncationError: 截断尾项过大.
    """
    params.check_degree(d)
    _check_tail(params)
    ch = chart(annulus, grid)
    h = 1.0 + d * (ch.s - math.log(annulus.r_outer))
    layer = h > 1.0 - params.delta
    if int(layer.sum()) < MIN_LAYER_ROWS:
        raise ValidationError(
            f"边界层内只有 {int(layer.sum())} 行网格, 至少需要 {MIN_LAYER_ROWS} 行"
        )

    ks, modes, coef = _series_modes(d, params)
    table = profile_table(d, params, h[layer], ks)
    basis = np.exp(1j * modes[:, None] * ch.theta[None, :])
    ring = np.exp(1j * d * ch.theta)
    values = np.broadcast_to(ring, grid.shape).astype(np.complex128)
    values[layer] = ring[None, :] + (table.values * coef[None, :]) @ basis

    raw = ComplexField(values, annulus, grid)
    correction = raw.boundary_modulus_error()
    if correction > RENORMALIZE_WARN:
        logger.warning("w_t boundary renormalization moved |u| by %.3e", correction)
    return renormalize_boundary(raw)


def compose_with_modulus(w: ComplexField, u: ComplexField) -> ComplexField:
    """``v = |u|·w``, 用 (d, d) 极小元的模长修饰试验映射."""
    if u.grid != w.grid or u.annulus != w.annulus:
        raise ValidationError("w 与 u 必须定义在同一网格上")
    return renormalize_boundary(w.with_values(np.abs(u.values) * w.values))


def far_field_ratio(w: ComplexField, d: int, t: float, delta: float) -> float:
    """``max |w - e^{idθ}| / t``, 只取 ``|θ| >= δ`` 的节点."""
    theta = np.angle(np.exp(1j * w.chart.theta))
    ring = np.exp(1j * d * w.chart.theta)
    far = np.abs(theta) >= delta
    gap = np.abs(w.values[:, far] - ring[None, far])
    return float(gap.max() / t)


def m_lambda(d: int, params: MoebiusParams, *, n_h: int = 1001, n_theta: int | None = None) -> float:
    """在 ``Π_δ = [1-δ, 1] × [0, 2π)`` 上直接积分 M_λ(w_t).

    θ 方向用 FFT 合成各模 (对三角多项式精确), h 方向用梯形公式.

    Raises:
        ValidationError: 参数非法.
        TruncationError: 截断尾项过大.
    """
    params.check_degree(d)
    _check_tail(params)
    if n_theta is None:
        n_theta = 1 << math.ceil(math.log2(2 * (params.K + d + 2)))
    ks, modes, coef = _series_modes(d, params)
    h = np.linspace(1.0 - params.delta, 1.0, n_h)
    table = profile_table(d, params, h, ks)

    spectrum = np.zeros((n_h, n_theta), dtype=np.complex128)
    slope_spectrum = np.zeros_like(spectrum)
    bins = np.mod(modes, n_theta)
    spectrum[:, bins] += table.values * coef[None, :]
    spectrum[:, d % n_theta] += 1.0
    slope_spectrum[:, bins] += table.slopes * coef[None, :]
    freq = np.fft.fftfreq(n_theta, d=1.0 / n_theta)

    w = np.fft.ifft(spectrum, axis=1) * n_theta
    w_h = np.fft.ifft(slope_spectrum, axis=1) * n_theta
    w_theta = np.fft.ifft(1j * freq[None, :] * spectrum, axis=1) * n_theta
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    target = np.exp(1j * d * theta)[None, :]

    density = (
        d**2 * np.abs(w_h) ** 2
        + np.abs(w_theta) ** 2
        + params.lam * np.abs(w - target) ** 2
        - d**2 * np.abs(w) ** 2
    )
    ring_integral = density.mean(axis=1) * 2.0 * math.pi
    return float(integrate.trapezoid(ring_integral, h) / (2.0 * d))


def m_lambda_series(d: int, params: MoebiusParams) -> float:
    """分离变量级数 ``(πt²/d)[Φ_{-1} + (2-t)² Σ (1-t)^{2k} Φ_k]``, 截断到 K."""
    params.check_degree(d)
    t = params.t
    total = phi_k_exact(-1, d, params.delta, params.lam)
    weighted = sum(
        (1.0 - t) ** (2 * k) * phi_k_exact(k, d, params.delta, params.lam)
        for k in range(params.K + 1)
    )
    total += (2.0 - t) ** 2 * weighted
    return math.pi * t**2 * total / d


# ==========================================
# 涡旋-鬼反涡对
# ==========================================

UNIT_SHELL_INNER = 0.5


@dataclass(frozen=True, slots=True)
class AntivortexPair:
    """边界样本恢复出的涡旋 ζ 与单位圆外的鬼反涡 ``ζ* = 1/ζ̄``."""

    vortex: complex
    ghost: complex
    modulus_error: float
    factorization_error: float


def _check_zeta(zeta: complex, inner_radius: float) -> None:
    if not abs(zeta) < 1.0:
        raise ValidationError(f"需要 |ζ| < 1, 实际 |ζ| = {abs(zeta)}")
    if not abs(zeta) > inner_radius:
        raise ValidationError(f"ζ 必须位于环 ({inner_radius}, 1) 内")


def pair_field(
    zeta: complex, grid: Grid, *, inner_radius: float = UNIT_SHELL_INNER
) -> ComplexField:
    """单位圆盘图上的 ``v(z) = (ζ̄/|ζ|)(z - ζ)/(ζ̄z - 1)``.

    在 ``|z| = 1`` 上 ``|v| = 1``; 场定义在 ``A(inner_radius, 1)`` 上, 内圆不是物理边界.
    """
    _check_zeta(zeta, inner_radius)
    annulus = Annulus(inner_radius, 1.0)
    z = chart(annulus, grid).z
    zc = np.conj(zeta)
    values = (zc / abs(zeta)) * (z - zeta) / (zc * z - 1.0)
    return ComplexField(values, annulus, grid)


def factorize_pair(v: ComplexField) -> AntivortexPair:
    """从外圆样本恢复涡旋对.

    在 ``|z| = 1`` 上 ``v·(ζ̄z - 1) = c(z - ζ)``, 即 ``α·vz - c·z + β = v``
    对 ``(α, c, β) = (ζ̄, ζ̄/|ζ|, |ζ|)`` 线性, 用最小二乘求解.
    """
    z = v.chart.z[-1]
    samples = v.values[-1]
    design = np.column_stack([samples * z, -z, np.ones_like(z)])
    (alpha, c, beta), *_ = np.linalg.lstsq(design, samples, rcond=None)
    vortex = complex(beta / c)
    ghost = complex(1.0 / alpha)

    zz = v.chart.z
    near = np.abs(zz - vortex) > 1e-12
    omega = np.abs(zz - vortex) / (abs(vortex) * np.abs(zz - ghost))
    rebuilt = (
        omega
        * (zz - vortex)
        / np.abs(zz - vortex).clip(1e-300)
        * np.conj(zz - ghost)
        / np.abs(zz - ghost)
    )
    return AntivortexPair(
        vortex=vortex,
        ghost=ghost,
        modulus_error=float(np.max(np.abs(np.abs(samples) - 1.0))),
        factorization_error=float(np.max(np.abs(v.values - rebuilt)[near])),
    )


def pair_energy(
    zeta: complex, epsilon: float, *, inner_radius: float = UNIT_SHELL_INNER
) -> EnergyReport:
    """v 在 ``A(inner_radius, 1)`` 上的 GL 能量, 用一维自适应积分计算.

    v 是 Möbius 变换, Dirichlet 密度为 ``(1-|ζ|²)²/|ζ̄z-1|⁴``,
    ``1 - |v|² = (1-|z|²)(1-|ζ|²)/|ζ̄z-1|²``; 对角度的积分用
    ``∫dφ/(A - B cos φ)² = 2πA/(A² - B²)^{3/2}`` 解析完成.
    """
    _check_zeta(zeta, inner_radius)
    if epsilon <= 0:
        raise ValidationError(f"ε 必须为正, 实际 {epsilon}")
    rho = abs(zeta)
    gap = 1.0 - rho**2

    def angular(r: float) -> float:
        a = 1.0 + rho**2 * r**2
        return 2.0 * math.pi * a / (1.0 - rho**2 * r**2) ** 3

    def dirichlet_density(r: float) -> float:
        return gap**2 * r * angular(r)

    def potential_density(r: float) -> float:
        return (1.0 - r**2) ** 2 * gap**2 * r * angular(r)

    scale = 1.0 - rho
    breaks = [1.0 - m * scale for m in (1.0, 10.0, 100.0) if 1.0 - m * scale > inner_radius]
    opts = {"points": breaks or None, "epsabs": 0.0, "epsrel": 1e-10, "limit": 400}
    dirichlet, _ = integrate.quad(dirichlet_density, inner_radius, 1.0, **opts)
    potential, _ = integrate.quad(potential_density, inner_radius, 1.0, **opts)
    potential /= 4.0 * epsilon**2
    return EnergyReport(dirichlet, potential, dirichlet + potential, epsilon)


def rigid_vortex_energy(core: float, grid: Grid, *, outer_radius: float = 1.0) -> EnergyReport:
    """中心固定涡旋 ``z/|z|`` 在 ``A(core, outer_radius)`` 上的能量 (核心截断为 core)."""
    annulus = Annulus(core, outer_radius)
    return energy(harmonic_minimizer(1, annulus, grid), core)


# ==========================================
# Blaschke 插入与 J_pq 中的允许映射
# ==========================================

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def check_offset(offset: float, boundary: Boundary, annulus: Annulus, grid: Grid) -> None:
    """距 boundary 为 offset 的零点能否在网格上分辨.

    径向间距必须小于 offset; 边界圆上的弧长间距 ``R·h_θ`` 不超过 offset/2,
    否则因子在边界上的相位跳变超过半圈, 离散绕数会丢掉这个零点.

    Raises:
        ValidationError: 任一条件不满足, 或 offset 不小于环宽的一半.
    """
    ch = chart(annulus, grid)
    r1, r2 = annulus.r_inner, annulus.r_outer
    if boundary == "outer":
        radius, spacing = r2, ch.max_radial_spacing
    else:
        radius, spacing = r1, r1 * math.expm1(ch.h_s)
    if not offset > spacing:
        raise ValidationError(
            f"offset {offset:g} 必须大于 {boundary} 边界处的网格间距 {spacing:.3g}"
        )
    arc = radius * ch.h_theta
    if arc > offset / ANGULAR_CELLS_PER_OFFSET:
        need = math.ceil(2.0 * math.pi * radius * ANGULAR_CELLS_PER_OFFSET / offset)
        raise ValidationError(
            f"{boundary} 边界处的弧长间距 {arc:.3g} 超过 offset/{ANGULAR_CELLS_PER_OFFSET:g}"
            f" = {offset / ANGULAR_CELLS_PER_OFFSET:.3g}, n_angular 至少为 {need}"
        )
    if not offset < 0.5 * (r2 - r1):
        raise ValidationError(f"offset {offset:g} 必须小于环宽的一半")


def insert_factor(
    u: ComplexField,
    boundary: Boundary,
    sign: int,
    offset: float,
    angle: float,
) -> ComplexField:
    """在距 boundary 为 offset 的位置插入一个 Blaschke 型零点.

    sign = +1 使该边界的度加一, -1 减一. 因子的模长用
    ``|B|^{-(1-V)}`` (外圆因子) 或 ``|B|^{-V}`` (内圆因子) 修正, 使另一条
    边界上也保持 ``|u| = 1``.

    Raises:
        ValidationError: sign 非 ±1, 或网格分辨不了该零点 (见 `check_offset`).
    """
    if sign not in (1, -1):
        raise ValidationError(f"sign 只能为 ±1, 实际 {sign}")
    check_offset(offset, boundary, u.annulus, u.grid)
    ch = u.chart
    r1, r2 = u.annulus.r_inner, u.annulus.r_outer

    z = ch.z
    V = ch.linear_potential()
    if boundary == "outer":
        a = (1.0 - offset / r2) * np.exp(1j * angle)
        factor = (z / r2 - a) / (np.conj(a) * z / r2 - 1.0)
        if sign < 0:
            factor = np.conj(factor)
        weight = 1.0 - V
    else:
        b = (r1 / (r1 + offset)) * np.exp(-1j * angle)
        w = r1 / z
        factor = (w - b) / (np.conj(b) * w - 1.0)
        if sign > 0:
            factor = np.conj(factor)
        weight = V
    modulus = np.maximum(np.abs(factor), 1e-300)
    corrected = factor * np.exp(-weight * np.log(modulus))
    return renormalize_boundary(u.with_values(u.values * corrected))


def _sign(x: int) -> int:
    return 1 if x > 0 else -1


def admissible_map(
    p: int,
    q: int,
    d: int,
    offset: float,
    annulus: Annulus,
    grid: Grid,
) -> ComplexField:
    """J_pq 中 abdeg 落在 ``[d-1/2, d+1/2]`` 的显式映射.

    从 ``e^{idθ}`` 出发, 在外圆附近插入 ``|q-d|`` 个因子, 在内圆附近插入
    ``|p-d|`` 个因子, 零点均匀分布且避开网格射线.

    Args:
        p: 内边界度.
        q: 外边界度.
        d: abdeg 目标.
        offset: 零点到对应边界的距离.
        annulus: 环域.
        grid: 网格.

    Returns:
        允许场.

    Raises:
        ValidationError: offset 非法.
        SectorError: 在当前分辨率下无法得到所需边界度或 abdeg 越出窗口.
    """
    u = harmonic_minimizer(d, annulus, grid)
    if p == d and q == d:
        return u
    base = 0.5 * chart(annulus, grid).h_theta
    n_out = abs(q - d)
    for k in range(n_out):
        u = insert_factor(u, "outer", _sign(q - d), offset, base + 2.0 * math.pi * k / n_out)
    n_in = abs(p - d)
    for k in range(n_in):
        angle = base + math.pi / n_in + 2.0 * math.pi * k / n_in
        u = insert_factor(u, "inner", _sign(p - d), offset, angle)

    got = (boundary_degree(u, inner_contour(grid)), boundary_degree(u, outer_contour(grid)))
    if got != (p, q):
        raise SectorError(f"请求的边界度 {(p, q)} 在当前分辨率下得到 {got}")
    value = abdeg_radial(u)
    if not d - 0.5 <= value <= d + 0.5:
        raise SectorError(f"abdeg = {value:.4f} 越出窗口 [{d - 0.5}, {d + 0.5}]")
    return u

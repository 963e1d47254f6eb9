"""投影梯度流极小化与跨扇区播种协议.

流的每一步: ``u ← renormalize(u - τ·g)``, 若能量上升或边界度改变则 τ 减半重试.
边界行只沿切方向 iu 移动, 随后再投影回 S¹.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .domain import (
    Annulus,
    Grid,
    chart,
    half_level_contour,
    inner_contour,
    outer_contour,
    solve_V,
)
from .errors import (
    AdmissibilityError,
    DegreeUndefinedError,
    SectorError,
    StagnationError,
    ValidationError,
)
from .field import (
    ComplexField,
    EnergyReport,
    energy,
    gl_gradient,
    l2_norm,
    renormalize_boundary,
)
from .harmonic import harmonic_minimizer, i0
from .testmaps import GOLDEN_ANGLE, admissible_map, insert_factor
from .topology import VortexSet, abdeg, boundary_degree, find_vortices, winding_number

logger = logging.getLogger(__name__)

ENERGY_SLACK = 1e-12
STEP_FACTOR = 0.2
GRAD_TOL_FACTOR = 1e-6

__all__ = [
    "LadderRow",
    "MinimizeConfig",
    "MinimizeResult",
    "check_spacing",
    "flow_step",
    "ladder_level",
    "ladder_report",
    "minimize",
    "perturb",
    "residual",
    "sector_protocol",
]


def check_spacing(epsilon: float, annulus: Annulus, grid: Grid) -> None:
    """网格必须解析 ε 尺度: 最大径向间距 ``<= ε/4``.

    Raises:
        ValidationError: 径向间距过大.
    """
    ch = chart(annulus, grid)
    spacing = ch.max_radial_spacing
    if spacing > epsilon / 4.0:
        raise ValidationError(
            f"最大径向间距 {spacing:.4g} 超过 ε/4 = {epsilon / 4.0:.4g}, 请加密 n_radial"
        )
    angular = annulus.r_outer * ch.h_theta
    if angular > epsilon / 4.0:
        logger.warning(
            "angular spacing %.4g at the outer circle exceeds eps/4 = %.4g",
            angular,
            epsilon / 4.0,
        )


@dataclass(frozen=True, slots=True)
class MinimizeConfig:
    """梯度流参数.

    Attributes:
        epsilon: 相干长度 ε.
        d: abdeg 约束的目标整数.
        step: 初始步长, 缺省为 ``0.2·(最小网格间距)²``.
        max_iters: 最大迭代次数.
        grad_tol: 残差收敛阈值, 缺省为 ``1e-6·sqrt(|A|)``.
        record_every: 每隔多少步记录一次能量与 abdeg.
        max_halvings: 回溯减半的最大次数.
    """

    epsilon: float
    d: int
    step: float | None = None
    max_iters: int = 20_000
    grad_tol: float | None = None
    record_every: int = 50
    max_halvings: int = 30

    def __post_init__(self) -> None:
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValidationError(f"epsilon 必须为正, 实际 {self.epsilon}")
        if self.step is not None and not self.step > 0:
            raise ValidationError(f"step 必须为正, 实际 {self.step}")
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ValidationError(f"grad_tol 必须为正, 实际 {self.grad_tol}")
        if self.max_iters < 0:
            raise ValidationError(f"max_iters 不能为负, 实际 {self.max_iters}")
        if self.record_every < 1:
            raise ValidationError(f"record_every 至少为 1, 实际 {self.record_every}")

    def resolve(self, annulus: Annulus, grid: Grid) -> tuple[float, float]:
        """校验网格并给出实际使用的 ``(step, grad_tol)``."""
        check_spacing(self.epsilon, annulus, grid)
        step = self.step
        if step is None:
            step = STEP_FACTOR * chart(annulus, grid).min_spacing ** 2
        tol = self.grad_tol
        if tol is None:
            tol = GRAD_TOL_FACTOR * math.sqrt(annulus.area)
        return step, tol


@dataclass(frozen=True, eq=False)
class MinimizeResult:
    """一次极小化的结果.

    Attributes:
        field: 最终场.
        energy_trace: 记录点上的能量 (首项为初值).
        abdeg_trace: 与 energy_trace 对齐的 abdeg.
        final_degrees: 最终场上测得的 ``(p, q) = (deg ∂ω, deg ∂Ω)``.
        vortices: 最终场的涡旋.
        converged: 残差是否降到 grad_tol 以下.
        target: 要求的扇区 ``(p, q)``.
        degree_change: 记录点上测得的边界度是否偏离 target (此时提前停止).
        sector_escape: abdeg 是否越出窗口 (此时提前停止).
        stagnated: 回溯是否耗尽.
        iterations: 已接受的步数.
        residual: 最终梯度残差.
        half_level_degree: ``{V = 1/2}`` 上 u/|u| 的度, 无定义时为 None.
    """

    field: ComplexField
    energy_trace: tuple[EnergyReport, ...]
    abdeg_trace: tuple[float, ...]
    final_degrees: tuple[int, int]
    vortices: VortexSet
    converged: bool
    d: int
    epsilon: float
    target: tuple[int, int] | None = None
    degree_change: bool = False
    sector_escape: bool = False
    stagnated: bool = False
    iterations: int = 0
    residual: float = math.nan
    half_level_degree: int | None = None
    seed_kind: str = "given"
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def energy(self) -> EnergyReport:
        return self.energy_trace[-1]

    @property
    def abdeg(self) -> float:
        return self.abdeg_trace[-1]

    @property
    def sector(self) -> tuple[int, int]:
        """要求的扇区; 未给定时退回测得的边界度."""
        return self.target if self.target is not None else self.final_degrees

    def to_dict(self) -> dict[str, Any]:
        p, q = self.sector
        return {
            "p": p,
            "q": q,
            "degrees": list(self.final_degrees),
            "degree_change": self.degree_change,
            "d": self.d,
            "epsilon": self.epsilon,
            "energy": self.energy.to_dict(),
            "abdeg": self.abdeg,
            "converged": self.converged,
            "sector_escape": self.sector_escape,
            "stagnated": self.stagnated,
            "iterations": self.iterations,
            "residual": self.residual,
            "half_level_degree": self.half_level_degree,
            "seed_kind": self.seed_kind,
            "vortices": self.vortices.to_list(),
            "energy_trace": [r.total for r in self.energy_trace],
            "abdeg_trace": list(self.abdeg_trace),
        }


def residual(u: ComplexField, epsilon: float) -> float:
    """梯度的离散 L² 范数."""
    return l2_norm(gl_gradient(u, epsilon))


def _boundary_windings(u: ComplexField) -> tuple[int, int]:
    """两条边界圆上的 ``(p, q)``, 不发出非整数警告."""
    return (
        round(winding_number(u, inner_contour(u.grid))),
        round(winding_number(u, outer_contour(u.grid))),
    )


def _descend(
    u: ComplexField,
    grad: ComplexField,
    epsilon: float,
    step: float,
    current: float,
    max_halvings: int,
    degrees: tuple[int, int] | None = None,
) -> tuple[ComplexField, EnergyReport, float]:
    """回溯一步. 给定 degrees 时, 改变边界度的候选与能量上升同样被拒绝."""
    tau = step
    slack = ENERGY_SLACK * max(1.0, abs(current))
    for _ in range(max_halvings + 1):
        candidate = renormalize_boundary(u.with_values(u.values - tau * grad.values))
        report = energy(candidate, epsilon)
        if report.total <= current + slack and (
            degrees is None or _boundary_windings(candidate) == degrees
        ):
            return candidate, report, tau
        tau *= 0.5
    raise StagnationError(f"步长减半 {max_halvings} 次后仍无可接受的下降步")


def flow_step(u: ComplexField, cfg: MinimizeConfig) -> ComplexField:
    """梯度流的一步 (带回溯).

    Raises:
        AdmissibilityError: u 不是允许场.
        StagnationError: 回溯耗尽.
        ValidationError: 网格不解析 ε.
    """
    step, _ = cfg.resolve(u.annulus, u.grid)
    grad = gl_gradient(u, cfg.epsilon)
    current = energy(u, cfg.epsilon).total
    degrees = _boundary_windings(u)
    return _descend(u, grad, cfg.epsilon, step, current, cfg.max_halvings, degrees)[0]


def _in_window(value: float, d: int) -> bool:
    return d - 0.5 <= value <= d + 0.5


def minimize(
    init: ComplexField,
    cfg: MinimizeConfig,
    *,
    target: tuple[int, int] | None = None,
    seed_kind: str = "given",
) -> MinimizeResult:
    """在 abdeg 约束下用投影梯度流极小化 GL 能量.

    Args:
        init: 初始允许场, ``abdeg(init) ∈ (d-1/2, d+1/2)``.
        cfg: 流参数.
        target: 要求的扇区 ``(p, q)``, 缺省取初值的边界度. 流只接受保持它的步.
        seed_kind: 写入结果的初值来源标签.

    Returns:
        极小化结果; abdeg 越出窗口, 边界度偏离 target 或回溯耗尽时提前返回并置位相应标志.

    Raises:
        AdmissibilityError: init 不属于 J.
        SectorError: abdeg(init) 不在开窗口内, 或初值边界度不等于 target.
        ValidationError: 网格不解析 ε.
    """
    started = time.perf_counter()
    step, tol = cfg.resolve(init.annulus, init.grid)
    if not init.is_admissible():
        raise AdmissibilityError(
            f"初值不是允许场, 边界模长误差 {init.boundary_modulus_error():.3e}"
        )
    eps, d = cfg.epsilon, cfg.d
    V = solve_V(init.annulus, init.grid)
    start_abdeg = abdeg(init, V)
    if not d - 0.5 < start_abdeg < d + 0.5:
        raise SectorError(f"初值 abdeg = {start_abdeg:.4f} 不在 ({d - 0.5}, {d + 0.5}) 内")
    start_degrees = _boundary_windings(init)
    if target is None:
        target = start_degrees
    target = (int(target[0]), int(target[1]))
    if start_degrees != target:
        raise SectorError(f"初值边界度 {start_degrees} 不等于目标扇区 {target}")

    u = init
    report = energy(u, eps)
    energies = [report]
    abdegs = [start_abdeg]
    converged = escape = stagnated = shifted = False
    iterations = 0
    res = math.inf
    trial = step
    while True:
        grad = gl_gradient(u, eps)
        res = l2_norm(grad)
        if res <= tol:
            converged = True
            break
        if iterations >= cfg.max_iters:
            break
        try:
            u, report, tau = _descend(
                u, grad, eps, trial, report.total, cfg.max_halvings, target
            )
        except StagnationError:
            stagnated = True
            logger.warning("flow stagnated after %d iterations (residual %.3e)", iterations, res)
            break
        iterations += 1
        trial = min(step, 2.0 * tau)
        if iterations % cfg.record_every == 0:
            energies.append(report)
            abdegs.append(abdeg(u, V))
            logger.debug("iter %d: E=%.8f abdeg=%.6f res=%.3e", iterations, report.total, abdegs[-1], res)
            if not _in_window(abdegs[-1], d):
                escape = True
                break
            if _boundary_windings(u) != target:
                shifted = True
                break

    if iterations % cfg.record_every != 0:
        energies.append(report)
        abdegs.append(abdeg(u, V))
        escape = escape or not _in_window(abdegs[-1], d)
    if escape:
        logger.warning("abdeg left [%g, %g]: %.4f", d - 0.5, d + 0.5, abdegs[-1])

    degrees = (
        boundary_degree(u, inner_contour(u.grid)),
        boundary_degree(u, outer_contour(u.grid)),
    )
    if degrees != target:
        shifted = True
        logger.warning("boundary degrees %s left the target sector %s", degrees, target)
    try:
        half_level: int | None = boundary_degree(u, half_level_contour(V))
    except DegreeUndefinedError:
        half_level = None
    elapsed = time.perf_counter() - started
    logger.info(
        "minimize d=%d eps=%g: E=%.6f degrees=%s iters=%d converged=%s",
        d,
        eps,
        report.total,
        degrees,
        iterations,
        converged,
    )
    return MinimizeResult(
        field=u,
        energy_trace=tuple(energies),
        abdeg_trace=tuple(abdegs),
        final_degrees=degrees,
        vortices=find_vortices(u),
        converged=converged,
        d=d,
        epsilon=eps,
        target=target,
        degree_change=shifted,
        sector_escape=escape,
        stagnated=stagnated,
        iterations=iterations,
        residual=res,
        half_level_degree=half_level,
        seed_kind=seed_kind,
        timings={"minimize": elapsed},
    )


def perturb(u: ComplexField, amplitude: float, seed: int) -> ComplexField:
    """给内部节点加可复现的复高斯扰动, 边界不变."""
    if amplitude == 0:
        return u
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(u.grid.shape) + 1j * rng.standard_normal(u.grid.shape)
    noise[[0, -1]] = 0.0
    return u.with_values(u.values + amplitude * noise)


# ==========================================
# 扇区协议
# ==========================================


def ladder_level(p: int, q: int, d: int) -> int:
    """扇区 (p, q) 在 d 阶梯中的层数 ``|p - d| + |q - d|``."""
    return abs(p - d) + abs(q - d)


def _step_toward(value: int, d: int) -> int:
    return value + (1 if d > value else -1)


def _validate_targets(d: int, targets: Sequence[tuple[int, int]]) -> None:
    for p, q in targets:
        inside = max(p, q) <= d if d >= 0 else min(p, q) >= d
        if not inside:
            raise ValidationError(f"扇区 ({p}, {q}) 不满足 p, q 与 d = {d} 的序关系")
    levels = [ladder_level(p, q, d) for p, q in targets]
    if levels != sorted(levels):
        raise ValidationError("targets 必须按 |p-d| + |q-d| 升序排列")


def _align_phase(seed: ComplexField, reference: ComplexField) -> ComplexField:
    """整体旋转相位, 使内圆第 0 个节点与参考场一致."""
    shift = reference.values[0, 0] / seed.values[0, 0]
    return seed.with_values(seed.values * shift / abs(shift))


def _seed_for(
    p: int,
    q: int,
    d: int,
    done: dict[tuple[int, int], MinimizeResult],
    offset: float,
    annulus: Annulus,
    grid: Grid,
) -> tuple[ComplexField, str]:
    if (p, q) == (d, d):
        return harmonic_minimizer(d, annulus, grid), "harmonic"
    base = 0.5 * chart(annulus, grid).h_theta
    candidates: list[tuple[tuple[int, int], str]] = []
    if q != d:
        candidates.append(((p, _step_toward(q, d)), "outer"))
    if p != d:
        candidates.append(((_step_toward(p, d), q), "inner"))
    for key, where in candidates:
        pred = done.get(key)
        if pred is None or pred.sector_escape or pred.degree_change or pred.final_degrees != key:
            continue
        sign = (q - key[1]) if where == "outer" else (p - key[0])
        existing = abs(key[1] - d) if where == "outer" else abs(key[0] - d)
        seeded = insert_factor(pred.field, where, sign, offset, base + GOLDEN_ANGLE * existing)
        return _align_phase(seeded, pred.field), f"from({key[0]},{key[1]})"
    return admissible_map(p, q, d, offset, annulus, grid), "admissible"


def sector_protocol(
    d: int,
    targets: Iterable[tuple[int, int]],
    cfg: MinimizeConfig,
    *,
    annulus: Annulus,
    grid: Grid,
    offset: float | None = None,
    perturbation: float = 0.0,
    seed: int = 0,
) -> list[MinimizeResult]:
    """按 ``|p-d| + |q-d|`` 递增依次极小化, 每个扇区由前驱极小元插入一个零点得到初值.

    Args:
        d: abdeg 约束的目标.
        targets: ``(p, q)`` 列表, 已按 ae 升序排列.
        cfg: 梯度流参数 (``cfg.d`` 会被 d 覆盖).
        annulus: 环域.
        grid: 网格.
        offset: 插入零点到边界的距离, 缺省为 ε/2.
        perturbation: 初值内部的复高斯扰动幅度.
        seed: 扰动的随机种子.

    Returns:
        与 targets 对齐的结果列表.

    Raises:
        ValidationError: targets 未排序或不满足 p, q <= d.
        SectorError: 某个扇区的初值边界度与目标不符 (通常是网格不解析插入的零点).
    """
    pairs = [(int(p), int(q)) for p, q in targets]
    _validate_targets(d, pairs)
    if cfg.d != d:
        cfg = MinimizeConfig(
            epsilon=cfg.epsilon,
            d=d,
            step=cfg.step,
            max_iters=cfg.max_iters,
            grad_tol=cfg.grad_tol,
            record_every=cfg.record_every,
            max_halvings=cfg.max_halvings,
        )
    if offset is None:
        offset = 0.5 * cfg.epsilon
    done: dict[tuple[int, int], MinimizeResult] = {}
    results: list[MinimizeResult] = []
    for p, q in pairs:
        init, kind = _seed_for(p, q, d, done, offset, annulus, grid)
        init = perturb(init, perturbation, seed)
        logger.info("sector (%d, %d, %d): seed %s", p, q, d, kind)
        result = minimize(init, cfg, target=(p, q), seed_kind=kind)
        done[(p, q)] = result
        results.append(result)
    return results


@dataclass(frozen=True, slots=True)
class LadderRow:
    p: int
    q: int
    d: int
    energy: float
    predicted: float
    relative_gap: float


def ladder_report(results: Iterable[MinimizeResult], annulus: Annulus) -> list[LadderRow]:
    """能量阶梯表: 每行对比 ``E`` 与 ``I₀(d) + π·(|p-d| + |q-d|)``."""
    rows = []
    for result in results:
        p, q = result.sector
        predicted = i0(result.d, annulus) + math.pi * ladder_level(p, q, result.d)
        value = result.energy.total
        gap = (value - predicted) / predicted if predicted else math.nan
        rows.append(LadderRow(p, q, result.d, value, predicted, gap))
    return rows

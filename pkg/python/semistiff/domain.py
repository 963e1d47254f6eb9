"""环域几何, 网格与调和测度.

网格取共形坐标 ``(s, θ) = (log r, θ)``: 数组形状为 ``(n_radial, n_angular)``,
第 0 行位于内圆 ``r = R1``, 最后一行位于外圆 ``r = R2``, 第 j 列对应
``θ_j = j·h_θ`` 并在角向周期延拓.

Examples:
    >>> annulus = Annulus.reference()
    >>> V = solve_V(annulus, Grid(32, 64))
    >>> round(discrete_capacity(V), 6) == round(capacity(annulus), 6)
    True
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from scipy import sparse
from scipy.sparse import linalg as splinalg
from typing_extensions import Self

from .errors import SolverError, ValidationError

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
ComplexArray = NDArray[np.complex128]
IntArray = NDArray[np.int64]
SolveMethod = Literal["auto", "direct", "cg"]

MIN_RADIAL = 16
MIN_ANGULAR = 32
DIRECT_SOLVE_LIMIT = 250_000
SOLVER_RTOL = 1e-10

__all__ = [
    "Annulus",
    "Chart",
    "ComplexArray",
    "Contour",
    "FloatArray",
    "Grid",
    "IntArray",
    "ScalarField",
    "SolveMethod",
    "capacity",
    "chart",
    "dirichlet_form",
    "discrete_capacity",
    "half_level_contour",
    "inner_contour",
    "outer_contour",
    "solve_V",
    "solve_spd",
]


@dataclass(frozen=True, slots=True)
class Annulus:
    """圆环 ``{R1 < |z| < R2}``.

    Attributes:
        r_inner: 内半径 R1.
        r_outer: 外半径 R2.
    """

    r_inner: float
    r_outer: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.r_inner) and math.isfinite(self.r_outer)):
            raise ValidationError(
                f"半径必须为有限数: R1={self.r_inner}, R2={self.r_outer}"
            )
        if not 0 < self.r_inner < self.r_outer:
            raise ValidationError(
                f"需要 0 < R1 < R2, 实际 R1={self.r_inner}, R2={self.r_outer}"
            )

    @classmethod
    def reference(cls) -> Self:
        """参考环域 ``A(1, e)``, 其共形模 L = 1."""
        return cls(1.0, math.e)

    @property
    def log_ratio(self) -> float:
        """共形模 ``L = log(R2/R1)``."""
        return math.log(self.r_outer / self.r_inner)

    @property
    def area(self) -> float:
        return math.pi * (self.r_outer**2 - self.r_inner**2)

    @property
    def capacity(self) -> float:
        return capacity(self)

    def boundary_distance(self, radius: float | FloatArray) -> float | FloatArray:
        """到 ∂A 的距离 ``min(r - R1, R2 - r)``."""
        return np.minimum(radius - self.r_inner, self.r_outer - radius)


@dataclass(frozen=True, slots=True)
class Grid:
    """共形坐标下的张量网格规模."""

    n_radial: int
    n_angular: int

    def __post_init__(self) -> None:
        if self.n_radial < MIN_RADIAL:
            raise ValidationError(
                f"n_radial 至少为 {MIN_RADIAL}, 实际 {self.n_radial}"
            )
        if self.n_angular < MIN_ANGULAR:
            raise ValidationError(
                f"n_angular 至少为 {MIN_ANGULAR}, 实际 {self.n_angular}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_radial, self.n_angular)


@dataclass(frozen=True, eq=False)
class Chart:
    """网格坐标与求积权重, 由 `chart` 构造并缓存.

    Attributes:
        annulus: 所属环域.
        grid: 网格规模.
        h_s: 径向步长 ``L/(n_radial - 1)``.
        h_theta: 角向步长 ``2π/n_angular``.
        s: 各行的 ``log r``.
        theta: 各列的角度.
        r: 各行半径.
        trapezoid: s 方向梯形权重 (两端减半).
        mass: 节点面积权重 ``trapezoid·h_θ·r²``, 即离散 L² 内积的质量.
    """

    annulus: Annulus
    grid: Grid
    h_s: float
    h_theta: float
    s: FloatArray
    theta: FloatArray
    r: FloatArray
    trapezoid: FloatArray
    mass: FloatArray

    @property
    def z(self) -> ComplexArray:
        """节点的复坐标."""
        return self.r[:, None] * np.exp(1j * self.theta)[None, :]

    @property
    def radial_coupling(self) -> float:
        """径向边的耦合系数 ``h_θ/h_s``."""
        return self.h_theta / self.h_s

    @property
    def angular_coupling(self) -> FloatArray:
        """每行角向边的耦合系数 ``w_i/h_θ``, 形状 ``(n_radial, 1)``."""
        return (self.trapezoid / self.h_theta)[:, None]

    @property
    def max_radial_spacing(self) -> float:
        """相邻两行的最大物理间距 (出现在外圆处)."""
        return self.annulus.r_outer * (1.0 - math.exp(-self.h_s))

    @property
    def min_spacing(self) -> float:
        """最小物理网格间距 (出现在内圆处)."""
        r1 = self.annulus.r_inner
        return min(r1 * math.expm1(self.h_s), r1 * self.h_theta)

    def linear_potential(self) -> FloatArray:
        """离散调和测度的精确值 ``(s - log R1)/L``."""
        values = (self.s - self.s[0]) / self.annulus.log_ratio
        return np.broadcast_to(values[:, None], self.grid.shape).copy()


def _frozen(array: NDArray[np.generic]) -> NDArray[np.generic]:
    array.setflags(write=False)
    return array


@functools.lru_cache(maxsize=32)
def chart(annulus: Annulus, grid: Grid) -> Chart:
    """构造 (并缓存) 网格坐标与权重.

    Args:
        annulus: 环域.
        grid: 网格规模.

    Returns:
        只读的 `Chart`.
    """
    n_r, n_t = grid.shape
    h_s = annulus.log_ratio / (n_r - 1)
    h_theta = 2.0 * math.pi / n_t
    s = math.log(annulus.r_inner) + h_s * np.arange(n_r, dtype=np.float64)
    theta = h_theta * np.arange(n_t, dtype=np.float64)
    r = np.exp(s)
    trap = np.full(n_r, h_s)
    trap[[0, -1]] = 0.5 * h_s
    mass = (trap * r**2)[:, None] * np.full((1, n_t), h_theta)
    return Chart(
        annulus=annulus,
        grid=grid,
        h_s=h_s,
        h_theta=h_theta,
        s=_frozen(s),
        theta=_frozen(theta),
        r=_frozen(r),
        trapezoid=_frozen(trap),
        mass=_frozen(mass),
    )


@dataclass(frozen=True, eq=False)
class ScalarField:
    """网格上的实值函数."""

    values: FloatArray
    annulus: Annulus
    grid: Grid

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise ValidationError(
                f"标量场形状 {values.shape} 与网格 {self.grid.shape} 不一致"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError("标量场包含非有限值")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def chart(self) -> Chart:
        return chart(self.annulus, self.grid)


@dataclass(frozen=True, eq=False)
class Contour:
    """网格节点组成的闭合路径, 相邻节点是格点近邻.

    Attributes:
        rows: 各节点的行号.
        cols: 各节点的列号.
        grid: 所属网格.
        label: 便于日志与导出的名称.
    """

    rows: IntArray
    cols: IntArray
    grid: Grid
    label: str = ""

    def __len__(self) -> int:
        return len(self.rows)

    def points(self, annulus: Annulus) -> ComplexArray:
        return chart(annulus, self.grid).z[self.rows, self.cols]

    def signed_area(self, annulus: Annulus) -> float:
        """鞋带公式给出的有向面积, 逆时针为正."""
        z = self.points(annulus)
        z_next = np.roll(z, -1)
        return 0.5 * float(np.sum(z.real * z_next.imag - z_next.real * z.imag))

    def radii(self, annulus: Annulus) -> FloatArray:
        return np.abs(self.points(annulus))


def capacity(annulus: Annulus) -> float:
    """环域容量 ``2π/log(R2/R1)``."""
    return 2.0 * math.pi / annulus.log_ratio


def solve_spd(
    matrix: sparse.spmatrix | sparse.sparray,
    rhs: FloatArray,
    *,
    method: SolveMethod = "auto",
    max_iter: int | None = None,
) -> FloatArray:
    """求解对称正定稀疏方程组.

    Args:
        matrix: 稀疏系数矩阵.
        rhs: 右端项.
        method: ``direct`` 使用稀疏 LU, ``cg`` 使用共轭梯度, ``auto`` 按规模选择.
        max_iter: 共轭梯度迭代上限.

    Returns:
        解向量.

    Raises:
        SolverError: 共轭梯度未在迭代上限内收敛, 或直接法给出非有限解.
    """
    size = rhs.shape[0]
    if method == "auto":
        method = "direct" if size <= DIRECT_SOLVE_LIMIT else "cg"
    if method == "direct":
        solution = np.asarray(splinalg.spsolve(sparse.csc_matrix(matrix), rhs))
        if not np.all(np.isfinite(solution)):
            raise SolverError("稀疏直接求解给出非有限解")
        return solution
    solution, info = splinalg.cg(
        sparse.csr_matrix(matrix), rhs, rtol=SOLVER_RTOL, atol=0.0, maxiter=max_iter
    )
    if info > 0:
        raise SolverError(f"共轭梯度在 {info} 次迭代后仍未收敛")
    if info < 0:
        raise SolverError("共轭梯度输入非法")
    logger.debug("cg solved %d unknowns", size)
    return np.asarray(solution)


def _periodic_second_difference(n: int) -> sparse.csr_matrix:
    op = sparse.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n)).tolil()
    op[0, n - 1] = -1.0
    op[n - 1, 0] = -1.0
    return sparse.csr_matrix(op)


def solve_V(
    annulus: Annulus,
    grid: Grid,
    *,
    method: SolveMethod = "auto",
    max_iter: int | None = None,
) -> ScalarField:
    """求解调和测度: ΔV = 0, 内圆 V = 0, 外圆 V = 1.

    五点格式离散 (s, θ) 上的拉普拉斯方程 (拉普拉斯算子的共形因子
    不影响调和性), 只对内部行求解.

    Args:
        annulus: 环域.
        grid: 网格.
        method: 线性求解方式, 见 `solve_spd`.
        max_iter: 共轭梯度迭代上限.

    Returns:
        离散调和测度.

    Raises:
        SolverError: 迭代求解未收敛.
    """
    ch = chart(annulus, grid)
    n_r, n_t = grid.shape
    m = n_r - 2
    a_s = 1.0 / ch.h_s**2
    a_t = 1.0 / ch.h_theta**2
    radial = sparse.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(m, m)) * a_s
    operator = sparse.kron(radial, sparse.identity(n_t)) + sparse.kron(
        sparse.identity(m), _periodic_second_difference(n_t) * a_t
    )
    rhs = np.zeros(m * n_t)
    rhs[-n_t:] = a_s
    interior = solve_spd(operator, rhs, method=method, max_iter=max_iter)

    values = np.empty(grid.shape)
    values[0] = 0.0
    values[-1] = 1.0
    values[1:-1] = interior.reshape(m, n_t)
    return ScalarField(values, annulus, grid)


def dirichlet_form(a: FloatArray, b: FloatArray, ch: Chart) -> float:
    """离散 Dirichlet 双线性形式 ``∫∇a·∇b``, 按边求和."""
    da_s = np.diff(a, axis=0)
    db_s = np.diff(b, axis=0)
    da_t = np.roll(a, -1, axis=1) - a
    db_t = np.roll(b, -1, axis=1) - b
    radial = ch.radial_coupling * float(np.sum(da_s * db_s))
    angular = float(np.sum(ch.angular_coupling * da_t * db_t))
    return radial + angular


def discrete_capacity(V: ScalarField) -> float:
    """``∫|∇V|²`` 的离散值, 收敛到 cap(A)."""
    return dirichlet_form(V.values, V.values, V.chart)


def half_level_contour(V: ScalarField) -> Contour:
    """近似的 ``{V = 1/2}`` 等值线.

    每列取最接近 1/2 的行, 行号改变处插入径向步, 使路径闭合且逆时针.

    Args:
        V: 调和测度.

    Returns:
        严格位于内部行的闭合路径.
    """
    n_r, n_t = V.grid.shape
    picks = np.clip(np.argmin(np.abs(V.values - 0.5), axis=0), 1, n_r - 2)
    rows: list[int] = []
    cols: list[int] = []
    for j in range(n_t):
        here = int(picks[j])
        rows.append(here)
        cols.append(j)
        nxt_col = (j + 1) % n_t
        target = int(picks[nxt_col])
        step = 1 if target > here else -1
        for i in range(here, target, step):
            rows.append(i)
            cols.append(nxt_col)
    return Contour(
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        V.grid,
        label="half-level",
    )


def _circle(grid: Grid, row: int, label: str) -> Contour:
    cols = np.arange(grid.n_angular, dtype=np.int64)
    return Contour(np.full_like(cols, row), cols, grid, label=label)


def inner_contour(grid: Grid) -> Contour:
    """内圆 ∂ω 上的逆时针节点环."""
    return _circle(grid, 0, "inner")


def outer_contour(grid: Grid) -> Contour:
    """外圆 ∂Ω 上的逆时针节点环."""
    return _circle(grid, grid.n_radial - 1, "outer")

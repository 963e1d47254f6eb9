"""提供 semistiff 测试的公共 Fixtures 和辅助函数."""

from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest
from semistiff.domain import Annulus, Grid, ScalarField, solve_V
from semistiff.field import ComplexField
from semistiff.harmonic import harmonic_minimizer

# ==========================================
# 辅助函数
# ==========================================


def _noisy_field(
    annulus: Annulus, grid: Grid, d: int, amplitude: float, seed: int
) -> ComplexField:
    """在 e^{idθ} 的内部节点上叠加复高斯噪声, 边界保持单位模长."""
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    noise[[0, -1]] = 0.0
    base = harmonic_minimizer(d, annulus, grid)
    return base.with_values(base.values + amplitude * noise)


LADDER_TOML = """\
[experiment]
name = "tiny-ladder"
kind = "ladder"
seeds = [0]

[annulus]
r_inner = 1.0
r_outer = 2.718281828459045

[grid]
n_radial = 32
n_angular = 128

[minimize]
epsilons = [1.0]
max_iters = 20
record_every = 5

[sectors]
targets = [[1, 1, 1], [1, 0, 1]]
"""


# ==========================================
# Fixtures
# ==========================================


@pytest.fixture
def annulus() -> Annulus:
    """参考环域 A(1, e), 共形模 L = 1.

    Returns:
        Annulus: cap = 2π, I₀(d) = πd².
    """
    return Annulus.reference()


@pytest.fixture
def small_grid() -> Grid:
    """允许的最小网格 16 x 32, 在 A(1, e) 上解析 ε >= 0.7.

    Returns:
        Grid: 16 行 32 列.
    """
    return Grid(16, 32)


@pytest.fixture
def grid() -> Grid:
    """中等网格 32 x 64.

    Returns:
        Grid: 32 行 64 列.
    """
    return Grid(32, 64)


@pytest.fixture
def fine_grid() -> Grid:
    """足以分辨距边界 0.3 处零点的网格.

    Returns:
        Grid: 64 行 256 列.
    """
    return Grid(64, 256)


@pytest.fixture
def noisy_field() -> Callable[[Annulus, Grid, int, float, int], ComplexField]:
    """提供带噪声允许场的构造函数 ``(annulus, grid, d, amplitude, seed)``."""
    return _noisy_field


@pytest.fixture
def harmonic_measure(annulus: Annulus, grid: Grid) -> ScalarField:
    """32 x 64 网格上的离散调和测度 V."""
    return solve_V(annulus, grid)


@pytest.fixture
def ladder_config(tmp_path: Path) -> Path:
    """写出一个极小的 ladder 配置文件.

    Returns:
        Path: 配置文件路径.
    """
    path = tmp_path / "ladder.toml"
    path.write_text(LADDER_TOML, encoding="utf-8")
    return path

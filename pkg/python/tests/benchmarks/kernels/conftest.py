"""数值内核基准测试共享 Fixtures."""

import pytest
from semistiff.domain import Annulus, Grid, ScalarField, solve_V
from semistiff.field import ComplexField
from semistiff.testmaps import admissible_map


@pytest.fixture
def bench_grid() -> Grid:
    """基准网格 128 x 512."""
    return Grid(128, 512)


@pytest.fixture
def bench_measure(bench_grid: Grid) -> ScalarField:
    """基准网格上的调和测度."""
    return solve_V(Annulus.reference(), bench_grid)


@pytest.fixture
def bench_field(bench_grid: Grid) -> ComplexField:
    """(1, 0) 扇区的允许映射, 外圆附近有一个涡旋."""
    return admissible_map(1, 0, 1, 0.3, Annulus.reference(), bench_grid)

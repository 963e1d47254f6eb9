"""极小元诊断量测试."""

import numpy as np
import pytest
from semistiff.diagnostics import (
    abdeg_integer_gap,
    boundary_modulus_dip,
    current_potential_gap,
    index_defect,
    interior_bound_constant,
    vortex_energy,
    window_degree_consistent,
)
from semistiff.domain import Annulus, Grid, chart, solve_V
from semistiff.field import energy
from semistiff.harmonic import harmonic_minimizer
from semistiff.minimize import MinimizeConfig, MinimizeResult, minimize
from semistiff.testmaps import admissible_map
from semistiff.topology import find_vortices


def _shrunk(annulus: Annulus, grid: Grid, factor: float):
    u = harmonic_minimizer(1, annulus, grid)
    values = np.array(u.values)
    values[1:-1] *= factor
    return u.with_values(values)


def test_harmonic_map_has_zero_interior_constant(annulus: Annulus, grid: Grid) -> None:
    """|u| = 1 时内部估计常数为 0."""
    assert interior_bound_constant(harmonic_minimizer(1, annulus, grid), 0.5) == 0.0


def test_interior_constant_uses_squared_distance(annulus: Annulus, grid: Grid) -> None:
    """内部模长 0.5 时常数为 0.75·max dist²/ε²."""
    dist = annulus.boundary_distance(chart(annulus, grid).r)
    expected = 0.75 * float(np.max(dist[1:-1])) ** 2 / 0.25
    value = interior_bound_constant(_shrunk(annulus, grid, 0.5), 0.5)
    assert value == pytest.approx(expected)


def test_interior_constant_margin_excludes_everything(annulus: Annulus, grid: Grid) -> None:
    """margin 超过半个环宽时没有节点参与."""
    assert interior_bound_constant(_shrunk(annulus, grid, 0.5), 0.5, margin=2.0) == 0.0


def test_boundary_modulus_dip(annulus: Annulus, grid: Grid) -> None:
    """边界 ε 邻域内的最小模长."""
    assert boundary_modulus_dip(harmonic_minimizer(1, annulus, grid), 0.2) == pytest.approx(1.0)
    assert boundary_modulus_dip(_shrunk(annulus, grid, 0.5), 0.2) == pytest.approx(0.5)


def test_current_potential_gap_of_harmonic_map(annulus: Annulus, grid: Grid) -> None:
    """e^{iθ} 的电流势与 h₀ 一致."""
    assert current_potential_gap(harmonic_minimizer(1, annulus, grid), 1) < 1e-4


def test_abdeg_integer_gap(annulus: Annulus, grid: Grid, harmonic_measure) -> None:
    """e^{iθ} 的 abdeg 是整数."""
    assert abdeg_integer_gap(harmonic_minimizer(1, annulus, grid), harmonic_measure) < 1e-9


@pytest.mark.parametrize("d", [1, 2])
def test_window_degree_consistency_for_harmonic_map(
    annulus: Annulus, grid: Grid, harmonic_measure, d: int
) -> None:
    """窗口判据与半水平线的度同真同假."""
    assert window_degree_consistent(harmonic_minimizer(1, annulus, grid), harmonic_measure, d)


def test_window_degree_consistency_for_admissible_map(annulus: Annulus, fine_grid: Grid) -> None:
    """外圆附近插入零点后 abdeg 仍在窗口内, 半水平线度仍为 d."""
    u = admissible_map(1, 0, 1, 0.3, annulus, fine_grid)
    assert window_degree_consistent(u, solve_V(annulus, fine_grid), 1)


@pytest.mark.parametrize(("p", "q"), [(1, 1), (1, 0), (0, 1), (0, 0)])
def test_index_defect_vanishes(annulus: Annulus, fine_grid: Grid, p: int, q: int) -> None:
    """边界度之差等于涡旋绕数之和."""
    assert index_defect(admissible_map(p, q, 1, 0.3, annulus, fine_grid)) == 0


def test_vortex_energy_is_part_of_total(annulus: Annulus, fine_grid: Grid) -> None:
    """涡旋邻域内的能量为正且不超过总能量."""
    u = admissible_map(1, 0, 1, 0.3, annulus, fine_grid)
    (vortex,) = find_vortices(u)
    local = vortex_energy(u, 0.3, vortex, 0.2)
    assert 0.0 < local < energy(u, 0.3).total
    assert vortex_energy(u, 0.3, vortex, 10.0) == pytest.approx(energy(u, 0.3).total)


# ==========================================
# (1, 1) 极小元随 ε 的变化
# ==========================================


@pytest.fixture(scope="module")
def home_minimizers() -> dict[float, MinimizeResult]:
    """ε = 0.5 与 0.25 下收敛的 (1, 1) 极小元, 48 x 32 网格.

    Returns:
        dict: ε 到结果的映射.
    """
    annulus = Annulus.reference()
    grid = Grid(48, 32)
    results = {}
    for eps in (0.5, 0.25):
        cfg = MinimizeConfig(epsilon=eps, d=1, grad_tol=1e-3, max_iters=40_000, record_every=1000)
        results[eps] = minimize(harmonic_minimizer(1, annulus, grid), cfg, seed_kind="harmonic")
    return results


def test_home_minimizers_converge(home_minimizers) -> None:
    """两个 ε 下都收敛, 且没有涡旋."""
    for result in home_minimizers.values():
        assert result.converged
        assert result.final_degrees == (1, 1)
        assert len(result.vortices) == 0


def test_potential_share_shrinks_with_epsilon(home_minimizers) -> None:
    """E_ε 与 Dirichlet 部分之差 (势能) 随 ε 减小而减小."""
    coarse = home_minimizers[0.5].energy
    fine = home_minimizers[0.25].energy
    assert coarse.total - coarse.dirichlet == pytest.approx(coarse.potential)
    assert 0.0 < fine.potential < 0.7 * coarse.potential


def test_abdeg_gap_shrinks_with_epsilon(home_minimizers) -> None:
    """abdeg 到整数的距离随 ε 减小而减小."""
    V = solve_V(Annulus.reference(), Grid(48, 32))
    coarse = abdeg_integer_gap(home_minimizers[0.5].field, V)
    fine = abdeg_integer_gap(home_minimizers[0.25].field, V)
    assert 0.0 < fine < coarse


def test_interior_constant_is_stable_in_epsilon(home_minimizers) -> None:
    """离边界 0.5 以外的内部估计常数在 ε 减半时变化不超过两倍."""
    coarse = interior_bound_constant(home_minimizers[0.5].field, 0.5, margin=0.5)
    fine = interior_bound_constant(home_minimizers[0.25].field, 0.25, margin=0.5)
    assert coarse > 0.0
    assert fine > 0.0
    assert 0.5 < fine / coarse < 2.0

"""Möbius 边界层, 涡旋-鬼反涡对与 Blaschke 插入测试."""

import math

import numpy as np
import pytest
from semistiff.domain import Annulus, Grid, inner_contour, outer_contour
from semistiff.errors import SectorError, TruncationError, ValidationError
from semistiff.field import energy
from semistiff.harmonic import harmonic_minimizer
from semistiff.testmaps import (
    MoebiusParams,
    admissible_map,
    blaschke,
    build_wt,
    check_offset,
    compose_with_modulus,
    factorize_pair,
    far_field_ratio,
    insert_factor,
    m_lambda,
    m_lambda_series,
    moebius_datum,
    pair_energy,
    pair_field,
    phi_k,
    phi_k_exact,
    profile_derivative,
    profile_fk,
    profile_table,
    rigid_vortex_energy,
)
from semistiff.topology import abdeg_radial, boundary_degree

# ==========================================
# 参数与 Möbius 数据
# ==========================================


@pytest.mark.parametrize(
    "kwargs",
    [{"t": 0.0}, {"t": 1.0}, {"delta": 0.5}, {"delta": 0.0}, {"lam": 0.0}, {"K": -1}],
)
def test_moebius_params_validation(kwargs: dict) -> None:
    """越界参数被拒绝."""
    with pytest.raises(ValidationError):
        MoebiusParams(**kwargs)


def test_moebius_params_requires_lambda_above_two_d_squared() -> None:
    """λ < 2d² 或 d < 1 时不能构造边界层."""
    with pytest.raises(ValidationError, match="λ"):
        MoebiusParams(lam=1.0).check_degree(1)
    with pytest.raises(ValidationError):
        MoebiusParams().check_degree(0)


def test_for_epsilon_picks_lambda() -> None:
    """λ = max{9R2²/(2ε²), 2d²}."""
    ref = Annulus.reference()
    assert MoebiusParams.for_epsilon(0.1, 1, ref).lam == pytest.approx(450.0 * math.e**2)
    assert MoebiusParams.for_epsilon(100.0, 3, ref).lam == 18.0


def test_blaschke_preserves_unit_circle() -> None:
    """C_t 把单位圆映到单位圆."""
    z = np.exp(1j * np.linspace(0.0, 2.0 * math.pi, 97))
    np.testing.assert_allclose(np.abs(blaschke(z, 0.1)), 1.0, rtol=1e-12)


def test_moebius_datum_has_degree_minus_one() -> None:
    """F_t 在单位圆上的度为 -1."""
    z = np.exp(2j * math.pi * np.arange(1024) / 1024)
    values = moebius_datum(z, 0.05)
    steps = np.angle(np.roll(values, -1) * np.conj(values))
    assert round(float(steps.sum()) / (2.0 * math.pi)) == -1


# ==========================================
# 一维剖面
# ==========================================


@pytest.mark.parametrize("k", [-1, 0, 10, 400])
def test_profile_endpoints(k: int) -> None:
    """f_k(1-δ) = 0, f_k(1) = 1."""
    assert float(profile_fk(k, 1, 0.45, 2.0, 0.55)) == pytest.approx(0.0, abs=1e-12)
    assert float(profile_fk(k, 1, 0.45, 2.0, 1.0)) == pytest.approx(1.0, abs=1e-12)


def test_profile_derivative_matches_finite_difference() -> None:
    """解析导数与中心差分一致."""
    h, step = 0.8, 1e-6
    numeric = (
        profile_fk(3, 2, 0.4, 9.0, h + step) - profile_fk(3, 2, 0.4, 9.0, h - step)
    ) / (2.0 * step)
    assert float(profile_derivative(3, 2, 0.4, 9.0, h)) == pytest.approx(float(numeric), rel=1e-6)


def test_profile_table_matches_scalar_profile() -> None:
    """批量表与逐点公式一致."""
    params = MoebiusParams(K=50)
    h = np.linspace(0.55, 1.0, 7)
    table = profile_table(1, params, h)
    assert table.values.shape == (7, 101)
    np.testing.assert_allclose(table.values[:, 50], profile_fk(0, 1, 0.45, 2.0, h), atol=1e-14)


def test_profile_table_rejects_h_outside_layer() -> None:
    """h 不在 [1-δ, 1] 内时报错."""
    with pytest.raises(ValidationError):
        profile_table(1, MoebiusParams(K=50), np.array([0.2, 0.9]))


@pytest.mark.parametrize("k", [-1, 0, 5, 50])
def test_phi_k_quadrature_matches_closed_form(k: int) -> None:
    """数值积分与 d²a·coth(aδ) 相对误差小于 1e-8."""
    assert phi_k(k, 1, 0.45, 2.0) == pytest.approx(phi_k_exact(k, 1, 0.45, 2.0), rel=1e-8)


# ==========================================
# M_λ 与 w_t
# ==========================================


def test_m_lambda_series_is_below_pi() -> None:
    """缺省参数下 M_λ(w_t) 严格小于 π."""
    value = m_lambda_series(1, MoebiusParams())
    assert value < math.pi
    assert 0.85 * math.pi < value < 0.975 * math.pi


def test_m_lambda_direct_matches_series() -> None:
    """直接积分与分离变量级数相对误差小于 1e-3."""
    params = MoebiusParams()
    assert m_lambda(1, params) == pytest.approx(m_lambda_series(1, params), rel=1e-3)


def test_m_lambda_rejects_short_truncation() -> None:
    """K 合法但尾项超出容差时抛出 TruncationError."""
    params = MoebiusParams(t=0.05, K=50)
    assert params.tail_bound > 1e-3
    with pytest.raises(TruncationError, match="K"):
        m_lambda(1, params)


@pytest.mark.parametrize("K", [0, 10, 49])
def test_moebius_params_require_truncation_of_at_least_fifty(K: int) -> None:
    """K < 50 在构造参数时即被拒绝."""
    with pytest.raises(ValidationError, match="K"):
        MoebiusParams(K=K)


def test_build_wt_has_degrees_one_and_zero(annulus: Annulus) -> None:
    """w_t 的边界度为 (d, d-1) 且满足允许条件."""
    grid = Grid(64, 512)
    w = build_wt(1, MoebiusParams(), annulus, grid)
    assert w.is_admissible()
    assert boundary_degree(w, inner_contour(grid)) == 1
    assert boundary_degree(w, outer_contour(grid)) == 0
    assert far_field_ratio(w, 1, 0.05, 0.45) < 10.0


def test_build_wt_rejects_short_truncation(annulus: Annulus) -> None:
    """截断尾项过大时拒绝构造."""
    with pytest.raises(TruncationError):
        build_wt(1, MoebiusParams(K=50), annulus, Grid(64, 512))


def test_build_wt_requires_resolved_layer(annulus: Annulus) -> None:
    """边界层内行数不足时报错."""
    with pytest.raises(ValidationError, match="边界层"):
        build_wt(1, MoebiusParams(delta=0.05), annulus, Grid(16, 512))


def test_compose_with_modulus_keeps_boundary(annulus: Annulus) -> None:
    """|u|·w 仍为允许场."""
    grid = Grid(64, 512)
    w = build_wt(1, MoebiusParams(), annulus, grid)
    u = harmonic_minimizer(1, annulus, grid)
    assert compose_with_modulus(w, u.with_values(0.9 * u.values)).is_admissible()


# ==========================================
# 涡旋-鬼反涡对
# ==========================================


def test_factorize_pair_recovers_vortex_and_ghost() -> None:
    """从外圆样本恢复 ζ 与 1/ζ̄, 分解误差小于 1e-8."""
    zeta = 0.9 * complex(math.cos(0.3), math.sin(0.3))
    v = pair_field(zeta, Grid(32, 256))
    pair = factorize_pair(v)
    assert abs(pair.vortex - zeta) < 1e-8
    assert abs(pair.ghost - 1.0 / zeta.conjugate()) < 1e-8
    assert pair.modulus_error < 1e-12
    assert pair.factorization_error < 1e-8


@pytest.mark.parametrize("zeta", [1.0, 1.2j, 0.3])
def test_pair_field_rejects_zeta_outside_shell(zeta: complex) -> None:
    """ζ 必须落在 (0.5, 1) 环内."""
    with pytest.raises(ValidationError):
        pair_field(zeta, Grid(16, 32))


def test_pair_dirichlet_is_image_area() -> None:
    """Dirichlet 能量等于单位圆盘减去内盘像的面积."""
    rho = 0.9
    expected = math.pi * (1.0 - 0.25 * (1.0 - rho**2) ** 2 / (1.0 - 0.25 * rho**2) ** 2)
    assert pair_energy(rho, 0.1).dirichlet == pytest.approx(expected, rel=1e-9)


def test_pair_energy_stays_bounded_as_epsilon_shrinks() -> None:
    """ζ 距边界 ε/10 时总能量在 π 附近且对 ε 变化很小."""
    totals = [pair_energy(1.0 - eps / 10.0, eps).total for eps in (0.1, 0.05, 0.025)]
    for total in totals:
        assert math.pi - 0.01 < total < 1.15 * math.pi
    assert max(totals) / min(totals) < 1.05


def test_pair_energy_potential_scales_with_epsilon() -> None:
    """固定 ζ 时势能项按 1/ε² 缩放."""
    a = pair_energy(0.95, 0.2)
    b = pair_energy(0.95, 0.1)
    assert b.dirichlet == pytest.approx(a.dirichlet)
    assert b.potential == pytest.approx(4.0 * a.potential)


def test_rigid_vortex_energy_grows_like_pi_log() -> None:
    """核心减半时能量增加约 π·log 2."""
    grid = Grid(32, 64)
    wide = rigid_vortex_energy(0.1, grid)
    narrow = rigid_vortex_energy(0.05, grid)
    assert narrow.total - wide.total == pytest.approx(math.pi * math.log(2.0), rel=2e-3)


# ==========================================
# Blaschke 插入
# ==========================================


def test_insert_factor_validates_arguments(annulus: Annulus, grid: Grid) -> None:
    """sign 与 offset 越界时报错."""
    u = harmonic_minimizer(1, annulus, grid)
    with pytest.raises(ValidationError, match="sign"):
        insert_factor(u, "outer", 2, 0.3, 0.1)
    with pytest.raises(ValidationError, match="网格间距"):
        insert_factor(u, "outer", 1, 0.01, 0.1)
    with pytest.raises(ValidationError, match="一半"):
        insert_factor(u, "inner", 1, 0.9, 0.1)


def test_insert_factor_requires_angular_resolution(annulus: Annulus, grid: Grid) -> None:
    """外圆弧长间距超过 offset/2 时拒绝插入, 并给出所需的 n_angular."""
    u = harmonic_minimizer(1, annulus, grid)
    with pytest.raises(ValidationError, match="n_angular 至少为 114"):
        insert_factor(u, "outer", -1, 0.3, 0.1)


@pytest.mark.parametrize(
    ("offset", "grid_shape"),
    [(0.01, (128, 256)), (0.01, (300, 2048))],
)
def test_check_offset_rejects_unresolved_zero(
    annulus: Annulus, offset: float, grid_shape: tuple[int, int]
) -> None:
    """ε = 0.1, offset = ε/10 的零点在粗网格上无法分辨."""
    with pytest.raises(ValidationError):
        check_offset(offset, "outer", annulus, Grid(*grid_shape))


def test_check_offset_accepts_resolved_zero(annulus: Annulus) -> None:
    """300 x 4096 网格能分辨距两条边界 0.01 的零点."""
    for boundary in ("outer", "inner"):
        check_offset(0.01, boundary, annulus, Grid(300, 4096))


@pytest.mark.parametrize(("p", "q"), [(1, 0), (0, 1), (2, 1), (1, 2)])
def test_admissible_map_hits_requested_sector(
    annulus: Annulus, fine_grid: Grid, p: int, q: int
) -> None:
    """允许映射的边界度为 (p, q), abdeg 在窗口内."""
    u = admissible_map(p, q, 1, 0.3, annulus, fine_grid)
    assert u.is_admissible()
    assert boundary_degree(u, inner_contour(fine_grid)) == p
    assert boundary_degree(u, outer_contour(fine_grid)) == q
    assert 0.5 <= abdeg_radial(u) <= 1.5


def test_admissible_map_of_home_sector_is_harmonic(annulus: Annulus, grid: Grid) -> None:
    """(d, d) 扇区直接返回 e^{idθ}."""
    u = admissible_map(2, 2, 2, 0.3, annulus, grid)
    np.testing.assert_array_equal(u.values, harmonic_minimizer(2, annulus, grid).values)


def test_admissible_map_rejects_escaped_window(annulus: Annulus, fine_grid: Grid) -> None:
    """零点离边界过远时 abdeg 越出窗口."""
    with pytest.raises(SectorError, match="abdeg"):
        admissible_map(1, 3, 1, 0.8, annulus, fine_grid)


@pytest.mark.parametrize(("p", "q"), [(1, 0), (0, 1), (2, 1), (2, 0)])
def test_admissible_map_respects_degree_lower_bound(
    annulus: Annulus, fine_grid: Grid, p: int, q: int
) -> None:
    """Dirichlet 能量不低于 π·|q - p| (允许 5% 的离散误差)."""
    u = admissible_map(p, q, 1, 0.3, annulus, fine_grid)
    report = energy(u, 0.3)
    assert report.dirichlet >= 0.95 * math.pi * abs(q - p)
    assert report.total >= report.dirichlet

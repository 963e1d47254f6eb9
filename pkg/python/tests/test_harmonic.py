"""(d, d) 扇区基准: I₀, e^{idθ} 与 h₀ 测试."""

import math

import numpy as np
import pytest
from semistiff.domain import Annulus, Grid, chart
from semistiff.field import energy
from semistiff.harmonic import (
    discrete_harmonic_energy,
    h0_field,
    harmonic_baseline,
    harmonic_minimizer,
    i0,
)


@pytest.mark.parametrize("d", [0, 1, 2, -3])
def test_i0_on_reference_annulus_is_pi_d_squared(annulus: Annulus, d: int) -> None:
    """A(1, e) 上 I₀(d) = πd²."""
    assert i0(d, annulus) == pytest.approx(math.pi * d**2)


def test_i0_scales_with_log_ratio() -> None:
    """I₀(d) = πd²·log(R2/R1)."""
    assert i0(2, Annulus(1.0, 2.0)) == pytest.approx(4.0 * math.pi * math.log(2.0))


@pytest.mark.parametrize(("d", "rel"), [(1, 1e-3), (2, 1e-2)])
def test_discrete_energy_converges_to_i0(annulus: Annulus, grid: Grid, d: int, rel: float) -> None:
    """离散调和能量与 I₀ 的差为 O(d²h_θ²)."""
    assert discrete_harmonic_energy(d, annulus, grid) == pytest.approx(i0(d, annulus), rel=rel)
    assert discrete_harmonic_energy(d, annulus, grid) < i0(d, annulus)


def test_harmonic_minimizer_phase_starts_at_one(annulus: Annulus, grid: Grid) -> None:
    """θ = 0 列取值为 1, 每行相同."""
    u = harmonic_minimizer(3, annulus, grid)
    np.testing.assert_allclose(u.values[:, 0], 1.0)
    np.testing.assert_allclose(u.values, np.broadcast_to(u.values[0], grid.shape))


def test_h0_boundary_traces(annulus: Annulus, grid: Grid) -> None:
    """h₀ 在外圆为 1, 在内圆为 1 - d·L."""
    h = h0_field(2, annulus, grid)
    np.testing.assert_allclose(h.values[-1], 1.0, atol=1e-12)
    np.testing.assert_allclose(h.values[0], 1.0 - 2.0 * annulus.log_ratio, atol=1e-12)


def test_h0_is_linear_in_log_radius() -> None:
    """一般环域上 h₀ 关于 log r 线性."""
    ann = Annulus(0.5, 2.0)
    grid = Grid(16, 32)
    h = h0_field(1, ann, grid)
    s = chart(ann, grid).s
    np.testing.assert_allclose(h.values[:, 0], 1.0 + s - math.log(2.0), atol=1e-12)


def test_harmonic_baseline_bundles_consistent_fields(annulus: Annulus, grid: Grid) -> None:
    """基准中的能量, 极小元与 h₀ 彼此一致."""
    baseline = harmonic_baseline(1, annulus, grid)
    assert baseline.d == 1
    assert baseline.energy == pytest.approx(math.pi)
    report = energy(baseline.minimizer, 0.2)
    assert report.total == pytest.approx(baseline.energy, rel=1e-3)
    assert baseline.h0.values.shape == grid.shape

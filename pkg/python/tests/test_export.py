"""CSV, JSON 与 SVG 导出测试."""

import csv
import re
from pathlib import Path

import pytest
from semistiff.domain import Annulus, Grid, solve_V
from semistiff.export import (
    SvgCanvas,
    energy_trace_svg,
    modulus_svg,
    phase_svg,
    vortices_json,
    write_field_csv,
    write_scalar_csv,
)
from semistiff.field import EnergyReport
from semistiff.harmonic import harmonic_minimizer
from semistiff.testmaps import admissible_map
from semistiff.topology import find_vortices


def test_write_scalar_csv(tmp_path: Path, annulus: Annulus, small_grid: Grid) -> None:
    """按行优先写出 s, theta, value."""
    path = write_scalar_csv(solve_V(annulus, small_grid), tmp_path / "V.csv")
    with path.open(encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["s", "theta", "value"]
    assert len(rows) == 1 + 16 * 32
    assert rows[1][:2] == ["0", "0"]
    assert float(rows[1][2]) == 0.0
    assert float(rows[-1][2]) == pytest.approx(1.0)


def test_write_field_csv(tmp_path: Path, annulus: Annulus, small_grid: Grid) -> None:
    """复值场写出实部与虚部."""
    path = write_field_csv(harmonic_minimizer(1, annulus, small_grid), tmp_path / "u.csv")
    with path.open(encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["s", "theta", "re", "im"]
    assert rows[1][2:] == ["1", "0"]


def test_vortices_json_matches_vortex_list(annulus: Annulus, fine_grid: Grid) -> None:
    """JSON 形式与 VortexSet.to_list 一致."""
    vortices = find_vortices(admissible_map(1, 0, 1, 0.3, annulus, fine_grid))
    payload = vortices_json(vortices)
    assert payload == vortices.to_list()
    assert payload[0]["winding"] == -1


def test_svg_canvas_escapes_text(tmp_path: Path) -> None:
    """标题中的 XML 特殊字符被转义."""
    canvas = SvgCanvas(10, 10)
    canvas.text(0, 0, "<E & F>")
    text = canvas.save(tmp_path / "t.svg").read_text(encoding="utf-8")
    assert "&lt;E &amp; F&gt;" in text
    assert text.rstrip().endswith("</svg>")


def test_modulus_svg_of_unimodular_field(annulus: Annulus, small_grid: Grid) -> None:
    """|u| = 1 时每个格子都取色标顶端, 画布尺寸按格子数确定."""
    canvas = modulus_svg(harmonic_minimizer(1, annulus, small_grid))
    text = canvas.to_string()
    fills = re.findall(r'<rect [^>]*fill="(#[0-9a-f]{6})"', text)
    assert len(fills) == 16 * 32
    assert set(fills) == {"#fde725"}
    assert (canvas.width, canvas.height) == (32 * 4, 16 * 4 + 20)


def test_large_fields_are_strided(annulus: Annulus) -> None:
    """大网格按步长抽样, 格子数不超过上限."""
    text = phase_svg(harmonic_minimizer(1, annulus, Grid(200, 400))).to_string()
    assert text.count("<rect") == 67 * 134


def test_energy_trace_svg() -> None:
    """折线点数与轨迹长度一致, 空轨迹不画线."""
    trace = [EnergyReport(e, 0.0, e, 0.1) for e in (5.0, 4.0, 3.5)]
    text = energy_trace_svg(trace).to_string()
    (points,) = re.findall(r'points="([^"]*)"', text)
    assert len(points.split()) == 3
    assert "<polyline" not in energy_trace_svg([]).to_string()

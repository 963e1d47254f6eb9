"""场, 涡旋与能量轨迹的导出: CSV, JSON 与手写 SVG."""

from __future__ import annotations

import colorsys
import csv
import math
from collections.abc import Sequence
from pathlib import Path
from typing import Any
from xml.sax.saxutils import escape

import numpy as np

from .domain import ScalarField
from .field import ComplexField, EnergyReport
from .topology import VortexSet

__all__ = [
    "SvgCanvas",
    "energy_trace_svg",
    "modulus_svg",
    "phase_svg",
    "vortices_json",
    "write_field_csv",
    "write_scalar_csv",
]

# viridis 的五个锚点
_VIRIDIS = np.array(
    [
        [68, 1, 84],
        [59, 82, 139],
        [33, 145, 140],
        [94, 201, 98],
        [253, 231, 37],
    ],
    dtype=np.float64,
)
MAX_CELLS = (96, 192)


def write_scalar_csv(field: ScalarField, path: Path | str) -> Path:
    """按行优先写出 ``s,theta,value``."""
    ch = field.chart
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["s", "theta", "value"])
        for i, s in enumerate(ch.s):
            for j, theta in enumerate(ch.theta):
                writer.writerow([f"{s:.12g}", f"{theta:.12g}", f"{field.values[i, j]:.12g}"])
    return path


def write_field_csv(field: ComplexField, path: Path | str) -> Path:
    """按行优先写出 ``s,theta,re,im``."""
    ch = field.chart
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["s", "theta", "re", "im"])
        for i, s in enumerate(ch.s):
            for j, theta in enumerate(ch.theta):
                value = field.values[i, j]
                writer.writerow(
                    [f"{s:.12g}", f"{theta:.12g}", f"{value.real:.12g}", f"{value.imag:.12g}"]
                )
    return path


def vortices_json(vortices: VortexSet) -> list[dict[str, Any]]:
    """``[{x, y, winding, boundary_distance}, ...]``."""
    return vortices.to_list()


class SvgCanvas:
    """逐元素拼接 SVG 文本."""

    def __init__(self, width: int, height: int) -> None:
        self.width = width
        self.height = height
        self._parts: list[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">'
        ]

    def rect(self, x: float, y: float, w: float, h: float, fill: str) -> None:
        self._parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" fill="{fill}"/>'
        )

    def polyline(self, points: Sequence[tuple[float, float]], stroke: str = "#1f77b4") -> None:
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
        self._parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{stroke}" stroke-width="1.5"/>'
        )

    def text(self, x: float, y: float, content: str, size: int = 12) -> None:
        self._parts.append(
            f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" '
            f'font-family="sans-serif">{escape(content)}</text>'
        )

    def to_string(self) -> str:
        return "\n".join([*self._parts, "</svg>"]) + "\n"

    def save(self, path: Path | str) -> Path:
        path = Path(path)
        path.write_text(self.to_string(), encoding="utf-8")
        return path


def _viridis(value: float) -> str:
    x = min(max(value, 0.0), 1.0) * (len(_VIRIDIS) - 1)
    lo = min(int(x), len(_VIRIDIS) - 2)
    r, g, b = _VIRIDIS[lo] + (x - lo) * (_VIRIDIS[lo + 1] - _VIRIDIS[lo])
    return f"#{int(r):02x}{int(g):02x}{int(b):02x}"


def _hue(angle: float) -> str:
    r, g, b = colorsys.hsv_to_rgb((angle / (2.0 * math.pi)) % 1.0, 0.85, 0.95)
    return f"#{int(255 * r):02x}{int(255 * g):02x}{int(255 * b):02x}"


def _strided(values: np.ndarray) -> np.ndarray:
    step_r = max(1, math.ceil(values.shape[0] / MAX_CELLS[0]))
    step_t = max(1, math.ceil(values.shape[1] / MAX_CELLS[1]))
    return values[::step_r, ::step_t]


def _raster(cells: np.ndarray, colour: Any, title: str, cell: int = 4) -> SvgCanvas:
    # 纵轴为 s (内圆在下), 横轴为 θ
    n_r, n_t = cells.shape
    canvas = SvgCanvas(n_t * cell, n_r * cell + 20)
    canvas.text(4, 14, title)
    for i in range(n_r):
        y = 20 + (n_r - 1 - i) * cell
        for j in range(n_t):
            canvas.rect(j * cell, y, cell, cell, colour(cells[i, j]))
    return canvas


def modulus_svg(field: ComplexField, title: str = "|u|") -> SvgCanvas:
    """|u| 在 (θ, s) 平面上的热图, 色标固定在 [0, 1]."""
    return _raster(_strided(np.abs(field.values)), _viridis, title)


def phase_svg(field: ComplexField, title: str = "arg u") -> SvgCanvas:
    """相位的色相图."""
    return _raster(_strided(np.angle(field.values)), _hue, title)


def energy_trace_svg(
    trace: Sequence[EnergyReport], width: int = 480, height: int = 240
) -> SvgCanvas:
    """能量轨迹折线."""
    canvas = SvgCanvas(width, height)
    canvas.text(4, 14, "E_eps")
    totals = [report.total for report in trace]
    if not totals:
        return canvas
    lo, hi = min(totals), max(totals)
    span = hi - lo or 1.0
    margin = 24
    steps = max(len(totals) - 1, 1)
    points = [
        (
            margin + (width - 2 * margin) * k / steps,
            height - margin - (height - 2 * margin) * (value - lo) / span,
        )
        for k, value in enumerate(totals)
    ]
    canvas.polyline(points)
    canvas.text(margin, height - 4, f"{lo:.6g} .. {hi:.6g}", size=10)
    return canvas

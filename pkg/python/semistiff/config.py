"""TOML 实验配置的解析与校验.

示例::

    [experiment]
    name = "ladder-d1"
    kind = "ladder"

    [annulus]
    r_inner = 1.0
    r_outer = 2.718281828459045

    [grid]
    n_radial = 545
    n_angular = 1024

    [minimize]
    epsilons = [0.02]

    [sectors]
    targets = [[1, 1, 1], [1, 0, 1]]
"""

from __future__ import annotations

import dataclasses
import hashlib
import re
import sys
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal, get_args

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .domain import Annulus, Grid
from .errors import ConfigError, ValidationError
from .minimize import MinimizeConfig, check_spacing
from .testmaps import MoebiusParams, check_offset

Kind = Literal["ladder", "admissible", "pair", "testmap"]
KINDS: tuple[str, ...] = get_args(Kind)
GRID_KINDS = ("ladder", "admissible")

__all__ = [
    "KINDS",
    "ExperimentConfig",
    "Kind",
    "MapSettings",
    "SolverSettings",
    "config_hash",
    "load_config",
    "parse_config",
]


@dataclass(frozen=True, slots=True)
class SolverSettings:
    """``[minimize]`` 段."""

    epsilons: tuple[float, ...]
    max_iters: int = 2000
    grad_tol: float | None = None
    record_every: int = 50
    step: float | None = None
    perturbation: float = 0.0

    def for_run(self, epsilon: float, d: int) -> MinimizeConfig:
        return MinimizeConfig(
            epsilon=epsilon,
            d=d,
            step=self.step,
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
            record_every=self.record_every,
        )


@dataclass(frozen=True, slots=True)
class MapSettings:
    """``[testmap]`` 段.

    Attributes:
        ts: Möbius 参数 t 的取值.
        delta: 边界层宽度.
        lam: 罚项系数, 缺省为 2d².
        K: 截断阶数.
        offset_ratio: 插入零点到边界的距离与 ε 之比.
        zeta_ratio: 涡旋对中 ``dist(ζ, ∂B₁)`` 与 ε 之比.
    """

    ts: tuple[float, ...] = (0.05,)
    delta: float = 0.45
    lam: float | None = None
    K: int = 400
    offset_ratio: float = 0.5
    zeta_ratio: float = 0.1

    def params(self, t: float, d: int = 1) -> MoebiusParams:
        lam = self.lam if self.lam is not None else 2.0 * d**2
        return MoebiusParams(t=t, delta=self.delta, lam=lam, K=self.K)


@dataclass(frozen=True, slots=True)
class ExperimentConfig:
    """一份完整的实验配置.

    Attributes:
        name: 实验名称.
        kind: 实验类型.
        annulus: 环域.
        grid: 网格.
        solver: 梯度流设置.
        sectors: ``(p, q, d)`` 列表.
        testmap: 试验映射设置.
        seeds: 随机种子 (扰动初值).
        workers: 并行进程数.
        output: 输出目录.
        source: 原始配置文本, 用于计算 hash.
    """

    name: str
    kind: Kind
    annulus: Annulus
    grid: Grid
    solver: SolverSettings
    sectors: tuple[tuple[int, int, int], ...] = ()
    testmap: MapSettings = MapSettings()
    seeds: tuple[int, ...] = (0,)
    workers: int = 1
    output: Path | None = None
    source: bytes = b""

    def replace(self, **changes: Any) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)

    def digest(self) -> str:
        return config_hash(self.source, self.seeds)


def config_hash(source: bytes, seeds: tuple[int, ...]) -> str:
    """配置文本与有效种子的 SHA-256."""
    hasher = hashlib.sha256(source)
    hasher.update(("seeds=" + ",".join(map(str, seeds))).encode())
    return hasher.hexdigest()


# ==========================================
# 字段读取
# ==========================================


def _table(data: Mapping[str, Any], name: str, *, required: bool) -> Mapping[str, Any]:
    if name not in data:
        if required:
            raise ConfigError("缺少必需的段", field=name)
        return {}
    value = data[name]
    if not isinstance(value, Mapping):
        raise ConfigError("必须是一个表", field=name)
    return value


def _reject_unknown(table: Mapping[str, Any], section: str, allowed: set[str]) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError("未知字段", field=f"{section}.{key}")


def _number(table: Mapping[str, Any], section: str, key: str, default: Any = ...) -> float:
    path = f"{section}.{key}"
    if key not in table:
        if default is ...:
            raise ConfigError("缺少必需字段", field=path)
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"必须是数值, 实际 {value!r}", field=path)
    return float(value)


def _integer(table: Mapping[str, Any], section: str, key: str, default: Any = ...) -> int:
    path = f"{section}.{key}"
    if key not in table:
        if default is ...:
            raise ConfigError("缺少必需字段", field=path)
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"必须是整数, 实际 {value!r}", field=path)
    return value


def _numbers(table: Mapping[str, Any], section: str, key: str, default: Any = ...) -> tuple[float, ...]:
    path = f"{section}.{key}"
    if key not in table:
        if default is ...:
            raise ConfigError("缺少必需字段", field=path)
        return default
    value = table[key]
    if not isinstance(value, list) or any(
        isinstance(v, bool) or not isinstance(v, (int, float)) for v in value
    ):
        raise ConfigError("必须是数值数组", field=path)
    return tuple(float(v) for v in value)


def _optional_positive(table: Mapping[str, Any], section: str, key: str) -> float | None:
    if key not in table:
        return None
    value = _number(table, section, key)
    if not value > 0:
        raise ConfigError(f"必须为正, 实际 {value}", field=f"{section}.{key}")
    return value


def _wrap(field: str, build: Any, *args: Any, **kwargs: Any) -> Any:
    try:
        return build(*args, **kwargs)
    except ValidationError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), field=field) from e


def parse_config(data: Mapping[str, Any], *, source: bytes = b"") -> ExperimentConfig:
    """把解析后的 TOML 字典校验为 `ExperimentConfig`.

    Raises:
        ConfigError: 缺少字段, 类型错误, 取值非法, ε 不满足网格间距要求,
            或网格分辨不了距边界 offset_ratio·ε 的插入零点.
    """
    _reject_unknown(data, "<root>", {"experiment", "annulus", "grid", "minimize", "sectors", "testmap"})

    exp = _table(data, "experiment", required=True)
    _reject_unknown(exp, "experiment", {"name", "kind", "seeds", "workers", "output"})
    name = exp.get("name", "experiment")
    if not isinstance(name, str) or not name:
        raise ConfigError("必须是非空字符串", field="experiment.name")
    kind = exp.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"必须是 {', '.join(KINDS)} 之一, 实际 {kind!r}", field="experiment.kind")
    seeds_raw = exp.get("seeds", [0])
    if not isinstance(seeds_raw, list) or not seeds_raw or any(
        isinstance(s, bool) or not isinstance(s, int) for s in seeds_raw
    ):
        raise ConfigError("必须是非空整数数组", field="experiment.seeds")
    workers = _integer(exp, "experiment", "workers", 1)
    if workers < 1:
        raise ConfigError("至少为 1", field="experiment.workers")
    output = exp.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("必须是路径字符串", field="experiment.output")

    ann = _table(data, "annulus", required=True)
    _reject_unknown(ann, "annulus", {"r_inner", "r_outer"})
    annulus = _wrap(
        "annulus",
        Annulus,
        _number(ann, "annulus", "r_inner"),
        _number(ann, "annulus", "r_outer"),
    )

    grid_table = _table(data, "grid", required=True)
    _reject_unknown(grid_table, "grid", {"n_radial", "n_angular"})
    n_radial = _integer(grid_table, "grid", "n_radial")
    n_angular = _integer(grid_table, "grid", "n_angular")
    grid = _wrap("grid.n_radial" if n_radial < 16 else "grid.n_angular", Grid, n_radial, n_angular)

    mini = _table(data, "minimize", required=kind != "testmap")
    _reject_unknown(
        mini,
        "minimize",
        {"epsilons", "max_iters", "grad_tol", "record_every", "step", "perturbation"},
    )
    epsilons = _numbers(mini, "minimize", "epsilons", ())
    if kind != "testmap" and not epsilons:
        raise ConfigError("至少需要一个 ε", field="minimize.epsilons")
    if any(not eps > 0 for eps in epsilons):
        raise ConfigError("ε 必须为正", field="minimize.epsilons")
    max_iters = _integer(mini, "minimize", "max_iters", 2000)
    record_every = _integer(mini, "minimize", "record_every", 50)
    if max_iters < 0:
        raise ConfigError("不能为负", field="minimize.max_iters")
    if record_every < 1:
        raise ConfigError("至少为 1", field="minimize.record_every")
    solver = SolverSettings(
        epsilons=epsilons,
        max_iters=max_iters,
        grad_tol=_optional_positive(mini, "minimize", "grad_tol"),
        record_every=record_every,
        step=_optional_positive(mini, "minimize", "step"),
        perturbation=_number(mini, "minimize", "perturbation", 0.0),
    )
    if kind in GRID_KINDS:
        for eps in epsilons:
            _wrap("minimize.epsilons", check_spacing, eps, annulus, grid)

    sec = _table(data, "sectors", required=False)
    _reject_unknown(sec, "sectors", {"targets"})
    raw_targets = sec.get("targets", [])
    if not isinstance(raw_targets, list) or any(
        not isinstance(t, list)
        or len(t) != 3
        or any(isinstance(v, bool) or not isinstance(v, int) for v in t)
        for t in raw_targets
    ):
        raise ConfigError("必须是 [p, q, d] 整数三元组数组", field="sectors.targets")
    sectors = tuple((t[0], t[1], t[2]) for t in raw_targets)

    tm = _table(data, "testmap", required=False)
    _reject_unknown(tm, "testmap", {"t", "delta", "lam", "K", "offset_ratio", "zeta_ratio"})
    defaults = MapSettings()
    testmap = MapSettings(
        ts=_numbers(tm, "testmap", "t", defaults.ts),
        delta=_number(tm, "testmap", "delta", defaults.delta),
        lam=_optional_positive(tm, "testmap", "lam"),
        K=_integer(tm, "testmap", "K", defaults.K),
        offset_ratio=_number(tm, "testmap", "offset_ratio", defaults.offset_ratio),
        zeta_ratio=_number(tm, "testmap", "zeta_ratio", defaults.zeta_ratio),
    )
    for t in testmap.ts:
        _wrap("testmap", testmap.params, t)
    if not 0 < testmap.zeta_ratio:
        raise ConfigError("必须为正", field="testmap.zeta_ratio")
    if not 0 < testmap.offset_ratio:
        raise ConfigError("必须为正", field="testmap.offset_ratio")
    if kind in GRID_KINDS:
        for eps in epsilons:
            for p, q, d in sectors:
                for boundary, moved in (("outer", q != d), ("inner", p != d)):
                    if moved:
                        _wrap(
                            "testmap.offset_ratio",
                            check_offset,
                            testmap.offset_ratio * eps,
                            boundary,
                            annulus,
                            grid,
                        )

    return ExperimentConfig(
        name=name,
        kind=kind,
        annulus=annulus,
        grid=grid,
        solver=solver,
        sectors=sectors,
        testmap=testmap,
        seeds=tuple(seeds_raw),
        workers=workers,
        output=Path(output) if output is not None else None,
        source=source,
    )


_LINE_PATTERN = re.compile(r"line (\d+)")


def load_config(path: Path | str) -> ExperimentConfig:
    """读取并校验 TOML 配置文件.

    Args:
        path: 配置文件路径.

    Returns:
        校验后的配置.

    Raises:
        ConfigError: 文件无法读取, TOML 语法错误 (带行号) 或字段非法.
    """
    path = Path(path)
    try:
        source = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"无法读取配置文件 {path}: {e}") from e
    try:
        data = tomllib.loads(source.decode("utf-8"))
    except UnicodeDecodeError as e:
        raise ConfigError("配置文件必须是 UTF-8 文本") from e
    except tomllib.TOMLDecodeError as e:
        match = _LINE_PATTERN.search(str(e))
        line = int(match.group(1)) if match else None
        raise ConfigError(f"TOML 语法错误: {e}", line=line) from e
    return parse_config(data, source=source)

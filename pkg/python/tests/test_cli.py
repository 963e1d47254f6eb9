"""CLI 命令行工具集成测试.

验证 semistiff CLI 的核心功能:
- run 执行配置并写出结果
- verify 的退出码
- 配置错误与环境变量覆盖
"""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner
from semistiff import __version__
from semistiff.__main__ import _create_cli
from semistiff.runner import RUNS_FILE, SUMMARY_FILE


@pytest.fixture
def cli_runner() -> CliRunner:
    """提供 Click CLI 测试 runner.

    Returns:
        CliRunner: Click 测试 runner 实例.
    """
    return CliRunner()


@pytest.fixture
def cli():
    """提供 CLI Click Command 对象.

    Returns:
        Click Command.
    """
    return _create_cli()


def _run_ids(out_dir: Path) -> list[str]:
    lines = (out_dir / RUNS_FILE).read_text(encoding="utf-8").splitlines()
    return [json.loads(line)["run_id"] for line in lines]


# ==========================================
# run
# ==========================================


def test_cli_run_writes_results(
    cli_runner: CliRunner, cli, ladder_config: Path, tmp_path: Path
) -> None:
    """run 写出 runs.jsonl 与 summary.csv, 并打印汇总."""
    out = tmp_path / "out"
    result = cli_runner.invoke(cli, ["run", str(ladder_config), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "2 ok" in result.output
    assert (out / RUNS_FILE).is_file()
    assert (out / SUMMARY_FILE).is_file()
    assert _run_ids(out) == ["ladder-p1-q1-d1-eps1-s0", "ladder-p1-q0-d1-eps1-s0"]


def test_cli_seed_from_environment(
    cli_runner: CliRunner, cli, ladder_config: Path, tmp_path: Path
) -> None:
    """SEMISTIFF_SEED 覆盖配置中的种子."""
    out = tmp_path / "out"
    result = cli_runner.invoke(
        cli, ["run", str(ladder_config), "--out", str(out)], env={"SEMISTIFF_SEED": "7"}
    )
    assert result.exit_code == 0, result.output
    assert all(run_id.endswith("-s7") for run_id in _run_ids(out))


def test_cli_run_rejects_bad_config(cli_runner: CliRunner, cli, tmp_path: Path) -> None:
    """配置错误时退出码为 1, 并指出出错字段."""
    bad = tmp_path / "bad.toml"
    bad.write_text(
        '[experiment]\nkind = "ladder"\n[annulus]\nr_inner = 1.0\nr_outer = 2.0\n'
        "[grid]\nn_radail = 32\n",
        encoding="utf-8",
    )
    result = cli_runner.invoke(cli, ["run", str(bad), "--out", str(tmp_path / "out")])
    assert result.exit_code == 1
    assert "grid.n_radail" in result.output


def test_cli_run_missing_config(cli_runner: CliRunner, cli, tmp_path: Path) -> None:
    """配置文件不存在时由 click 报告用法错误."""
    result = cli_runner.invoke(cli, ["run", str(tmp_path / "nope.toml")])
    assert result.exit_code == 2


# ==========================================
# verify
# ==========================================


def test_cli_verify_passes_after_run(
    cli_runner: CliRunner, cli, ladder_config: Path, tmp_path: Path
) -> None:
    """刚写出的结果全部 PASS, 退出码为 0."""
    out = tmp_path / "out"
    assert cli_runner.invoke(cli, ["run", str(ladder_config), "--out", str(out)]).exit_code == 0
    result = cli_runner.invoke(cli, ["verify", str(out)])
    assert result.exit_code == 0, result.output
    assert "PASS energy_monotone" in result.output
    assert "FAIL" not in result.output


def test_cli_verify_empty_directory_fails(cli_runner: CliRunner, cli, tmp_path: Path) -> None:
    """空目录校验失败, 退出码为 1."""
    result = cli_runner.invoke(cli, ["verify", str(tmp_path)])
    assert result.exit_code == 1
    assert "no runs found" in result.output


def test_cli_version(cli_runner: CliRunner, cli) -> None:
    """--version 输出版本号."""
    result = cli_runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output
